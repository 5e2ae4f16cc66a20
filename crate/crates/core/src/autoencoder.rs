//! Single-hidden-layer autoencoder trained for faithful reconstruction plus
//! small latent change between consecutive windows.
//!
//! For a batch of timestamps the objective is
//!
//! ```text
//! sum_t ( |x_t - dec(enc(x_t))| + 1/K sum_{k<K} |s_{t-k} - s_{t-k-1}| )
//! ```
//!
//! with Euclidean norms, `s_t = sigmoid(W1 x_t + b1)` and
//! `dec(s) = sigmoid(W2 s + b2)`.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LssError, Result};
use crate::windowing::WindowSet;

pub const MAGIC: &[u8; 6] = b"LSSAE1";
const MAGIC_STEM: &[u8; 5] = b"LSSAE";

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Weights and biases of one autoencoder. Matrices are row-major:
/// `w1` is `s x d`, `w2` is `d x s`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderParams {
    pub d: usize,
    pub s: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl AutoencoderParams {
    pub fn zeros(d: usize, s: usize) -> Result<Self> {
        if d == 0 || s == 0 {
            return Err(LssError::invalid(format!("autoencoder dims must be >= 1 (d={d}, s={s})")));
        }
        Ok(AutoencoderParams {
            d,
            s,
            w1: vec![0.0; s * d],
            b1: vec![0.0; s],
            w2: vec![0.0; d * s],
            b2: vec![0.0; d],
        })
    }

    /// Number of scalar parameters.
    pub fn len(&self) -> usize {
        2 * self.s * self.d + self.s + self.d
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parameters in file order: w1, b1, w2, b2.
    pub fn flatten(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }

    pub fn from_flat(d: usize, s: usize, flat: &[f64]) -> Result<Self> {
        let mut p = AutoencoderParams::zeros(d, s)?;
        if flat.len() != p.len() {
            return Err(LssError::ShapeMismatch(format!(
                "expected {} parameters for d={d}, s={s}, got {}",
                p.len(),
                flat.len()
            )));
        }
        let (w1, rest) = flat.split_at(s * d);
        let (b1, rest) = rest.split_at(s);
        let (w2, b2) = rest.split_at(d * s);
        p.w1.copy_from_slice(w1);
        p.b1.copy_from_slice(b1);
        p.w2.copy_from_slice(w2);
        p.b2.copy_from_slice(b2);
        Ok(p)
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
    }

    fn check_finite(&self) -> Result<()> {
        if self.flatten().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(LssError::Divergence("autoencoder parameters became non-finite".into()))
        }
    }

    /// `s` latents of `v` written into `out`.
    fn encode_into(&self, v: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.w1[j * self.d..(j + 1) * self.d];
            let a: f64 = row.iter().zip(v).map(|(w, x)| w * x).sum::<f64>() + self.b1[j];
            *o = sigmoid(a);
        }
    }

    fn decode_into(&self, z: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.w2[i * self.s..(i + 1) * self.s];
            let a: f64 = row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>() + self.b2[i];
            *o = sigmoid(a);
        }
    }
}

/// Uniform weights in `[-1/sqrt(d), 1/sqrt(d)]`, zero biases.
pub fn init_params(d: usize, s: usize, seed: u64) -> Result<AutoencoderParams> {
    let mut p = AutoencoderParams::zeros(d, s)?;
    let bound = 1.0 / (d as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for w in p.w1.iter_mut().chain(p.w2.iter_mut()) {
        *w = rng.gen_range(-bound..=bound);
    }
    Ok(p)
}

pub fn encode(params: &AutoencoderParams, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != params.d {
        return Err(LssError::DimensionMismatch {
            expected: params.d,
            got: v.len(),
        });
    }
    let mut out = vec![0.0; params.s];
    params.encode_into(v, &mut out);
    Ok(out)
}

pub fn decode(params: &AutoencoderParams, z: &[f64]) -> Result<Vec<f64>> {
    if z.len() != params.s {
        return Err(LssError::DimensionMismatch {
            expected: params.s,
            got: z.len(),
        });
    }
    let mut out = vec![0.0; params.d];
    params.decode_into(z, &mut out);
    Ok(out)
}

fn check_batch(params: &AutoencoderParams, windows: &WindowSet, batch: &[usize], k: usize) -> Result<()> {
    if k == 0 {
        return Err(LssError::invalid("K must be >= 1"));
    }
    if windows.dim() != params.d {
        return Err(LssError::DimensionMismatch {
            expected: params.d,
            got: windows.dim(),
        });
    }
    for &t in batch {
        if t >= windows.len() {
            return Err(LssError::invalid(format!("timestamp {t} out of range")));
        }
        if t - windows.segment_start(t) < k {
            return Err(LssError::InsufficientHistory { t, needed: k });
        }
    }
    Ok(())
}

fn l2(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Scratch buffers for one timestamp: latents of `t-K ..= t` and the reconstruction.
struct Workspace {
    lat: Vec<f64>,
    dlat: Vec<f64>,
    recon: Vec<f64>,
    g2: Vec<f64>,
    /// Reconstruction and invariance parts of the last evaluated term.
    parts: (f64, f64),
}

impl Workspace {
    fn new(p: &AutoencoderParams, k: usize) -> Self {
        Workspace {
            lat: vec![0.0; (k + 1) * p.s],
            dlat: vec![0.0; (k + 1) * p.s],
            recon: vec![0.0; p.d],
            g2: vec![0.0; p.d],
            parts: (0.0, 0.0),
        }
    }
}

/// Per-timestamp loss, optionally accumulating its gradient into `grad`.
fn timestamp_term(
    p: &AutoencoderParams,
    windows: &WindowSet,
    t: usize,
    k: usize,
    ws: &mut Workspace,
    grad: Option<&mut AutoencoderParams>,
) -> f64 {
    let s = p.s;
    // slot j holds s_{t-K+j}; slot K is s_t
    for j in 0..=k {
        let row = windows.row(t - k + j);
        p.encode_into(row, &mut ws.lat[j * s..(j + 1) * s]);
    }
    let x = windows.row(t);
    let st = &ws.lat[k * s..];
    p.decode_into(st, &mut ws.recon);
    let rec = l2(x.iter().zip(&ws.recon).map(|(a, b)| a - b));

    let mut inv = 0.0;
    for kk in 0..k {
        let a = &ws.lat[(k - kk) * s..(k - kk + 1) * s];
        let b = &ws.lat[(k - kk - 1) * s..(k - kk) * s];
        inv += l2(a.iter().zip(b).map(|(u, v)| u - v));
    }
    ws.parts = (rec, inv / k as f64);
    let value = rec + inv / k as f64;

    let Some(grad) = grad else {
        return value;
    };

    ws.dlat.iter_mut().for_each(|v| *v = 0.0);
    // reconstruction term
    if rec > 0.0 {
        for i in 0..p.d {
            let y = ws.recon[i];
            ws.g2[i] = -(x[i] - y) / rec * y * (1.0 - y);
        }
        for i in 0..p.d {
            let g = ws.g2[i];
            grad.b2[i] += g;
            for j in 0..s {
                grad.w2[i * s + j] += g * ws.lat[k * s + j];
                ws.dlat[k * s + j] += p.w2[i * s + j] * g;
            }
        }
    }
    // invariance term
    for kk in 0..k {
        let hi = k - kk;
        let lo = hi - 1;
        let n = l2((0..s).map(|j| ws.lat[hi * s + j] - ws.lat[lo * s + j]));
        if n > 0.0 {
            for j in 0..s {
                let g = (ws.lat[hi * s + j] - ws.lat[lo * s + j]) / (n * k as f64);
                ws.dlat[hi * s + j] += g;
                ws.dlat[lo * s + j] -= g;
            }
        }
    }
    // back through the encoder sigmoid for every latent used
    for slot in 0..=k {
        let row = windows.row(t - k + slot);
        for j in 0..s {
            let z = ws.lat[slot * s + j];
            let da = ws.dlat[slot * s + j] * z * (1.0 - z);
            if da == 0.0 {
                continue;
            }
            grad.b1[j] += da;
            for (w, xv) in grad.w1[j * p.d..(j + 1) * p.d].iter_mut().zip(row) {
                *w += da * xv;
            }
        }
    }
    value
}

/// Objective summed over `batch` (row indices of `windows`).
pub fn loss(params: &AutoencoderParams, windows: &WindowSet, batch: &[usize], k: usize) -> Result<f64> {
    check_batch(params, windows, batch, k)?;
    let mut ws = Workspace::new(params, k);
    Ok(batch
        .iter()
        .map(|&t| timestamp_term(params, windows, t, k, &mut ws, None))
        .sum())
}

/// The two parts of [`loss`] summed over `batch`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub reconstruction: f64,
    /// `(1/K) sum_k ||s_{t-k} - s_{t-k-1}||`, summed over the batch.
    pub invariance: f64,
}

pub fn loss_terms(params: &AutoencoderParams, windows: &WindowSet, batch: &[usize], k: usize) -> Result<LossTerms> {
    check_batch(params, windows, batch, k)?;
    let mut ws = Workspace::new(params, k);
    let mut out = LossTerms {
        reconstruction: 0.0,
        invariance: 0.0,
    };
    for &t in batch {
        timestamp_term(params, windows, t, k, &mut ws, None);
        out.reconstruction += ws.parts.0;
        out.invariance += ws.parts.1;
    }
    Ok(out)
}

/// Exact gradient of [`loss`]. Norms with zero argument contribute zero.
pub fn grad(
    params: &AutoencoderParams,
    windows: &WindowSet,
    batch: &[usize],
    k: usize,
) -> Result<AutoencoderParams> {
    loss_and_grad(params, windows, batch, k).map(|(_, g)| g)
}

pub fn loss_and_grad(
    params: &AutoencoderParams,
    windows: &WindowSet,
    batch: &[usize],
    k: usize,
) -> Result<(f64, AutoencoderParams)> {
    check_batch(params, windows, batch, k)?;
    let mut g = AutoencoderParams::zeros(params.d, params.s)?;
    let mut ws = Workspace::new(params, k);
    let mut total = 0.0;
    for &t in batch {
        total += timestamp_term(params, windows, t, k, &mut ws, Some(&mut g));
    }
    Ok((total, g))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub k: usize,
    pub seed: u64,
    pub latent_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 100,
            minibatch_size: 64,
            k: 3,
            seed: 0,
            latent_dim: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedAutoencoder {
    pub params: AutoencoderParams,
    /// Mean per-timestamp loss of every epoch.
    pub loss_history: Vec<f64>,
}

/// Plain minibatch SGD over shuffled valid timestamps.
pub fn train(windows: &WindowSet, config: &TrainConfig) -> Result<TrainedAutoencoder> {
    let init = init_params(windows.dim(), config.latent_dim, config.seed)?;
    train_from(init, windows, config)
}

pub fn train_from(
    mut params: AutoencoderParams,
    windows: &WindowSet,
    config: &TrainConfig,
) -> Result<TrainedAutoencoder> {
    if !(config.learning_rate >= 0.0 && config.learning_rate.is_finite()) {
        return Err(LssError::invalid("learning rate must be finite and >= 0"));
    }
    if config.k == 0 || config.minibatch_size == 0 || config.epochs == 0 {
        return Err(LssError::invalid("K, minibatch size and epochs must be >= 1"));
    }
    if windows.dim() != params.d {
        return Err(LssError::DimensionMismatch {
            expected: params.d,
            got: windows.dim(),
        });
    }
    let mut order = windows.valid_timestamps(config.k);
    if order.len() < config.minibatch_size {
        return Err(LssError::TooShort {
            needed: config.minibatch_size,
            got: order.len(),
        });
    }
    let n_valid = order.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED_AE00);
    let mut per_t = vec![0.0; windows.len()];
    let mut ws = Workspace::new(&params, config.k);
    let mut g = AutoencoderParams::zeros(params.d, params.s)?;
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.minibatch_size) {
            g.params_mut().for_each(|v| *v = 0.0);
            for &t in batch {
                per_t[t] = timestamp_term(&params, windows, t, config.k, &mut ws, Some(&mut g));
            }
            if config.learning_rate > 0.0 {
                for (p, d) in params.params_mut().zip(g.flatten()) {
                    *p -= config.learning_rate * d;
                }
            }
        }
        // summed in row order so the value does not depend on the shuffle
        let mut sorted = order.clone();
        sorted.sort_unstable();
        let mean = sorted.iter().map(|&t| per_t[t]).sum::<f64>() / n_valid as f64;
        if !mean.is_finite() {
            return Err(LssError::Divergence(format!("loss became non-finite in epoch {epoch}")));
        }
        params.check_finite()?;
        history.push(mean);
    }
    Ok(TrainedAutoencoder {
        params,
        loss_history: history,
    })
}

/// Little-endian: magic, d and s as u32, then w1, b1, w2, b2 as f64.
pub fn to_bytes(params: &AutoencoderParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(14 + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(params.d as u32).to_le_bytes());
    out.extend_from_slice(&(params.s as u32).to_le_bytes());
    for v in params.flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<AutoencoderParams> {
    if bytes.len() < MAGIC.len() {
        return Err(LssError::Corrupt("file shorter than its magic".into()));
    }
    let (magic, rest) = bytes.split_at(MAGIC.len());
    if magic != MAGIC {
        if magic.starts_with(MAGIC_STEM) {
            return Err(LssError::VersionMismatch {
                expected: String::from_utf8_lossy(MAGIC).into_owned(),
                found: String::from_utf8_lossy(magic).into_owned(),
            });
        }
        return Err(LssError::Corrupt("not an autoencoder weights file".into()));
    }
    if rest.len() < 8 {
        return Err(LssError::Corrupt("truncated header".into()));
    }
    let d = u32::from_le_bytes(rest[0..4].try_into().unwrap()) as usize;
    let s = u32::from_le_bytes(rest[4..8].try_into().unwrap()) as usize;
    let payload = &rest[8..];
    if payload.len() % 8 != 0 {
        return Err(LssError::Corrupt(format!("payload of {} bytes is truncated", payload.len())));
    }
    let flat: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let p = AutoencoderParams::from_flat(d, s, &flat)?;
    p.check_finite().map_err(|_| LssError::Corrupt("non-finite parameter".into()))?;
    Ok(p)
}

pub fn save_params(params: &AutoencoderParams, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(params)).map_err(|e| LssError::file(path, e))
}

pub fn load_params(path: &Path) -> Result<AutoencoderParams> {
    let bytes = fs::read(path).map_err(|e| LssError::file(path, e))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_windows(d: usize, rows: usize, value: f64) -> WindowSet {
        WindowSet::from_rows(&vec![vec![value; d]; rows]).unwrap()
    }

    #[test]
    fn init_bounds_and_determinism() {
        let p = init_params(10, 1, 7).unwrap();
        assert_eq!(p.w1.len(), 10);
        assert!(p.w1.iter().all(|w| w.abs() <= 1.0 / 10f64.sqrt()));
        assert!(p.b1.iter().chain(&p.b2).all(|&b| b == 0.0));
        assert_eq!(p, init_params(10, 1, 7).unwrap());
        assert!(init_params(10, 0, 7).is_err());
    }

    #[test]
    fn zero_params_give_half() {
        let p = AutoencoderParams::zeros(4, 2).unwrap();
        assert_eq!(encode(&p, &[0.3, 9.0, -1.0, 2.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(decode(&p, &[0.1, 0.2]).unwrap(), vec![0.5; 4]);
        assert!(encode(&p, &[0.0; 3]).is_err());
        assert!(decode(&p, &[0.0; 3]).is_err());
    }

    #[test]
    fn saturated_bias() {
        let mut p = AutoencoderParams::zeros(3, 1).unwrap();
        p.b1[0] = 50.0;
        assert!(encode(&p, &[0.0, 1.0, 0.5]).unwrap()[0] >= 1.0 - 1e-9);
    }

    #[test]
    fn constant_series_has_no_invariance_penalty() {
        let p = init_params(4, 1, 3).unwrap();
        let w = constant_windows(4, 8, 0.4);
        let batch = vec![3, 5, 7];
        let total = loss(&p, &w, &batch, 3).unwrap();
        let x = w.row(0);
        let rec = decode(&p, &encode(&p, x).unwrap()).unwrap();
        let r = l2(x.iter().zip(&rec).map(|(a, b)| a - b));
        assert!((total - 3.0 * r).abs() < 1e-12);
    }

    #[test]
    fn insufficient_history_rejected() {
        let p = init_params(4, 1, 3).unwrap();
        let w = constant_windows(4, 8, 0.4);
        assert!(matches!(
            loss(&p, &w, &[2], 3),
            Err(LssError::InsufficientHistory { t: 2, needed: 3 })
        ));
        assert!(loss(&p, &w, &[3], 3).is_ok());
    }

    #[test]
    fn lr_zero_keeps_params() {
        let w = WindowSet::from_rows(&(0..50).map(|i| vec![(i as f64 * 0.37).sin().abs(); 3]).collect::<Vec<_>>())
            .unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 4,
            minibatch_size: 8,
            ..Default::default()
        };
        let out = train(&w, &cfg).unwrap();
        assert_eq!(out.params, init_params(3, 1, 0).unwrap());
        assert!(out.loss_history.windows(2).all(|h| h[0] == h[1]));
    }

    #[test]
    fn persistence_errors() {
        let p = init_params(10, 1, 1).unwrap();
        let bytes = to_bytes(&p);
        assert_eq!(from_bytes(&bytes).unwrap(), p);
        assert!(matches!(from_bytes(&bytes[..bytes.len() - 3]), Err(LssError::Corrupt(_))));
        assert!(matches!(from_bytes(&bytes[..9]), Err(LssError::Corrupt(_))));

        let mut wrong_d = bytes.clone();
        wrong_d[6..10].copy_from_slice(&8u32.to_le_bytes());
        assert!(matches!(from_bytes(&wrong_d), Err(LssError::ShapeMismatch(_))));

        let mut v2 = bytes.clone();
        v2[5] = b'2';
        assert!(matches!(from_bytes(&v2), Err(LssError::VersionMismatch { .. })));
        assert!(matches!(from_bytes(b"hello world, not weights"), Err(LssError::Corrupt(_))));
    }
}
