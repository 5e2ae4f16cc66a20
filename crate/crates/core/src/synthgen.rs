//! Synthetic training corpus: Lorenz, logistic map, white and pink noise.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{LssError, Result};
use crate::series::{GeneratorKind, Label, Source, TimeSeries};

pub const DEFAULT_LENGTH: usize = 30_000;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observable {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LorenzParams {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
    pub x0: f64,
    pub y0: f64,
    pub z0: f64,
    pub dt_integration: f64,
    pub n_steps: usize,
    pub observable: Observable,
    /// Half-width of the seeded uniform perturbation applied to (x0, y0, z0).
    pub jitter: f64,
}

impl Default for LorenzParams {
    fn default() -> Self {
        LorenzParams {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
            x0: 1.0,
            y0: 1.0,
            z0: 1.0,
            dt_integration: 0.01,
            n_steps: DEFAULT_LENGTH,
            observable: Observable::X,
            jitter: 0.5,
        }
    }
}

impl LorenzParams {
    fn validate(&self) -> Result<()> {
        if !(self.dt_integration > 0.0 && self.dt_integration.is_finite()) {
            return Err(LssError::invalid("dt_integration must be > 0"));
        }
        if self.n_steps == 0 {
            return Err(LssError::invalid("n_steps must be >= 1"));
        }
        let all = [self.sigma, self.rho, self.beta, self.x0, self.y0, self.z0, self.jitter];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(LssError::invalid("Lorenz parameters must be finite"));
        }
        Ok(())
    }

    fn derivative(&self, s: [f64; 3]) -> [f64; 3] {
        let [x, y, z] = s;
        [
            self.sigma * (y - x),
            x * (self.rho - z) - y,
            x * y - self.beta * z,
        ]
    }

    /// One classical fourth-order Runge–Kutta step.
    pub fn rk4_step(&self, s: [f64; 3], h: f64) -> [f64; 3] {
        let add = |a: [f64; 3], b: [f64; 3], k: f64| [a[0] + k * b[0], a[1] + k * b[1], a[2] + k * b[2]];
        let k1 = self.derivative(s);
        let k2 = self.derivative(add(s, k1, h / 2.0));
        let k3 = self.derivative(add(s, k2, h / 2.0));
        let k4 = self.derivative(add(s, k3, h));
        let mut out = s;
        for i in 0..3 {
            out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }

    /// Initial state after the seeded perturbation.
    pub fn initial_state(&self, seed: u64) -> [f64; 3] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut jit = || {
            if self.jitter > 0.0 {
                rng.gen_range(-self.jitter..=self.jitter)
            } else {
                0.0
            }
        };
        [self.x0 + jit(), self.y0 + jit(), self.z0 + jit()]
    }
}

/// Integrate the Lorenz system and record one coordinate after every step.
pub fn gen_lorenz(params: &LorenzParams, seed: u64) -> Result<TimeSeries> {
    params.validate()?;
    let axis = match params.observable {
        Observable::X => 0,
        Observable::Y => 1,
        Observable::Z => 2,
    };
    let mut state = params.initial_state(seed);
    let mut values = Vec::with_capacity(params.n_steps);
    for step in 0..params.n_steps {
        state = params.rk4_step(state, params.dt_integration);
        if state.iter().any(|v| !v.is_finite()) {
            return Err(LssError::Divergence(format!("Lorenz trajectory blew up at step {step}")));
        }
        values.push(state[axis]);
    }
    let ts = TimeSeries::new(
        values,
        params.dt_integration,
        format!("lorenz_{seed}"),
        Source::Synthetic(GeneratorKind::Lorenz),
    )?;
    Ok(ts.with_label(Label::NonStochastic))
}

/// Iterate `x <- r x (1 - x)` starting from `x0` (which is the first sample).
pub fn gen_logistic(r: f64, x0: f64, length: usize) -> Result<TimeSeries> {
    if !(r > 0.0 && r <= 4.0) {
        return Err(LssError::invalid(format!("growth rate {r} outside (0, 4]")));
    }
    if !(x0 > 0.0 && x0 < 1.0) {
        return Err(LssError::invalid(format!("x0 {x0} outside (0, 1)")));
    }
    if length == 0 {
        return Err(LssError::invalid("length must be >= 1"));
    }
    let mut values = Vec::with_capacity(length);
    let mut x = x0;
    for _ in 0..length {
        values.push(x);
        x = r * x * (1.0 - x);
    }
    let ts = TimeSeries::new(
        values,
        1.0,
        format!("logistic_{x0}"),
        Source::Synthetic(GeneratorKind::Logistic),
    )?;
    Ok(ts.with_label(Label::NonStochastic))
}

/// Seeded i.i.d. standard Gaussian draws.
pub fn gen_white_noise(length: usize, seed: u64) -> Result<TimeSeries> {
    if length == 0 {
        return Err(LssError::invalid("length must be >= 1"));
    }
    let ts = TimeSeries::new(
        gaussian(length, seed),
        1.0,
        format!("white_{seed}"),
        Source::Synthetic(GeneratorKind::White),
    )?;
    Ok(ts.with_label(Label::Stochastic))
}

fn gaussian(length: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..length).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Add seeded Gaussian noise whose variance is the series variance divided
/// by `10^(snr_db / 10)`. Label and source are kept.
pub fn add_noise_snr(series: &TimeSeries, snr_db: f64, seed: u64) -> Result<TimeSeries> {
    if !snr_db.is_finite() {
        return Err(LssError::invalid(format!("SNR {snr_db} dB must be finite")));
    }
    let v = series.values();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let power = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let sd = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    let noisy = v.iter().zip(gaussian(v.len(), seed)).map(|(x, e)| x + sd * e).collect();
    series.map_values(noisy)
}

/// 1/f noise by spectral shaping of seeded white noise.
pub fn gen_pink_noise(length: usize, seed: u64) -> Result<TimeSeries> {
    let values = colored_noise(length, seed, 1.0)?;
    let ts = TimeSeries::new(
        values,
        1.0,
        format!("pink_{seed}"),
        Source::Synthetic(GeneratorKind::Pink),
    )?;
    Ok(ts.with_label(Label::Stochastic))
}

/// Noise with power spectrum ~ 1/f^exponent, zero mean and unit variance.
///
/// Bin `k` and its mirror `n - k` share frequency `min(k, n - k)`, so the
/// amplitude scale `f^(-exponent/2)` keeps the spectrum Hermitian and the
/// inverse transform real.
pub fn colored_noise(length: usize, seed: u64, exponent: f64) -> Result<Vec<f64>> {
    if length < 2 {
        return Err(LssError::invalid("colored noise needs length >= 2"));
    }
    if !exponent.is_finite() {
        return Err(LssError::invalid("noise exponent must be finite"));
    }
    let mut buf: Vec<Complex<f64>> = gaussian(length, seed)
        .into_iter()
        .map(|v| Complex::new(v, 0.0))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(length).process(&mut buf);
    buf[0] = Complex::new(0.0, 0.0);
    for (k, c) in buf.iter_mut().enumerate().skip(1) {
        let f = k.min(length - k) as f64;
        *c *= f.powf(-exponent / 2.0);
    }
    planner.plan_fft_inverse(length).process(&mut buf);
    let mut values: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let n = length as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter_mut().for_each(|v| *v -= mean);
    let sd = (values.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    if !(sd > 0.0) {
        return Err(LssError::Divergence("colored noise has zero variance".into()));
    }
    values.iter_mut().for_each(|v| *v /= sd);
    Ok(values)
}

/// SplitMix64 mixing of (master seed, kind, index) into a per-series seed.
pub fn derive_seed(master: u64, kind: GeneratorKind, index: usize) -> u64 {
    let mut z = master
        .wrapping_add((kind as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((index as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Logistic starting point in (0.05, 0.95), away from 0.5 and the fixed point 0.75.
pub fn logistic_x0(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let x: f64 = rng.gen_range(0.05..0.95);
        if (x - 0.75).abs() > 1e-6 && (x - 0.5).abs() > 1e-6 {
            return x;
        }
    }
}

/// Produce one series of the given kind with a per-series seed.
pub fn generate_kind(kind: GeneratorKind, length: usize, seed: u64, lorenz: &LorenzParams) -> Result<TimeSeries> {
    let mut ts = match kind {
        GeneratorKind::Lorenz => gen_lorenz(
            &LorenzParams {
                n_steps: length,
                ..lorenz.clone()
            },
            seed,
        )?,
        GeneratorKind::Logistic => gen_logistic(4.0, logistic_x0(seed), length)?,
        GeneratorKind::White => gen_white_noise(length, seed)?,
        GeneratorKind::Pink => gen_pink_noise(length, seed)?,
    };
    ts.id = format!("{kind}_{seed:016x}");
    Ok(ts)
}

/// How many series of each kind to write, and how long.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub counts: BTreeMap<GeneratorKind, usize>,
    pub length: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            counts: BTreeMap::from([
                (GeneratorKind::Lorenz, 105),
                (GeneratorKind::Logistic, 105),
                (GeneratorKind::White, 106),
                (GeneratorKind::Pink, 105),
            ]),
            length: DEFAULT_LENGTH,
        }
    }
}

impl CorpusSpec {
    pub fn uniform(per_kind: usize, length: usize) -> Self {
        CorpusSpec {
            counts: GeneratorKind::ALL.iter().map(|&k| (k, per_kind)).collect(),
            length,
        }
    }

    /// Parse `lorenz=105,logistic=105,white=106,pink=105`. Unlisted kinds get 0.
    pub fn parse_counts(s: &str) -> Result<BTreeMap<GeneratorKind, usize>> {
        let mut counts = BTreeMap::new();
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| LssError::invalid(format!("expected kind=count, got `{part}`")))?;
            let kind: GeneratorKind = k.parse()?;
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| LssError::invalid(format!("bad count `{v}`")))?;
            counts.insert(kind, n);
        }
        Ok(counts)
    }

    fn validate(&self) -> Result<()> {
        if self.counts.values().sum::<usize>() == 0 {
            return Err(LssError::invalid("corpus has no series"));
        }
        if self.length < 2 {
            return Err(LssError::invalid("series length must be >= 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    pub label: Label,
    pub kind: GeneratorKind,
    pub seed: u64,
}

/// The `{entries: [...]}` document written next to a generated corpus.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory relative paths are resolved against; not serialized.
    #[serde(skip)]
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn count(&self, label: Label) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.root.join(&entry.path)
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| LssError::file(path, e))?;
        let mut m: DatasetManifest = serde_json::from_str(&text)?;
        m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut seen = HashSet::new();
        for e in &m.entries {
            if !seen.insert(e.id.as_str()) {
                return Err(LssError::invalid(format!("duplicate manifest id `{}`", e.id)));
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| LssError::file(path, e))
    }
}

/// Write every requested series plus `manifest.json` into `output_dir`.
pub fn gen_dataset(output_dir: &Path, spec: &CorpusSpec, master_seed: u64) -> Result<DatasetManifest> {
    gen_dataset_with(output_dir, spec, master_seed, &LorenzParams::default())
}

pub fn gen_dataset_with(
    output_dir: &Path,
    spec: &CorpusSpec,
    master_seed: u64,
    lorenz: &LorenzParams,
) -> Result<DatasetManifest> {
    spec.validate()?;
    fs::create_dir_all(output_dir).map_err(|e| LssError::file(output_dir, e))?;
    let mut entries = Vec::new();
    for (&kind, &count) in &spec.counts {
        for i in 0..count {
            let seed = derive_seed(master_seed, kind, i);
            let ts = generate_kind(kind, spec.length, seed, lorenz)?;
            let file = PathBuf::from(format!("{}.txt", ts.id));
            ts.write_txt(output_dir.join(&file))?;
            entries.push(ManifestEntry {
                id: ts.id.clone(),
                path: file,
                label: kind.label(),
                kind,
                seed,
            });
        }
    }
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    let manifest = DatasetManifest {
        entries,
        root: output_dir.to_path_buf(),
    };
    manifest.save(output_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_at_snr_has_expected_power() {
        let clean = gen_logistic(4.0, 0.3, 20000).unwrap();
        let noisy = add_noise_snr(&clean, 10.0, 5).unwrap();
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
        };
        let diff: Vec<f64> = noisy.values().iter().zip(clean.values()).map(|(a, b)| a - b).collect();
        let ratio = var(clean.values()) / var(&diff);
        assert!((ratio - 10.0).abs() < 0.5, "ratio {ratio}");
        assert_eq!(noisy.label, clean.label);
    }

    #[test]
    fn logistic_hand_iteration() {
        let ts = gen_logistic(4.0, 0.2, 4).unwrap();
        let expect = [0.2, 0.64, 0.9216, 0.28901376];
        for (a, b) in ts.values().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn logistic_fixed_point() {
        let ts = gen_logistic(4.0, 0.75, 100).unwrap();
        assert!(ts.values().iter().all(|&v| v == 0.75));
    }

    #[test]
    fn logistic_rejects_bad_inputs() {
        assert!(gen_logistic(4.0, 0.0, 10).is_err());
        assert!(gen_logistic(4.0, 1.0, 10).is_err());
        assert!(gen_logistic(4.5, 0.3, 10).is_err());
        assert!(gen_logistic(0.0, 0.3, 10).is_err());
    }

    #[test]
    fn lorenz_classical_is_bounded() {
        let ts = gen_lorenz(&LorenzParams::default(), 3).unwrap();
        assert_eq!(ts.len(), 30_000);
        assert!(ts.values().iter().all(|v| v.is_finite() && v.abs() < 100.0));
        assert_eq!(ts.label, Some(Label::NonStochastic));
    }

    #[test]
    fn lorenz_rho_zero_decays() {
        let p = LorenzParams {
            rho: 0.0,
            x0: 0.1,
            y0: 0.1,
            z0: 0.1,
            jitter: 0.0,
            n_steps: 2000,
            ..Default::default()
        };
        let ts = gen_lorenz(&p, 0).unwrap();
        assert!(ts.values().last().unwrap().abs() < 0.1);
    }

    #[test]
    fn lorenz_validation() {
        let p = LorenzParams {
            dt_integration: 0.0,
            ..Default::default()
        };
        assert!(gen_lorenz(&p, 0).is_err());
        let p = LorenzParams {
            n_steps: 0,
            ..Default::default()
        };
        assert!(gen_lorenz(&p, 0).is_err());
    }

    #[test]
    fn lorenz_blow_up_is_divergence() {
        let p = LorenzParams {
            dt_integration: 10.0,
            n_steps: 100,
            ..Default::default()
        };
        assert!(matches!(gen_lorenz(&p, 0), Err(LssError::Divergence(_))));
    }

    #[test]
    fn white_noise_small_lengths() {
        let ts = gen_white_noise(1, 9).unwrap();
        assert_eq!(ts.len(), 1);
        assert!(gen_white_noise(0, 9).is_err());
        assert!(gen_pink_noise(1, 9).is_err());
    }

    #[test]
    fn pink_noise_is_centered() {
        let ts = gen_pink_noise(30_000, 5).unwrap();
        let mean = ts.values().iter().sum::<f64>() / ts.len() as f64;
        assert!(mean.abs() < 1e-9);
    }

    #[test]
    fn logistic_x0_avoids_pathologies() {
        for s in 0..1000 {
            let x = logistic_x0(s);
            assert!(x > 0.05 && x < 0.95);
            assert!((x - 0.75).abs() > 1e-6 && (x - 0.5).abs() > 1e-6);
        }
    }

    #[test]
    fn parse_counts_string() {
        let c = CorpusSpec::parse_counts("lorenz=105,logistic=105,white=106,pink=105").unwrap();
        assert_eq!(c.values().sum::<usize>(), 421);
        assert!(CorpusSpec::parse_counts("lorenz").is_err());
        assert!(CorpusSpec::parse_counts("rossler=3").is_err());
    }

    #[test]
    fn default_corpus_totals() {
        let spec = CorpusSpec::default();
        let ns: usize = spec
            .counts
            .iter()
            .filter(|(k, _)| k.label() == Label::NonStochastic)
            .map(|(_, n)| n)
            .sum();
        assert_eq!(ns, 210);
        assert_eq!(spec.counts.values().sum::<usize>() - ns, 211);
    }
}
