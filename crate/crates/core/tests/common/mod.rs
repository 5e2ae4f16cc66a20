//! Independent oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lss_core::autoencoder::{grad, AutoencoderParams};
use lss_core::classifier::{cross_entropy, cross_entropy_grad, CnnArch, CnnModel};
use lss_core::lss::LssImage;
use lss_core::windowing::WindowSet;
use lss_core::Label;

/// |X_k| by the textbook sum.
pub fn direct_modulus(x: &[f64], k: usize) -> f64 {
    let n = x.len();
    let (mut re, mut im) = (0.0, 0.0);
    for (j, &v) in x.iter().enumerate() {
        let a = -2.0 * PI * ((k * j) % n) as f64 / n as f64;
        re += v * a.cos();
        im += v * a.sin();
    }
    re.hypot(im)
}

pub fn random_params(d: usize, s: usize, rng: &mut ChaCha8Rng) -> AutoencoderParams {
    let flat: Vec<f64> = (0..2 * d * s + s + d).map(|_| rng.gen_range(-1.5..1.5)).collect();
    AutoencoderParams::from_flat(d, s, &flat).unwrap()
}

pub fn random_windows(d: usize, rows: usize, rng: &mut ChaCha8Rng) -> WindowSet {
    let rows: Vec<Vec<f64>> = (0..rows).map(|_| (0..d).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    WindowSet::from_rows(&rows).unwrap()
}

/// Sum of the objective written out term by term, independent of the library.
pub fn oracle_loss(p: &AutoencoderParams, w: &WindowSet, batch: &[usize], k: usize) -> f64 {
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    let enc = |x: &[f64]| -> Vec<f64> {
        (0..p.s)
            .map(|j| sig((0..p.d).map(|i| p.w1[j * p.d + i] * x[i]).sum::<f64>() + p.b1[j]))
            .collect()
    };
    let dec = |z: &[f64]| -> Vec<f64> {
        (0..p.d)
            .map(|i| sig((0..p.s).map(|j| p.w2[i * p.s + j] * z[j]).sum::<f64>() + p.b2[i]))
            .collect()
    };
    let norm = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let mut total = 0.0;
    for &t in batch {
        let x = w.row(t);
        total += norm(x, &dec(&enc(x)));
        let mut inv = 0.0;
        for kk in 0..k {
            inv += norm(&enc(w.row(t - kk)), &enc(w.row(t - kk - 1)));
        }
        total += inv / k as f64;
    }
    total
}

/// Worst componentwise relative error of the autoencoder gradient against
/// central differences of the oracle loss, over random instances.
pub fn ae_gradient_check(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let d = rng.gen_range(2..11);
        let s = rng.gen_range(1..3);
        let k = rng.gen_range(1..4);
        let p = random_params(d, s, &mut rng);
        let w = random_windows(d, k + 8, &mut rng);
        let batch: Vec<usize> = (k..k + 8).filter(|_| rng.gen_bool(0.7)).collect();
        let batch = if batch.is_empty() { vec![k] } else { batch };
        let g = grad(&p, &w, &batch, k).unwrap().flatten();
        let flat = p.flatten();
        for i in 0..flat.len() {
            let mut up = flat.clone();
            let mut dn = flat.clone();
            up[i] += h;
            dn[i] -= h;
            let lu = oracle_loss(&AutoencoderParams::from_flat(d, s, &up).unwrap(), &w, &batch, k);
            let ld = oracle_loss(&AutoencoderParams::from_flat(d, s, &dn).unwrap(), &w, &batch, k);
            let fd = (lu - ld) / (2.0 * h);
            let scale = g[i].abs().max(fd.abs()).max(1e-6);
            worst = worst.max((g[i] - fd).abs() / scale);
        }
    }
    worst
}

pub fn random_image(rng: &mut ChaCha8Rng, r: usize, density: f64) -> LssImage {
    let cells = (0..r * r).map(|_| u8::from(rng.gen_bool(density))).collect();
    LssImage::from_cells(r, cells).unwrap()
}

pub fn random_model(arch: &CnnArch, seed: u64) -> CnnModel {
    let mut m = CnnModel::init(arch, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
    // nonzero biases exercise every branch of the backward pass
    for p in m.params_mut() {
        *p += rng.gen_range(-0.1..0.1);
    }
    m
}

/// Max relative error of the analytic cross-entropy gradient against central
/// differences, plus the number of parameters compared. Parameters whose
/// perturbation flips a ReLU or max-pool decision are skipped.
pub fn cnn_fd_check(model: &CnnModel, data: &[(Vec<f64>, Label)], h: f64) -> (f64, usize) {
    let batch: Vec<(&[f64], Label)> = data.iter().map(|(x, l)| (x.as_slice(), *l)).collect();
    let (_, g) = cross_entropy_grad(model, &batch).unwrap();
    let analytic = g.flatten();
    let base = model.flatten();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for i in 0..base.len() {
        let eval = |delta: f64| {
            let mut m = model.clone();
            if let Some(p) = m.params_mut().nth(i) {
                *p += delta;
            }
            cross_entropy(&m, &batch).unwrap()
        };
        let (lp, lm, l0) = (eval(h), eval(-h), eval(0.0));
        let fd = (lp - lm) / (2.0 * h);
        // kink detector: one-sided slopes disagree
        let (right, left) = ((lp - l0) / h, (l0 - lm) / h);
        if (right - left).abs() > 1e-3 * (right.abs() + left.abs()).max(1e-6) {
            continue;
        }
        let denom = fd.abs().max(analytic[i].abs()).max(1e-7);
        worst = worst.max((fd - analytic[i]).abs() / denom);
        checked += 1;
    }
    (worst, checked)
}

/// Runs the classifier gradient check over random one-stage instances and
/// returns (worst relative error, fewest smooth parameters in any instance).
pub fn cnn_gradient_check(instances: u64, seed: u64) -> (f64, usize) {
    let arch = CnnArch {
        input: 8,
        channels: vec![3],
        kernel: 3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut fewest = usize::MAX;
    for trial in 0..instances {
        let model = random_model(&arch, seed.wrapping_mul(1_000).wrapping_add(trial));
        let data: Vec<(Vec<f64>, Label)> = (0..2)
            .map(|i| (random_image(&mut rng, 8, 0.3).to_f64(), Label::from_index(i)))
            .collect();
        let (err, checked) = cnn_fd_check(&model, &data, 1e-5);
        worst = worst.max(err);
        fewest = fewest.min(checked);
    }
    (worst, fewest)
}
