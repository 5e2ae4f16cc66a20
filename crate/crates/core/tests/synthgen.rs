use std::f64::consts::PI;

use lss_core::synthgen::*;
use lss_core::{GeneratorKind, Label};

/// Periodogram by direct O(n^2) DFT, bins 1..n/2.
fn periodogram(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (1..n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &v) in x.iter().enumerate() {
                let a = -2.0 * PI * (k * j % n) as f64 / n as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            (re * re + im * im) / n as f64
        })
        .collect()
}

/// Least-squares slope of log P against log f, averaged over realizations.
fn spectral_slope(series: impl Fn(u64) -> Vec<f64>, n_real: u64) -> f64 {
    let mut mean_p: Vec<f64> = Vec::new();
    for seed in 0..n_real {
        let p = periodogram(&series(seed));
        if mean_p.is_empty() {
            mean_p = vec![0.0; p.len()];
        }
        mean_p.iter_mut().zip(&p).for_each(|(m, v)| *m += v / n_real as f64);
    }
    let xs: Vec<f64> = (1..=mean_p.len()).map(|k| (k as f64).ln()).collect();
    let ys: Vec<f64> = mean_p.iter().map(|p| p.ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[test]
fn pink_noise_periodogram_slope() {
    let slope = spectral_slope(|s| gen_pink_noise(2048, s).unwrap().into_values(), 8);
    assert!((-1.2..=-0.8).contains(&slope), "pink slope {slope}");
}

#[test]
fn white_noise_periodogram_slope() {
    let slope = spectral_slope(|s| gen_white_noise(2048, s).unwrap().into_values(), 8);
    assert!((-0.1..=0.1).contains(&slope), "white slope {slope}");
}

#[test]
fn white_noise_moments_within_clt_bounds() {
    let n = 20000;
    let x = gen_white_noise(n, 11).unwrap().into_values();
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    // 4 standard errors
    assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
    assert!((var - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt(), "var {var}");
}

#[test]
fn pink_noise_is_standardized() {
    let x = gen_pink_noise(5000, 3).unwrap().into_values();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / x.len() as f64;
    assert!(mean.abs() < 1e-10);
    assert!((var - 1.0).abs() < 1e-10);
}

fn lorenz_at_one(h: f64) -> [f64; 3] {
    let p = LorenzParams::default();
    let steps = (1.0 / h).round() as usize;
    let mut s = [1.0, 1.0, 1.0];
    for _ in 0..steps {
        s = p.rk4_step(s, h);
    }
    s
}

#[test]
fn rk4_is_fourth_order() {
    let dist = |a: [f64; 3], b: [f64; 3]| a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let (a, b, c) = (lorenz_at_one(0.004), lorenz_at_one(0.002), lorenz_at_one(0.001));
    let ratio = dist(a, b) / dist(b, c);
    assert!((12.0..=20.0).contains(&ratio), "error ratio {ratio}");
}

#[test]
fn logistic_follows_the_map() {
    let s = gen_logistic(4.0, 0.3, 4).unwrap().into_values();
    let mut x: f64 = 0.3;
    let mut expect = vec![x];
    for _ in 0..3 {
        x = 4.0 * x * (1.0 - x);
        expect.push(x);
    }
    assert_eq!(s, expect);
    assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn generators_are_deterministic_per_seed() {
    let lp = LorenzParams::default();
    for kind in GeneratorKind::ALL {
        let a = generate_kind(kind, 500, 42, &lp).unwrap();
        let b = generate_kind(kind, 500, 42, &lp).unwrap();
        let c = generate_kind(kind, 500, 43, &lp).unwrap();
        assert_eq!(a.values(), b.values(), "{kind}");
        assert_ne!(a.values(), c.values(), "{kind}");
        assert_eq!(a.label, Some(kind.label()));
    }
}

#[test]
fn small_dataset_round_trips_through_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let m = gen_dataset(tmp.path(), &CorpusSpec::uniform(2, 300), 9).unwrap();
    assert_eq!(m.entries.len(), 8);
    assert_eq!(m.count(Label::Stochastic), 4);
    assert_eq!(m.count(Label::NonStochastic), 4);
    let loaded = DatasetManifest::load(tmp.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(loaded.entries, m.entries);
    for e in &loaded.entries {
        let ts = lss_core::TimeSeries::read_txt(loaded.resolve(e)).unwrap();
        assert_eq!(ts.len(), 300);
        let again = generate_kind(e.kind, 300, e.seed, &LorenzParams::default()).unwrap();
        assert_eq!(ts.values(), again.values(), "{} does not regenerate", e.id);
    }
    let m2 = gen_dataset(&tmp.path().join("again"), &CorpusSpec::uniform(2, 300), 9).unwrap();
    assert_eq!(m2.entries, m.entries);
}

#[test]
fn default_corpus_has_421_series() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = CorpusSpec {
        length: 20,
        ..CorpusSpec::default()
    };
    let m = gen_dataset(tmp.path(), &spec, 0).unwrap();
    assert_eq!(m.entries.len(), 421);
    assert_eq!(m.count(Label::NonStochastic), 210);
    assert_eq!(m.count(Label::Stochastic), 211);
    let ids: std::collections::HashSet<_> = m.entries.iter().map(|e| &e.id).collect();
    assert_eq!(ids.len(), 421);
}
