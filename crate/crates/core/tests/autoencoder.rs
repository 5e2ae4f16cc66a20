mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{ae_gradient_check, oracle_loss, random_params, random_windows};
use lss_core::autoencoder::*;
use lss_core::ingest::normalize;
use lss_core::synthgen::gen_white_noise;
use lss_core::windowing::{frequency_domain_rows, time_domain_rows, SpectralFeaturizer, WindowSet};

#[test]
fn tiny_instance_matches_hand_arithmetic() {
    // D=2, s=1, K=1, windows x0=(0,1), x1=(1,0), x2=(1,1); batch {2}
    let p = AutoencoderParams::from_flat(2, 1, &[0.5, -0.5, 0.0, 1.0, -1.0, 0.0, 0.0]).unwrap();
    let w = WindowSet::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    let s2 = sig(0.0);
    let s1 = sig(0.5);
    let rec = ((1.0 - sig(s2)).powi(2) + (1.0 - sig(-s2)).powi(2)).sqrt();
    let expect = rec + (s2 - s1).abs();
    let got = loss(&p, &w, &[2], 1).unwrap();
    assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
}

#[test]
fn loss_matches_term_by_term_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let d = rng.gen_range(2..11);
        let s = rng.gen_range(1..3);
        let k = rng.gen_range(1..4);
        let p = random_params(d, s, &mut rng);
        let w = random_windows(d, k + 6, &mut rng);
        let batch: Vec<usize> = (k..k + 6).collect();
        let a = loss(&p, &w, &batch, k).unwrap();
        let b = oracle_loss(&p, &w, &batch, k);
        assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
    }
}

#[test]
fn gradient_matches_central_differences() {
    let worst = ae_gradient_check(100, 21);
    assert!(worst <= 1e-4, "worst relative error {worst}");
}

#[test]
fn white_noise_spectra_training_makes_progress() {
    let ts = gen_white_noise(3000, 17).unwrap();
    let f = SpectralFeaturizer::new(10, 10).unwrap();
    let w = frequency_domain_rows(normalize(&ts).unwrap().values(), &f).unwrap();
    let cfg = TrainConfig {
        epochs: 50,
        ..TrainConfig::default()
    };
    let h = train(&w, &cfg).unwrap().loss_history;
    assert_eq!(h.len(), 50);
    assert!(h[49] <= 0.7 * h[0], "first {} last {}", h[0], h[49]);
}

/// Raw white-noise windows sit near the untrained decoder output already, so
/// only a decrease is expected.
#[test]
fn white_noise_windows_training_decreases_loss() {
    let ts = gen_white_noise(3000, 17).unwrap();
    let w = time_domain_rows(normalize(&ts).unwrap().values(), 10).unwrap();
    let cfg = TrainConfig {
        epochs: 50,
        ..TrainConfig::default()
    };
    let h = train(&w, &cfg).unwrap().loss_history;
    assert!(h[49] < h[0], "first {} last {}", h[0], h[49]);
}

#[test]
fn training_does_not_increase_latent_wander() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let series: Vec<f64> = (0..1500).map(|_| 0.5 + rng.gen_range(-1e-3..1e-3)).collect();
    let w = time_domain_rows(&series, 10).unwrap();
    let cfg = TrainConfig {
        epochs: 20,
        seed: 6,
        ..TrainConfig::default()
    };
    let wander = |p: &AutoencoderParams| {
        let z: Vec<f64> = (0..w.len()).map(|t| encode(p, w.row(t)).unwrap()[0]).collect();
        let m = z.iter().sum::<f64>() / z.len() as f64;
        (z.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / z.len() as f64).sqrt()
    };
    let before = init_params(10, 1, cfg.seed).unwrap();
    let after = train(&w, &cfg).unwrap().params;
    assert!(wander(&after) <= wander(&before), "{} > {}", wander(&after), wander(&before));
}

#[test]
fn training_is_deterministic() {
    let ts = gen_white_noise(800, 3).unwrap();
    let w = time_domain_rows(normalize(&ts).unwrap().values(), 10).unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let a = train(&w, &cfg).unwrap();
    let b = train(&w, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn encode_decode_match_scalar_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    for _ in 0..50 {
        let (d, s) = (rng.gen_range(1..12), rng.gen_range(1..4));
        let p = random_params(d, s, &mut rng);
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let z = encode(&p, &v).unwrap();
        for j in 0..s {
            let mut a = p.b1[j];
            for i in 0..d {
                a += p.w1[j * d + i] * v[i];
            }
            assert!((z[j] - sig(a)).abs() < 1e-12);
        }
        let y = decode(&p, &z).unwrap();
        for i in 0..d {
            let mut a = p.b2[i];
            for j in 0..s {
                a += p.w2[i * s + j] * z[j];
            }
            assert!((y[i] - sig(a)).abs() < 1e-12);
        }
    }
}

#[test]
fn save_load_round_trip_and_shape_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = random_params(10, 1, &mut rng);
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("p.ae");
    save_params(&p, &path).unwrap();
    let q = load_params(&path).unwrap();
    assert_eq!(
        p.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        q.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    // header says D=10 but the payload holds a D=8 matrix
    let small = to_bytes(&random_params(8, 1, &mut rng));
    let mut forged = small.clone();
    forged[6..10].copy_from_slice(&10u32.to_le_bytes());
    assert!(matches!(from_bytes(&forged), Err(lss_core::LssError::ShapeMismatch(_))));
    let bytes = to_bytes(&p);
    assert!(from_bytes(&bytes[..bytes.len() - 3]).is_err());
}

proptest! {
    #[test]
    fn loss_is_nonnegative_and_latents_bounded(
        seed in any::<u64>(),
        d in 2usize..8,
        k in 1usize..4,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_params(d, 1, &mut rng);
        let w = random_windows(d, k + 5, &mut rng);
        let batch: Vec<usize> = (k..k + 5).collect();
        prop_assert!(loss(&p, &w, &batch, k).unwrap() >= 0.0);
        for t in 0..w.len() {
            let z = encode(&p, w.row(t)).unwrap()[0];
            prop_assert!(z > 0.0 && z < 1.0);
        }
    }

    #[test]
    fn identical_windows_have_zero_invariance(
        seed in any::<u64>(),
        value in 0.0f64..1.0,
        k in 1usize..4,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_params(10, 1, &mut rng);
        let w = time_domain_rows(&vec![value; 30], 10).unwrap();
        let batch: Vec<usize> = (k..w.len()).collect();
        let terms = loss_terms(&p, &w, &batch, k).unwrap();
        prop_assert_eq!(terms.invariance, 0.0);
        prop_assert_eq!(loss(&p, &w, &batch, k).unwrap(), terms.reconstruction);
    }
}
