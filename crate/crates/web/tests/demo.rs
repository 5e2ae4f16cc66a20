use lss_core::Label;
use lss_web::demo::{self, Lab, INK, PAPER};

#[test]
fn series_lengths_and_noise() {
    let s = demo::series("logistic", 300, 4, None).unwrap();
    assert_eq!(s.len(), 300);
    let noisy = demo::series("logistic", 300, 4, Some(10.0)).unwrap();
    assert_ne!(s.values(), noisy.values());
    assert!(demo::series("henon", 300, 4, None).is_err());
}

#[test]
fn signature_pixels_match_occupancy() {
    let lab = Lab::train(1, 400, 1, 2, 32).unwrap();
    let s = demo::series("white", 400, 9, None).unwrap();
    let sig = lab.signature(&s).unwrap();
    assert_eq!(sig.rgba.len(), 32 * 32 * 4);
    let inked = sig.rgba.chunks(4).filter(|p| *p == INK).count();
    let blank = sig.rgba.chunks(4).filter(|p| *p == PAPER).count();
    assert_eq!(inked + blank, 32 * 32);
    assert!(inked > 0);
    assert!((sig.occupancy - inked as f64 / 1024.0).abs() < 1e-12);
    // same lab, same series -> same pixels
    assert_eq!(lab.signature(&s).unwrap(), sig);
}

#[test]
fn cd_curve_separates_map_from_noise() {
    let logistic = demo::series("logistic", 3000, 2, None).unwrap();
    let (curve, label) = demo::cd_curve(&logistic, 6, 1500).unwrap();
    assert_eq!(curve.cd_values.len(), 6);
    assert_eq!(label, Label::NonStochastic);
    let white = demo::series("white", 3000, 2, None).unwrap();
    let (_, label) = demo::cd_curve(&white, 6, 1500).unwrap();
    assert_eq!(label, Label::Stochastic);
}

#[test]
fn constant_series_is_rejected() {
    let lab = Lab::train(1, 300, 1, 1, 16).unwrap();
    let flat = lss_core::TimeSeries::new(vec![2.0; 50], 1.0, "flat", lss_core::Source::External(Default::default())).unwrap();
    assert!(lab.signature(&flat).is_err());
}
