//! Everything the page does, in plain Rust so it runs and tests natively.

use lss_core::baseline_ci::{self, CiConfig, CiCurve};
use lss_core::ingest;
use lss_core::lss::Embedding;
use lss_core::pipeline::{self, AeHyper, PipelineConfig};
use lss_core::synthgen::{self, derive_seed, LorenzParams};
use lss_core::{GeneratorKind, Label, LssError, Result, TimeSeries};

pub const INK: [u8; 4] = [24, 28, 56, 255];
pub const PAPER: [u8; 4] = [255, 255, 255, 255];

pub fn parse_kind(kind: &str) -> Result<GeneratorKind> {
    kind.parse()
}

/// One synthetic series, optionally with Gaussian noise at `snr_db`.
pub fn series(kind: &str, length: usize, seed: u64, snr_db: Option<f64>) -> Result<TimeSeries> {
    let ts = synthgen::generate_kind(parse_kind(kind)?, length, seed, &LorenzParams::default())?;
    match snr_db {
        Some(snr) => synthgen::add_noise_snr(&ts, snr, seed ^ 0x0015E),
        None => Ok(ts),
    }
}

/// Rendered signature of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    pub resolution: usize,
    pub rgba: Vec<u8>,
    pub occupancy: f64,
}

/// Encoders trained on a small in-memory corpus, with the raster extent
/// calibrated on that corpus.
#[derive(Debug, Clone)]
pub struct Lab {
    embedding: Embedding,
    resolution: usize,
}

impl Lab {
    /// Train on `per_kind` series of every generator kind.
    pub fn train(seed: u64, length: usize, per_kind: usize, epochs: usize, resolution: usize) -> Result<Lab> {
        if per_kind == 0 {
            return Err(LssError::invalid("need at least one series per kind"));
        }
        let lorenz = LorenzParams::default();
        let mut normalized = Vec::new();
        for kind in GeneratorKind::ALL {
            for i in 0..per_kind {
                let ts = synthgen::generate_kind(kind, length, derive_seed(seed, kind, i), &lorenz)?;
                normalized.push(ingest::normalize(&ts)?.into_values());
            }
        }
        let config = PipelineConfig {
            autoencoder: AeHyper {
                epochs,
                ..AeHyper::default()
            },
            resolution,
            master_seed: seed,
            ..PipelineConfig::default()
        };
        let (embedding, _, _) = pipeline::train_embedding(&normalized, &config)?;
        let (embedding, _) = pipeline::calibrate(embedding, &normalized)?;
        Ok(Lab { embedding, resolution })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn signature(&self, series: &TimeSeries) -> Result<Signature> {
        let normalized = ingest::normalize(series)?;
        let img = self.embedding.image(normalized.values(), self.resolution)?;
        let rgba = img
            .cells()
            .iter()
            .flat_map(|&c| if c != 0 { INK } else { PAPER })
            .collect();
        Ok(Signature {
            resolution: self.resolution,
            rgba,
            occupancy: img.occupancy(),
        })
    }
}

/// Correlation dimension per embedding dimension, with the CI label.
pub fn cd_curve(series: &TimeSeries, ed_max: usize, max_points: usize) -> Result<(CiCurve, Label)> {
    let config = CiConfig {
        ed_max,
        max_points,
        ..CiConfig::default()
    };
    let curve = baseline_ci::correlation_dimension(series.values(), &config)?;
    let label = baseline_ci::ci_label(&curve);
    Ok((curve, label))
}
