//! End-to-end orchestration: generate, train both autoencoders, rasterize,
//! train the classifier and write a per-series report.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{self, TrainConfig};
use crate::baseline_ci::{self, CiConfig};
use crate::classifier::{self, CamMap, ClassifierConfig, CnnArch, CnnModel, Prediction, TrainMetrics};
use crate::error::{LssError, Result, StageContext};
use crate::ingest;
use crate::lss::{self, Embedding, LatentTrace, LssImage, RasterExtent};
use crate::series::{Label, TimeSeries};
use crate::synthgen::{self, CorpusSpec, DatasetManifest, MANIFEST_FILE};
use crate::windowing::{SpectralFeaturizer, WindowSet};

pub const TD_MODEL_FILE: &str = "td.ae";
pub const FD_MODEL_FILE: &str = "fd.ae";
pub const EXTENT_FILE: &str = "extent.json";
pub const CNN_MODEL_FILE: &str = "model.cnn";
pub const REPORT_FILE: &str = "report.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AeHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
}

impl Default for AeHyper {
    fn default() -> Self {
        let t = TrainConfig::default();
        AeHyper {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            minibatch_size: t.minibatch_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClfHyper {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub val_fraction: f64,
}

impl Default for ClfHyper {
    fn default() -> Self {
        let c = ClassifierConfig::default();
        ClfHyper {
            lr: c.lr,
            epochs: c.epochs,
            batch: c.batch,
            val_fraction: c.val_fraction,
        }
    }
}

/// Everything a pipeline run depends on. Stored as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Window length N.
    pub window: usize,
    /// Spectral crop M.
    pub crop: usize,
    /// Invariance horizon K.
    pub k: usize,
    pub latent_dim: usize,
    /// Image resolution R.
    pub resolution: usize,
    pub autoencoder: AeHyper,
    pub classifier: ClfHyper,
    pub corpus: CorpusSpec,
    pub master_seed: u64,
    /// Existing corpus directory holding `manifest.json`. When unset the
    /// corpus is generated into `<work_dir>/data`.
    pub data_dir: Option<PathBuf>,
    pub work_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            window: crate::windowing::DEFAULT_WINDOW,
            crop: crate::windowing::DEFAULT_CROP,
            k: 3,
            latent_dim: 1,
            resolution: lss::DEFAULT_RESOLUTION,
            autoencoder: AeHyper::default(),
            classifier: ClfHyper::default(),
            corpus: CorpusSpec::default(),
            master_seed: 0,
            data_dir: None,
            work_dir: PathBuf::from("lss-work"),
        }
    }
}

impl PipelineConfig {
    /// Laptop-sized run: 25 series of length 5000 per generator kind.
    pub fn desk() -> Self {
        PipelineConfig {
            corpus: CorpusSpec::uniform(25, 5000),
            ..Default::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| LssError::file(path, e))?;
        let config: PipelineConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| LssError::file(path, e))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 2 || self.crop == 0 || self.crop > self.window {
            return Err(LssError::invalid(format!(
                "need 2 <= window and 1 <= crop <= window, got N={} M={}",
                self.window, self.crop
            )));
        }
        if self.k == 0 || self.latent_dim == 0 || self.resolution < 2 {
            return Err(LssError::invalid("K and latent_dim must be >= 1, resolution >= 2"));
        }
        self.classifier_config().arch.validate()
    }

    pub fn ae_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.autoencoder.learning_rate,
            epochs: self.autoencoder.epochs,
            minibatch_size: self.autoencoder.minibatch_size,
            k: self.k,
            seed,
            latent_dim: self.latent_dim,
        }
    }

    pub fn classifier_config(&self) -> ClassifierConfig {
        ClassifierConfig {
            lr: self.classifier.lr,
            epochs: self.classifier.epochs,
            batch: self.classifier.batch,
            seed: stage_seed(self.master_seed, 3),
            val_fraction: self.classifier.val_fraction,
            arch: CnnArch {
                input: self.resolution,
                ..CnnArch::default()
            },
        }
    }

    pub fn models_dir(&self) -> PathBuf {
        self.work_dir.join("models")
    }

    pub fn images_dir(&self) -> PathBuf {
        self.work_dir.join("images")
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(|| self.work_dir.join("data"))
    }
}

/// Independent seed per pipeline stage.
pub fn stage_seed(master: u64, stage: u64) -> u64 {
    let mut z = master.wrapping_add(stage.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Trained encoders, raster extent and classifier.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub embedding: Embedding,
    pub model: CnnModel,
    pub resolution: usize,
}

impl Artifacts {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| LssError::file(dir, e))?;
        autoencoder::save_params(&self.embedding.td, &dir.join(TD_MODEL_FILE))?;
        autoencoder::save_params(&self.embedding.fd, &dir.join(FD_MODEL_FILE))?;
        save_extent(&self.embedding.extent(), &dir.join(EXTENT_FILE))?;
        classifier::save_model(&self.model, &dir.join(CNN_MODEL_FILE))
    }

    /// Load from a directory written by [`Artifacts::save`]. Window and crop
    /// lengths are read off the encoder shapes.
    pub fn load(dir: &Path) -> Result<Self> {
        let embedding = load_embedding(dir)?;
        let model = classifier::load_model(&dir.join(CNN_MODEL_FILE))?;
        let resolution = model.arch().input;
        Ok(Artifacts {
            embedding,
            model,
            resolution,
        })
    }
}

/// Encoders plus extent from a models directory.
pub fn load_embedding(dir: &Path) -> Result<Embedding> {
    let td = autoencoder::load_params(&dir.join(TD_MODEL_FILE))?;
    let fd = autoencoder::load_params(&dir.join(FD_MODEL_FILE))?;
    let (n, m) = (td.d, fd.d);
    let mut embedding = Embedding::new(td, fd, n, m)?;
    let extent_path = dir.join(EXTENT_FILE);
    if extent_path.exists() {
        embedding = embedding.with_extent(load_extent(&extent_path)?);
    }
    Ok(embedding)
}

pub fn save_extent(extent: &RasterExtent, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(extent)? + "\n";
    fs::write(path, text).map_err(|e| LssError::file(path, e))
}

pub fn load_extent(path: &Path) -> Result<RasterExtent> {
    let text = fs::read_to_string(path).map_err(|e| LssError::file(path, e))?;
    let e: RasterExtent = serde_json::from_str(&text)?;
    RasterExtent::new(e.u, e.v)
}

/// Where the reference label of an evaluated series comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    Manifest,
    Ci(CiConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub id: String,
    pub c_s: f64,
    pub c_ns: f64,
    pub lss_label: Label,
    pub reference_label: Label,
    pub agree: bool,
    /// `train`, `val`, or `eval` for series outside a training run.
    pub split: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub label: Label,
    pub count: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Held-out accuracy when a split exists, otherwise over all rows.
    pub accuracy: f64,
    pub overall_accuracy: f64,
    pub train_accuracy: Option<f64>,
    pub per_class: Vec<ClassStats>,
    pub rows: Vec<ReportRow>,
    pub config: Option<PipelineConfig>,
}

impl Summary {
    pub fn from_rows(rows: Vec<ReportRow>, config: Option<PipelineConfig>) -> Result<Self> {
        if rows.is_empty() {
            return Err(LssError::Empty);
        }
        let acc = |pred: &dyn Fn(&ReportRow) -> bool| -> Option<f64> {
            let sel: Vec<&ReportRow> = rows.iter().filter(|r| pred(r)).collect();
            (!sel.is_empty()).then(|| sel.iter().filter(|r| r.agree).count() as f64 / sel.len() as f64)
        };
        let overall = acc(&|_| true).unwrap_or(0.0);
        let val = acc(&|r| r.split == "val");
        let train = acc(&|r| r.split == "train");
        let per_class = [Label::Stochastic, Label::NonStochastic]
            .into_iter()
            .map(|label| {
                let count = rows.iter().filter(|r| r.reference_label == label).count();
                let correct = rows.iter().filter(|r| r.reference_label == label && r.agree).count();
                ClassStats {
                    label,
                    count,
                    correct,
                    accuracy: if count == 0 { 0.0 } else { correct as f64 / count as f64 },
                }
            })
            .collect();
        Ok(Summary {
            accuracy: val.unwrap_or(overall),
            overall_accuracy: overall,
            train_accuracy: train,
            per_class,
            rows,
            config,
        })
    }
}

/// CSV with columns `id,c_s,c_ns,lss_label,reference_label,agree,split`.
pub fn report_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "c_s", "c_ns", "lss_label", "reference_label", "agree", "split"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.id.as_str(),
            &format!("{:.6}", r.c_s),
            &format!("{:.6}", r.c_ns),
            r.lss_label.short(),
            r.reference_label.short(),
            if r.agree { "yes" } else { "no" },
            &r.split,
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| LssError::invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| LssError::invalid(e.to_string()))
}

fn csv_err(e: csv::Error) -> LssError {
    LssError::invalid(format!("csv: {e}"))
}

pub fn write_report(summary: &Summary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| LssError::file(dir, e))?;
    let csv_path = dir.join(REPORT_FILE);
    fs::write(&csv_path, report_csv(&summary.rows)?).map_err(|e| LssError::file(&csv_path, e))?;
    let json_path = dir.join(SUMMARY_FILE);
    let json = serde_json::to_string_pretty(summary)? + "\n";
    fs::write(&json_path, json).map_err(|e| LssError::file(&json_path, e))
}

/// Series of a manifest, in manifest order.
pub fn load_corpus(manifest: &DatasetManifest) -> Result<Vec<TimeSeries>> {
    manifest
        .entries
        .iter()
        .map(|e| {
            let mut ts = TimeSeries::read_txt(manifest.resolve(e))?.with_label(e.label);
            ts.id.clone_from(&e.id);
            Ok(ts)
        })
        .collect()
}

/// Train the TD and FD autoencoders over all normalized series.
pub fn train_embedding(normalized: &[Vec<f64>], config: &PipelineConfig) -> Result<(Embedding, Vec<f64>, Vec<f64>)> {
    let featurizer = SpectralFeaturizer::new(config.window, config.crop)?;
    let mut td = WindowSet::new(config.window);
    let mut fd = WindowSet::new(config.crop);
    for s in normalized {
        td.push_time_domain(s)?;
        fd.push_frequency_domain(s, &featurizer)?;
    }
    info!("training time-domain autoencoder on {} windows", td.len());
    let a = autoencoder::train(&td, &config.ae_config(stage_seed(config.master_seed, 1))).stage("train-ae-td")?;
    info!("training frequency-domain autoencoder on {} windows", fd.len());
    let b = autoencoder::train(&fd, &config.ae_config(stage_seed(config.master_seed, 2))).stage("train-ae-fd")?;
    let embedding = Embedding::new(a.params, b.params, config.window, config.crop)?;
    Ok((embedding, a.loss_history, b.loss_history))
}

/// Traces of all series and the corpus bounding box.
pub fn calibrate(embedding: Embedding, normalized: &[Vec<f64>]) -> Result<(Embedding, Vec<LatentTrace>)> {
    let traces: Vec<LatentTrace> = normalized.iter().map(|s| embedding.trace(s)).collect::<Result<_>>()?;
    let extent = RasterExtent::bounding(&traces)?;
    Ok((embedding.with_extent(extent), traces))
}

/// Outputs of [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub artifacts: Artifacts,
    pub metrics: TrainMetrics,
    pub summary: Summary,
    pub images: Vec<LssImage>,
    pub manifest: DatasetManifest,
}

/// generate → train-ae (TD, FD) → rasterize → train-clf → evaluate.
/// Every stage writes its artifacts under `work_dir` before the next starts.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineRun> {
    config.validate().stage("config")?;
    let work = &config.work_dir;
    fs::create_dir_all(work).map_err(|e| LssError::file(work, e)).stage("config")?;
    config.save(&work.join(CONFIG_FILE)).stage("config")?;

    let corpus_dir = config.corpus_dir();
    let manifest = match &config.data_dir {
        Some(dir) => DatasetManifest::load(dir.join(MANIFEST_FILE)).stage("load")?,
        None => {
            info!("generating corpus into {}", corpus_dir.display());
            synthgen::gen_dataset(&corpus_dir, &config.corpus, config.master_seed).stage("generate")?
        }
    };
    let series = load_corpus(&manifest).stage("load")?;
    let normalized: Vec<Vec<f64>> = series
        .iter()
        .map(|s| ingest::normalize(s).map(TimeSeries::into_values))
        .collect::<Result<_>>()
        .stage("normalize")?;

    let (embedding, _, _) = train_embedding(&normalized, config)?;
    let models = config.models_dir();
    fs::create_dir_all(&models).map_err(|e| LssError::file(&models, e)).stage("train-ae")?;
    autoencoder::save_params(&embedding.td, &models.join(TD_MODEL_FILE)).stage("train-ae-td")?;
    autoencoder::save_params(&embedding.fd, &models.join(FD_MODEL_FILE)).stage("train-ae-fd")?;

    info!("rasterizing {} series", series.len());
    let images = rasterize_stage(embedding.clone(), &normalized, &manifest, config).stage("rasterize")?;
    let (embedding, images) = images;
    save_extent(&embedding.extent(), &models.join(EXTENT_FILE)).stage("rasterize")?;

    info!("training classifier");
    let labels: Vec<Label> = manifest.entries.iter().map(|e| e.label).collect();
    let (model, metrics) =
        classifier::train_classifier(&images, &labels, &config.classifier_config()).stage("train-clf")?;
    classifier::save_model(&model, &models.join(CNN_MODEL_FILE)).stage("train-clf")?;

    let mut split = vec!["train"; labels.len()];
    metrics.val_indices.iter().for_each(|&i| split[i] = "val");
    let rows = images
        .iter()
        .zip(&manifest.entries)
        .zip(&split)
        .map(|((img, entry), split)| {
            let p = classifier::predict(&model, img)?;
            Ok(row(&entry.id, p, entry.label, split))
        })
        .collect::<Result<Vec<_>>>()
        .stage("evaluate")?;
    let summary = Summary::from_rows(rows, Some(config.clone())).stage("evaluate")?;
    write_report(&summary, work).stage("evaluate")?;
    info!("held-out accuracy {:.4}", summary.accuracy);

    Ok(PipelineRun {
        artifacts: Artifacts {
            embedding,
            model,
            resolution: config.resolution,
        },
        metrics,
        summary,
        images,
        manifest,
    })
}

fn rasterize_stage(
    embedding: Embedding,
    normalized: &[Vec<f64>],
    manifest: &DatasetManifest,
    config: &PipelineConfig,
) -> Result<(Embedding, Vec<LssImage>)> {
    let (embedding, traces) = calibrate(embedding, normalized)?;
    let dir = config.images_dir();
    fs::create_dir_all(&dir).map_err(|e| LssError::file(&dir, e))?;
    let extent = embedding.extent();
    let mut images = Vec::with_capacity(traces.len());
    for (trace, entry) in traces.iter().zip(&manifest.entries) {
        let img = lss::rasterize_in(trace, config.resolution, &extent)?;
        lss::write_image(&img, &dir.join(format!("{}.pgm", entry.id)))?;
        images.push(img);
    }
    Ok((embedding, images))
}

fn row(id: &str, p: Prediction, reference: Label, split: &str) -> ReportRow {
    ReportRow {
        id: id.to_string(),
        c_s: p.c_s,
        c_ns: p.c_ns,
        lss_label: p.label,
        reference_label: reference,
        agree: p.label == reference,
        split: split.to_string(),
    }
}

/// Result of classifying a single series.
#[derive(Debug, Clone)]
pub struct Classified {
    pub prediction: Prediction,
    pub image: LssImage,
    pub cam: Option<CamMap>,
}

/// normalize → trace → rasterize → predict, with an optional CAM for the
/// predicted class.
pub fn classify_series(artifacts: &Artifacts, series: &TimeSeries, with_cam: bool) -> Result<Classified> {
    let normalized = ingest::normalize(series).stage("normalize")?;
    let image = artifacts
        .embedding
        .image(normalized.values(), artifacts.resolution)
        .stage("rasterize")?;
    let prediction = classifier::predict(&artifacts.model, &image).stage("classify")?;
    let cam = if with_cam {
        Some(classifier::cam(&artifacts.model, &image, prediction.label).stage("cam")?)
    } else {
        None
    };
    Ok(Classified {
        prediction,
        image,
        cam,
    })
}

/// Classify a plain one-column series file with artifacts from `models_dir`.
pub fn classify_one(series_path: &Path, models_dir: &Path, with_cam: bool) -> Result<Classified> {
    let artifacts = Artifacts::load(models_dir).stage("load-models")?;
    let raw = ingest::load_series(series_path, ingest::InputFormat::PlainColumn).stage("ingest")?;
    let id = series_path.file_stem().and_then(|s| s.to_str()).unwrap_or("series");
    let series = ingest::as_series(&raw, id).stage("ingest")?;
    classify_series(&artifacts, &series, with_cam)
}

/// Classify every manifest series and compare with the chosen reference.
pub fn evaluate(artifacts: &Artifacts, manifest: &DatasetManifest, reference: &Reference) -> Result<Summary> {
    if manifest.entries.is_empty() {
        return Err(LssError::Empty).stage("evaluate");
    }
    let series = load_corpus(manifest).stage("load")?;
    let mut rows = Vec::with_capacity(series.len());
    for (ts, entry) in series.iter().zip(&manifest.entries) {
        let c = classify_series(artifacts, ts, false)?;
        let reference_label = match reference {
            Reference::Manifest => entry.label,
            Reference::Ci(cfg) => {
                let curve = baseline_ci::correlation_dimension(ts.values(), cfg).stage("ci")?;
                baseline_ci::ci_label(&curve)
            }
        };
        rows.push(row(&entry.id, c.prediction, reference_label, "eval"));
    }
    Summary::from_rows(rows, None).stage("evaluate")
}

/// Reference row for a series alone: CI label alongside the LSS prediction.
pub fn ci_reference(series: &TimeSeries, cfg: &CiConfig) -> Result<(Label, baseline_ci::CiCurve)> {
    let curve = baseline_ci::correlation_dimension(series.values(), cfg).stage("ci")?;
    Ok((baseline_ci::ci_label(&curve), curve))
}
