use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use lss_core::autoencoder::{self, TrainConfig};
use lss_core::baseline_ci::{self, CiConfig};
use lss_core::classifier::{self, ClassifierConfig};
use lss_core::ingest::{self, InputFormat};
use lss_core::lss::{self, Embedding, LssImage, RasterExtent};
use lss_core::pipeline::{self, Artifacts, PipelineConfig, Reference, EXTENT_FILE};
use lss_core::synthgen::{self, CorpusSpec, DatasetManifest, MANIFEST_FILE};
use lss_core::windowing::{make_windows, SpectralFeaturizer, WindowSet};
use lss_core::{LssError, Result, TimeSeries};

use crate::{Command, Domain, ReferenceArg};

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate {
            out,
            seed,
            counts,
            length,
        } => {
            let spec = match counts {
                Some(c) => CorpusSpec {
                    counts: CorpusSpec::parse_counts(&c)?,
                    length,
                },
                None => CorpusSpec {
                    length,
                    ..CorpusSpec::default()
                },
            };
            let m = synthgen::gen_dataset(&out, &spec, seed)?;
            println!("wrote {} series to {}", m.entries.len(), out.display());
            Ok(())
        }
        Command::Ingest {
            input,
            format,
            dt,
            out,
        } => {
            let format: InputFormat = format.parse()?;
            let raw = ingest::load_series(&input, format)?;
            let series = match (format, dt) {
                (InputFormat::TwoColumnTimeValue, Some(dt)) => {
                    let r = ingest::resample_with_report(&raw, dt)?;
                    if r.filled_bins > 0 {
                        eprintln!("warning: {} empty bins filled by interpolation", r.filled_bins);
                    }
                    r.series
                }
                (InputFormat::TwoColumnTimeValue, None) => {
                    return Err(LssError::invalid("`--format tv` needs `--dt`"));
                }
                (InputFormat::PlainColumn, _) => ingest::as_series(&raw, "ingested")?,
            };
            series.write_txt(&out)?;
            println!("wrote {} samples to {}", series.len(), out.display());
            Ok(())
        }
        Command::Windows { input, n, m, dump } => {
            let series = TimeSeries::read_txt(&input)?;
            let featurizer = SpectralFeaturizer::new(n, m)?;
            let windows = make_windows(series.values(), n)?;
            if !dump {
                println!("{} windows of length {n}", windows.len());
                return Ok(());
            }
            let mut out = BufWriter::new(io::stdout().lock());
            for w in &windows {
                let spec = featurizer.magnitudes(&w.values)?;
                let line = writeln!(out, "t={} window={} spectrum={}", w.t, join(&w.values), join(&spec));
                if let Err(e) = line {
                    // a closed pipe (e.g. `| head`) just ends the listing
                    return if e.kind() == io::ErrorKind::BrokenPipe { Ok(()) } else { Err(e.into()) };
                }
            }
            match out.flush() {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
        Command::TrainAe {
            data,
            domain,
            out,
            epochs,
            lr,
            batch,
            k,
            seed,
            n,
            m,
        } => {
            let manifest = DatasetManifest::load(data.join(MANIFEST_FILE))?;
            let featurizer = SpectralFeaturizer::new(n, m)?;
            let mut rows = WindowSet::new(match domain {
                Domain::Td => n,
                Domain::Fd => m,
            });
            for s in pipeline::load_corpus(&manifest)? {
                let s = ingest::normalize(&s)?;
                match domain {
                    Domain::Td => rows.push_time_domain(s.values())?,
                    Domain::Fd => rows.push_frequency_domain(s.values(), &featurizer)?,
                }
            }
            let config = TrainConfig {
                learning_rate: lr,
                epochs,
                minibatch_size: batch,
                k,
                seed,
                latent_dim: 1,
            };
            let trained = autoencoder::train(&rows, &config)?;
            autoencoder::save_params(&trained.params, &out)?;
            let h = &trained.loss_history;
            println!("loss_first={:.6} loss_last={:.6}", h[0], h[h.len() - 1]);
            Ok(())
        }
        Command::Rasterize {
            series,
            data,
            ae_td,
            ae_fd,
            extent,
            r,
            out,
        } => {
            let td = autoencoder::load_params(&ae_td)?;
            let fd = autoencoder::load_params(&ae_fd)?;
            let (n, m) = (td.d, fd.d);
            let mut embedding = Embedding::new(td, fd, n, m)?;
            if let Some(path) = &extent {
                embedding = embedding.with_extent(pipeline::load_extent(path)?);
            }
            match (series, data) {
                (Some(path), _) => {
                    let s = ingest::normalize(&TimeSeries::read_txt(&path)?)?;
                    let img = embedding.image(s.values(), r)?;
                    lss::write_image(&img, &out)?;
                    println!("occupancy={:.6}", img.occupancy());
                }
                (None, Some(dir)) => rasterize_corpus(embedding, &dir, extent.is_none(), r, &out)?,
                (None, None) => return Err(LssError::invalid("give `--series` or `--data`")),
            }
            Ok(())
        }
        Command::TrainClf {
            images,
            manifest,
            out,
            lr,
            epochs,
            batch,
            seed,
            val_fraction,
        } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let imgs = manifest
                .entries
                .iter()
                .map(|e| lss::read_image(&images.join(format!("{}.pgm", e.id))))
                .collect::<Result<Vec<_>>>()?;
            let labels: Vec<_> = manifest.entries.iter().map(|e| e.label).collect();
            let resolution = imgs.first().map(LssImage::resolution).ok_or(LssError::Empty)?;
            let config = ClassifierConfig {
                lr,
                epochs,
                batch,
                seed,
                val_fraction,
                arch: classifier::CnnArch {
                    input: resolution,
                    ..Default::default()
                },
            };
            let (model, metrics) = classifier::train_classifier(&imgs, &labels, &config)?;
            classifier::save_model(&model, &out)?;
            println!(
                "train_accuracy={:.4} val_accuracy={}",
                metrics.train_accuracy,
                metrics.val_accuracy.map_or("n/a".into(), |a| format!("{a:.4}"))
            );
            Ok(())
        }
        Command::Classify {
            model,
            image,
            series,
            models,
            cam,
        } => {
            let (prediction, cam_map) = match (series, image) {
                (Some(series), _) => {
                    let dir = models.ok_or_else(|| LssError::invalid("`--series` needs `--models`"))?;
                    let c = pipeline::classify_one(&series, &dir, cam.is_some())?;
                    (c.prediction, c.cam)
                }
                (None, Some(image)) => {
                    let model = match (model, models) {
                        (Some(m), _) => classifier::load_model(&m)?,
                        (None, Some(dir)) => classifier::load_model(&dir.join(pipeline::CNN_MODEL_FILE))?,
                        (None, None) => return Err(LssError::invalid("`--image` needs `--model`")),
                    };
                    let mut img = lss::read_image(&image)?;
                    if img.resolution() != model.arch().input {
                        eprintln!(
                            "warning: resizing {}x{} image to {}",
                            img.resolution(),
                            img.resolution(),
                            model.arch().input
                        );
                        img = classifier::resize_nearest(&img, model.arch().input);
                    }
                    let p = classifier::predict(&model, &img)?;
                    let c = match cam {
                        Some(_) => Some(classifier::cam(&model, &img, p.label)?),
                        None => None,
                    };
                    (p, c)
                }
                (None, None) => return Err(LssError::invalid("give `--image` or `--series`")),
            };
            println!(
                "label={} c_s={:.6} c_ns={:.6}",
                prediction.label.short(),
                prediction.c_s,
                prediction.c_ns
            );
            if let (Some(path), Some(map)) = (cam, cam_map) {
                write_cam(&map, &path)?;
            }
            Ok(())
        }
        Command::Ci {
            series,
            ed_max,
            tau,
            theiler,
            seed,
        } => {
            let s = TimeSeries::read_txt(&series)?;
            let config = CiConfig {
                ed_max,
                tau,
                theiler,
                seed,
                ..CiConfig::default()
            };
            let curve = baseline_ci::correlation_dimension(s.values(), &config)?;
            println!("ed,cd");
            for (ed, cd) in curve.ed_values.iter().zip(&curve.cd_values) {
                println!("{ed},{cd:.4}");
            }
            println!(
                "saturation={} cd_saturated={} label={}",
                curve.saturation,
                curve.cd_saturated.map_or("n/a".into(), |v| format!("{v:.4}")),
                baseline_ci::ci_label(&curve).short()
            );
            Ok(())
        }
        Command::Evaluate {
            models,
            manifest,
            reference,
            out,
        } => {
            let artifacts = Artifacts::load(&models)?;
            let manifest = DatasetManifest::load(&manifest)?;
            let reference = match reference {
                ReferenceArg::Manifest => Reference::Manifest,
                ReferenceArg::Ci => Reference::Ci(CiConfig::default()),
            };
            let summary = pipeline::evaluate(&artifacts, &manifest, &reference)?;
            match out {
                Some(dir) => {
                    pipeline::write_report(&summary, &dir)?;
                    println!("accuracy={:.4}", summary.accuracy);
                }
                None => {
                    print!("{}", pipeline::report_csv(&summary.rows)?);
                    println!("accuracy={:.4}", summary.accuracy);
                }
            }
            Ok(())
        }
        Command::Run {
            config,
            desk,
            work,
            seed,
            data,
            ae_epochs,
            clf_epochs,
            clf_lr,
        } => {
            let mut cfg = match (config, desk) {
                (Some(path), _) => PipelineConfig::load(&path)?,
                (None, true) => PipelineConfig::desk(),
                (None, false) => PipelineConfig::default(),
            };
            if let Some(w) = work {
                cfg.work_dir = w;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if data.is_some() {
                cfg.data_dir = data;
            }
            if let Some(e) = ae_epochs {
                cfg.autoencoder.epochs = e;
            }
            if let Some(e) = clf_epochs {
                cfg.classifier.epochs = e;
            }
            if let Some(lr) = clf_lr {
                cfg.classifier.lr = lr;
            }
            let run = pipeline::run_pipeline(&cfg)?;
            println!(
                "accuracy={:.4} report={}",
                run.summary.accuracy,
                cfg.work_dir.join(pipeline::REPORT_FILE).display()
            );
            Ok(())
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ")
}

fn rasterize_corpus(embedding: Embedding, dir: &Path, calibrate: bool, r: usize, out: &Path) -> Result<()> {
    let manifest = DatasetManifest::load(dir.join(MANIFEST_FILE))?;
    let normalized = pipeline::load_corpus(&manifest)?
        .iter()
        .map(|s| ingest::normalize(s).map(TimeSeries::into_values))
        .collect::<Result<Vec<_>>>()?;
    let (embedding, traces) = if calibrate {
        pipeline::calibrate(embedding, &normalized)?
    } else {
        let traces = normalized.iter().map(|s| embedding.trace(s)).collect::<Result<Vec<_>>>()?;
        (embedding, traces)
    };
    fs::create_dir_all(out).map_err(|e| LssError::File {
        path: out.to_path_buf(),
        source: e,
    })?;
    let extent: RasterExtent = embedding.extent();
    pipeline::save_extent(&extent, &out.join(EXTENT_FILE))?;
    for (trace, entry) in traces.iter().zip(&manifest.entries) {
        let img = lss::rasterize_in(trace, r, &extent)?;
        lss::write_image(&img, &out.join(format!("{}.pgm", entry.id)))?;
    }
    println!("wrote {} images to {}", traces.len(), out.display());
    Ok(())
}

fn write_cam(map: &classifier::CamMap, path: &Path) -> Result<()> {
    let n = map.upsampled_size;
    let img = lss::encode_gray_pgm(n, &classifier::to_gray8(&map.upsampled));
    fs::write(path, img).map_err(|e| LssError::File {
        path: path.to_path_buf(),
        source: e,
    })?;
    let csv_path: PathBuf = path.with_extension("csv");
    let mut text = String::new();
    for row in map.heat.chunks(map.size) {
        text += &row.iter().map(|v| format!("{v:.9}")).collect::<Vec<_>>().join(",");
        text.push('\n');
    }
    fs::write(&csv_path, text).map_err(|e| LssError::File {
        path: csv_path.clone(),
        source: e,
    })?;
    println!("cam={} values={}", path.display(), csv_path.display());
    Ok(())
}
