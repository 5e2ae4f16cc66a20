use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser)]
#[command(name = "lss-lab", version, about = "Latent space signature time-series classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Domain {
    Td,
    Fd,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ReferenceArg {
    Manifest,
    Ci,
}

#[derive(Subcommand)]
pub enum Command {
    /// Write a labeled synthetic corpus and its manifest.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// e.g. `lorenz=105,logistic=105,white=106,pink=105`
        #[arg(long)]
        counts: Option<String>,
        #[arg(long, default_value_t = 30000)]
        length: usize,
    },
    /// Convert an external lightcurve to the one-value-per-line format.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "plain")]
        format: String,
        /// Resampling step; required for `tv` input.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print window and spectrum pairs of a series.
    Windows {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        m: usize,
        /// Print every window instead of a count.
        #[arg(long)]
        dump: bool,
    },
    /// Train one autoencoder over every series of a corpus.
    TrainAe {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        domain: Domain,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 64)]
        batch: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        m: usize,
    },
    /// Render a series (or a whole corpus with `--data`) as LSS images.
    Rasterize {
        #[arg(long, required_unless_present = "data", conflicts_with = "data")]
        series: Option<PathBuf>,
        /// Corpus directory; images go to `--out` as `<id>.pgm` and the
        /// calibrated extent to `<out>/extent.json`.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        ae_td: PathBuf,
        #[arg(long)]
        ae_fd: PathBuf,
        /// Raster extent JSON; defaults to the encoders' reachable box.
        #[arg(long)]
        extent: Option<PathBuf>,
        #[arg(long, default_value_t = 224)]
        r: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the image classifier.
    TrainClf {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 60)]
        epochs: usize,
        #[arg(long, default_value_t = 16)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.2)]
        val_fraction: f64,
    },
    /// Classify an LSS image, or a series with `--series` and `--models`.
    Classify {
        #[arg(long, required_unless_present = "models")]
        model: Option<PathBuf>,
        #[arg(long, required_unless_present = "series", conflicts_with = "series")]
        image: Option<PathBuf>,
        #[arg(long, requires = "models")]
        series: Option<PathBuf>,
        /// Directory written by `run` (encoders, extent, classifier).
        #[arg(long)]
        models: Option<PathBuf>,
        /// Write the class activation map as PGM, raw values next to it as CSV.
        #[arg(long)]
        cam: Option<PathBuf>,
    },
    /// Correlation-dimension baseline.
    Ci {
        #[arg(long)]
        series: PathBuf,
        #[arg(long, default_value_t = 8)]
        ed_max: usize,
        #[arg(long, default_value_t = 1)]
        tau: usize,
        #[arg(long, default_value_t = 10)]
        theiler: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Classify every series of a manifest and compare with a reference.
    Evaluate {
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "manifest")]
        reference: ReferenceArg,
        /// Directory for report.csv and summary.json; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full pipeline from a JSON config.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Start from the desk-scale preset instead of the full corpus.
        #[arg(long)]
        desk: bool,
        #[arg(long)]
        work: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        ae_epochs: Option<usize>,
        #[arg(long)]
        clf_epochs: Option<usize>,
        #[arg(long)]
        clf_lr: Option<f64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
