pub mod autoencoder;
pub mod baseline_ci;
pub mod classifier;
pub mod error;
pub mod ingest;
pub mod lss;
pub mod pipeline;
pub mod series;
pub mod synthgen;
pub mod windowing;

pub use error::{LssError, Result};
pub use series::{GeneratorKind, Label, Source, TimeSeries};
