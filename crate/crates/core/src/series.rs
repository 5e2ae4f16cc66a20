//! Time-series container and the one-value-per-line text format.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LssError, Result};

/// Ground-truth or predicted class of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Stochastic,
    NonStochastic,
}

impl Label {
    pub fn short(self) -> &'static str {
        match self {
            Label::Stochastic => "S",
            Label::NonStochastic => "NS",
        }
    }

    /// Class index used by the classifier head (0 = stochastic).
    pub fn index(self) -> usize {
        match self {
            Label::Stochastic => 0,
            Label::NonStochastic => 1,
        }
    }

    pub fn from_index(i: usize) -> Label {
        if i == 0 {
            Label::Stochastic
        } else {
            Label::NonStochastic
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for Label {
    type Err = LssError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "s" | "stochastic" => Ok(Label::Stochastic),
            "ns" | "nonstochastic" | "non-stochastic" => Ok(Label::NonStochastic),
            other => Err(LssError::invalid(format!("unknown label `{other}`"))),
        }
    }
}

/// Synthetic generator families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Lorenz,
    Logistic,
    White,
    Pink,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 4] = [
        GeneratorKind::Lorenz,
        GeneratorKind::Logistic,
        GeneratorKind::White,
        GeneratorKind::Pink,
    ];

    pub fn label(self) -> Label {
        match self {
            GeneratorKind::Lorenz | GeneratorKind::Logistic => Label::NonStochastic,
            GeneratorKind::White | GeneratorKind::Pink => Label::Stochastic,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::Lorenz => "lorenz",
            GeneratorKind::Logistic => "logistic",
            GeneratorKind::White => "white",
            GeneratorKind::Pink => "pink",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeneratorKind {
    type Err = LssError;

    fn from_str(s: &str) -> Result<Self> {
        GeneratorKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| LssError::invalid(format!("unknown generator kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Synthetic(GeneratorKind),
    External(PathBuf),
}

/// A finite, non-empty real-valued sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    pub dt: f64,
    pub id: String,
    pub label: Option<Label>,
    pub source: Source,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, dt: f64, id: impl Into<String>, source: Source) -> Result<Self> {
        if values.is_empty() {
            return Err(LssError::Empty);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(LssError::NonFinite(format!("sample {i} is {}", values[i])));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(LssError::invalid(format!("sampling interval {dt}")));
        }
        Ok(TimeSeries {
            values,
            dt,
            id: id.into(),
            label: None,
            source,
        })
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same metadata, new samples.
    pub fn map_values(&self, values: Vec<f64>) -> Result<Self> {
        let mut out = TimeSeries::new(values, self.dt, self.id.clone(), self.source.clone())?;
        out.label = self.label;
        Ok(out)
    }

    /// Read a series stored one value per line.
    pub fn read_txt(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let values = read_values(path)?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        TimeSeries::new(values, 1.0, id, Source::External(path.to_path_buf()))
    }

    pub fn write_txt(&self, path: impl AsRef<Path>) -> Result<()> {
        write_values(path.as_ref(), &self.values)
    }
}

/// Parse one floating-point value per line; blank lines and `#` comments are skipped.
pub fn read_values(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| LssError::file(path, e))?;
    parse_values(&text)
}

pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| LssError::Parse {
            line: i + 1,
            message: format!("`{line}` is not a number"),
        })?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(LssError::Empty);
    }
    Ok(values)
}

/// Shortest round-trip formatting, so reading back is bit-exact.
pub fn write_values(path: &Path, values: &[f64]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| LssError::file(path, e))?;
    let mut w = BufWriter::new(file);
    for v in values {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}
