//! Loading, resampling and normalizing external lightcurves.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{LssError, Result};
use crate::series::{Source, TimeSeries};

/// Slack used when mapping timestamps onto bin indices.
const BIN_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    /// One count per line, implicit unit spacing.
    PlainColumn,
    /// `time value` per line, whitespace or comma separated.
    TwoColumnTimeValue,
}

impl FromStr for InputFormat {
    type Err = LssError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(InputFormat::PlainColumn),
            "tv" => Ok(InputFormat::TwoColumnTimeValue),
            other => Err(LssError::invalid(format!("unknown input format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSamples {
    pub timestamps: Option<Vec<f64>>,
    pub counts: Vec<f64>,
}

impl RawSamples {
    pub fn new(timestamps: Option<Vec<f64>>, counts: Vec<f64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(LssError::Empty);
        }
        if let Some(ts) = &timestamps {
            if ts.len() != counts.len() {
                return Err(LssError::DimensionMismatch {
                    expected: counts.len(),
                    got: ts.len(),
                });
            }
            if let Some(i) = ts.windows(2).position(|w| !(w[1] > w[0])) {
                return Err(LssError::invalid(format!(
                    "timestamps not strictly increasing at sample {}",
                    i + 1
                )));
            }
        }
        Ok(RawSamples { timestamps, counts })
    }
}

pub fn load_series(path: &Path, format: InputFormat) -> Result<RawSamples> {
    let text = fs::read_to_string(path).map_err(|e| LssError::file(path, e))?;
    parse_samples(&text, format)
}

pub fn parse_samples(text: &str, format: InputFormat) -> Result<RawSamples> {
    let mut times = Vec::new();
    let mut counts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| LssError::Parse {
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|f| !f.is_empty())
            .collect();
        let expected = match format {
            InputFormat::PlainColumn => 1,
            InputFormat::TwoColumnTimeValue => 2,
        };
        if fields.len() != expected {
            return Err(bad(format!("expected {expected} column(s), found {}", fields.len())));
        }
        let nums = fields
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(format!("`{f}` is not a finite number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match format {
            InputFormat::PlainColumn => counts.push(nums[0]),
            InputFormat::TwoColumnTimeValue => {
                times.push(nums[0]);
                counts.push(nums[1]);
            }
        }
    }
    if counts.is_empty() {
        return Err(LssError::Empty);
    }
    let timestamps = match format {
        InputFormat::PlainColumn => None,
        InputFormat::TwoColumnTimeValue => Some(times),
    };
    RawSamples::new(timestamps, counts)
}

/// Output of [`resample_with_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub series: TimeSeries,
    /// Bins that had no samples and were linearly interpolated.
    pub filled_bins: usize,
}

/// Bin-average onto a uniform grid of width `dt_target`.
pub fn resample(raw: &RawSamples, dt_target: f64) -> Result<TimeSeries> {
    resample_with_report(raw, dt_target).map(|r| r.series)
}

pub fn resample_with_report(raw: &RawSamples, dt_target: f64) -> Result<Resampled> {
    let ts = raw
        .timestamps
        .as_ref()
        .ok_or_else(|| LssError::invalid("resampling needs timestamps"))?;
    if ts.len() < 2 {
        return Err(LssError::TooShort {
            needed: 2,
            got: ts.len(),
        });
    }
    if !(dt_target > 0.0 && dt_target.is_finite()) {
        return Err(LssError::invalid(format!("dt_target {dt_target} must be > 0")));
    }
    let t0 = ts[0];
    let span = ts[ts.len() - 1] - t0;
    if dt_target > span {
        return Err(LssError::invalid(format!(
            "dt_target {dt_target} exceeds total span {span}"
        )));
    }
    let n_bins = (span / dt_target + BIN_EPS).floor() as usize + 1;
    let mut sums = vec![0.0; n_bins];
    let mut hits = vec![0usize; n_bins];
    for (&t, &c) in ts.iter().zip(&raw.counts) {
        let b = (((t - t0) / dt_target + BIN_EPS).floor() as usize).min(n_bins - 1);
        sums[b] += c;
        hits[b] += 1;
    }
    let mut values: Vec<Option<f64>> = sums
        .iter()
        .zip(&hits)
        .map(|(&s, &h)| (h > 0).then(|| s / h as f64))
        .collect();

    // first and last bins always hold t_first and t_last
    let mut filled = 0;
    let mut prev = 0;
    for i in 1..n_bins {
        if values[i].is_some() {
            let (lo, hi) = (values[prev].unwrap(), values[i].unwrap());
            for j in prev + 1..i {
                let w = (j - prev) as f64 / (i - prev) as f64;
                values[j] = Some(lo + w * (hi - lo));
                filled += 1;
            }
            prev = i;
        }
    }
    let values: Vec<f64> = values.into_iter().map(|v| v.unwrap()).collect();
    let series = TimeSeries::new(values, dt_target, "resampled", Source::External(Default::default()))?;
    Ok(Resampled {
        series,
        filled_bins: filled,
    })
}

/// Samples as a unit-spaced series (for `PlainColumn` input).
pub fn as_series(raw: &RawSamples, id: &str) -> Result<TimeSeries> {
    TimeSeries::new(raw.counts.clone(), 1.0, id, Source::External(Default::default()))
}

/// Min–max rescale of the whole series to [0, 1].
pub fn normalize(series: &TimeSeries) -> Result<TimeSeries> {
    let v = series.values();
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(LssError::ConstantSeries);
    }
    series.map_values(v.iter().map(|&x| (x - lo) / range).collect())
}
