//! Stride-1 sliding windows and their cropped DFT-magnitude features.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{LssError, Result};

pub const DEFAULT_WINDOW: usize = 10;
pub const DEFAULT_CROP: usize = DEFAULT_WINDOW;

/// Samples `t-N+1 ..= t` of the parent series.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub values: Vec<f64>,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralWindow {
    pub magnitudes: Vec<f64>,
    pub t: usize,
}

pub fn make_windows(series: &[f64], n: usize) -> Result<Vec<Window>> {
    check_window_len(series.len(), n)?;
    Ok(series
        .windows(n)
        .enumerate()
        .map(|(i, w)| Window {
            values: w.to_vec(),
            t: i + n - 1,
        })
        .collect())
}

pub(crate) fn check_window_len(len: usize, n: usize) -> Result<()> {
    if n == 0 {
        return Err(LssError::invalid("window size must be >= 1"));
    }
    if len < n {
        return Err(LssError::TooShort { needed: n, got: len });
    }
    Ok(())
}

/// Cached N-point transform producing the moduli of bins `0..M`.
#[derive(Clone)]
pub struct SpectralFeaturizer {
    n: usize,
    m: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralFeaturizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralFeaturizer")
            .field("n", &self.n)
            .field("m", &self.m)
            .finish()
    }
}

impl SpectralFeaturizer {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(LssError::invalid("window and crop lengths must be >= 1"));
        }
        if m > n {
            return Err(LssError::invalid(format!("crop length {m} exceeds window size {n}")));
        }
        let fft = FftPlanner::new().plan_fft_forward(n);
        Ok(SpectralFeaturizer { n, m, fft })
    }

    pub fn window_len(&self) -> usize {
        self.n
    }

    pub fn crop_len(&self) -> usize {
        self.m
    }

    /// Write the cropped moduli of `window` into `out` (length M).
    pub fn magnitudes_into(&self, window: &[f64], out: &mut [f64]) -> Result<()> {
        if window.len() != self.n {
            return Err(LssError::DimensionMismatch {
                expected: self.n,
                got: window.len(),
            });
        }
        if out.len() != self.m {
            return Err(LssError::DimensionMismatch {
                expected: self.m,
                got: out.len(),
            });
        }
        let mut buf: Vec<Complex<f64>> = window.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fft.process(&mut buf);
        for (o, c) in out.iter_mut().zip(&buf) {
            *o = c.norm();
        }
        Ok(())
    }

    pub fn magnitudes(&self, window: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.m];
        self.magnitudes_into(window, &mut out)?;
        Ok(out)
    }
}

/// Moduli of the first `m` DFT bins of the window.
pub fn dft_magnitude(window: &Window, m: usize) -> Result<SpectralWindow> {
    let f = SpectralFeaturizer::new(window.values.len(), m)?;
    Ok(SpectralWindow {
        magnitudes: f.magnitudes(&window.values)?,
        t: window.t,
    })
}

/// Row-major block of D-dimensional feature vectors taken from one or more
/// series. Rows of different series never share a history.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    dim: usize,
    data: Vec<f64>,
    /// Start row of every segment, ascending, first is 0.
    segments: Vec<usize>,
}

impl WindowSet {
    pub fn new(dim: usize) -> Self {
        WindowSet {
            dim,
            data: Vec::new(),
            segments: Vec::new(),
        }
    }

    /// Single segment from explicit rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).ok_or(LssError::Empty)?;
        let mut set = WindowSet::new(dim);
        set.push_segment(rows.iter().map(|r| r.as_ref()))?;
        Ok(set)
    }

    pub fn push_segment<'a>(&mut self, rows: impl IntoIterator<Item = &'a [f64]>) -> Result<()> {
        let start = self.len();
        for r in rows {
            if r.len() != self.dim {
                return Err(LssError::DimensionMismatch {
                    expected: self.dim,
                    got: r.len(),
                });
            }
            self.data.extend_from_slice(r);
        }
        if self.len() > start {
            self.segments.push(start);
        }
        Ok(())
    }

    /// Time-domain rows of one series.
    pub fn push_time_domain(&mut self, series: &[f64]) -> Result<()> {
        check_window_len(series.len(), self.dim)?;
        self.push_segment(series.windows(self.dim))
    }

    /// Frequency-domain rows of one series: cropped DFT moduli scaled by 1/N.
    pub fn push_frequency_domain(&mut self, series: &[f64], featurizer: &SpectralFeaturizer) -> Result<()> {
        if featurizer.crop_len() != self.dim {
            return Err(LssError::DimensionMismatch {
                expected: self.dim,
                got: featurizer.crop_len(),
            });
        }
        let n = featurizer.window_len();
        check_window_len(series.len(), n)?;
        let start = self.len();
        let mut row = vec![0.0; self.dim];
        for w in series.windows(n) {
            featurizer.magnitudes_into(w, &mut row)?;
            row.iter_mut().for_each(|v| *v /= n as f64);
            self.data.extend_from_slice(&row);
        }
        self.segments.push(start);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    /// First row of the segment containing `t`.
    pub fn segment_start(&self, t: usize) -> usize {
        let i = self.segments.partition_point(|&s| s <= t);
        self.segments[i.saturating_sub(1)]
    }

    /// Rows with at least `history` predecessors in their own segment.
    pub fn valid_timestamps(&self, history: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&t| t - self.segment_start(t) >= history)
            .collect()
    }
}

/// Time-domain feature rows for every window end index of `series`.
pub fn time_domain_rows(series: &[f64], n: usize) -> Result<WindowSet> {
    let mut set = WindowSet::new(n);
    set.push_time_domain(series)?;
    Ok(set)
}

/// Scaled frequency-domain feature rows for every window end index of `series`.
pub fn frequency_domain_rows(series: &[f64], featurizer: &SpectralFeaturizer) -> Result<WindowSet> {
    let mut set = WindowSet::new(featurizer.crop_len());
    set.push_frequency_domain(series, featurizer)?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_of_twelve() {
        let s: Vec<f64> = (1..=12).map(f64::from).collect();
        let w = make_windows(&s, 10).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w[0].values, s[..10].to_vec());
        assert_eq!(w[2].values, s[2..].to_vec());
        assert_eq!((w[0].t, w[2].t), (9, 11));
    }

    #[test]
    fn window_boundaries() {
        let s = vec![0.5; 10];
        assert_eq!(make_windows(&s, 10).unwrap().len(), 1);
        assert!(matches!(make_windows(&s[..9], 10), Err(LssError::TooShort { .. })));
    }

    #[test]
    fn spectra_of_simple_windows() {
        let zeros = Window { values: vec![0.0; 10], t: 9 };
        assert!(dft_magnitude(&zeros, 10).unwrap().magnitudes.iter().all(|&m| m == 0.0));

        let mut imp = vec![0.0; 10];
        imp[0] = 1.0;
        let m = dft_magnitude(&Window { values: imp, t: 9 }, 10).unwrap().magnitudes;
        assert!(m.iter().all(|&v| (v - 1.0).abs() < 1e-12));

        let ones = Window { values: vec![1.0; 10], t: 9 };
        let m = dft_magnitude(&ones, 10).unwrap().magnitudes;
        assert!((m[0] - 10.0).abs() < 1e-12);
        assert!(m[1..].iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn crop_longer_than_window_rejected() {
        let w = Window { values: vec![0.0; 10], t: 9 };
        assert!(dft_magnitude(&w, 11).is_err());
    }

    #[test]
    fn segments_bound_history() {
        let mut set = WindowSet::new(2);
        set.push_time_domain(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        set.push_time_domain(&[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(set.len(), 5);
        assert_eq!(set.row(3), &[4.0, 5.0]);
        assert_eq!(set.segment_start(4), 3);
        assert_eq!(set.valid_timestamps(1), vec![1, 2, 4]);
    }

    #[test]
    fn frequency_rows_are_scaled() {
        let f = SpectralFeaturizer::new(10, 10).unwrap();
        let set = frequency_domain_rows(&[1.0; 10], &f).unwrap();
        assert!((set.row(0)[0] - 1.0).abs() < 1e-12);
    }
}
