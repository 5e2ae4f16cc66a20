//! Grassberger–Procaccia correlation-integral baseline.
//!
//! For embedding dimensions 1..=ed_max the correlation dimension is the
//! log–log slope of C(r) over a scaling region; a dimension that stops growing
//! with the embedding marks the series non-stochastic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LssError, Result};
use crate::series::Label;

/// Delay-coordinate vectors with the time index each one starts at.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedded {
    pub dim: usize,
    /// Row-major, `len x dim`.
    pub coords: Vec<f64>,
    pub index: Vec<usize>,
}

impl Embedded {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Keep the given rows (ascending).
    fn select(&self, rows: &[usize]) -> Embedded {
        let mut coords = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            coords.extend_from_slice(self.point(r));
        }
        Embedded {
            dim: self.dim,
            coords,
            index: rows.iter().map(|&r| self.index[r]).collect(),
        }
    }
}

/// `p_i = (x_i, x_{i+tau}, ..., x_{i+(ed-1)tau})`.
pub fn delay_embed(series: &[f64], ed: usize, tau: usize) -> Result<Embedded> {
    if ed == 0 || tau == 0 {
        return Err(LssError::invalid("embedding dimension and delay must be >= 1"));
    }
    let span = (ed - 1) * tau + 1;
    if series.len() < span {
        return Err(LssError::TooShort {
            needed: span,
            got: series.len(),
        });
    }
    let count = series.len() - (ed - 1) * tau;
    let mut coords = Vec::with_capacity(count * ed);
    for i in 0..count {
        coords.extend((0..ed).map(|j| series[i + j * tau]));
    }
    Ok(Embedded {
        dim: ed,
        coords,
        index: (0..count).collect(),
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Distances of every pair `i < j` whose time indices differ by more than `theiler`.
fn pair_distances(points: &Embedded, theiler: usize) -> Vec<f64> {
    let n = points.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        let a = points.point(i);
        for j in i + 1..n {
            if points.index[j].abs_diff(points.index[i]) > theiler {
                out.push(dist(a, points.point(j)));
            }
        }
    }
    out
}

/// Fraction of eligible pairs closer than `r`. Pairs within the Theiler
/// window are excluded from both the count and the normalization, so
/// `C(r) = 1` once `r` exceeds the diameter.
pub fn correlation_integral(points: &Embedded, r: f64, theiler: usize) -> Result<f64> {
    if !(r > 0.0) {
        return Err(LssError::invalid(format!("radius {r} must be > 0")));
    }
    if points.len() < 2 {
        return Err(LssError::TooShort {
            needed: 2,
            got: points.len(),
        });
    }
    let mut eligible = 0usize;
    let mut close = 0usize;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points.index[j].abs_diff(points.index[i]) > theiler {
                eligible += 1;
                if dist(points.point(i), points.point(j)) < r {
                    close += 1;
                }
            }
        }
    }
    if eligible == 0 {
        return Err(LssError::invalid("Theiler window excludes every pair"));
    }
    Ok(close as f64 / eligible as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiConfig {
    pub ed_max: usize,
    pub tau: usize,
    pub theiler: usize,
    pub max_points: usize,
    pub n_radii: usize,
    /// Scaling region as percentiles of the pairwise distances.
    pub lo_percentile: f64,
    pub hi_percentile: f64,
    pub seed: u64,
}

impl Default for CiConfig {
    fn default() -> Self {
        CiConfig {
            ed_max: 8,
            tau: 1,
            theiler: 10,
            max_points: 5000,
            n_radii: 24,
            lo_percentile: 1.0,
            hi_percentile: 50.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiCurve {
    pub ed_values: Vec<usize>,
    pub cd_values: Vec<f64>,
    pub saturation: bool,
    pub cd_saturated: Option<f64>,
}

fn percentile(sorted_scratch: &mut [f64], pct: f64) -> f64 {
    let k = ((pct / 100.0) * (sorted_scratch.len() - 1) as f64).round() as usize;
    let (_, v, _) = sorted_scratch.select_nth_unstable_by(k, f64::total_cmp);
    *v
}

/// Slope of the least-squares line through `(x, y)`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// `n` radii log-spaced from `lo` to `hi` inclusive.
pub fn log_radii(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// C(r) at every radius (ascending) from one pass over the distances.
fn integral_from_distances(d: &[f64], radii: &[f64]) -> Vec<f64> {
    // counts[i] = pairs with radii[i-1] <= d < radii[i]
    let mut counts = vec![0usize; radii.len() + 1];
    for &x in d {
        counts[radii.partition_point(|&r| r <= x)] += 1;
    }
    let total = d.len() as f64;
    let mut cum = 0usize;
    radii
        .iter()
        .enumerate()
        .map(|(i, _)| {
            cum += counts[i];
            cum as f64 / total
        })
        .collect()
}

/// C(r) for ascending `radii`, counting each eligible pair once.
pub fn correlation_curve(points: &Embedded, radii: &[f64], theiler: usize) -> Result<Vec<f64>> {
    if radii.iter().any(|&r| !(r > 0.0)) || radii.windows(2).any(|w| w[1] < w[0]) {
        return Err(LssError::invalid("radii must be positive and ascending"));
    }
    let d = pair_distances(points, theiler);
    if d.is_empty() {
        return Err(LssError::invalid("Theiler window excludes every pair"));
    }
    Ok(integral_from_distances(&d, radii))
}

fn bounds_of(d: &mut [f64], config: &CiConfig) -> Result<(f64, f64)> {
    let lo = percentile(d, config.lo_percentile);
    let hi = percentile(d, config.hi_percentile);
    if !(lo > 0.0 && hi > lo) {
        return Err(LssError::DegenerateScaling(format!(
            "distance percentiles {lo} and {hi} do not bound a region"
        )));
    }
    Ok((lo, hi))
}

/// Radius bounds from the pairwise distances of `points`.
pub fn scaling_bounds(points: &Embedded, config: &CiConfig) -> Result<(f64, f64)> {
    let mut d = pair_distances(points, config.theiler);
    if d.len() < 2 {
        return Err(LssError::DegenerateScaling("fewer than two eligible pairs".into()));
    }
    bounds_of(&mut d, config)
}

/// Correlation dimension of one point set: slope of ln C(r) against ln r
/// over log-spaced radii between two distance percentiles.
pub fn point_set_dimension(points: &Embedded, config: &CiConfig) -> Result<f64> {
    point_set_dimension_in(points, config, None)
}

fn point_set_dimension_in(points: &Embedded, config: &CiConfig, fixed: Option<(f64, f64)>) -> Result<f64> {
    let mut d = pair_distances(points, config.theiler);
    if d.len() < 2 {
        return Err(LssError::DegenerateScaling("fewer than two eligible pairs".into()));
    }
    let (lo, hi) = match fixed {
        Some(b) => b,
        None => bounds_of(&mut d, config)?,
    };
    let radii = log_radii(lo, hi, config.n_radii.max(2));
    let c = integral_from_distances(&d, &radii);
    let (mut xs, mut ys) = (Vec::with_capacity(radii.len()), Vec::with_capacity(radii.len()));
    for (&r, &cr) in radii.iter().zip(&c) {
        if cr > 0.0 {
            xs.push(r.ln());
            ys.push(cr.ln());
        }
    }
    if xs.len() < 2 {
        return Err(LssError::DegenerateScaling("scaling region has < 2 usable radii".into()));
    }
    Ok(ls_slope(&xs, &ys))
}

/// Correlation dimension for ED = 1..=ed_max and the saturation verdict:
/// saturated iff the last three dimensions span < 0.4 and average < ed_max / 2.
///
/// One radius grid serves every ED, set by the distance percentiles of the
/// ED = 1 points. Per-ED percentiles drift to ever larger radii as ED grows
/// and the region then measures how the embedded curve folds rather than
/// the curve itself.
pub fn correlation_dimension(series: &[f64], config: &CiConfig) -> Result<CiCurve> {
    if config.ed_max < 3 {
        return Err(LssError::invalid("ed_max must be >= 3"));
    }
    let mut cds = Vec::with_capacity(config.ed_max);
    let mut fixed = None;
    for ed in 1..=config.ed_max {
        let full = delay_embed(series, ed, config.tau)?;
        let points = if full.len() > config.max_points {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut rows = rand::seq::index::sample(&mut rng, full.len(), config.max_points).into_vec();
            rows.sort_unstable();
            full.select(&rows)
        } else {
            full
        };
        if fixed.is_none() {
            fixed = Some(scaling_bounds(&points, config)?);
        }
        cds.push(point_set_dimension_in(&points, config, fixed)?);
    }
    let tail = &cds[cds.len() - 3..];
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mean = tail.iter().sum::<f64>() / 3.0;
    let saturation = hi - lo < 0.4 && mean < config.ed_max as f64 / 2.0;
    Ok(CiCurve {
        ed_values: (1..=config.ed_max).collect(),
        cd_values: cds,
        saturation,
        cd_saturated: saturation.then_some(mean),
    })
}

pub fn ci_label(curve: &CiCurve) -> Label {
    if curve.saturation {
        Label::NonStochastic
    } else {
        Label::Stochastic
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embed_small() {
        let e = delay_embed(&[1.0, 2.0, 3.0, 4.0], 2, 1).unwrap();
        assert_eq!(e.coords, vec![1.0, 2.0, 2.0, 3.0, 3.0, 4.0]);
        let e = delay_embed(&[1.0, 2.0, 3.0, 4.0], 1, 1).unwrap();
        assert_eq!(e.coords, vec![1.0, 2.0, 3.0, 4.0]);
        assert!(delay_embed(&[1.0, 2.0, 3.0, 4.0], 5, 1).is_err());
        let e = delay_embed(&[1.0, 2.0, 3.0, 4.0, 5.0], 2, 3).unwrap();
        assert_eq!(e.coords, vec![1.0, 4.0, 2.0, 5.0]);
    }

    #[test]
    fn integral_extremes() {
        let e = delay_embed(&[0.0, 1.0, 3.0, 7.0], 1, 1).unwrap();
        assert_eq!(correlation_integral(&e, 100.0, 0).unwrap(), 1.0);
        assert_eq!(correlation_integral(&e, 0.5, 0).unwrap(), 0.0);
        assert!(correlation_integral(&e, 0.0, 0).is_err());
        assert!(correlation_integral(&e, 1.0, 5).is_err());
    }

    #[test]
    fn theiler_window_drops_neighbours() {
        let e = delay_embed(&[0.0, 1.0, 3.0, 7.0], 1, 1).unwrap();
        // pairs with |i-j| > 1: (0,3)=3, (0,7)=7, (1,7)=6
        assert!((correlation_integral(&e, 3.5, 1).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_series_is_degenerate() {
        let r = correlation_dimension(&[0.3; 200], &CiConfig::default());
        assert!(matches!(r, Err(LssError::DegenerateScaling(_))));
    }

    #[test]
    fn label_follows_saturation() {
        let mut c = CiCurve {
            ed_values: vec![1, 2, 3],
            cd_values: vec![1.0, 1.0, 1.0],
            saturation: true,
            cd_saturated: Some(1.0),
        };
        assert_eq!(ci_label(&c), Label::NonStochastic);
        c.saturation = false;
        assert_eq!(ci_label(&c), Label::Stochastic);
    }

    #[test]
    fn ed_max_validated() {
        assert!(correlation_dimension(&[0.1, 0.5, 0.9], &CiConfig { ed_max: 2, ..Default::default() }).is_err());
    }
}
