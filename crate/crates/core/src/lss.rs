//! Latent Space Signature: each window becomes the point
//! (time-domain latent, frequency-domain latent) on the unit square, and the
//! points are rasterized into a binary occupancy image.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autoencoder::AutoencoderParams;
use crate::error::{LssError, Result};
use crate::windowing::{check_window_len, SpectralFeaturizer};

pub const DEFAULT_RESOLUTION: usize = 224;

/// Slack allowed when checking that a series is normalized.
const UNIT_SLACK: f64 = 1e-9;

/// One `(u, v)` point per window end index: `u` from the time-domain
/// encoder, `v` from the frequency-domain encoder.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LatentTrace {
    pub points: Vec<(f64, f64)>,
}

impl LatentTrace {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Axis-aligned latent rectangle mapped onto the raster grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterExtent {
    pub u: (f64, f64),
    pub v: (f64, f64),
}

impl RasterExtent {
    pub const UNIT: RasterExtent = RasterExtent {
        u: (0.0, 1.0),
        v: (0.0, 1.0),
    };

    pub fn new(u: (f64, f64), v: (f64, f64)) -> Result<Self> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && hi > lo;
        if !(ok(u) && ok(v)) {
            return Err(LssError::invalid(format!("empty raster extent u={u:?} v={v:?}")));
        }
        Ok(RasterExtent { u, v })
    }

    /// Smallest rectangle holding every point of the traces. A flat axis is
    /// widened by 0.5 on each side.
    pub fn bounding<'a>(traces: impl IntoIterator<Item = &'a LatentTrace>) -> Result<Self> {
        let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for t in traces {
            for &(u, v) in &t.points {
                b = (b.0.min(u), b.1.max(u), b.2.min(v), b.3.max(v));
            }
        }
        if !b.0.is_finite() {
            return Err(LssError::Empty);
        }
        RasterExtent::new(widen((b.0, b.1)), widen((b.2, b.3)))
    }

    /// Position of `(u, v)` relative to the rectangle, in unit coordinates.
    pub fn to_unit(&self, u: f64, v: f64) -> (f64, f64) {
        (
            (u - self.u.0) / (self.u.1 - self.u.0),
            (v - self.v.0) / (self.v.1 - self.v.0),
        )
    }
}

/// Largest modulus of DFT bin `k` over windows `x` in `[0, 1]^n`.
///
/// The maximum of a convex function over the hypercube sits on a vertex, and
/// the best vertex keeps exactly the roots of unity in some open half-plane,
/// so it suffices to try every half-plane boundary through a root.
pub fn dft_bin_bound(n: usize, k: usize) -> f64 {
    let roots: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let a = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
            (a.cos(), a.sin())
        })
        .collect();
    let mut best: f64 = 0.0;
    for &(c, s) in &roots {
        let theta = s.atan2(c);
        for edge in [std::f64::consts::FRAC_PI_2, -std::f64::consts::FRAC_PI_2] {
            for nudge in [1e-7, -1e-7] {
                let phi = theta + edge + nudge;
                let (dc, ds) = (phi.cos(), phi.sin());
                let (mut re, mut im) = (0.0, 0.0);
                for &(rc, rs) in &roots {
                    if rc * dc + rs * ds > 0.0 {
                        re += rc;
                        im += rs;
                    }
                }
                best = best.max(re.hypot(im));
            }
        }
    }
    best.max(if k.is_multiple_of(n) { n as f64 } else { 0.0 })
}

/// Range of `sigmoid(w . x + b)` (first latent) over inputs in the box
/// `[0, upper_i]`.
fn latent_range(p: &AutoencoderParams, upper: &[f64]) -> (f64, f64) {
    let w = &p.w1[..p.d];
    let lo: f64 = w.iter().zip(upper).map(|(w, u)| w.min(0.0) * u).sum::<f64>() + p.b1[0];
    let hi: f64 = w.iter().zip(upper).map(|(w, u)| w.max(0.0) * u).sum::<f64>() + p.b1[0];
    (crate::autoencoder::sigmoid(lo), crate::autoencoder::sigmoid(hi))
}

/// Maps normalized series to latent traces with a fixed encoder pair.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub td: AutoencoderParams,
    pub fd: AutoencoderParams,
    featurizer: SpectralFeaturizer,
    extent: RasterExtent,
}

impl Embedding {
    pub fn new(td: AutoencoderParams, fd: AutoencoderParams, n: usize, m: usize) -> Result<Self> {
        if td.d != n {
            return Err(LssError::DimensionMismatch { expected: n, got: td.d });
        }
        if fd.d != m {
            return Err(LssError::DimensionMismatch { expected: m, got: fd.d });
        }
        let featurizer = SpectralFeaturizer::new(n, m)?;
        let extent = reachable_extent(&td, &fd, n, m)?;
        Ok(Embedding {
            td,
            fd,
            featurizer,
            extent,
        })
    }

    /// Raster rectangle used by [`Embedding::image`]. Defaults to the latent
    /// box reachable from windows in `[0, 1]^N`.
    pub fn extent(&self) -> RasterExtent {
        self.extent
    }

    pub fn with_extent(mut self, extent: RasterExtent) -> Self {
        self.extent = extent;
        self
    }

    /// Trace rasterized over [`Embedding::extent`].
    pub fn image(&self, series: &[f64], resolution: usize) -> Result<LssImage> {
        rasterize_in(&self.trace(series)?, resolution, &self.extent)
    }

    pub fn window_len(&self) -> usize {
        self.featurizer.window_len()
    }

    /// Trace of a series already rescaled to [0, 1]. With latent dimension
    /// above one, only the first component is used.
    pub fn trace(&self, series: &[f64]) -> Result<LatentTrace> {
        let n = self.window_len();
        check_window_len(series.len(), n)?;
        if let Some(bad) = series
            .iter()
            .find(|&&x| !(-UNIT_SLACK..=1.0 + UNIT_SLACK).contains(&x))
        {
            return Err(LssError::NotNormalized(format!("sample {bad} outside [0, 1]")));
        }
        let td_row = |w: &[f64]| first_latent(&self.td, w);
        let mut spec = vec![0.0; self.featurizer.crop_len()];
        let mut points = Vec::with_capacity(series.len() - n + 1);
        for w in series.windows(n) {
            self.featurizer.magnitudes_into(w, &mut spec)?;
            spec.iter_mut().for_each(|v| *v /= n as f64);
            points.push((td_row(w), first_latent(&self.fd, &spec)));
        }
        Ok(LatentTrace { points })
    }
}

fn first_latent(p: &AutoencoderParams, v: &[f64]) -> f64 {
    let a: f64 = p.w1[..p.d].iter().zip(v).map(|(w, x)| w * x).sum::<f64>() + p.b1[0];
    crate::autoencoder::sigmoid(a)
}

/// Bounding box of the first latents of both encoders for windows in
/// `[0, 1]^N`; frequency inputs are bounded per bin by [`dft_bin_bound`] / N.
pub fn reachable_extent(td: &AutoencoderParams, fd: &AutoencoderParams, n: usize, m: usize) -> Result<RasterExtent> {
    let u = latent_range(td, &vec![1.0; n]);
    let fd_upper: Vec<f64> = (0..m).map(|k| dft_bin_bound(n, k) / n as f64).collect();
    let v = latent_range(fd, &fd_upper);
    RasterExtent::new(widen(u), widen(v))
}

fn widen((lo, hi): (f64, f64)) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

pub fn latent_trace(
    ae_td: &AutoencoderParams,
    ae_fd: &AutoencoderParams,
    series: &[f64],
    n: usize,
    m: usize,
) -> Result<LatentTrace> {
    Embedding::new(ae_td.clone(), ae_fd.clone(), n, m)?.trace(series)
}

/// Square binary occupancy grid, row 0 at the top (v near 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LssImage {
    resolution: usize,
    grid: Vec<u8>,
}

impl LssImage {
    pub fn blank(resolution: usize) -> Self {
        LssImage {
            resolution,
            grid: vec![0; resolution * resolution],
        }
    }

    /// Grid from explicit 0/1 cells (row-major).
    pub fn from_cells(resolution: usize, cells: Vec<u8>) -> Result<Self> {
        if cells.len() != resolution * resolution {
            return Err(LssError::ShapeMismatch(format!(
                "{} cells for a {resolution}x{resolution} image",
                cells.len()
            )));
        }
        Ok(LssImage {
            resolution,
            grid: cells.into_iter().map(|c| u8::from(c != 0)).collect(),
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn cells(&self) -> &[u8] {
        &self.grid
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.grid[row * self.resolution + col] != 0
    }

    pub fn set(&mut self, row: usize, col: usize) {
        self.grid[row * self.resolution + col] = 1;
    }

    pub fn set_count(&self) -> usize {
        self.grid.iter().filter(|&&c| c != 0).count()
    }

    pub fn occupancy(&self) -> f64 {
        self.set_count() as f64 / (self.resolution * self.resolution) as f64
    }

    /// Cell coordinates `(row, col)` of a unit-square point.
    pub fn cell_of(&self, u: f64, v: f64) -> (usize, usize) {
        let r = self.resolution;
        let bin = |x: f64| ((x * r as f64).floor().max(0.0) as usize).min(r - 1);
        (bin(1.0 - v), bin(u))
    }

    pub fn mark(&mut self, u: f64, v: f64) {
        let (row, col) = self.cell_of(u, v);
        self.set(row, col);
    }

    /// Cells as reals in {0, 1} for the classifier.
    pub fn to_f64(&self) -> Vec<f64> {
        self.grid.iter().map(|&c| f64::from(c)).collect()
    }
}

/// Rasterize over the unit square.
pub fn rasterize(trace: &LatentTrace, resolution: usize) -> Result<LssImage> {
    rasterize_in(trace, resolution, &RasterExtent::UNIT)
}

/// Rasterize over `extent`; points outside it clamp to the border cells.
pub fn rasterize_in(trace: &LatentTrace, resolution: usize, extent: &RasterExtent) -> Result<LssImage> {
    if resolution < 2 {
        return Err(LssError::invalid("resolution must be >= 2"));
    }
    if trace.is_empty() {
        return Err(LssError::Empty);
    }
    let mut img = LssImage::blank(resolution);
    for &(u, v) in &trace.points {
        let (x, y) = extent.to_unit(u, v);
        img.mark(x, y);
    }
    Ok(img)
}

/// Binary PGM (P5): set cells black (0) on white (255).
pub fn encode_pgm(img: &LssImage) -> Vec<u8> {
    let r = img.resolution;
    let mut out = format!("P5\n{r} {r}\n255\n").into_bytes();
    out.extend(img.grid.iter().map(|&c| if c != 0 { 0u8 } else { 255u8 }));
    out
}

/// Square 8-bit grayscale PGM, row-major pixels.
pub fn encode_gray_pgm(size: usize, pixels: &[u8]) -> Vec<u8> {
    debug_assert_eq!(pixels.len(), size * size);
    let mut out = format!("P5\n{size} {size}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn write_image(img: &LssImage, path: &Path) -> Result<()> {
    fs::write(path, encode_pgm(img)).map_err(|e| LssError::file(path, e))
}

pub fn read_image(path: &Path) -> Result<LssImage> {
    let bytes = fs::read(path).map_err(|e| LssError::file(path, e))?;
    decode_pgm(&bytes)
}

/// Parse a square P5 image; pixels below 128 count as set.
pub fn decode_pgm(bytes: &[u8]) -> Result<LssImage> {
    let (header, pixels) = parse_pgm_header(bytes)?;
    let PgmHeader { width, height, maxval } = header;
    if width != height {
        return Err(LssError::MalformedHeader(format!("image is {width}x{height}, not square")));
    }
    if maxval != 255 {
        return Err(LssError::MalformedHeader(format!("maxval {maxval}, expected 255")));
    }
    if pixels.len() != width * height {
        return Err(LssError::MalformedHeader(format!(
            "expected {} pixel bytes, found {}",
            width * height,
            pixels.len()
        )));
    }
    LssImage::from_cells(width, pixels.iter().map(|&p| u8::from(p < 128)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PgmHeader {
    pub width: usize,
    pub height: usize,
    pub maxval: usize,
}

/// Header fields and the remaining pixel bytes of a P5 file.
pub fn parse_pgm_header(bytes: &[u8]) -> Result<(PgmHeader, &[u8])> {
    if !bytes.starts_with(b"P5") {
        return Err(LssError::MalformedHeader("missing P5 magic".into()));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| LssError::MalformedHeader("expected a decimal header field".into()))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(LssError::MalformedHeader("header not terminated by whitespace".into()));
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 || maxval == 0 {
        return Err(LssError::MalformedHeader("zero-sized header field".into()));
    }
    Ok((PgmHeader { width, height, maxval }, &bytes[pos + 1..]))
}
