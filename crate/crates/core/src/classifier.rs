//! Small convolutional classifier for LSS images with a global-average-pooling
//! head, softmax confidences and class activation maps.
//!
//! Every stage is `conv kxk (same padding) -> bias -> ReLU -> 2x2 max-pool`.
//! The pooled maps of the last stage are averaged per channel and fed to a
//! fully connected layer with two outputs (0 = stochastic, 1 = non-stochastic).

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{LssError, Result};
use crate::lss::LssImage;
use crate::series::Label;

pub const MODEL_MAGIC: &[u8; 7] = b"LSSCNN1";
const MODEL_MAGIC_STEM: &[u8; 6] = b"LSSCNN";
pub const NUM_CLASSES: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnArch {
    pub input: usize,
    pub channels: Vec<usize>,
    pub kernel: usize,
}

impl Default for CnnArch {
    fn default() -> Self {
        CnnArch {
            input: 224,
            channels: vec![8, 16, 32, 64],
            kernel: 3,
        }
    }
}

impl CnnArch {
    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(LssError::invalid("every stage needs at least one channel"));
        }
        if self.kernel == 0 {
            return Err(LssError::invalid("kernel size must be >= 1"));
        }
        let mut hw = self.input;
        for _ in &self.channels {
            hw = conv_out(hw, self.kernel) / 2;
            if hw == 0 {
                return Err(LssError::invalid(format!(
                    "input {} too small for {} stages",
                    self.input,
                    self.channels.len()
                )));
            }
        }
        Ok(())
    }
}

fn pad_of(k: usize) -> usize {
    (k - 1) / 2
}

fn conv_out(hw: usize, k: usize) -> usize {
    (hw + 2 * pad_of(k) + 1).saturating_sub(k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvStage {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    /// `out_c x (in_c * k * k)` row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvStage {
    fn zeros(in_c: usize, out_c: usize, k: usize) -> Self {
        ConvStage {
            in_c,
            out_c,
            k,
            weight: vec![0.0; out_c * in_c * k * k],
            bias: vec![0.0; out_c],
        }
    }

    fn patch_len(&self) -> usize {
        self.in_c * self.k * self.k
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub input: usize,
    pub stages: Vec<ConvStage>,
    /// `2 x C` row-major, one row of class weights per label index.
    pub fc_w: Vec<f64>,
    pub fc_b: [f64; NUM_CLASSES],
}

impl CnnModel {
    pub fn zeros(arch: &CnnArch) -> Result<Self> {
        arch.validate()?;
        let mut in_c = 1;
        let mut stages = Vec::with_capacity(arch.channels.len());
        for &c in &arch.channels {
            stages.push(ConvStage::zeros(in_c, c, arch.kernel));
            in_c = c;
        }
        Ok(CnnModel {
            input: arch.input,
            stages,
            fc_w: vec![0.0; NUM_CLASSES * in_c],
            fc_b: [0.0; NUM_CLASSES],
        })
    }

    /// He-normal convolution weights, uniform head weights, zero biases.
    pub fn init(arch: &CnnArch, seed: u64) -> Result<Self> {
        let mut m = CnnModel::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for st in &mut m.stages {
            let std = (2.0 / st.patch_len() as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            st.weight.iter_mut().for_each(|w| *w = normal.sample(&mut rng));
        }
        let bound = 1.0 / (m.feature_channels() as f64).sqrt();
        m.fc_w.iter_mut().for_each(|w| *w = rng.gen_range(-bound..=bound));
        Ok(m)
    }

    pub fn arch(&self) -> CnnArch {
        CnnArch {
            input: self.input,
            channels: self.stages.iter().map(|s| s.out_c).collect(),
            kernel: self.stages.first().map_or(3, |s| s.k),
        }
    }

    pub fn feature_channels(&self) -> usize {
        self.stages.last().map_or(1, |s| s.out_c)
    }

    /// Spatial size of the last pooled feature maps.
    pub fn feature_size(&self) -> usize {
        self.stages.iter().fold(self.input, |hw, s| conv_out(hw, s.k) / 2)
    }

    pub fn num_params(&self) -> usize {
        self.stages
            .iter()
            .map(|s| s.weight.len() + s.bias.len())
            .sum::<usize>()
            + self.fc_w.len()
            + NUM_CLASSES
    }

    /// All parameters in serialization order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for s in &self.stages {
            out.extend_from_slice(&s.weight);
            out.extend_from_slice(&s.bias);
        }
        out.extend_from_slice(&self.fc_w);
        out.extend_from_slice(&self.fc_b);
        out
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.stages
            .iter_mut()
            .flat_map(|s| s.weight.iter_mut().chain(s.bias.iter_mut()))
            .chain(self.fc_w.iter_mut())
            .chain(self.fc_b.iter_mut())
    }

    fn zeros_like(&self) -> CnnModel {
        CnnModel {
            input: self.input,
            stages: self
                .stages
                .iter()
                .map(|s| ConvStage::zeros(s.in_c, s.out_c, s.k))
                .collect(),
            fc_w: vec![0.0; self.fc_w.len()],
            fc_b: [0.0; NUM_CLASSES],
        }
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input * self.input {
            return Err(LssError::DimensionMismatch {
                expected: self.input * self.input,
                got: len,
            });
        }
        Ok(())
    }
}

/// Nearest-neighbor resampling of a binary image to `size x size`.
pub fn resize_nearest(img: &LssImage, size: usize) -> LssImage {
    let r = img.resolution();
    if r == size {
        return img.clone();
    }
    let cells = (0..size * size)
        .map(|i| {
            let (y, x) = (i / size, i % size);
            u8::from(img.get(y * r / size, x * r / size))
        })
        .collect();
    LssImage::from_cells(size, cells).expect("size matches")
}

/// Image cells as classifier input; errors on a resolution mismatch.
pub fn input_of(model: &CnnModel, img: &LssImage) -> Result<Vec<f64>> {
    if img.resolution() != model.input {
        return Err(LssError::DimensionMismatch {
            expected: model.input,
            got: img.resolution(),
        });
    }
    Ok(img.to_f64())
}

/// Like [`input_of`] but nearest-neighbor resizes mismatched images.
/// The flag reports whether a resize happened.
pub fn input_resized(model: &CnnModel, img: &LssImage) -> (Vec<f64>, bool) {
    if img.resolution() == model.input {
        (img.to_f64(), false)
    } else {
        (resize_nearest(img, model.input).to_f64(), true)
    }
}

struct StageCache {
    in_hw: usize,
    conv_hw: usize,
    cols: Vec<f64>,
    /// Post-ReLU convolution output.
    act: Vec<f64>,
    /// Flat index into `act` of every pooled maximum.
    argmax: Vec<u32>,
}

struct ForwardPass {
    stages: Vec<StageCache>,
    /// Final pooled maps, `C x h x w`.
    features: Vec<f64>,
    feat_hw: usize,
    pooled: Vec<f64>,
    logits: [f64; NUM_CLASSES],
}

fn im2col(input: &[f64], c: usize, hw: usize, k: usize, cols: &mut Vec<f64>) -> usize {
    let pad = pad_of(k) as isize;
    let ohw = conv_out(hw, k);
    let p = ohw * ohw;
    cols.clear();
    cols.resize(c * k * k * p, 0.0);
    for ci in 0..c {
        let plane = &input[ci * hw * hw..(ci + 1) * hw * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..ohw {
                    let iy = oy as isize + ky as isize - pad;
                    if iy < 0 || iy >= hw as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * hw..(iy as usize + 1) * hw];
                    let drow = &mut dst[oy * ohw..(oy + 1) * ohw];
                    for (ox, d) in drow.iter_mut().enumerate() {
                        let ix = ox as isize + kx as isize - pad;
                        if ix >= 0 && ix < hw as isize {
                            *d = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    ohw
}

fn col2im(cols: &[f64], c: usize, hw: usize, k: usize, out: &mut [f64]) {
    let pad = pad_of(k) as isize;
    let ohw = conv_out(hw, k);
    let p = ohw * ohw;
    out.iter_mut().for_each(|v| *v = 0.0);
    for ci in 0..c {
        let plane = &mut out[ci * hw * hw..(ci + 1) * hw * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..ohw {
                    let iy = oy as isize + ky as isize - pad;
                    if iy < 0 || iy >= hw as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * hw..(iy as usize + 1) * hw];
                    for ox in 0..ohw {
                        let ix = ox as isize + kx as isize - pad;
                        if ix >= 0 && ix < hw as isize {
                            dst[ix as usize] += src[oy * ohw + ox];
                        }
                    }
                }
            }
        }
    }
}

/// `c (m x n) = alpha * a (m x k) * b (k x n) + beta * c` with explicit strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the asserts above bound every index the strides can reach,
    // since each operand is a dense matrix addressed row- or column-major.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn forward_pass(model: &CnnModel, input: &[f64]) -> ForwardPass {
    let mut x = input.to_vec();
    let mut hw = model.input;
    let mut caches = Vec::with_capacity(model.stages.len());
    for st in &model.stages {
        let mut cols = Vec::new();
        let ohw = im2col(&x, st.in_c, hw, st.k, &mut cols);
        let p = ohw * ohw;
        let mut act = vec![0.0; st.out_c * p];
        let kc = st.patch_len() as isize;
        gemm(st.out_c, st.patch_len(), p, &st.weight, (kc, 1), &cols, (p as isize, 1), 0.0, &mut act);
        for (o, plane) in act.chunks_mut(p).enumerate() {
            let b = st.bias[o];
            plane.iter_mut().for_each(|v| *v = (*v + b).max(0.0));
        }
        let phw = ohw / 2;
        let mut pooled = vec![0.0; st.out_c * phw * phw];
        let mut argmax = vec![0u32; pooled.len()];
        for o in 0..st.out_c {
            let plane = &act[o * p..(o + 1) * p];
            for py in 0..phw {
                for px in 0..phw {
                    let mut best = 2 * py * ohw + 2 * px;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = (2 * py + dy) * ohw + 2 * px + dx;
                        if plane[idx] > plane[best] {
                            best = idx;
                        }
                    }
                    let out = o * phw * phw + py * phw + px;
                    pooled[out] = plane[best];
                    argmax[out] = (o * p + best) as u32;
                }
            }
        }
        caches.push(StageCache {
            in_hw: hw,
            conv_hw: ohw,
            cols,
            act,
            argmax,
        });
        x = pooled;
        hw = phw;
    }
    let c = model.feature_channels();
    let area = (hw * hw) as f64;
    let pooled: Vec<f64> = x.chunks(hw * hw).map(|ch| ch.iter().sum::<f64>() / area).collect();
    let mut logits = model.fc_b;
    for (j, l) in logits.iter_mut().enumerate() {
        *l += model.fc_w[j * c..(j + 1) * c]
            .iter()
            .zip(&pooled)
            .map(|(w, f)| w * f)
            .sum::<f64>();
    }
    ForwardPass {
        stages: caches,
        features: x,
        feat_hw: hw,
        pooled,
        logits,
    }
}

/// Accumulate `scale * dLoss/dparams` for the given logit gradient.
fn backward_pass(model: &CnnModel, fp: &ForwardPass, dlogits: [f64; NUM_CLASSES], grad: &mut CnnModel) {
    let c = model.feature_channels();
    let mut dfeat = vec![0.0; c];
    for j in 0..NUM_CLASSES {
        grad.fc_b[j] += dlogits[j];
        for ch in 0..c {
            grad.fc_w[j * c + ch] += dlogits[j] * fp.pooled[ch];
            dfeat[ch] += model.fc_w[j * c + ch] * dlogits[j];
        }
    }
    let area = fp.feat_hw * fp.feat_hw;
    let mut dx: Vec<f64> = dfeat
        .iter()
        .flat_map(|&g| std::iter::repeat_n(g / area as f64, area))
        .collect();

    for (si, st) in model.stages.iter().enumerate().rev() {
        let cache = &fp.stages[si];
        let p = cache.conv_hw * cache.conv_hw;
        let mut dact = vec![0.0; st.out_c * p];
        for (g, &idx) in dx.iter().zip(&cache.argmax) {
            let idx = idx as usize;
            if cache.act[idx] > 0.0 {
                dact[idx] += g;
            }
        }
        let gst = &mut grad.stages[si];
        for (o, plane) in dact.chunks(p).enumerate() {
            gst.bias[o] += plane.iter().sum::<f64>();
        }
        let kc = st.patch_len();
        // dW += dact (out_c x p) * cols^T (p x kc)
        gemm(st.out_c, p, kc, &dact, (p as isize, 1), &cache.cols, (1, p as isize), 1.0, &mut gst.weight);
        if si > 0 {
            // dcols = W^T (kc x out_c) * dact (out_c x p)
            let mut dcols = vec![0.0; kc * p];
            gemm(kc, st.out_c, p, &st.weight, (1, kc as isize), &dact, (p as isize, 1), 0.0, &mut dcols);
            let mut dinput = vec![0.0; st.in_c * cache.in_hw * cache.in_hw];
            col2im(&dcols, st.in_c, cache.in_hw, st.k, &mut dinput);
            dx = dinput;
        }
    }
}

/// Raw class scores `[stochastic, non-stochastic]`.
pub fn forward(model: &CnnModel, img: &LssImage) -> Result<[f64; NUM_CLASSES]> {
    let input = input_of(model, img)?;
    forward_input(model, &input)
}

pub fn forward_input(model: &CnnModel, input: &[f64]) -> Result<[f64; NUM_CLASSES]> {
    model.check_input(input.len())?;
    Ok(forward_pass(model, input).logits)
}

pub fn softmax(logits: [f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let m = logits[0].max(logits[1]);
    let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
    let z = e[0] + e[1];
    [e[0] / z, e[1] / z]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub c_s: f64,
    pub c_ns: f64,
    pub label: Label,
}

impl Prediction {
    /// Ties go to `Stochastic`.
    pub fn from_logits(logits: [f64; NUM_CLASSES]) -> Self {
        let [c_s, c_ns] = softmax(logits);
        let label = if c_ns > c_s {
            Label::NonStochastic
        } else {
            Label::Stochastic
        };
        Prediction { c_s, c_ns, label }
    }

    pub fn confidence(&self, label: Label) -> f64 {
        match label {
            Label::Stochastic => self.c_s,
            Label::NonStochastic => self.c_ns,
        }
    }
}

pub fn predict(model: &CnnModel, img: &LssImage) -> Result<Prediction> {
    forward(model, img).map(Prediction::from_logits)
}

/// Mean cross-entropy `-ln softmax(z)[label]` and its parameter gradient
/// over a set of inputs.
pub fn cross_entropy_grad(model: &CnnModel, inputs: &[(&[f64], Label)]) -> Result<(f64, CnnModel)> {
    if inputs.is_empty() {
        return Err(LssError::Empty);
    }
    let mut grad = model.zeros_like();
    let scale = 1.0 / inputs.len() as f64;
    let mut total = 0.0;
    for &(x, label) in inputs {
        model.check_input(x.len())?;
        let fp = forward_pass(model, x);
        let probs = softmax(fp.logits);
        let y = label.index();
        total += -(probs[y].max(f64::MIN_POSITIVE)).ln();
        let mut dl = probs;
        dl[y] -= 1.0;
        backward_pass(model, &fp, [dl[0] * scale, dl[1] * scale], &mut grad);
    }
    Ok((total * scale, grad))
}

pub fn cross_entropy(model: &CnnModel, inputs: &[(&[f64], Label)]) -> Result<f64> {
    if inputs.is_empty() {
        return Err(LssError::Empty);
    }
    let mut total = 0.0;
    for &(x, label) in inputs {
        let probs = softmax(forward_input(model, x)?);
        total += -(probs[label.index()].max(f64::MIN_POSITIVE)).ln();
    }
    Ok(total / inputs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub val_fraction: f64,
    pub arch: CnnArch,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            lr: 0.1,
            epochs: 60,
            batch: 16,
            seed: 0,
            val_fraction: 0.2,
            arch: CnnArch::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub epoch_loss: Vec<f64>,
    pub train_accuracy: f64,
    /// `None` when no examples were held out.
    pub val_accuracy: Option<f64>,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

/// Seeded per-label split: `round(fraction * n)` of every label is held out.
pub fn stratified_split(labels: &[Label], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(LssError::invalid(format!("validation fraction {fraction} outside [0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5B117);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for label in [Label::Stochastic, Label::NonStochastic] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        idx.shuffle(&mut rng);
        let n_val = (fraction * idx.len() as f64).round() as usize;
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// Minibatch SGD on mean cross-entropy with a stratified held-out split.
pub fn train_classifier(
    images: &[LssImage],
    labels: &[Label],
    config: &ClassifierConfig,
) -> Result<(CnnModel, TrainMetrics)> {
    let model = CnnModel::init(&config.arch, config.seed)?;
    train_classifier_from(model, images, labels, config)
}

pub fn train_classifier_from(
    mut model: CnnModel,
    images: &[LssImage],
    labels: &[Label],
    config: &ClassifierConfig,
) -> Result<(CnnModel, TrainMetrics)> {
    if images.len() != labels.len() {
        return Err(LssError::DimensionMismatch {
            expected: images.len(),
            got: labels.len(),
        });
    }
    if !(labels.contains(&Label::Stochastic) && labels.contains(&Label::NonStochastic)) {
        return Err(LssError::invalid("training set must contain both labels"));
    }
    if config.batch == 0 || config.epochs == 0 {
        return Err(LssError::invalid("batch and epochs must be >= 1"));
    }
    if !(config.lr >= 0.0 && config.lr.is_finite()) {
        return Err(LssError::invalid("learning rate must be finite and >= 0"));
    }
    let inputs: Vec<Vec<f64>> = images
        .iter()
        .map(|img| input_of(&model, img))
        .collect::<Result<_>>()?;
    let (train_idx, val_idx) = stratified_split(labels, config.val_fraction, config.seed)?;
    let mut order = train_idx.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xC1A55);
    let mut epoch_loss = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(config.batch) {
            let batch: Vec<(&[f64], Label)> = chunk.iter().map(|&i| (inputs[i].as_slice(), labels[i])).collect();
            let (l, g) = cross_entropy_grad(&model, &batch)?;
            if !l.is_finite() {
                return Err(LssError::Divergence(format!("classifier loss non-finite in epoch {epoch}")));
            }
            sum += l * chunk.len() as f64;
            if config.lr > 0.0 {
                for (p, d) in model.params_mut().zip(g.flatten()) {
                    *p -= config.lr * d;
                }
            }
        }
        if model.flatten().iter().any(|v| !v.is_finite()) {
            return Err(LssError::Divergence(format!("classifier weights non-finite in epoch {epoch}")));
        }
        epoch_loss.push(sum / order.len().max(1) as f64);
    }

    let accuracy = |idx: &[usize]| -> Result<f64> {
        let mut hits = 0;
        for &i in idx {
            if Prediction::from_logits(forward_input(&model, &inputs[i])?).label == labels[i] {
                hits += 1;
            }
        }
        Ok(hits as f64 / idx.len() as f64)
    };
    let train_accuracy = accuracy(&train_idx)?;
    let val_accuracy = if val_idx.is_empty() {
        None
    } else {
        Some(accuracy(&val_idx)?)
    };
    Ok((
        model,
        TrainMetrics {
            epoch_loss,
            train_accuracy,
            val_accuracy,
            train_indices: train_idx,
            val_indices: val_idx,
        },
    ))
}

/// Class activation map over the last pooled feature maps.
#[derive(Debug, Clone, PartialEq)]
pub struct CamMap {
    pub class: Label,
    pub size: usize,
    /// `size x size` row-major.
    pub heat: Vec<f64>,
    /// Bilinear upsample of `heat` to the model input resolution.
    pub upsampled: Vec<f64>,
    pub upsampled_size: usize,
    /// All head weights for the class are zero, so the map carries no evidence.
    pub degenerate: bool,
}

impl CamMap {
    pub fn mean(&self) -> f64 {
        self.heat.iter().sum::<f64>() / self.heat.len() as f64
    }
}

pub fn cam(model: &CnnModel, img: &LssImage, class: Label) -> Result<CamMap> {
    let input = input_of(model, img)?;
    cam_input(model, &input, class)
}

pub fn cam_input(model: &CnnModel, input: &[f64], class: Label) -> Result<CamMap> {
    model.check_input(input.len())?;
    let fp = forward_pass(model, input);
    let c = model.feature_channels();
    let area = fp.feat_hw * fp.feat_hw;
    let w = &model.fc_w[class.index() * c..(class.index() + 1) * c];
    let mut heat = vec![0.0; area];
    for (ch, map) in fp.features.chunks(area).enumerate() {
        for (h, v) in heat.iter_mut().zip(map) {
            *h += w[ch] * v;
        }
    }
    let upsampled = bilinear(&heat, fp.feat_hw, model.input);
    Ok(CamMap {
        class,
        size: fp.feat_hw,
        heat,
        upsampled,
        upsampled_size: model.input,
        degenerate: w.iter().all(|&x| x == 0.0),
    })
}

/// Half-pixel-centred bilinear resize of a square grid.
pub fn bilinear(src: &[f64], n: usize, size: usize) -> Vec<f64> {
    let scale = n as f64 / size as f64;
    let coord = |o: usize| {
        let x = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (n - 1) as f64);
        let i = (x.floor() as usize).min(n - 1);
        let j = (i + 1).min(n - 1);
        (i, j, x - i as f64)
    };
    let mut out = vec![0.0; size * size];
    for oy in 0..size {
        let (y0, y1, fy) = coord(oy);
        for ox in 0..size {
            let (x0, x1, fx) = coord(ox);
            let top = src[y0 * n + x0] * (1.0 - fx) + src[y0 * n + x1] * fx;
            let bot = src[y1 * n + x0] * (1.0 - fx) + src[y1 * n + x1] * fx;
            out[oy * size + ox] = top * (1.0 - fy) + bot * fy;
        }
    }
    out
}

/// Min–max scale to 8-bit grey (0 for the minimum).
pub fn to_gray8(values: &[f64]) -> Vec<u8> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    values
        .iter()
        .map(|&v| {
            if range > 0.0 {
                ((v - lo) / range * 255.0).round() as u8
            } else {
                0
            }
        })
        .collect()
}

pub fn to_bytes(model: &CnnModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 8 * model.num_params());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&(model.input as u32).to_le_bytes());
    out.extend_from_slice(&(model.stages.len() as u32).to_le_bytes());
    for s in &model.stages {
        for v in [s.in_c, s.out_c, s.k] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
    }
    for v in model.flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<CnnModel> {
    let n = MODEL_MAGIC.len();
    if bytes.len() < n {
        return Err(LssError::Corrupt("file shorter than its magic".into()));
    }
    let magic = &bytes[..n];
    if magic != MODEL_MAGIC {
        if magic.starts_with(MODEL_MAGIC_STEM) {
            return Err(LssError::VersionMismatch {
                expected: String::from_utf8_lossy(MODEL_MAGIC).into_owned(),
                found: String::from_utf8_lossy(magic).into_owned(),
            });
        }
        return Err(LssError::Corrupt("not a classifier model file".into()));
    }
    let mut pos = n;
    let mut read_u32 = |bytes: &[u8]| -> Result<usize> {
        let v = bytes
            .get(pos..pos + 4)
            .ok_or_else(|| LssError::Corrupt("truncated header".into()))?;
        pos += 4;
        Ok(u32::from_le_bytes(v.try_into().unwrap()) as usize)
    };
    let input = read_u32(bytes)?;
    let n_stages = read_u32(bytes)?;
    if n_stages == 0 || n_stages > 64 {
        return Err(LssError::Corrupt(format!("implausible stage count {n_stages}")));
    }
    let mut stages = Vec::with_capacity(n_stages);
    let mut prev = 1;
    for _ in 0..n_stages {
        let (in_c, out_c, k) = (read_u32(bytes)?, read_u32(bytes)?, read_u32(bytes)?);
        if in_c != prev || out_c == 0 || k == 0 {
            return Err(LssError::ShapeMismatch(format!("stage ({in_c}, {out_c}, {k}) does not chain")));
        }
        prev = out_c;
        stages.push(ConvStage::zeros(in_c, out_c, k));
    }
    let mut model = CnnModel {
        input,
        stages,
        fc_w: vec![0.0; NUM_CLASSES * prev],
        fc_b: [0.0; NUM_CLASSES],
    };
    model.arch().validate().map_err(|e| LssError::ShapeMismatch(e.to_string()))?;
    let payload = &bytes[pos..];
    if !payload.len().is_multiple_of(8) {
        return Err(LssError::Corrupt(format!("payload of {} bytes is truncated", payload.len())));
    }
    if payload.len() / 8 != model.num_params() {
        return Err(LssError::ShapeMismatch(format!(
            "header describes {} parameters, file holds {}",
            model.num_params(),
            payload.len() / 8
        )));
    }
    for (p, c) in model.params_mut().zip(payload.chunks_exact(8)) {
        *p = f64::from_le_bytes(c.try_into().unwrap());
    }
    if model.flatten().iter().any(|v| !v.is_finite()) {
        return Err(LssError::Corrupt("non-finite parameter".into()));
    }
    Ok(model)
}

pub fn save_model(model: &CnnModel, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(model)).map_err(|e| LssError::file(path, e))
}

pub fn load_model(path: &Path) -> Result<CnnModel> {
    let bytes = fs::read(path).map_err(|e| LssError::file(path, e))?;
    from_bytes(&bytes)
}
