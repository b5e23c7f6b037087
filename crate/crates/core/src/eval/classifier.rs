//! Classifier interface and the built-in softmax-regression toy model.

use std::path::Path;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::io::write_atomic;
use crate::grid::spectrum::{band_index, ifft2_real_of};
use crate::grid::{fft2, ImageGrid, ObjectRect, RngStream};
use crate::math::{argmax, log_sum_exp, softmax};

/// Anything that maps an image to class logits and can pull a cotangent on
/// the logits back to image space.
pub trait Classifier: Send + Sync {
    fn num_classes(&self) -> usize;
    fn logits(&self, image: &ImageGrid) -> Result<Vec<f64>>;
    /// `Jᵀ·upstream`, where `J = ∂logits/∂image`.
    fn logits_vjp(&self, image: &ImageGrid, upstream: &[f64]) -> Result<ImageGrid>;
}

/// Classifiers whose last layer is `W·φ(x) + b`.
pub trait LinearHead: Classifier {
    fn penultimate(&self, image: &ImageGrid) -> Result<Vec<f64>>;
}

pub fn predict(classifier: &dyn Classifier, image: &ImageGrid) -> Result<(usize, Vec<f64>)> {
    let z = classifier.logits(image)?;
    Ok((argmax(&z), z))
}

/// Four corner crops and the center crop, each followed by its mirror.
pub fn ten_crop_views(image: &ImageGrid, crop_fraction: f64) -> Result<Vec<ImageGrid>> {
    if !(crop_fraction > 0.0 && crop_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "crop fraction {crop_fraction} outside (0, 1]"
        )));
    }
    let (h, w) = (image.height(), image.width());
    let ch = ((h as f64 * crop_fraction).round() as usize).clamp(1, h);
    let cw = ((w as f64 * crop_fraction).round() as usize).clamp(1, w);
    let origins = [
        (0, 0),
        (w - cw, 0),
        (0, h - ch),
        (w - cw, h - ch),
        ((w - cw) / 2, (h - ch) / 2),
    ];
    let mut views = Vec::with_capacity(10);
    for (x, y) in origins {
        let crop = image.crop(ObjectRect::new(x, y, cw, ch));
        views.push(crop.flip_horizontal());
        views.push(crop);
    }
    Ok(views)
}

/// Mean logits over the ten views.
pub fn predict_tencrop(
    classifier: &dyn Classifier,
    image: &ImageGrid,
    crop_fraction: f64,
) -> Result<(usize, Vec<f64>)> {
    let views = ten_crop_views(image, crop_fraction)?;
    let mut acc = vec![0.0; classifier.num_classes()];
    for v in &views {
        for (a, z) in acc.iter_mut().zip(classifier.logits(v)?) {
            *a += z;
        }
    }
    acc.iter_mut().for_each(|a| *a /= views.len() as f64);
    Ok((argmax(&acc), acc))
}

/// Per-axis area weights of a box downsample from `n` to `g` cells.
fn box_weights(n: usize, g: usize) -> Vec<Vec<(usize, f64)>> {
    let step = n as f64 / g as f64;
    (0..g)
        .map(|i| {
            let (lo, hi) = (i as f64 * step, (i + 1) as f64 * step);
            let mut taps = Vec::new();
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(n);
            for p in first..last {
                let overlap = (hi.min(p as f64 + 1.0) - lo.max(p as f64)).max(0.0);
                if overlap > 0.0 {
                    taps.push((p, overlap / step));
                }
            }
            taps
        })
        .collect()
}

/// `g×g` box-averaged pixels per channel, optionally the same boxes over
/// squared pixels, then `bands` log radial energies of the gray image (DC
/// excluded). Works at any input size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub grid: usize,
    pub bands: usize,
    /// Also box-average squared pixels: local energy, which a plain
    /// average washes out for zero-mean texture.
    #[serde(default)]
    pub squares: bool,
}

/// The pixel-feature map: 8×8 boxes of pixels and squared pixels.
impl Default for FeatureMap {
    fn default() -> Self {
        Self { grid: 8, bands: 0, squares: true }
    }
}

const ENERGY_FLOOR: f64 = 1e-6;

impl FeatureMap {
    pub fn dim(&self, channels: usize) -> usize {
        let boxes = self.grid * self.grid * channels;
        if self.squares {
            2 * boxes + self.bands
        } else {
            boxes + self.bands
        }
    }

    fn band_of(&self, h: usize, w: usize, ky: usize, kx: usize) -> Option<usize> {
        band_index(h, w, ky, kx, self.bands)
    }

    fn band_energies(&self, gray: &ImageGrid) -> Vec<f64> {
        let s = fft2(gray);
        let (h, w) = (gray.height(), gray.width());
        let norm = ((h * w) as f64).powi(2);
        let mut e = vec![0.0; self.bands];
        for ky in 0..h {
            for kx in 0..w {
                if let Some(b) = self.band_of(h, w, ky, kx) {
                    e[b] += s.get(0, ky, kx).norm_sqr() / norm;
                }
            }
        }
        e
    }

    pub fn features(&self, image: &ImageGrid) -> Vec<f64> {
        let (h, w, c) = image.shape();
        let (ry, rx) = (box_weights(h, self.grid), box_weights(w, self.grid));
        let mut out = Vec::with_capacity(self.dim(c));
        let powers: &[i32] = if self.squares { &[1, 2] } else { &[1] };
        for &p in powers {
            for ch in 0..c {
                for ty in &ry {
                    for tx in &rx {
                        let mut v = 0.0;
                        for &(y, wy) in ty {
                            for &(x, wx) in tx {
                                v += wy * wx * image.get(ch, y, x).powi(p);
                            }
                        }
                        out.push(v);
                    }
                }
            }
        }
        let gray = image.to_gray();
        out.extend(self.band_energies(&gray).iter().map(|e| (e + ENERGY_FLOOR).ln()));
        out
    }

    /// Pulls a feature-space cotangent back to image space.
    pub fn vjp(&self, image: &ImageGrid, upstream: &[f64]) -> ImageGrid {
        let (h, w, c) = image.shape();
        let (ry, rx) = (box_weights(h, self.grid), box_weights(w, self.grid));
        let mut g = image.zeros_like();
        let mut k = 0;
        let powers: &[i32] = if self.squares { &[1, 2] } else { &[1] };
        for &p in powers {
            for ch in 0..c {
                for ty in &ry {
                    for tx in &rx {
                        let u = upstream[k];
                        k += 1;
                        for &(y, wy) in ty {
                            for &(x, wx) in tx {
                                let i = g.index(ch, y, x);
                                let d = if p == 2 { 2.0 * image.data()[i] } else { 1.0 };
                                g.data_mut()[i] += u * wy * wx * d;
                            }
                        }
                    }
                }
            }
        }
        // d ln(e_b + floor)/d gray = 2·ifft(m_b·X) / (HW) / (e_b + floor)
        let gray = image.to_gray();
        let energies = self.band_energies(&gray);
        let s = fft2(&gray);
        let n = (h * w) as f64;
        let mut field = Vec::with_capacity(h * w);
        for ky in 0..h {
            for kx in 0..w {
                let z = match self.band_of(h, w, ky, kx) {
                    Some(b) => s.get(0, ky, kx) * (2.0 * upstream[k + b] / n / (energies[b] + ENERGY_FLOOR)),
                    None => Complex64::new(0.0, 0.0),
                };
                field.push(z);
            }
        }
        let dgray = ifft2_real_of(h, w, 1, field);
        for ch in 0..c {
            for (dst, src) in g.channel_mut(ch).iter_mut().zip(dgray.data()) {
                *dst += src / c as f64;
            }
        }
        g
    }
}

/// Softmax regression on standardized [`FeatureMap`] features.
///
/// Logits are `w_k·f + b_k − ½‖f‖²`, the class log-joint of a unit-variance
/// Gaussian model in feature space up to a constant. The shared term leaves
/// the softmax alone but makes log-sum-exp of the logits track feature
/// density, so features far from the training cloud get a low energy score.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyClassifier {
    pub feature_map: FeatureMap,
    pub channels: usize,
    pub classes: Vec<String>,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    /// `K × D`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
    pub seed: u64,
    /// Extra augmented views per training image.
    #[serde(default)]
    pub augment: Augment,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            lr: 1.0,
            l2: 1e-4,
            seed: 0,
            augment: Augment::default(),
        }
    }
}

/// Random square crop (area fraction in `[min_area, 1]`), coin-flip mirror and
/// Gaussian noise with standard deviation in `[0, max_noise]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Augment {
    pub views: usize,
    pub min_area: f64,
    pub max_noise: f64,
}

impl Default for Augment {
    fn default() -> Self {
        Self {
            views: 4,
            min_area: 0.5,
            max_noise: 0.05,
        }
    }
}

impl Augment {
    pub fn view(&self, image: &ImageGrid, rng: &mut RngStream) -> ImageGrid {
        let (h, w) = (image.height(), image.width());
        let frac = rng.uniform_range(self.min_area.clamp(0.0, 1.0), 1.0).sqrt();
        let ch = ((h as f64 * frac).round() as usize).clamp(1, h);
        let cw = ((w as f64 * frac).round() as usize).clamp(1, w);
        let (y, x) = (rng.below(h - ch + 1), rng.below(w - cw + 1));
        let mut v = image.crop(ObjectRect::new(x, y, cw, ch));
        if rng.uniform() < 0.5 {
            v = v.flip_horizontal();
        }
        let sd = rng.uniform_range(0.0, self.max_noise);
        for p in v.data_mut() {
            *p += sd * rng.normal();
        }
        v
    }
}

impl ToyClassifier {
    pub fn dim(&self) -> usize {
        self.feature_mean.len()
    }

    fn check_input(&self, image: &ImageGrid) -> Result<()> {
        if image.channels() != self.channels {
            return Err(Error::ShapeMismatch {
                expected: format!("{} channels", self.channels),
                actual: format!("{} channels", image.channels()),
            });
        }
        Ok(())
    }

    fn standardize(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    fn head(&self, f: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let shared = -0.5 * dot(f, f);
        self.bias
            .iter()
            .enumerate()
            .map(|(k, b)| b + dot(&self.weights[k * d..(k + 1) * d], f) + shared)
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let header = CheckpointHeader {
            format: CHECKPOINT_FORMAT.into(),
            version: 1,
            classes: self.classes.clone(),
            channels: self.channels,
            feature_map: self.feature_map,
            dim: self.dim(),
        };
        let mut bytes = serde_json::to_vec(&header).map_err(|e| Error::Internal(e.to_string()))?;
        bytes.push(b'\n');
        for v in self
            .feature_mean
            .iter()
            .chain(&self.feature_std)
            .chain(&self.weights)
            .chain(&self.bias)
        {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        write_atomic(path.as_ref(), &bytes)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format(path, "missing header line"))?;
        let header: CheckpointHeader =
            serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::format(path, e.to_string()))?;
        if header.format != CHECKPOINT_FORMAT || header.version != 1 {
            return Err(Error::format(path, "not a toy-classifier checkpoint"));
        }
        let (k, d) = (header.classes.len(), header.dim);
        if d != header.feature_map.dim(header.channels) || k < 2 {
            return Err(Error::format(path, "inconsistent header"));
        }
        let payload = &bytes[nl + 1..];
        let want = (2 * d + k * d + k) * 8;
        if payload.len() != want {
            return Err(Error::format(
                path,
                format!("payload has {} bytes, expected {want}", payload.len()),
            ));
        }
        let vals: Vec<f64> = payload
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(path, "non-finite parameter"));
        }
        Ok(Self {
            feature_map: header.feature_map,
            channels: header.channels,
            classes: header.classes,
            feature_mean: vals[..d].to_vec(),
            feature_std: vals[d..2 * d].to_vec(),
            weights: vals[2 * d..2 * d + k * d].to_vec(),
            bias: vals[2 * d + k * d..].to_vec(),
        })
    }
}

const CHECKPOINT_FORMAT: &str = "attr-forge-toy-classifier";

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    version: u32,
    classes: Vec<String>,
    channels: usize,
    feature_map: FeatureMap,
    dim: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Classifier for ToyClassifier {
    fn num_classes(&self) -> usize {
        self.classes.len()
    }

    fn logits(&self, image: &ImageGrid) -> Result<Vec<f64>> {
        let f = self.penultimate(image)?;
        Ok(self.head(&f))
    }

    fn logits_vjp(&self, image: &ImageGrid, upstream: &[f64]) -> Result<ImageGrid> {
        self.check_input(image)?;
        let (k, d) = (self.num_classes(), self.dim());
        if upstream.len() != k {
            return Err(Error::DimensionMismatch(upstream.len(), k));
        }
        let f = self.penultimate(image)?;
        let total: f64 = upstream.iter().sum();
        let mut df: Vec<f64> = f.iter().map(|v| -total * v).collect();
        for (j, u) in upstream.iter().enumerate() {
            for (acc, wv) in df.iter_mut().zip(&self.weights[j * d..(j + 1) * d]) {
                *acc += u * wv;
            }
        }
        df.iter_mut()
            .zip(&self.feature_std)
            .for_each(|(g, s)| *g /= s);
        Ok(self.feature_map.vjp(image, &df))
    }
}

impl LinearHead for ToyClassifier {
    fn penultimate(&self, image: &ImageGrid) -> Result<Vec<f64>> {
        self.check_input(image)?;
        Ok(self.standardize(&self.feature_map.features(image)))
    }
}

/// Full-batch accelerated gradient descent on the mean cross-entropy (plus
/// `l2/2·‖W‖²`), with the step capped at `1/L` for the loss's smoothness
/// constant `L`. Returns the model and the per-epoch loss.
pub fn train_toy_classifier(
    dataset: &[(ImageGrid, usize)],
    classes: Vec<String>,
    feature_map: FeatureMap,
    config: &TrainConfig,
) -> Result<(ToyClassifier, Vec<f64>)> {
    let k = classes.len();
    if k < 2 {
        return Err(Error::DegenerateDataset("need at least 2 classes".into()));
    }
    let mut counts = vec![0usize; k];
    for (_, y) in dataset {
        if *y >= k {
            return Err(Error::InvalidLabel { label: *y, classes: k });
        }
        counts[*y] += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n < 2) {
        return Err(Error::DegenerateDataset(format!(
            "class {} has {} examples, need at least 2",
            classes[c], counts[c]
        )));
    }
    let channels = dataset[0].0.channels();
    if dataset.iter().any(|(x, _)| x.channels() != channels) {
        return Err(Error::DegenerateDataset("mixed channel counts".into()));
    }
    if !(config.lr > 0.0) || !(config.l2 >= 0.0) {
        return Err(Error::InvalidArgument("lr must be > 0 and l2 >= 0".into()));
    }

    let aug = config.augment;
    let (raw, labels): (Vec<Vec<f64>>, Vec<usize>) = dataset
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, (x, y))| {
            let mut rng = RngStream::new(config.seed ^ 0x6175_676d, i as u64);
            let mut out = vec![(feature_map.features(x), *y)];
            for _ in 0..aug.views {
                out.push((feature_map.features(&aug.view(x, &mut rng)), *y));
            }
            out
        })
        .unzip();
    let n = raw.len() as f64;
    let d = raw[0].len();
    let mut mean = vec![0.0; d];
    for f in &raw {
        mean.iter_mut().zip(f).for_each(|(m, v)| *m += v / n);
    }
    let mut std = vec![0.0; d];
    for f in &raw {
        std.iter_mut()
            .zip(f.iter().zip(&mean))
            .for_each(|(s, (v, m))| *s += (v - m).powi(2) / n);
    }
    std.iter_mut().for_each(|s| *s = s.sqrt().max(1e-6));
    let feats: Vec<Vec<f64>> = raw
        .iter()
        .map(|f| f.iter().zip(&mean).zip(&std).map(|((v, m), s)| (v - m) / s).collect())
        .collect();

    // Softmax CE has Hessian ≼ ½·(X̃ᵀX̃/n) ⊗ I with X̃ the bias-augmented features.
    let smooth = 0.5 * top_eigenvalue(&feats) + config.l2;
    let lr = config.lr.min(1.0 / smooth);

    let mut rng = RngStream::named(config.seed, "toy-classifier-init");
    let mut model = ToyClassifier {
        feature_map,
        channels,
        classes,
        feature_mean: mean,
        feature_std: std,
        weights: (0..k * d).map(|_| 0.01 * rng.normal()).collect(),
        bias: vec![0.0; k],
    };
    // Nesterov-accelerated gradient descent; the loss is recorded at the
    // iterate, the gradient taken at the look-ahead point.
    let mut prev = (model.weights.clone(), model.bias.clone());
    let mut losses = Vec::with_capacity(config.epochs + 1);
    for epoch in 0..=config.epochs {
        losses.push(ce_loss(&model, &feats, &labels, config.l2));
        if epoch == config.epochs {
            break;
        }
        let mu = epoch as f64 / (epoch as f64 + 3.0);
        let mut look = model.clone();
        for (l, p) in look.weights.iter_mut().zip(&prev.0) {
            *l += mu * (*l - p);
        }
        for (l, p) in look.bias.iter_mut().zip(&prev.1) {
            *l += mu * (*l - p);
        }
        let (gw, gb) = ce_gradient(&look, &feats, &labels);
        prev = (model.weights.clone(), model.bias.clone());
        for ((w, l), g) in model.weights.iter_mut().zip(&look.weights).zip(&gw) {
            *w = l - lr * (g + config.l2 * l);
        }
        for ((b, l), g) in model.bias.iter_mut().zip(&look.bias).zip(&gb) {
            *b = l - lr * g;
        }
    }
    Ok((model, losses))
}

fn ce_loss(model: &ToyClassifier, feats: &[Vec<f64>], labels: &[usize], l2: f64) -> f64 {
    let n = feats.len() as f64;
    // Collected before summing so the result does not depend on scheduling.
    let terms: Vec<f64> = feats
        .par_iter()
        .zip(labels)
        .map(|(f, y)| {
            let z = model.head(f);
            log_sum_exp(&z) - z[*y]
        })
        .collect();
    let data: f64 = terms.iter().sum();
    data / n + model.weights.iter().map(|w| w * w).sum::<f64>() * l2 / 2.0
}

/// Gradient of the mean cross-entropy in weights and bias.
fn ce_gradient(model: &ToyClassifier, feats: &[Vec<f64>], labels: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let (k, d) = (model.bias.len(), feats[0].len());
    let n = feats.len() as f64;
    let parts: Vec<(Vec<f64>, Vec<f64>)> = feats
        .par_chunks(256)
        .zip(labels.par_chunks(256))
        .map(|(fs, ys)| {
            let mut gw = vec![0.0; k * d];
            let mut gb = vec![0.0; k];
            for (f, y) in fs.iter().zip(ys) {
                let mut p = softmax(&model.head(f));
                p[*y] -= 1.0;
                for (j, pj) in p.iter().enumerate() {
                    gb[j] += pj / n;
                    for (g, v) in gw[j * d..(j + 1) * d].iter_mut().zip(f) {
                        *g += pj * v / n;
                    }
                }
            }
            (gw, gb)
        })
        .collect();
    let mut gw = vec![0.0; k * d];
    let mut gb = vec![0.0; k];
    for (pw, pb) in parts {
        gw.iter_mut().zip(&pw).for_each(|(a, b)| *a += b);
        gb.iter_mut().zip(&pb).for_each(|(a, b)| *a += b);
    }
    (gw, gb)
}

/// Largest eigenvalue of `X̃ᵀX̃/n` for bias-augmented rows, by power iteration.
fn top_eigenvalue(rows: &[Vec<f64>]) -> f64 {
    let d = rows[0].len() + 1;
    let n = rows.len() as f64;
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut lambda = 1.0;
    for _ in 0..100 {
        let mut next = vec![0.0; d];
        for r in rows {
            let s = dot(&r[..], &v[..d - 1]) + v[d - 1];
            for (acc, x) in next.iter_mut().zip(r.iter().chain(std::iter::once(&1.0))) {
                *acc += s * x / n;
            }
        }
        let norm = dot(&next, &next).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        v = next.into_iter().map(|x| x / norm).collect();
    }
    // Power iteration approaches from below; pad so the cap stays safe.
    lambda * 1.05
}
