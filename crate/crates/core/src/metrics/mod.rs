//! Texture, OOD and distribution-distance metrics.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::LinearHead;
use crate::grid::spectrum::band_index;
use crate::grid::{fft2, ImageGrid};
use crate::math::{log_sum_exp, softmax};

pub use crate::guidance::{complexity_value, complexity_value_band};

/// Normalized gray-level co-occurrence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GlcmMatrix {
    pub levels: usize,
    /// `(dy, dx)`
    pub offset: (isize, isize),
    /// `levels × levels`, row-major, summing to 1.
    pub p: Vec<f64>,
}

impl GlcmMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.levels + j]
    }

    /// `Σ P(i,j)·(i−j)²`
    pub fn contrast(&self) -> f64 {
        self.weighted(|d| d * d)
    }

    /// `Σ P(i,j)·|i−j|`
    pub fn dissimilarity(&self) -> f64 {
        self.weighted(f64::abs)
    }

    fn weighted(&self, f: impl Fn(f64) -> f64) -> f64 {
        let l = self.levels;
        (0..l * l)
            .map(|k| self.p[k] * f((k / l) as f64 - (k % l) as f64))
            .sum()
    }
}

pub fn glcm_contrast(m: &GlcmMatrix) -> f64 {
    m.contrast()
}

pub fn glcm_dissimilarity(m: &GlcmMatrix) -> f64 {
    m.dissimilarity()
}

/// Bin of `v` among `levels` uniform bins over `[-1, 1]`.
pub fn quantize(v: f64, levels: usize) -> usize {
    let b = ((v + 1.0) / 2.0 * levels as f64).floor();
    (b.max(0.0) as usize).min(levels - 1)
}

/// Co-occurrences of the gray image at `offset`. Pairs falling outside the
/// image are skipped; `symmetric` also counts each pair reversed.
pub fn glcm(image: &ImageGrid, levels: usize, offset: (isize, isize), symmetric: bool) -> Result<GlcmMatrix> {
    if levels < 2 || offset == (0, 0) {
        return Err(Error::BadOffset);
    }
    let gray = image.to_gray();
    let (h, w) = (gray.height() as isize, gray.width() as isize);
    let q: Vec<usize> = gray.data().iter().map(|&v| quantize(v, levels)).collect();
    let mut counts = vec![0.0; levels * levels];
    let mut total = 0.0;
    let (dy, dx) = offset;
    for y in 0..h {
        for x in 0..w {
            let (y2, x2) = (y + dy, x + dx);
            if y2 < 0 || y2 >= h || x2 < 0 || x2 >= w {
                continue;
            }
            let i = q[(y * w + x) as usize];
            let j = q[(y2 * w + x2) as usize];
            counts[i * levels + j] += 1.0;
            total += 1.0;
            if symmetric {
                counts[j * levels + i] += 1.0;
                total += 1.0;
            }
        }
    }
    if total == 0.0 {
        return Err(Error::BadOffset);
    }
    Ok(GlcmMatrix {
        levels,
        offset,
        p: counts.into_iter().map(|c| c / total).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlcmParams {
    pub levels: usize,
    pub offsets: Vec<(isize, isize)>,
    pub symmetric: bool,
}

impl Default for GlcmParams {
    fn default() -> Self {
        Self {
            levels: 8,
            offsets: vec![(0, 1), (1, 0)],
            symmetric: true,
        }
    }
}

/// `(contrast, dissimilarity)` averaged over the offsets.
pub fn glcm_features(image: &ImageGrid, params: &GlcmParams) -> Result<(f64, f64)> {
    if params.offsets.is_empty() {
        return Err(Error::BadOffset);
    }
    let (mut c, mut d) = (0.0, 0.0);
    for &off in &params.offsets {
        let m = glcm(image, params.levels, off, params.symmetric)?;
        c += m.contrast();
        d += m.dissimilarity();
    }
    let n = params.offsets.len() as f64;
    Ok((c / n, d / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OodMethod {
    Energy,
    GradNorm,
}

/// Higher means more in-distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OodScore {
    pub method: OodMethod,
    pub value: f64,
}

/// Negative free energy `T·logsumexp(z/T)`.
pub fn energy_score(logits: &[f64], temperature: f64) -> Result<OodScore> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature {temperature} must be > 0")));
    }
    if logits.is_empty() || logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::InvalidArgument("logits must be finite and nonempty".into()));
    }
    let scaled: Vec<f64> = logits.iter().map(|z| z / temperature).collect();
    Ok(OodScore {
        method: OodMethod::Energy,
        value: temperature * log_sum_exp(&scaled),
    })
}

/// L1 norm of `∂CE(u, softmax(W·f + b))/∂W` for uniform `u`, which factors as
/// `Σ_j |p_j − 1/K| · Σ_d |f_d|`.
pub fn gradnorm_from_parts(logits: &[f64], features: &[f64]) -> f64 {
    let k = logits.len() as f64;
    let p = softmax(logits);
    let dz: f64 = p.iter().map(|pj| (pj - 1.0 / k).abs()).sum();
    dz * features.iter().map(|f| f.abs()).sum::<f64>()
}

pub fn gradnorm_score(classifier: &dyn LinearHead, image: &ImageGrid) -> Result<OodScore> {
    let f = classifier.penultimate(image)?;
    let z = classifier.logits(image)?;
    Ok(OodScore {
        method: OodMethod::GradNorm,
        value: gradnorm_from_parts(&z, &f),
    })
}

/// Gaussian summary of a feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    /// `d × d`, row-major.
    pub covariance: Vec<f64>,
}

const PSD_TOLERANCE: f64 = 1e-6;

impl FeatureStats {
    pub fn new(mean: Vec<f64>, covariance: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.len() != d * d {
            return Err(Error::DimensionMismatch(covariance.len(), d * d));
        }
        for i in 0..d {
            for j in 0..i {
                let (a, b) = (covariance[i * d + j], covariance[j * d + i]);
                if (a - b).abs() > 1e-9 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::InvalidArgument("covariance is not symmetric".into()));
                }
            }
        }
        let stats = Self { mean, covariance };
        psd_sqrt(&stats.matrix())?;
        Ok(stats)
    }

    /// Sample mean and unbiased covariance (zero covariance for one sample).
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyPool)?;
        let d = first.len();
        if let Some(s) = samples.iter().find(|s| s.len() != d) {
            return Err(Error::DimensionMismatch(s.len(), d));
        }
        let n = samples.len() as f64;
        let mut mean = vec![0.0; d];
        for s in samples {
            mean.iter_mut().zip(s).for_each(|(m, v)| *m += v / n);
        }
        let mut cov = vec![0.0; d * d];
        if samples.len() > 1 {
            for s in samples {
                for i in 0..d {
                    for j in 0..d {
                        cov[i * d + j] += (s[i] - mean[i]) * (s[j] - mean[j]) / (n - 1.0);
                    }
                }
            }
        }
        Self::new(mean, cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.covariance)
    }
}

/// Eigen-decomposition square root with small negative eigenvalues clipped.
fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut roots = eig.eigenvalues.clone();
    for v in roots.iter_mut() {
        if *v < -PSD_TOLERANCE {
            return Err(Error::NotPsd(*v));
        }
        *v = v.max(0.0).sqrt();
    }
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&roots) * q.transpose())
}

/// `‖μ_a − μ_b‖² + Tr(Σ_a + Σ_b − 2(Σ_a Σ_b)^{1/2})`, using the symmetric form
/// `(√Σ_a Σ_b √Σ_a)^{1/2}` for the cross term.
pub fn frechet_distance(a: &FeatureStats, b: &FeatureStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let mean_term: f64 = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y).powi(2)).sum();
    let (sa, sb) = (a.matrix(), b.matrix());
    let ra = psd_sqrt(&sa)?;
    let cross = psd_sqrt(&(&ra * &sb * &ra))?;
    let d = mean_term + sa.trace() + sb.trace() - 2.0 * cross.trace();
    Ok(d.max(0.0))
}

/// Histogram intersection of the two samples over `bins` shared bins spanning
/// their joint range.
pub fn score_overlap(reference: &[f64], test: &[f64], bins: usize) -> Result<f64> {
    if reference.is_empty() || test.is_empty() || bins == 0 {
        return Err(Error::InvalidArgument("overlap needs nonempty samples and bins >= 1".into()));
    }
    let all = reference.iter().chain(test);
    let lo = all.clone().cloned().fold(f64::INFINITY, f64::min);
    let hi = all.cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidArgument("scores must be finite".into()));
    }
    if hi == lo {
        return Ok(1.0);
    }
    let hist = |v: &[f64]| {
        let mut h = vec![0.0; bins];
        for x in v {
            let b = (((x - lo) / (hi - lo)) * bins as f64).floor() as usize;
            h[b.min(bins - 1)] += 1.0 / v.len() as f64;
        }
        h
    };
    let (hr, ht) = (hist(reference), hist(test));
    Ok(hr.iter().zip(&ht).map(|(a, b)| a.min(*b)).sum::<f64>().min(1.0))
}

/// Model-free features for the Fréchet distance: per-channel pixel mean, then
/// per-channel log energies in `bands` radial shells.
pub fn spectral_features(image: &ImageGrid, bands: usize) -> Vec<f64> {
    let (h, w, c) = image.shape();
    let s = fft2(image);
    let norm = ((h * w) as f64).powi(2);
    let mut out: Vec<f64> = (0..c)
        .map(|ch| image.channel(ch).iter().sum::<f64>() / (h * w) as f64)
        .collect();
    for ch in 0..c {
        let mut e = vec![0.0; bands];
        for ky in 0..h {
            for kx in 0..w {
                if let Some(b) = band_index(h, w, ky, kx, bands) {
                    e[b] += s.get(ch, ky, kx).norm_sqr() / norm;
                }
            }
        }
        out.extend(e.into_iter().map(|v| (v + 1e-6).ln()));
    }
    out
}
