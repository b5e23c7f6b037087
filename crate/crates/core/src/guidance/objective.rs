//! Differentiable guidance objectives.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Classifier;
use crate::grid::spectrum::{ifft2_real_of, radius};
use crate::grid::{fft2, ImageGrid};
use crate::math::{log_sum_exp, softmax};

/// Smoothing of `|X|` at the origin in the complexity gradient.
pub const AMPLITUDE_DELTA: f64 = 1e-8;

pub trait GuidanceObjective: Send + Sync {
    fn value(&self, x: &ImageGrid) -> Result<f64>;
    fn gradient(&self, x: &ImageGrid) -> Result<ImageGrid>;
    /// Factor applied to λ so that one λ scale means the same thing across
    /// image sizes.
    fn default_unit(&self, _shape: (usize, usize, usize)) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "band", rename_all = "kebab-case")]
pub enum FrequencyBand {
    #[default]
    All,
    /// Only bins whose normalized radius exceeds `cutoff`.
    HighPass { cutoff: f64 },
}

impl FrequencyBand {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FrequencyBand::All => Ok(()),
            FrequencyBand::HighPass { cutoff } if cutoff > 0.0 && cutoff <= 1.0 => Ok(()),
            FrequencyBand::HighPass { cutoff } => Err(Error::InvalidArgument(format!(
                "high-pass cutoff {cutoff} outside (0, 1]"
            ))),
        }
    }

    fn keeps(&self, h: usize, w: usize, ky: usize, kx: usize) -> bool {
        match *self {
            FrequencyBand::All => true,
            FrequencyBand::HighPass { cutoff } => radius(h, w, ky, kx) > cutoff,
        }
    }
}

/// `L_c = Σ |A(F(x))|` over every channel, restricted to `band`.
pub fn complexity_value_band(image: &ImageGrid, band: FrequencyBand) -> f64 {
    let s = fft2(image);
    let (h, w) = (s.height(), s.width());
    let mut total = 0.0;
    for c in 0..s.channels() {
        for ky in 0..h {
            for kx in 0..w {
                if band.keeps(h, w, ky, kx) {
                    total += s.get(c, ky, kx).norm();
                }
            }
        }
    }
    total
}

pub fn complexity_value(image: &ImageGrid) -> f64 {
    complexity_value_band(image, FrequencyBand::All)
}

/// `∂L_c/∂x = H·W · Re(F⁻¹(X / √(|X|² + δ)))`, restricted to `band`.
pub fn complexity_gradient_band(image: &ImageGrid, band: FrequencyBand) -> ImageGrid {
    let s = fft2(image);
    let (h, w, ch) = (s.height(), s.width(), s.channels());
    let n = (h * w) as f64;
    let mut phase = Vec::with_capacity(h * w * ch);
    for c in 0..ch {
        for ky in 0..h {
            for kx in 0..w {
                let z = s.get(c, ky, kx);
                if band.keeps(h, w, ky, kx) {
                    phase.push(z / (z.norm_sqr() + AMPLITUDE_DELTA).sqrt() * n);
                } else {
                    phase.push(Complex64::new(0.0, 0.0));
                }
            }
        }
    }
    ifft2_real_of(h, w, ch, phase)
}

pub fn complexity_gradient(image: &ImageGrid) -> ImageGrid {
    complexity_gradient_band(image, FrequencyBand::All)
}

/// Spectral amplitude complexity. λ > 0 ascends it.
#[derive(Debug, Clone, Copy, Default)]
pub struct SpectralComplexity {
    pub band: FrequencyBand,
}

impl SpectralComplexity {
    pub fn new(band: FrequencyBand) -> Self {
        Self { band }
    }
}

impl GuidanceObjective for SpectralComplexity {
    fn value(&self, x: &ImageGrid) -> Result<f64> {
        Ok(complexity_value_band(x, self.band))
    }

    fn gradient(&self, x: &ImageGrid) -> Result<ImageGrid> {
        Ok(complexity_gradient_band(x, self.band))
    }

    /// Per-pixel amplitude: `1 / (H·W·C)`.
    fn default_unit(&self, (h, w, c): (usize, usize, usize)) -> f64 {
        1.0 / (h * w * c) as f64
    }
}

fn check_label(classifier: &dyn Classifier, label: usize) -> Result<()> {
    let k = classifier.num_classes();
    if label >= k {
        return Err(Error::InvalidLabel { label, classes: k });
    }
    Ok(())
}

/// `CE(softmax(f(x)), y)`.
pub fn adversarial_value(image: &ImageGrid, classifier: &dyn Classifier, label: usize) -> Result<f64> {
    check_label(classifier, label)?;
    let z = classifier.logits(image)?;
    Ok(log_sum_exp(&z) - z[label])
}

/// `∂CE/∂x = Jᵀ (softmax(f(x)) − onehot(y))`.
pub fn adversarial_gradient(
    image: &ImageGrid,
    classifier: &dyn Classifier,
    label: usize,
) -> Result<ImageGrid> {
    check_label(classifier, label)?;
    let z = classifier.logits(image)?;
    let mut g = softmax(&z);
    g[label] -= 1.0;
    classifier.logits_vjp(image, &g)
}

/// Cross-entropy against the true label; ascending it pushes the image away
/// from correct classification.
pub struct AdversarialCe<'a> {
    pub classifier: &'a dyn Classifier,
    pub label: usize,
}

impl<'a> AdversarialCe<'a> {
    pub fn new(classifier: &'a dyn Classifier, label: usize) -> Result<Self> {
        check_label(classifier, label)?;
        Ok(Self { classifier, label })
    }
}

impl GuidanceObjective for AdversarialCe<'_> {
    fn value(&self, x: &ImageGrid) -> Result<f64> {
        adversarial_value(x, self.classifier, self.label)
    }

    fn gradient(&self, x: &ImageGrid) -> Result<ImageGrid> {
        adversarial_gradient(x, self.classifier, self.label)
    }
}
