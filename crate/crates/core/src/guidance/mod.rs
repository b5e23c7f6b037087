//! Guided reverse steps and background editing.
//!
//! The mean shift is `λ · unit · Σ_θ · ∇L(x̂₀)`, taken in `x_t` space with no
//! Jacobian factor. `unit` makes λ portable across image sizes; it defaults to
//! the objective's own normalization.

mod objective;

pub use objective::{
    adversarial_gradient, adversarial_value, complexity_gradient, complexity_gradient_band,
    complexity_value, complexity_value_band, AdversarialCe, FrequencyBand, GuidanceObjective,
    SpectralComplexity, AMPLITUDE_DELTA,
};

use serde::{Deserialize, Serialize};

use crate::diffusion::{
    blended_chain, estimate_x0, posterior_mean, reverse_step, sample_gaussian, BlendStep, Denoiser,
    NoiseSchedule,
};
use crate::error::{Error, Result};
use crate::grid::{ImageGrid, MaskGrid, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidanceConfig {
    pub lambda: f64,
    pub t0: usize,
    #[serde(default)]
    pub band: FrequencyBand,
    /// Overrides [`GuidanceObjective::default_unit`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<f64>,
}

impl GuidanceConfig {
    pub fn new(lambda: f64, t0: usize) -> Self {
        Self {
            lambda,
            t0,
            band: FrequencyBand::All,
            unit: None,
        }
    }

    pub fn validate(&self, sched: &NoiseSchedule) -> Result<()> {
        if !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda {} is not finite", self.lambda)));
        }
        if let Some(u) = self.unit {
            if !(u > 0.0 && u.is_finite()) {
                return Err(Error::InvalidArgument(format!("guidance unit {u} must be > 0")));
            }
        }
        self.band.validate()?;
        sched.check_step(self.t0, 1)
    }

    fn unit_for(&self, objective: &dyn GuidanceObjective, x: &ImageGrid) -> f64 {
        self.unit.unwrap_or_else(|| objective.default_unit(x.shape()))
    }
}

/// Guided mean and the step variance. Gradients are taken at `x̂₀`.
pub fn guided_mean(
    x_t: &ImageGrid,
    denoiser: &dyn Denoiser,
    objective: &dyn GuidanceObjective,
    config: &GuidanceConfig,
    t: usize,
    sched: &NoiseSchedule,
) -> Result<(ImageGrid, f64)> {
    sched.check_step(t, 1)?;
    let out = denoiser.denoise(x_t, t, sched)?;
    let mut mu = posterior_mean(x_t, &out.eps_pred, t, sched)?;
    let shift = config.lambda * config.unit_for(objective, x_t) * out.variance;
    if shift != 0.0 {
        let x0 = estimate_x0(x_t, &out.eps_pred, t, sched)?;
        let grad = objective.gradient(&x0)?;
        mu.add_scaled(&grad, shift);
    }
    Ok((mu, out.variance))
}

/// `x_{t−1} ~ N(μ_θ + λΣ_θ∇, Σ_θ)`. `λ = 0` is exactly [`reverse_step`].
pub fn guided_reverse_step(
    x_t: &ImageGrid,
    denoiser: &dyn Denoiser,
    objective: &dyn GuidanceObjective,
    config: &GuidanceConfig,
    t: usize,
    sched: &NoiseSchedule,
    rng: &mut RngStream,
) -> Result<ImageGrid> {
    if config.lambda == 0.0 {
        return reverse_step(x_t, denoiser, t, sched, rng);
    }
    let (mu, var) = guided_mean(x_t, denoiser, objective, config, t, sched)?;
    Ok(sample_gaussian(mu, var, rng))
}

/// Re-noises `image` to `t0`, runs guided steps on the background and pastes
/// the re-noised object back through `mask` after every step.
pub fn background_edit(
    image: &ImageGrid,
    mask: &MaskGrid,
    denoiser: &dyn Denoiser,
    objective: &dyn GuidanceObjective,
    config: &GuidanceConfig,
    sched: &NoiseSchedule,
    rng: &mut RngStream,
) -> Result<ImageGrid> {
    background_edit_traced(image, mask, denoiser, objective, config, sched, rng, &mut |_| {})
}

#[allow(clippy::too_many_arguments)]
pub fn background_edit_traced(
    image: &ImageGrid,
    mask: &MaskGrid,
    denoiser: &dyn Denoiser,
    objective: &dyn GuidanceObjective,
    config: &GuidanceConfig,
    sched: &NoiseSchedule,
    rng: &mut RngStream,
    observer: &mut dyn FnMut(&BlendStep<'_>),
) -> Result<ImageGrid> {
    config.validate(sched)?;
    image.ensure_mask_fits(mask)?;
    if mask.count_on() == 0 {
        return Err(Error::EmptyMask);
    }
    blended_chain(
        image,
        image,
        mask,
        config.t0,
        sched,
        rng,
        |x, t, rng| guided_reverse_step(x, denoiser, objective, config, t, sched, rng),
        observer,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{EmpiricalDenoiser, GaussianDenoiser};
    use crate::grid::ObjectRect;

    fn sched() -> NoiseSchedule {
        NoiseSchedule::scaled_linear(100).unwrap()
    }

    #[test]
    fn zero_lambda_is_plain_step() {
        let s = sched();
        let den = GaussianDenoiser::new(ImageGrid::zeros(6, 6, 1), 0.3).unwrap();
        let x = RngStream::new(1, 1).normal_image(6, 6, 1);
        let cfg = GuidanceConfig::new(0.0, 50);
        let obj = SpectralComplexity::default();
        for t in [1, 2, 40, 100] {
            let a = guided_reverse_step(&x, &den, &obj, &cfg, t, &s, &mut RngStream::new(3, 0)).unwrap();
            let b = reverse_step(&x, &den, t, &s, &mut RngStream::new(3, 0)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn mean_shift_is_odd_in_lambda() {
        let s = sched();
        let den = GaussianDenoiser::new(ImageGrid::zeros(8, 8, 1), 0.3).unwrap();
        let x = RngStream::new(2, 0).normal_image(8, 8, 1);
        let obj = SpectralComplexity::default();
        let t = 30;
        let (plus, _) = guided_mean(&x, &den, &obj, &GuidanceConfig::new(20.0, 50), t, &s).unwrap();
        let (minus, _) = guided_mean(&x, &den, &obj, &GuidanceConfig::new(-20.0, 50), t, &s).unwrap();
        let out = den.denoise(&x, t, &s).unwrap();
        let mu = posterior_mean(&x, &out.eps_pred, t, &s).unwrap();
        let sum = plus.zip_map(&minus, |a, b| a + b);
        assert!(sum.max_abs_diff(&mu.scale(2.0)) < 1e-12);
        assert!(plus.max_abs_diff(&mu) > 0.0);
    }

    #[test]
    fn object_region_is_anchored_every_step() {
        let s = sched();
        let mut rng = RngStream::new(9, 0);
        let img = rng.uniform_image(8, 8, 1, -1.0, 1.0);
        let mask = MaskGrid::from_rect(8, 8, ObjectRect::new(2, 2, 4, 3));
        let den = EmpiricalDenoiser::new(vec![img.clone(), rng.uniform_image(8, 8, 1, -1.0, 1.0)])
            .unwrap()
            .with_bandwidth(0.01);
        let cfg = GuidanceConfig::new(20.0, 25);
        let mut steps = Vec::new();
        let out = background_edit_traced(
            &img,
            &mask,
            &den,
            &SpectralComplexity::default(),
            &cfg,
            &s,
            &mut RngStream::new(4, 4),
            &mut |st| {
                for y in 0..8 {
                    for x in 0..8 {
                        if mask.is_on(y, x) {
                            assert_eq!(st.latent.get(0, y, x), st.noised_anchor.get(0, y, x));
                        } else {
                            assert_eq!(st.latent.get(0, y, x), st.free.get(0, y, x));
                        }
                    }
                }
                steps.push(st.t);
            },
        )
        .unwrap();
        assert_eq!(steps, (0..25).rev().collect::<Vec<_>>());
        for y in 0..8 {
            for x in 0..8 {
                if mask.is_on(y, x) {
                    assert_eq!(out.get(0, y, x), img.get(0, y, x));
                }
            }
        }
    }

    #[test]
    fn anchor_noise_level_matches_step() {
        // The anchor at level t−1 is a forward sample; check its spread.
        let s = sched();
        let img = ImageGrid::zeros(16, 16, 1);
        let mask = MaskGrid::filled(16, 16, 1.0);
        let den = GaussianDenoiser::new(img.clone(), 0.1).unwrap();
        let cfg = GuidanceConfig::new(0.0, 60);
        background_edit_traced(
            &img,
            &mask,
            &den,
            &SpectralComplexity::default(),
            &cfg,
            &s,
            &mut RngStream::new(0, 0),
            &mut |st| {
                if st.t == 59 {
                    let var = st.noised_anchor.sum_sq() / 256.0;
                    let want = 1.0 - s.alpha_bar(59);
                    assert!((var - want).abs() / want < 0.25, "{var} vs {want}");
                }
            },
        )
        .unwrap();
    }

    #[test]
    fn rejects_empty_mask_and_bad_t0() {
        let s = sched();
        let img = ImageGrid::zeros(4, 4, 1);
        let den = GaussianDenoiser::new(img.clone(), 0.1).unwrap();
        let obj = SpectralComplexity::default();
        let mut rng = RngStream::new(0, 0);
        let empty = MaskGrid::filled(4, 4, 0.0);
        assert!(matches!(
            background_edit(&img, &empty, &den, &obj, &GuidanceConfig::new(1.0, 10), &s, &mut rng),
            Err(Error::EmptyMask)
        ));
        let full = MaskGrid::filled(4, 4, 1.0);
        assert!(matches!(
            background_edit(&img, &full, &den, &obj, &GuidanceConfig::new(1.0, 101), &s, &mut rng),
            Err(Error::StepOutOfRange { .. })
        ));
    }
}
