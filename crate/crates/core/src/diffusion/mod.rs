//! Forward noising, posterior means and ancestral reverse sampling.

mod denoiser;
mod schedule;

pub use denoiser::{
    eps_empirical, eps_gaussian, eps_kernel, Denoiser, DenoiserOutput, EmpiricalDenoiser,
    GaussianDenoiser,
};
pub use schedule::{NoiseSchedule, VariancePolicy};

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, MaskGrid, RngStream};

/// `x_t = √ᾱ_t·x₀ + √(1−ᾱ_t)·ε`, for `t ∈ 0..=T`. No clamping.
pub fn forward_sample(
    x0: &ImageGrid,
    t: usize,
    eps: &ImageGrid,
    sched: &NoiseSchedule,
) -> Result<ImageGrid> {
    sched.check_step(t, 0)?;
    x0.ensure_same_shape(eps)?;
    let ab = sched.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x0.zip_map(eps, |x, e| a * x + b * e))
}

/// Forward-noises `x0` to step `t` with fresh noise from `rng`.
pub fn noise_to(
    x0: &ImageGrid,
    t: usize,
    sched: &NoiseSchedule,
    rng: &mut RngStream,
) -> Result<ImageGrid> {
    let eps = rng.normal_like(x0);
    forward_sample(x0, t, &eps, sched)
}

/// `x̂₀ = x_t/√ᾱ_t − √(1−ᾱ_t)·ε/√ᾱ_t`
pub fn estimate_x0(
    x_t: &ImageGrid,
    eps_pred: &ImageGrid,
    t: usize,
    sched: &NoiseSchedule,
) -> Result<ImageGrid> {
    sched.check_step(t, 1)?;
    x_t.ensure_same_shape(eps_pred)?;
    let ab = sched.alpha_bar(t);
    let inv = 1.0 / ab.sqrt();
    let k = (1.0 - ab).sqrt();
    Ok(x_t.zip_map(eps_pred, |x, e| (x - k * e) * inv))
}

/// `μ_θ = (x_t − β_t/√(1−ᾱ_t)·ε_θ) / √α_t`
pub fn posterior_mean(
    x_t: &ImageGrid,
    eps_pred: &ImageGrid,
    t: usize,
    sched: &NoiseSchedule,
) -> Result<ImageGrid> {
    sched.check_step(t, 1)?;
    x_t.ensure_same_shape(eps_pred)?;
    let beta = sched.beta(t);
    let coef = beta / (1.0 - sched.alpha_bar(t)).sqrt();
    let inv = 1.0 / sched.alpha(t).sqrt();
    Ok(x_t.zip_map(eps_pred, |x, e| (x - coef * e) * inv))
}

/// Draws `N(mean, variance·I)`; returns `mean` untouched (and consumes no
/// randomness) when the variance is zero.
pub fn sample_gaussian(mut mean: ImageGrid, variance: f64, rng: &mut RngStream) -> ImageGrid {
    if variance > 0.0 {
        let sd = variance.sqrt();
        for v in mean.data_mut() {
            *v += sd * rng.normal();
        }
    }
    mean
}

/// One ancestral step `x_{t−1} ~ N(μ_θ(x_t), Σ_θ)`.
pub fn reverse_step(
    x_t: &ImageGrid,
    denoiser: &dyn Denoiser,
    t: usize,
    sched: &NoiseSchedule,
    rng: &mut RngStream,
) -> Result<ImageGrid> {
    sched.check_step(t, 1)?;
    let out = denoiser.denoise(x_t, t, sched)?;
    let mu = posterior_mean(x_t, &out.eps_pred, t, sched)?;
    Ok(sample_gaussian(mu, out.variance, rng))
}

/// Full chain from `x_T ~ N(0, I)` down to `x₀`.
pub fn sample(
    denoiser: &dyn Denoiser,
    shape: (usize, usize, usize),
    sched: &NoiseSchedule,
    rng: &mut RngStream,
) -> Result<ImageGrid> {
    let (h, w, c) = shape;
    let mut x = rng.normal_image(h, w, c);
    for t in (1..=sched.steps()).rev() {
        x = reverse_step(&x, denoiser, t, sched, rng)?;
    }
    Ok(x)
}

/// One blended step as seen by a chain observer.
#[derive(Debug)]
pub struct BlendStep<'a> {
    /// Step index of the latent just produced (`t − 1`).
    pub t: usize,
    /// The anchor image forward-noised to level `t`.
    pub noised_anchor: &'a ImageGrid,
    /// Free (unanchored) sample for level `t` before blending.
    pub free: &'a ImageGrid,
    /// `M ⊙ noised_anchor + (1 − M) ⊙ free`.
    pub latent: &'a ImageGrid,
}

/// Runs `t0 → 0` starting from `start` noised to `t0`. At every step the free
/// sample comes from `step(x_t, t, rng)`, the anchor is re-noised to the new
/// level and pasted through `mask`.
#[allow(clippy::too_many_arguments)]
pub fn blended_chain(
    start: &ImageGrid,
    anchor: &ImageGrid,
    mask: &MaskGrid,
    t0: usize,
    sched: &NoiseSchedule,
    rng: &mut RngStream,
    mut step: impl FnMut(&ImageGrid, usize, &mut RngStream) -> Result<ImageGrid>,
    observer: &mut dyn FnMut(&BlendStep<'_>),
) -> Result<ImageGrid> {
    sched.check_step(t0, 1)?;
    start.ensure_same_shape(anchor)?;
    start.ensure_mask_fits(mask)?;
    let mut x = noise_to(start, t0, sched, rng)?;
    for t in (1..=t0).rev() {
        let free = step(&x, t, rng)?;
        if !free.is_finite() {
            return Err(Error::Internal(format!("non-finite latent at step {t}")));
        }
        let noised = noise_to(anchor, t - 1, sched, rng)?;
        x = ImageGrid::blend(mask, &noised, &free);
        observer(&BlendStep {
            t: t - 1,
            noised_anchor: &noised,
            free: &free,
            latent: &x,
        });
    }
    Ok(x)
}
