//! Closed-form noise predictors.
//!
//! Both are exact minimum-MSE predictors `ε* = (x_t − √ᾱ_t E[x₀|x_t]) / √(1−ᾱ_t)`
//! for a known data distribution, so samplers can be verified without a
//! trained network.

use super::{NoiseSchedule, VariancePolicy};
use crate::error::{Error, Result};
use crate::grid::ImageGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserOutput {
    pub eps_pred: ImageGrid,
    /// `Σ_θ` for this step; 0 at `t = 1`.
    pub variance: f64,
}

/// Noise predictor `ε_θ(x_t, t)`. Must be deterministic and shape-preserving.
pub trait Denoiser: Send + Sync {
    fn denoise(&self, x_t: &ImageGrid, t: usize, sched: &NoiseSchedule) -> Result<DenoiserOutput>;
}

fn eps_from_posterior_mean(x_t: &ImageGrid, ex0: &ImageGrid, ab: f64) -> ImageGrid {
    let sa = ab.sqrt();
    let inv = 1.0 / (1.0 - ab).sqrt();
    x_t.zip_map(ex0, |x, m| (x - sa * m) * inv)
}

/// Softmax weights of the atoms `d_i` under `x_t ~ N(√ᾱ d_i, s² I)`.
fn atom_weights(x_t: &ImageGrid, dataset: &[ImageGrid], ab: f64, spread: f64) -> Vec<f64> {
    let sa = ab.sqrt();
    let logw: Vec<f64> = dataset
        .iter()
        .map(|d| {
            let dist: f64 = x_t
                .data()
                .iter()
                .zip(d.data())
                .map(|(x, v)| {
                    let r = x - sa * v;
                    r * r
                })
                .sum();
            -dist / (2.0 * spread)
        })
        .collect();
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= z);
    w
}

fn weighted_atoms(dataset: &[ImageGrid], w: &[f64]) -> ImageGrid {
    let mut acc = dataset[0].zeros_like();
    for (d, &wi) in dataset.iter().zip(w) {
        if wi > 0.0 {
            acc.add_scaled(d, wi);
        }
    }
    acc
}

fn check_dataset(x_t: &ImageGrid, dataset: &[ImageGrid]) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    dataset.iter().try_for_each(|d| x_t.ensure_same_shape(d))
}

/// Exact denoiser for the empirical distribution over `dataset`.
pub fn eps_empirical(
    x_t: &ImageGrid,
    t: usize,
    dataset: &[ImageGrid],
    sched: &NoiseSchedule,
) -> Result<DenoiserOutput> {
    sched.check_step(t, 1)?;
    check_dataset(x_t, dataset)?;
    let ab = sched.alpha_bar(t);
    let w = atom_weights(x_t, dataset, ab, 1.0 - ab);
    let ex0 = weighted_atoms(dataset, &w);
    Ok(DenoiserOutput {
        eps_pred: eps_from_posterior_mean(x_t, &ex0, ab),
        variance: sched.variance(t, VariancePolicy::Beta),
    })
}

/// Exact denoiser for `N(mean, var·I)` data.
pub fn eps_gaussian(
    x_t: &ImageGrid,
    t: usize,
    mean: &ImageGrid,
    var: f64,
    sched: &NoiseSchedule,
) -> Result<DenoiserOutput> {
    sched.check_step(t, 1)?;
    x_t.ensure_same_shape(mean)?;
    if !(var > 0.0) {
        return Err(Error::InvalidArgument(format!("variance {var} must be > 0")));
    }
    let ab = sched.alpha_bar(t);
    let sa = ab.sqrt();
    let denom = ab * var + 1.0 - ab;
    let ex0 = x_t.zip_map(mean, |x, m| (var * sa * x + (1.0 - ab) * m) / denom);
    Ok(DenoiserOutput {
        eps_pred: eps_from_posterior_mean(x_t, &ex0, ab),
        variance: sched.variance(t, VariancePolicy::Beta),
    })
}

/// Exact denoiser for the empirical distribution convolved with `N(0, h·I)`
/// (an isotropic Gaussian mixture). `h = 0` is [`eps_empirical`]; a single
/// atom is [`eps_gaussian`].
pub fn eps_kernel(
    x_t: &ImageGrid,
    t: usize,
    dataset: &[ImageGrid],
    bandwidth: f64,
    sched: &NoiseSchedule,
) -> Result<DenoiserOutput> {
    if bandwidth == 0.0 {
        return eps_empirical(x_t, t, dataset, sched);
    }
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth {bandwidth} must be >= 0"
        )));
    }
    sched.check_step(t, 1)?;
    check_dataset(x_t, dataset)?;
    let ab = sched.alpha_bar(t);
    let denom = ab * bandwidth + 1.0 - ab;
    let w = atom_weights(x_t, dataset, ab, denom);
    let dbar = weighted_atoms(dataset, &w);
    let sa = ab.sqrt();
    let ex0 = x_t.zip_map(&dbar, |x, m| (bandwidth * sa * x + (1.0 - ab) * m) / denom);
    Ok(DenoiserOutput {
        eps_pred: eps_from_posterior_mean(x_t, &ex0, ab),
        variance: sched.variance(t, VariancePolicy::Beta),
    })
}

/// Empirical (optionally kernel-smoothed) dataset denoiser.
#[derive(Debug, Clone)]
pub struct EmpiricalDenoiser {
    pub dataset: Vec<ImageGrid>,
    pub bandwidth: f64,
    pub policy: VariancePolicy,
}

impl EmpiricalDenoiser {
    pub fn new(dataset: Vec<ImageGrid>) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            dataset,
            bandwidth: 0.0,
            policy: VariancePolicy::Beta,
        })
    }

    pub fn with_bandwidth(mut self, h: f64) -> Self {
        self.bandwidth = h;
        self
    }

    pub fn with_policy(mut self, policy: VariancePolicy) -> Self {
        self.policy = policy;
        self
    }
}

impl Denoiser for EmpiricalDenoiser {
    fn denoise(&self, x_t: &ImageGrid, t: usize, sched: &NoiseSchedule) -> Result<DenoiserOutput> {
        let mut out = eps_kernel(x_t, t, &self.dataset, self.bandwidth, sched)?;
        out.variance = sched.variance(t, self.policy);
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct GaussianDenoiser {
    pub mean: ImageGrid,
    pub var: f64,
    pub policy: VariancePolicy,
}

impl GaussianDenoiser {
    pub fn new(mean: ImageGrid, var: f64) -> Result<Self> {
        if !(var > 0.0) {
            return Err(Error::InvalidArgument(format!("variance {var} must be > 0")));
        }
        Ok(Self {
            mean,
            var,
            policy: VariancePolicy::Beta,
        })
    }

    pub fn with_policy(mut self, policy: VariancePolicy) -> Self {
        self.policy = policy;
        self
    }
}

impl Denoiser for GaussianDenoiser {
    fn denoise(&self, x_t: &ImageGrid, t: usize, sched: &NoiseSchedule) -> Result<DenoiserOutput> {
        let mut out = eps_gaussian(x_t, t, &self.mean, self.var, sched)?;
        out.variance = sched.variance(t, self.policy);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{estimate_x0, forward_sample};
    use crate::grid::RngStream;

    fn scalar(v: f64) -> ImageGrid {
        ImageGrid::filled(1, 1, 1, v)
    }

    fn sched() -> NoiseSchedule {
        NoiseSchedule::scaled_linear(100).unwrap()
    }

    #[test]
    fn single_atom_posterior_is_the_atom() {
        let s = sched();
        let d = ImageGrid::from_fn(2, 2, 1, |_, y, x| 0.3 * y as f64 - 0.2 * x as f64);
        let mut rng = RngStream::new(0, 0);
        for t in [1, 10, 60, 100] {
            let x_t = rng.normal_like(&d);
            let out = eps_empirical(&x_t, t, std::slice::from_ref(&d), &s).unwrap();
            let x0 = estimate_x0(&x_t, &out.eps_pred, t, &s).unwrap();
            assert!(x0.max_abs_diff(&d) < 1e-9, "t={t}");
        }
    }

    #[test]
    fn symmetric_pair_at_origin() {
        let s = sched();
        let data = [scalar(1.0), scalar(-1.0)];
        for t in [5, 50] {
            let out = eps_empirical(&scalar(0.0), t, &data, &s).unwrap();
            assert_eq!(out.eps_pred.data()[0], 0.0);
        }
    }

    #[test]
    fn gaussian_hand_value() {
        // ᾱ = 0.5 via a one-step schedule.
        let s = NoiseSchedule::from_betas(vec![0.5]).unwrap();
        let out = eps_gaussian(&scalar(1.0), 1, &scalar(0.0), 1.0, &s).unwrap();
        let r = 0.5f64.sqrt();
        assert!((out.eps_pred.data()[0] - r).abs() < 1e-12);
        let x0 = estimate_x0(&scalar(1.0), &out.eps_pred, 1, &s).unwrap();
        assert!((x0.data()[0] - r).abs() < 1e-12);
    }

    #[test]
    fn gaussian_collapses_as_variance_vanishes() {
        let s = sched();
        let out = eps_gaussian(&scalar(2.0), 30, &scalar(0.25), 1e-12, &s).unwrap();
        let x0 = estimate_x0(&scalar(2.0), &out.eps_pred, 30, &s).unwrap();
        assert!((x0.data()[0] - 0.25).abs() < 1e-6);
    }

    #[test]
    fn errors() {
        let s = sched();
        assert!(matches!(
            eps_empirical(&scalar(0.0), 3, &[], &s),
            Err(Error::EmptyDataset)
        ));
        assert!(matches!(
            eps_empirical(&scalar(0.0), 0, &[scalar(1.0)], &s),
            Err(Error::StepOutOfRange { .. })
        ));
        assert!(eps_gaussian(&scalar(0.0), 3, &scalar(0.0), 0.0, &s).is_err());
    }

    #[test]
    fn kernel_reduces_to_both_closed_forms() {
        let s = sched();
        let mut rng = RngStream::new(5, 1);
        let data: Vec<ImageGrid> = (0..4).map(|_| rng.uniform_image(3, 3, 1, -1.0, 1.0)).collect();
        let x_t = rng.normal_image(3, 3, 1);
        for t in [2, 40, 90] {
            let a = eps_kernel(&x_t, t, &data, 0.0, &s).unwrap();
            let b = eps_empirical(&x_t, t, &data, &s).unwrap();
            assert_eq!(a, b);
            let g = eps_gaussian(&x_t, t, &data[0], 0.3, &s).unwrap();
            let k = eps_kernel(&x_t, t, &data[..1], 0.3, &s).unwrap();
            assert!(g.eps_pred.max_abs_diff(&k.eps_pred) < 1e-12);
            // tiny bandwidth approaches the empirical predictor
            let tiny = eps_kernel(&x_t, t, &data, 1e-10, &s).unwrap();
            assert!(tiny.eps_pred.max_abs_diff(&b.eps_pred) < 1e-6);
        }
    }

    #[test]
    fn stable_at_low_noise() {
        let s = sched();
        let data = vec![scalar(0.9), scalar(-0.9), scalar(0.1)];
        let x_t = forward_sample(&scalar(0.9), 1, &scalar(0.3), &s).unwrap();
        let out = eps_empirical(&x_t, 1, &data, &s).unwrap();
        assert!(out.eps_pred.is_finite());
        assert!((out.eps_pred.data()[0] - 0.3).abs() < 1e-9);
    }

    #[test]
    fn denoisers_are_pure() {
        let s = sched();
        let mut rng = RngStream::new(9, 9);
        let data: Vec<ImageGrid> = (0..3).map(|_| rng.uniform_image(2, 2, 2, -1.0, 1.0)).collect();
        let den = EmpiricalDenoiser::new(data).unwrap().with_bandwidth(0.01);
        let x = rng.normal_image(2, 2, 2);
        assert_eq!(den.denoise(&x, 17, &s).unwrap(), den.denoise(&x, 17, &s).unwrap());
    }
}
