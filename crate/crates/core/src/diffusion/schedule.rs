use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the reverse-step variance `Σ_θ(x_t, t)` is fixed per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariancePolicy {
    /// `Σ = β_t`
    #[default]
    Beta,
    /// `Σ = β̃_t = β_t (1 − ᾱ_{t−1}) / (1 − ᾱ_t)`
    Tilde,
}

/// β_1..β_T and the derived ᾱ_t, indexed by step `t ∈ 1..=T` (`ᾱ_0 = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bar: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ScheduleJson {
    #[serde(rename = "T")]
    steps: usize,
    beta: Vec<f64>,
}

impl NoiseSchedule {
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::InvalidSchedule("no steps".into()));
        }
        if let Some((i, b)) = betas
            .iter()
            .enumerate()
            .find(|(_, b)| !(**b > 0.0 && **b < 1.0))
        {
            return Err(Error::InvalidSchedule(format!(
                "beta_{} = {b} outside (0, 1)",
                i + 1
            )));
        }
        let mut alpha_bar = Vec::with_capacity(betas.len() + 1);
        alpha_bar.push(1.0);
        let mut acc = 1.0;
        for b in &betas {
            acc *= 1.0 - b;
            alpha_bar.push(acc);
        }
        if alpha_bar.windows(2).any(|w| !(w[1] < w[0]) || w[1] <= 0.0) {
            return Err(Error::InvalidSchedule(
                "alpha_bar must be positive and strictly decreasing".into(),
            ));
        }
        Ok(Self { betas, alpha_bar })
    }

    /// β linearly spaced from `start` to `end` over `steps` values.
    pub fn linear(steps: usize, start: f64, end: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidSchedule("no steps".into()));
        }
        let betas = (0..steps)
            .map(|i| {
                if steps == 1 {
                    start
                } else {
                    start + (end - start) * i as f64 / (steps - 1) as f64
                }
            })
            .collect();
        Self::from_betas(betas)
    }

    /// Linear 1e-4..0.02 rescaled by `1000 / steps`, so shorter chains still
    /// end near pure noise. Needs `steps > 20`.
    pub fn scaled_linear(steps: usize) -> Result<Self> {
        let scale = 1000.0 / steps as f64;
        Self::linear(steps, 1e-4 * scale, 0.02 * scale)
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// β_t for `t ∈ 1..=T`.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        1.0 - self.beta(t)
    }

    /// ᾱ_t for `t ∈ 0..=T`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn check_step(&self, t: usize, min: usize) -> Result<()> {
        if t < min || t > self.steps() {
            return Err(Error::StepOutOfRange {
                t,
                min,
                max: self.steps(),
            });
        }
        Ok(())
    }

    /// Reverse-step variance; zero at the terminal step `t = 1`.
    pub fn variance(&self, t: usize, policy: VariancePolicy) -> f64 {
        if t <= 1 {
            return 0.0;
        }
        match policy {
            VariancePolicy::Beta => self.beta(t),
            VariancePolicy::Tilde => {
                self.beta(t) * (1.0 - self.alpha_bar(t - 1)) / (1.0 - self.alpha_bar(t))
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ScheduleJson {
            steps: self.steps(),
            beta: self.betas.clone(),
        })
        .expect("schedule serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let parsed: ScheduleJson =
            serde_json::from_str(s).map_err(|e| Error::InvalidSchedule(e.to_string()))?;
        if parsed.steps != parsed.beta.len() {
            return Err(Error::InvalidSchedule(format!(
                "T = {} but {} betas",
                parsed.steps,
                parsed.beta.len()
            )));
        }
        Self::from_betas(parsed.beta)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s).map_err(|e| Error::format(path, e.to_string()))
    }
}
