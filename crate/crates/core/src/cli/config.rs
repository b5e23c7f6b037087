//! `RunConfig`: the TOML document every command reads. Unknown keys are
//! rejected; command-line flags override individual values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diffusion::{NoiseSchedule, VariancePolicy};
use crate::editor::SuiteConfig;
use crate::error::{Error, Result};
use crate::guidance::FrequencyBand;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schedule: ScheduleSection,
    pub denoiser: DenoiserSection,
    pub guidance: GuidanceSection,
    pub suite: SuiteSection,
    pub io: IoSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    #[serde(rename = "T")]
    pub steps: usize,
    /// Both ends or neither; neither means the linear 1e-4..0.02 range
    /// rescaled by `1000 / T`.
    pub beta_start: Option<f64>,
    pub beta_end: Option<f64>,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            steps: 100,
            beta_start: None,
            beta_end: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DenoiserKind {
    #[default]
    Empirical,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DenoiserSection {
    pub kind: DenoiserKind,
    /// Directory of reference scenes for the empirical editor.
    pub library: Option<PathBuf>,
    /// Directory of object-free backgrounds: inpainting prior and random pool.
    pub backgrounds: Option<PathBuf>,
    /// Kernel bandwidth of the empirical editor.
    pub bandwidth: f64,
    /// Pixel variance of the Gaussian editor, centered on the source.
    pub variance: f64,
    pub policy: VariancePolicy,
}

impl Default for DenoiserSection {
    fn default() -> Self {
        Self {
            kind: DenoiserKind::Empirical,
            library: None,
            backgrounds: None,
            bandwidth: 0.01,
            variance: 0.05,
            policy: VariancePolicy::Beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GuidanceSection {
    pub lambda: f64,
    pub adversarial_lambda: f64,
    pub band: FrequencyBand,
    pub t0_background: usize,
    pub t0_object: usize,
    pub t0_remove: Option<usize>,
    pub unit: Option<f64>,
    pub adversarial_unit: Option<f64>,
}

impl Default for GuidanceSection {
    fn default() -> Self {
        let s = SuiteConfig::default();
        Self {
            lambda: s.lambda,
            adversarial_lambda: s.adversarial_lambda,
            band: s.band,
            t0_background: s.t0_background,
            t0_object: s.t0_object,
            t0_remove: s.t0_remove,
            unit: None,
            adversarial_unit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteSection {
    pub seed: u64,
    pub rates: [f64; 3],
    pub rd_small: bool,
}

impl Default for SuiteSection {
    fn default() -> Self {
        let s = SuiteConfig::default();
        Self {
            seed: 0,
            rates: s.rates,
            rd_small: s.rd_small,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    pub out_dir: Option<PathBuf>,
    /// Toy-classifier checkpoint (adversarial variant, evaluation, OOD scores).
    pub classifier: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Worker threads; 0 lets the pool decide. `ATTRFORGE_THREADS` wins.
    pub threads: usize,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        // Relative paths in the file are relative to the file.
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.denoiser.library,
            &mut cfg.denoiser.backgrounds,
            &mut cfg.io.out_dir,
            &mut cfg.io.classifier,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let sched = self.schedule()?;
        let g = &self.guidance;
        for (name, t0) in [("t0_background", g.t0_background), ("t0_object", g.t0_object)] {
            sched
                .check_step(t0, 1)
                .map_err(|_| Error::Config(format!("guidance.{name} = {t0} outside 1..={}", sched.steps())))?;
        }
        if let Some(t0) = g.t0_remove {
            sched
                .check_step(t0, 1)
                .map_err(|_| Error::Config(format!("guidance.t0_remove = {t0} outside 1..={}", sched.steps())))?;
        }
        for (name, v) in [("lambda", g.lambda), ("adversarial_lambda", g.adversarial_lambda)] {
            if !v.is_finite() {
                return Err(Error::Config(format!("guidance.{name} must be finite")));
            }
        }
        for (name, v) in [("unit", g.unit), ("adversarial_unit", g.adversarial_unit)] {
            if let Some(u) = v {
                if !(u > 0.0 && u.is_finite()) {
                    return Err(Error::Config(format!("guidance.{name} must be > 0")));
                }
            }
        }
        g.band.validate()?;
        if self.suite.rates.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return Err(Error::Config("suite.rates must lie in (0, 1]".into()));
        }
        let d = &self.denoiser;
        if !(d.bandwidth >= 0.0 && d.bandwidth.is_finite()) {
            return Err(Error::Config("denoiser.bandwidth must be >= 0".into()));
        }
        if !(d.variance > 0.0 && d.variance.is_finite()) {
            return Err(Error::Config("denoiser.variance must be > 0".into()));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        let s = &self.schedule;
        let sched = match (s.beta_start, s.beta_end) {
            (None, None) => NoiseSchedule::scaled_linear(s.steps),
            (Some(a), Some(b)) => NoiseSchedule::linear(s.steps, a, b),
            _ => {
                return Err(Error::Config(
                    "schedule.beta_start and beta_end must be given together".into(),
                ))
            }
        };
        sched.map_err(|e| Error::Config(e.to_string()))
    }

    pub fn suite_config(&self) -> SuiteConfig {
        let g = &self.guidance;
        SuiteConfig {
            t0_background: g.t0_background,
            t0_object: g.t0_object,
            t0_remove: g.t0_remove,
            lambda: g.lambda,
            adversarial_lambda: g.adversarial_lambda,
            band: g.band,
            guidance_unit: g.unit,
            adversarial_unit: g.adversarial_unit,
            rates: self.suite.rates,
            rd_small: self.suite.rd_small,
            bandwidth: self.denoiser.bandwidth,
            policy: self.denoiser.policy,
        }
    }
}
