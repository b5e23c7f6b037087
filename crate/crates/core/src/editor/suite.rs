//! The eleven-variant attribute suite.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{apply_edit, BackgroundMode, EditContext, EditKind, EditSpec, PositionTarget, SizeTarget};
use crate::diffusion::{Denoiser, EmpiricalDenoiser, GaussianDenoiser, NoiseSchedule, VariancePolicy};
use crate::editor::AngleTarget;
use crate::error::{Error, Result};
use crate::eval::Classifier;
use crate::grid::{ImageGrid, MaskGrid, RngStream};
use crate::guidance::FrequencyBand;

pub const VARIANT_NAMES: [&str; 11] = [
    "inver",
    "lambda-neg20",
    "lambda-pos20",
    "lambda-pos20-adv",
    "random-bg",
    "size-full",
    "size-0.1",
    "size-0.08",
    "size-0.05",
    "rp",
    "rd",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub t0_background: usize,
    pub t0_object: usize,
    /// Removal depth; `None` runs the full chain.
    pub t0_remove: Option<usize>,
    /// Magnitude of the ±λ spectral levels.
    pub lambda: f64,
    pub adversarial_lambda: f64,
    pub band: FrequencyBand,
    pub guidance_unit: Option<f64>,
    pub adversarial_unit: Option<f64>,
    pub rates: [f64; 3],
    /// Rotate the 0.05-rate object instead of the original-size one.
    pub rd_small: bool,
    /// Editor kernel bandwidth.
    pub bandwidth: f64,
    pub policy: VariancePolicy,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            t0_background: 50,
            t0_object: 25,
            t0_remove: None,
            lambda: 20.0,
            adversarial_lambda: 20.0,
            band: FrequencyBand::All,
            guidance_unit: None,
            adversarial_unit: None,
            rates: [0.1, 0.08, 0.05],
            rd_small: false,
            bandwidth: 0.01,
            policy: VariancePolicy::Beta,
        }
    }
}

/// Prior behind the background editor.
#[derive(Debug, Clone, Copy)]
pub enum EditorPrior<'a> {
    /// Kernel-smoothed empirical distribution over these scenes plus the
    /// source image.
    Library(&'a [ImageGrid]),
    /// `N(source, variance·I)`.
    Gaussian { variance: f64 },
}

impl EditorPrior<'_> {
    /// The background editor for `source`.
    pub fn denoiser(&self, source: &ImageGrid, config: &SuiteConfig) -> Result<Box<dyn Denoiser>> {
        Ok(match *self {
            EditorPrior::Library(library) => {
                let mut data = library.to_vec();
                data.push(source.clone());
                Box::new(
                    EmpiricalDenoiser::new(data)?
                        .with_bandwidth(config.bandwidth)
                        .with_policy(config.policy),
                )
            }
            EditorPrior::Gaussian { variance } => {
                Box::new(GaussianDenoiser::new(source.clone(), variance)?.with_policy(config.policy))
            }
        })
    }
}

/// Data the suite's denoisers are built from.
pub struct SuiteModels<'a> {
    pub editor: EditorPrior<'a>,
    /// Object-free backgrounds: the inpainting prior and random pool.
    pub backgrounds: &'a [ImageGrid],
    pub adversary: &'a dyn Classifier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteVariant {
    pub name: &'static str,
    pub spec: EditSpec,
    pub image: ImageGrid,
    pub mask: MaskGrid,
}

impl SuiteConfig {
    /// Canonical spec for each variant name. Seeds derive from
    /// `(seed, name)`.
    pub fn specs(&self, seed: u64) -> Vec<(&'static str, EditSpec)> {
        let bg = |m| EditKind::Background { background: m };
        let rate = |r| SizeTarget::Rate { rate: r };
        let [r1, r2, r3] = self.rates;
        let kinds = [
            (bg(BackgroundMode::Invert), self.t0_background),
            (bg(BackgroundMode::Guided { lambda: -self.lambda }), self.t0_background),
            (bg(BackgroundMode::Guided { lambda: self.lambda }), self.t0_background),
            (bg(BackgroundMode::Adversarial { lambda: self.adversarial_lambda }), self.t0_background),
            (bg(BackgroundMode::Random), self.t0_object),
            (EditKind::Size { size: SizeTarget::Full }, self.t0_object),
            (EditKind::Size { size: rate(r1) }, self.t0_object),
            (EditKind::Size { size: rate(r2) }, self.t0_object),
            (EditKind::Size { size: rate(r3) }, self.t0_object),
            (
                EditKind::Position { position: PositionTarget::Random, pre_size: Some(rate(r3)) },
                self.t0_object,
            ),
            (
                EditKind::Direction {
                    angle: AngleTarget::Random,
                    pre_size: self.rd_small.then(|| rate(r3)),
                },
                self.t0_object,
            ),
        ];
        VARIANT_NAMES
            .iter()
            .zip(kinds)
            .map(|(&name, (edit, t0))| {
                let seed = RngStream::named(seed, name).next_u64();
                (name, EditSpec { edit, t0, seed })
            })
            .collect()
    }
}

/// All eleven variants of one image, computed in parallel. `label` is the
/// true class, used by the adversarial variant.
pub fn generate_suite(
    image: &ImageGrid,
    mask: &MaskGrid,
    label: usize,
    seed: u64,
    models: &SuiteModels<'_>,
    config: &SuiteConfig,
    sched: &NoiseSchedule,
) -> Result<Vec<SuiteVariant>> {
    generate_variants(image, mask, label, seed, models, config, sched, &VARIANT_NAMES)
}

/// The named subset of the suite, in the order given. Each variant depends
/// only on `(image, seed, name)`, so any subset matches the full run.
#[allow(clippy::too_many_arguments)]
pub fn generate_variants(
    image: &ImageGrid,
    mask: &MaskGrid,
    label: usize,
    seed: u64,
    models: &SuiteModels<'_>,
    config: &SuiteConfig,
    sched: &NoiseSchedule,
    names: &[&str],
) -> Result<Vec<SuiteVariant>> {
    if mask.count_on() == 0 {
        return Err(Error::EmptyMask);
    }
    if models.backgrounds.is_empty() {
        return Err(Error::EmptyPool);
    }
    let specs = config.specs(seed);
    let wanted = names
        .iter()
        .map(|n| {
            specs
                .iter()
                .find(|(name, _)| name == n)
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("unknown variant {n:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let editor = models.editor.denoiser(image, config)?;
    let inpainter = EmpiricalDenoiser::new(models.backgrounds.to_vec())?.with_policy(config.policy);
    let ctx = EditContext {
        sched,
        editor: editor.as_ref(),
        inpainter: &inpainter,
        backgrounds: models.backgrounds,
        policy: config.policy,
        adversary: Some((models.adversary, label)),
        band: config.band,
        guidance_unit: config.guidance_unit,
        adversarial_unit: config.adversarial_unit,
        remove_t0: config.t0_remove,
    };
    wanted
        .into_par_iter()
        .map(|(name, spec)| {
            let out = apply_edit(image, mask, &spec, &ctx)?;
            Ok(SuiteVariant {
                name,
                spec,
                image: out.image,
                mask: out.mask,
            })
        })
        .collect()
}
