use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;

use super::{load_classifier, write_json, Priors, RunConfig};
use crate::diffusion::EmpiricalDenoiser;
use crate::editor::{
    apply_edit, AngleTarget, BackgroundMode, EditContext, EditKind, EditSpec, Geometry, Pattern,
    PositionTarget, SizeTarget,
};
use crate::error::{Error, Result};
use crate::eval::Classifier;
use crate::grid::io::{png_bytes, read_image_any, read_mask_png, write_atomic, write_mask_png};
use crate::grid::pixel_rate;
use crate::manifest::sha256_hex;

#[derive(Debug, Args)]
pub struct EditArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    /// Output PNG; the sidecar goes next to it as `.json`, the output mask as
    /// `.mask.png`.
    #[arg(long)]
    out: PathBuf,
    /// JSON edit spec, used instead of the edit flags below.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Background mode; defaults to `guided` when `--lambda` is given, else `invert`.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long, value_enum, default_value = "checker")]
    pattern: PatternArg,
    #[arg(long, default_value_t = 4)]
    period: usize,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    rate: Option<f64>,
    /// Largest size that fits.
    #[arg(long)]
    full: bool,
    #[arg(long)]
    x: Option<usize>,
    #[arg(long)]
    y: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    degrees: Option<f64>,
    /// Resize to this pixel rate before moving or rotating.
    #[arg(long)]
    pre_rate: Option<f64>,
    #[arg(long)]
    t0: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// True class, for adversarial guidance.
    #[arg(long, default_value_t = 0)]
    label: usize,
    #[arg(long)]
    classifier: Option<PathBuf>,
    #[arg(long)]
    library: Option<PathBuf>,
    #[arg(long)]
    backgrounds: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Background,
    Size,
    Position,
    Direction,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Invert,
    Guided,
    Adversarial,
    Random,
    Template,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PatternArg {
    Checker,
    StripeVertical,
    StripeHorizontal,
}

/// The JSON sidecar next to every edited image.
#[derive(Debug, Serialize)]
struct EditRecord<'a> {
    source: String,
    mask: String,
    spec: &'a EditSpec,
    output: String,
    output_mask: String,
    sha256: String,
    pixel_rate: f64,
    geometry: &'a [Geometry],
}

impl EditArgs {
    fn spec(&self, cfg: &RunConfig) -> Result<EditSpec> {
        if let Some(path) = &self.spec {
            if self.kind.is_some() {
                return Err(Error::Config("--spec and --kind are exclusive".into()));
            }
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            return serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())));
        }
        let kind = self
            .kind
            .ok_or_else(|| Error::Config("give --kind or --spec".into()))?;
        let g = &cfg.guidance;
        let pre_size = self.pre_rate.map(|rate| SizeTarget::Rate { rate });
        let (edit, t0) = match kind {
            KindArg::Background => {
                let mode = self.mode.unwrap_or(if self.lambda.is_some() {
                    ModeArg::Guided
                } else {
                    ModeArg::Invert
                });
                let (background, t0) = match mode {
                    ModeArg::Invert => (BackgroundMode::Invert, g.t0_background),
                    ModeArg::Guided => (
                        BackgroundMode::Guided {
                            lambda: self.lambda.unwrap_or(g.lambda),
                        },
                        g.t0_background,
                    ),
                    ModeArg::Adversarial => (
                        BackgroundMode::Adversarial {
                            lambda: self.lambda.unwrap_or(g.adversarial_lambda),
                        },
                        g.t0_background,
                    ),
                    ModeArg::Random => (BackgroundMode::Random, g.t0_object),
                    ModeArg::Template => {
                        let pattern = match self.pattern {
                            PatternArg::Checker => Pattern::Checker,
                            PatternArg::StripeVertical => Pattern::StripeVertical,
                            PatternArg::StripeHorizontal => Pattern::StripeHorizontal,
                        };
                        (
                            BackgroundMode::Template {
                                pattern,
                                period: self.period,
                            },
                            g.t0_object,
                        )
                    }
                };
                (EditKind::Background { background }, t0)
            }
            KindArg::Size => {
                let size = match (self.scale, self.rate, self.full) {
                    (Some(scale), None, false) => SizeTarget::Scale { scale },
                    (None, Some(rate), false) => SizeTarget::Rate { rate },
                    (None, None, true) => SizeTarget::Full,
                    _ => return Err(Error::Config("size edits need exactly one of --scale, --rate, --full".into())),
                };
                (EditKind::Size { size }, g.t0_object)
            }
            KindArg::Position => {
                let position = match (self.x, self.y) {
                    (Some(x), Some(y)) => PositionTarget::Offset { x, y },
                    (None, None) => PositionTarget::Random,
                    _ => return Err(Error::Config("--x and --y go together".into())),
                };
                (EditKind::Position { position, pre_size }, g.t0_object)
            }
            KindArg::Direction => {
                let angle = match self.degrees {
                    Some(degrees) => AngleTarget::Degrees { degrees },
                    None => AngleTarget::Random,
                };
                (EditKind::Direction { angle, pre_size }, g.t0_object)
            }
        };
        Ok(EditSpec {
            edit,
            t0: self.t0.unwrap_or(t0),
            seed: self.seed,
        })
    }
}

pub fn run(cfg: &mut RunConfig, args: EditArgs) -> Result<()> {
    if let Some(p) = &args.library {
        cfg.denoiser.library = Some(p.clone());
    }
    if let Some(p) = &args.backgrounds {
        cfg.denoiser.backgrounds = Some(p.clone());
    }
    if let Some(p) = &args.classifier {
        cfg.io.classifier = Some(p.clone());
    }
    cfg.validate()?;
    let spec = args.spec(cfg)?;
    spec.validate()?;
    let sched = cfg.schedule()?;
    sched.check_step(spec.t0, 1)?;

    let image = read_image_any(&args.image)?;
    let mask = read_mask_png(&args.mask)?;
    let priors = Priors::load(cfg)?;
    let suite = cfg.suite_config();
    let editor = priors.editor(cfg).denoiser(&image, &suite)?;
    let object_edit = matches!(
        spec.edit,
        EditKind::Size { .. } | EditKind::Position { .. } | EditKind::Direction { .. }
    );
    let inpainter = if priors.backgrounds.is_empty() {
        if object_edit || matches!(spec.edit, EditKind::Background { background: BackgroundMode::Random }) {
            return Err(Error::Config("this edit needs denoiser.backgrounds".into()));
        }
        None
    } else {
        Some(EmpiricalDenoiser::new(priors.backgrounds.clone())?.with_policy(suite.policy))
    };
    let needs_classifier = matches!(
        spec.edit,
        EditKind::Background { background: BackgroundMode::Adversarial { .. } }
    );
    let classifier = if needs_classifier {
        Some(load_classifier(cfg.io.classifier.as_deref())?)
    } else {
        None
    };
    let ctx = EditContext {
        sched: &sched,
        editor: editor.as_ref(),
        inpainter: match &inpainter {
            Some(d) => d,
            None => editor.as_ref(),
        },
        backgrounds: &priors.backgrounds,
        policy: suite.policy,
        adversary: classifier.as_ref().map(|c| (c as &dyn Classifier, args.label)),
        band: suite.band,
        guidance_unit: suite.guidance_unit,
        adversarial_unit: suite.adversarial_unit,
        remove_t0: suite.t0_remove,
    };
    let out = apply_edit(&image, &mask, &spec, &ctx)?;

    let bytes = png_bytes(&out.image)?;
    let mask_path = args.out.with_extension("mask.png");
    write_atomic(&args.out, &bytes)?;
    write_mask_png(&mask_path, &out.mask)?;
    let record = EditRecord {
        source: args.image.to_string_lossy().into_owned(),
        mask: args.mask.to_string_lossy().into_owned(),
        spec: &spec,
        output: args.out.to_string_lossy().into_owned(),
        output_mask: mask_path.to_string_lossy().into_owned(),
        sha256: sha256_hex(&bytes),
        pixel_rate: pixel_rate(&out.mask),
        geometry: &out.geometry,
    };
    write_json(&args.out.with_extension("json"), &record)?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}
