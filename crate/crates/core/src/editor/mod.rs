//! Object attribute edits: size, position, direction, background.
//!
//! Object edits run in two stages. The object is first removed by diffusion
//! inpainting against a background prior, then the transformed object is
//! blended back into the re-noised background at every reverse step.

mod spec;
mod suite;

pub use spec::{
    AngleTarget, BackgroundMode, EditKind, EditSpec, Pattern, PositionTarget, SizeTarget,
};
pub use suite::{
    generate_suite, generate_variants, EditorPrior, SuiteConfig, SuiteModels, SuiteVariant, VARIANT_NAMES,
};

use crate::diffusion::{
    blended_chain, reverse_step, BlendStep, Denoiser, EmpiricalDenoiser, NoiseSchedule,
    VariancePolicy,
};
use crate::error::{Error, Result};
use crate::eval::Classifier;
use crate::grid::{
    bbox, warp, warp_mask, warp_mask_binary, AffineMatrix, ImageGrid, MaskGrid, ObjectRect, RngStream,
};
use crate::guidance::{
    background_edit, AdversarialCe, FrequencyBand, GuidanceConfig, SpectralComplexity,
};

/// Resolved geometric edit, free of randomness.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Geometry {
    Scale { s: f64 },
    /// New top-left corner of the object rectangle.
    MoveTo { x: usize, y: usize },
    Rotate { degrees: f64 },
}

/// `T_size`, `T_position` or `T_direction` for the object rectangle.
/// Scaling and rotation keep the rectangle center fixed.
pub fn transform_matrix(geometry: &Geometry, rect: ObjectRect) -> Result<AffineMatrix> {
    let (cx, cy) = rect.center();
    match *geometry {
        Geometry::Scale { s } => {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidScale(s));
            }
            Ok(AffineMatrix::scale_about(s, cx, cy))
        }
        Geometry::MoveTo { x, y } => Ok(AffineMatrix::translation(
            x as f64 - rect.x as f64,
            y as f64 - rect.y as f64,
        )),
        Geometry::Rotate { degrees } => Ok(AffineMatrix::rotation_about(degrees, cx, cy)),
    }
}

fn binarize(mask: &MaskGrid) -> MaskGrid {
    MaskGrid::from_fn(mask.height(), mask.width(), |y, x| {
        if mask.is_on(y, x) {
            1.0
        } else {
            0.0
        }
    })
}

fn scaled_fits(mask: &MaskGrid, rect: ObjectRect, s: f64) -> bool {
    let (cx, cy) = rect.center();
    let Ok(m) = warp_mask_binary(mask, &AffineMatrix::scale_about(s, cx, cy)) else {
        return false;
    };
    match bbox(&m) {
        Ok(b) => b.x >= 1 && b.y >= 1 && b.x + b.w < mask.width() && b.y + b.h < mask.height(),
        Err(_) => false,
    }
}

/// Largest scale about the rectangle center whose warped mask keeps a
/// one-pixel margin, by bisection.
pub fn full_scale(mask: &MaskGrid) -> Result<f64> {
    let rect = bbox(mask)?;
    let mask = binarize(mask);
    let (mut lo, mut hi) = (0.0, (mask.height().max(mask.width()) as f64) * 2.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if scaled_fits(&mask, rect, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo <= 0.0 {
        return Err(Error::Internal("object cannot be placed with a margin".into()));
    }
    Ok(lo)
}

/// `s = √(rate·H·W / N_o)`, capped at [`full_scale`].
pub fn scale_for_rate(mask: &MaskGrid, target_rate: f64) -> Result<f64> {
    if !(target_rate > 0.0 && target_rate <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "pixel rate {target_rate} outside (0, 1]"
        )));
    }
    let n = mask.count_on();
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let hw = (mask.height() * mask.width()) as f64;
    let s = (target_rate * hw / n as f64).sqrt();
    if s <= 1.0 {
        return Ok(s);
    }
    Ok(s.min(full_scale(mask)?))
}

pub fn resolve_size(size: &SizeTarget, mask: &MaskGrid) -> Result<f64> {
    size.validate()?;
    match *size {
        SizeTarget::Scale { scale } => Ok(scale),
        SizeTarget::Rate { rate } => scale_for_rate(mask, rate),
        SizeTarget::Full => full_scale(mask),
    }
}

/// Exact procedural pattern at ±1.
pub fn template_background(
    pattern: Pattern,
    period: usize,
    height: usize,
    width: usize,
    channels: usize,
) -> Result<ImageGrid> {
    if period == 0 {
        return Err(Error::InvalidArgument("template period must be >= 1".into()));
    }
    Ok(ImageGrid::from_fn(height, width, channels, |_, y, x| {
        let on = match pattern {
            Pattern::Checker => (x / period + y / period) % 2 == 0,
            Pattern::StripeVertical => (x / period) % 2 == 0,
            Pattern::StripeHorizontal => (y / period) % 2 == 0,
        };
        if on {
            1.0
        } else {
            -1.0
        }
    }))
}

/// Background `xᵇ`, transformed object `xᵒ` and its mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneDecomposition {
    pub background: ImageGrid,
    pub object: ImageGrid,
    pub mask: MaskGrid,
}

impl SceneDecomposition {
    pub fn new(background: ImageGrid, object: ImageGrid, mask: MaskGrid) -> Result<Self> {
        background.ensure_same_shape(&object)?;
        background.ensure_mask_fits(&mask)?;
        Ok(Self {
            background,
            object,
            mask,
        })
    }

    /// Moves the masked object of `image` by `transform` over `background`.
    /// The object is resampled premultiplied by its mask so no source
    /// background bleeds into its edge; the warped mask is binarized at its expected area.
    pub fn transformed(
        image: &ImageGrid,
        mask: &MaskGrid,
        background: ImageGrid,
        transform: &AffineMatrix,
    ) -> Result<Self> {
        image.ensure_mask_fits(mask)?;
        let m = binarize(mask);
        let weighted = ImageGrid::from_fn(image.height(), image.width(), image.channels(), |c, y, x| {
            image.get(c, y, x) * m.get(y, x)
        });
        let num = warp(&weighted, transform, 0.0)?;
        let den = warp_mask(&m, transform)?;
        let object = ImageGrid::from_fn(image.height(), image.width(), image.channels(), |c, y, x| {
            let d = den.get(y, x);
            if d > 1e-9 {
                num.get(c, y, x) / d
            } else {
                0.0
            }
        });
        Self::new(background, object, warp_mask_binary(&m, transform)?)
    }
}

/// RePaint-style removal: the unmasked region is pinned to the re-noised
/// source at every step while the object region is denoised freely.
pub fn remove_object(
    image: &ImageGrid,
    mask: &MaskGrid,
    denoiser: &dyn Denoiser,
    t0: usize,
    sched: &NoiseSchedule,
    rng: &mut RngStream,
) -> Result<ImageGrid> {
    image.ensure_mask_fits(mask)?;
    let n = mask.count_on();
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    if n == mask.height() * mask.width() {
        return Err(Error::EmptyBackground);
    }
    let known = binarize(mask).invert();
    blended_chain(
        image,
        image,
        &known,
        t0,
        sched,
        rng,
        |x, t, rng| reverse_step(x, denoiser, t, sched, rng),
        &mut |_| {},
    )
}

/// Noises `xᵇ` to `t0`, then at every step denoises and pastes the object
/// re-noised to the new level.
pub fn composite_edit(
    decomp: &SceneDecomposition,
    denoiser: &dyn Denoiser,
    t0: usize,
    sched: &NoiseSchedule,
    rng: &mut RngStream,
) -> Result<ImageGrid> {
    composite_edit_traced(decomp, denoiser, t0, sched, rng, &mut |_| {})
}

pub fn composite_edit_traced(
    decomp: &SceneDecomposition,
    denoiser: &dyn Denoiser,
    t0: usize,
    sched: &NoiseSchedule,
    rng: &mut RngStream,
    observer: &mut dyn FnMut(&BlendStep<'_>),
) -> Result<ImageGrid> {
    blended_chain(
        &decomp.background,
        &decomp.object,
        &decomp.mask,
        t0,
        sched,
        rng,
        |x, t, rng| reverse_step(x, denoiser, t, sched, rng),
        observer,
    )
}

/// Composites the unmoved object onto a uniformly chosen pool image.
pub fn random_background(
    image: &ImageGrid,
    mask: &MaskGrid,
    pool: &[ImageGrid],
    denoiser: &dyn Denoiser,
    t0: usize,
    sched: &NoiseSchedule,
    rng: &mut RngStream,
) -> Result<ImageGrid> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if mask.count_on() == 0 {
        return Err(Error::EmptyMask);
    }
    let pick = rng.below(pool.len());
    let decomp = SceneDecomposition::transformed(
        image,
        mask,
        pool[pick].clone(),
        &AffineMatrix::identity(),
    )?;
    composite_edit(&decomp, denoiser, t0, sched, rng)
}

/// Models and knobs shared by every edit.
pub struct EditContext<'a> {
    pub sched: &'a NoiseSchedule,
    /// Background guidance denoiser; should know the source image.
    pub editor: &'a dyn Denoiser,
    /// Inpainting prior for object removal; should not contain the object.
    pub inpainter: &'a dyn Denoiser,
    /// Compositing prior and random-background pool.
    pub backgrounds: &'a [ImageGrid],
    pub policy: VariancePolicy,
    /// Classifier and true label for adversarial guidance.
    pub adversary: Option<(&'a dyn Classifier, usize)>,
    pub band: FrequencyBand,
    /// Spectral guidance unit; `None` uses the objective default.
    pub guidance_unit: Option<f64>,
    /// Adversarial guidance unit; `None` uses the objective default.
    pub adversarial_unit: Option<f64>,
    /// Removal depth; `None` runs the full chain.
    pub remove_t0: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditOutput {
    pub image: ImageGrid,
    /// Object mask of the output.
    pub mask: MaskGrid,
    /// Geometry applied to the object, in order.
    pub geometry: Vec<Geometry>,
}

impl EditContext<'_> {
    /// Empirical prior over the pool plus `extra`, so the chain can
    /// reconstruct the background it starts from.
    fn compositor(&self, extra: &ImageGrid) -> Result<EmpiricalDenoiser> {
        let mut data: Vec<ImageGrid> = self.backgrounds.to_vec();
        if !data.iter().any(|b| b == extra) {
            data.push(extra.clone());
        }
        Ok(EmpiricalDenoiser::new(data)?.with_policy(self.policy))
    }
}

fn resolve_geometry(
    edit: &EditKind,
    mask: &MaskGrid,
    rng: &mut RngStream,
) -> Result<Vec<(Geometry, ObjectRect)>> {
    let (h, w) = (mask.height(), mask.width());
    let mut current = binarize(mask);
    let mut out = Vec::new();
    let mut push = |g: Geometry, current: &mut MaskGrid| -> Result<()> {
        let rect = bbox(current)?;
        let t = transform_matrix(&g, rect)?;
        *current = warp_mask_binary(current, &t)?;
        out.push((g, rect));
        Ok(())
    };
    let pre = match edit {
        EditKind::Size { size } => Some(*size),
        EditKind::Position { pre_size, .. } | EditKind::Direction { pre_size, .. } => *pre_size,
        EditKind::Background { .. } => None,
    };
    if let Some(size) = pre {
        let s = resolve_size(&size, &current)?;
        push(Geometry::Scale { s }, &mut current)?;
    }
    match edit {
        EditKind::Position { position, .. } => {
            let rect = bbox(&current)?;
            let (x, y) = match *position {
                PositionTarget::Offset { x, y } => {
                    if x + rect.w > w || y + rect.h > h {
                        return Err(Error::InvalidArgument(format!(
                            "offset ({x}, {y}) puts a {}x{} object outside {w}x{h}",
                            rect.w, rect.h
                        )));
                    }
                    (x, y)
                }
                PositionTarget::Random => (rng.below(w - rect.w + 1), rng.below(h - rect.h + 1)),
            };
            push(Geometry::MoveTo { x, y }, &mut current)?;
        }
        EditKind::Direction { angle, .. } => {
            let degrees = match *angle {
                AngleTarget::Degrees { degrees } => degrees,
                AngleTarget::Random => rng.uniform_range(0.0, 360.0),
            };
            push(Geometry::Rotate { degrees }, &mut current)?;
        }
        _ => {}
    }
    Ok(out)
}

/// Applies one edit. Randomness derives from `spec.seed` alone.
pub fn apply_edit(
    image: &ImageGrid,
    mask: &MaskGrid,
    spec: &EditSpec,
    ctx: &EditContext<'_>,
) -> Result<EditOutput> {
    spec.validate()?;
    ctx.sched.check_step(spec.t0, 1)?;
    image.ensure_mask_fits(mask)?;
    if mask.count_on() == 0 {
        return Err(Error::EmptyMask);
    }
    let mut rng = RngStream::named(spec.seed, "edit");
    let sched = ctx.sched;
    if let EditKind::Background { background } = &spec.edit {
        let image_out = match *background {
            BackgroundMode::Invert | BackgroundMode::Guided { .. } => {
                let lambda = match *background {
                    BackgroundMode::Guided { lambda } => lambda,
                    _ => 0.0,
                };
                let cfg = GuidanceConfig {
                    lambda,
                    t0: spec.t0,
                    band: ctx.band,
                    unit: ctx.guidance_unit,
                };
                background_edit(image, mask, ctx.editor, &SpectralComplexity::new(ctx.band), &cfg, sched, &mut rng)?
            }
            BackgroundMode::Adversarial { lambda } => {
                let (clf, label) = ctx.adversary.ok_or_else(|| {
                    Error::InvalidArgument("adversarial guidance needs a classifier and label".into())
                })?;
                let obj = AdversarialCe::new(clf, label)?;
                let cfg = GuidanceConfig {
                    lambda,
                    t0: spec.t0,
                    band: FrequencyBand::All,
                    unit: ctx.adversarial_unit,
                };
                background_edit(image, mask, ctx.editor, &obj, &cfg, sched, &mut rng)?
            }
            BackgroundMode::Random => {
                if ctx.backgrounds.is_empty() {
                    return Err(Error::EmptyPool);
                }
                let den = ctx.compositor(&ctx.backgrounds[0])?;
                random_background(image, mask, ctx.backgrounds, &den, spec.t0, sched, &mut rng)?
            }
            BackgroundMode::Template { pattern, period } => {
                let (h, w, c) = image.shape();
                let tpl = template_background(pattern, period, h, w, c)?;
                let den = EmpiricalDenoiser::new(vec![tpl.clone()])?.with_policy(ctx.policy);
                let decomp = SceneDecomposition::transformed(image, mask, tpl, &AffineMatrix::identity())?;
                composite_edit(&decomp, &den, spec.t0, sched, &mut rng)?
            }
        };
        return Ok(EditOutput {
            image: image_out,
            mask: binarize(mask),
            geometry: Vec::new(),
        });
    }

    let steps = resolve_geometry(&spec.edit, mask, &mut rng)?;
    let mut transform = AffineMatrix::identity();
    for (g, rect) in &steps {
        transform = transform_matrix(g, *rect)?.then_after(&transform);
    }
    let remove_t0 = ctx.remove_t0.unwrap_or(sched.steps());
    let mut remove_rng = RngStream::named(spec.seed, "remove");
    let background = remove_object(image, mask, ctx.inpainter, remove_t0, sched, &mut remove_rng)?;
    let decomp = SceneDecomposition::transformed(image, mask, background, &transform)?;
    if decomp.mask.count_on() == 0 {
        return Err(Error::EmptyMask);
    }
    let den = ctx.compositor(&decomp.background)?;
    let out = composite_edit(&decomp, &den, spec.t0, sched, &mut rng)?;
    Ok(EditOutput {
        image: out,
        mask: decomp.mask,
        geometry: steps.into_iter().map(|(g, _)| g).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::pixel_rate;
    use crate::metrics::glcm;

    fn sched() -> NoiseSchedule {
        NoiseSchedule::scaled_linear(100).unwrap()
    }

    fn disk(n: usize, r: f64) -> MaskGrid {
        let c = (n as f64 - 1.0) / 2.0;
        MaskGrid::from_fn(n, n, |y, x| {
            if (x as f64 - c).powi(2) + (y as f64 - c).powi(2) <= r * r {
                1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn size_matrix_hand_values() {
        let rect = ObjectRect::new(10, 20, 40, 60);
        let m = transform_matrix(&Geometry::Scale { s: 0.5 }, rect).unwrap();
        let e = m.entries();
        assert_eq!((e[2], e[5]), (15.0, 25.0));
        assert_eq!(transform_matrix(&Geometry::Scale { s: 1.0 }, rect).unwrap(), AffineMatrix::identity());
        for s in [0.1, 0.7, 2.5] {
            let m = transform_matrix(&Geometry::Scale { s }, rect).unwrap();
            assert_eq!(m.apply(30.0, 50.0), (30.0, 50.0));
        }
        assert!(matches!(
            transform_matrix(&Geometry::Scale { s: 0.0 }, rect),
            Err(Error::InvalidScale(_))
        ));
    }

    #[test]
    fn rate_scale_hand_value() {
        let mask = MaskGrid::from_rect(100, 100, ObjectRect::new(30, 30, 40, 50));
        assert_eq!(mask.count_on(), 2000);
        assert!((scale_for_rate(&mask, 0.05).unwrap() - 0.5).abs() < 1e-12);
        assert!((scale_for_rate(&mask, 0.2).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            scale_for_rate(&MaskGrid::filled(4, 4, 0.0), 0.1),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn achieved_rates_within_ten_percent() {
        let mask = disk(64, 14.0);
        for rate in [0.1, 0.08, 0.05] {
            let s = scale_for_rate(&mask, rate).unwrap();
            let rect = bbox(&mask).unwrap();
            let t = transform_matrix(&Geometry::Scale { s }, rect).unwrap();
            let got = pixel_rate(&warp_mask_binary(&mask, &t).unwrap());
            assert!((got - rate).abs() / rate < 0.1, "{rate}: {got}");
        }
    }

    #[test]
    fn full_scale_fills_with_margin() {
        let mask = disk(32, 5.0);
        let s = full_scale(&mask).unwrap();
        assert!(s > 2.0);
        let rect = bbox(&mask).unwrap();
        let t = transform_matrix(&Geometry::Scale { s }, rect).unwrap();
        let b = bbox(&warp_mask(&mask, &t).unwrap()).unwrap();
        assert!(b.x >= 1 && b.y >= 1 && b.x + b.w <= 31 && b.y + b.h <= 31);
        assert!(b.w >= 26, "{b:?}");
    }

    #[test]
    fn rotation_round_trip_restores_bbox() {
        let mask = MaskGrid::from_rect(32, 32, ObjectRect::new(10, 12, 9, 6));
        let rect = bbox(&mask).unwrap();
        let fwd = transform_matrix(&Geometry::Rotate { degrees: 37.0 }, rect).unwrap();
        let back = transform_matrix(&Geometry::Rotate { degrees: -37.0 }, rect).unwrap();
        let m = warp_mask_binary(&warp_mask_binary(&mask, &fwd).unwrap(), &back).unwrap();
        let b = bbox(&m).unwrap();
        assert!(b.x.abs_diff(rect.x) <= 1 && b.y.abs_diff(rect.y) <= 1);
        assert!(b.w.abs_diff(rect.w) <= 1 && b.h.abs_diff(rect.h) <= 1);
    }

    #[test]
    fn templates() {
        let c = template_background(Pattern::Checker, 1, 4, 4, 1).unwrap();
        assert_eq!(c.data().iter().filter(|&&v| v == 1.0).count(), 8);
        assert_eq!(c.data().iter().filter(|&&v| v == -1.0).count(), 8);
        assert_eq!(c.get(0, 0, 0), -c.get(0, 0, 1));
        let s = template_background(Pattern::StripeVertical, 2, 3, 8, 1).unwrap();
        assert_eq!(&s.data()[..8], &[1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0]);
        assert_eq!(s.get(0, 2, 3), -1.0);
        let m = glcm(&c, 2, (1, 0), true).unwrap();
        assert!((m.contrast() - 1.0).abs() < 1e-12);
        assert!(template_background(Pattern::Checker, 0, 4, 4, 1).is_err());
    }

    #[test]
    fn removal_fills_constant_background() {
        let s = sched();
        let c = -0.4;
        let mut img = ImageGrid::filled(16, 16, 1, c);
        let mask = MaskGrid::from_rect(16, 16, ObjectRect::new(5, 5, 6, 6));
        for y in 5..11 {
            for x in 5..11 {
                img.set(0, y, x, 0.8);
            }
        }
        let prior = EmpiricalDenoiser::new(vec![
            ImageGrid::filled(16, 16, 1, c),
            ImageGrid::filled(16, 16, 1, c + 0.5),
            ImageGrid::filled(16, 16, 1, c - 0.5),
        ])
        .unwrap();
        let out = remove_object(&img, &mask, &prior, 100, &s, &mut RngStream::new(1, 0)).unwrap();
        let mut err = 0.0;
        for y in 5..11 {
            for x in 5..11 {
                err += (out.get(0, y, x) - c).abs() / 36.0;
            }
        }
        assert!(err < 0.1, "{err}");
        for y in 0..16 {
            for x in 0..16 {
                if !mask.is_on(y, x) {
                    assert_eq!(out.get(0, y, x), c);
                }
            }
        }
        assert!(matches!(
            remove_object(&img, &MaskGrid::filled(16, 16, 1.0), &prior, 10, &s, &mut RngStream::new(0, 0)),
            Err(Error::EmptyBackground)
        ));
        assert!(matches!(
            remove_object(&img, &MaskGrid::filled(16, 16, 0.0), &prior, 10, &s, &mut RngStream::new(0, 0)),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn composite_anchors_object_every_step() {
        let s = sched();
        let mut rng = RngStream::new(5, 0);
        let bg = rng.uniform_image(12, 12, 1, -1.0, 0.0);
        let img = rng.uniform_image(12, 12, 1, 0.0, 1.0);
        let mask = MaskGrid::from_rect(12, 12, ObjectRect::new(3, 4, 5, 4));
        let rect = bbox(&mask).unwrap();
        let t = transform_matrix(&Geometry::Scale { s: 0.8 }, rect).unwrap();
        let d = SceneDecomposition::transformed(&img, &mask, bg.clone(), &t).unwrap();
        let den = EmpiricalDenoiser::new(vec![bg]).unwrap();
        let mut count = 0;
        let out = composite_edit_traced(&d, &den, 25, &s, &mut RngStream::new(2, 2), &mut |st| {
            count += 1;
            for y in 0..12 {
                for x in 0..12 {
                    if d.mask.is_on(y, x) {
                        assert_eq!(st.latent.get(0, y, x), st.noised_anchor.get(0, y, x));
                    }
                }
            }
        })
        .unwrap();
        assert_eq!(count, 25);
        let mut err = 0.0;
        for y in 0..12 {
            for x in 0..12 {
                if d.mask.is_on(y, x) {
                    err = f64::max(err, (out.get(0, y, x) - d.object.get(0, y, x)).abs());
                }
            }
        }
        assert_eq!(err, 0.0);
    }

    #[test]
    fn random_background_needs_pool_and_is_deterministic() {
        let s = sched();
        let img = ImageGrid::filled(8, 8, 1, 0.5);
        let mask = MaskGrid::from_rect(8, 8, ObjectRect::new(2, 2, 3, 3));
        let den = EmpiricalDenoiser::new(vec![img.clone()]).unwrap();
        assert!(matches!(
            random_background(&img, &mask, &[], &den, 10, &s, &mut RngStream::new(0, 0)),
            Err(Error::EmptyPool)
        ));
        let pool = vec![ImageGrid::filled(8, 8, 1, -0.5), ImageGrid::filled(8, 8, 1, 0.1)];
        let den = EmpiricalDenoiser::new(pool.clone()).unwrap();
        let a = random_background(&img, &mask, &pool, &den, 10, &s, &mut RngStream::new(3, 1)).unwrap();
        let b = random_background(&img, &mask, &pool, &den, 10, &s, &mut RngStream::new(3, 1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.get(0, 3, 3), 0.5);
    }
}
