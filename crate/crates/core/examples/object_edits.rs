//! Size, position and direction edits of one object, with the resulting pixel
//! rates.
//!
//!     cargo run --release --example object_edits [OUT_DIR]

use std::path::PathBuf;

use attr_forge::diffusion::{EmpiricalDenoiser, NoiseSchedule, VariancePolicy};
use attr_forge::editor::{
    apply_edit, AngleTarget, EditContext, EditKind, EditSpec, PositionTarget, SizeTarget,
};
use attr_forge::eval::toy::toy_dataset;
use attr_forge::grid::io::write_png;
use attr_forge::grid::{pixel_rate, ImageGrid};
use attr_forge::guidance::FrequencyBand;

fn main() -> attr_forge::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/object_edits".into()));
    std::fs::create_dir_all(&out).map_err(|e| attr_forge::Error::io(&out, e))?;
    let sched = NoiseSchedule::scaled_linear(100)?;
    let backgrounds: Vec<ImageGrid> = toy_dataset(4, 16, 32).into_iter().map(|s| s.background).collect();
    let inpainter = EmpiricalDenoiser::new(backgrounds.clone())?;
    let scene = toy_dataset(21, 1, 32).remove(0);
    let editor = EmpiricalDenoiser::new(vec![scene.image.clone()])?;
    let ctx = EditContext {
        sched: &sched,
        editor: &editor,
        inpainter: &inpainter,
        backgrounds: &backgrounds,
        policy: VariancePolicy::Beta,
        adversary: None,
        band: FrequencyBand::All,
        guidance_unit: None,
        adversarial_unit: None,
        remove_t0: None,
    };
    write_png(out.join("source.png"), &scene.image)?;
    println!("source pixel rate {:.4}", pixel_rate(&scene.mask));

    let small = Some(SizeTarget::Rate { rate: 0.05 });
    let edits = [
        ("size-full", EditKind::Size { size: SizeTarget::Full }),
        ("size-0.10", EditKind::Size { size: SizeTarget::Rate { rate: 0.10 } }),
        ("size-0.05", EditKind::Size { size: SizeTarget::Rate { rate: 0.05 } }),
        ("half", EditKind::Size { size: SizeTarget::Scale { scale: 0.5 } }),
        ("corner", EditKind::Position { position: PositionTarget::Offset { x: 1, y: 1 }, pre_size: small }),
        ("moved", EditKind::Position { position: PositionTarget::Random, pre_size: small }),
        ("rot-45", EditKind::Direction { angle: AngleTarget::Degrees { degrees: 45.0 }, pre_size: None }),
        ("rot-any", EditKind::Direction { angle: AngleTarget::Random, pre_size: small }),
    ];
    for (name, edit) in edits {
        let spec = EditSpec { edit, t0: 25, seed: 5 };
        let e = apply_edit(&scene.image, &scene.mask, &spec, &ctx)?;
        println!("{name:<10} rate {:.4}  {:?}", pixel_rate(&e.mask), e.geometry);
        write_png(out.join(format!("{name}.png")), &e.image)?;
    }
    println!("images in {}", out.display());
    Ok(())
}
