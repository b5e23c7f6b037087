//! Guided background edits at several guidance strengths. Positive lambda
//! adds texture behind the object, negative lambda smooths it away.
//!
//!     cargo run --release --example background_edit [OUT_DIR]

use std::path::PathBuf;

use attr_forge::diffusion::NoiseSchedule;
use attr_forge::editor::{EditorPrior, SuiteConfig};
use attr_forge::eval::toy::toy_dataset;
use attr_forge::grid::io::{write_mask_png, write_png};
use attr_forge::grid::{ImageGrid, RngStream};
use attr_forge::guidance::{background_edit, complexity_value, FrequencyBand, GuidanceConfig, SpectralComplexity};
use attr_forge::metrics::{glcm_features, GlcmParams};

fn main() -> attr_forge::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/background_edit".into()));
    std::fs::create_dir_all(&out).map_err(|e| attr_forge::Error::io(&out, e))?;
    let sched = NoiseSchedule::scaled_linear(100)?;
    let library: Vec<ImageGrid> = toy_dataset(3, 32, 32).into_iter().map(|s| s.image).collect();
    let scene = toy_dataset(11, 1, 32).remove(0);
    let suite = SuiteConfig::default();
    let editor = EditorPrior::Library(&library).denoiser(&scene.image, &suite)?;
    let objective = SpectralComplexity::new(FrequencyBand::All);
    let glcm = GlcmParams::default();

    write_png(out.join("source.png"), &scene.image)?;
    write_mask_png(out.join("mask.png"), &scene.mask)?;
    println!("{:>8} {:>10} {:>10}", "lambda", "L_c", "contrast");
    for lambda in [-40.0, -20.0, 0.0, 20.0, 40.0] {
        let cfg = GuidanceConfig::new(lambda, suite.t0_background);
        let mut rng = RngStream::new(0, 1);
        let x = background_edit(&scene.image, &scene.mask, editor.as_ref(), &objective, &cfg, &sched, &mut rng)?;
        println!(
            "{lambda:>8} {:>10.2} {:>10.4}",
            complexity_value(&x),
            glcm_features(&x, &glcm)?.0
        );
        write_png(out.join(format!("lambda{lambda:+}.png")), &x)?;
    }
    println!("images in {}", out.display());
    Ok(())
}
