//! The eleven canonical variants of one scene, written as PNGs.
//!
//!     cargo run --release --example generate_suite [OUT_DIR]

use std::path::PathBuf;

use attr_forge::diffusion::NoiseSchedule;
use attr_forge::editor::{generate_suite, EditorPrior, SuiteConfig, SuiteModels};
use attr_forge::eval::toy::{toy_class_names, toy_dataset};
use attr_forge::eval::{predict, train_toy_classifier, FeatureMap, TrainConfig};
use attr_forge::grid::io::write_png;
use attr_forge::grid::ImageGrid;
use attr_forge::math::softmax;

fn main() -> attr_forge::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/generate_suite".into()));
    std::fs::create_dir_all(&out).map_err(|e| attr_forge::Error::io(&out, e))?;
    let classes = toy_class_names();
    let train: Vec<(ImageGrid, usize)> = toy_dataset(1, 300, 32).into_iter().map(|s| (s.image, s.label)).collect();
    let (clf, _) = train_toy_classifier(&train, classes.clone(), FeatureMap::default(), &TrainConfig::default())?;
    let library: Vec<ImageGrid> = toy_dataset(3, 32, 32).into_iter().map(|s| s.image).collect();
    let backgrounds: Vec<ImageGrid> = toy_dataset(4, 32, 32).into_iter().map(|s| s.background).collect();
    let models = SuiteModels {
        editor: EditorPrior::Library(&library),
        backgrounds: &backgrounds,
        adversary: &clf,
    };
    let sched = NoiseSchedule::scaled_linear(100)?;
    let scene = toy_dataset(2, 1, 32).remove(0);

    let suite = generate_suite(&scene.image, &scene.mask, scene.label, 0, &models, &SuiteConfig::default(), &sched)?;
    write_png(out.join("original.png"), &scene.image)?;
    println!("true class {}", classes[scene.label]);
    for v in &suite {
        let (p, logits) = predict(&clf, &v.image)?;
        println!("{:<17} predicted {:<8} p = {:.3}", v.name, classes[p], softmax(&logits)[p]);
        write_png(out.join(format!("{}.png", v.name)), &v.image)?;
    }
    println!("images in {}", out.display());
    Ok(())
}
