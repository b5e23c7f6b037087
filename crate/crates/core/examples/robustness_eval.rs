//! Dropped accuracy of a toy classifier on every variant of a small test set,
//! with single-view and ten-crop inference.
//!
//!     cargo run --release --example robustness_eval [N]

use attr_forge::diffusion::NoiseSchedule;
use attr_forge::editor::{generate_suite, EditorPrior, SuiteConfig, SuiteModels};
use attr_forge::eval::toy::{toy_class_names, toy_dataset};
use attr_forge::eval::{
    evaluate_images, train_toy_classifier, FeatureMap, Inference, TrainConfig, DEFAULT_CROP_FRACTION,
};
use attr_forge::grid::ImageGrid;
use rayon::prelude::*;

fn main() -> attr_forge::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let classes = toy_class_names();
    let train: Vec<(ImageGrid, usize)> = toy_dataset(1, 600, 32).into_iter().map(|s| (s.image, s.label)).collect();
    let (clf, losses) = train_toy_classifier(&train, classes.clone(), FeatureMap::default(), &TrainConfig::default())?;
    println!("trained: final loss {:.4}", losses.last().copied().unwrap_or(f64::NAN));

    let library: Vec<ImageGrid> = toy_dataset(3, 32, 32).into_iter().map(|s| s.image).collect();
    let backgrounds: Vec<ImageGrid> = toy_dataset(4, 32, 32).into_iter().map(|s| s.background).collect();
    let models = SuiteModels {
        editor: EditorPrior::Library(&library),
        backgrounds: &backgrounds,
        adversary: &clf,
    };
    let sched = NoiseSchedule::scaled_linear(100)?;
    let config = SuiteConfig::default();
    let test = toy_dataset(2, n, 32);
    let items: Vec<(ImageGrid, usize, Vec<(String, ImageGrid)>)> = test
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let suite = generate_suite(&s.image, &s.mask, s.label, i as u64, &models, &config, &sched)?;
            let variants = suite.into_iter().map(|v| (v.name.to_string(), v.image)).collect();
            Ok((s.image.clone(), s.label, variants))
        })
        .collect::<attr_forge::Result<_>>()?;

    let single = evaluate_images(&clf, &classes, &items, Inference::Single)?;
    println!("single view\n{}", single.table());
    let ten = evaluate_images(&clf, &classes, &items, Inference::TenCrop { crop_fraction: DEFAULT_CROP_FRACTION })?;
    println!("ten-crop\n{}", ten.table());
    Ok(())
}
