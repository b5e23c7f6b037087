//! How far edited images drift from the originals: Energy and GradNorm score
//! overlaps and the Fréchet distance of spectral features.
//!
//!     cargo run --release --example ood_scores

use attr_forge::diffusion::NoiseSchedule;
use attr_forge::editor::{generate_variants, EditorPrior, SuiteConfig, SuiteModels};
use attr_forge::eval::toy::{toy_class_names, toy_dataset};
use attr_forge::eval::{ood_report, train_toy_classifier, FeatureMap, TrainConfig};
use attr_forge::grid::{ImageGrid, RngStream};
use attr_forge::metrics::{frechet_distance, spectral_features, FeatureStats};

fn frechet(a: &[ImageGrid], b: &[ImageGrid]) -> attr_forge::Result<f64> {
    let stats = |s: &[ImageGrid]| {
        FeatureStats::from_samples(&s.iter().map(|x| spectral_features(x, 4)).collect::<Vec<_>>())
    };
    frechet_distance(&stats(a)?, &stats(b)?)
}

fn main() -> attr_forge::Result<()> {
    let train: Vec<(ImageGrid, usize)> = toy_dataset(1, 600, 32).into_iter().map(|s| (s.image, s.label)).collect();
    let (clf, _) = train_toy_classifier(&train, toy_class_names(), FeatureMap::default(), &TrainConfig::default())?;
    let library: Vec<ImageGrid> = toy_dataset(3, 32, 32).into_iter().map(|s| s.image).collect();
    let backgrounds: Vec<ImageGrid> = toy_dataset(4, 32, 32).into_iter().map(|s| s.background).collect();
    let models = SuiteModels {
        editor: EditorPrior::Library(&library),
        backgrounds: &backgrounds,
        adversary: &clf,
    };
    let sched = NoiseSchedule::scaled_linear(100)?;
    let config = SuiteConfig::default();
    let test = toy_dataset(2, 100, 32);
    let originals: Vec<ImageGrid> = test.iter().map(|s| s.image.clone()).collect();

    let mut sets: Vec<(&str, Vec<ImageGrid>)> = vec![("inver", Vec::new()), ("lambda-pos20", Vec::new())];
    for (i, s) in test.iter().enumerate() {
        let v = generate_variants(&s.image, &s.mask, s.label, i as u64, &models, &config, &sched, &["inver", "lambda-pos20"])?;
        for (set, var) in sets.iter_mut().zip(v) {
            set.1.push(var.image);
        }
    }
    let mut rng = RngStream::new(9, 0);
    sets.push(("noise", (0..originals.len()).map(|_| rng.normal_image(32, 32, 1)).collect()));

    println!("{:<13} {:>14} {:>16} {:>10}", "set", "energy overlap", "GradNorm overlap", "Frechet");
    for (name, set) in &sets {
        let r = ood_report(&clf, &originals, set, 20)?;
        println!(
            "{name:<13} {:>14.3} {:>16.3} {:>10.4}",
            r.energy_overlap,
            r.gradnorm_overlap,
            frechet(&originals, set)?
        );
    }
    Ok(())
}
