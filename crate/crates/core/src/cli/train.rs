use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::eval::toy::{toy_class_names, toy_dataset};
use crate::eval::{predict, train_toy_classifier, Augment, FeatureMap, TrainConfig};
use crate::grid::io::read_image_any;
use crate::grid::ImageGrid;
use crate::manifest::resolve;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    /// CSV with columns `image,label`; without it, toy scenes are drawn.
    #[arg(long)]
    list: Option<PathBuf>,
    /// Class names for `--list`, comma separated.
    #[arg(long, value_delimiter = ',')]
    classes: Vec<String>,
    /// Number of toy scenes.
    #[arg(long, default_value_t = 600)]
    n: usize,
    /// Toy scene side length.
    #[arg(long, default_value_t = 32)]
    size: usize,
    #[arg(long, default_value_t = 1)]
    data_seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    /// Augmented views per image.
    #[arg(long)]
    views: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Side of the box-average feature grid.
    #[arg(long, default_value_t = FeatureMap::default().grid)]
    grid: usize,
}

#[derive(Debug, Deserialize)]
struct Row {
    image: String,
    label: usize,
}

fn read_labeled(path: &Path) -> Result<Vec<(ImageGrid, usize)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    reader
        .deserialize()
        .map(|r| {
            let r: Row = r.map_err(|e| Error::format(path, e.to_string()))?;
            Ok((read_image_any(resolve(base, &r.image))?, r.label))
        })
        .collect()
}

pub fn run(args: TrainArgs) -> Result<()> {
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        epochs: args.epochs.unwrap_or(defaults.epochs),
        lr: args.lr.unwrap_or(defaults.lr),
        l2: args.l2.unwrap_or(defaults.l2),
        seed: args.seed.unwrap_or(defaults.seed),
        augment: Augment {
            views: args.views.unwrap_or(defaults.augment.views),
            ..defaults.augment
        },
    };
    if args.grid == 0 {
        return Err(Error::Config("--grid must be >= 1".into()));
    }
    let (data, classes) = match &args.list {
        Some(list) => {
            if args.classes.len() < 2 {
                return Err(Error::Config("--list needs --classes with at least two names".into()));
            }
            (read_labeled(list)?, args.classes.clone())
        }
        None => {
            if args.size < 8 || args.n == 0 {
                return Err(Error::Config("toy data needs --n >= 1 and --size >= 8".into()));
            }
            let scenes = toy_dataset(args.data_seed, args.n, args.size);
            (scenes.into_iter().map(|s| (s.image, s.label)).collect(), toy_class_names())
        }
    };
    let feature_map = FeatureMap {
        grid: args.grid,
        ..FeatureMap::default()
    };
    let (model, losses) = train_toy_classifier(&data, classes, feature_map, &config)?;
    let correct = data
        .iter()
        .map(|(x, y)| predict(&model, x).map(|(p, _)| (p == *y) as usize))
        .sum::<Result<usize>>()?;
    model.save(&args.out)?;
    eprintln!(
        "trained on {} images: final loss {:.4}, train accuracy {:.3}; wrote {}",
        data.len(),
        losses.last().copied().unwrap_or(f64::NAN),
        correct as f64 / data.len() as f64,
        args.out.display()
    );
    Ok(())
}
