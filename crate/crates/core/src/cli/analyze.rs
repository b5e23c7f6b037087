use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use super::{load_classifier, write_json, RunConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate_suite, Classifier, Inference, ToyClassifier, DEFAULT_CROP_FRACTION};
use crate::grid::io::{read_image_any, write_atomic};
use crate::grid::ImageGrid;
use crate::manifest::{resolve, SuiteManifest};
use crate::math::mean_se;
use crate::metrics::{
    complexity_value, energy_score, frechet_distance, glcm_features, gradnorm_score, score_overlap,
    spectral_features, FeatureStats, GlcmParams,
};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    classifier: Option<PathBuf>,
    /// Where report.csv and report.json go; defaults to the manifest's directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Average softmax over ten crops instead of one full view.
    #[arg(long)]
    tencrop: bool,
    #[arg(long, default_value_t = DEFAULT_CROP_FRACTION)]
    crop_fraction: f64,
}

pub fn evaluate(cfg: &mut RunConfig, args: EvaluateArgs) -> Result<()> {
    if let Some(p) = args.classifier {
        cfg.io.classifier = Some(p);
    }
    cfg.validate()?;
    if !(args.crop_fraction > 0.0 && args.crop_fraction <= 1.0) {
        return Err(Error::Config("--crop-fraction must lie in (0, 1]".into()));
    }
    let classifier = load_classifier(cfg.io.classifier.as_deref())?;
    let manifest = SuiteManifest::load(&args.manifest)?;
    let base = args.manifest.parent().unwrap_or(Path::new("")).to_path_buf();
    let inference = if args.tencrop {
        Inference::TenCrop {
            crop_fraction: args.crop_fraction,
        }
    } else {
        Inference::Single
    };
    let report = evaluate_suite(&classifier, &classifier.classes, &manifest, &base, inference)?;
    let out_dir = args.out_dir.unwrap_or(base);
    write_atomic(&out_dir.join("report.csv"), report.to_csv().as_bytes())?;
    write_atomic(&out_dir.join("report.json"), report.to_json().as_bytes())?;
    for s in &report.skipped {
        eprintln!("skipped {}: {}", s.source, s.reason);
    }
    print!("{}", report.table());
    Ok(())
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Directory of images, or a CSV with an `image` column.
    #[arg(long)]
    images: PathBuf,
    /// Reference set for Fréchet distance and score overlaps.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Adds Energy and GradNorm columns.
    #[arg(long)]
    classifier: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Radial bands of the Fréchet features.
    #[arg(long, default_value_t = 4)]
    bands: usize,
    /// Histogram bins of the overlaps.
    #[arg(long, default_value_t = 20)]
    bins: usize,
    #[arg(long, default_value_t = 8)]
    levels: usize,
}

/// `(name as listed, path)` for every image of a directory or CSV list.
fn list_images(path: &Path) -> Result<Vec<(String, PathBuf)>> {
    if path.is_dir() {
        let mut names: Vec<String> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| {
                let n = n.to_ascii_lowercase();
                n.ends_with(".png") || n.ends_with(".grid")
            })
            .collect();
        names.sort();
        return Ok(names.into_iter().map(|n| (n.clone(), path.join(n))).collect());
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let headers = reader.headers().map_err(|e| Error::format(path, e.to_string()))?.clone();
    let col = headers
        .iter()
        .position(|h| h.trim() == "image")
        .ok_or_else(|| Error::format(path, "no `image` column"))?;
    let base = path.parent().unwrap_or(Path::new(""));
    reader
        .records()
        .map(|r| {
            let r = r.map_err(|e| Error::format(path, e.to_string()))?;
            let name = r.get(col).unwrap_or("").trim().to_string();
            Ok((name.clone(), resolve(base, &name)))
        })
        .collect()
}

fn load_set(path: &Path) -> Result<Vec<(String, ImageGrid)>> {
    let items = list_images(path)?;
    if items.is_empty() {
        return Err(Error::Config(format!("{} has no images", path.display())));
    }
    items
        .into_par_iter()
        .map(|(name, p)| Ok((name, read_image_any(&p)?)))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
struct Row {
    image: String,
    l_c: f64,
    glcm_contrast: f64,
    glcm_dissimilarity: f64,
    energy: Option<f64>,
    gradnorm: Option<f64>,
}

#[derive(Debug, Serialize)]
struct MeanSe {
    mean: f64,
    se: f64,
}

impl MeanSe {
    fn of(v: &[f64]) -> Self {
        let (mean, se) = mean_se(v);
        Self { mean, se }
    }
}

#[derive(Debug, Serialize)]
struct Summary {
    n: usize,
    l_c: MeanSe,
    glcm_contrast: MeanSe,
    glcm_dissimilarity: MeanSe,
    #[serde(skip_serializing_if = "Option::is_none")]
    energy: Option<MeanSe>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gradnorm: Option<MeanSe>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<ReferenceSummary>,
}

#[derive(Debug, Serialize)]
struct ReferenceSummary {
    n: usize,
    frechet: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    energy_overlap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gradnorm_overlap: Option<f64>,
}

fn rows_for(set: &[(String, ImageGrid)], glcm: &GlcmParams, clf: Option<&ToyClassifier>) -> Result<Vec<Row>> {
    set.par_iter()
        .map(|(name, img)| {
            let (contrast, dissimilarity) = glcm_features(img, glcm)?;
            let (energy, gradnorm) = match clf {
                Some(c) => (
                    Some(energy_score(&c.logits(img)?, 1.0)?.value),
                    Some(gradnorm_score(c, img)?.value),
                ),
                None => (None, None),
            };
            Ok(Row {
                image: name.clone(),
                l_c: complexity_value(img),
                glcm_contrast: contrast,
                glcm_dissimilarity: dissimilarity,
                energy,
                gradnorm,
            })
        })
        .collect()
}

pub fn metrics(cfg: &mut RunConfig, args: MetricsArgs) -> Result<()> {
    if let Some(p) = args.classifier {
        cfg.io.classifier = Some(p);
    }
    cfg.validate()?;
    if args.bins == 0 {
        return Err(Error::Config("--bins must be >= 1".into()));
    }
    let glcm = GlcmParams {
        levels: args.levels,
        ..GlcmParams::default()
    };
    let classifier = match &cfg.io.classifier {
        Some(p) => Some(ToyClassifier::load(p)?),
        None => None,
    };
    let set = load_set(&args.images)?;
    let rows = rows_for(&set, &glcm, classifier.as_ref())?;

    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| Error::Internal(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    write_atomic(&args.out, &bytes)?;

    if let Some(path) = &args.summary {
        let col = |f: fn(&Row) -> Option<f64>| -> Option<Vec<f64>> { rows.iter().map(f).collect() };
        let reference = match &args.reference {
            Some(p) => {
                let refs = load_set(p)?;
                let stats = |s: &[(String, ImageGrid)]| {
                    let feats: Vec<Vec<f64>> = s.iter().map(|(_, x)| spectral_features(x, args.bands)).collect();
                    FeatureStats::from_samples(&feats)
                };
                let frechet = frechet_distance(&stats(&refs)?, &stats(&set)?)?;
                let ref_rows = rows_for(&refs, &glcm, classifier.as_ref())?;
                let ref_col = |f: fn(&Row) -> Option<f64>| -> Option<Vec<f64>> { ref_rows.iter().map(f).collect() };
                let overlap = |f: fn(&Row) -> Option<f64>| -> Result<Option<f64>> {
                    match (ref_col(f), col(f)) {
                        (Some(a), Some(b)) => Ok(Some(score_overlap(&a, &b, args.bins)?)),
                        _ => Ok(None),
                    }
                };
                Some(ReferenceSummary {
                    n: refs.len(),
                    frechet,
                    energy_overlap: overlap(|r| r.energy)?,
                    gradnorm_overlap: overlap(|r| r.gradnorm)?,
                })
            }
            None => None,
        };
        let summary = Summary {
            n: rows.len(),
            l_c: MeanSe::of(&col(|r| Some(r.l_c)).unwrap_or_default()),
            glcm_contrast: MeanSe::of(&col(|r| Some(r.glcm_contrast)).unwrap_or_default()),
            glcm_dissimilarity: MeanSe::of(&col(|r| Some(r.glcm_dissimilarity)).unwrap_or_default()),
            energy: col(|r| r.energy).map(|v| MeanSe::of(&v)),
            gradnorm: col(|r| r.gradnorm).map(|v| MeanSe::of(&v)),
            reference,
        };
        write_json(path, &summary)?;
    }
    eprintln!("{} images -> {}", rows.len(), args.out.display());
    Ok(())
}
