//! Dropped-accuracy reports over edited suites.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::classifier::{predict, predict_tencrop, Classifier, LinearHead};
use crate::editor::VARIANT_NAMES;
use crate::error::{Error, Result};
use crate::grid::io::read_image_any;
use crate::grid::ImageGrid;
use crate::manifest::{resolve, SuiteManifest};
use crate::math::mean_se;
use crate::metrics::{energy_score, gradnorm_score, score_overlap};

pub const ORIGINAL: &str = "original";
pub const DEFAULT_CROP_FRACTION: f64 = 0.875;

/// `DA = acc_original − acc`; may be negative.
pub fn dropped_accuracy(acc_original: f64, acc: f64) -> Result<f64> {
    for a in [acc_original, acc] {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidArgument(format!("accuracy {a} outside [0, 1]")));
        }
    }
    Ok(acc_original - acc)
}

/// How images are scored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Inference {
    Single,
    TenCrop { crop_fraction: f64 },
}

impl Inference {
    pub fn predict(&self, classifier: &dyn Classifier, image: &ImageGrid) -> Result<usize> {
        Ok(match *self {
            Inference::Single => predict(classifier, image)?.0,
            Inference::TenCrop { crop_fraction } => predict_tencrop(classifier, image, crop_fraction)?.0,
        })
    }
}

/// Predictions for one source image and its variants.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryResult {
    pub label: usize,
    pub original: usize,
    /// `(variant, predicted label)`
    pub variants: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skipped {
    pub source: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub variant: String,
    pub n: usize,
    pub top1: f64,
    pub top1_se: f64,
    pub da: f64,
    /// Standard error of the paired per-image correctness difference.
    pub da_se: f64,
    /// Per-class DA; `None` when a class has no images.
    pub per_class_da: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeReport {
    pub tencrop: bool,
    pub classes: Vec<String>,
    /// The original row first, then variants in canonical order.
    pub rows: Vec<ReportRow>,
    /// Mean DA over the variant rows.
    pub average_da: f64,
    pub skipped: Vec<Skipped>,
}

impl AttributeReport {
    pub fn from_results(
        classes: &[String],
        results: &[EntryResult],
        skipped: Vec<Skipped>,
        tencrop: bool,
    ) -> Result<Self> {
        if results.is_empty() {
            return Err(Error::InvalidArgument("no evaluable entries".into()));
        }
        let k = classes.len();
        let mut names: Vec<String> = Vec::new();
        for r in results {
            for (v, _) in &r.variants {
                if !names.contains(v) {
                    names.push(v.clone());
                }
            }
        }
        let rank = |v: &str| VARIANT_NAMES.iter().position(|n| *n == v).unwrap_or(usize::MAX);
        names.sort_by(|a, b| rank(a).cmp(&rank(b)).then(a.cmp(b)));

        let correct = |r: &EntryResult, v: &str| -> Option<f64> {
            if v == ORIGINAL {
                return Some(f64::from(u8::from(r.original == r.label)));
            }
            r.variants
                .iter()
                .find(|(n, _)| n == v)
                .map(|(_, p)| f64::from(u8::from(*p == r.label)))
        };
        let mut rows = Vec::new();
        for v in std::iter::once(ORIGINAL.to_string()).chain(names) {
            let pairs: Vec<(f64, f64, usize)> = results
                .iter()
                .filter_map(|r| Some((correct(r, ORIGINAL)?, correct(r, &v)?, r.label)))
                .collect();
            let n = pairs.len();
            let acc: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let orig: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let (top1, _) = mean_se(&acc);
            let (orig_acc, _) = mean_se(&orig);
            let top1_se = (top1 * (1.0 - top1) / n as f64).sqrt();
            let diffs: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
            let (_, da_se) = mean_se(&diffs);
            let mut per_class = BTreeMap::new();
            for (c, name) in classes.iter().enumerate() {
                let sub: Vec<&(f64, f64, usize)> = pairs.iter().filter(|p| p.2 == c).collect();
                let v = if sub.is_empty() {
                    None
                } else {
                    let m = sub.len() as f64;
                    let o = sub.iter().map(|p| p.0).sum::<f64>() / m;
                    let a = sub.iter().map(|p| p.1).sum::<f64>() / m;
                    Some(dropped_accuracy(o, a)?)
                };
                per_class.insert(name.clone(), v);
            }
            debug_assert!(k == per_class.len());
            rows.push(ReportRow {
                variant: v,
                n,
                top1,
                top1_se,
                da: dropped_accuracy(orig_acc, top1)?,
                da_se,
                per_class_da: per_class,
            });
        }
        let variant_das: Vec<f64> = rows[1..].iter().map(|r| r.da).collect();
        let average_da = if variant_das.is_empty() {
            0.0
        } else {
            variant_das.iter().sum::<f64>() / variant_das.len() as f64
        };
        Ok(Self {
            tencrop,
            classes: classes.to_vec(),
            rows,
            average_da,
            skipped,
        })
    }

    pub fn row(&self, variant: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    /// `variant,n,top1,da,<class...>`; floats in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["variant".to_string(), "n".into(), "top1".into(), "da".into()];
        header.extend(self.classes.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.variant.clone(), r.n.to_string(), r.top1.to_string(), r.da.to_string()];
            rec.extend(
                self.classes
                    .iter()
                    .map(|c| r.per_class_da[c].map_or(String::new(), |v| v.to_string())),
            );
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plain-text DA table.
    pub fn table(&self) -> String {
        let mut s = format!("{:<18} {:>5} {:>8} {:>8}\n", "variant", "n", "top1", "da");
        for r in &self.rows {
            s.push_str(&format!("{:<18} {:>5} {:>8.4} {:>8.4}\n", r.variant, r.n, r.top1, r.da));
        }
        s.push_str(&format!("{:<18} {:>5} {:>8} {:>8.4}\n", "average", "", "", self.average_da));
        s
    }
}

/// Scores in-memory images; each item is `(original, label, variants)`.
pub fn evaluate_images(
    classifier: &dyn Classifier,
    classes: &[String],
    items: &[(ImageGrid, usize, Vec<(String, ImageGrid)>)],
    inference: Inference,
) -> Result<AttributeReport> {
    let results: Vec<EntryResult> = items
        .par_iter()
        .map(|(img, label, vars)| {
            Ok(EntryResult {
                label: *label,
                original: inference.predict(classifier, img)?,
                variants: vars
                    .iter()
                    .map(|(n, v)| Ok((n.clone(), inference.predict(classifier, v)?)))
                    .collect::<Result<_>>()?,
            })
        })
        .collect::<Result<_>>()?;
    AttributeReport::from_results(classes, &results, Vec::new(), matches!(inference, Inference::TenCrop { .. }))
}

/// Scores every manifest entry that has all eleven variants on disk; the
/// rest are listed as skipped with their reason.
pub fn evaluate_suite(
    classifier: &dyn Classifier,
    classes: &[String],
    manifest: &SuiteManifest,
    base_dir: &Path,
    inference: Inference,
) -> Result<AttributeReport> {
    let outcomes: Vec<std::result::Result<EntryResult, Skipped>> = manifest
        .entries
        .par_iter()
        .map(|e| {
            let skip = |reason: String| Skipped {
                source: e.source.clone(),
                reason,
            };
            if let Some(err) = &e.error {
                return Err(skip(err.clone()));
            }
            if e.label >= classes.len() {
                return Err(skip(Error::InvalidLabel { label: e.label, classes: classes.len() }.to_string()));
            }
            let load = |p: &str| read_image_any(resolve(base_dir, p)).map_err(|err| skip(err.to_string()));
            let original = load(&e.source)?;
            let mut variants = Vec::with_capacity(VARIANT_NAMES.len());
            for name in VARIANT_NAMES {
                let rec = e.variants.iter().find(|v| v.name == name).ok_or_else(|| {
                    skip(
                        Error::MissingVariant {
                            source_path: e.source.clone(),
                            variant: name.to_string(),
                        }
                        .to_string(),
                    )
                })?;
                let img = load(&rec.output)?;
                let p = inference.predict(classifier, &img).map_err(|err| skip(err.to_string()))?;
                variants.push((name.to_string(), p));
            }
            let orig = inference
                .predict(classifier, &original)
                .map_err(|err| skip(err.to_string()))?;
            Ok(EntryResult {
                label: e.label,
                original: orig,
                variants,
            })
        })
        .collect();
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => results.push(r),
            Err(s) => skipped.push(s),
        }
    }
    AttributeReport::from_results(classes, &results, skipped, matches!(inference, Inference::TenCrop { .. }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OodReport {
    pub energy_overlap: f64,
    pub gradnorm_overlap: f64,
    pub energy_mean: (f64, f64),
    pub gradnorm_mean: (f64, f64),
}

/// Energy (T = 1) and GradNorm score distributions of both sets and their
/// histogram overlap.
pub fn ood_report(
    classifier: &dyn LinearHead,
    originals: &[ImageGrid],
    edited: &[ImageGrid],
    bins: usize,
) -> Result<OodReport> {
    if originals.is_empty() || edited.is_empty() {
        return Err(Error::InvalidArgument("OOD report needs two nonempty sets".into()));
    }
    let scores = |set: &[ImageGrid]| -> Result<(Vec<f64>, Vec<f64>)> {
        let pairs: Vec<(f64, f64)> = set
            .par_iter()
            .map(|x| {
                let z = classifier.logits(x)?;
                Ok((energy_score(&z, 1.0)?.value, gradnorm_score(classifier, x)?.value))
            })
            .collect::<Result<_>>()?;
        Ok(pairs.into_iter().unzip())
    };
    let (e0, g0) = scores(originals)?;
    let (e1, g1) = scores(edited)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(OodReport {
        energy_overlap: score_overlap(&e0, &e1, bins)?,
        gradnorm_overlap: score_overlap(&g0, &g1, bins)?,
        energy_mean: (mean(&e0), mean(&e1)),
        gradnorm_mean: (mean(&g0), mean(&g1)),
    })
}
