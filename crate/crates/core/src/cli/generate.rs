use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::Args;
use rayon::prelude::*;
use serde::Deserialize;

use super::{load_classifier, relative_path, Priors, RunConfig};
use crate::diffusion::NoiseSchedule;
use crate::editor::{generate_variants, SuiteConfig, SuiteModels};
use crate::error::{Error, Result};
use crate::eval::ToyClassifier;
use crate::grid::io::{png_bytes, read_image_any, read_mask_png, write_atomic};
use crate::grid::RngStream;
use crate::manifest::{resolve, sha256_hex, ManifestEntry, SuiteManifest, VariantRecord};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// CSV with columns `image,mask,label`; paths relative to the list.
    #[arg(long)]
    list: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    classifier: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    library: Option<PathBuf>,
    #[arg(long)]
    backgrounds: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
struct ListRow {
    image: String,
    mask: String,
    label: usize,
}

fn read_list(path: &Path) -> Result<Vec<ListRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<ListRow>, _>>()
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}

/// Seed of one list entry, derived from the global seed and the image path
/// as written in the list.
pub fn entry_seed(global: u64, image: &str) -> u64 {
    RngStream::named(global, image).next_u64()
}

struct Job<'a> {
    out_dir: &'a Path,
    list_dir: &'a Path,
    suite: &'a SuiteConfig,
    sched: &'a NoiseSchedule,
    models: SuiteModels<'a>,
    seed: u64,
    previous: &'a BTreeMap<(String, String), ManifestEntry>,
}

impl Job<'_> {
    /// Builds or refreshes one entry. Returns it and whether anything was
    /// written.
    fn entry(&self, index: usize, row: &ListRow) -> (ManifestEntry, Result<bool>) {
        let image_path = resolve(self.list_dir, &row.image);
        let mask_path = resolve(self.list_dir, &row.mask);
        let seed = entry_seed(self.seed, &row.image);
        let mut entry = ManifestEntry {
            source: relative_path(&image_path, self.out_dir),
            mask: relative_path(&mask_path, self.out_dir),
            label: row.label,
            seed,
            variants: Vec::new(),
            error: None,
        };
        let outcome = self.fill(index, &image_path, &mask_path, &mut entry);
        if let Err(e) = &outcome {
            entry.variants.clear();
            entry.error = Some(e.to_string());
        }
        (entry, outcome)
    }

    fn fill(&self, index: usize, image_path: &Path, mask_path: &Path, entry: &mut ManifestEntry) -> Result<bool> {
        let image = read_image_any(image_path)?;
        let mask = read_mask_png(mask_path)?;
        let stem = image_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let dir = format!("{index:04}-{stem}");
        let specs = self.suite.specs(entry.seed);
        let old = self.previous.get(&(entry.source.clone(), entry.mask.clone()));

        // A variant is reusable when its record matches and the file on disk
        // still has the recorded hash.
        let mut records: Vec<Option<VariantRecord>> = specs
            .iter()
            .map(|(name, spec)| {
                let output = format!("{dir}/{name}.png");
                let rec = old?.variants.iter().find(|v| v.name == *name)?;
                if old?.label != entry.label || old?.seed != entry.seed || rec.spec != *spec || rec.output != output {
                    return None;
                }
                let bytes = std::fs::read(self.out_dir.join(&output)).ok()?;
                (sha256_hex(&bytes) == rec.sha256).then(|| rec.clone())
            })
            .collect();
        let missing: Vec<&str> = specs
            .iter()
            .zip(&records)
            .filter(|(_, r)| r.is_none())
            .map(|((name, _), _)| *name)
            .collect();
        let mut wrote = false;
        if !missing.is_empty() {
            let variants = generate_variants(
                &image,
                &mask,
                entry.label,
                entry.seed,
                &self.models,
                self.suite,
                self.sched,
                &missing,
            )?;
            for v in variants {
                let output = format!("{dir}/{}.png", v.name);
                let bytes = png_bytes(&v.image)?;
                let path = self.out_dir.join(&output);
                if std::fs::read(&path).ok().as_deref() != Some(&bytes[..]) {
                    write_atomic(&path, &bytes)?;
                    wrote = true;
                }
                let slot = specs.iter().position(|(n, _)| *n == v.name).expect("variant was requested");
                records[slot] = Some(VariantRecord {
                    name: v.name.to_string(),
                    spec: v.spec,
                    output,
                    sha256: sha256_hex(&bytes),
                });
            }
        }
        entry.variants = records
            .into_iter()
            .map(|r| r.ok_or_else(|| Error::Internal("variant left unfilled".into())))
            .collect::<Result<_>>()?;
        Ok(wrote)
    }
}

/// Writes `manifest` unless the file already holds the same bytes.
fn save_if_changed(path: &Path, manifest: &SuiteManifest) -> Result<()> {
    let json = manifest.to_json();
    if std::fs::read(path).ok().as_deref() == Some(json.as_bytes()) {
        return Ok(());
    }
    write_atomic(path, json.as_bytes())
}

pub fn run(cfg: &mut RunConfig, args: GenerateArgs) -> Result<()> {
    if let Some(p) = args.library {
        cfg.denoiser.library = Some(p);
    }
    if let Some(p) = args.backgrounds {
        cfg.denoiser.backgrounds = Some(p);
    }
    if let Some(p) = args.classifier {
        cfg.io.classifier = Some(p);
    }
    if let Some(p) = args.out_dir {
        cfg.io.out_dir = Some(p);
    }
    if let Some(s) = args.seed {
        cfg.suite.seed = s;
    }
    cfg.validate()?;
    let out_dir = cfg
        .io
        .out_dir
        .clone()
        .ok_or_else(|| Error::Config("an output directory is required (--out-dir or io.out_dir)".into()))?;
    if cfg.denoiser.backgrounds.is_none() {
        return Err(Error::Config("suite generation needs denoiser.backgrounds (--backgrounds)".into()));
    }
    let rows = read_list(&args.list)?;
    if rows.is_empty() {
        return Err(Error::Config(format!("{} lists no images", args.list.display())));
    }
    let classifier: ToyClassifier = load_classifier(cfg.io.classifier.as_deref())?;
    let priors = Priors::load(cfg)?;
    let sched = cfg.schedule()?;
    let suite = cfg.suite_config();
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let manifest_path = out_dir.join(MANIFEST_FILE);

    let previous: BTreeMap<(String, String), ManifestEntry> = match SuiteManifest::load(&manifest_path) {
        Ok(m) if m.seed == cfg.suite.seed => m
            .entries
            .into_iter()
            .map(|e| ((e.source.clone(), e.mask.clone()), e))
            .collect(),
        Ok(_) => BTreeMap::new(),
        Err(Error::Io { .. }) => BTreeMap::new(),
        Err(e) => {
            eprintln!("warning: ignoring unreadable {}: {e}", manifest_path.display());
            BTreeMap::new()
        }
    };
    let list_dir = args.list.parent().unwrap_or(Path::new("")).to_path_buf();
    let job = Job {
        out_dir: &out_dir,
        list_dir: &list_dir,
        suite: &suite,
        sched: &sched,
        models: SuiteModels {
            editor: priors.editor(cfg),
            backgrounds: &priors.backgrounds,
            adversary: &classifier,
        },
        seed: cfg.suite.seed,
        previous: &previous,
    };

    let done: Mutex<Vec<Option<ManifestEntry>>> = Mutex::new(vec![None; rows.len()]);
    let outcomes: Vec<Result<bool>> = rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            let (entry, outcome) = job.entry(i, row);
            match &outcome {
                Ok(_) => eprintln!("[{}/{}] {}", i + 1, rows.len(), row.image),
                Err(e) => eprintln!("[{}/{}] {} failed: {e}", i + 1, rows.len(), row.image),
            }
            let mut slots = done.lock().expect("no panics while holding the lock");
            slots[i] = Some(entry);
            if matches!(outcome, Ok(true)) {
                // Checkpoint so an interrupted run can resume.
                let partial = SuiteManifest {
                    seed: cfg.suite.seed,
                    entries: slots.iter().flatten().cloned().collect(),
                };
                partial.save(&manifest_path)?;
            }
            outcome
        })
        .collect();
    let manifest = SuiteManifest {
        seed: cfg.suite.seed,
        entries: done
            .into_inner()
            .expect("no panics while holding the lock")
            .into_iter()
            .flatten()
            .collect(),
    };
    save_if_changed(&manifest_path, &manifest)?;
    let failed = outcomes.iter().filter(|o| o.is_err()).count();
    eprintln!(
        "{} entries, {failed} failed; manifest at {}",
        rows.len(),
        manifest_path.display()
    );
    if failed == rows.len() {
        return Err(outcomes.into_iter().find_map(|o| o.err()).expect("all entries failed"));
    }
    Ok(())
}
