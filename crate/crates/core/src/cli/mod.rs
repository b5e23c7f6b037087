//! The `attr-forge` command line.
//!
//! Every command reads an optional TOML [`RunConfig`]; flags override it.
//! Errors go to standard error and map to exit codes 2 (usage or
//! validation), 3 (I/O or malformed file) and 4 (internal).

mod analyze;
mod config;
mod edit;
mod generate;
mod train;

use std::ffi::OsString;
use std::path::{Component, Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

pub use config::{
    DenoiserKind, DenoiserSection, GuidanceSection, IoSection, RunConfig, RunSection, ScheduleSection,
    SuiteSection,
};

use crate::editor::EditorPrior;
use crate::error::{Error, Result};
use crate::eval::ToyClassifier;
use crate::grid::io::read_image_dir;
use crate::grid::ImageGrid;

pub const THREADS_ENV: &str = "ATTRFORGE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "attr-forge", version, about = "Diffusion-based object attribute editing and robustness evaluation")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; 0 picks automatically. ATTRFORGE_THREADS wins.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply one attribute edit to an image.
    Edit(edit::EditArgs),
    /// Build the eleven-variant suite for every image of a list.
    Generate(generate::GenerateArgs),
    /// Score a suite manifest with a classifier.
    Evaluate(analyze::EvaluateArgs),
    /// Per-image complexity, texture and OOD scores.
    Metrics(analyze::MetricsArgs),
    /// Train the toy classifier.
    Train(train::TrainArgs),
    /// Print the JSON schemas of the file formats.
    Schema {
        #[arg(value_enum, default_value = "all")]
        which: SchemaKind,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemaKind {
    All,
    Manifest,
    Spec,
    Report,
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(t) = cli.threads {
        cfg.run.threads = t;
    }
    if let Ok(v) = std::env::var(THREADS_ENV) {
        cfg.run.threads = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV}={v:?} is not a thread count")))?;
    }
    if cfg.run.threads > 0 {
        // Fails only if the pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.run.threads)
            .build_global();
    }
    match cli.command {
        Command::Edit(a) => edit::run(&mut cfg, a),
        Command::Generate(a) => generate::run(&mut cfg, a),
        Command::Evaluate(a) => analyze::evaluate(&mut cfg, a),
        Command::Metrics(a) => analyze::metrics(&mut cfg, a),
        Command::Train(a) => train::run(a),
        Command::Schema { which } => {
            let v = match which {
                SchemaKind::Manifest => crate::manifest::manifest_schema(),
                SchemaKind::Spec => crate::manifest::spec_schema(),
                SchemaKind::Report => crate::manifest::report_schema(),
                SchemaKind::All => serde_json::json!({
                    "manifest": crate::manifest::manifest_schema(),
                    "spec": crate::manifest::spec_schema(),
                    "report": crate::manifest::report_schema(),
                }),
            };
            println!("{}", serde_json::to_string_pretty(&v).expect("schema serializes"));
            Ok(())
        }
    }
}

/// Images the denoisers are built from, as named by the config.
struct Priors {
    library: Vec<ImageGrid>,
    backgrounds: Vec<ImageGrid>,
}

impl Priors {
    fn load(cfg: &RunConfig) -> Result<Self> {
        let dir = |p: &Option<PathBuf>| -> Result<Vec<ImageGrid>> {
            match p {
                Some(p) => read_image_dir(p),
                None => Ok(Vec::new()),
            }
        };
        Ok(Self {
            library: match cfg.denoiser.kind {
                DenoiserKind::Empirical => dir(&cfg.denoiser.library)?,
                DenoiserKind::Gaussian => Vec::new(),
            },
            backgrounds: dir(&cfg.denoiser.backgrounds)?,
        })
    }

    fn editor<'a>(&'a self, cfg: &RunConfig) -> EditorPrior<'a> {
        match cfg.denoiser.kind {
            DenoiserKind::Empirical => EditorPrior::Library(&self.library),
            DenoiserKind::Gaussian => EditorPrior::Gaussian {
                variance: cfg.denoiser.variance,
            },
        }
    }
}

fn load_classifier(path: Option<&Path>) -> Result<ToyClassifier> {
    let path = path.ok_or_else(|| Error::Config("a classifier checkpoint is required (--classifier or io.classifier)".into()))?;
    ToyClassifier::load(path)
}

/// `path` relative to `base` with `/` separators, or `path` as given when
/// either cannot be resolved.
fn relative_path(path: &Path, base: &Path) -> String {
    let (Ok(p), Ok(b)) = (path.canonicalize(), base.canonicalize()) else {
        return path.to_string_lossy().into_owned();
    };
    let common = p
        .components()
        .zip(b.components())
        .take_while(|(x, y)| x == y)
        .count();
    let mut parts: Vec<String> = b.components().skip(common).map(|_| "..".to_string()).collect();
    parts.extend(p.components().skip(common).filter_map(|c| match c {
        Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
        _ => None,
    }));
    parts.join("/")
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    s.push('\n');
    crate::grid::io::write_atomic(path, s.as_bytes())
}
