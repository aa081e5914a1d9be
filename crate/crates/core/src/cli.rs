//! `factorforge` command line.
//!
//! Every failure prints one line `error: <category>: <message>` to stderr.
//! Usage errors exit with 2, domain errors with 1. All file outputs are
//! written to a temporary file and renamed into place.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::basis::{compute_basis, FactorBasis};
use crate::coords::{coords_from_matrix, coords_to_matrix, project_batch, LatentBatch};
use crate::error::{Error, Result};
use crate::matcore::io::{read_matrix, write_atomic, write_matrix};
use crate::pipeline::{
    baseline_draws, load_labeler, mean_pairwise_distance, metric_by_name, render_batch,
    retention_rate, run_comparison, save_labeler, stack_batches, ExperimentConfig, GeneratorSpec,
};
use crate::rng::Seed;
use crate::sampler::generate_for_category;
use crate::semantics::{
    compute_ranges, load_labels, partition_by_label, save_labels, Category, CategoryRangeTable,
    SemanticLabel,
};

pub const THREADS_ENV: &str = "FACTORFORGE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "factorforge",
    version,
    about = "Latent factor basis, range tables and box resampling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Factor basis (top-k eigenvectors of WᵀW) from a weight matrix.
    Basis {
        #[arg(long)]
        weights: PathBuf,
        /// Number of directions; defaults to all of them.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Project latents (FCK1 rows) onto a basis.
    Project {
        #[arg(long)]
        basis: PathBuf,
        #[arg(long)]
        latents: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-category coordinate ranges from coordinates and labels.
    Ranges {
        #[arg(long)]
        coords: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Box-sample coordinates for one category and reconstruct latents.
    Sample {
        #[arg(long)]
        ranges: PathBuf,
        #[arg(long)]
        basis: PathBuf,
        #[arg(long)]
        category: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rejection-sampling baseline: latents and labels per category.
    Baseline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "max-draws", default_value_t = 1_000_000)]
        max_draws: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Diversity and retention of a latent batch for one category.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        latents: PathBuf,
        #[arg(long)]
        category: String,
        #[arg(long, default_value = "euclidean")]
        metric: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full comparison on the built-in synthetic generator.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Image dimension; defaults to --dim.
    #[arg(long = "image-dim")]
    pub image_dim: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long = "max-draws", default_value_t = 1_000_000)]
    pub max_draws: u64,
    #[arg(long, default_value = "euclidean")]
    pub metric: String,
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
    /// Also write the synthetic generator, labeler and a config file here.
    #[arg(long = "models-dir")]
    pub models_dir: Option<PathBuf>,
}

impl DemoArgs {
    pub fn config(&self) -> ExperimentConfig {
        ExperimentConfig {
            latent_dim: self.dim,
            image_dim: self.image_dim.unwrap_or(self.dim),
            k: self.k,
            n_per_category: self.n,
            max_draws: self.max_draws,
            seed: self.seed,
            metric: self.metric.clone(),
            ..ExperimentConfig::default()
        }
    }
}

/// Pointers to a persisted generator and labeler, relative to the config
/// file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub generator: PathBuf,
    pub labeler: PathBuf,
}

impl ModelConfig {
    pub fn load(path: &Path) -> Result<(GeneratorSpec, crate::semantics::LabelerSpec)> {
        let cfg: ModelConfig = serde_json::from_slice(&fs::read(path)?)
            .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        let dir = parent_dir(path);
        let generator = GeneratorSpec::load(dir.join(&cfg.generator))?;
        let labeler = load_labeler(dir.join(&cfg.labeler))?;
        if labeler.dim() != generator.image_dim() {
            return Err(Error::format(format!(
                "labeler dimension {} does not match generator image dimension {}",
                labeler.dim(),
                generator.image_dim()
            )));
        }
        Ok((generator, labeler))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub index: usize,
    pub name: String,
    pub n: usize,
    pub metric: String,
    pub diversity: f64,
    pub retention: f64,
}

/// Process entry point: configures the worker pool from the environment,
/// runs the command line, and returns the exit code.
pub fn main_exit_code() -> i32 {
    if let Err(e) = configure_threads() {
        report_error(&e);
        return 1;
    }
    run(std::env::args_os())
}

fn configure_threads() -> Result<()> {
    let Some(raw) = std::env::var_os(THREADS_ENV) else {
        return Ok(());
    };
    let threads = raw
        .to_str()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .ok_or_else(|| {
            Error::invalid_argument(format!(
                "{THREADS_ENV} must be a positive integer, got {raw:?}"
            ))
        })?;
    // Fails only if a pool already exists, which is harmless.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let rendered = e.to_string();
            let first = rendered
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid usage")
                .trim_start_matches("error: ");
            eprintln!("error: usage: {first}");
            return 2;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            report_error(&e);
            1
        }
    }
}

fn report_error(e: &Error) {
    let msg = e.to_string().replace('\n', " ");
    eprintln!("error: {}: {msg}", e.category());
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Basis { weights, k, out } => {
            check_input(&weights)?;
            check_output(&out)?;
            let w = read_matrix(&weights)?;
            let k = k.unwrap_or(w.cols());
            compute_basis(&w, k)?.save(&out)
        }
        Command::Project {
            basis,
            latents,
            out,
        } => {
            check_input(&basis)?;
            check_input(&latents)?;
            check_output(&out)?;
            let basis = FactorBasis::load(&basis)?;
            let batch = LatentBatch::new(read_matrix(&latents)?);
            let coords = project_batch(&basis, &batch)?;
            write_matrix(&out, &coords_to_matrix(&coords, basis.k())?)
        }
        Command::Ranges {
            coords,
            labels,
            out,
        } => {
            check_input(&coords)?;
            check_input(&labels)?;
            check_output(&out)?;
            let coords = coords_from_matrix(&read_matrix(&coords)?);
            let labels: Vec<SemanticLabel> =
                load_labels(&labels)?.iter().map(|r| r.label()).collect();
            compute_ranges(&partition_by_label(&coords, &labels)?)?.save(&out)
        }
        Command::Sample {
            ranges,
            basis,
            category,
            n,
            seed,
            out,
        } => {
            check_input(&ranges)?;
            check_input(&basis)?;
            check_output(&out)?;
            let category = Category::from_name(&category)
                .ok_or_else(|| Error::EmptyCategory(category.clone()))?;
            let table = CategoryRangeTable::load(&ranges)?;
            let basis = FactorBasis::load(&basis)?;
            let batch = generate_for_category(&table, &basis, category, n, Seed(seed))?;
            write_matrix(&out, batch.as_matrix())
        }
        Command::Baseline {
            config,
            n,
            seed,
            max_draws,
            out,
        } => {
            check_input(&config)?;
            check_output(&out.join("latents.fck")).or_else(|_| check_output(&out))?;
            let (generator, labeler) = ModelConfig::load(&config)?;
            let outcome = baseline_draws(&generator, &labeler, n, Seed(seed), max_draws)?;
            let unfilled = outcome.unfilled();
            if !unfilled.is_empty() {
                return Err(Error::BudgetExhausted {
                    max_draws,
                    unfilled: unfilled.iter().map(|c| c.name().to_string()).collect(),
                });
            }
            let d = generator.latent_dim();
            let batches: std::collections::BTreeMap<Category, LatentBatch> = Category::all()
                .map(|c| Ok((c, outcome.batch(c, d)?)))
                .collect::<Result<_>>()?;
            fs::create_dir_all(&out)?;
            for (c, batch) in &batches {
                write_matrix(out.join(format!("{}.fck", c.name())), batch.as_matrix())?;
            }
            write_matrix(out.join("latents.fck"), &stack_batches(&batches, d)?)?;
            save_labels(out.join("labels.json"), &outcome.label_records())?;
            println!("draws {}", outcome.draws);
            Ok(())
        }
        Command::Evaluate {
            config,
            latents,
            category,
            metric,
            out,
        } => {
            check_input(&config)?;
            check_input(&latents)?;
            if let Some(out) = &out {
                check_output(out)?;
            }
            let category = Category::from_name(&category)
                .ok_or_else(|| Error::invalid_argument(format!("unknown category {category:?}")))?;
            let metric = metric_by_name(&metric)?;
            let (generator, labeler) = ModelConfig::load(&config)?;
            let batch = LatentBatch::new(read_matrix(&latents)?);
            let images = render_batch(&generator, &batch)?;
            let report = EvaluationReport {
                index: category.index(),
                name: category.name().to_string(),
                n: batch.len(),
                metric: metric.name().to_string(),
                diversity: mean_pairwise_distance(&images, metric.as_ref())?,
                retention: retention_rate(&batch, &generator, &labeler, category)?,
            };
            let mut bytes =
                serde_json::to_vec_pretty(&report).map_err(|e| Error::format(e.to_string()))?;
            bytes.push(b'\n');
            match out {
                Some(out) => write_atomic(out, &bytes),
                None => {
                    print!("{}", String::from_utf8_lossy(&bytes));
                    Ok(())
                }
            }
        }
        Command::Demo(args) => {
            check_output(&args.out)?;
            let config = args.config();
            config.validate()?;
            if let Some(dir) = &args.models_dir {
                fs::create_dir_all(dir)?;
                let (generator, labeler) = config.models()?;
                generator.save(dir.join("generator.json"))?;
                save_labeler(&labeler, dir.join("labeler.json"))?;
                let cfg = ModelConfig {
                    generator: "generator.json".into(),
                    labeler: "labeler.json".into(),
                };
                let mut bytes =
                    serde_json::to_vec_pretty(&cfg).map_err(|e| Error::format(e.to_string()))?;
                bytes.push(b'\n');
                write_atomic(dir.join("config.json"), &bytes)?;
            }
            let report = run_comparison(&config)?;
            write_atomic(&args.out, &report.to_json()?)?;
            print!("{}", report.render_table());
            Ok(())
        }
    }
}

fn check_input(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("input file {} does not exist", path.display()),
        )));
    }
    Ok(())
}

fn check_output(path: &Path) -> Result<()> {
    let dir = parent_dir(path);
    if !dir.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("output directory {} does not exist", dir.display()),
        )));
    }
    if path.is_dir() {
        return Err(Error::invalid_argument(format!(
            "output path {} is a directory",
            path.display()
        )));
    }
    Ok(())
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}
