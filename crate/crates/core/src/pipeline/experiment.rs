use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generator::{synth_generate, synthetic_models, GeneratorSpec};
use super::metrics::{mean_pairwise_distance, metric_by_name, render_batch, retention_rate};
use crate::basis::{compute_basis, FactorBasis};
use crate::coords::{project_batch, LatentBatch};
use crate::error::{Error, Result};
use crate::matcore::{Matrix, Vector};
use crate::rng::{KeyedStream, Seed};
use crate::sampler::generate_for_category;
use crate::semantics::{
    assign_label, compute_ranges, partition_by_label, AgeBand, Category, CategoryRangeTable,
    Gender, LabelRecord, LabelerSpec, SemanticLabel,
};

const BASELINE_DOMAIN: u64 = 0x4241_5345; // "BASE"
const DRAW_BLOCK: u64 = 2048;

pub const DEFAULT_MODEL_SEED: u64 = 0xFAC3_C00C;

/// Result of running the rejection protocol, whether or not every
/// category filled.
#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    /// Kept latents per category, in draw order.
    pub latents: [Vec<Vector>; Category::COUNT],
    /// Age score of every kept latent, aligned with `latents`.
    pub age_scores: [Vec<f64>; Category::COUNT],
    /// Draw count (1-based) at which each category reached its quota.
    pub filled_at: [Option<u64>; Category::COUNT],
    /// Total draws performed.
    pub draws: u64,
}

impl BaselineOutcome {
    pub fn unfilled(&self) -> Vec<Category> {
        Category::all()
            .filter(|c| self.filled_at[c.index()].is_none())
            .collect()
    }

    pub fn batch(&self, category: Category, dim: usize) -> Result<LatentBatch> {
        let rows = &self.latents[category.index()];
        if rows.is_empty() {
            return Ok(LatentBatch::empty(dim));
        }
        LatentBatch::from_rows(rows)
    }

    /// Label records for every kept latent, category-major.
    pub fn label_records(&self) -> Vec<LabelRecord> {
        Category::all()
            .flat_map(|c| {
                self.age_scores[c.index()]
                    .iter()
                    .map(move |s| LabelRecord::new(SemanticLabel::from(c), *s))
            })
            .collect()
    }
}

/// Noise vector for draw `t`: `d` standard normals keyed by `(seed, t)`.
pub fn baseline_noise(seed: Seed, draw: u64, dim: usize) -> Vec<f64> {
    let stream = KeyedStream::new(seed, BASELINE_DOMAIN, &[draw]);
    (0..dim as u64).map(|j| stream.normal_at(j)).collect()
}

/// Rejection protocol: draw `z ~ N(0, I)`, map to a latent, render, label,
/// and keep the latent if its category still needs samples. Stops once all
/// six categories hold `n_per_category` latents or after `max_draws` draws.
///
/// Draws are labelled in parallel blocks and accepted sequentially, so the
/// outcome depends only on the seed.
pub fn baseline_draws(
    spec: &GeneratorSpec,
    labeler: &LabelerSpec,
    n_per_category: usize,
    seed: Seed,
    max_draws: u64,
) -> Result<BaselineOutcome> {
    if n_per_category == 0 {
        return Err(Error::invalid_argument("n_per_category must be at least 1"));
    }
    if max_draws < n_per_category as u64 {
        return Err(Error::invalid_argument(format!(
            "max_draws {max_draws} is below n_per_category {n_per_category}"
        )));
    }
    if labeler.dim() != spec.image_dim() {
        return Err(Error::invalid_argument(format!(
            "labeler expects images of dimension {}, generator makes {}",
            labeler.dim(),
            spec.image_dim()
        )));
    }
    let d = spec.latent_dim();
    let mut out = BaselineOutcome {
        latents: Default::default(),
        age_scores: Default::default(),
        filled_at: [None; Category::COUNT],
        draws: 0,
    };
    let mut remaining = Category::COUNT;
    let mut start = 0;
    'blocks: while start < max_draws {
        let end = (start + DRAW_BLOCK).min(max_draws);
        let labelled: Vec<(Vector, SemanticLabel, f64)> = (start..end)
            .into_par_iter()
            .map(|t| {
                let w = spec.map_noise(&baseline_noise(seed, t, d))?;
                let image = synth_generate(spec, &w)?;
                let (label, age) = assign_label(labeler, &image)?;
                Ok((w, label, age))
            })
            .collect::<Result<_>>()?;
        for (offset, (w, label, age)) in labelled.into_iter().enumerate() {
            let t = start + offset as u64;
            let c = label.category().index();
            if out.latents[c].len() < n_per_category {
                out.latents[c].push(w);
                out.age_scores[c].push(age);
                if out.latents[c].len() == n_per_category {
                    out.filled_at[c] = Some(t + 1);
                    remaining -= 1;
                    if remaining == 0 {
                        out.draws = t + 1;
                        break 'blocks;
                    }
                }
            }
        }
        out.draws = end;
        start = end;
    }
    Ok(out)
}

/// Runs [`baseline_draws`] and requires every category to fill.
pub fn baseline_collect(
    spec: &GeneratorSpec,
    labeler: &LabelerSpec,
    n_per_category: usize,
    seed: Seed,
    max_draws: u64,
) -> Result<BTreeMap<Category, LatentBatch>> {
    let outcome = baseline_draws(spec, labeler, n_per_category, seed, max_draws)?;
    let unfilled = outcome.unfilled();
    if !unfilled.is_empty() {
        return Err(Error::BudgetExhausted {
            max_draws,
            unfilled: unfilled.iter().map(|c| c.name().to_string()).collect(),
        });
    }
    Category::all()
        .map(|c| Ok((c, outcome.batch(c, spec.latent_dim())?)))
        .collect()
}

/// Settings for one comparison run on the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub latent_dim: usize,
    pub image_dim: usize,
    /// Basis size; `None` means the full basis.
    pub k: Option<usize>,
    pub n_per_category: usize,
    pub max_draws: u64,
    pub seed: u64,
    pub model_seed: u64,
    pub metric: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            latent_dim: 64,
            image_dim: 64,
            k: None,
            n_per_category: 1000,
            max_draws: 1_000_000,
            seed: 1,
            model_seed: DEFAULT_MODEL_SEED,
            metric: "euclidean".to_string(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.image_dim == 0 {
            return Err(Error::invalid_argument("dimensions must be positive"));
        }
        if let Some(k) = self.k {
            if k == 0 || k > self.latent_dim {
                return Err(Error::invalid_argument(format!(
                    "k must lie in 1..={}, got {k}",
                    self.latent_dim
                )));
            }
        }
        if self.n_per_category < 2 {
            return Err(Error::invalid_argument(
                "n_per_category must be at least 2 to measure diversity",
            ));
        }
        if self.max_draws < self.n_per_category as u64 {
            return Err(Error::invalid_argument("max_draws is below n_per_category"));
        }
        metric_by_name(&self.metric)?;
        Ok(())
    }

    /// Generator and labeler this config describes.
    pub fn models(&self) -> Result<(GeneratorSpec, LabelerSpec)> {
        synthetic_models(self.latent_dim, self.image_dim, Seed(self.model_seed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub index: usize,
    pub name: String,
    pub ours_diversity: f64,
    pub baseline_diversity: f64,
    pub retention: f64,
    pub n_ours: usize,
    pub n_baseline: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub metric: String,
    pub categories: Vec<CategoryReport>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut bytes =
            serde_json::to_vec_pretty(self).map_err(|e| Error::format(e.to_string()))?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|e| Error::format(e.to_string()))
    }

    pub fn category(&self, category: Category) -> Option<&CategoryReport> {
        self.categories.iter().find(|c| c.index == category.index())
    }

    /// Diversity grid (age rows × method/gender columns) with the
    /// retention of the box-sampled batches alongside.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed {}  metric {}", self.seed, self.metric);
        let _ = writeln!(
            s,
            "{:<12}| {:>9} {:>9} | {:>9} {:>9} | {:>9} {:>9}",
            "", "ours", "", "baseline", "", "retention", ""
        );
        let _ = writeln!(
            s,
            "{:<12}| {:>9} {:>9} | {:>9} {:>9} | {:>9} {:>9}",
            "", "female", "male", "female", "male", "female", "male"
        );
        let _ = writeln!(s, "{}", "-".repeat(78));
        for (band, label) in [
            (AgeBand::Young, "young"),
            (AgeBand::MiddleAged, "middle-aged"),
            (AgeBand::Old, "old"),
        ] {
            let cell = |g: Gender| self.category(Category::from_parts(g, band));
            let (f, m) = (cell(Gender::Female), cell(Gender::Male));
            let fmt = |r: Option<&CategoryReport>, pick: fn(&CategoryReport) -> f64| {
                r.map_or("-".to_string(), |r| format!("{:.4}", pick(r)))
            };
            let _ = writeln!(
                s,
                "{:<12}| {:>9} {:>9} | {:>9} {:>9} | {:>9} {:>9}",
                label,
                fmt(f, |r| r.ours_diversity),
                fmt(m, |r| r.ours_diversity),
                fmt(f, |r| r.baseline_diversity),
                fmt(m, |r| r.baseline_diversity),
                fmt(f, |r| r.retention),
                fmt(m, |r| r.retention),
            );
        }
        s
    }
}

/// Everything a comparison run produced, for callers that want to check
/// more than the summary numbers.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: ExperimentReport,
    pub basis: FactorBasis,
    pub table: CategoryRangeTable,
    pub baseline: BTreeMap<Category, LatentBatch>,
    pub ours: BTreeMap<Category, LatentBatch>,
}

/// Full comparison on a given generator and labeler:
/// 1. factor basis from the generator's mapping weights,
/// 2. rejection baseline of `n_per_category` latents per category,
/// 3. projection of the baseline latents and per-category range table,
/// 4. `n_per_category` box-sampled latents per category,
/// 5. image-space diversity of both batches and retention of ours.
pub fn run_experiment(
    config: &ExperimentConfig,
    generator: &GeneratorSpec,
    labeler: &LabelerSpec,
) -> Result<ExperimentRun> {
    config.validate()?;
    let metric = metric_by_name(&config.metric)?;
    let seed = Seed(config.seed);
    let n = config.n_per_category;

    let k = config.k.unwrap_or(generator.latent_dim());
    let basis = compute_basis(generator.mapping(), k)?;
    let baseline = baseline_collect(generator, labeler, n, seed, config.max_draws)?;

    let mut coords = Vec::with_capacity(n * Category::COUNT);
    let mut labels = Vec::with_capacity(n * Category::COUNT);
    for (category, batch) in &baseline {
        coords.extend(project_batch(&basis, batch)?);
        labels.extend(std::iter::repeat_n(
            SemanticLabel::from(*category),
            batch.len(),
        ));
    }
    let table = compute_ranges(&partition_by_label(&coords, &labels)?)?;

    let per_category: Vec<(Category, LatentBatch, CategoryReport)> = Category::all()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|category| {
            let base = &baseline[&category];
            let ours = generate_for_category(&table, &basis, category, n, seed)?;
            let ours_images = render_batch(generator, &ours)?;
            let base_images = render_batch(generator, base)?;
            let report = CategoryReport {
                index: category.index(),
                name: category.name().to_string(),
                ours_diversity: mean_pairwise_distance(&ours_images, metric.as_ref())?,
                baseline_diversity: mean_pairwise_distance(&base_images, metric.as_ref())?,
                retention: retention_rate(&ours, generator, labeler, category)?,
                n_ours: ours.len(),
                n_baseline: base.len(),
            };
            Ok((category, ours, report))
        })
        .collect::<Result<_>>()?;

    let mut ours = BTreeMap::new();
    let mut categories = Vec::with_capacity(Category::COUNT);
    for (category, batch, report) in per_category {
        ours.insert(category, batch);
        categories.push(report);
    }
    Ok(ExperimentRun {
        report: ExperimentReport {
            seed: config.seed,
            metric: metric.name().to_string(),
            categories,
        },
        basis,
        table,
        baseline,
        ours,
    })
}

/// [`run_experiment`] on the synthetic generator the config describes.
pub fn run_comparison(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let (generator, labeler) = config.models()?;
    Ok(run_experiment(config, &generator, &labeler)?.report)
}

/// Stacks batches into one matrix, category-major.
pub fn stack_batches(batches: &BTreeMap<Category, LatentBatch>, dim: usize) -> Result<Matrix> {
    let mut data = Vec::new();
    let mut rows = 0;
    for batch in batches.values() {
        if batch.dim() != dim {
            return Err(Error::invalid_argument("batches have unequal dimensions"));
        }
        data.extend_from_slice(batch.as_matrix().as_slice());
        rows += batch.len();
    }
    Matrix::new(rows, dim, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_generator(d: usize) -> GeneratorSpec {
        GeneratorSpec::new(
            Matrix::identity(d),
            Vector::zeros(d),
            Matrix::identity(d),
            Vector::zeros(d),
        )
        .unwrap()
    }

    fn constant_labeler(d: usize, category: Category) -> LabelerSpec {
        let gender_offset = if category.gender() == Gender::Male {
            1.0
        } else {
            -1.0
        };
        let age = match category.age_band() {
            AgeBand::Young => 10.0,
            AgeBand::MiddleAged => 45.0,
            AgeBand::Old => 80.0,
        };
        LabelerSpec::with_default_thresholds(Vector::zeros(d), gender_offset, Vector::zeros(d), age)
            .unwrap()
    }

    #[test]
    fn constant_labeler_fills_one_category() {
        let d = 3;
        let target = Category::new(4).unwrap();
        let outcome = baseline_draws(
            &identity_generator(d),
            &constant_labeler(d, target),
            7,
            Seed(2),
            50,
        )
        .unwrap();
        assert_eq!(outcome.filled_at[target.index()], Some(7));
        assert_eq!(outcome.draws, 50);
        assert_eq!(outcome.unfilled().len(), 5);

        let err = baseline_collect(
            &identity_generator(d),
            &constant_labeler(d, target),
            7,
            Seed(2),
            50,
        )
        .unwrap_err();
        match err {
            Error::BudgetExhausted {
                max_draws,
                unfilled,
            } => {
                assert_eq!(max_draws, 50);
                assert_eq!(unfilled.len(), 5);
                assert!(!unfilled.contains(&"male_middle".to_string()));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn baseline_argument_checks() {
        let g = identity_generator(2);
        let l = constant_labeler(2, Category::new(0).unwrap());
        assert!(matches!(
            baseline_draws(&g, &l, 0, Seed(0), 10),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            baseline_draws(&g, &l, 5, Seed(0), 4),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn label_records_follow_categories() {
        let d = 2;
        let target = Category::new(2).unwrap();
        let outcome = baseline_draws(
            &identity_generator(d),
            &constant_labeler(d, target),
            3,
            Seed(0),
            3,
        )
        .unwrap();
        let records = outcome.label_records();
        assert_eq!(records.len(), 3);
        assert!(records.iter().all(|r| r.index == 2 && r.age_score == 80.0));
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::default();
        assert!(c.validate().is_ok());
        c.n_per_category = 1;
        assert!(c.validate().is_err());
        c = ExperimentConfig {
            k: Some(65),
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c = ExperimentConfig {
            metric: "lpips".into(),
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
