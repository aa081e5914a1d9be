//! Diversity and label-retention scores.

use rayon::prelude::*;

use super::generator::{synth_generate, GeneratorSpec};
use crate::coords::LatentBatch;
use crate::error::{Error, Result};
use crate::matcore::{dot, norm};
use crate::semantics::{assign_label, Category, LabelerSpec};

/// Pairwise distance between image vectors. Implementations must be
/// symmetric and deterministic.
pub trait Distance: Send + Sync {
    fn name(&self) -> &'static str;
    fn distance(&self, a: &[f64], b: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl Distance for Euclidean {
    fn name(&self) -> &'static str {
        "euclidean"
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Manhattan;

impl Distance for Manhattan {
    fn name(&self) -> &'static str {
        "manhattan"
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
    }
}

/// `1 − cos θ`; zero vectors are treated as orthogonal to everything.
#[derive(Debug, Clone, Copy, Default)]
pub struct Cosine;

impl Distance for Cosine {
    fn name(&self) -> &'static str {
        "cosine"
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let denom = norm(a) * norm(b);
        if denom == 0.0 {
            return 1.0;
        }
        (1.0 - dot(a, b) / denom).max(0.0)
    }
}

pub const METRIC_NAMES: [&str; 3] = ["euclidean", "manhattan", "cosine"];

pub fn metric_by_name(name: &str) -> Result<Box<dyn Distance>> {
    match name {
        "euclidean" => Ok(Box::new(Euclidean)),
        "manhattan" => Ok(Box::new(Manhattan)),
        "cosine" => Ok(Box::new(Cosine)),
        other => Err(Error::invalid_argument(format!(
            "unknown metric {other:?}; expected one of {}",
            METRIC_NAMES.join(", ")
        ))),
    }
}

/// Average of `metric` over all unordered pairs.
///
/// Row `i` sums its distances to rows `j > i` in ascending `j`; row sums
/// are then added in ascending `i`. Parallelism only changes who computes
/// a row sum, not the order of any addition.
pub fn mean_pairwise_distance<R>(images: &[R], metric: &dyn Distance) -> Result<f64>
where
    R: AsRef<[f64]> + Sync,
{
    let n = images.len();
    if n < 2 {
        return Err(Error::invalid_argument(format!(
            "mean pairwise distance needs at least 2 images, got {n}"
        )));
    }
    let dim = images[0].as_ref().len();
    if images.iter().any(|x| x.as_ref().len() != dim) {
        return Err(Error::invalid_argument("images have unequal dimensions"));
    }
    let row_sums: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = images[i].as_ref();
            images[i + 1..]
                .iter()
                .map(|b| metric.distance(a, b.as_ref()))
                .sum::<f64>()
        })
        .collect();
    let total: f64 = row_sums.iter().sum();
    let pairs = (n as f64) * (n as f64 - 1.0) / 2.0;
    Ok(total / pairs)
}

/// Synthesises one image per latent row.
pub fn render_batch(spec: &GeneratorSpec, latents: &LatentBatch) -> Result<Vec<Vec<f64>>> {
    (0..latents.len())
        .into_par_iter()
        .map(|i| synth_generate(spec, latents.latent(i)).map(|v| v.into_vec()))
        .collect()
}

/// Fraction of latents whose rendered image the labeler assigns to
/// `category`.
pub fn retention_rate(
    latents: &LatentBatch,
    spec: &GeneratorSpec,
    labeler: &LabelerSpec,
    category: Category,
) -> Result<f64> {
    if latents.is_empty() {
        return Err(Error::invalid_argument("retention needs a non-empty batch"));
    }
    let hits = (0..latents.len())
        .into_par_iter()
        .map(|i| {
            let image = synth_generate(spec, latents.latent(i))?;
            let (label, _) = assign_label(labeler, &image)?;
            Ok(usize::from(label.category() == category))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(hits as f64 / latents.len() as f64)
}
