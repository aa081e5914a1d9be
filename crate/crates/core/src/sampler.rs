//! Uniform resampling of factor coordinates inside a category's box, and
//! reconstruction of the corresponding latents.
//!
//! Draw `(i, j)` for sample `i`, channel `j` comes from the stream keyed by
//! `(seed, category, i)` at counter `j`, so every value is addressable on its
//! own and the output does not depend on how work is split across threads.
//! No labeler is consulted: a box can contain points the labeler would put
//! in another category, and that leakage is measured downstream.

use rayon::prelude::*;

use crate::basis::FactorBasis;
use crate::coords::{reconstruct_batch, FactorCoordinates, LatentBatch};
use crate::error::{Error, Result};
use crate::matcore::Vector;
use crate::rng::{KeyedStream, Seed};
use crate::semantics::{Category, CategoryRange, CategoryRangeTable};

const SAMPLER_DOMAIN: u64 = 0x5341_4D50; // "SAMP"

/// `min + u·(max − min)` with `u ∈ [0, 1)`, clamped onto `[min, max]`.
#[inline]
pub fn uniform_in(lo: f64, hi: f64, u: f64) -> f64 {
    let width = hi - lo;
    let x = if width.is_finite() {
        lo + u * width
    } else {
        lo * (1.0 - u) + hi * u
    };
    x.clamp(lo, hi)
}

fn draw(range: &CategoryRange, stream: &KeyedStream) -> FactorCoordinates {
    let values = range
        .min()
        .iter()
        .zip(range.max())
        .enumerate()
        .map(|(j, (lo, hi))| uniform_in(*lo, *hi, stream.unit_at(j as u64)))
        .collect();
    FactorCoordinates::new(Vector::from_raw(values))
}

/// `n` coordinate vectors drawn independently and uniformly per channel
/// from the category's closed box.
pub fn sample_uniform_box(
    table: &CategoryRangeTable,
    category: Category,
    n: usize,
    seed: Seed,
) -> Result<Vec<FactorCoordinates>> {
    let range = table.require(category)?;
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let stream =
                KeyedStream::new(seed, SAMPLER_DOMAIN, &[category.index() as u64, i as u64]);
            draw(range, &stream)
        })
        .collect())
}

/// Box-samples `n` coordinate vectors and maps each back through the basis.
pub fn generate_for_category(
    table: &CategoryRangeTable,
    basis: &FactorBasis,
    category: Category,
    n: usize,
    seed: Seed,
) -> Result<LatentBatch> {
    if table.k() != basis.k() {
        return Err(Error::invalid_argument(format!(
            "range table has {} channels, basis has {} directions",
            table.k(),
            basis.k()
        )));
    }
    let coords = sample_uniform_box(table, category, n, seed)?;
    reconstruct_batch(basis, &coords)
}
