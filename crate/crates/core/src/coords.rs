//! Moving between latent vectors and factor coordinates.
//!
//! A fully disentangling generator is modelled as `G(z) = G(A x)` with `A`
//! the factor basis and `x` the sample's coordinates; nothing here checks
//! that premise. Because basis columns are orthonormal, projection is a
//! transpose multiply and equals the least-squares solution of `F α = w`.

use rayon::prelude::*;

use crate::basis::FactorBasis;
use crate::error::{Error, Result};
use crate::matcore::{Matrix, Vector};

/// Coordinates `α` of one sample in a `k`-direction basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorCoordinates {
    values: Vector,
}

impl FactorCoordinates {
    pub fn new(values: Vector) -> Self {
        Self { values }
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        Ok(Self::new(Vector::new(values)?))
    }

    pub fn k(&self) -> usize {
        self.values.dim()
    }

    pub fn values(&self) -> &Vector {
        &self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }
}

/// `n` latents of dimension `d`, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBatch {
    latents: Matrix,
}

impl LatentBatch {
    pub fn new(latents: Matrix) -> Self {
        Self { latents }
    }

    pub fn from_rows(rows: &[Vector]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.dim());
        if rows.iter().any(|r| r.dim() != dim) {
            return Err(Error::invalid_argument("latents have unequal dimensions"));
        }
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Ok(Self::new(Matrix::new(rows.len(), dim, data)?))
    }

    /// Empty batch of latent dimension `dim`.
    pub fn empty(dim: usize) -> Self {
        Self::new(Matrix::zeros(0, dim))
    }

    pub fn len(&self) -> usize {
        self.latents.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.latents.cols()
    }

    pub fn latent(&self, i: usize) -> &[f64] {
        self.latents.row(i)
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.latents.row_iter()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.latents
    }

    pub fn into_matrix(self) -> Matrix {
        self.latents
    }
}

/// `α = Fᵀ w`.
pub fn project(basis: &FactorBasis, w: &[f64]) -> Result<FactorCoordinates> {
    if w.len() != basis.dim() {
        return Err(Error::invalid_argument(format!(
            "latent has dimension {}, basis expects {}",
            w.len(),
            basis.dim()
        )));
    }
    Ok(FactorCoordinates::new(basis.directions().tr_matvec(w)?))
}

/// `w = F α`.
pub fn reconstruct(basis: &FactorBasis, alpha: &FactorCoordinates) -> Result<Vector> {
    if alpha.k() != basis.k() {
        return Err(Error::invalid_argument(format!(
            "coordinates have {} channels, basis has {} directions",
            alpha.k(),
            basis.k()
        )));
    }
    basis.directions().matvec(alpha.as_slice())
}

/// Projects every row; output order matches input order and each element is
/// bitwise what [`project`] returns for that row.
pub fn project_batch(basis: &FactorBasis, batch: &LatentBatch) -> Result<Vec<FactorCoordinates>> {
    if batch.dim() != basis.dim() {
        return Err(Error::invalid_argument(format!(
            "batch has dimension {}, basis expects {}",
            batch.dim(),
            basis.dim()
        )));
    }
    (0..batch.len())
        .into_par_iter()
        .map(|i| project(basis, batch.latent(i)))
        .collect()
}

/// Rebuilds one latent per coordinate vector.
pub fn reconstruct_batch(basis: &FactorBasis, coords: &[FactorCoordinates]) -> Result<LatentBatch> {
    let rows: Vec<Vector> = coords
        .par_iter()
        .map(|a| reconstruct(basis, a))
        .collect::<Result<_>>()?;
    if rows.is_empty() {
        return Ok(LatentBatch::empty(basis.dim()));
    }
    LatentBatch::from_rows(&rows)
}

/// Stacks coordinate vectors as matrix rows (the on-disk layout).
pub fn coords_to_matrix(coords: &[FactorCoordinates], k: usize) -> Result<Matrix> {
    if let Some(bad) = coords.iter().find(|c| c.k() != k) {
        return Err(Error::invalid_argument(format!(
            "coordinate with {} channels in a {k}-channel set",
            bad.k()
        )));
    }
    let data = coords
        .iter()
        .flat_map(|c| c.as_slice().iter().copied())
        .collect();
    Matrix::new(coords.len(), k, data)
}

pub fn coords_from_matrix(m: &Matrix) -> Vec<FactorCoordinates> {
    m.row_iter()
        .map(|r| FactorCoordinates::new(Vector::from_raw(r.to_vec())))
        .collect()
}
