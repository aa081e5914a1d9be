//! Factor basis ("hyper coordinate system") derived from generator weights.
//!
//! The directions that maximise `‖W f‖²` under `fᵀf = 1` are the leading
//! eigenvectors of `WᵀW`; the basis keeps the top `k` of them together with
//! their eigenvalues. The stored basis is the orthonormal eigenvector matrix
//! `F` itself, never the raw weights, so coordinates are `α = Fᵀw` and
//! latents are rebuilt as `w = Fα`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matcore::io::{write_atomic, ByteReader};
use crate::matcore::{eigh_descending, gram, Matrix, Vector, TIE_TOL};

pub const BASIS_MAGIC: [u8; 4] = *b"FCB1";

const ORTHONORMAL_TOL: f64 = 1e-9;
const NEGATIVE_EIGEN_TOL: f64 = 1e-12;

/// `d × k` matrix of orthonormal directions with their eigenvalues,
/// descending and nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorBasis {
    directions: Matrix,
    eigenvalues: Vector,
}

impl FactorBasis {
    /// Validates and wraps externally supplied directions and eigenvalues.
    /// Eigenvalues in `[-1e-12, 0)` are clamped to zero. Order must be
    /// descending up to inversions of at most `1e-10`.
    pub fn new(directions: Matrix, eigenvalues: Vector) -> Result<Self> {
        let (d, k) = directions.shape();
        if k == 0 || k > d {
            return Err(Error::invalid_input(format!(
                "basis needs 1 <= k <= d, got d = {d}, k = {k}"
            )));
        }
        if eigenvalues.dim() != k {
            return Err(Error::invalid_input(format!(
                "{k} directions but {} eigenvalues",
                eigenvalues.dim()
            )));
        }
        let mut values = eigenvalues.into_vec();
        for v in values.iter_mut() {
            if *v < 0.0 {
                if *v < -NEGATIVE_EIGEN_TOL {
                    return Err(Error::invalid_input(format!("negative eigenvalue {v:e}")));
                }
                *v = 0.0;
            }
        }
        // Near-equal eigenvalues keep solver order, so allow tie-sized inversions.
        if values.windows(2).any(|w| w[1] - w[0] > TIE_TOL) {
            return Err(Error::invalid_input("eigenvalues are not descending"));
        }
        let deviation = orthonormality_error(&directions);
        if deviation > ORTHONORMAL_TOL {
            return Err(Error::invalid_input(format!(
                "directions are not orthonormal (max deviation {deviation:e})"
            )));
        }
        Ok(Self {
            directions,
            eigenvalues: Vector::new(values)?,
        })
    }

    /// Latent dimensionality `d`.
    pub fn dim(&self) -> usize {
        self.directions.rows()
    }

    /// Number of directions `k`.
    pub fn k(&self) -> usize {
        self.directions.cols()
    }

    pub fn directions(&self) -> &Matrix {
        &self.directions
    }

    pub fn eigenvalues(&self) -> &Vector {
        &self.eigenvalues
    }

    pub fn direction(&self, i: usize) -> Vector {
        self.directions.column(i)
    }

    /// The same basis restricted to its first `k` directions.
    pub fn truncate(&self, k: usize) -> Result<FactorBasis> {
        if k == 0 || k > self.k() {
            return Err(Error::invalid_argument(format!(
                "cannot truncate a {}-direction basis to {k}",
                self.k()
            )));
        }
        Ok(FactorBasis {
            directions: self.directions.leading_columns(k),
            eigenvalues: Vector::from_raw(self.eigenvalues[..k].to_vec()),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * (self.k() + self.directions.as_slice().len()));
        out.extend_from_slice(&BASIS_MAGIC);
        // both fit: validated at construction or decode
        out.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        out.extend_from_slice(&(self.k() as u32).to_le_bytes());
        for x in self.eigenvalues.iter().chain(self.directions.as_slice()) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut reader = ByteReader::new(bytes);
        if reader.take(4)? != BASIS_MAGIC {
            return Err(Error::format("bad magic, expected FCB1"));
        }
        let d = reader.u32()? as usize;
        let k = reader.u32()? as usize;
        if k == 0 || k > d {
            return Err(Error::format(format!(
                "invalid basis shape d = {d}, k = {k}"
            )));
        }
        let eigenvalues = reader.f64_array(k)?;
        let directions = reader.f64_array(d * k)?;
        reader.finish()?;
        let eigenvalues = Vector::new(eigenvalues).map_err(|e| Error::format(e.to_string()))?;
        let directions = Matrix::new(d, k, directions).map_err(|e| Error::format(e.to_string()))?;
        FactorBasis::new(directions, eigenvalues).map_err(|e| Error::format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        if u32::try_from(self.dim()).is_err() {
            return Err(Error::invalid_argument("basis dimension exceeds u32"));
        }
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Top-`k` eigenvectors of `WᵀW` as a factor basis.
pub fn compute_basis(weights: &Matrix, k: usize) -> Result<FactorBasis> {
    let d = weights.cols();
    if k == 0 || k > d {
        return Err(Error::invalid_argument(format!(
            "k must lie in 1..={d}, got {k}"
        )));
    }
    let eig = eigh_descending(&gram(weights)?)?;
    let lambda_max = eig.values[0].max(1.0);
    let mut values = eig.values[..k].to_vec();
    for v in values.iter_mut() {
        // Rounding can push zero eigenvalues of a PSD matrix slightly negative.
        if *v < 0.0 && *v >= -NEGATIVE_EIGEN_TOL * lambda_max {
            *v = 0.0;
        }
    }
    FactorBasis::new(eig.vectors.leading_columns(k), Vector::new(values)?)
}

/// Full basis, `k = d`.
pub fn compute_full_basis(weights: &Matrix) -> Result<FactorBasis> {
    compute_basis(weights, weights.cols())
}

/// Max-abs deviation of `Fᵀ F` from the identity.
pub fn orthonormality_error(directions: &Matrix) -> f64 {
    let (d, k) = directions.shape();
    let data = directions.as_slice();
    let mut worst = 0.0_f64;
    for a in 0..k {
        for b in a..k {
            let mut acc = 0.0;
            for r in 0..d {
                acc += data[r * k + a] * data[r * k + b];
            }
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((acc - target).abs());
        }
    }
    worst
}
