//! Closed-form latent factor toolkit.
//!
//! Derives an orthonormal factor basis from generator weights, maps latents
//! to factor coordinates and back, builds per-category coordinate ranges
//! from labelled samples, and synthesises new latents by sampling uniformly
//! inside those ranges. A rejection-sampling baseline and diversity /
//! retention scores compare the two ways of getting category-conditioned
//! samples.

pub mod basis;
pub mod cli;
pub mod coords;
pub mod error;
pub mod matcore;
pub mod pipeline;
pub mod rng;
pub mod sampler;
pub mod semantics;

pub use basis::{compute_basis, compute_full_basis, FactorBasis};
pub use coords::{project, project_batch, reconstruct, FactorCoordinates, LatentBatch};
pub use error::{Error, Result};
pub use matcore::{Matrix, Vector};
pub use rng::Seed;
pub use semantics::{Category, CategoryRangeTable, LabelerSpec, SemanticLabel};
