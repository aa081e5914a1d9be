//! Linear stand-in for a style-based generator: a mapping layer from noise
//! to latents and a synthesis layer from latents to image vectors.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::io::{read_matrix, read_vector, write_atomic, write_matrix, write_vector};
use crate::matcore::{Matrix, Vector};
use crate::rng::{KeyedStream, Seed};
use crate::semantics::LabelerSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    mapping: Matrix,
    mapping_offset: Vector,
    synthesis: Matrix,
    synthesis_offset: Vector,
}

impl GeneratorSpec {
    /// `mapping` is `d × d`, `synthesis` is `p × d`.
    pub fn new(
        mapping: Matrix,
        mapping_offset: Vector,
        synthesis: Matrix,
        synthesis_offset: Vector,
    ) -> Result<Self> {
        let d = mapping.rows();
        if d == 0 || mapping.cols() != d {
            return Err(Error::invalid_input(format!(
                "mapping must be square and non-empty, got {}x{}",
                mapping.rows(),
                mapping.cols()
            )));
        }
        if mapping_offset.dim() != d {
            return Err(Error::invalid_input(
                "mapping offset length differs from latent dim",
            ));
        }
        if synthesis.cols() != d || synthesis.rows() == 0 {
            return Err(Error::invalid_input(format!(
                "synthesis must be p x {d}, got {}x{}",
                synthesis.rows(),
                synthesis.cols()
            )));
        }
        if synthesis_offset.dim() != synthesis.rows() {
            return Err(Error::invalid_input(
                "synthesis offset length differs from image dim",
            ));
        }
        Ok(Self {
            mapping,
            mapping_offset,
            synthesis,
            synthesis_offset,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.mapping.rows()
    }

    pub fn image_dim(&self) -> usize {
        self.synthesis.rows()
    }

    /// The weight matrix whose Gram matrix defines the factor basis.
    pub fn mapping(&self) -> &Matrix {
        &self.mapping
    }

    pub fn mapping_offset(&self) -> &Vector {
        &self.mapping_offset
    }

    pub fn synthesis(&self) -> &Matrix {
        &self.synthesis
    }

    pub fn synthesis_offset(&self) -> &Vector {
        &self.synthesis_offset
    }

    /// `w = M_map z + b_map`
    pub fn map_noise(&self, z: &[f64]) -> Result<Vector> {
        affine(&self.mapping, &self.mapping_offset, z)
    }

    /// Saves the spec as JSON next to four FCK1 files named after the JSON
    /// file's stem; the JSON references them by relative path.
    pub fn save(&self, json_path: impl AsRef<Path>) -> Result<()> {
        let json_path = json_path.as_ref();
        let (dir, stem) = split_path(json_path)?;
        let doc = GeneratorJson {
            mapping: format!("{stem}.mapping.fck"),
            mapping_offset: format!("{stem}.mapping_offset.fck"),
            synthesis: format!("{stem}.synthesis.fck"),
            synthesis_offset: format!("{stem}.synthesis_offset.fck"),
        };
        write_matrix(dir.join(&doc.mapping), &self.mapping)?;
        write_vector(dir.join(&doc.mapping_offset), &self.mapping_offset)?;
        write_matrix(dir.join(&doc.synthesis), &self.synthesis)?;
        write_vector(dir.join(&doc.synthesis_offset), &self.synthesis_offset)?;
        write_json(json_path, &doc)
    }

    pub fn load(json_path: impl AsRef<Path>) -> Result<Self> {
        let json_path = json_path.as_ref();
        let doc: GeneratorJson = read_json(json_path)?;
        let dir = parent_dir(json_path);
        GeneratorSpec::new(
            read_matrix(dir.join(doc.mapping))?,
            read_vector(dir.join(doc.mapping_offset))?,
            read_matrix(dir.join(doc.synthesis))?,
            read_vector(dir.join(doc.synthesis_offset))?,
        )
        .map_err(|e| Error::format(e.to_string()))
    }
}

/// `image = M_syn w + b_syn`
pub fn synth_generate(spec: &GeneratorSpec, w: &[f64]) -> Result<Vector> {
    affine(&spec.synthesis, &spec.synthesis_offset, w)
}

fn affine(m: &Matrix, b: &Vector, x: &[f64]) -> Result<Vector> {
    let mut out = m.matvec(x)?.into_vec();
    for (o, bi) in out.iter_mut().zip(b.iter()) {
        *o += bi;
    }
    Vector::new(out)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorJson {
    mapping: String,
    mapping_offset: String,
    synthesis: String,
    synthesis_offset: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelerJson {
    gender_functional: String,
    gender_offset: f64,
    age_functional: String,
    age_offset: f64,
    young_threshold: f64,
    old_threshold: f64,
}

/// Saves a labeler as JSON plus two FCK1 vector files.
pub fn save_labeler(labeler: &LabelerSpec, json_path: impl AsRef<Path>) -> Result<()> {
    let json_path = json_path.as_ref();
    let (dir, stem) = split_path(json_path)?;
    let doc = LabelerJson {
        gender_functional: format!("{stem}.gender.fck"),
        gender_offset: labeler.gender_offset(),
        age_functional: format!("{stem}.age.fck"),
        age_offset: labeler.age_offset(),
        young_threshold: labeler.young_threshold(),
        old_threshold: labeler.old_threshold(),
    };
    write_vector(
        dir.join(&doc.gender_functional),
        labeler.gender_functional(),
    )?;
    write_vector(dir.join(&doc.age_functional), labeler.age_functional())?;
    write_json(json_path, &doc)
}

pub fn load_labeler(json_path: impl AsRef<Path>) -> Result<LabelerSpec> {
    let json_path = json_path.as_ref();
    let doc: LabelerJson = read_json(json_path)?;
    let dir = parent_dir(json_path);
    LabelerSpec::new(
        read_vector(dir.join(doc.gender_functional))?,
        doc.gender_offset,
        read_vector(dir.join(doc.age_functional))?,
        doc.age_offset,
        doc.young_threshold,
        doc.old_threshold,
    )
    .map_err(|e| Error::format(e.to_string()))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::format(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_slice(&fs::read(path)?).map_err(|e| Error::format(e.to_string()))
}

pub(crate) fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn split_path(path: &Path) -> Result<(PathBuf, String)> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::invalid_argument(format!("bad file name {}", path.display())))?;
    Ok((parent_dir(path), stem.to_string()))
}

const MODEL_DOMAIN: u64 = 0x4D4F_4445; // "MODE"

/// Mean and spread of the synthetic labeler's age score under the mapped
/// standard normal: ages are N(45, 15²), so P(young) = P(old) = Φ(−1).
pub const SYNTHETIC_AGE_MEAN: f64 = 45.0;
pub const SYNTHETIC_AGE_STD: f64 = 15.0;

/// Random linear generator and a labeler calibrated against it.
///
/// The labeler's gender and age scores are affine in the noise `z`:
/// `s = uᵀ A z + c` with `A = M_syn M_map`. The age functional is scaled so
/// the score has mean 45 and standard deviation 15; the gender functional is
/// made `A Aᵀ`-orthogonal to it and centred, so gender and age are
/// independent and each gender has probability exactly ½. All six
/// categories therefore have probability at least `½ Φ(−1) ≈ 7.9%`.
pub fn synthetic_models(
    latent_dim: usize,
    image_dim: usize,
    model_seed: Seed,
) -> Result<(GeneratorSpec, LabelerSpec)> {
    if latent_dim == 0 || image_dim == 0 {
        return Err(Error::invalid_argument("synthetic dims must be positive"));
    }
    let gaussian = |tag: u64, len: usize, scale: f64| -> Vec<f64> {
        let s = KeyedStream::new(model_seed, MODEL_DOMAIN, &[tag]);
        (0..len as u64).map(|i| scale * s.normal_at(i)).collect()
    };
    let d = latent_dim;
    let p = image_dim;
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let mapping = Matrix::new(d, d, gaussian(0, d * d, inv_sqrt_d))?;
    let mapping_offset = Vector::new(gaussian(1, d, 0.1))?;
    let synthesis = Matrix::new(p, d, gaussian(2, p * d, inv_sqrt_d))?;
    let synthesis_offset = Vector::new(gaussian(3, p, 0.1))?;
    let generator = GeneratorSpec::new(mapping, mapping_offset, synthesis, synthesis_offset)?;

    let combined = generator.synthesis.matmul(&generator.mapping)?;
    let mean_image = synth_generate(&generator, &generator.mapping_offset)?;

    let raw_age = gaussian(4, p, 1.0);
    let age_in_noise = combined.tr_matvec(&raw_age)?;
    let spread = age_in_noise.norm();
    if spread == 0.0 {
        return Err(Error::invalid_input(
            "synthetic age functional is degenerate",
        ));
    }
    let age: Vec<f64> = raw_age
        .iter()
        .map(|x| x * SYNTHETIC_AGE_STD / spread)
        .collect();
    let age_offset = SYNTHETIC_AGE_MEAN - crate::matcore::dot(&age, &mean_image);

    let mut gender = gaussian(5, p, 1.0);
    let age_noise = combined.tr_matvec(&age)?;
    let gender_noise = combined.tr_matvec(&gender)?;
    let coupling = crate::matcore::dot(&gender_noise, &age_noise)
        / crate::matcore::dot(&age_noise, &age_noise);
    for (g, a) in gender.iter_mut().zip(&age) {
        *g -= coupling * a;
    }
    let gender_offset = -crate::matcore::dot(&gender, &mean_image);

    let labeler = LabelerSpec::with_default_thresholds(
        Vector::new(gender)?,
        gender_offset,
        Vector::new(age)?,
        age_offset,
    )?;
    Ok((generator, labeler))
}
