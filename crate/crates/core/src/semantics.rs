//! Semantic labels (gender × age band), the rule-based labeler that stands
//! in for a pretrained age/gender classifier, and per-category coordinate
//! range tables.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coords::FactorCoordinates;
use crate::error::{Error, Result};
use crate::matcore::io::write_atomic;
use crate::matcore::{dot, Vector};

pub const DEFAULT_YOUNG_THRESHOLD: f64 = 30.0;
pub const DEFAULT_OLD_THRESHOLD: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeBand {
    #[serde(rename = "young")]
    Young,
    #[serde(rename = "middle")]
    MiddleAged,
    #[serde(rename = "old")]
    Old,
}

impl AgeBand {
    /// Young below `young`, Old above `old`, MiddleAged on the closed
    /// interval `[young, old]`.
    pub fn from_score(score: f64, young: f64, old: f64) -> AgeBand {
        if score < young {
            AgeBand::Young
        } else if score > old {
            AgeBand::Old
        } else {
            AgeBand::MiddleAged
        }
    }
}

/// One of the six gender × age-band cells, indexed row-major:
/// female_young = 0 … male_old = 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Category(u8);

impl Category {
    pub const COUNT: usize = 6;

    const NAMES: [&'static str; 6] = [
        "female_young",
        "female_middle",
        "female_old",
        "male_young",
        "male_middle",
        "male_old",
    ];

    pub fn new(index: usize) -> Result<Self> {
        if index < Self::COUNT {
            Ok(Category(index as u8))
        } else {
            Err(Error::invalid_argument(format!(
                "category index {index} out of range 0..=5"
            )))
        }
    }

    pub fn from_parts(gender: Gender, age: AgeBand) -> Self {
        Category(3 * gender as u8 + age as u8)
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| Category(i as u8))
    }

    pub fn all() -> impl Iterator<Item = Category> {
        (0..Self::COUNT as u8).map(Category)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        Self::NAMES[self.index()]
    }

    pub fn gender(self) -> Gender {
        if self.0 < 3 {
            Gender::Female
        } else {
            Gender::Male
        }
    }

    pub fn age_band(self) -> AgeBand {
        match self.0 % 3 {
            0 => AgeBand::Young,
            1 => AgeBand::MiddleAged,
            _ => AgeBand::Old,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SemanticLabel {
    pub gender: Gender,
    pub age_band: AgeBand,
}

impl SemanticLabel {
    pub fn category(&self) -> Category {
        Category::from_parts(self.gender, self.age_band)
    }
}

impl From<Category> for SemanticLabel {
    fn from(c: Category) -> Self {
        SemanticLabel {
            gender: c.gender(),
            age_band: c.age_band(),
        }
    }
}

/// Linear labeler on image vectors: gender from the sign of
/// `u_g·x + b_g`, age from the continuous score `u_a·x + b_a` banded by
/// the two thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelerSpec {
    gender_functional: Vector,
    gender_offset: f64,
    age_functional: Vector,
    age_offset: f64,
    young_threshold: f64,
    old_threshold: f64,
}

impl LabelerSpec {
    pub fn new(
        gender_functional: Vector,
        gender_offset: f64,
        age_functional: Vector,
        age_offset: f64,
        young_threshold: f64,
        old_threshold: f64,
    ) -> Result<Self> {
        if gender_functional.dim() != age_functional.dim() {
            return Err(Error::invalid_input(format!(
                "gender functional has dimension {}, age functional {}",
                gender_functional.dim(),
                age_functional.dim()
            )));
        }
        let scalars = [gender_offset, age_offset, young_threshold, old_threshold];
        if scalars.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid_input(
                "labeler offsets and thresholds must be finite",
            ));
        }
        if young_threshold >= old_threshold {
            return Err(Error::invalid_input(format!(
                "young threshold {young_threshold} must be below old threshold {old_threshold}"
            )));
        }
        Ok(Self {
            gender_functional,
            gender_offset,
            age_functional,
            age_offset,
            young_threshold,
            old_threshold,
        })
    }

    /// Labeler with the default 30/60 age thresholds.
    pub fn with_default_thresholds(
        gender_functional: Vector,
        gender_offset: f64,
        age_functional: Vector,
        age_offset: f64,
    ) -> Result<Self> {
        Self::new(
            gender_functional,
            gender_offset,
            age_functional,
            age_offset,
            DEFAULT_YOUNG_THRESHOLD,
            DEFAULT_OLD_THRESHOLD,
        )
    }

    pub fn dim(&self) -> usize {
        self.age_functional.dim()
    }

    pub fn gender_functional(&self) -> &Vector {
        &self.gender_functional
    }

    pub fn gender_offset(&self) -> f64 {
        self.gender_offset
    }

    pub fn age_functional(&self) -> &Vector {
        &self.age_functional
    }

    pub fn age_offset(&self) -> f64 {
        self.age_offset
    }

    pub fn young_threshold(&self) -> f64 {
        self.young_threshold
    }

    pub fn old_threshold(&self) -> f64 {
        self.old_threshold
    }
}

/// Labels one image, returning the label and the continuous age score.
pub fn assign_label(spec: &LabelerSpec, image: &[f64]) -> Result<(SemanticLabel, f64)> {
    if image.len() != spec.dim() {
        return Err(Error::invalid_argument(format!(
            "image has dimension {}, labeler expects {}",
            image.len(),
            spec.dim()
        )));
    }
    let age_score = dot(&spec.age_functional, image) + spec.age_offset;
    let gender_score = dot(&spec.gender_functional, image) + spec.gender_offset;
    let gender = if gender_score > 0.0 {
        Gender::Male
    } else {
        Gender::Female
    };
    let age_band = AgeBand::from_score(age_score, spec.young_threshold, spec.old_threshold);
    Ok((SemanticLabel { gender, age_band }, age_score))
}

/// Splits coordinates by category. Only non-empty categories appear as
/// keys; each subset keeps input order.
pub fn partition_by_label(
    coords: &[FactorCoordinates],
    labels: &[SemanticLabel],
) -> Result<BTreeMap<Category, Vec<FactorCoordinates>>> {
    if coords.len() != labels.len() {
        return Err(Error::invalid_argument(format!(
            "{} coordinates but {} labels",
            coords.len(),
            labels.len()
        )));
    }
    let mut out: BTreeMap<Category, Vec<FactorCoordinates>> = BTreeMap::new();
    for (c, l) in coords.iter().zip(labels) {
        out.entry(l.category()).or_default().push(c.clone());
    }
    Ok(out)
}

/// Observed `[min, max]` per channel for one category.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryRange {
    count: usize,
    min: Vec<f64>,
    max: Vec<f64>,
}

impl CategoryRange {
    pub fn new(count: usize, min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid_input("a present category needs count >= 1"));
        }
        if min.len() != max.len() {
            return Err(Error::invalid_input("min and max have different lengths"));
        }
        if min.iter().chain(&max).any(|x| !x.is_finite()) {
            return Err(Error::invalid_input("range bounds must be finite"));
        }
        if let Some(j) = (0..min.len()).find(|&j| min[j] > max[j]) {
            return Err(Error::invalid_input(format!(
                "min exceeds max on channel {j}"
            )));
        }
        Ok(Self { count, min, max })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    pub fn k(&self) -> usize {
        self.min.len()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.k()
            && point
                .iter()
                .zip(self.min.iter().zip(&self.max))
                .all(|(x, (lo, hi))| lo <= x && x <= hi)
    }
}

/// Per-category coordinate ranges over `k` channels. Categories without
/// samples are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryRangeTable {
    k: usize,
    ranges: [Option<CategoryRange>; Category::COUNT],
}

impl CategoryRangeTable {
    pub fn new(k: usize, ranges: [Option<CategoryRange>; Category::COUNT]) -> Result<Self> {
        if ranges.iter().flatten().any(|r| r.k() != k) {
            return Err(Error::invalid_input(format!(
                "range with channel count other than {k}"
            )));
        }
        if ranges.iter().all(Option::is_none) {
            return Err(Error::EmptyData("range table has no categories".into()));
        }
        Ok(Self { k, ranges })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, category: Category) -> Option<&CategoryRange> {
        self.ranges[category.index()].as_ref()
    }

    /// The range for `category`, or an empty-category error.
    pub fn require(&self, category: Category) -> Result<&CategoryRange> {
        self.get(category)
            .ok_or_else(|| Error::EmptyCategory(category.name().to_string()))
    }

    pub fn present(&self) -> impl Iterator<Item = (Category, &CategoryRange)> + '_ {
        Category::all().filter_map(move |c| self.get(c).map(|r| (c, r)))
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let doc = TableJson {
            k: self.k,
            categories: self
                .present()
                .map(|(c, r)| CategoryJson {
                    index: c.index(),
                    name: c.name().to_string(),
                    count: r.count,
                    min: r.min.clone(),
                    max: r.max.clone(),
                })
                .collect(),
        };
        serde_json::to_vec_pretty(&doc).map_err(|e| Error::format(e.to_string()))
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let doc: TableJson =
            serde_json::from_slice(bytes).map_err(|e| Error::format(e.to_string()))?;
        let mut ranges: [Option<CategoryRange>; Category::COUNT] = Default::default();
        for entry in doc.categories {
            let category = Category::new(entry.index).map_err(|e| Error::format(e.to_string()))?;
            if entry.name != category.name() {
                return Err(Error::format(format!(
                    "category {} is named {:?}, expected {:?}",
                    entry.index,
                    entry.name,
                    category.name()
                )));
            }
            if entry.min.len() != doc.k || entry.max.len() != doc.k {
                return Err(Error::format(format!(
                    "category {} has {}/{} bounds but k = {}",
                    category.name(),
                    entry.min.len(),
                    entry.max.len(),
                    doc.k
                )));
            }
            if ranges[category.index()].is_some() {
                return Err(Error::format(format!(
                    "duplicate category {}",
                    category.name()
                )));
            }
            let range = CategoryRange::new(entry.count, entry.min, entry.max)
                .map_err(|e| Error::format(e.to_string()))?;
            ranges[category.index()] = Some(range);
        }
        CategoryRangeTable::new(doc.k, ranges).map_err(|e| Error::format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, &self.to_json()?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read(path)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableJson {
    k: usize,
    categories: Vec<CategoryJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CategoryJson {
    index: usize,
    name: String,
    count: usize,
    min: Vec<f64>,
    max: Vec<f64>,
}

/// Exact per-channel extremes of every non-empty subset.
///
/// Extremes are taken under `f64::total_cmp`, so `-0.0` beats `0.0` for the
/// minimum; this keeps the table bitwise independent of input order.
pub fn compute_ranges(
    partition: &BTreeMap<Category, Vec<FactorCoordinates>>,
) -> Result<CategoryRangeTable> {
    let mut k = None;
    let mut ranges: [Option<CategoryRange>; Category::COUNT] = Default::default();
    for (category, subset) in partition {
        let Some(first) = subset.first() else {
            continue;
        };
        let width = *k.get_or_insert(first.k());
        let mut min = first.as_slice().to_vec();
        let mut max = min.clone();
        for c in subset {
            if c.k() != width {
                return Err(Error::invalid_argument(format!(
                    "coordinates with {} and {} channels mixed",
                    width,
                    c.k()
                )));
            }
            for ((lo, hi), x) in min.iter_mut().zip(max.iter_mut()).zip(c.as_slice()) {
                if x.total_cmp(lo).is_lt() {
                    *lo = *x;
                }
                if x.total_cmp(hi).is_gt() {
                    *hi = *x;
                }
            }
        }
        ranges[category.index()] = Some(CategoryRange {
            count: subset.len(),
            min,
            max,
        });
    }
    let Some(k) = k else {
        return Err(Error::EmptyData("every category is empty".into()));
    };
    CategoryRangeTable::new(k, ranges)
}

/// One line of a label file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRecord {
    /// Category index, consistent with `gender` and `age_band`.
    pub index: usize,
    pub gender: Gender,
    pub age_band: AgeBand,
    pub age_score: f64,
}

impl LabelRecord {
    pub fn new(label: SemanticLabel, age_score: f64) -> Self {
        Self {
            index: label.category().index(),
            gender: label.gender,
            age_band: label.age_band,
            age_score,
        }
    }

    pub fn label(&self) -> SemanticLabel {
        SemanticLabel {
            gender: self.gender,
            age_band: self.age_band,
        }
    }
}

pub fn labels_to_json(records: &[LabelRecord]) -> Result<Vec<u8>> {
    serde_json::to_vec_pretty(records).map_err(|e| Error::format(e.to_string()))
}

pub fn labels_from_json(bytes: &[u8]) -> Result<Vec<LabelRecord>> {
    let records: Vec<LabelRecord> =
        serde_json::from_slice(bytes).map_err(|e| Error::format(e.to_string()))?;
    for (i, r) in records.iter().enumerate() {
        if r.index != r.label().category().index() {
            return Err(Error::format(format!(
                "label {i}: index {} disagrees with {:?}/{:?}",
                r.index, r.gender, r.age_band
            )));
        }
        if !r.age_score.is_finite() {
            return Err(Error::format(format!("label {i}: non-finite age score")));
        }
    }
    Ok(records)
}

pub fn save_labels(path: impl AsRef<Path>, records: &[LabelRecord]) -> Result<()> {
    write_atomic(path, &labels_to_json(records)?)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<LabelRecord>> {
    labels_from_json(&fs::read(path)?)
}
