//! Participant records, the flat feature matrix fed to the network, and the
//! preprocessing steps between them.

mod csv_io;
mod record;
mod split;
mod synth;

pub use csv_io::{parse_csv, write_csv, RAW_COLUMNS};
pub use record::{
    derive_features, label_from_hba1c, split_by_sex, Derived, Label, ParticipantRecord, Sex,
    ANGLE_RANGE_DEG, FEATURE_NAMES, HBA1C_CUTOFF_PCT, JOINT_NAMES,
};
pub use split::{train_test_split, SplitPair};
pub use synth::{synth_dataset, synth_matrix, Signal};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Range test values are clamped to after scaling with training statistics.
pub const NORMALIZED_CLAMP: (f64, f64) = (-0.5, 1.5);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsetTag {
    Male,
    Female,
    All,
    Synthetic,
}

impl SubsetTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SubsetTag::Male => "male",
            SubsetTag::Female => "female",
            SubsetTag::All => "all",
            SubsetTag::Synthetic => "synthetic",
        }
    }
}

/// Per-column min-max statistics fitted on a training partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: Vec<f32>,
    pub max: Vec<f32>,
}

impl NormStats {
    pub fn columns(&self) -> usize {
        self.min.len()
    }
}

/// Row-major `f32` feature matrix with one label per row.
///
/// A `Dataset` is never mutated once built; preprocessing returns new values.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f32>,
    labels: Vec<Label>,
    row_ids: Vec<String>,
    rows: usize,
    columns: usize,
    norm_stats: Option<NormStats>,
    subset: SubsetTag,
}

impl Dataset {
    pub fn new(
        features: Vec<f32>,
        labels: Vec<Label>,
        row_ids: Vec<String>,
        columns: usize,
        subset: SubsetTag,
    ) -> Result<Dataset> {
        if columns == 0 {
            return Err(Error::Argument("dataset needs at least one column".into()));
        }
        let rows = labels.len();
        if features.len() != rows * columns {
            return Err(Error::shape("feature matrix", rows * columns, features.len()));
        }
        if row_ids.len() != rows {
            return Err(Error::shape("row ids", rows, row_ids.len()));
        }
        if let Some(v) = features.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite feature value {v}")));
        }
        Ok(Dataset {
            features,
            labels,
            row_ids,
            rows,
            columns,
            norm_stats: None,
            subset,
        })
    }

    /// Build the feature matrix from records, one row per record, columns
    /// ordered like [`FEATURE_NAMES`]. Labels come from HbA1c.
    pub fn from_records(records: &[ParticipantRecord], subset: SubsetTag) -> Result<Dataset> {
        let columns = FEATURE_NAMES.len();
        let mut features = Vec::with_capacity(records.len() * columns);
        let mut labels = Vec::with_capacity(records.len());
        let mut ids = Vec::with_capacity(records.len());
        for r in records {
            features.extend(r.feature_vector().iter().map(|&v| v as f32));
            labels.push(r.label()?);
            ids.push(r.id.clone());
        }
        Dataset::new(features, labels, ids, columns, subset)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn subset(&self) -> SubsetTag {
        self.subset
    }

    pub fn norm_stats(&self) -> Option<&NormStats> {
        self.norm_stats.as_ref()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.columns..(i + 1) * self.columns]
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub(crate) fn select(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.columns);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            row_ids: indices.iter().map(|&i| self.row_ids[i].clone()).collect(),
            rows: indices.len(),
            columns: self.columns,
            norm_stats: self.norm_stats.clone(),
            subset: self.subset,
        }
    }
}

/// Fit per-column min and max on a training partition.
pub fn normalize_fit(train: &Dataset) -> Result<NormStats> {
    if train.rows == 0 {
        return Err(Error::Argument(
            "cannot fit normalization on an empty dataset".into(),
        ));
    }
    let mut min = train.row(0).to_vec();
    let mut max = min.clone();
    for i in 1..train.rows {
        for ((lo, hi), &v) in min.iter_mut().zip(max.iter_mut()).zip(train.row(i)) {
            *lo = lo.min(v);
            *hi = hi.max(v);
        }
    }
    Ok(NormStats { min, max })
}

/// Scale `x' = (x - min) / (max - min)`, mapping constant columns to 0 and
/// clamping to [`NORMALIZED_CLAMP`].
pub fn normalize_apply(d: &Dataset, stats: &NormStats) -> Result<Dataset> {
    if stats.columns() != d.columns || stats.max.len() != d.columns {
        return Err(Error::shape("normalization stats", d.columns, stats.columns()));
    }
    let (lo, hi) = NORMALIZED_CLAMP;
    let mut features = Vec::with_capacity(d.features.len());
    for i in 0..d.rows {
        for ((&v, &min), &max) in d.row(i).iter().zip(&stats.min).zip(&stats.max) {
            let range = f64::from(max) - f64::from(min);
            let scaled = if range > 0.0 {
                ((f64::from(v) - f64::from(min)) / range).clamp(lo, hi)
            } else {
                0.0
            };
            features.push(scaled as f32);
        }
    }
    Ok(Dataset {
        features,
        norm_stats: Some(stats.clone()),
        ..d.clone()
    })
}
