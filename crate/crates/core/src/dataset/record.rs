use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// HbA1c percentage at or above which a participant is labelled [`Label::Poor`].
/// Equivalent to 48 mmol/mol.
pub const HBA1C_CUTOFF_PCT: f64 = 6.5;

/// Accepted joint-angle range in degrees. Negative values are hyper-extension,
/// positive values a flexion contracture.
pub const ANGLE_RANGE_DEG: (f64, f64) = (-90.0, 180.0);

/// Finger joints in column order: X1 (little finger) to X5 (thumb). The thumb
/// has a single interphalangeal joint.
pub const JOINT_NAMES: [&str; 14] = [
    "X1MCP", "X1PIP", "X1DIP", "X2MCP", "X2PIP", "X2DIP", "X3MCP", "X3PIP", "X3DIP", "X4MCP",
    "X4PIP", "X4DIP", "X5MCP", "X5IP",
];

/// Names of the columns that make up the network's input vector, in order.
/// `sex` is a partition key and `hba1c_pct` is the label source, so neither is
/// a feature.
pub const FEATURE_NAMES: [&str; 30] = [
    "age",
    "height_m",
    "weight_kg",
    "waist_cm",
    "hip_cm",
    "neck_cm",
    "wrist_right_cm",
    "wrist_left_cm",
    "ankle_cm",
    "X1MCP",
    "X1PIP",
    "X1DIP",
    "X2MCP",
    "X2PIP",
    "X2DIP",
    "X3MCP",
    "X3PIP",
    "X3DIP",
    "X4MCP",
    "X4PIP",
    "X4DIP",
    "X5MCP",
    "X5IP",
    "BMI",
    "WHRatio",
    "WRWRatio",
    "WLWRatio",
    "WRHRatio",
    "WLHRatio",
    "on_med",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub fn code(self) -> &'static str {
        match self {
            Sex::Male => "M",
            Sex::Female => "F",
        }
    }

    pub fn from_code(s: &str) -> Option<Sex> {
        match s.trim() {
            "M" | "m" => Some(Sex::Male),
            "F" | "f" => Some(Sex::Female),
            _ => None,
        }
    }
}

/// Binary glycemic-control class. The network encodes `Good` as 0 and `Poor`
/// as 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Good,
    Poor,
}

impl Label {
    pub fn target(self) -> f32 {
        match self {
            Label::Good => 0.0,
            Label::Poor => 1.0,
        }
    }

    /// Threshold a network output; 0.5 itself counts as `Poor`.
    pub fn from_output(output: f32) -> Label {
        if output >= 0.5 {
            Label::Poor
        } else {
            Label::Good
        }
    }
}

/// Features computed from the raw anthropometrics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub bmi: f64,
    pub wh_ratio: f64,
    pub wrw_ratio: f64,
    pub wlw_ratio: f64,
    pub wrh_ratio: f64,
    pub wlh_ratio: f64,
}

/// One participant row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub id: String,
    pub sex: Sex,
    pub age_years: f64,
    pub height_m: f64,
    pub weight_kg: f64,
    pub waist_cm: f64,
    pub hip_cm: f64,
    pub neck_cm: f64,
    pub wrist_right_cm: f64,
    pub wrist_left_cm: f64,
    pub ankle_cm: f64,
    /// Indexed like [`JOINT_NAMES`].
    pub joint_angles_deg: [f64; 14],
    pub on_med: bool,
    pub hba1c_pct: f64,
    pub derived: Derived,
}

impl ParticipantRecord {
    /// Check every raw-field invariant. Derived fields are not inspected.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("height_m", self.height_m),
            ("weight_kg", self.weight_kg),
            ("waist_cm", self.waist_cm),
            ("hip_cm", self.hip_cm),
            ("neck_cm", self.neck_cm),
            ("wrist_right_cm", self.wrist_right_cm),
            ("wrist_left_cm", self.wrist_left_cm),
            ("ankle_cm", self.ankle_cm),
            ("hba1c_pct", self.hba1c_pct),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!(
                    "record {}: {name} must be positive, got {v}",
                    self.id
                )));
            }
        }
        if !(self.age_years.is_finite() && self.age_years >= 0.0) {
            return Err(Error::Validation(format!(
                "record {}: age must be non-negative, got {}",
                self.id, self.age_years
            )));
        }
        let (lo, hi) = ANGLE_RANGE_DEG;
        for (name, &a) in JOINT_NAMES.iter().zip(&self.joint_angles_deg) {
            if !(a.is_finite() && (lo..=hi).contains(&a)) {
                return Err(Error::Validation(format!(
                    "record {}: {name} = {a} outside [{lo}, {hi}] degrees",
                    self.id
                )));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> Result<Label> {
        label_from_hba1c(self.hba1c_pct)
    }

    /// The network input vector, ordered like [`FEATURE_NAMES`].
    pub fn feature_vector(&self) -> [f64; 30] {
        let d = &self.derived;
        let mut out = [0.0; 30];
        out[..9].copy_from_slice(&[
            self.age_years,
            self.height_m,
            self.weight_kg,
            self.waist_cm,
            self.hip_cm,
            self.neck_cm,
            self.wrist_right_cm,
            self.wrist_left_cm,
            self.ankle_cm,
        ]);
        out[9..23].copy_from_slice(&self.joint_angles_deg);
        out[23..].copy_from_slice(&[
            d.bmi,
            d.wh_ratio,
            d.wrw_ratio,
            d.wlw_ratio,
            d.wrh_ratio,
            d.wlh_ratio,
            if self.on_med { 1.0 } else { 0.0 },
        ]);
        out
    }
}

/// Fill in BMI and the five circumference ratios.
pub fn derive_features(mut raw: ParticipantRecord) -> Result<ParticipantRecord> {
    for (name, v) in [
        ("height_m", raw.height_m),
        ("waist_cm", raw.waist_cm),
        ("hip_cm", raw.hip_cm),
        ("wrist_right_cm", raw.wrist_right_cm),
        ("wrist_left_cm", raw.wrist_left_cm),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Validation(format!(
                "record {}: {name} must be positive to derive features, got {v}",
                raw.id
            )));
        }
    }
    raw.derived = Derived {
        bmi: raw.weight_kg / (raw.height_m * raw.height_m),
        wh_ratio: raw.waist_cm / raw.hip_cm,
        wrw_ratio: raw.wrist_right_cm / raw.waist_cm,
        wlw_ratio: raw.wrist_left_cm / raw.waist_cm,
        wrh_ratio: raw.wrist_right_cm / raw.hip_cm,
        wlh_ratio: raw.wrist_left_cm / raw.hip_cm,
    };
    Ok(raw)
}

pub fn label_from_hba1c(hba1c_pct: f64) -> Result<Label> {
    if !(hba1c_pct.is_finite() && hba1c_pct > 0.0) {
        return Err(Error::Validation(format!(
            "hba1c_pct must be positive, got {hba1c_pct}"
        )));
    }
    Ok(if hba1c_pct >= HBA1C_CUTOFF_PCT {
        Label::Poor
    } else {
        Label::Good
    })
}

/// Partition records by sex, keeping input order inside each half.
pub fn split_by_sex(
    records: &[ParticipantRecord],
) -> (Vec<ParticipantRecord>, Vec<ParticipantRecord>) {
    records.iter().cloned().partition(|r| r.sex == Sex::Male)
}
