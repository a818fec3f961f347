//! Seeded generator for participant tables with physiologically plausible
//! ranges, used in place of real clinical data for tests and demos.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::record::{derive_features, Derived, ParticipantRecord, Sex, HBA1C_CUTOFF_PCT};
use super::{Dataset, Label, SubsetTag};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Signal {
    /// HbA1c is an affine function of five measured features plus bounded
    /// noise, so the label is learnable.
    PlantedLinear,
    /// HbA1c is drawn independently of every feature.
    Random,
}

impl std::str::FromStr for Signal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Signal> {
        match s {
            "planted-linear" => Ok(Signal::PlantedLinear),
            "random" => Ok(Signal::Random),
            other => Err(Error::Argument(format!(
                "unknown signal `{other}` (expected planted-linear or random)"
            ))),
        }
    }
}

/// Share of male participants in generated tables (61 of 120).
const MALE_SHARE: f64 = 61.0 / 120.0;

// Planted HbA1c model over four joints and waist: (joint index, centre, scale,
// coefficient). Each term adds coefficient * (value - centre) / scale percent.
const PLANTED_JOINTS: [(usize, f64, f64, f64); 4] = [
    (4, 11.0, 12.0, 0.55),  // X2PIP
    (7, 11.0, 12.0, 0.45),  // X3PIP
    (10, 11.0, 12.0, 0.40), // X4PIP
    (13, 7.0, 12.0, 0.50),  // X5IP
];
const PLANTED_WAIST: (f64, f64, f64) = (87.0, 8.3, 0.45);
const PLANTED_NOISE_PCT: f64 = 0.05;

fn normal(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("finite positive sd")
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let p = 10f64.powi(decimals);
    (v * p).round() / p
}

/// Generate `rows` participant records. Deterministic per `(rows, seed, signal)`.
pub fn synth_dataset(rows: usize, seed: u64, signal: Signal) -> Result<Vec<ParticipantRecord>> {
    if rows < 2 {
        return Err(Error::Argument(format!(
            "synthetic dataset needs at least 2 rows, got {rows}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n_male = (rows as f64 * MALE_SHARE).round() as usize;
    let mut sexes: Vec<Sex> = (0..rows)
        .map(|i| if i < n_male { Sex::Male } else { Sex::Female })
        .collect();
    sexes.shuffle(&mut rng);

    let waist_mean = |bmi: f64, sex: Sex| 45.0 + 1.45 * bmi + if sex == Sex::Male { 3.0 } else { 0.0 };

    let mut out = Vec::with_capacity(rows);
    for (i, sex) in sexes.into_iter().enumerate() {
        let male = sex == Sex::Male;
        let age = rng.random_range(25.0f64..80.0).round();
        let height = round_to(
            normal(if male { 1.72 } else { 1.60 }, 0.07)
                .sample(&mut rng)
                .clamp(1.40, 2.05),
            2,
        );
        let bmi = normal(28.0, 5.0).sample(&mut rng).clamp(17.0, 45.0);
        let weight = round_to(bmi * height * height, 1);
        let waist = round_to(waist_mean(bmi, sex) + normal(0.0, 4.0).sample(&mut rng), 1);
        let whr = normal(if male { 0.93 } else { 0.86 }, 0.05)
            .sample(&mut rng)
            .clamp(0.7, 1.2);
        let hip = round_to(waist / whr, 1);
        let neck = round_to(normal(if male { 39.0 } else { 34.0 }, 2.5).sample(&mut rng), 1);
        let wrist_right =
            round_to(normal(if male { 17.5 } else { 15.8 }, 1.0).sample(&mut rng), 1);
        let wrist_left = round_to(wrist_right - normal(0.2, 0.3).sample(&mut rng), 1);
        let ankle = round_to(normal(if male { 23.5 } else { 22.0 }, 1.5).sample(&mut rng), 1);

        // A per-person stiffness level shared by all joints, plus joint noise.
        let stiffness: f64 = rng.random_range(0.0..1.0);
        let mut angles = [0.0; 14];
        for (k, a) in angles.iter_mut().enumerate() {
            let base = if k == 12 { -8.0 } else { -4.0 };
            let raw = base + 30.0 * stiffness + normal(0.0, 8.0).sample(&mut rng);
            *a = raw.clamp(-30.0, 90.0).round();
        }
        let on_med = rng.random_bool(0.4);

        let hba1c = match signal {
            Signal::PlantedLinear => {
                let (centre, scale, coef) = PLANTED_WAIST;
                let mut s = coef * (waist - centre) / scale;
                for (k, mean, sd, coef) in PLANTED_JOINTS {
                    s += coef * (angles[k] - mean) / sd;
                }
                let noise = rng.random_range(-PLANTED_NOISE_PCT..=PLANTED_NOISE_PCT);
                HBA1C_CUTOFF_PCT + s + noise
            }
            Signal::Random => HBA1C_CUTOFF_PCT + normal(0.0, 1.2).sample(&mut rng),
        }
        .clamp(4.0, 14.0);

        out.push(derive_features(ParticipantRecord {
            id: format!("S{:04}", i + 1),
            sex,
            age_years: age,
            height_m: height,
            weight_kg: weight,
            waist_cm: waist,
            hip_cm: hip,
            neck_cm: neck,
            wrist_right_cm: wrist_right,
            wrist_left_cm: wrist_left,
            ankle_cm: ankle,
            joint_angles_deg: angles,
            on_med,
            hba1c_pct: hba1c,
            derived: Derived::default(),
        })?);
    }
    Ok(out)
}

/// Uniform `[0, 1)` feature matrix with a planted linear labelling rule on the
/// first (up to) five columns. Used for backend and benchmark workloads whose
/// width is not tied to the participant schema.
pub fn synth_matrix(rows: usize, columns: usize, seed: u64) -> Result<Dataset> {
    if rows < 2 || columns == 0 {
        return Err(Error::Argument(format!(
            "synthetic matrix needs rows >= 2 and columns >= 1, got {rows}x{columns}"
        )));
    }
    const WEIGHTS: [f64; 5] = [1.0, -0.8, 0.6, -0.4, 0.9];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(rows * columns);
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let start = features.len();
        features.extend((0..columns).map(|_| rng.random::<f32>()));
        let score: f64 = features[start..]
            .iter()
            .zip(WEIGHTS)
            .map(|(&x, w)| w * (f64::from(x) - 0.5))
            .sum();
        labels.push(if score >= 0.0 { Label::Poor } else { Label::Good });
    }
    let ids = (0..rows).map(|i| format!("m{i}")).collect();
    Dataset::new(features, labels, ids, columns, SubsetTag::Synthetic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{split_by_sex, write_csv};

    #[test]
    fn planted_120_has_both_labels_and_61_59_sex_counts() {
        let recs = synth_dataset(120, 7, Signal::PlantedLinear).unwrap();
        assert_eq!(recs.len(), 120);
        let labels: Vec<Label> = recs.iter().map(|r| r.label().unwrap()).collect();
        assert!(labels.contains(&Label::Good) && labels.contains(&Label::Poor));
        let (m, f) = split_by_sex(&recs);
        assert_eq!((m.len(), f.len()), (61, 59));
    }

    #[test]
    fn deterministic_per_seed() {
        for signal in [Signal::PlantedLinear, Signal::Random] {
            let a = synth_dataset(30, 99, signal).unwrap();
            let b = synth_dataset(30, 99, signal).unwrap();
            let (mut ca, mut cb) = (Vec::new(), Vec::new());
            write_csv(&mut ca, &a).unwrap();
            write_csv(&mut cb, &b).unwrap();
            assert_eq!(ca, cb);
            assert_ne!(a, synth_dataset(30, 100, signal).unwrap());
        }
    }

    #[test]
    fn minimal_random_rows_are_valid() {
        for seed in 0..20 {
            let recs = synth_dataset(2, seed, Signal::Random).unwrap();
            assert_eq!(recs.len(), 2);
            for r in &recs {
                r.validate().unwrap();
                assert_eq!(derive_features(r.clone()).unwrap().derived, r.derived);
            }
        }
        assert!(synth_dataset(1, 0, Signal::Random).is_err());
    }

    #[test]
    fn random_signal_is_roughly_balanced() {
        let recs = synth_dataset(2000, 3, Signal::Random).unwrap();
        let poor = recs.iter().filter(|r| r.label().unwrap() == Label::Poor).count();
        assert!((800..1200).contains(&poor), "{poor}");
    }

    #[test]
    fn matrix_shape() {
        let d = synth_matrix(120, 33, 1).unwrap();
        assert_eq!((d.rows(), d.columns(), d.features().len()), (120, 33, 3960));
        assert!(d.count(Label::Poor) > 20 && d.count(Label::Good) > 20);
    }
}
