use std::io::{Read, Write};

use super::record::{derive_features, Derived, ParticipantRecord, Sex};
use crate::{Error, Result};

/// Canonical raw column names, in the order they are written.
pub const RAW_COLUMNS: [&str; 27] = [
    "id",
    "sex",
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
    "on_med",
    "hba1c_pct",
];

/// Read participant rows from CSV. Columns are located by header name, so
/// their order is free and unknown extra columns are ignored. Rows are
/// validated and their derived features computed.
pub fn parse_csv<R: Read>(source: R) -> Result<Vec<ParticipantRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    let mut index = [0usize; RAW_COLUMNS.len()];
    for (slot, name) in index.iter_mut().zip(RAW_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema {
                column: name.to_string(),
            })?;
    }

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let row_no = i + 1;
        let cell = |col: usize| -> Result<&str> {
            let name = RAW_COLUMNS[col];
            match row.get(index[col]) {
                Some(v) if !v.is_empty() => Ok(v),
                other => Err(Error::Parse {
                    row: row_no,
                    column: name.to_string(),
                    value: other.unwrap_or("").to_string(),
                }),
            }
        };
        let num = |col: usize| -> Result<f64> {
            let raw = cell(col)?;
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row: row_no,
                    column: RAW_COLUMNS[col].to_string(),
                    value: raw.to_string(),
                })
        };

        let sex_raw = cell(1)?;
        let sex = Sex::from_code(sex_raw).ok_or_else(|| Error::Parse {
            row: row_no,
            column: "sex".into(),
            value: sex_raw.to_string(),
        })?;
        let on_med_raw = cell(25)?;
        let on_med = match on_med_raw {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse {
                    row: row_no,
                    column: "on_med".into(),
                    value: other.to_string(),
                })
            }
        };
        let mut joint_angles_deg = [0.0; 14];
        for (k, a) in joint_angles_deg.iter_mut().enumerate() {
            *a = num(11 + k)?;
        }

        let record = ParticipantRecord {
            id: cell(0)?.to_string(),
            sex,
            age_years: num(2)?,
            height_m: num(3)?,
            weight_kg: num(4)?,
            waist_cm: num(5)?,
            hip_cm: num(6)?,
            neck_cm: num(7)?,
            wrist_right_cm: num(8)?,
            wrist_left_cm: num(9)?,
            ankle_cm: num(10)?,
            joint_angles_deg,
            on_med,
            hba1c_pct: num(26)?,
            derived: Derived::default(),
        };
        record
            .validate()
            .map_err(|e| Error::Validation(format!("row {row_no}: {e}")))?;
        records.push(derive_features(record)?);
    }
    Ok(records)
}

/// Write records using the canonical raw columns. Derived features are not
/// written; they are recomputed on parse. Floats use the shortest exact
/// decimal form, so parsing the output reproduces every value bit-for-bit.
pub fn write_csv<W: Write>(sink: W, records: &[ParticipantRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(RAW_COLUMNS)?;
    for r in records {
        let mut row: Vec<String> = Vec::with_capacity(RAW_COLUMNS.len());
        row.push(r.id.clone());
        row.push(r.sex.code().to_string());
        for v in [
            r.age_years,
            r.height_m,
            r.weight_kg,
            r.waist_cm,
            r.hip_cm,
            r.neck_cm,
            r.wrist_right_cm,
            r.wrist_left_cm,
            r.ankle_cm,
        ] {
            row.push(v.to_string());
        }
        row.extend(r.joint_angles_deg.iter().map(f64::to_string));
        row.push(if r.on_med { "1" } else { "0" }.to_string());
        row.push(r.hba1c_pct.to_string());
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}
