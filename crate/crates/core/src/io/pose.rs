//! Pose log CSV.
//!
//! One image per record: `id, x, y, z, qw, qx, qy, qz[, timestamp]`, or with
//! the rotation given as matrix rows, `id, x, y, z, c11 … c33[, timestamp]`.
//! The layout is chosen per record by its column count. A first record whose
//! second field is not numeric is taken as a header.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use thiserror::Error;

use crate::camera::CameraPose;

/// Largest accepted deviation of a quaternion norm from 1, or of `CᵀC` from
/// the identity, before normalizing.
pub const ROTATION_DRIFT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum PoseError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: malformed CSV record")]
    Csv {
        line: u64,
        #[source]
        source: csv::Error,
    },
    #[error("line {line}, column {column}: missing field {field}")]
    MissingField {
        line: u64,
        column: usize,
        field: &'static str,
    },
    #[error("line {line}: expected 8, 9, 13 or 14 columns, found {found}")]
    ColumnCount { line: u64, found: usize },
    #[error("line {line}, column {column}: '{value}' is not a finite number")]
    Number {
        line: u64,
        column: usize,
        value: String,
    },
    #[error("line {line}: quaternion norm {norm} is not within {ROTATION_DRIFT_TOLERANCE} of 1")]
    QuaternionNorm { line: u64, norm: f64 },
    #[error("line {line}: rotation matrix deviates from orthonormal by {deviation}")]
    NotOrthonormal { line: u64, deviation: f64 },
    #[error("line {line}: rotation matrix has negative determinant")]
    Reflection { line: u64 },
    #[error("line {line}: empty image id")]
    EmptyId { line: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseLogEntry {
    pub image_id: String,
    pub pose: CameraPose,
    pub timestamp: Option<f64>,
}

const QUATERNION_FIELDS: [&str; 8] = ["image_id", "x", "y", "z", "qw", "qx", "qy", "qz"];

pub fn read_pose_log(path: impl AsRef<Path>) -> Result<Vec<PoseLogEntry>, PoseError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| PoseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_pose_log(file)
}

pub fn parse_pose_log(reader: impl Read) -> Result<Vec<PoseLogEntry>, PoseError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut entries = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record.map_err(|source| PoseError::Csv {
            line: source.position().map_or(0, |p| p.line()),
            source,
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if i == 0 && record.get(1).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        entries.push(parse_record(&record, line)?);
    }
    Ok(entries)
}

fn parse_record(record: &csv::StringRecord, line: u64) -> Result<PoseLogEntry, PoseError> {
    let found = record.len();
    if found < QUATERNION_FIELDS.len() {
        return Err(PoseError::MissingField {
            line,
            column: found + 1,
            field: QUATERNION_FIELDS[found],
        });
    }
    let image_id = record[0].to_string();
    if image_id.is_empty() {
        return Err(PoseError::EmptyId { line });
    }
    let number = |column: usize| -> Result<f64, PoseError> {
        let value = &record[column];
        match value.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(PoseError::Number {
                line,
                column: column + 1,
                value: value.to_string(),
            }),
        }
    };
    let translation = Vector3::new(number(1)?, number(2)?, number(3)?);
    let (rotation, timestamp_column) = match found {
        8 | 9 => {
            let q = Quaternion::new(number(4)?, number(5)?, number(6)?, number(7)?);
            let norm = q.norm();
            if !((norm - 1.0).abs() <= ROTATION_DRIFT_TOLERANCE) {
                return Err(PoseError::QuaternionNorm { line, norm });
            }
            let unit = UnitQuaternion::new_normalize(q);
            (*unit.to_rotation_matrix().matrix(), 8)
        }
        13 | 14 => {
            let mut m = Matrix3::zeros();
            for r in 0..3 {
                for c in 0..3 {
                    m[(r, c)] = number(4 + 3 * r + c)?;
                }
            }
            (nearest_rotation(&m, line)?, 13)
        }
        _ => return Err(PoseError::ColumnCount { line, found }),
    };
    let timestamp = match record.get(timestamp_column) {
        Some("") | None => None,
        Some(_) => Some(number(timestamp_column)?),
    };
    let pose = CameraPose::new(rotation, translation).expect("rotation projected onto SO(3)");
    Ok(PoseLogEntry {
        image_id,
        pose,
        timestamp,
    })
}

/// Projects a nearly orthonormal matrix onto SO(3) through its SVD.
fn nearest_rotation(m: &Matrix3<f64>, line: u64) -> Result<Matrix3<f64>, PoseError> {
    let deviation = (m.transpose() * m - Matrix3::identity()).abs().max();
    if !(deviation <= ROTATION_DRIFT_TOLERANCE) {
        return Err(PoseError::NotOrthonormal { line, deviation });
    }
    if m.determinant() <= 0.0 {
        return Err(PoseError::Reflection { line });
    }
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
    Ok(u * v_t)
}

/// Writes the quaternion layout; a timestamp column is added when any entry
/// carries one.
pub fn write_pose_log(out: impl Write, entries: &[PoseLogEntry]) -> Result<(), csv::Error> {
    let with_time = entries.iter().any(|e| e.timestamp.is_some());
    let mut csv = csv::Writer::from_writer(out);
    let mut header = QUATERNION_FIELDS.to_vec();
    if with_time {
        header.push("timestamp");
    }
    csv.write_record(&header)?;
    for e in entries {
        let q = UnitQuaternion::from_matrix(e.pose.rotation());
        let t = e.pose.translation();
        let mut row = vec![e.image_id.clone()];
        row.extend([t.x, t.y, t.z, q.w, q.i, q.j, q.k].map(|v| v.to_string()));
        if with_time {
            row.push(e.timestamp.map(|v| v.to_string()).unwrap_or_default());
        }
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}
