//! Scale report CSV.

use std::io::{Read, Write};

use thiserror::Error;

use super::format_significant;
use crate::scale::ImageScaleRecord;

pub const REPORT_DIGITS: usize = 9;

pub const REPORT_HEADER: [&str; 16] = [
    "image_id",
    "top_scale_px_per_m",
    "bottom_scale_px_per_m",
    "fallback_used",
    "tl_x",
    "tl_y",
    "tl_z",
    "tr_x",
    "tr_y",
    "tr_z",
    "bl_x",
    "bl_y",
    "bl_z",
    "br_x",
    "br_y",
    "br_z",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("scale report header does not match the expected columns")]
    Header,
    #[error("line {line}, column {column}: cannot parse '{value}'")]
    Value {
        line: u64,
        column: usize,
        value: String,
    },
}

/// A parsed report row.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleReportRow {
    pub image_id: String,
    pub top_scale: f64,
    pub bottom_scale: f64,
    pub fallback_used: bool,
    /// Top-left, top-right, bottom-left, bottom-right.
    pub corners: [[f64; 3]; 4],
}

impl From<&ImageScaleRecord> for ScaleReportRow {
    fn from(r: &ImageScaleRecord) -> Self {
        Self {
            image_id: r.image_id.clone(),
            top_scale: r.top_scale,
            bottom_scale: r.bottom_scale,
            fallback_used: r.any_fallback,
            corners: r.corners.map(|h| [h.point.x, h.point.y, h.point.z]),
        }
    }
}

pub fn write_scale_report(out: impl Write, records: &[ImageScaleRecord]) -> Result<(), csv::Error> {
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(REPORT_HEADER)?;
    for r in records {
        let row = ScaleReportRow::from(r);
        let g = |v: f64| format_significant(v, REPORT_DIGITS);
        let mut fields = vec![
            row.image_id,
            g(row.top_scale),
            g(row.bottom_scale),
            row.fallback_used.to_string(),
        ];
        fields.extend(row.corners.iter().flatten().map(|&v| g(v)));
        csv.write_record(&fields)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_scale_report(reader: impl Read) -> Result<Vec<ScaleReportRow>, ReportError> {
    let mut csv = csv::Reader::from_reader(reader);
    if csv.headers()?.iter().ne(REPORT_HEADER) {
        return Err(ReportError::Header);
    }
    let mut rows = Vec::new();
    for record in csv.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |column: usize| ReportError::Value {
            line,
            column: column + 1,
            value: record[column].to_string(),
        };
        let num = |column: usize| record[column].parse::<f64>().map_err(|_| bad(column));
        let mut corners = [[0.0; 3]; 4];
        for (k, v) in corners.iter_mut().flatten().enumerate() {
            *v = num(4 + k)?;
        }
        rows.push(ScaleReportRow {
            image_id: record[0].to_string(),
            top_scale: num(1)?,
            bottom_scale: num(2)?,
            fallback_used: record[3].parse().map_err(|_| bad(3))?,
            corners,
        });
    }
    Ok(rows)
}
