//! Sieve series (`size_mm,percent_passing`) and grouped observations
//! (`group_id,value`) as CSV.

use std::fs::File;
use std::io::{self, Read};
use std::path::Path;

use thiserror::Error;

use crate::stats::{SieveSeries, StatsError};

#[derive(Debug, Error)]
pub enum TableError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("missing column '{0}' in header")]
    MissingColumn(&'static str),
    #[error("line {line}, column {column}: '{value}' is not a finite number")]
    Number {
        line: u64,
        column: usize,
        value: String,
    },
    #[error("line {line}: invalid sieve series")]
    Series {
        line: u64,
        #[source]
        source: StatsError,
    },
    #[error("no data rows")]
    Empty,
}

fn open(path: &Path) -> Result<File, TableError> {
    File::open(path).map_err(|source| TableError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn column(headers: &csv::StringRecord, name: &'static str) -> Result<usize, TableError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or(TableError::MissingColumn(name))
}

fn number(record: &csv::StringRecord, column: usize) -> Result<f64, TableError> {
    let value = record.get(column).unwrap_or("");
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(TableError::Number {
            line: record.position().map_or(0, |p| p.line()),
            column: column + 1,
            value: value.to_string(),
        }),
    }
}

fn reader(r: impl Read) -> csv::Reader<impl Read> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(r)
}

pub fn parse_sieve_series(r: impl Read) -> Result<SieveSeries, TableError> {
    let mut csv = reader(r);
    let headers = csv.headers()?.clone();
    let (size, percent) = (
        column(&headers, "size_mm")?,
        column(&headers, "percent_passing")?,
    );
    let mut points = Vec::new();
    let mut lines = Vec::new();
    for record in csv.records() {
        let record = record?;
        points.push((number(&record, size)?, number(&record, percent)?));
        lines.push(record.position().map_or(0, |p| p.line()));
    }
    if points.is_empty() {
        return Err(TableError::Empty);
    }
    SieveSeries::new(points).map_err(|source| {
        let line = match source {
            StatsError::InvalidSize { index } | StatsError::InvalidPercent { index } => {
                lines[index]
            }
            _ => 0,
        };
        TableError::Series { line, source }
    })
}

pub fn read_sieve_series(path: impl AsRef<Path>) -> Result<SieveSeries, TableError> {
    parse_sieve_series(open(path.as_ref())?)
}

/// Groups in order of first appearance.
pub fn parse_groups(r: impl Read) -> Result<Vec<(String, Vec<f64>)>, TableError> {
    let mut csv = reader(r);
    let headers = csv.headers()?.clone();
    let (id, value) = (column(&headers, "group_id")?, column(&headers, "value")?);
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for record in csv.records() {
        let record = record?;
        let key = record.get(id).unwrap_or("");
        let v = number(&record, value)?;
        match groups.iter_mut().find(|(k, _)| k == key) {
            Some((_, values)) => values.push(v),
            None => groups.push((key.to_string(), vec![v])),
        }
    }
    if groups.is_empty() {
        return Err(TableError::Empty);
    }
    Ok(groups)
}

pub fn read_groups(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<f64>)>, TableError> {
    parse_groups(open(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sieve_csv() {
        let s = parse_sieve_series("size_mm,percent_passing\n1.0,12\n4.75, 55\n19,98\n".as_bytes())
            .unwrap();
        assert_eq!(s.points(), &[(1.0, 12.0), (4.75, 55.0), (19.0, 98.0)]);
        let err =
            parse_sieve_series("size_mm,percent_passing\n1,20\n2,10\n".as_bytes()).unwrap_err();
        assert!(matches!(err, TableError::Series { line: 3, .. }));
        let err = parse_sieve_series("size,percent\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, TableError::MissingColumn("size_mm")));
    }

    #[test]
    fn groups_csv_keeps_first_appearance_order() {
        let g = parse_groups("group_id,value\nb,1\na,2\nb,3\na,4\n".as_bytes()).unwrap();
        assert_eq!(
            g,
            vec![
                ("b".to_string(), vec![1.0, 3.0]),
                ("a".to_string(), vec![2.0, 4.0])
            ]
        );
        let err = parse_groups("group_id,value\nb,x\n".as_bytes()).unwrap_err();
        assert!(matches!(
            err,
            TableError::Number {
                line: 2,
                column: 2,
                ..
            }
        ));
    }
}
