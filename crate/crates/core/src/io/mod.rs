//! File formats: PLY point clouds and mesh dumps, pose logs, scale reports,
//! sieve and group tables, and flat `key=value` configuration files.

pub mod config;
pub mod ply;
pub mod pose;
pub mod report;
pub mod tables;

pub use config::{Config, ConfigError};
pub use ply::{read_point_cloud, write_cloud_ply, write_mesh_ply, PlyEncoding, PlyError};
pub use pose::{read_pose_log, write_pose_log, PoseError, PoseLogEntry};
pub use report::{read_scale_report, write_scale_report, ReportError, ScaleReportRow};
pub use tables::{read_groups, read_sieve_series, TableError};

/// `%g`-style formatting with `digits` significant digits.
pub fn format_significant(value: f64, digits: usize) -> String {
    if !value.is_finite() {
        return value.to_string();
    }
    if value == 0.0 {
        return "0".to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, value);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{exp}", trim_fraction(mantissa))
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{value:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
