//! Size-distribution analytics: sieve series, the Swebrec curve and its
//! least-squares fit, curve comparison, and one-way ANOVA.

mod anova;
mod fdist;
mod swebrec;

pub use anova::{one_way_anova, one_way_anova_at, AnovaTable, DEFAULT_ALPHA};
pub use fdist::{f_cdf, f_critical, f_sf};
pub use swebrec::{
    curve_l2_error, fit_swebrec, percent_error_residuals, rms_difference, FitOptions, SwebrecCurve,
    SwebrecFit, DEFAULT_CURVE_SAMPLES,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("sieve series needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("sieve sizes must be positive, finite and strictly increasing (point {index})")]
    InvalidSize { index: usize },
    #[error("percent passing must lie in [0, 100] and not decrease (point {index})")]
    InvalidPercent { index: usize },
    #[error("fitting needs percent passing strictly between 0 and 100 (point {index})")]
    PercentNotInterior { index: usize },
    #[error("invalid Swebrec parameters x_max={x_max}, x_50={x_50}, b={b}")]
    InvalidParameters { x_max: f64, x_50: f64, b: f64 },
    #[error("size {x} outside the curve domain (0, {x_max}]")]
    Domain { x: f64, x_max: f64 },
    #[error("curve comparison domain [{lo}, {hi}] is not inside both curves' domains")]
    DomainMismatch { lo: f64, hi: f64 },
    #[error("at least 2 samples are required, got {0}")]
    TooFewSamples(usize),
    #[error("Swebrec fit did not converge: {reason}")]
    FitFailure {
        reason: &'static str,
        best: Option<SwebrecFit>,
    },
    #[error("ANOVA needs at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("insufficient replication: group {group} has {count} observation(s)")]
    InsufficientReplication { group: usize, count: usize },
    #[error("observations must be finite (group {group})")]
    NonFinite { group: usize },
    #[error("degrees of freedom must be positive")]
    InvalidDegreesOfFreedom,
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
}

/// Discrete sieve series: screen sizes in mm with cumulative percent passing.
#[derive(Debug, Clone, PartialEq)]
pub struct SieveSeries {
    points: Vec<(f64, f64)>,
}

impl SieveSeries {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, StatsError> {
        if points.is_empty() {
            return Err(StatsError::TooFewPoints { needed: 1, got: 0 });
        }
        let mut prev: Option<(f64, f64)> = None;
        for (index, &(size, percent)) in points.iter().enumerate() {
            if !(size.is_finite() && size > 0.0) || prev.is_some_and(|(s, _)| size <= s) {
                return Err(StatsError::InvalidSize { index });
            }
            if !(0.0..=100.0).contains(&percent) || prev.is_some_and(|(_, p)| percent < p) {
                return Err(StatsError::InvalidPercent { index });
            }
            prev = Some((size, percent));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn sizes(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
