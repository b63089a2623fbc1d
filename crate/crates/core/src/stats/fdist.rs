//! Fisher–Snedecor distribution via the regularized incomplete beta function.

use statrs::function::beta::beta_reg;

use super::StatsError;

fn check_df(df1: f64, df2: f64) -> Result<(), StatsError> {
    if df1 > 0.0 && df2 > 0.0 && df1.is_finite() && df2.is_finite() {
        Ok(())
    } else {
        Err(StatsError::InvalidDegreesOfFreedom)
    }
}

/// `P(F ≤ f)`.
pub fn f_cdf(f: f64, df1: f64, df2: f64) -> Result<f64, StatsError> {
    check_df(df1, df2)?;
    if f <= 0.0 {
        return Ok(0.0);
    }
    if f == f64::INFINITY {
        return Ok(1.0);
    }
    let x = df1 * f / (df1 * f + df2);
    Ok(beta_reg(df1 / 2.0, df2 / 2.0, x))
}

/// `P(F > f)`, evaluated without cancellation in the upper tail.
pub fn f_sf(f: f64, df1: f64, df2: f64) -> Result<f64, StatsError> {
    check_df(df1, df2)?;
    if f <= 0.0 {
        return Ok(1.0);
    }
    if f == f64::INFINITY {
        return Ok(0.0);
    }
    let y = df2 / (df2 + df1 * f);
    Ok(beta_reg(df2 / 2.0, df1 / 2.0, y))
}

/// Upper-tail quantile: the `f` with `P(F > f) = alpha`.
pub fn f_critical(df1: f64, df2: f64, alpha: f64) -> Result<f64, StatsError> {
    check_df(df1, df2)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidAlpha(alpha));
    }
    // Solve I_y(df2/2, df1/2) = alpha for y = df2/(df2 + df1 f); the left
    // side increases with y.
    let (a, b) = (df2 / 2.0, df1 / 2.0);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = 0.5 * (lo + hi);
    Ok(df2 * (1.0 - y) / (df1 * y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Reference quantiles from scipy.stats.f.ppf(1 - alpha, df1, df2).
    #[test]
    fn critical_values() {
        assert_relative_eq!(
            f_critical(9.0, 20.0, 0.05).unwrap(),
            2.39281410844228,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            f_critical(3.0, 12.0, 0.01).unwrap(),
            5.952544681545868,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            f_critical(2.0, 27.0, 0.05).unwrap(),
            3.3541308285291986,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            f_critical(1.0, 1e6, 0.05).unwrap(),
            3.841468120171866,
            max_relative = 1e-6
        );
    }

    #[test]
    fn equal_df_median_is_one() {
        for d in [1.0, 2.0, 7.0, 30.0] {
            assert_relative_eq!(f_critical(d, d, 0.5).unwrap(), 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn cdf_and_sf_are_complementary() {
        for f in [0.1, 0.9, 2.0, 7.5] {
            let c = f_cdf(f, 4.0, 11.0).unwrap();
            let s = f_sf(f, 4.0, 11.0).unwrap();
            assert_relative_eq!(c + s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(f_critical(0.0, 3.0, 0.05).is_err());
        assert!(f_critical(3.0, 3.0, 1.0).is_err());
        assert!(f_cdf(1.0, 3.0, -1.0).is_err());
    }
}
