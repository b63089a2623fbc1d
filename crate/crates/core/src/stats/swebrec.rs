use nalgebra::{Matrix3, Vector3};

use super::{SieveSeries, StatsError};

pub const DEFAULT_CURVE_SAMPLES: usize = 200;

/// `P(x) = 100 / (1 + [ln(x_max/x) / ln(x_max/x_50)]^b)` on `0 < x ≤ x_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwebrecCurve {
    x_max: f64,
    x_50: f64,
    b: f64,
}

impl SwebrecCurve {
    pub fn new(x_max: f64, x_50: f64, b: f64) -> Result<Self, StatsError> {
        let ok = x_max.is_finite() && b.is_finite() && x_50 > 0.0 && x_max > x_50 && b > 0.0;
        if !ok {
            return Err(StatsError::InvalidParameters { x_max, x_50, b });
        }
        Ok(Self { x_max, x_50, b })
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn x_50(&self) -> f64 {
        self.x_50
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn percent_passing(&self, x: f64) -> Result<f64, StatsError> {
        if !(x > 0.0 && x <= self.x_max) {
            return Err(StatsError::Domain {
                x,
                x_max: self.x_max,
            });
        }
        Ok(self.eval(x))
    }

    fn eval(&self, x: f64) -> f64 {
        let r = (self.x_max / x).ln() / (self.x_max / self.x_50).ln();
        100.0 / (1.0 + r.powf(self.b))
    }

    fn from_log(theta: &Vector3<f64>) -> Option<Self> {
        Self::new(theta[0].exp(), theta[1].exp(), theta[2].exp()).ok()
    }

    fn log_params(&self) -> Vector3<f64> {
        Vector3::new(self.x_max.ln(), self.x_50.ln(), self.b.ln())
    }

    /// Value and gradient with respect to `(ln x_max, ln x_50, ln b)`.
    fn eval_with_gradient(&self, x: f64) -> (f64, Vector3<f64>) {
        let l = (self.x_max / x).ln();
        let m = (self.x_max / self.x_50).ln();
        if l <= 0.0 {
            return (100.0, Vector3::zeros());
        }
        let r = l / m;
        let u = r.powf(self.b);
        let p = 100.0 / (1.0 + u);
        let dp_dlnu = -100.0 * u / ((1.0 + u) * (1.0 + u));
        let b = self.b;
        let dlnu = Vector3::new(b * (1.0 / l - 1.0 / m), b / m, b * r.ln());
        (p, dlnu * dp_dlnu)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwebrecFit {
    pub curve: SwebrecCurve,
    /// Euclidean norm of the percent-passing residuals.
    pub residual_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Converged once an accepted step changes every log-parameter by less.
    pub step_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            step_tolerance: 1e-13,
        }
    }
}

/// Least-squares Swebrec fit to a sieve series.
pub fn fit_swebrec(series: &SieveSeries, options: &FitOptions) -> Result<SwebrecFit, StatsError> {
    let pts = series.points();
    if pts.len() < 3 {
        return Err(StatsError::TooFewPoints {
            needed: 3,
            got: pts.len(),
        });
    }
    if let Some(index) = pts.iter().position(|&(_, p)| !(p > 0.0 && p < 100.0)) {
        return Err(StatsError::PercentNotInterior { index });
    }
    if pts.iter().all(|&(_, p)| p == pts[0].1) {
        return Err(StatsError::FitFailure {
            reason: "all percent-passing values are equal",
            best: None,
        });
    }

    let largest = pts[pts.len() - 1].0;
    let median_guess = initial_median(pts);
    let mut best: Option<(f64, SwebrecFit, bool)> = None;
    for x_max_factor in [1.5, 1.05, 1.2, 2.0, 3.0, 5.0, 10.0] {
        for b in [2.0, 0.8, 4.0] {
            let x_max = largest * x_max_factor;
            let x_50 = median_guess.min(0.9 * x_max);
            let Ok(start) = SwebrecCurve::new(x_max, x_50, b) else {
                continue;
            };
            let (cost, fit, converged) = levenberg_marquardt(pts, start, options);
            let better = match &best {
                None => true,
                Some((c, _, conv)) => (converged && !conv) || (converged == *conv && cost < *c),
            };
            if better {
                best = Some((cost, fit, converged));
            }
        }
    }
    match best {
        Some((_, fit, true)) => Ok(fit),
        Some((_, fit, false)) => Err(StatsError::FitFailure {
            reason: "iteration budget exhausted",
            best: Some(fit),
        }),
        None => Err(StatsError::FitFailure {
            reason: "no feasible starting point",
            best: None,
        }),
    }
}

fn initial_median(pts: &[(f64, f64)]) -> f64 {
    for w in pts.windows(2) {
        let ((s0, p0), (s1, p1)) = (w[0], w[1]);
        if p0 <= 50.0 && p1 >= 50.0 {
            return if p1 > p0 {
                s0 + (50.0 - p0) / (p1 - p0) * (s1 - s0)
            } else {
                s0
            };
        }
    }
    if pts[0].1 > 50.0 {
        0.5 * pts[0].0
    } else {
        pts[pts.len() - 1].0
    }
}

fn cost(pts: &[(f64, f64)], curve: &SwebrecCurve) -> f64 {
    pts.iter()
        .map(|&(x, p)| {
            let r = curve.eval(x) - p;
            r * r
        })
        .sum()
}

fn feasible(pts: &[(f64, f64)], curve: &SwebrecCurve) -> bool {
    pts.iter().all(|&(x, _)| x < curve.x_max)
}

/// Damped Gauss–Newton in log-parameters with Marquardt diagonal scaling.
/// Returns the final sum of squares, the fit and whether it converged.
fn levenberg_marquardt(
    pts: &[(f64, f64)],
    start: SwebrecCurve,
    options: &FitOptions,
) -> (f64, SwebrecFit, bool) {
    let mut curve = start;
    let mut theta = curve.log_params();
    let mut sse = cost(pts, &curve);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        if sse == 0.0 {
            converged = true;
            break;
        }
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for &(x, p) in pts {
            let (value, grad) = curve.eval_with_gradient(x);
            jtj += grad * grad.transpose();
            jtr += grad * (value - p);
        }
        let diag_floor = 1e-12 * jtj.diagonal().max().max(f64::MIN_POSITIVE);

        let mut accepted = false;
        while lambda < 1e20 {
            let mut damped = jtj;
            for k in 0..3 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(diag_floor);
            }
            let step = damped.cholesky().map(|c| c.solve(&(-jtr)));
            if let Some(step) = step {
                let next = theta + step;
                if let Some(candidate) = SwebrecCurve::from_log(&next) {
                    if feasible(pts, &candidate) {
                        let next_sse = cost(pts, &candidate);
                        if next_sse < sse {
                            theta = next;
                            curve = candidate;
                            sse = next_sse;
                            lambda = (lambda / 3.0).max(1e-15);
                            accepted = true;
                            if step.amax() < options.step_tolerance {
                                converged = true;
                            }
                            break;
                        }
                    }
                }
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No damped step lowers the cost: a minimum to working precision.
            converged = true;
        }
        if converged {
            break;
        }
    }
    let fit = SwebrecFit {
        curve,
        residual_norm: sse.sqrt(),
        iterations,
    };
    (sse, fit, converged)
}

/// `measured − reference` percent passing at each sieve size.
pub fn percent_error_residuals(
    measured: &SieveSeries,
    reference: &SwebrecCurve,
) -> Result<Vec<(f64, f64)>, StatsError> {
    measured
        .points()
        .iter()
        .map(|&(x, p)| Ok((x, p - reference.percent_passing(x)?)))
        .collect()
}

/// RMS of `f − g` over `[lo, hi]` in `ln x`, by the trapezoid rule on `n`
/// log-spaced samples.
pub fn rms_difference<F, G>(f: F, g: G, lo: f64, hi: f64, n: usize) -> Result<f64, StatsError>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    if n < 2 {
        return Err(StatsError::TooFewSamples(n));
    }
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(StatsError::DomainMismatch { lo, hi });
    }
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (n - 1) as f64;
    let mut sum = 0.0;
    for k in 0..n {
        let x = match k {
            0 => lo,
            k if k == n - 1 => hi,
            k => (a + step * k as f64).exp(),
        };
        let d = f(x) - g(x);
        let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        sum += w * d * d;
    }
    Ok((sum / (n - 1) as f64).sqrt())
}

/// RMS percent-passing difference between two curves on `[lo, hi]`.
pub fn curve_l2_error(
    a: &SwebrecCurve,
    b: &SwebrecCurve,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<f64, StatsError> {
    if hi > a.x_max.min(b.x_max) {
        return Err(StatsError::DomainMismatch { lo, hi });
    }
    rms_difference(|x| a.eval(x), |x| b.eval(x), lo, hi, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn series_from(curve: &SwebrecCurve, sizes: &[f64]) -> SieveSeries {
        SieveSeries::new(
            sizes
                .iter()
                .map(|&x| (x, curve.percent_passing(x).unwrap()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn closed_form_values() {
        let c = SwebrecCurve::new(100.0, 10.0, 2.0).unwrap();
        assert_eq!(c.percent_passing(10.0).unwrap(), 50.0);
        assert_eq!(c.percent_passing(100.0).unwrap(), 100.0);
        assert_relative_eq!(
            c.percent_passing(10f64.powf(1.5)).unwrap(),
            80.0,
            max_relative = 1e-12
        );
        assert!(c.percent_passing(0.0).is_err());
        assert!(c.percent_passing(100.5).is_err());
        assert!(SwebrecCurve::new(10.0, 10.0, 1.0).is_err());
        assert!(SwebrecCurve::new(10.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let c = SwebrecCurve::new(19.0, 8.0, 2.3).unwrap();
        let theta = c.log_params();
        for x in [0.5, 3.0, 8.0, 15.0] {
            let (_, grad) = c.eval_with_gradient(x);
            for k in 0..3 {
                let h = 1e-6;
                let mut up = theta;
                let mut dn = theta;
                up[k] += h;
                dn[k] -= h;
                let fd = (SwebrecCurve::from_log(&up).unwrap().eval(x)
                    - SwebrecCurve::from_log(&dn).unwrap().eval(x))
                    / (2.0 * h);
                assert_relative_eq!(grad[k], fd, epsilon = 1e-6, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn recovers_coarse_gravel_parameters() {
        let truth = SwebrecCurve::new(19.0, 8.0, 2.0).unwrap();
        let series = series_from(&truth, &[1.0, 2.36, 4.75, 9.5, 12.5, 16.0]);
        let fit = fit_swebrec(&series, &FitOptions::default()).unwrap();
        assert_relative_eq!(fit.curve.x_max(), 19.0, max_relative = 1e-6);
        assert_relative_eq!(fit.curve.x_50(), 8.0, max_relative = 1e-6);
        assert_relative_eq!(fit.curve.b(), 2.0, max_relative = 1e-6);
        assert!(fit.residual_norm < 1e-9);
    }

    #[test]
    fn three_points_are_interpolated() {
        let truth = SwebrecCurve::new(50.0, 12.0, 1.4).unwrap();
        let series = series_from(&truth, &[3.0, 12.5, 30.0]);
        let fit = fit_swebrec(&series, &FitOptions::default()).unwrap();
        for &(x, p) in series.points() {
            assert_relative_eq!(fit.curve.percent_passing(x).unwrap(), p, epsilon = 1e-9);
        }
    }

    #[test]
    fn flat_series_fails() {
        let series = SieveSeries::new(vec![(1.0, 40.0), (2.0, 40.0), (3.0, 40.0)]).unwrap();
        assert!(matches!(
            fit_swebrec(&series, &FitOptions::default()),
            Err(StatsError::FitFailure { best: None, .. })
        ));
    }

    #[test]
    fn exhausted_budget_reports_best_so_far() {
        let truth = SwebrecCurve::new(19.0, 8.0, 2.0).unwrap();
        let series = series_from(&truth, &[1.0, 2.36, 4.75, 9.5, 12.5, 16.0]);
        let tight = FitOptions {
            max_iterations: 1,
            step_tolerance: 0.0,
        };
        match fit_swebrec(&series, &tight) {
            Err(StatsError::FitFailure { best: Some(f), .. }) => assert_eq!(f.iterations, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fit_requires_interior_percents() {
        let series = SieveSeries::new(vec![(1.0, 10.0), (2.0, 50.0), (3.0, 100.0)]).unwrap();
        assert_eq!(
            fit_swebrec(&series, &FitOptions::default()),
            Err(StatsError::PercentNotInterior { index: 2 })
        );
    }

    #[test]
    fn residuals_are_measured_minus_reference() {
        let c = SwebrecCurve::new(100.0, 10.0, 2.0).unwrap();
        let m = SieveSeries::new(vec![(10.0, 55.0)]).unwrap();
        assert_eq!(percent_error_residuals(&m, &c).unwrap(), vec![(10.0, 5.0)]);
        let exact = series_from(&c, &[1.0, 10.0, 50.0]);
        assert!(percent_error_residuals(&exact, &c)
            .unwrap()
            .iter()
            .all(|r| r.1 == 0.0));
    }

    #[test]
    fn rms_of_constant_offset_is_the_offset() {
        let v = rms_difference(|x| x.ln() + 1.0, |x| x.ln(), 0.5, 40.0, 17).unwrap();
        assert_relative_eq!(v, 1.0, max_relative = 1e-12);
        let c = SwebrecCurve::new(19.0, 8.0, 2.0).unwrap();
        assert_eq!(curve_l2_error(&c, &c, 0.1, 19.0, 200).unwrap(), 0.0);
    }

    #[test]
    fn curve_error_matches_simpson_integration() {
        let a = SwebrecCurve::new(19.0, 8.0, 2.0).unwrap();
        let b = SwebrecCurve::new(22.0, 7.0, 1.7).unwrap();
        let (lo, hi) = (0.5f64, 19.0f64);
        // Composite Simpson in ln x with a fine even partition.
        let m = 20_000;
        let (la, lb) = (lo.ln(), hi.ln());
        let h = (lb - la) / m as f64;
        let d2 = |s: f64| {
            let x = s.exp().clamp(lo, hi);
            (a.percent_passing(x).unwrap() - b.percent_passing(x).unwrap()).powi(2)
        };
        let mut acc = d2(la) + d2(lb);
        for k in 1..m {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * d2(la + h * k as f64);
        }
        let oracle = (acc * h / 3.0 / (lb - la)).sqrt();
        let value = curve_l2_error(&a, &b, lo, hi, 20_001).unwrap();
        assert_relative_eq!(value, oracle, max_relative = 1e-6);
        let coarse = curve_l2_error(&a, &b, lo, hi, DEFAULT_CURVE_SAMPLES).unwrap();
        assert_relative_eq!(coarse, oracle, max_relative = 1e-3);
    }

    #[test]
    fn curve_error_domain_checks() {
        let a = SwebrecCurve::new(19.0, 8.0, 2.0).unwrap();
        let b = SwebrecCurve::new(15.0, 7.0, 2.0).unwrap();
        assert!(curve_l2_error(&a, &b, 1.0, 16.0, 10).is_err());
        assert!(curve_l2_error(&a, &b, 0.0, 10.0, 10).is_err());
        assert!(curve_l2_error(&a, &b, 1.0, 10.0, 1).is_err());
    }

    proptest! {
        #[test]
        fn percent_passing_is_increasing(
            x_max in 1.0f64..1000.0,
            frac in 0.05f64..0.9,
            b in 0.3f64..5.0,
            s in 0.01f64..0.99,
            t in 0.01f64..0.99,
        ) {
            prop_assume!((s - t).abs() > 1e-3);
            let c = SwebrecCurve::new(x_max, frac * x_max, b).unwrap();
            let (lo, hi) = (s.min(t) * x_max, s.max(t) * x_max);
            prop_assert!(c.percent_passing(lo).unwrap() < c.percent_passing(hi).unwrap());
            prop_assert!(c.percent_passing(hi).unwrap() < c.percent_passing(x_max).unwrap());
        }

        #[test]
        fn refitting_a_fit_is_idempotent(
            x_max in 5.0f64..200.0,
            frac in 0.1f64..0.7,
            b in 0.6f64..4.0,
        ) {
            let truth = SwebrecCurve::new(x_max, frac * x_max, b).unwrap();
            let sizes: Vec<f64> = (0..7).map(|k| x_max * 0.03 * 1.7f64.powi(k)).collect();
            let fit = fit_swebrec(&series_from(&truth, &sizes), &FitOptions::default()).unwrap();
            let again = fit_swebrec(&series_from(&fit.curve, &sizes), &FitOptions::default()).unwrap();
            for (p, q) in [
                (fit.curve.x_max(), again.curve.x_max()),
                (fit.curve.x_50(), again.curve.x_50()),
                (fit.curve.b(), again.curve.b()),
            ] {
                prop_assert!((p - q).abs() <= 1e-6 * p);
            }
        }
    }
}
