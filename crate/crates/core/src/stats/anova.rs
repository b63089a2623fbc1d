use super::fdist::{f_critical, f_sf};
use super::StatsError;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct AnovaTable {
    pub df_factor: f64,
    pub ss_factor: f64,
    pub ms_factor: f64,
    pub df_residual: f64,
    pub ss_residual: f64,
    pub ms_residual: f64,
    pub f: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub critical: f64,
    pub reject: bool,
}

impl AnovaTable {
    /// Completes a table from sums of squares and degrees of freedom.
    pub fn from_sums(
        ss_factor: f64,
        df_factor: f64,
        ss_residual: f64,
        df_residual: f64,
        alpha: f64,
    ) -> Result<Self, StatsError> {
        if !(df_factor > 0.0 && df_residual > 0.0) {
            return Err(StatsError::InvalidDegreesOfFreedom);
        }
        let ms_factor = ss_factor / df_factor;
        let ms_residual = ss_residual / df_residual;
        let f = if ms_residual > 0.0 {
            ms_factor / ms_residual
        } else if ms_factor > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        let critical = f_critical(df_factor, df_residual, alpha)?;
        Ok(Self {
            df_factor,
            ss_factor,
            ms_factor,
            df_residual,
            ss_residual,
            ms_residual,
            f,
            p_value: f_sf(f, df_factor, df_residual)?,
            alpha,
            critical,
            reject: f > critical,
        })
    }

    pub fn df_total(&self) -> f64 {
        self.df_factor + self.df_residual
    }

    pub fn ss_total(&self) -> f64 {
        self.ss_factor + self.ss_residual
    }
}

/// One-way ANOVA at the 5% level.
pub fn one_way_anova<G: AsRef<[f64]>>(groups: &[G]) -> Result<AnovaTable, StatsError> {
    one_way_anova_at(groups, DEFAULT_ALPHA)
}

pub fn one_way_anova_at<G: AsRef<[f64]>>(
    groups: &[G],
    alpha: f64,
) -> Result<AnovaTable, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    let mut sizes = Vec::with_capacity(groups.len());
    let mut means = Vec::with_capacity(groups.len());
    let mut ss_residual = 0.0;
    for (group, g) in groups.iter().enumerate() {
        let g = g.as_ref();
        if g.len() < 2 {
            return Err(StatsError::InsufficientReplication {
                group,
                count: g.len(),
            });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite { group });
        }
        let n = g.len() as f64;
        let mean = g.iter().sum::<f64>() / n;
        ss_residual += g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        sizes.push(n);
        means.push(mean);
    }
    let total: f64 = sizes.iter().sum();
    // Σ n_i (m_i - m)² written over pairs so equal group means give exactly 0.
    let mut ss_factor = 0.0;
    for i in 0..means.len() {
        for j in i + 1..means.len() {
            let d = means[i] - means[j];
            ss_factor += sizes[i] * sizes[j] * d * d;
        }
    }
    ss_factor /= total;

    let k = groups.len() as f64;
    AnovaTable::from_sums(ss_factor, k - 1.0, ss_residual, total - k, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn textbook_example() {
        // scipy.stats.f_oneway on the same data.
        let t = one_way_anova(&[
            vec![1.0, 2.0, 3.0],
            vec![2.0, 3.0, 4.0],
            vec![5.0, 6.0, 9.0],
        ])
        .unwrap();
        assert_eq!((t.df_factor, t.df_residual), (2.0, 6.0));
        assert_relative_eq!(t.f, 8.578947368421048, max_relative = 1e-12);
        assert_relative_eq!(t.p_value, 0.01739228024042076, max_relative = 1e-9);
        assert!(t.reject);
    }

    #[test]
    fn identical_groups_have_zero_factor() {
        let g = vec![0.1, 0.7, 1.3];
        let t = one_way_anova(&[g.clone(), g.clone(), g]).unwrap();
        assert_eq!(t.ss_factor, 0.0);
        assert_eq!(t.f, 0.0);
        assert!(!t.reject);
    }

    #[test]
    fn constant_groups() {
        let t = one_way_anova(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert_eq!(t.f, 0.0);
        let t = one_way_anova(&[[1.0, 1.0], [2.0, 2.0]]).unwrap();
        assert_eq!(t.f, f64::INFINITY);
        assert!(t.reject);
    }

    #[test]
    fn replication_is_required() {
        assert_eq!(
            one_way_anova(&[vec![1.0, 2.0], vec![3.0]]),
            Err(StatsError::InsufficientReplication { group: 1, count: 1 })
        );
        assert_eq!(
            one_way_anova(&[vec![1.0, 2.0]]),
            Err(StatsError::TooFewGroups(1))
        );
    }

    fn arb_groups() -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 2..8), 2..6)
    }

    proptest! {
        #[test]
        fn sums_of_squares_decompose(groups in arb_groups()) {
            let t = one_way_anova(&groups).unwrap();
            let all: Vec<f64> = groups.iter().flatten().copied().collect();
            let mean = all.iter().sum::<f64>() / all.len() as f64;
            let ss_total: f64 = all.iter().map(|v| (v - mean).powi(2)).sum();
            prop_assert!((t.ss_total() - ss_total).abs() <= 1e-9 * ss_total.max(1e-300));
            prop_assert_eq!(t.df_total(), all.len() as f64 - 1.0);
        }

        #[test]
        fn f_is_shift_and_scale_invariant(
            groups in arb_groups(),
            shift in -1e3f64..1e3,
            scale in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0],
        ) {
            let t = one_way_anova(&groups).unwrap();
            prop_assume!(t.ms_residual > 1e-6);
            let moved: Vec<Vec<f64>> = groups
                .iter()
                .map(|g| g.iter().map(|v| v * scale + shift).collect())
                .collect();
            let u = one_way_anova(&moved).unwrap();
            prop_assert!((t.f - u.f).abs() <= 1e-7 * t.f.max(1e-6));
        }
    }
}
