//! Line/triangle-plane intersection by solving the 3×3 parametric system
//!
//! ```text
//! p_a + (p_b - p_a) t = p_0 + (p_1 - p_0) η + (p_2 - p_0) μ
//! ```
//!
//! for `(t, η, μ)`, i.e.
//!
//! ```text
//! [p_a - p_b | p_1 - p_0 | p_2 - p_0] · (t, η, μ)ᵀ = p_a - p_0
//! ```

use nalgebra::{Point3, Vector3};

/// Systems with a 1-norm condition number above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleHit {
    /// Line parameter.
    pub t: f64,
    /// Weight of `p_1 - p_0`.
    pub eta: f64,
    /// Weight of `p_2 - p_0`.
    pub mu: f64,
}

impl TriangleHit {
    /// Forward along the ray and inside the closed triangle.
    pub fn accepted(&self) -> bool {
        self.t >= 0.0
            && (0.0..=1.0).contains(&self.eta)
            && (0.0..=1.0).contains(&self.mu)
            && self.eta + self.mu <= 1.0
    }
}

/// Marker error: the line is (numerically) parallel to the triangle plane or
/// the triangle is degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Singular;

/// Solves for the intersection of the line through `a` and `b` with the plane
/// spanned by `tri`.
pub fn intersect_triangle(
    a: &Point3<f64>,
    b: &Point3<f64>,
    tri: [&Point3<f64>; 3],
) -> Result<TriangleHit, Singular> {
    intersect_line(a, &(b - a), tri)
}

/// Same system with the line given as origin plus direction; `t` is then the
/// multiple of `direction`.
pub fn intersect_line(
    origin: &Point3<f64>,
    direction: &Vector3<f64>,
    tri: [&Point3<f64>; 3],
) -> Result<TriangleHit, Singular> {
    let [p0, p1, p2] = tri;
    let e1 = p1 - p0;
    let e2 = p2 - p0;
    let rhs = origin - p0;
    let m = [
        [-direction.x, e1.x, e2.x],
        [-direction.y, e1.y, e2.y],
        [-direction.z, e1.z, e2.z],
    ];
    let lu = Lu3::factor(m).ok_or(Singular)?;

    let inv = [
        lu.solve([1.0, 0.0, 0.0]),
        lu.solve([0.0, 1.0, 0.0]),
        lu.solve([0.0, 0.0, 1.0]),
    ];
    // `inv[j]` is column j of the inverse.
    let norm1 = |cols: [[f64; 3]; 3]| {
        cols.iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let m_cols = [
        [m[0][0], m[1][0], m[2][0]],
        [m[0][1], m[1][1], m[2][1]],
        [m[0][2], m[1][2], m[2][2]],
    ];
    let condition = norm1(m_cols) * norm1(inv);
    if !(condition <= MAX_CONDITION) {
        return Err(Singular);
    }

    let [t, eta, mu] = lu.solve([rhs.x, rhs.y, rhs.z]);
    Ok(TriangleHit { t, eta, mu })
}

/// LU factorization with partial pivoting of a 3×3 row-major matrix.
struct Lu3 {
    lu: [[f64; 3]; 3],
    perm: [usize; 3],
}

impl Lu3 {
    fn factor(mut a: [[f64; 3]; 3]) -> Option<Self> {
        let mut perm = [0, 1, 2];
        for k in 0..3 {
            let pivot = (k..3)
                .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
                .unwrap();
            if a[pivot][k] == 0.0 || !a[pivot][k].is_finite() {
                return None;
            }
            a.swap(k, pivot);
            perm.swap(k, pivot);
            for i in k + 1..3 {
                let factor = a[i][k] / a[k][k];
                a[i][k] = factor;
                for j in k + 1..3 {
                    a[i][j] -= factor * a[k][j];
                }
            }
        }
        Some(Self { lu: a, perm })
    }

    fn solve(&self, b: [f64; 3]) -> [f64; 3] {
        let mut x = [b[self.perm[0]], b[self.perm[1]], b[self.perm[2]]];
        for i in 1..3 {
            for j in 0..i {
                x[i] -= self.lu[i][j] * x[j];
            }
        }
        for i in (0..3).rev() {
            for j in i + 1..3 {
                x[i] -= self.lu[i][j] * x[j];
            }
            x[i] /= self.lu[i][i];
        }
        x
    }
}
