//! Incremental (Bowyer–Watson) Delaunay triangulation in the plane.
//!
//! The hull is closed with ghost triangles that share a vertex at infinity,
//! so points outside the current hull are inserted by the same cavity
//! re-triangulation as interior points and no super-triangle remnants need
//! to be stripped afterwards. Orientation and in-circle tests use adaptive
//! exact predicates.

use robust::{incircle, orient2d, Coord};

/// Vertex index of the point at infinity.
const INFINITE: usize = usize::MAX;
const NO_TRIANGLE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum DelaunayError {
    TooFewPoints,
    Collinear,
}

#[derive(Debug, Clone, Copy)]
struct Tri {
    /// Counter-clockwise; at most one entry is [`INFINITE`].
    v: [usize; 3],
    /// `n[i]` shares the edge opposite `v[i]`.
    n: [usize; 3],
}

impl Tri {
    fn ghost_slot(&self) -> Option<usize> {
        self.v.iter().position(|&v| v == INFINITE)
    }
}

struct BoundaryEdge {
    a: usize,
    b: usize,
    outer: usize,
    outer_slot: usize,
}

struct Triangulator<'a> {
    pts: &'a [[f64; 2]],
    tris: Vec<Tri>,
    alive: Vec<bool>,
    free: Vec<usize>,
    // Scratch state for cavity searches, stamped per insertion.
    stamp: Vec<u32>,
    epoch: u32,
    last: usize,
}

fn coord(p: &[f64; 2]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

impl<'a> Triangulator<'a> {
    fn orient(&self, a: usize, b: usize, c: usize) -> f64 {
        orient2d(
            coord(&self.pts[a]),
            coord(&self.pts[b]),
            coord(&self.pts[c]),
        )
    }

    fn alloc(&mut self, tri: Tri) -> usize {
        if let Some(id) = self.free.pop() {
            self.tris[id] = tri;
            self.alive[id] = true;
            id
        } else {
            self.tris.push(tri);
            self.alive.push(true);
            self.stamp.push(0);
            self.tris.len() - 1
        }
    }

    fn seed(&mut self, a: usize, b: usize, c: usize) {
        let faces = [
            [a, b, c],
            [b, a, INFINITE],
            [c, b, INFINITE],
            [a, c, INFINITE],
        ];
        let ids: Vec<usize> = faces
            .iter()
            .map(|&v| {
                self.alloc(Tri {
                    v,
                    n: [NO_TRIANGLE; 3],
                })
            })
            .collect();
        self.link_among(&ids);
        self.last = ids[0];
    }

    /// Connects every pair of triangles in `ids` that share an edge.
    fn link_among(&mut self, ids: &[usize]) {
        for &t in ids {
            for i in 0..3 {
                let v = self.tris[t].v;
                let (a, b) = (v[(i + 1) % 3], v[(i + 2) % 3]);
                for &u in ids {
                    if u == t {
                        continue;
                    }
                    let w = self.tris[u].v;
                    if let Some(j) = (0..3).find(|&j| w[(j + 1) % 3] == b && w[(j + 2) % 3] == a) {
                        self.tris[t].n[i] = u;
                        self.tris[u].n[j] = t;
                    }
                }
            }
        }
    }

    /// Whether `p` lies strictly inside the circumcircle of `t`. For ghost
    /// triangles the "circle" is the open outer half-plane of the hull edge
    /// together with the open edge itself.
    fn in_conflict(&self, t: usize, p: usize) -> bool {
        let tri = &self.tris[t];
        match tri.ghost_slot() {
            Some(k) => {
                let a = tri.v[(k + 1) % 3];
                let b = tri.v[(k + 2) % 3];
                let o = self.orient(a, b, p);
                o > 0.0 || (o == 0.0 && strictly_between(&self.pts[a], &self.pts[b], &self.pts[p]))
            }
            None => {
                let [a, b, c] = tri.v;
                incircle(
                    coord(&self.pts[a]),
                    coord(&self.pts[b]),
                    coord(&self.pts[c]),
                    coord(&self.pts[p]),
                ) > 0.0
            }
        }
    }

    /// Visibility walk from the most recently created triangle. Returns a
    /// triangle whose circumcircle contains `p`.
    fn locate(&self, p: usize) -> usize {
        let mut t = self.last;
        if let Some(k) = self.tris[t].ghost_slot() {
            t = self.tris[t].n[k];
        }
        let mut came_from = NO_TRIANGLE;
        let budget = 4 * self.tris.len() + 16;
        'walk: for step in 0..budget {
            let tri = &self.tris[t];
            if tri.ghost_slot().is_some() {
                return t;
            }
            // `p` is strictly inside the edge we arrived through, so skip it.
            // Rotating the first edge tried keeps the walk from cycling.
            for r in 0..3 {
                let i = (r + step) % 3;
                let next = tri.n[i];
                if next == came_from {
                    continue;
                }
                let (a, b) = (tri.v[(i + 1) % 3], tri.v[(i + 2) % 3]);
                if self.orient(a, b, p) < 0.0 {
                    came_from = t;
                    t = next;
                    continue 'walk;
                }
            }
            return t;
        }
        // The walk terminates on Delaunay triangulations; scan as a last resort.
        (0..self.tris.len())
            .find(|&t| self.alive[t] && self.in_conflict(t, p))
            .expect("some triangle conflicts with every new point")
    }

    fn insert(&mut self, p: usize) {
        let start = self.locate(p);
        debug_assert!(self.in_conflict(start, p));

        self.epoch += 1;
        let epoch = self.epoch;
        let mut cavity = vec![start];
        let mut boundary = Vec::new();
        self.stamp[start] = epoch;
        let mut cursor = 0;
        while cursor < cavity.len() {
            let t = cavity[cursor];
            cursor += 1;
            let tri = self.tris[t];
            for i in 0..3 {
                let u = tri.n[i];
                if self.stamp[u] == epoch {
                    continue;
                }
                if self.in_conflict(u, p) {
                    self.stamp[u] = epoch;
                    cavity.push(u);
                } else {
                    let outer_slot = (0..3)
                        .find(|&j| self.tris[u].n[j] == t)
                        .expect("adjacency is symmetric");
                    boundary.push(BoundaryEdge {
                        a: tri.v[(i + 1) % 3],
                        b: tri.v[(i + 2) % 3],
                        outer: u,
                        outer_slot,
                    });
                }
            }
        }

        for &t in &cavity {
            self.alive[t] = false;
            self.free.push(t);
        }

        let mut fan = Vec::with_capacity(boundary.len());
        for edge in &boundary {
            let id = self.alloc(Tri {
                v: [edge.a, edge.b, p],
                n: [NO_TRIANGLE, NO_TRIANGLE, edge.outer],
            });
            self.tris[edge.outer].n[edge.outer_slot] = id;
            fan.push(id);
        }
        // The cavity boundary is a simple cycle around `p`: each boundary
        // vertex starts exactly one edge and ends exactly one edge.
        for &x in &fan {
            let [a, b, _] = self.tris[x].v;
            let after = *fan
                .iter()
                .find(|&&y| self.tris[y].v[0] == b)
                .expect("cavity boundary is closed");
            let before = *fan
                .iter()
                .find(|&&y| self.tris[y].v[1] == a)
                .expect("cavity boundary is closed");
            self.tris[x].n[0] = after;
            self.tris[x].n[1] = before;
        }
        self.last = *fan
            .iter()
            .find(|&&y| self.tris[y].ghost_slot().is_none())
            .unwrap_or(&fan[0]);
    }
}

fn strictly_between(a: &[f64; 2], b: &[f64; 2], p: &[f64; 2]) -> bool {
    let axis = if a[0] != b[0] { 0 } else { 1 };
    let (lo, hi) = if a[axis] < b[axis] {
        (a[axis], b[axis])
    } else {
        (b[axis], a[axis])
    };
    lo < p[axis] && p[axis] < hi
}

/// Position along a Hilbert curve over a `2^16 × 2^16` grid.
fn hilbert_key(x: u32, y: u32) -> u64 {
    let (mut x, mut y) = (x, y);
    let mut d = 0u64;
    let mut s = 1u32 << 15;
    while s > 0 {
        let rx = u32::from(x & s > 0);
        let ry = u32::from(y & s > 0);
        d += u64::from(s) * u64::from(s) * u64::from((3 * rx) ^ ry);
        if ry == 0 {
            if rx == 1 {
                x = 0xffff - x;
                y = 0xffff - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        s >>= 1;
    }
    d
}

/// Insertion order: points sorted along a Hilbert curve so that each walk
/// starts close to its target. Ties keep input order.
fn insertion_order(pts: &[[f64; 2]]) -> Vec<usize> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in pts {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let quantize = |v: f64, k: usize| -> u32 {
        let span = hi[k] - lo[k];
        if span > 0.0 {
            (((v - lo[k]) / span) * 65535.0).round().clamp(0.0, 65535.0) as u32
        } else {
            0
        }
    };
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by_key(|&i| hilbert_key(quantize(pts[i][0], 0), quantize(pts[i][1], 1)));
    order
}

/// Triangulates distinct planar points. Returns counter-clockwise index
/// triples; every input point is a vertex of the result.
pub(crate) fn triangulate(pts: &[[f64; 2]]) -> Result<Vec<[usize; 3]>, DelaunayError> {
    if pts.len() < 3 {
        return Err(DelaunayError::TooFewPoints);
    }
    let order = insertion_order(pts);
    let a = order[0];
    let b = order[1];
    let c = *order[2..]
        .iter()
        .find(|&&c| orient2d(coord(&pts[a]), coord(&pts[b]), coord(&pts[c])) != 0.0)
        .ok_or(DelaunayError::Collinear)?;

    let mut tr = Triangulator {
        pts,
        tris: Vec::with_capacity(2 * pts.len() + 8),
        alive: Vec::new(),
        free: Vec::new(),
        stamp: Vec::new(),
        epoch: 0,
        last: 0,
    };
    if tr.orient(a, b, c) > 0.0 {
        tr.seed(a, b, c);
    } else {
        tr.seed(a, c, b);
    }
    for &p in &order {
        if p != a && p != b && p != c {
            tr.insert(p);
        }
    }

    Ok(tr
        .tris
        .iter()
        .zip(&tr.alive)
        .filter(|(t, &alive)| alive && t.ghost_slot().is_none())
        .map(|(t, _)| t.v)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orient_f(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    }

    #[test]
    fn single_triangle() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let tris = triangulate(&pts).unwrap();
        assert_eq!(tris.len(), 1);
        let [a, b, c] = tris[0];
        assert!(orient_f(pts[a], pts[b], pts[c]) > 0.0);
    }

    #[test]
    fn collinear_and_short_inputs_fail() {
        assert_eq!(
            triangulate(&[[0.0, 0.0], [1.0, 1.0]]),
            Err(DelaunayError::TooFewPoints)
        );
        assert_eq!(
            triangulate(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]),
            Err(DelaunayError::Collinear)
        );
    }

    #[test]
    fn collinear_prefix_then_offset_point() {
        // Hull grows along a line before the first non-collinear point.
        let pts = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [1.5, 1.0]];
        let tris = triangulate(&pts).unwrap();
        assert_eq!(tris.len(), 3);
    }

    #[test]
    fn hilbert_key_is_a_bijection_on_small_grid() {
        let mut keys: Vec<u64> = (0..16u32)
            .flat_map(|x| (0..16u32).map(move |y| hilbert_key(x << 12, y << 12)))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len(), 256);
    }
}
