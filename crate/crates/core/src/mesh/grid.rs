//! Uniform grid over triangle xy-bounding boxes.
//!
//! Terrain rays are close to vertical, so binning in xy and walking the
//! cells under the ray's xy projection in order of increasing ray parameter
//! visits few triangles per query.

use nalgebra::{Point3, Vector3};

#[derive(Debug, Clone)]
pub struct GridIndex {
    lo: [f64; 2],
    hi: [f64; 2],
    cell: [f64; 2],
    dims: [usize; 2],
    /// CSR layout: triangles of cell `c` are `items[starts[c]..starts[c + 1]]`.
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl GridIndex {
    /// `resolution` fixes the number of cells along the longer xy extent;
    /// by default the grid holds about two triangles per cell.
    pub fn build(
        vertices: &[Point3<f64>],
        triangles: &[[usize; 3]],
        resolution: Option<usize>,
    ) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for tri in triangles {
            for &v in tri {
                let p = &vertices[v];
                lo = [lo[0].min(p.x), lo[1].min(p.y)];
                hi = [hi[0].max(p.x), hi[1].max(p.y)];
            }
        }
        if triangles.is_empty() {
            lo = [0.0; 2];
            hi = [0.0; 2];
        }
        let extent = [(hi[0] - lo[0]).max(0.0), (hi[1] - lo[1]).max(0.0)];
        let pad = 1e-9 * extent[0].max(extent[1]).max(1e-300);
        let lo = [lo[0] - pad, lo[1] - pad];
        let hi = [hi[0] + pad, hi[1] + pad];
        let extent = [hi[0] - lo[0], hi[1] - lo[1]];

        let dims = grid_dims(extent, triangles.len(), resolution);
        let cell = [extent[0] / dims[0] as f64, extent[1] / dims[1] as f64];

        let mut index = Self {
            lo,
            hi,
            cell,
            dims,
            starts: Vec::new(),
            items: Vec::new(),
        };

        let ranges: Vec<[usize; 4]> = triangles
            .iter()
            .map(|tri| {
                let xs = tri.map(|v| vertices[v].x);
                let ys = tri.map(|v| vertices[v].y);
                let min_x = xs.iter().copied().fold(f64::INFINITY, f64::min) - pad;
                let max_x = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + pad;
                let min_y = ys.iter().copied().fold(f64::INFINITY, f64::min) - pad;
                let max_y = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max) + pad;
                [
                    index.cell_of(min_x, 0),
                    index.cell_of(max_x, 0),
                    index.cell_of(min_y, 1),
                    index.cell_of(max_y, 1),
                ]
            })
            .collect();

        let ncells = dims[0] * dims[1];
        let mut counts = vec![0u32; ncells + 1];
        for r in &ranges {
            for iy in r[2]..=r[3] {
                for ix in r[0]..=r[1] {
                    counts[iy * dims[0] + ix + 1] += 1;
                }
            }
        }
        for c in 0..ncells {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; counts[ncells] as usize];
        for (t, r) in ranges.iter().enumerate() {
            for iy in r[2]..=r[3] {
                for ix in r[0]..=r[1] {
                    let c = iy * dims[0] + ix;
                    items[fill[c] as usize] = t as u32;
                    fill[c] += 1;
                }
            }
        }
        index.starts = counts;
        index.items = items;
        index
    }

    pub fn dims(&self) -> [usize; 2] {
        self.dims
    }

    fn cell_of(&self, v: f64, axis: usize) -> usize {
        let f = ((v - self.lo[axis]) / self.cell[axis]).floor();
        if f <= 0.0 {
            0
        } else {
            (f as usize).min(self.dims[axis] - 1)
        }
    }

    fn cell_items(&self, ix: usize, iy: usize) -> &[u32] {
        let c = iy * self.dims[0] + ix;
        &self.items[self.starts[c] as usize..self.starts[c + 1] as usize]
    }

    /// Calls `visit(triangles, t_exit)` for each cell under the ray with
    /// `t ≥ 0`, in order of increasing ray parameter. `t_exit` is where the
    /// ray leaves the cell. Stops early when `visit` returns `false`.
    pub fn traverse<F>(&self, origin: &Point3<f64>, dir: &Vector3<f64>, mut visit: F)
    where
        F: FnMut(&[u32], f64) -> bool,
    {
        if self.items.is_empty() {
            return;
        }
        let o = [origin.x, origin.y];
        let d = [dir.x, dir.y];

        let mut t_min = 0.0f64;
        let mut t_max = f64::INFINITY;
        for k in 0..2 {
            if d[k] == 0.0 {
                if o[k] < self.lo[k] || o[k] > self.hi[k] {
                    return;
                }
            } else {
                let a = (self.lo[k] - o[k]) / d[k];
                let b = (self.hi[k] - o[k]) / d[k];
                t_min = t_min.max(a.min(b));
                t_max = t_max.min(a.max(b));
            }
        }
        if t_min > t_max {
            return;
        }

        let start = [o[0] + d[0] * t_min, o[1] + d[1] * t_min];
        let mut cell = [self.cell_of(start[0], 0), self.cell_of(start[1], 1)];
        let mut step = [0isize; 2];
        let mut t_next = [f64::INFINITY; 2];
        let mut t_delta = [f64::INFINITY; 2];
        for k in 0..2 {
            if d[k] > 0.0 {
                step[k] = 1;
                t_next[k] = (self.lo[k] + (cell[k] + 1) as f64 * self.cell[k] - o[k]) / d[k];
                t_delta[k] = self.cell[k] / d[k];
            } else if d[k] < 0.0 {
                step[k] = -1;
                t_next[k] = (self.lo[k] + cell[k] as f64 * self.cell[k] - o[k]) / d[k];
                t_delta[k] = -self.cell[k] / d[k];
            }
        }

        loop {
            let t_exit = t_next[0].min(t_next[1]).min(t_max);
            if !visit(self.cell_items(cell[0], cell[1]), t_exit) || t_exit >= t_max {
                return;
            }
            let k = if t_next[0] < t_next[1] { 0 } else { 1 };
            let next = cell[k] as isize + step[k];
            if next < 0 || next as usize >= self.dims[k] {
                return;
            }
            cell[k] = next as usize;
            t_next[k] += t_delta[k];
        }
    }
}

fn grid_dims(extent: [f64; 2], triangles: usize, resolution: Option<usize>) -> [usize; 2] {
    const MAX_CELLS_PER_AXIS: usize = 4096;
    let (long, short) = if extent[0] >= extent[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    let aspect = if extent[long] > 0.0 {
        extent[short] / extent[long]
    } else {
        1.0
    };
    let n_long = match resolution {
        Some(r) => r.max(1),
        None => {
            let target = (triangles / 2).max(1) as f64;
            (target / aspect.max(1e-6)).sqrt().ceil() as usize
        }
    }
    .min(MAX_CELLS_PER_AXIS);
    let n_short = ((n_long as f64 * aspect).round() as usize).clamp(1, MAX_CELLS_PER_AXIS);
    let mut dims = [0; 2];
    dims[long] = n_long;
    dims[short] = n_short;
    dims
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_mesh() -> (Vec<Point3<f64>>, Vec<[usize; 3]>) {
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(4.0, 0.0, 0.0),
            Point3::new(4.0, 4.0, 0.0),
            Point3::new(0.0, 4.0, 0.0),
        ];
        (v, vec![[0, 1, 2], [0, 2, 3]])
    }

    #[test]
    fn dims_follow_resolution_and_aspect() {
        assert_eq!(grid_dims([10.0, 5.0], 100, Some(8)), [8, 4]);
        assert_eq!(grid_dims([5.0, 10.0], 100, Some(8)), [4, 8]);
        let d = grid_dims([1.0, 1.0], 200, None);
        assert_eq!(d, [10, 10]);
    }

    #[test]
    fn traversal_visits_cells_in_ray_order() {
        let (v, t) = square_mesh();
        let grid = GridIndex::build(&v, &t, Some(4));
        let mut exits = Vec::new();
        grid.traverse(
            &Point3::new(-1.0, 0.5, 1.0),
            &Vector3::new(1.0, 0.0, 0.0),
            |_, t_exit| {
                exits.push(t_exit);
                true
            },
        );
        assert_eq!(exits.len(), 4);
        assert!(exits.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn vertical_ray_visits_one_cell() {
        let (v, t) = square_mesh();
        let grid = GridIndex::build(&v, &t, Some(4));
        let mut visited = 0;
        grid.traverse(
            &Point3::new(1.5, 2.5, 3.0),
            &Vector3::new(0.0, 0.0, -1.0),
            |_, _| {
                visited += 1;
                true
            },
        );
        assert_eq!(visited, 1);
    }

    #[test]
    fn ray_outside_bounds_visits_nothing() {
        let (v, t) = square_mesh();
        let grid = GridIndex::build(&v, &t, Some(4));
        let mut visited = 0;
        grid.traverse(
            &Point3::new(10.0, 10.0, 3.0),
            &Vector3::new(1.0, 0.0, -1.0),
            |_, _| {
                visited += 1;
                true
            },
        );
        assert_eq!(visited, 0);
    }
}
