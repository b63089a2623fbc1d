//! 2.5D terrain surface over a point cloud and ray casting against it.
//!
//! The cloud is triangulated in its xy projection (Delaunay) and lifted back
//! to 3D by reattaching each vertex's z. A ray is tested against triangles
//! by solving the line/plane system in [`intersect`]; the nearest accepted
//! hit wins and rays that miss every triangle fall back to the plane `z = 0`.

mod delaunay;
pub mod grid;
pub mod intersect;

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use thiserror::Error;

use crate::camera::{intersect_ground_plane, WorldRay};
use grid::GridIndex;
pub use intersect::{intersect_line, intersect_triangle, Singular, TriangleHit};

/// Minimum xy-projected area for a triangle to be kept.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("point {index} has a non-finite coordinate")]
    NonFinitePoint { index: usize },
    #[error("degenerate input: {count} distinct xy point(s), at least 3 required")]
    TooFewPoints { count: usize },
    #[error("degenerate input: all xy points are collinear")]
    Collinear,
    #[error("triangle {index} references a missing vertex")]
    InvalidTriangle { index: usize },
    #[error("triangle {index} has xy-projected area {area:e}")]
    DegenerateTriangle { index: usize, area: f64 },
    #[error("dedup tolerance must be finite and non-negative, got {0}")]
    InvalidTolerance(f64),
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum CastError {
    #[error("no intersection: ray misses the mesh and is parallel to the ground plane")]
    Parallel,
    #[error("no intersection: ray misses the mesh and meets the ground plane behind the camera")]
    Behind,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self, MeshError> {
        if let Some(index) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(MeshError::NonFinitePoint { index });
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn translated(&self, offset: &Vector3<f64>) -> Self {
        Self {
            points: self.points.iter().map(|p| p + offset).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshOptions {
    /// Points closer than this in xy are merged, keeping the highest z.
    pub dedup_tolerance: f64,
    /// Cells along the longer xy extent of the spatial index.
    pub grid_resolution: Option<usize>,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self {
            dedup_tolerance: 1e-9,
            grid_resolution: None,
        }
    }
}

/// Which surface a ray hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HitSurface {
    /// Mesh triangle with the in-plane parameters of the hit.
    Triangle { index: usize, eta: f64, mu: f64 },
    /// The `z = 0` fallback.
    GroundPlane,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    /// Ray parameter: `point = origin + t · direction`.
    pub t: f64,
    pub point: Point3<f64>,
    pub surface: HitSurface,
}

impl RayHit {
    pub fn is_fallback(&self) -> bool {
        matches!(self.surface, HitSurface::GroundPlane)
    }

    pub fn triangle(&self) -> Option<usize> {
        match self.surface {
            HitSurface::Triangle { index, .. } => Some(index),
            HitSurface::GroundPlane => None,
        }
    }
}

/// Counters from mesh construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BuildStats {
    pub input_points: usize,
    pub merged_duplicates: usize,
    pub dropped_degenerate: usize,
}

#[derive(Debug, Clone)]
pub struct TerrainMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
    index: GridIndex,
    stats: BuildStats,
}

/// Builds the 2.5D Delaunay mesh of `cloud`.
pub fn triangulate(cloud: &PointCloud, options: &MeshOptions) -> Result<TerrainMesh, MeshError> {
    let tol = options.dedup_tolerance;
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(MeshError::InvalidTolerance(tol));
    }
    let vertices = dedup_xy(cloud.points(), tol);
    let merged = cloud.len() - vertices.len();
    if vertices.len() < 3 {
        return Err(MeshError::TooFewPoints {
            count: vertices.len(),
        });
    }
    let xy: Vec<[f64; 2]> = vertices.iter().map(|p| [p.x, p.y]).collect();
    let raw = delaunay::triangulate(&xy).map_err(|e| match e {
        delaunay::DelaunayError::TooFewPoints => MeshError::TooFewPoints {
            count: vertices.len(),
        },
        delaunay::DelaunayError::Collinear => MeshError::Collinear,
    })?;
    let total = raw.len();
    let mut triangles: Vec<[usize; 3]> = raw
        .into_iter()
        .filter(|t| projected_area(&vertices, t) > MIN_TRIANGLE_AREA)
        .collect();
    if triangles.is_empty() {
        return Err(MeshError::Collinear);
    }
    // Deterministic triangle order independent of the triangulator's slot reuse.
    triangles.sort_unstable();
    let index = GridIndex::build(&vertices, &triangles, options.grid_resolution);
    Ok(TerrainMesh {
        stats: BuildStats {
            input_points: cloud.len(),
            merged_duplicates: merged,
            dropped_degenerate: total - triangles.len(),
        },
        vertices,
        triangles,
        index,
    })
}

fn projected_area(vertices: &[Point3<f64>], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = tri.map(|i| vertices[i]);
    0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
}

/// Merges points whose xy positions lie within `tol`, keeping max z. The
/// first occurrence fixes the merged point's xy and its output position.
fn dedup_xy(points: &[Point3<f64>], tol: f64) -> Vec<Point3<f64>> {
    let mut out: Vec<Point3<f64>> = Vec::with_capacity(points.len());
    if tol == 0.0 {
        let mut seen: HashMap<(u64, u64), usize> = HashMap::with_capacity(points.len());
        // +0.0 normalizes -0.0.
        let key = |v: f64| (v + 0.0).to_bits();
        for p in points {
            match seen.entry((key(p.x), key(p.y))) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    let kept = &mut out[*e.get()];
                    kept.z = kept.z.max(p.z);
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(out.len());
                    out.push(*p);
                }
            }
        }
        return out;
    }

    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::with_capacity(points.len());
    let cell = |v: f64| (v / tol).floor() as i64;
    for p in points {
        let (cx, cy) = (cell(p.x), cell(p.y));
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = buckets.get(&(cx.saturating_add(dx), cy.saturating_add(dy))) {
                    for &k in list {
                        let q = &out[k];
                        if (q.x - p.x).hypot(q.y - p.y) <= tol {
                            found = Some(k);
                            break 'search;
                        }
                    }
                }
            }
        }
        match found {
            Some(k) => out[k].z = out[k].z.max(p.z),
            None => {
                buckets.entry((cx, cy)).or_default().push(out.len());
                out.push(*p);
            }
        }
    }
    out
}

impl TerrainMesh {
    /// Wraps an arbitrary triangle soup (no Delaunay requirement). Triangles
    /// must have positive xy-projected area in either orientation.
    pub fn from_triangles(
        vertices: Vec<Point3<f64>>,
        triangles: Vec<[usize; 3]>,
        options: &MeshOptions,
    ) -> Result<Self, MeshError> {
        if let Some(index) = vertices
            .iter()
            .position(|p| !p.iter().all(|c| c.is_finite()))
        {
            return Err(MeshError::NonFinitePoint { index });
        }
        for (index, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(MeshError::InvalidTriangle { index });
            }
            let area = projected_area(&vertices, tri).abs();
            if !(area > MIN_TRIANGLE_AREA) {
                return Err(MeshError::DegenerateTriangle { index, area });
            }
        }
        let index = GridIndex::build(&vertices, &triangles, options.grid_resolution);
        Ok(Self {
            stats: BuildStats {
                input_points: vertices.len(),
                ..BuildStats::default()
            },
            vertices,
            triangles,
            index,
        })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, i: usize) -> [&Point3<f64>; 3] {
        let [a, b, c] = self.triangles[i];
        [&self.vertices[a], &self.vertices[b], &self.vertices[c]]
    }

    pub fn stats(&self) -> BuildStats {
        self.stats
    }

    pub fn grid_dims(&self) -> [usize; 2] {
        self.index.dims()
    }

    /// Sum of the triangles' xy-projected areas.
    pub fn projected_area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| projected_area(&self.vertices, t).abs())
            .sum()
    }

    fn test_triangle(&self, ray: &WorldRay, index: usize) -> Option<RayHit> {
        let hit = intersect_line(ray.origin(), ray.direction(), self.triangle(index)).ok()?;
        hit.accepted().then(|| RayHit {
            t: hit.t,
            point: ray.at(hit.t),
            surface: HitSurface::Triangle {
                index,
                eta: hit.eta,
                mu: hit.mu,
            },
        })
    }

    /// Nearest accepted triangle hit by exhaustive scan. Ties in `t` go to
    /// the lowest triangle index.
    pub fn nearest_hit_linear(&self, ray: &WorldRay) -> Option<RayHit> {
        let mut best: Option<RayHit> = None;
        for i in 0..self.triangles.len() {
            if let Some(hit) = self.test_triangle(ray, i) {
                if best.is_none_or(|b| hit.t < b.t) {
                    best = Some(hit);
                }
            }
        }
        best
    }

    /// Nearest accepted triangle hit using the spatial index; identical to
    /// [`Self::nearest_hit_linear`].
    pub fn nearest_hit(&self, ray: &WorldRay) -> Option<RayHit> {
        let mut best: Option<(f64, usize, RayHit)> = None;
        self.index
            .traverse(ray.origin(), ray.direction(), |cell, t_exit| {
                for &i in cell {
                    let i = i as usize;
                    if best.is_some_and(|(_, bi, _)| bi == i) {
                        continue;
                    }
                    if let Some(hit) = self.test_triangle(ray, i) {
                        let better = match best {
                            None => true,
                            Some((bt, bi, _)) => hit.t < bt || (hit.t == bt && i < bi),
                        };
                        if better {
                            best = Some((hit.t, i, hit));
                        }
                    }
                }
                // Later cells only hold hits with t beyond this cell's exit.
                match best {
                    Some((bt, _, _)) => bt >= t_exit * (1.0 - 1e-6) - 1e-9,
                    None => true,
                }
            });
        best.map(|(_, _, hit)| hit)
    }

    /// Nearest mesh hit, or the `z = 0` fallback when the ray misses.
    pub fn cast_ray(&self, ray: &WorldRay) -> Result<RayHit, CastError> {
        match self.nearest_hit(ray) {
            Some(hit) => Ok(hit),
            None => ground_plane_hit(ray),
        }
    }

    /// Reference implementation of [`Self::cast_ray`] without the index.
    pub fn cast_ray_linear(&self, ray: &WorldRay) -> Result<RayHit, CastError> {
        match self.nearest_hit_linear(ray) {
            Some(hit) => Ok(hit),
            None => ground_plane_hit(ray),
        }
    }
}

/// Fallback intersection with `z = 0`.
pub fn ground_plane_hit(ray: &WorldRay) -> Result<RayHit, CastError> {
    let hit = intersect_ground_plane(ray).ok_or(CastError::Parallel)?;
    if !hit.in_front() {
        return Err(CastError::Behind);
    }
    Ok(RayHit {
        t: hit.alpha,
        point: hit.point,
        surface: HitSurface::GroundPlane,
    })
}
