#![allow(dead_code)]

use nalgebra::Point3;
use pcscale::mesh::{triangulate, MeshOptions, PointCloud, TerrainMesh};
use pcscale::synth::{sample_cloud, Plane, Region, SurfaceKind, SyntheticSurface};
use rand::Rng;

pub fn random_cloud(rng: &mut impl Rng, n: usize, extent: f64) -> PointCloud {
    let points = (0..n)
        .map(|_| {
            Point3::new(
                rng.random_range(0.0..extent),
                rng.random_range(0.0..extent),
                rng.random_range(-0.2..0.2) * extent,
            )
        })
        .collect();
    PointCloud::new(points).unwrap()
}

pub fn surface_mesh(kind: SurfaceKind, region: Region, density: usize, seed: u64) -> TerrainMesh {
    let surface = SyntheticSurface::new(kind, region, density).unwrap();
    triangulate(&sample_cloud(&surface, seed), &MeshOptions::default()).unwrap()
}

pub fn plane_mesh(plane: Plane, region: Region, density: usize) -> TerrainMesh {
    surface_mesh(SurfaceKind::Plane(plane), region, density, 7)
}

/// Circumcenter and squared radius of a 2D triangle.
pub fn circumcircle(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> ([f64; 2], f64) {
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    ([a[0] + ux, a[1] + uy], ux * ux + uy * uy)
}

/// Andrew's monotone chain; returns the hull area.
pub fn hull_area(points: &[[f64; 2]]) -> f64 {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.partial_cmp(b).unwrap());
    p.dedup();
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(p.iter())
        } else {
            Box::new(p.iter().rev())
        };
        for &q in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0
            {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    let n = hull.len();
    (0..n)
        .map(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        / 2.0
}
