//! Synthetic scenes with analytically known geometry.
//!
//! Planes give closed-form corner hits and therefore exact reference scales;
//! sinusoidal surfaces exercise non-planar terrain, with a fine ray march as
//! the reference.

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::camera::{CameraPose, WorldRay, PARALLEL_TOLERANCE};
use crate::mesh::PointCloud;
use crate::scale::{edge_scale, ImageGeometry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("sampling region must have x0 < x1 and y0 < y1")]
    InvalidRegion,
    #[error("sample density must be at least 2 points per axis, got {0}")]
    InvalidDensity(usize),
    #[error("sinusoid wavelength must be positive, got {0}")]
    InvalidWavelength(f64),
    #[error("noise sigma must be finite and non-negative, got {0}")]
    InvalidNoise(f64),
    #[error("surface parameters must be finite")]
    NonFinite,
    #[error("ray is parallel to the plane")]
    Parallel,
    #[error("plane lies behind the camera (alpha = {alpha})")]
    Behind { alpha: f64 },
    #[error(transparent)]
    Scale(#[from] crate::scale::ScaleError),
    #[error("zero span between analytic corner hits")]
    ZeroSpan,
}

/// Axis-aligned rectangle in xy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Region {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, SynthError> {
        if !(x0 < x1 && y0 < y1) || ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
            return Err(SynthError::InvalidRegion);
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }
}

/// `z = a·x + b·y + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Plane {
    pub fn horizontal(c: f64) -> Self {
        Self { a: 0.0, b: 0.0, c }
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        self.a * x + self.b * y + self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceKind {
    Plane(Plane),
    /// `z = base + amplitude · sin(2πx/λ) · cos(2πy/λ)`.
    Sinusoid {
        amplitude: f64,
        wavelength: f64,
        base: f64,
    },
}

impl SurfaceKind {
    pub fn height(&self, x: f64, y: f64) -> f64 {
        match *self {
            SurfaceKind::Plane(p) => p.height(x, y),
            SurfaceKind::Sinusoid {
                amplitude,
                wavelength,
                base,
            } => {
                let k = std::f64::consts::TAU / wavelength;
                base + amplitude * (k * x).sin() * (k * y).cos()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSurface {
    kind: SurfaceKind,
    region: Region,
    density: usize,
    noise_sigma: f64,
}

impl SyntheticSurface {
    pub fn new(kind: SurfaceKind, region: Region, density: usize) -> Result<Self, SynthError> {
        if density < 2 {
            return Err(SynthError::InvalidDensity(density));
        }
        match kind {
            SurfaceKind::Plane(p) if ![p.a, p.b, p.c].iter().all(|v| v.is_finite()) => {
                return Err(SynthError::NonFinite)
            }
            SurfaceKind::Sinusoid {
                amplitude,
                wavelength,
                base,
            } => {
                if !(wavelength > 0.0 && wavelength.is_finite()) {
                    return Err(SynthError::InvalidWavelength(wavelength));
                }
                if !(amplitude.is_finite() && base.is_finite()) {
                    return Err(SynthError::NonFinite);
                }
            }
            _ => {}
        }
        Ok(Self {
            kind,
            region,
            density,
            noise_sigma: 0.0,
        })
    }

    /// Isotropic Gaussian noise added to sampled positions; off by default.
    pub fn with_noise(mut self, sigma: f64) -> Result<Self, SynthError> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(SynthError::InvalidNoise(sigma));
        }
        self.noise_sigma = sigma;
        Ok(self)
    }

    pub fn kind(&self) -> &SurfaceKind {
        &self.kind
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn density(&self) -> usize {
        self.density
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }
}

/// Jittered-grid samples lying on the surface.
///
/// Interior nodes move by up to a quarter cell in x and y; edge nodes only
/// slide along their edge and corners stay put, so the sample hull is the
/// whole region.
pub fn sample_cloud(surface: &SyntheticSurface, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = surface.density;
    let r = surface.region;
    let hx = r.width() / (n - 1) as f64;
    let hy = r.height() / (n - 1) as f64;
    let noise = (surface.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, surface.noise_sigma).expect("sigma validated"));

    let mut points = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let mut x = if i == n - 1 {
                r.x1
            } else {
                r.x0 + hx * i as f64
            };
            let mut y = if j == n - 1 {
                r.y1
            } else {
                r.y0 + hy * j as f64
            };
            let jx: f64 = rng.random_range(-0.25..0.25);
            let jy: f64 = rng.random_range(-0.25..0.25);
            if i != 0 && i != n - 1 {
                x += jx * hx;
            }
            if j != 0 && j != n - 1 {
                y += jy * hy;
            }
            let mut p = Point3::new(x, y, surface.kind.height(x, y));
            if let Some(normal) = &noise {
                p += Vector3::new(
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                );
            }
            points.push(p);
        }
    }
    PointCloud::new(points).expect("finite samples")
}

/// Closed-form ray/plane intersection:
/// `α = (a·x_r + b·y_r + c − z_r) / (z_m − a·x_m − b·y_m)`.
pub fn analytic_corner_hit(
    plane: &Plane,
    ray: &WorldRay,
) -> Result<(f64, Point3<f64>), SynthError> {
    let o = ray.origin();
    let d = ray.direction();
    let denom = d.z - plane.a * d.x - plane.b * d.y;
    if denom.abs() < PARALLEL_TOLERANCE * d.norm() {
        return Err(SynthError::Parallel);
    }
    let alpha = (plane.a * o.x + plane.b * o.y + plane.c - o.z) / denom;
    Ok((alpha, ray.at(alpha)))
}

/// Top and bottom edge scales from analytic plane hits.
pub fn oracle_scale(plane: &Plane, geom: &ImageGeometry) -> Result<(f64, f64), SynthError> {
    let rays = geom.corner_rays()?;
    let mut hits = [Point3::origin(); 4];
    for (hit, ray) in hits.iter_mut().zip(&rays) {
        let (alpha, p) = analytic_corner_hit(plane, ray)?;
        if alpha < 0.0 {
            return Err(SynthError::Behind { alpha });
        }
        *hit = p;
    }
    let w = f64::from(geom.width());
    let top = edge_scale(w, &hits[0], &hits[1]).ok_or(SynthError::ZeroSpan)?;
    let bottom = edge_scale(w, &hits[2], &hits[3]).ok_or(SynthError::ZeroSpan)?;
    Ok((top, bottom))
}

/// First crossing of the ray below the surface, found by marching in steps
/// of `step` (ray parameter units) up to `max_t` and refining by bisection.
pub fn ray_march_hit(
    surface: &SurfaceKind,
    ray: &WorldRay,
    step: f64,
    max_t: f64,
) -> Option<Point3<f64>> {
    let gap = |t: f64| {
        let p = ray.at(t);
        p.z - surface.height(p.x, p.y)
    };
    let mut lo = 0.0;
    let mut g_lo = gap(lo);
    if g_lo <= 0.0 {
        return Some(ray.at(0.0));
    }
    let steps = (max_t / step).ceil() as usize;
    for k in 1..=steps {
        let hi = (k as f64 * step).min(max_t);
        if gap(hi) <= 0.0 {
            let mut hi = hi;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let g = gap(mid);
                if g > 0.0 {
                    lo = mid;
                    g_lo = g;
                } else {
                    hi = mid;
                }
            }
            let _ = g_lo;
            return Some(ray.at(0.5 * (lo + hi)));
        }
        lo = hi;
        g_lo = gap(lo);
    }
    None
}

/// Top and bottom scales from ray-marched corner hits on any surface.
pub fn marched_scale(
    surface: &SurfaceKind,
    geom: &ImageGeometry,
    step: f64,
    max_t: f64,
) -> Option<(f64, f64)> {
    let rays = geom.corner_rays().ok()?;
    let mut hits = [Point3::origin(); 4];
    for (hit, ray) in hits.iter_mut().zip(&rays) {
        *hit = ray_march_hit(surface, ray, step, max_t)?;
    }
    let w = f64::from(geom.width());
    Some((
        edge_scale(w, &hits[0], &hits[1])?,
        edge_scale(w, &hits[2], &hits[3])?,
    ))
}

/// Camera poses on a regular layout over the central half of `region`,
/// `altitude` above the surface base height `base`.
pub fn camera_layout(
    region: &Region,
    count: usize,
    base: f64,
    altitude: f64,
    tilt_deg: f64,
    heading_deg: f64,
) -> Vec<CameraPose> {
    if count == 0 {
        return Vec::new();
    }
    let cols = (count as f64).sqrt().ceil() as usize;
    let rows = count.div_ceil(cols);
    let cx = 0.5 * (region.x0 + region.x1);
    let cy = 0.5 * (region.y0 + region.y1);
    let along = |i: usize, n: usize, span: f64| {
        if n == 1 {
            0.0
        } else {
            -0.25 * span + 0.5 * span * i as f64 / (n - 1) as f64
        }
    };
    (0..count)
        .map(|k| {
            let (row, col) = (k / cols, k % cols);
            let x = cx + along(col, cols, region.width());
            let y = cy + along(row, rows, region.height());
            CameraPose::tilted(Vector3::new(x, y, base + altitude), tilt_deg, heading_deg)
        })
        .collect()
}
