//! Per-image scale from the four corner rays.
//!
//! Each corner pixel is back-projected into a world ray and cast against a
//! surface; the scale along an edge is the image extent in pixels divided by
//! the world distance between the two corner hits on that edge.

use nalgebra::Point3;
use rayon::prelude::*;
use thiserror::Error;

use crate::camera::{pixel_to_world_ray, CameraError, CameraIntrinsics, CameraPose, PixelPoint};
use crate::mesh::{ground_plane_hit, CastError, RayHit, TerrainMesh};

/// Minimum world distance between the two corner hits of an edge.
pub const MIN_SPAN: f64 = 1e-12;

/// Anything a corner ray can be cast against.
pub trait RaySurface: Sync {
    fn cast(&self, ray: &crate::camera::WorldRay) -> Result<RayHit, CastError>;
}

impl RaySurface for TerrainMesh {
    fn cast(&self, ray: &crate::camera::WorldRay) -> Result<RayHit, CastError> {
        self.cast_ray(ray)
    }
}

/// Exhaustive per-triangle scan; the reference for the indexed [`TerrainMesh`].
pub struct LinearScan<'a>(pub &'a TerrainMesh);

impl RaySurface for LinearScan<'_> {
    fn cast(&self, ray: &crate::camera::WorldRay) -> Result<RayHit, CastError> {
        self.0.cast_ray_linear(ray)
    }
}

/// No mesh at all: every ray goes straight to the `z = 0` fallback.
pub struct GroundPlane;

impl RaySurface for GroundPlane {
    fn cast(&self, ray: &crate::camera::WorldRay) -> Result<RayHit, CastError> {
        ground_plane_hit(ray)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corner {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl Corner {
    pub const ALL: [Corner; 4] = [
        Corner::TopLeft,
        Corner::TopRight,
        Corner::BottomLeft,
        Corner::BottomRight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Corner::TopLeft => "top-left",
            Corner::TopRight => "top-right",
            Corner::BottomLeft => "bottom-left",
            Corner::BottomRight => "bottom-right",
        }
    }
}

impl std::fmt::Display for Corner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Top,
    Bottom,
    Left,
    Right,
}

impl std::fmt::Display for Edge {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Edge::Top => "top",
            Edge::Bottom => "bottom",
            Edge::Left => "left",
            Edge::Right => "right",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleError {
    #[error("image dimensions must be positive (got {width}x{height})")]
    InvalidDimensions { width: u32, height: u32 },
    #[error("{corner} corner: {source}")]
    Camera {
        corner: Corner,
        #[source]
        source: CameraError,
    },
    #[error("{corner} corner: {source}")]
    NoIntersection {
        corner: Corner,
        #[source]
        source: CastError,
    },
    #[error("{edge} edge: zero span between corner hits")]
    ZeroSpan { edge: Edge },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageGeometry {
    id: String,
    width: u32,
    height: u32,
    intrinsics: CameraIntrinsics,
    pose: CameraPose,
}

impl ImageGeometry {
    pub fn new(
        id: impl Into<String>,
        width: u32,
        height: u32,
        intrinsics: CameraIntrinsics,
        pose: CameraPose,
    ) -> Result<Self, ScaleError> {
        if width == 0 || height == 0 {
            return Err(ScaleError::InvalidDimensions { width, height });
        }
        Ok(Self {
            id: id.into(),
            width,
            height,
            intrinsics,
            pose,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn pose(&self) -> &CameraPose {
        &self.pose
    }

    pub fn with_pose(&self, pose: CameraPose) -> Self {
        Self {
            pose,
            ..self.clone()
        }
    }

    /// World rays through the four corners, in [`Corner::ALL`] order.
    pub fn corner_rays(&self) -> Result<[crate::camera::WorldRay; 4], ScaleError> {
        let pixels = corner_pixels(self.width, self.height);
        let mut rays = Vec::with_capacity(4);
        for (corner, px) in Corner::ALL.into_iter().zip(pixels) {
            rays.push(
                pixel_to_world_ray(&self.intrinsics, &self.pose, &px)
                    .map_err(|source| ScaleError::Camera { corner, source })?,
            );
        }
        Ok(rays.try_into().expect("four corners"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageScaleRecord {
    pub image_id: String,
    /// Pixels per world unit along the `v = 0` edge.
    pub top_scale: f64,
    /// Pixels per world unit along the `v = height` edge.
    pub bottom_scale: f64,
    /// Height over the `u = 0` edge span.
    pub left_scale: f64,
    /// Height over the `u = width` edge span.
    pub right_scale: f64,
    /// In [`Corner::ALL`] order.
    pub corners: [RayHit; 4],
    pub any_fallback: bool,
}

impl ImageScaleRecord {
    pub fn corner(&self, corner: Corner) -> &RayHit {
        &self.corners[corner as usize]
    }
}

/// Corner pixels at the full image extent: `(0,0)`, `(w,0)`, `(0,h)`, `(w,h)`.
pub fn corner_pixels(width: u32, height: u32) -> [PixelPoint; 4] {
    let (w, h) = (f64::from(width), f64::from(height));
    [
        PixelPoint::new(0.0, 0.0),
        PixelPoint::new(w, 0.0),
        PixelPoint::new(0.0, h),
        PixelPoint::new(w, h),
    ]
}

/// `pixels / |a - b|`.
pub fn edge_scale(pixels: f64, a: &Point3<f64>, b: &Point3<f64>) -> Option<f64> {
    let span = (a - b).norm();
    (span >= MIN_SPAN).then(|| pixels / span)
}

pub fn compute_image_scale<S: RaySurface + ?Sized>(
    surface: &S,
    geom: &ImageGeometry,
) -> Result<ImageScaleRecord, ScaleError> {
    let rays = geom.corner_rays()?;
    let mut hits = Vec::with_capacity(4);
    for (corner, ray) in Corner::ALL.into_iter().zip(&rays) {
        hits.push(
            surface
                .cast(ray)
                .map_err(|source| ScaleError::NoIntersection { corner, source })?,
        );
    }
    let corners: [RayHit; 4] = hits.try_into().expect("four corners");
    let [tl, tr, bl, br] = corners.map(|h| h.point);
    let (w, h) = (f64::from(geom.width), f64::from(geom.height));
    let scale = |pixels, a, b, edge| edge_scale(pixels, a, b).ok_or(ScaleError::ZeroSpan { edge });

    Ok(ImageScaleRecord {
        image_id: geom.id.clone(),
        top_scale: scale(w, &tl, &tr, Edge::Top)?,
        bottom_scale: scale(w, &bl, &br, Edge::Bottom)?,
        left_scale: scale(h, &tl, &bl, Edge::Left)?,
        right_scale: scale(h, &tr, &br, Edge::Right)?,
        any_fallback: corners.iter().any(RayHit::is_fallback),
        corners,
    })
}

/// A failed image within a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchFailure {
    pub index: usize,
    pub image_id: String,
    pub error: ScaleError,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BatchOutcome {
    /// Successful records in input order.
    pub records: Vec<ImageScaleRecord>,
    pub failures: Vec<BatchFailure>,
}

/// Scales every image in parallel; output order follows input order and a
/// failing image does not abort the rest.
pub fn batch_scales<S: RaySurface + ?Sized>(surface: &S, geoms: &[ImageGeometry]) -> BatchOutcome {
    let results: Vec<_> = geoms
        .par_iter()
        .map(|g| compute_image_scale(surface, g))
        .collect();
    let mut outcome = BatchOutcome::default();
    for (index, (geom, result)) in geoms.iter().zip(results).enumerate() {
        match result {
            Ok(record) => outcome.records.push(record),
            Err(error) => outcome.failures.push(BatchFailure {
                index,
                image_id: geom.id.clone(),
                error,
            }),
        }
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{triangulate, MeshOptions, PointCloud};
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn flat_mesh(z: f64) -> TerrainMesh {
        let mut pts = Vec::new();
        for i in 0..12 {
            for j in 0..12 {
                // Slight stagger keeps the grid off exact cocircularity.
                let x = -3.0 + 0.5 * i as f64 + 0.01 * ((j * 7 + i * 3) % 5) as f64;
                let y = -3.0 + 0.5 * j as f64 + 0.01 * ((i * 5 + j) % 3) as f64;
                pts.push(Point3::new(x, y, z));
            }
        }
        triangulate(&PointCloud::new(pts).unwrap(), &MeshOptions::default()).unwrap()
    }

    fn nadir_geometry(id: &str, f: f64, height: f64) -> ImageGeometry {
        ImageGeometry::new(
            id,
            1280,
            720,
            CameraIntrinsics::centered(f, 1280.0, 720.0).unwrap(),
            CameraPose::nadir(Vector3::new(0.0, 0.0, height)),
        )
        .unwrap()
    }

    #[test]
    fn corner_pixel_layout() {
        let c = corner_pixels(1280, 720);
        assert_eq!(
            c,
            [
                PixelPoint::new(0.0, 0.0),
                PixelPoint::new(1280.0, 0.0),
                PixelPoint::new(0.0, 720.0),
                PixelPoint::new(1280.0, 720.0)
            ]
        );
        let c = corner_pixels(1, 1);
        assert_eq!(c[3], PixelPoint::new(1.0, 1.0));
        let c = corner_pixels(2, 1);
        assert_eq!(
            c,
            [
                PixelPoint::new(0.0, 0.0),
                PixelPoint::new(2.0, 0.0),
                PixelPoint::new(0.0, 1.0),
                PixelPoint::new(2.0, 1.0)
            ]
        );
    }

    #[test]
    fn edge_scale_examples() {
        let o = Point3::origin();
        assert_eq!(
            edge_scale(1280.0, &o, &Point3::new(1.0, 0.0, 0.0)),
            Some(1280.0)
        );
        assert_eq!(
            edge_scale(1280.0, &o, &Point3::new(2.0, 0.0, 0.0)),
            Some(640.0)
        );
        // 1280/sqrt(3), evaluated independently.
        assert_relative_eq!(
            edge_scale(1280.0, &o, &Point3::new(1.0, 1.0, 1.0)).unwrap(),
            739.008344562721,
            max_relative = 1e-14
        );
        assert_eq!(edge_scale(1280.0, &o, &o), None);
    }

    #[test]
    fn rejects_empty_image() {
        let k = CameraIntrinsics::centered(1.0, 1.0, 1.0).unwrap();
        let pose = CameraPose::nadir(Vector3::new(0.0, 0.0, 1.0));
        assert!(matches!(
            ImageGeometry::new("x", 0, 10, k, pose),
            Err(ScaleError::InvalidDimensions { .. })
        ));
    }

    #[test]
    fn nadir_over_ground_plane_is_f_over_h() {
        let rec = compute_image_scale(&GroundPlane, &nadir_geometry("a", 1000.0, 0.5)).unwrap();
        assert_relative_eq!(rec.top_scale, 2000.0, max_relative = 1e-12);
        assert_relative_eq!(rec.bottom_scale, 2000.0, max_relative = 1e-12);
        assert_relative_eq!(rec.left_scale, 2000.0, max_relative = 1e-12);
        assert!(rec.any_fallback);
    }

    #[test]
    fn nadir_over_lifted_plane() {
        let mesh = flat_mesh(0.5);
        let rec = compute_image_scale(&mesh, &nadir_geometry("a", 1000.0, 2.0)).unwrap();
        assert_relative_eq!(rec.top_scale, 1000.0 / 1.5, max_relative = 1e-9);
        assert_relative_eq!(rec.bottom_scale, 1000.0 / 1.5, max_relative = 1e-9);
        assert!(!rec.any_fallback);
        let expected = 1280.0 / (rec.corners[0].point - rec.corners[1].point).norm();
        assert_eq!(rec.top_scale, expected);
    }

    #[test]
    fn tilted_camera_sees_smaller_scale_at_top() {
        let geom = nadir_geometry("t", 1000.0, 0.5).with_pose(CameraPose::tilted(
            Vector3::new(0.0, 0.0, 0.5),
            83.0,
            0.0,
        ));
        let rec = compute_image_scale(&GroundPlane, &geom).unwrap();
        assert!(rec.top_scale < rec.bottom_scale);
    }

    #[test]
    fn camera_below_ground_reports_the_corner() {
        let geom = nadir_geometry("under", 1000.0, -1.0);
        let err = compute_image_scale(&GroundPlane, &geom).unwrap_err();
        assert_eq!(
            err,
            ScaleError::NoIntersection {
                corner: Corner::TopLeft,
                source: CastError::Behind
            }
        );
        assert!(err.to_string().contains("top-left"));
    }

    #[test]
    fn batch_keeps_order_and_isolates_failures() {
        let mesh = flat_mesh(0.0);
        let same: Vec<_> = (0..9).map(|_| nadir_geometry("p", 1000.0, 0.5)).collect();
        let out = batch_scales(&mesh, &same);
        assert_eq!(out.records.len(), 9);
        assert!(out.records.windows(2).all(|w| w[0] == w[1]));

        assert_eq!(batch_scales(&mesh, &[]), BatchOutcome::default());

        let mixed = vec![
            nadir_geometry("a", 1000.0, 0.5),
            nadir_geometry("b", 1000.0, -0.5),
            nadir_geometry("c", 1000.0, 1.0),
        ];
        let out = batch_scales(&mesh, &mixed);
        let ids: Vec<_> = out.records.iter().map(|r| r.image_id.as_str()).collect();
        assert_eq!(ids, ["a", "c"]);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].index, 1);
        assert_eq!(out.failures[0].image_id, "b");
    }
}
