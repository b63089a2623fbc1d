//! Pinhole camera and rigid pose mathematics.
//!
//! Pixels are lifted to homogeneous coordinates, back-projected through the
//! inverse intrinsic matrix into a camera-frame direction, and rotated into
//! the world frame. The resulting ray starts at the camera center.
//!
//! Camera frame convention: `x` to the right of the image, `y` down the
//! image, `z` along the optical axis.

use nalgebra::{Matrix3, Point3, UnitQuaternion, Vector3};
use thiserror::Error;

/// Tolerance on `CᵀC - I` (Frobenius) and on `det(C) - 1`.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Relative threshold below which a ray counts as parallel to a plane.
pub const PARALLEL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("focal lengths must be finite and positive (fx={fx}, fy={fy})")]
    InvalidFocalLength { fx: f64, fy: f64 },
    #[error("intrinsic parameters must be finite")]
    NonFiniteIntrinsics,
    #[error("rotation is not orthonormal: |CᵀC - I| = {deviation:e}")]
    NotOrthonormal { deviation: f64 },
    #[error("rotation is not proper: det(C) = {det}")]
    ImproperRotation { det: f64 },
    #[error("translation must be finite")]
    NonFiniteTranslation,
    #[error("ray direction must be finite and non-zero")]
    ZeroDirection,
}

/// The intrinsic parameter matrix
///
/// ```text
///     | fx  s  cx |
/// K = |  0 fy  cy |
///     |  0  0   1 |
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    skew: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, skew: f64) -> Result<Self, CameraError> {
        if !(fx.is_finite() && fy.is_finite() && fx > 0.0 && fy > 0.0) {
            return Err(CameraError::InvalidFocalLength { fx, fy });
        }
        if !(cx.is_finite() && cy.is_finite() && skew.is_finite()) {
            return Err(CameraError::NonFiniteIntrinsics);
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            skew,
        })
    }

    /// Square pixels, zero skew, principal point at the image center.
    pub fn centered(focal: f64, width: f64, height: f64) -> Result<Self, CameraError> {
        Self::new(focal, focal, 0.5 * width, 0.5 * height, 0.0)
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }

    pub fn fy(&self) -> f64 {
        self.fy
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }

    pub fn cy(&self) -> f64 {
        self.cy
    }

    pub fn skew(&self) -> f64 {
        self.skew
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, self.skew, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }

    /// Applies `K⁻¹` by back substitution on the upper-triangular `K`.
    pub fn unproject(&self, homogeneous: &Vector3<f64>) -> Vector3<f64> {
        let w = homogeneous.z;
        let y = (homogeneous.y - self.cy * w) / self.fy;
        let x = (homogeneous.x - self.skew * y - self.cx * w) / self.fx;
        Vector3::new(x, y, w)
    }
}

/// Camera pose in the world frame: `x_world = C · x_camera + r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl CameraPose {
    /// Validates that `rotation` lies in SO(3) to [`ROTATION_TOLERANCE`].
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, CameraError> {
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(CameraError::NonFiniteTranslation);
        }
        let deviation = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        if !(deviation <= ROTATION_TOLERANCE) {
            return Err(CameraError::NotOrthonormal { deviation });
        }
        let det = rotation.determinant();
        if !((det - 1.0).abs() <= ROTATION_TOLERANCE) {
            return Err(CameraError::ImproperRotation { det });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_quaternion(
        quaternion: UnitQuaternion<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self, CameraError> {
        Self::new(*quaternion.to_rotation_matrix().matrix(), translation)
    }

    /// Camera looking straight down from `position`, image top towards +y.
    pub fn nadir(position: Vector3<f64>) -> Self {
        Self::tilted(position, 90.0, 90.0)
    }

    /// Camera whose optical axis is depressed `tilt_deg` below the horizon.
    ///
    /// `heading_deg` is the world azimuth (counter-clockwise from +x) the top
    /// edge of the image faces; `tilt_deg = 90` looks straight down.
    pub fn tilted(position: Vector3<f64>, tilt_deg: f64, heading_deg: f64) -> Self {
        let (st, ct) = tilt_deg.to_radians().sin_cos();
        let (sh, ch) = heading_deg.to_radians().sin_cos();
        let forward = Vector3::new(ch, sh, 0.0);
        let up = Vector3::z();
        let z_axis = forward * ct - up * st;
        let y_axis = -(forward * st) - up * ct;
        let x_axis = y_axis.cross(&z_axis);
        let rotation = Matrix3::from_columns(&[x_axis, y_axis, z_axis]);
        Self::new(rotation, position).expect("constructed rotation is in SO(3)")
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// The 4×4 homogeneous transform `[C r; 0 1]`.
    pub fn homogeneous(&self) -> nalgebra::Matrix4<f64> {
        let mut t = nalgebra::Matrix4::identity();
        t.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        t.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        t
    }

    /// Returns a copy shifted by `offset` in world coordinates.
    pub fn translated(&self, offset: &Vector3<f64>) -> Self {
        Self {
            rotation: self.rotation,
            translation: self.translation + offset,
        }
    }
}

/// A pixel location; real-valued so image extents and sub-pixel points work.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    /// `(u, v, 1)`.
    pub fn homogenize(&self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, 1.0)
    }

    pub fn dehomogenize(h: &Vector3<f64>) -> Self {
        Self::new(h.x / h.z, h.y / h.z)
    }
}

/// World-frame ray; the direction is not normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldRay {
    origin: Point3<f64>,
    direction: Vector3<f64>,
}

impl WorldRay {
    pub fn new(origin: Point3<f64>, direction: Vector3<f64>) -> Result<Self, CameraError> {
        let n = direction.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(CameraError::ZeroDirection);
        }
        Ok(Self { origin, direction })
    }

    pub fn origin(&self) -> &Point3<f64> {
        &self.origin
    }

    pub fn direction(&self) -> &Vector3<f64> {
        &self.direction
    }

    pub fn at(&self, alpha: f64) -> Point3<f64> {
        self.origin + self.direction * alpha
    }
}

/// Where a ray meets the plane `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundHit {
    pub alpha: f64,
    pub point: Point3<f64>,
}

impl GroundHit {
    /// True when the intersection lies in front of the camera.
    pub fn in_front(&self) -> bool {
        self.alpha >= 0.0
    }
}

/// `K⁻¹ · (u, v, 1)`.
pub fn pixel_to_camera_ray(intrinsics: &CameraIntrinsics, pixel: &PixelPoint) -> Vector3<f64> {
    intrinsics.unproject(&pixel.homogenize())
}

/// Ray through the camera center `r` with direction `C · p_c`.
pub fn camera_ray_to_world(
    pose: &CameraPose,
    camera_dir: &Vector3<f64>,
) -> Result<WorldRay, CameraError> {
    WorldRay::new(Point3::from(pose.translation), pose.rotation * camera_dir)
}

/// Convenience composition of [`pixel_to_camera_ray`] and [`camera_ray_to_world`].
pub fn pixel_to_world_ray(
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
    pixel: &PixelPoint,
) -> Result<WorldRay, CameraError> {
    camera_ray_to_world(pose, &pixel_to_camera_ray(intrinsics, pixel))
}

/// Intersects the ray with `z = 0` using `α = -z_r / z_m`.
///
/// Returns `None` when `|z_m| < 1e-12 · |d|`.
pub fn intersect_ground_plane(ray: &WorldRay) -> Option<GroundHit> {
    let d = ray.direction();
    if d.z.abs() < PARALLEL_TOLERANCE * d.norm() {
        return None;
    }
    let alpha = -ray.origin().z / d.z;
    let mut point = ray.at(alpha);
    // The plane equation holds exactly by construction; drop the rounding.
    point.z = 0.0;
    Some(GroundHit { alpha, point })
}
