//! Metric image scale for aerial photographs from camera poses and a
//! point-cloud surface, together with the fragmentation statistics used to
//! validate measured size distributions.
//!
//! The pipeline for one image:
//!
//! 1. the four image corners are back-projected into world rays
//!    ([`camera`]),
//! 2. each ray is intersected with a 2.5D Delaunay mesh of the point cloud,
//!    falling back to the plane `z = 0` when it misses ([`mesh`]),
//! 3. the top and bottom edge scales are the image width divided by the
//!    distance between the corresponding corner hits ([`scale`]).
//!
//! [`stats`] holds Swebrec fitting and one-way ANOVA, [`synth`] builds
//! synthetic scenes with analytic ground truth and [`io`] covers the file
//! formats used by the command-line tool.

pub mod camera;
pub mod io;
pub mod mesh;
pub mod scale;
pub mod stats;
pub mod synth;

pub use camera::{CameraIntrinsics, CameraPose, PixelPoint, WorldRay};
pub use mesh::{PointCloud, RayHit, TerrainMesh};

pub use scale::{ImageGeometry, ImageScaleRecord};
