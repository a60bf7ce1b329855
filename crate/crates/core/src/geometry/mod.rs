//! Camera and projector models, rigid poses, triangle meshes and the
//! ray-casting acceleration structure shared by rendering and reconstruction.
//!
//! Conventions used throughout the crate:
//!
//! * Extrinsics map world to device coordinates: `x_dev = R * x_world + t`.
//!   A device centred at world point `C` with orientation `Q` (columns are the
//!   device axes expressed in world coordinates) stores `R = Qᵀ`, `t = -Qᵀ C`.
//! * Device frames are right-handed with +Z forward, +X along image columns
//!   and +Y along image rows.
//! * Image coordinates are continuous with the origin at the centre of the
//!   top-left pixel, so pixel `(i, j)` covers `[i - 0.5, i + 0.5) x [j - 0.5, j + 0.5)`.

mod bvh;
mod mesh;
pub mod mesh_io;
mod pinhole;
mod pose;
mod ray;
mod rig;

pub use bvh::{intersect_triangle, Bvh, Hit, WorldTriangle, HIT_EPSILON};
pub use mesh::{Aabb, TriMesh};
pub use pinhole::{build_projection_matrix, project, PinholeModel, Projection, ProjectionMatrix};
pub use pose::Pose;
pub use ray::Ray;
pub use rig::Rig;

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Tolerance used when checking that a matrix is a proper rotation.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    /// The point lies at or behind the device plane.
    #[error("point has non-positive depth {0} in the device frame")]
    DepthNonPositive(f64),
    #[error("invalid pinhole model: {0}")]
    InvalidModel(String),
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid ray: {0}")]
    InvalidRay(String),
    #[error("failed to load mesh {path}: {reason}")]
    MeshLoad { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Checks that `r` is orthonormal with determinant +1.
pub fn check_rotation(r: &Mat3) -> Result<()> {
    if r.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::InvalidRotation("non-finite entry".into()));
    }
    let err = (r.transpose() * r - Mat3::identity()).amax();
    if err > ROTATION_TOLERANCE {
        return Err(GeometryError::InvalidRotation(format!(
            "not orthonormal (max |RᵀR - I| = {err:e})"
        )));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ROTATION_TOLERANCE {
        return Err(GeometryError::InvalidRotation(format!(
            "determinant {det} is not +1"
        )));
    }
    Ok(())
}

/// Row-major 9-element array to matrix.
pub(crate) fn mat3_from_row_major(m: &[f64; 9]) -> Mat3 {
    Mat3::from_row_slice(m)
}

pub(crate) fn mat3_to_row_major(m: &Mat3) -> [f64; 9] {
    let mut out = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            out[r * 3 + c] = m[(r, c)];
        }
    }
    out
}
