use nalgebra::{Matrix3x4, Vector4};
use serde::{Deserialize, Serialize};

use super::{
    check_rotation, mat3_from_row_major, mat3_to_row_major, GeometryError, Mat3, Ray, Result,
    Vec3,
};

/// Points closer to the device plane than this are rejected by [`PinholeModel::project`].
pub const MIN_DEPTH: f64 = 1e-12;

/// Ideal pinhole device: zero skew, no distortion. Used for both the camera
/// and the projector, which is treated as an inverse camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PinholeRepr", into = "PinholeRepr")]
pub struct PinholeModel {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
    rotation: Mat3,
    translation: Vec3,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PinholeRepr {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl TryFrom<PinholeRepr> for PinholeModel {
    type Error = GeometryError;

    fn try_from(r: PinholeRepr) -> Result<Self> {
        PinholeModel::new(
            r.fx,
            r.fy,
            r.cx,
            r.cy,
            r.width,
            r.height,
            mat3_from_row_major(&r.rotation),
            Vec3::from(r.translation),
        )
    }
}

impl From<PinholeModel> for PinholeRepr {
    fn from(m: PinholeModel) -> Self {
        PinholeRepr {
            fx: m.fx,
            fy: m.fy,
            cx: m.cx,
            cy: m.cy,
            width: m.width,
            height: m.height,
            rotation: mat3_to_row_major(&m.rotation),
            translation: m.translation.into(),
        }
    }
}

/// Result of projecting a world point: continuous pixel coordinates and the
/// depth along the device's optical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

impl PinholeModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        rotation: Mat3,
        translation: Vec3,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(GeometryError::InvalidModel(msg));
        if !(fx.is_finite() && fy.is_finite() && fx > 0.0 && fy > 0.0) {
            return invalid(format!("focal lengths must be positive, got fx={fx}, fy={fy}"));
        }
        if width == 0 || height == 0 {
            return invalid(format!("empty resolution {width}x{height}"));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return invalid(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} raster"
            ));
        }
        check_rotation(&rotation)?;
        if translation.iter().any(|v| !v.is_finite()) {
            return invalid("non-finite translation".into());
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation,
            translation,
        })
    }

    /// A device with identity extrinsics (device frame = world frame).
    pub fn from_intrinsics(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        Self::new(fx, fy, cx, cy, width, height, Mat3::identity(), Vec3::zeros())
    }

    /// Places the device at world point `center` with axes given by the
    /// columns of `orientation`.
    pub fn placed_at(&self, center: Vec3, orientation: Mat3) -> Result<Self> {
        check_rotation(&orientation)?;
        let r = orientation.transpose();
        Self::new(
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.width,
            self.height,
            r,
            -(r * center),
        )
    }

    /// Returns a copy with the given world-to-device extrinsics.
    pub fn with_extrinsics(&self, rotation: Mat3, translation: Vec3) -> Result<Self> {
        Self::new(
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.width,
            self.height,
            rotation,
            translation,
        )
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
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }
    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    /// Upper-triangular intrinsic matrix with zero skew.
    pub fn intrinsic_matrix(&self) -> Mat3 {
        Mat3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Optical centre in world coordinates, `-Rᵀ t`.
    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    #[inline]
    pub fn world_to_device(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Projects a world point. Coordinates outside the raster are returned
    /// as-is; use [`PinholeModel::contains`] to clip.
    pub fn project(&self, point: &Vec3) -> Result<Projection> {
        let d = self.world_to_device(point);
        if !(d.z > MIN_DEPTH) {
            return Err(GeometryError::DepthNonPositive(d.z));
        }
        Ok(Projection {
            u: self.fx * d.x / d.z + self.cx,
            v: self.fy * d.y / d.z + self.cy,
            depth: d.z,
        })
    }

    /// True when `(u, v)` falls on the raster, pixel footprints included.
    #[inline]
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= -0.5 && u < self.width as f64 - 0.5 && v >= -0.5 && v < self.height as f64 - 0.5
    }

    /// Unit direction, in the device frame, of the ray through `(u, v)`.
    #[inline]
    pub fn device_direction(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0).normalize()
    }

    /// World-space ray from the optical centre through image point `(u, v)`.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Ray {
        let dir = self.rotation.transpose() * self.device_direction(u, v);
        Ray::new_unchecked(self.center(), dir.normalize())
    }

    /// `K [R | t]`.
    pub fn projection_matrix(&self) -> ProjectionMatrix {
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        rt.set_column(3, &self.translation);
        ProjectionMatrix(self.intrinsic_matrix() * rt)
    }
}

/// Free-function form of [`PinholeModel::project`].
pub fn project(point: &Vec3, model: &PinholeModel) -> Result<Projection> {
    model.project(point)
}

/// Free-function form of [`PinholeModel::projection_matrix`].
pub fn build_projection_matrix(model: &PinholeModel) -> ProjectionMatrix {
    model.projection_matrix()
}

/// A 3x4 perspective projection matrix `K [R | t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionMatrix(pub Matrix3x4<f64>);

impl ProjectionMatrix {
    /// Entry `m_ij` with 1-based indices, matching the usual textbook notation.
    #[inline]
    pub fn m(&self, i: usize, j: usize) -> f64 {
        self.0[(i - 1, j - 1)]
    }

    pub fn matrix(&self) -> &Matrix3x4<f64> {
        &self.0
    }

    /// Homogeneous application followed by division by the third row.
    /// Returns `None` when the point is at or behind the device plane.
    pub fn apply(&self, p: &Vec3) -> Option<(f64, f64)> {
        let h = self.0 * Vector4::new(p.x, p.y, p.z, 1.0);
        (h.z > MIN_DEPTH).then(|| (h.x / h.z, h.y / h.z))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_model() -> PinholeModel {
        PinholeModel::from_intrinsics(1.0, 1.0, 0.0, 0.0, 1, 1).unwrap()
    }

    #[test]
    fn project_identity_model() {
        let p = identity_model().project(&Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!((p.u, p.v, p.depth), (0.0, 0.0, 1.0));
    }

    #[test]
    fn project_with_principal_point() {
        let m = PinholeModel::from_intrinsics(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        let p = m.project(&Vec3::new(0.1, 0.0, 1.0)).unwrap();
        assert!((p.u - 370.0).abs() < 1e-12);
        assert!((p.v - 240.0).abs() < 1e-12);
        assert_eq!(p.depth, 1.0);
    }

    #[test]
    fn behind_camera_is_rejected() {
        let err = identity_model().project(&Vec3::new(0.0, 0.0, -1.0));
        assert!(matches!(err, Err(GeometryError::DepthNonPositive(_))));
        assert!(identity_model().project(&Vec3::zeros()).is_err());
    }

    #[test]
    fn identity_projection_matrix() {
        let m = identity_model().projection_matrix();
        let mut expected = Matrix3x4::zeros();
        expected.fixed_view_mut::<3, 3>(0, 0).fill_with_identity();
        assert_eq!(m.0, expected);
    }

    #[test]
    fn world_aligned_camera_matrix_left_block_is_k() {
        let m = PinholeModel::from_intrinsics(1000.0, 990.0, 512.0, 384.0, 1024, 768).unwrap();
        let pm = m.projection_matrix();
        assert_eq!(pm.0.fixed_view::<3, 3>(0, 0).into_owned(), m.intrinsic_matrix());
        assert_eq!(pm.0.column(3).into_owned(), nalgebra::Vector3::zeros());
    }

    #[test]
    fn invalid_models_are_rejected() {
        assert!(PinholeModel::from_intrinsics(0.0, 1.0, 0.0, 0.0, 1, 1).is_err());
        assert!(PinholeModel::from_intrinsics(1.0, 1.0, 1.0, 0.0, 1, 1).is_err());
        assert!(PinholeModel::from_intrinsics(1.0, 1.0, 0.0, -0.1, 1, 1).is_err());
        assert!(PinholeModel::from_intrinsics(1.0, 1.0, 0.0, 0.0, 0, 1).is_err());
    }

    #[test]
    fn placed_at_stores_transposed_orientation() {
        // Looking straight down from 1 m above the origin.
        let q = Mat3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0);
        let m = PinholeModel::from_intrinsics(100.0, 100.0, 50.0, 50.0, 100, 100)
            .unwrap()
            .placed_at(Vec3::new(0.0, 0.0, 1.0), q)
            .unwrap();
        assert!((m.center() - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
        let p = m.project(&Vec3::zeros()).unwrap();
        assert!((p.depth - 1.0).abs() < 1e-12);
        assert!((p.u - 50.0).abs() < 1e-12 && (p.v - 50.0).abs() < 1e-12);
    }

    #[test]
    fn pixel_ray_hits_projected_point() {
        let m = PinholeModel::from_intrinsics(800.0, 700.0, 320.0, 200.0, 640, 400).unwrap();
        let target = Vec3::new(0.2, -0.1, 2.0);
        let p = m.project(&target).unwrap();
        let ray = m.pixel_ray(p.u, p.v);
        let t = (target - ray.origin).norm();
        assert!((ray.at(t) - target).norm() < 1e-12);
    }

    #[test]
    fn json_uses_row_major_rotation() {
        let m = identity_model();
        let json = serde_json::to_value(&m).unwrap();
        assert_eq!(json["rotation"].as_array().unwrap().len(), 9);
        let back: PinholeModel = serde_json::from_value(json).unwrap();
        assert_eq!(back, m);
        let bad = r#"{"fx":1,"fy":1,"cx":0,"cy":0,"width":1,"height":1,
            "rotation":[1,0,0,0,1,0,0,0,1],"translation":[0,0,0],"skew":0}"#;
        assert!(serde_json::from_str::<PinholeModel>(bad).is_err());
    }
}
