use serde::{Deserialize, Serialize};

use super::PinholeModel;

/// A structured-light rig: one camera and one projector.
///
/// On disk this is a JSON object with `camera` and `projector` blocks, each
/// `{fx, fy, cx, cy, width, height, rotation: [9 row-major], translation: [3]}`
/// in pixels and meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rig {
    pub camera: PinholeModel,
    pub projector: PinholeModel,
}

impl Rig {
    /// Distance between the camera and projector optical centres, meters.
    pub fn baseline(&self) -> f64 {
        (self.camera.center() - self.projector.center()).norm()
    }

    /// Camera looking along world +Z from the origin and a projector with
    /// identical intrinsics displaced by `baseline` along +X. This is the
    /// textbook rectified configuration in which `Z = f b / disparity`.
    pub fn rectified(
        focal: f64,
        baseline: f64,
        camera_size: (u32, u32),
        projector_size: (u32, u32),
    ) -> super::Result<Self> {
        let camera = PinholeModel::from_intrinsics(
            focal,
            focal,
            camera_size.0 as f64 / 2.0,
            camera_size.1 as f64 / 2.0,
            camera_size.0,
            camera_size.1,
        )?;
        let projector = PinholeModel::from_intrinsics(
            focal,
            focal,
            projector_size.0 as f64 / 2.0,
            projector_size.1 as f64 / 2.0,
            projector_size.0,
            projector_size.1,
        )?
        .with_extrinsics(super::Mat3::identity(), super::Vec3::new(-baseline, 0.0, 0.0))?;
        Ok(Self { camera, projector })
    }
}
