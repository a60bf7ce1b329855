use serde::{Deserialize, Serialize};

use super::{check_rotation, mat3_from_row_major, mat3_to_row_major, Mat3, Result, Vec3};

/// A rigid transform mapping local (object) coordinates into a parent frame:
/// `x_parent = rotation * x_local + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    rotation: Mat3,
    translation: Vec3,
}

/// Serialized form: rotation as 9 row-major numbers, translation in meters.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRepr {
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl TryFrom<PoseRepr> for Pose {
    type Error = super::GeometryError;

    fn try_from(r: PoseRepr) -> Result<Self> {
        Pose::new(mat3_from_row_major(&r.rotation), Vec3::from(r.translation))
    }
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        PoseRepr {
            rotation: mat3_to_row_major(&p.rotation),
            translation: p.translation.into(),
        }
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        check_rotation(&rotation)?;
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(super::GeometryError::InvalidRotation(
                "non-finite translation".into(),
            ));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Mat3::identity(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    /// Same orientation, different translation.
    pub fn with_translation(&self, translation: Vec3) -> Self {
        Self {
            rotation: self.rotation,
            translation,
        }
    }

    #[inline]
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}
