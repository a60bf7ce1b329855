use super::{GeometryError, Result, Vec3};

/// A half-line with unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    /// Creates a ray, normalizing `direction`.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self> {
        let norm = direction.norm();
        if !norm.is_finite() || norm <= 0.0 || origin.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidRay(format!(
                "origin {origin:?}, direction {direction:?}"
            )));
        }
        Ok(Self {
            origin,
            direction: direction / norm,
        })
    }

    /// Creates a ray from an already normalized direction. The caller
    /// guarantees the invariant; it is only checked in debug builds.
    #[inline]
    pub(crate) fn new_unchecked(origin: Vec3, direction: Vec3) -> Self {
        debug_assert!((direction.norm() - 1.0).abs() < 1e-9);
        Self { origin, direction }
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}
