use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Material, RenderError};
use crate::geometry::{Bvh, Pose, TriMesh, Vec3};

/// Instance id reserved for the bin and for background pixels.
pub const BACKGROUND_ID: u32 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    /// Index into [`SceneDescription::meshes`].
    pub mesh: usize,
    pub pose: Pose,
    /// Unique, contiguous from 1.
    pub id: u32,
    pub class_label: String,
}

/// Open-top box. In its local frame the inner floor is the plane `z = 0`,
/// the interior spans `±inner[0]/2 x ±inner[1]/2` and the walls rise to
/// `z = inner[2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinBox {
    pub inner: [f64; 3],
    pub wall_thickness: f64,
    #[serde(default)]
    pub pose: Pose,
    pub material: usize,
}

impl BinBox {
    pub fn mesh(&self) -> Result<TriMesh, RenderError> {
        let [x, y, z] = self.inner;
        let (hx, hy, th) = (x / 2.0, y / 2.0, self.wall_thickness);
        let bad = |e: crate::geometry::GeometryError| RenderError::InvalidScene(format!("bin: {e}"));
        let b = |min: [f64; 3], max: [f64; 3]| {
            TriMesh::cuboid_between(Vec3::from(min), Vec3::from(max), self.material).map_err(bad)
        };
        let floor = b([-hx - th, -hy - th, -th], [hx + th, hy + th, 0.0])?;
        let walls = [
            b([-hx - th, -hy - th, 0.0], [-hx, hy + th, z])?,
            b([hx, -hy - th, 0.0], [hx + th, hy + th, z])?,
            b([-hx, -hy - th, 0.0], [hx, -hy, z])?,
            b([-hx, hy, 0.0], [hx, hy + th, z])?,
        ];
        Ok(floor.merged(&walls))
    }

    /// True when the point (in world coordinates) lies over the interior.
    pub fn encloses_xy(&self, world: &Vec3) -> bool {
        let local = self.pose.inverse().transform_point(world);
        local.x.abs() <= self.inner[0] / 2.0 && local.y.abs() <= self.inner[1] / 2.0
    }
}

/// Square emitter parallel to the world XY plane, radiating towards -Z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaLight {
    pub position: [f64; 3],
    /// Edge length, meters.
    pub size: f64,
    pub radiance: [f64; 3],
}

/// Everything needed to render one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDescription {
    pub meshes: Vec<TriMesh>,
    pub materials: Vec<Material>,
    pub instances: Vec<Instance>,
    #[serde(default)]
    pub bin: Option<BinBox>,
    /// Radiance returned by rays that leave the scene.
    #[serde(default)]
    pub ambient_light: [f64; 3],
    #[serde(default)]
    pub area_lights: Vec<AreaLight>,
    pub seed: u64,
}

impl SceneDescription {
    pub fn validate(&self) -> Result<(), RenderError> {
        let invalid = |m: String| Err(RenderError::InvalidScene(m));
        for (i, m) in self.materials.iter().enumerate() {
            if let Err(e) = m.validate() {
                return invalid(format!("material {i}: {e}"));
            }
        }
        for (i, m) in self.meshes.iter().enumerate() {
            if m.material() >= self.materials.len() {
                return invalid(format!("mesh {i} references missing material {}", m.material()));
            }
        }
        let ids: BTreeSet<u32> = self.instances.iter().map(|i| i.id).collect();
        if ids.len() != self.instances.len() {
            return invalid("duplicate instance ids".into());
        }
        if let (Some(&first), Some(&last)) = (ids.first(), ids.last()) {
            if first != 1 || last as usize != ids.len() {
                return invalid("instance ids must be contiguous from 1".into());
            }
        }
        for inst in &self.instances {
            if inst.mesh >= self.meshes.len() {
                return invalid(format!("instance {} references missing mesh {}", inst.id, inst.mesh));
            }
        }
        if let Some(bin) = &self.bin {
            if bin.material >= self.materials.len() {
                return invalid("bin references a missing material".into());
            }
            if !(bin.inner.iter().all(|&d| d > 0.0) && bin.wall_thickness > 0.0) {
                return invalid(format!("degenerate bin {:?}", bin.inner));
            }
            if let Some(inst) = self
                .instances
                .iter()
                .find(|i| !bin.encloses_xy(i.pose.translation()))
            {
                return invalid(format!("instance {} lies outside the bin walls", inst.id));
            }
        }
        let finite = |v: &[f64; 3]| v.iter().all(|c| c.is_finite() && *c >= 0.0);
        if !finite(&self.ambient_light) || !self.area_lights.iter().all(|l| finite(&l.radiance) && l.size > 0.0) {
            return invalid("light radiance must be finite and non-negative".into());
        }
        Ok(())
    }

    pub fn has_geometry(&self) -> bool {
        !self.instances.is_empty() || self.bin.is_some()
    }

    /// Acceleration structure over all instances plus the bin (id 0).
    pub fn build_bvh(&self) -> Result<Bvh, RenderError> {
        let bin_mesh = self.bin.as_ref().map(BinBox::mesh).transpose()?;
        let mut items: Vec<(&TriMesh, &Pose, u32, usize)> = self
            .instances
            .iter()
            .map(|i| {
                let m = &self.meshes[i.mesh];
                (m, &i.pose, i.id, m.material())
            })
            .collect();
        if let (Some(mesh), Some(bin)) = (bin_mesh.as_ref(), self.bin.as_ref()) {
            items.push((mesh, &bin.pose, BACKGROUND_ID, bin.material));
        }
        Ok(Bvh::build(items))
    }

    /// Canonical JSON serialization.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("scene serialization cannot fail")
    }

    /// SHA-256 of the canonical serialization, lowercase hex.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_canonical_json().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}
