use serde::{Deserialize, Serialize};

use super::{GeometryError, Pose, Result, Vec3};

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    #[inline]
    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x
    }

    /// Overlap of the XY projections (closed intervals).
    pub fn overlaps_xy(&self, other: &Aabb) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }
}

/// An indexed triangle mesh in its local frame, meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeshRepr", into = "MeshRepr")]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    material: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshRepr {
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[u32; 3]>,
    material: usize,
}

impl TryFrom<MeshRepr> for TriMesh {
    type Error = GeometryError;

    fn try_from(r: MeshRepr) -> Result<Self> {
        TriMesh::new(
            r.vertices.into_iter().map(Vec3::from).collect(),
            r.triangles,
            r.material,
        )
    }
}

impl From<TriMesh> for MeshRepr {
    fn from(m: TriMesh) -> Self {
        MeshRepr {
            vertices: m.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
            triangles: m.triangles,
            material: m.material,
        }
    }
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>, material: usize) -> Result<Self> {
        if triangles.is_empty() {
            return Err(GeometryError::InvalidMesh("mesh has no triangles".into()));
        }
        if let Some(v) = vertices.iter().find(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(GeometryError::InvalidMesh(format!("non-finite vertex {v:?}")));
        }
        let n = vertices.len();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i as usize >= n)) {
            return Err(GeometryError::InvalidMesh(format!(
                "triangle {t:?} references a vertex beyond {n}"
            )));
        }
        Ok(Self {
            vertices,
            triangles,
            material,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn material(&self) -> usize {
        self.material
    }

    pub fn with_material(mut self, material: usize) -> Self {
        self.material = material;
        self
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[i];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    /// Radius of the smallest origin-centred sphere enclosing every vertex.
    pub fn bounding_radius(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Vertices mapped through `pose`.
    pub fn transformed_vertices(&self, pose: &Pose) -> Vec<Vec3> {
        self.vertices.iter().map(|v| pose.transform_point(v)).collect()
    }

    /// Axis-aligned box of the given size centred on the origin, with
    /// outward-facing counter-clockwise triangles.
    pub fn cuboid(size: Vec3, material: usize) -> Result<Self> {
        Self::cuboid_between(-size * 0.5, size * 0.5, material)
    }

    /// Axis-aligned box spanning `min..max`.
    pub fn cuboid_between(min: Vec3, max: Vec3, material: usize) -> Result<Self> {
        if !(max - min).iter().all(|&e| e > 0.0) {
            return Err(GeometryError::InvalidMesh(format!(
                "degenerate box {min:?}..{max:?}"
            )));
        }
        let v = |x: bool, y: bool, z: bool| {
            Vec3::new(
                if x { max.x } else { min.x },
                if y { max.y } else { min.y },
                if z { max.z } else { min.z },
            )
        };
        let vertices = vec![
            v(false, false, false),
            v(true, false, false),
            v(true, true, false),
            v(false, true, false),
            v(false, false, true),
            v(true, false, true),
            v(true, true, true),
            v(false, true, true),
        ];
        let triangles = vec![
            [0, 2, 1],
            [0, 3, 2], // -z
            [4, 5, 6],
            [4, 6, 7], // +z
            [0, 1, 5],
            [0, 5, 4], // -y
            [3, 7, 6],
            [3, 6, 2], // +y
            [0, 4, 7],
            [0, 7, 3], // -x
            [1, 2, 6],
            [1, 6, 5], // +x
        ];
        Self::new(vertices, triangles, material)
    }

    /// Rectangle in the local XY plane centred on the origin, normal +Z.
    pub fn rectangle(size_x: f64, size_y: f64, material: usize) -> Result<Self> {
        let (hx, hy) = (size_x * 0.5, size_y * 0.5);
        Self::new(
            vec![
                Vec3::new(-hx, -hy, 0.0),
                Vec3::new(hx, -hy, 0.0),
                Vec3::new(hx, hy, 0.0),
                Vec3::new(-hx, hy, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
            material,
        )
    }

    /// Concatenates meshes into one, keeping `self`'s material.
    pub fn merged(&self, others: &[TriMesh]) -> Self {
        let mut vertices = self.vertices.clone();
        let mut triangles = self.triangles.clone();
        for m in others {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(&m.vertices);
            triangles.extend(m.triangles.iter().map(|t| t.map(|i| i + base)));
        }
        Self {
            vertices,
            triangles,
            material: self.material,
        }
    }
}
