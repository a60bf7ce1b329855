//! Cluttered single-class bin scenes: voxel-grid pose sampling followed by
//! an orientation-preserving vertical drop.
//!
//! The world is z-up. The bin's inner floor is the plane `z = 0`, its
//! interior spans `±inner[0]/2 x ±inner[1]/2` and its rim is at
//! `z = inner[2]`. Candidate drop positions are the centres of a voxel grid
//! stacked above the rim.
//!
//! Settling moves each instance straight down until it touches the bin
//! floor or an instance placed before it. Contact is computed exactly on
//! the triangle meshes (not on the height field), so stacked instances touch
//! without interpenetrating; the [`HeightField`] only narrows down which
//! earlier instances can possibly lie underneath.

use nalgebra::{Rotation3, UnitQuaternion};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{check_rotation, mat3_from_row_major, Aabb, Mat3, Pose, TriMesh, Vec3};
use crate::render::{AreaLight, BinBox, Instance, Material, SceneDescription};

/// Hard cap on instances per scene; ids must fit the 8-bit label range.
pub const MAX_INSTANCES: u32 = 255;

/// Slack for containment and contact comparisons, meters.
const TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum SceneGenError {
    #[error("capacity exceeded: requested {requested} instances, at most {available} available")]
    CapacityExceeded { requested: u32, available: u32 },
    #[error("instance {index} does not fit inside the bin interior")]
    DoesNotFit { index: usize },
    #[error("invalid clutter config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, SceneGenError>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationMode {
    /// Uniformly distributed over SO(3).
    #[default]
    Full,
    /// Rotation about the world z axis only; the mesh keeps its upright pose.
    YawOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClutterConfig {
    pub mesh: TriMesh,
    pub class_label: String,
    pub count: u32,
    pub bin_inner: [f64; 3],
    pub wall_thickness: f64,
    /// Defaults to the diameter of the mesh's bounding sphere.
    pub voxel_edge: Option<f64>,
    /// Range of the voxel layers, meters above the bin rim.
    pub drop_height: [f64; 2],
    pub orientation: OrientationMode,
    pub seed: u64,
}

impl ClutterConfig {
    pub fn new(mesh: TriMesh, count: u32, bin_inner: [f64; 3], seed: u64) -> Self {
        Self {
            mesh,
            class_label: "object".into(),
            count,
            bin_inner,
            wall_thickness: 0.01,
            voxel_edge: None,
            drop_height: [0.0, 0.0],
            orientation: OrientationMode::Full,
            seed,
        }
    }

    pub fn voxel_edge(&self) -> f64 {
        self.voxel_edge
            .unwrap_or_else(|| 2.0 * self.mesh.bounding_radius())
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SceneGenError::InvalidConfig(m));
        if self.count > MAX_INSTANCES {
            return Err(SceneGenError::CapacityExceeded {
                requested: self.count,
                available: MAX_INSTANCES,
            });
        }
        if !self.bin_inner.iter().all(|d| d.is_finite() && *d > 0.0) {
            return bad(format!("bin dimensions {:?}", self.bin_inner));
        }
        if !(self.wall_thickness.is_finite() && self.wall_thickness > 0.0) {
            return bad(format!("wall thickness {}", self.wall_thickness));
        }
        let edge = self.voxel_edge();
        if !(edge.is_finite() && edge > 0.0) {
            return bad(format!("voxel edge {edge}"));
        }
        let [lo, hi] = self.drop_height;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi >= lo) {
            return bad(format!("drop height range {:?}", self.drop_height));
        }
        Ok(())
    }

    pub fn bin(&self, material: usize) -> BinBox {
        BinBox {
            inner: self.bin_inner,
            wall_thickness: self.wall_thickness,
            pose: Pose::identity(),
            material,
        }
    }

    /// Voxel centres above the bin, x fastest, then y, then z.
    ///
    /// The grid is inset from the walls so that a mesh centred in any voxel
    /// stays inside the interior whatever its orientation.
    pub fn voxel_centers(&self) -> Vec<Vec3> {
        let edge = self.voxel_edge();
        let inset = (self.mesh.bounding_radius() - edge / 2.0).max(0.0);
        let span = |d: f64| d - 2.0 * inset;
        let fit = |d: f64| if d > 0.0 { (d / edge + 1e-9).floor() as usize } else { 0 };
        let (nx, ny) = (fit(span(self.bin_inner[0])), fit(span(self.bin_inner[1])));
        let nz = fit(self.drop_height[1] - self.drop_height[0]).max(1);
        let base = self.bin_inner[2] + self.drop_height[0] + edge / 2.0;
        let offset = |n: usize| -(n as f64) * edge / 2.0 + edge / 2.0;
        let mut out = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    out.push(Vec3::new(
                        offset(nx) + i as f64 * edge,
                        offset(ny) + j as f64 * edge,
                        base + k as f64 * edge,
                    ));
                }
            }
        }
        out
    }
}

fn random_rotation(rng: &mut ChaCha8Rng, mode: OrientationMode) -> Mat3 {
    match mode {
        OrientationMode::YawOnly => {
            let yaw = rng.random::<f64>() * std::f64::consts::TAU;
            *Rotation3::from_axis_angle(&Vec3::z_axis(), yaw).matrix()
        }
        OrientationMode::Full => {
            // Shoemake's uniform unit quaternion.
            let [u1, u2, u3]: [f64; 3] = rng.random();
            let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
            let (t2, t3) = (std::f64::consts::TAU * u2, std::f64::consts::TAU * u3);
            let q = nalgebra::Quaternion::new(b * t3.cos(), a * t2.sin(), a * t2.cos(), b * t3.sin());
            *UnitQuaternion::from_quaternion(q).to_rotation_matrix().matrix()
        }
    }
}

/// Picks `count` voxel centres without replacement and gives each an
/// independent random orientation.
pub fn sample_poses(config: &ClutterConfig) -> Result<Vec<Pose>> {
    config.validate()?;
    let mut centers = config.voxel_centers();
    if config.count as usize > centers.len() {
        return Err(SceneGenError::CapacityExceeded {
            requested: config.count,
            available: centers.len() as u32,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    centers.shuffle(&mut rng);
    centers.truncate(config.count as usize);
    Ok(centers
        .into_iter()
        .map(|c| {
            let r = random_rotation(&mut rng, config.orientation);
            Pose::new(r, c).expect("sampled rotations are orthonormal")
        })
        .collect())
}

/// Maximum occupied height per square cell over the bin interior, plus the
/// instances rasterized into each cell.
#[derive(Debug, Clone)]
pub struct HeightField {
    origin: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    floor: f64,
    heights: Vec<f64>,
    occupants: Vec<Vec<usize>>,
}

impl HeightField {
    /// Covers `±half_extent` around the origin at floor height `floor`.
    pub fn new(half_extent: [f64; 2], cell: f64, floor: f64) -> Self {
        let nx = ((2.0 * half_extent[0] / cell).ceil() as usize).max(1);
        let ny = ((2.0 * half_extent[1] / cell).ceil() as usize).max(1);
        Self {
            origin: [-half_extent[0], -half_extent[1]],
            cell,
            nx,
            ny,
            floor,
            heights: vec![floor; nx * ny],
            occupants: vec![Vec::new(); nx * ny],
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    fn cell_range(&self, lo: f64, hi: f64, axis: usize) -> std::ops::RangeInclusive<usize> {
        let n = if axis == 0 { self.nx } else { self.ny };
        let idx = |v: f64| (((v - self.origin[axis]) / self.cell).floor().max(0.0) as usize).min(n - 1);
        idx(lo)..=idx(hi)
    }

    fn cells(&self, aabb: &Aabb) -> impl Iterator<Item = usize> + '_ {
        let xs = self.cell_range(aabb.min.x, aabb.max.x, 0);
        let ys = self.cell_range(aabb.min.y, aabb.max.y, 1);
        ys.flat_map(move |j| xs.clone().map(move |i| j * self.nx + i))
    }

    /// Height of the cell containing `(x, y)`, clamped to the grid.
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        let i = *self.cell_range(x, x, 0).start();
        let j = *self.cell_range(y, y, 1).start();
        self.heights[j * self.nx + i]
    }

    /// Highest value over the cells touched by `aabb`'s footprint.
    pub fn max_under(&self, aabb: &Aabb) -> f64 {
        self.cells(aabb).map(|c| self.heights[c]).fold(self.floor, f64::max)
    }

    /// Rasterizes world-space triangles (conservatively, by their boxes).
    pub fn insert(&mut self, vertices: &[Vec3], triangles: &[[u32; 3]], occupant: usize) {
        for t in triangles {
            let tri = t.map(|i| vertices[i as usize]);
            let bb = Aabb::from_points(&tri);
            let cells: Vec<usize> = self.cells(&bb).collect();
            for c in cells {
                self.heights[c] = self.heights[c].max(bb.max.z);
                if self.occupants[c].last() != Some(&occupant) {
                    self.occupants[c].push(occupant);
                }
            }
        }
    }

    /// Occupants of any cell under `aabb`'s footprint, sorted and unique.
    pub fn candidates(&self, aabb: &Aabb) -> Vec<usize> {
        let mut out: Vec<usize> = self.cells(aabb).flat_map(|c| self.occupants[c].iter().copied()).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// World-space copy of a mesh for contact queries.
struct Placed {
    vertices: Vec<Vec3>,
    aabb: Aabb,
}

impl Placed {
    fn new(mesh: &TriMesh, pose: &Pose) -> Self {
        let vertices = mesh.transformed_vertices(pose);
        let aabb = Aabb::from_points(&vertices);
        Self { vertices, aabb }
    }
}

fn unique_edges(mesh: &TriMesh) -> Vec<[u32; 2]> {
    let mut edges: Vec<[u32; 2]> = mesh
        .triangles()
        .iter()
        .flat_map(|t| [[t[0], t[1]], [t[1], t[2]], [t[2], t[0]]])
        .map(|[a, b]| if a < b { [a, b] } else { [b, a] })
        .collect();
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// Height of triangle `tri` above the point `(x, y)` if the point lies in
/// its XY projection.
fn height_on_triangle(tri: &[Vec3; 3], x: f64, y: f64) -> Option<f64> {
    let [a, b, c] = tri;
    let det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    if det.abs() < 1e-18 {
        return None;
    }
    let l1 = ((x - a.x) * (c.y - a.y) - (c.x - a.x) * (y - a.y)) / det;
    let l2 = ((b.x - a.x) * (y - a.y) - (x - a.x) * (b.y - a.y)) / det;
    let l0 = 1.0 - l1 - l2;
    let eps = 1e-12;
    (l0 >= -eps && l1 >= -eps && l2 >= -eps).then(|| l0 * a.z + l1 * b.z + l2 * c.z)
}

/// Where the XY projections of two segments cross, as heights on each.
fn edge_crossing(p: [Vec3; 2], q: [Vec3; 2]) -> Option<(f64, f64)> {
    let (d1, d2) = (p[1] - p[0], q[1] - q[0]);
    let denom = d1.x * d2.y - d1.y * d2.x;
    if denom.abs() < 1e-18 {
        return None;
    }
    let w = q[0] - p[0];
    let s = (w.x * d2.y - w.y * d2.x) / denom;
    let t = (w.x * d1.y - w.y * d1.x) / denom;
    let eps = 1e-12;
    ((-eps..=1.0 + eps).contains(&s) && (-eps..=1.0 + eps).contains(&t))
        .then(|| (p[0].z + s * d1.z, q[0].z + t * d2.z))
}

/// Smallest vertical gap `z_a - z_b` over all points where a vertical line
/// meets both meshes. Dropping `a` by this amount (from high enough above)
/// brings it into contact with `b`.
fn vertical_gap(a: &Placed, b: &Placed, mesh: &TriMesh, edges: &[[u32; 2]]) -> Option<f64> {
    let tris = |p: &Placed, other: &Aabb| -> Vec<[Vec3; 3]> {
        mesh.triangles()
            .iter()
            .map(|t| t.map(|i| p.vertices[i as usize]))
            .filter(|t| Aabb::from_points(t).overlaps_xy(other))
            .collect()
    };
    let (ta, tb) = (tris(a, &b.aabb), tris(b, &a.aabb));
    let mut gap = f64::INFINITY;
    for v in a.vertices.iter().filter(|v| b.aabb.overlaps_xy(&Aabb::from_points([*v]))) {
        for t in &tb {
            if let Some(z) = height_on_triangle(t, v.x, v.y) {
                gap = gap.min(v.z - z);
            }
        }
    }
    for v in b.vertices.iter().filter(|v| a.aabb.overlaps_xy(&Aabb::from_points([*v]))) {
        for t in &ta {
            if let Some(z) = height_on_triangle(t, v.x, v.y) {
                gap = gap.min(z - v.z);
            }
        }
    }
    let seg = |p: &Placed, e: &[u32; 2]| [p.vertices[e[0] as usize], p.vertices[e[1] as usize]];
    let near = |p: &Placed, e: &[u32; 2], other: &Aabb| Aabb::from_points(&seg(p, e)).overlaps_xy(other);
    let ea: Vec<[Vec3; 2]> = edges.iter().filter(|e| near(a, e, &b.aabb)).map(|e| seg(a, e)).collect();
    let eb: Vec<[Vec3; 2]> = edges.iter().filter(|e| near(b, e, &a.aabb)).map(|e| seg(b, e)).collect();
    for sa in &ea {
        for sb in &eb {
            if let Some((za, zb)) = edge_crossing(*sa, *sb) {
                gap = gap.min(za - zb);
            }
        }
    }
    gap.is_finite().then_some(gap)
}

/// Drops each pose straight down, in order, onto the bin floor or the
/// instances settled before it. Orientations are unchanged.
pub fn settle(poses: &[Pose], mesh: &TriMesh, bin: &BinBox) -> Result<Vec<Pose>> {
    let [ix, iy, _] = bin.inner;
    let floor = 0.0;
    let edges = unique_edges(mesh);
    let cell = 2.0 * mesh.bounding_radius() / 8.0;
    let mut field = HeightField::new([ix / 2.0, iy / 2.0], cell.max(1e-6), floor);
    let mut placed: Vec<Placed> = Vec::with_capacity(poses.len());
    let mut out = Vec::with_capacity(poses.len());
    for (index, pose) in poses.iter().enumerate() {
        let start = Placed::new(mesh, pose);
        let bb = start.aabb;
        let inside = bb.min.x >= -ix / 2.0 - TOLERANCE
            && bb.max.x <= ix / 2.0 + TOLERANCE
            && bb.min.y >= -iy / 2.0 - TOLERANCE
            && bb.max.y <= iy / 2.0 + TOLERANCE;
        if !inside {
            return Err(SceneGenError::DoesNotFit { index });
        }
        let mut drop = bb.min.z - floor;
        for c in field.candidates(&bb) {
            if let Some(g) = vertical_gap(&start, &placed[c], mesh, &edges) {
                drop = drop.min(g);
            }
        }
        let t = pose.translation() - Vec3::z() * drop;
        let settled = pose.with_translation(t);
        let p = Placed::new(mesh, &settled);
        field.insert(&p.vertices, mesh.triangles(), index);
        placed.push(p);
        out.push(settled);
    }
    Ok(out)
}

/// Lights for a generated scene.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneLighting {
    #[serde(default)]
    pub ambient_light: [f64; 3],
    #[serde(default)]
    pub area_lights: Vec<AreaLight>,
}

fn compose(
    config: &ClutterConfig,
    poses: Vec<Pose>,
    object: Material,
    bin: Material,
    lighting: &SceneLighting,
) -> SceneDescription {
    SceneDescription {
        meshes: vec![config.mesh.clone().with_material(0)],
        materials: vec![object, bin],
        instances: poses
            .into_iter()
            .enumerate()
            .map(|(i, pose)| Instance {
                mesh: 0,
                pose,
                id: i as u32 + 1,
                class_label: config.class_label.clone(),
            })
            .collect(),
        bin: Some(config.bin(1)),
        ambient_light: lighting.ambient_light,
        area_lights: lighting.area_lights.clone(),
        seed: config.seed,
    }
}

/// Samples, settles and assembles a bin scene. Instance ids follow drop
/// order starting at 1; material 0 is the object, material 1 the bin.
pub fn build_scene(
    config: &ClutterConfig,
    object: Material,
    bin: Material,
    lighting: &SceneLighting,
) -> Result<SceneDescription> {
    let initial = sample_poses(config)?;
    let settled = settle(&initial, &config.mesh, &config.bin(1))?;
    Ok(compose(config, settled, object, bin, lighting))
}

/// An externally computed pose, e.g. from a physics engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportedPose {
    pub instance_id: u32,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

/// Like [`build_scene`] but with poses supplied instead of sampled. The
/// imported ids must be exactly `1..=N`; they are placed in id order.
pub fn build_scene_from_poses(
    config: &ClutterConfig,
    imported: &[ImportedPose],
    object: Material,
    bin: Material,
    lighting: &SceneLighting,
) -> Result<SceneDescription> {
    if imported.len() > MAX_INSTANCES as usize {
        return Err(SceneGenError::CapacityExceeded {
            requested: imported.len() as u32,
            available: MAX_INSTANCES,
        });
    }
    let mut sorted: Vec<&ImportedPose> = imported.iter().collect();
    sorted.sort_by_key(|p| p.instance_id);
    let mut poses = Vec::with_capacity(sorted.len());
    for (i, p) in sorted.iter().enumerate() {
        if p.instance_id as usize != i + 1 {
            return Err(SceneGenError::InvalidConfig(
                "imported instance ids must be contiguous from 1".into(),
            ));
        }
        let r = mat3_from_row_major(&p.rotation);
        check_rotation(&r).map_err(|e| SceneGenError::InvalidConfig(e.to_string()))?;
        poses.push(Pose::new(r, Vec3::from(p.translation)).map_err(|e| SceneGenError::InvalidConfig(e.to_string()))?);
    }
    let bin_box = config.bin(1);
    for (index, pose) in poses.iter().enumerate() {
        if !bin_box.encloses_xy(pose.translation()) {
            return Err(SceneGenError::DoesNotFit { index });
        }
    }
    Ok(compose(config, poses, object, bin, lighting))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube() -> TriMesh {
        TriMesh::cuboid(Vec3::repeat(1.0), 0).unwrap()
    }

    fn config(count: u32, seed: u64) -> ClutterConfig {
        ClutterConfig::new(cube(), count, [6.0, 6.0, 2.0], seed)
    }

    #[test]
    fn single_voxel_grid_places_at_its_centre() {
        let mut c = config(1, 3);
        let edge = c.voxel_edge();
        c.bin_inner = [edge, edge, 1.0];
        let poses = sample_poses(&c).unwrap();
        assert_eq!(c.voxel_centers().len(), 1);
        let t = poses[0].translation();
        assert!(t.x.abs() < 1e-12 && t.y.abs() < 1e-12);
        assert!((t.z - (1.0 + edge / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn count_above_cap_is_rejected() {
        let mut c = config(256, 1);
        c.bin_inner = [100.0, 100.0, 1.0];
        assert!(matches!(sample_poses(&c), Err(SceneGenError::CapacityExceeded { .. })));
    }

    #[test]
    fn count_above_voxels_is_rejected() {
        let c = config(10, 1);
        let n = c.voxel_centers().len();
        let c = config(n as u32 + 1, 1);
        assert!(matches!(sample_poses(&c), Err(SceneGenError::CapacityExceeded { .. })));
    }

    #[test]
    fn sampling_is_seeded() {
        let a = sample_poses(&config(4, 7)).unwrap();
        assert_eq!(a, sample_poses(&config(4, 7)).unwrap());
        assert_ne!(a, sample_poses(&config(4, 8)).unwrap());
    }

    #[test]
    fn cube_rests_on_floor() {
        let c = config(1, 0);
        let start = Pose::from_translation(Vec3::new(0.0, 0.0, 5.0));
        let out = settle(&[start], &c.mesh, &c.bin(1)).unwrap();
        assert!((out[0].translation().z - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cubes_stack() {
        let c = config(2, 0);
        let start = Pose::from_translation(Vec3::new(0.2, -0.1, 5.0));
        let out = settle(&[start, start.with_translation(Vec3::new(0.0, 0.0, 3.0))], &c.mesh, &c.bin(1))
            .unwrap();
        assert!((out[0].translation().z - 0.5).abs() < 1e-12);
        assert!((out[1].translation().z - 1.5).abs() < 1e-12);
    }

    #[test]
    fn wide_instance_does_not_fit() {
        let c = config(1, 0);
        let start = Pose::from_translation(Vec3::new(2.8, 0.0, 5.0));
        assert!(matches!(
            settle(&[start], &c.mesh, &c.bin(1)),
            Err(SceneGenError::DoesNotFit { index: 0 })
        ));
    }

    #[test]
    fn empty_scene_has_only_the_bin() {
        let s = build_scene(&config(0, 1), Material::default(), Material::default(), &SceneLighting::default())
            .unwrap();
        assert!(s.instances.is_empty());
        assert!(s.bin.is_some());
        s.validate().unwrap();
    }

    #[test]
    fn ten_objects_build_a_valid_scene() {
        let mut c = config(10, 5);
        c.drop_height = [0.0, 4.0];
        assert_eq!(c.voxel_centers().len(), 18);
        let s = build_scene(&c, Material::default(), Material::default(), &SceneLighting::default())
            .unwrap();
        s.validate().unwrap();
        let ids: Vec<u32> = s.instances.iter().map(|i| i.id).collect();
        assert_eq!(ids, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn height_field_tracks_maxima() {
        let mut f = HeightField::new([1.0, 1.0], 0.25, 0.0);
        let m = TriMesh::cuboid(Vec3::new(0.5, 0.5, 0.3), 0).unwrap();
        let p = Pose::from_translation(Vec3::new(0.5, 0.5, 0.15));
        f.insert(&m.transformed_vertices(&p), m.triangles(), 0);
        assert!((f.height_at(0.5, 0.5) - 0.3).abs() < 1e-12);
        assert_eq!(f.height_at(-0.9, -0.9), 0.0);
        assert_eq!(f.candidates(&m.aabb()), vec![0]);
    }

    #[test]
    fn imported_poses_need_contiguous_ids() {
        let c = config(0, 0);
        let p = |id| ImportedPose {
            instance_id: id,
            rotation: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            translation: [0.0, 0.0, 0.5],
        };
        let m = Material::default();
        let l = SceneLighting::default();
        assert!(build_scene_from_poses(&c, &[p(2), p(1)], m, m, &l).is_ok());
        assert!(build_scene_from_poses(&c, &[p(1), p(3)], m, m, &l).is_err());
    }
}
