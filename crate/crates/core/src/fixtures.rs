//! Small analytic scenes for a rig looking down world +Z from the origin,
//! as built by [`Rig::rectified`](crate::Rig::rectified). The guide and the
//! test suites use them because their ground truth has a closed form.

use nalgebra::Rotation3;

use crate::geometry::{Pose, TriMesh, Vec3};
use crate::render::{Instance, Material, SceneDescription};

fn instance(mesh: usize, pose: Pose, id: u32, label: &str) -> Instance {
    Instance {
        mesh,
        pose,
        id,
        class_label: label.into(),
    }
}

fn scene(meshes: Vec<TriMesh>, material: Material, instances: Vec<Instance>, seed: u64) -> SceneDescription {
    SceneDescription {
        meshes,
        materials: vec![material],
        instances,
        bin: None,
        ambient_light: [0.0; 3],
        area_lights: Vec::new(),
        seed,
    }
}

/// Square plane of edge `size` at depth `z`, facing the camera.
pub fn fronto_plane(z: f64, size: f64, material: Material, seed: u64) -> SceneDescription {
    let mesh = TriMesh::rectangle(size, size, 0).expect("positive size");
    scene(
        vec![mesh],
        material,
        vec![instance(0, Pose::from_translation(Vec3::new(0.0, 0.0, z)), 1, "plane")],
        seed,
    )
}

/// A far plane at `far_z` and, in front of it, a half plane at `near_z`
/// covering `x < 0`, with its edge rotated by `edge_angle` radians about
/// the optical axis. Ids: far 1, near 2.
pub fn step_planes(near_z: f64, far_z: f64, edge_angle: f64, material: Material, seed: u64) -> SceneDescription {
    let size = 4.0;
    let far = TriMesh::rectangle(size, size, 0).expect("positive size");
    let near = TriMesh::rectangle(size / 2.0, size, 0).expect("positive size");
    let r = *Rotation3::from_axis_angle(&Vec3::z_axis(), edge_angle).matrix();
    let near_pose = Pose::new(r, r * Vec3::new(-size / 4.0, 0.0, 0.0) + Vec3::new(0.0, 0.0, near_z))
        .expect("rotation about z");
    scene(
        vec![far, near],
        material,
        vec![
            instance(0, Pose::from_translation(Vec3::new(0.0, 0.0, far_z)), 1, "far"),
            instance(1, near_pose, 2, "near"),
        ],
        seed,
    )
}

/// A plane at `plane_z` with an axis-aligned block spanning `min..max`
/// standing in front of it. Ids: plane 1, block 2.
pub fn occluded_plane(plane_z: f64, min: Vec3, max: Vec3, material: Material, seed: u64) -> SceneDescription {
    let plane = TriMesh::rectangle(4.0, 4.0, 0).expect("positive size");
    let block = TriMesh::cuboid_between(min, max, 0).expect("non-degenerate block");
    scene(
        vec![plane, block],
        material,
        vec![
            instance(0, Pose::from_translation(Vec3::new(0.0, 0.0, plane_z)), 1, "plane"),
            instance(1, Pose::identity(), 2, "block"),
        ],
        seed,
    )
}
