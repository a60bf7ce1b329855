//! Path-traced rendering of RGB images, ground-truth depth and instance
//! maps, and gray-code pattern captures lit by a pinhole projector.
//!
//! The projector is a point light at its optical centre whose emission is
//! textured by the current pattern frame: a surface point receives
//! irradiance `power * pattern(u_p, v_p) * cosθ / (4π d²)` when it projects
//! inside the projector raster and has an unoccluded line of sight to the
//! projector. Points the projector cannot see stay dark in every frame,
//! which is what later turns into zero-depth shadows.

mod material;
pub mod sampling;
mod scene;
mod tracer;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use material::Material;
pub use scene::{AreaLight, BinBox, Instance, SceneDescription, BACKGROUND_ID};
pub use tracer::sample_bilinear;

use crate::geometry::{Bvh, PinholeModel, Rig, Vec3};
use crate::graycode::PatternStack;
use crate::raster::{Raster, RgbImage};
use sampling::RGB_STREAM;
use tracer::Lighting;

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("scene contains no geometry")]
    EmptyScene,
    #[error("pattern raster {actual:?} does not match projector raster {expected:?}")]
    RasterMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid render settings: {0}")]
    InvalidSettings(String),
}

pub type Result<T> = std::result::Result<T, RenderError>;

/// Monte Carlo budget. The output resolution is the camera's raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderSettings {
    #[serde(default = "default_spp")]
    pub samples_per_pixel: u32,
    /// Scattering events per path; 0 renders only directly visible ambient.
    #[serde(default = "default_bounces")]
    pub max_bounces: u32,
}

fn default_spp() -> u32 {
    20
}

fn default_bounces() -> u32 {
    3
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            samples_per_pixel: default_spp(),
            max_bounces: default_bounces(),
        }
    }
}

impl RenderSettings {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_pixel == 0 {
            return Err(RenderError::InvalidSettings("samples_per_pixel must be >= 1".into()));
        }
        Ok(())
    }
}

/// The projector as a light source.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorLight {
    pub model: PinholeModel,
    /// Radiant power, watts.
    pub power: f64,
}

/// Deterministic renders of the true scene.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthFrames {
    /// Camera-frame Z of the first hit through each pixel centre; 0 = no hit.
    pub depth: Raster<f32>,
    /// Instance id of the first hit; 0 for the bin and background.
    pub instance_map: Raster<u16>,
    /// Linear RGB, attached by [`render_rgb`] callers when available.
    pub rgb: Option<RgbImage>,
}

fn prepare(scene: &SceneDescription) -> Result<Bvh> {
    scene.validate()?;
    if !scene.has_geometry() {
        return Err(RenderError::EmptyScene);
    }
    scene.build_bvh()
}

/// Casts one ray through every pixel centre.
pub fn render_ground_truth(scene: &SceneDescription, camera: &PinholeModel) -> Result<GroundTruthFrames> {
    let bvh = prepare(scene)?;
    let (w, h) = (camera.width(), camera.height());
    let rows: Vec<Vec<(f32, u16)>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    let ray = camera.pixel_ray(x as f64, y as f64);
                    match bvh.intersect(&ray) {
                        Some(hit) => {
                            let z = camera.world_to_device(&ray.at(hit.t)).z;
                            (z.max(0.0) as f32, hit.instance_id as u16)
                        }
                        None => (0.0, 0),
                    }
                })
                .collect()
        })
        .collect();
    let flat: Vec<(f32, u16)> = rows.into_iter().flatten().collect();
    Ok(GroundTruthFrames {
        depth: Raster::from_vec(w, h, flat.iter().map(|p| p.0).collect()).expect("size"),
        instance_map: Raster::from_vec(w, h, flat.iter().map(|p| p.1).collect()).expect("size"),
        rgb: None,
    })
}

/// Path-traced linear RGB under the scene's ambient and area lights.
pub fn render_rgb(scene: &SceneDescription, camera: &PinholeModel, settings: &RenderSettings) -> Result<RgbImage> {
    settings.validate()?;
    let bvh = prepare(scene)?;
    let lighting = Lighting {
        ambient: scene.ambient_light,
        area_lights: &scene.area_lights,
    };
    Ok(tracer::render_image(
        &bvh,
        &scene.materials,
        &lighting,
        camera,
        settings,
        scene.seed,
        RGB_STREAM,
        |rgb| rgb.map(|c| c as f32),
    ))
}

/// Irradiance delivered by the projector at `point` with unit `normal`.
///
/// Zero when the point projects outside the projector raster, faces away,
/// or is occluded on the way to the projector centre.
pub fn projector_radiance(
    point: &Vec3,
    normal: &Vec3,
    projector: &ProjectorLight,
    pattern: &Raster<f32>,
    occluders: &Bvh,
) -> [f64; 3] {
    match tracer::projector_sample(point, normal, projector, occluders) {
        Some(s) => [s.irradiance * sample_bilinear(pattern, s.u, s.v); 3],
        None => [0.0; 3],
    }
}

/// Renders one luminance capture per stack frame, in stack order.
///
/// Light comes from the projector (textured by the frame) plus the scene's
/// ambient term; area lights are off, as they would be during a scan.
/// Values saturate at 1.0 like a camera sensor. All frames share the same
/// camera samples and light paths, as a static scene would under a real
/// sensor, so frame-to-frame differences come from the patterns alone.
pub fn render_pattern_frames(
    scene: &SceneDescription,
    rig: &Rig,
    projector_power: f64,
    stack: &PatternStack,
    settings: &RenderSettings,
) -> Result<Vec<Raster<f32>>> {
    settings.validate()?;
    let expected = (rig.projector.width(), rig.projector.height());
    if stack.resolution() != expected {
        return Err(RenderError::RasterMismatch {
            expected,
            actual: stack.resolution(),
        });
    }
    if !(projector_power.is_finite() && projector_power >= 0.0) {
        return Err(RenderError::InvalidScene(format!("projector power {projector_power}")));
    }
    let bvh = prepare(scene)?;
    let projector = ProjectorLight {
        model: rig.projector.clone(),
        power: projector_power,
    };
    Ok(tracer::render_patterns(
        &bvh,
        &scene.materials,
        scene.ambient_light,
        &projector,
        stack.frames(),
        &rig.camera,
        settings,
        scene.seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Pose, TriMesh};

    fn plane_scene(z: f64, material: Material, ambient: [f64; 3]) -> SceneDescription {
        SceneDescription {
            meshes: vec![TriMesh::rectangle(20.0, 20.0, 0).unwrap()],
            materials: vec![material],
            instances: vec![Instance {
                mesh: 0,
                pose: Pose::from_translation(Vec3::new(0.0, 0.0, z)),
                id: 1,
                class_label: "plane".into(),
            }],
            bin: None,
            ambient_light: ambient,
            area_lights: vec![],
            seed: 1,
        }
    }

    fn small_camera() -> PinholeModel {
        PinholeModel::from_intrinsics(40.0, 40.0, 16.0, 12.0, 32, 24).unwrap()
    }

    #[test]
    fn fronto_parallel_plane_ground_truth() {
        let gt = render_ground_truth(&plane_scene(2.0, Material::default(), [0.0; 3]), &small_camera()).unwrap();
        assert!(gt.depth.data().iter().all(|&d| (d - 2.0).abs() < 1e-6));
        assert!(gt.instance_map.data().iter().all(|&i| i == 1));
    }

    #[test]
    fn empty_scene_is_an_error() {
        let mut s = plane_scene(2.0, Material::default(), [0.0; 3]);
        s.instances.clear();
        assert!(matches!(render_ground_truth(&s, &small_camera()), Err(RenderError::EmptyScene)));
        assert!(matches!(
            render_rgb(&s, &small_camera(), &RenderSettings::default()),
            Err(RenderError::EmptyScene)
        ));
    }

    #[test]
    fn zero_radiance_renders_black() {
        let s = plane_scene(2.0, Material::default(), [0.0; 3]);
        let img = render_rgb(&s, &small_camera(), &RenderSettings::default()).unwrap();
        assert!(img.data().iter().all(|p| *p == [0.0; 3]));
    }

    #[test]
    fn zero_bounces_without_emitters_is_black() {
        let s = plane_scene(2.0, Material::default(), [0.0; 3]);
        let settings = RenderSettings {
            samples_per_pixel: 2,
            max_bounces: 0,
        };
        let img = render_rgb(&s, &small_camera(), &settings).unwrap();
        assert!(img.data().iter().all(|p| *p == [0.0; 3]));
    }

    #[test]
    fn furnace_plane_reflects_albedo_times_ambient() {
        let s = plane_scene(2.0, Material::lambertian([0.5; 3]), [0.8; 3]);
        let settings = RenderSettings {
            samples_per_pixel: 256,
            max_bounces: 1,
        };
        let img = render_rgb(&s, &small_camera(), &settings).unwrap();
        for p in img.data() {
            for c in p {
                assert!((c - 0.4).abs() <= 0.02 * 0.4, "pixel {c}");
            }
        }
    }

    #[test]
    fn zero_spp_is_rejected() {
        let s = plane_scene(2.0, Material::default(), [0.0; 3]);
        let settings = RenderSettings {
            samples_per_pixel: 0,
            max_bounces: 1,
        };
        assert!(matches!(
            render_rgb(&s, &small_camera(), &settings),
            Err(RenderError::InvalidSettings(_))
        ));
    }

    #[test]
    fn settings_json_defaults() {
        let s: RenderSettings = serde_json::from_str("{}").unwrap();
        assert_eq!(s, RenderSettings::default());
        assert_eq!(s.samples_per_pixel, 20);
        assert!(serde_json::from_str::<RenderSettings>(r#"{"spp":3}"#).is_err());
    }
}
