//! End-to-end dataset generation driven by one JSON config:
//! scene synthesis, rendering, pattern capture, reconstruction, export.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    compute_annotations, AnnotationSet, DatasetError, DatasetWriter, Manifest, ProjectorSettings, SceneArtifacts,
};
use crate::geometry::{mesh_io, GeometryError, Rig, TriMesh, Vec3};
use crate::graycode::{generate_pattern_stack, GrayCodeConfig, GrayCodeError, PatternStack};
use crate::io::{quantize_u8, IoError};
use crate::raster::Raster;
use crate::reconstruct::{reconstruct_depth, ReconstructError, Reconstruction, DEFAULT_MIN_CONTRAST};
use crate::render::sampling::derive_seed;
use crate::render::{
    render_ground_truth, render_pattern_frames, render_rgb, GroundTruthFrames, Material, RenderError,
    RenderSettings, SceneDescription,
};
use crate::scenegen::{
    build_scene, build_scene_from_poses, ClutterConfig, ImportedPose, OrientationMode, SceneGenError, SceneLighting,
};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    SceneGen(#[from] SceneGenError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
    #[error(transparent)]
    Pattern(#[from] GrayCodeError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl PipelineError {
    /// Process exit status: 1 config, 2 capacity/geometry, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Pattern(_) => 1,
            Self::Geometry(GeometryError::MeshLoad { .. }) => 3,
            Self::SceneGen(SceneGenError::InvalidConfig(_)) => 1,
            Self::SceneGen(_) | Self::Geometry(_) | Self::Render(_) | Self::Reconstruct(_) => 2,
            Self::Dataset(DatasetError::ConsistencyFailure(_) | DatasetError::UnknownInstanceId(_)) => 2,
            Self::Dataset(_) | Self::Io(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSource {
    /// STL or OBJ, relative paths resolved against the config file.
    File(PathBuf),
    Box { size: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinConfig {
    pub inner: [f64; 3],
    #[serde(default = "default_wall")]
    pub wall_thickness: f64,
}

fn default_wall() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub mesh: MeshSource,
    #[serde(default = "default_label")]
    pub class_label: String,
    pub count: u32,
    pub bin: BinConfig,
    #[serde(default)]
    pub voxel_edge: Option<f64>,
    #[serde(default)]
    pub drop_height: [f64; 2],
    #[serde(default)]
    pub orientation: OrientationMode,
    #[serde(default)]
    pub object_material: Material,
    #[serde(default)]
    pub bin_material: Material,
    /// JSON list of imported poses replacing sampling and settling.
    #[serde(default)]
    pub poses: Option<PathBuf>,
}

fn default_label() -> String {
    "object".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructConfig {
    #[serde(default = "default_contrast")]
    pub min_contrast: f64,
}

fn default_contrast() -> f64 {
    DEFAULT_MIN_CONTRAST
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self {
            min_contrast: DEFAULT_MIN_CONTRAST,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_scenes")]
    pub scenes: usize,
    pub scene: SceneConfig,
    #[serde(default)]
    pub lighting: SceneLighting,
    pub rig: Rig,
    pub pattern: GrayCodeConfig,
    #[serde(default)]
    pub render: RenderSettings,
    /// Projector radiant power, watts.
    pub projector_power: f64,
    #[serde(default)]
    pub reconstruct: ReconstructConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Directory relative paths are resolved against; not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_name() -> String {
    "slsim".into()
}

fn default_scenes() -> usize {
    1
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| IoError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_json(&text).map_err(|e| match e {
            PipelineError::Config(m) => PipelineError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        if self.rig.projector.width() != self.pattern.column_count() {
            return bad(format!(
                "projector width {} does not match pattern column_count {}",
                self.rig.projector.width(),
                self.pattern.column_count()
            ));
        }
        if self.render.samples_per_pixel == 0 {
            return bad("render.samples_per_pixel must be >= 1".into());
        }
        if !(self.projector_power.is_finite() && self.projector_power >= 0.0) {
            return bad(format!("projector_power {}", self.projector_power));
        }
        let c = self.reconstruct.min_contrast;
        if !(c.is_finite() && (0.0..=1.0).contains(&c)) {
            return bad(format!("reconstruct.min_contrast {c}"));
        }
        for (name, m) in [("object_material", &self.scene.object_material), ("bin_material", &self.scene.bin_material)] {
            m.validate().or_else(|e| bad(format!("scene.{name}: {e}")))?;
        }
        Ok(())
    }

    /// Seed precedence: explicit override, then the config, else an error.
    pub fn resolve_seed(&self, flag: Option<u64>) -> Result<u64> {
        flag.or(self.seed)
            .ok_or_else(|| PipelineError::Config("no seed: pass --seed or set \"seed\" in the config".into()))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn load_mesh(&self) -> Result<TriMesh> {
        Ok(match &self.scene.mesh {
            MeshSource::File(p) => mesh_io::load_mesh(&self.resolve(p), 0)?,
            MeshSource::Box { size } => TriMesh::cuboid(Vec3::from(*size), 0)?,
        })
    }

    fn load_poses(&self) -> Result<Option<Vec<ImportedPose>>> {
        let Some(p) = &self.scene.poses else {
            return Ok(None);
        };
        let path = self.resolve(p);
        let text = fs::read_to_string(&path).map_err(|source| IoError::Io { path: path.clone(), source })?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn clutter(&self, mesh: TriMesh, seed: u64) -> ClutterConfig {
        ClutterConfig {
            mesh,
            class_label: self.scene.class_label.clone(),
            count: self.scene.count,
            bin_inner: self.scene.bin.inner,
            wall_thickness: self.scene.bin.wall_thickness,
            voxel_edge: self.scene.voxel_edge,
            drop_height: self.scene.drop_height,
            orientation: self.scene.orientation,
            seed,
        }
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            format_version: crate::dataset::FORMAT_VERSION.into(),
            name: self.name.clone(),
            rig: self.rig.clone(),
            pattern: self.pattern,
            render: self.render,
            projector: ProjectorSettings {
                power: self.projector_power,
            },
            ambient_light: self.lighting.ambient_light,
            min_contrast: self.reconstruct.min_contrast,
            scenes: Vec::new(),
        }
    }
}

/// Seed of scene `index` in a dataset with base seed `seed`.
pub fn scene_seed(seed: u64, index: usize) -> u64 {
    derive_seed(&[seed, index as u64])
}

/// Camera captures quantized to 8 bits, as stored on disk.
pub fn quantize_frames(frames: &[Raster<f32>]) -> Vec<Raster<f32>> {
    frames
        .iter()
        .map(|f| f.map(|&v| quantize_u8(v) as f32 / 255.0))
        .collect()
}

/// One fully processed scene.
#[derive(Debug, Clone)]
pub struct SceneOutput {
    pub scene: SceneDescription,
    pub ground_truth: GroundTruthFrames,
    /// 8-bit quantized pattern captures.
    pub frames: Vec<Raster<f32>>,
    pub reconstruction: Reconstruction,
    pub annotations: AnnotationSet,
}

impl SceneOutput {
    pub fn artifacts(&self) -> SceneArtifacts<'_> {
        SceneArtifacts {
            scene: &self.scene,
            ground_truth: &self.ground_truth,
            reconstruction: &self.reconstruction,
            frames: &self.frames,
            annotations: &self.annotations,
        }
    }
}

/// Synthesizes the scene for `seed` (already derived per scene).
pub fn build_scene_for(config: &PipelineConfig, mesh: &TriMesh, seed: u64) -> Result<SceneDescription> {
    let clutter = config.clutter(mesh.clone(), seed);
    let (object, bin) = (config.scene.object_material, config.scene.bin_material);
    Ok(match config.load_poses()? {
        Some(poses) => build_scene_from_poses(&clutter, &poses, object, bin, &config.lighting)?,
        None => build_scene(&clutter, object, bin, &config.lighting)?,
    })
}

/// Renders ground truth, RGB and the pattern captures of a scene.
pub fn render_scene(
    config: &PipelineConfig,
    scene: &SceneDescription,
    stack: &PatternStack,
) -> Result<(GroundTruthFrames, Vec<Raster<f32>>)> {
    let mut gt = render_ground_truth(scene, &config.rig.camera)?;
    gt.rgb = Some(render_rgb(scene, &config.rig.camera, &config.render)?);
    let frames = render_pattern_frames(scene, &config.rig, config.projector_power, stack, &config.render)?;
    Ok((gt, quantize_frames(&frames)))
}

pub fn pattern_stack(config: &PipelineConfig) -> Result<PatternStack> {
    Ok(generate_pattern_stack(
        &config.pattern,
        config.rig.projector.width(),
        config.rig.projector.height(),
    )?)
}

pub fn generate_scene(
    config: &PipelineConfig,
    mesh: &TriMesh,
    stack: &PatternStack,
    seed: u64,
    index: usize,
) -> Result<SceneOutput> {
    let scene = build_scene_for(config, mesh, scene_seed(seed, index))?;
    let (ground_truth, frames) = render_scene(config, &scene, stack)?;
    let reconstruction = reconstruct_depth(&frames, &config.rig, &config.pattern, config.reconstruct.min_contrast)?;
    let annotations = compute_annotations(&ground_truth, &scene, &config.rig, &config.pattern, &config.render)?;
    Ok(SceneOutput {
        scene,
        ground_truth,
        frames,
        reconstruction,
        annotations,
    })
}

/// Machine-readable result of a `generate` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub name: String,
    pub output: PathBuf,
    pub seed: u64,
    pub scenes: usize,
    pub instances: usize,
    pub mean_valid_ratio: f64,
}

/// Generates `scenes` scenes into `out` with `jobs` worker threads.
///
/// Scenes are computed in parallel batches and exported in index order
/// by a single writer, so the dataset bytes do not depend on `jobs`.
pub fn generate_dataset(
    config: &PipelineConfig,
    out: &Path,
    seed: u64,
    scenes: usize,
    jobs: usize,
    progress: &(dyn Fn(&str) + Sync),
) -> Result<GenerateSummary> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;
    let mesh = config.load_mesh()?;
    let stack = pattern_stack(config)?;
    let mut writer = DatasetWriter::create(out, config.manifest())?;
    let (mut instances, mut valid_sum) = (0usize, 0.0);
    let batch = jobs.max(1);
    for start in (0..scenes).step_by(batch) {
        let indices: Vec<usize> = (start..(start + batch).min(scenes)).collect();
        let outputs: Vec<Result<SceneOutput>> = pool.install(|| {
            indices
                .par_iter()
                .map(|&i| {
                    let r = generate_scene(config, &mesh, &stack, seed, i);
                    progress(&format!("scene {i}: {}", if r.is_ok() { "rendered" } else { "failed" }));
                    r
                })
                .collect()
        });
        for (i, output) in indices.into_iter().zip(outputs) {
            let output = output?;
            writer.export(i, &output.artifacts())?;
            instances += output.scene.instances.len();
            let depth = &output.reconstruction.depth;
            valid_sum += depth.data().iter().filter(|&&d| d > 0.0).count() as f64 / depth.len() as f64;
            progress(&format!("scene {i}: exported"));
        }
    }
    Ok(GenerateSummary {
        name: config.name.clone(),
        output: out.to_path_buf(),
        seed,
        scenes,
        instances,
        mean_valid_ratio: if scenes == 0 { 0.0 } else { valid_sum / scenes as f64 },
    })
}
