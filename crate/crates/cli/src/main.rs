//! `slsim`: command-line front end for the structured-light simulator.
//!
//! Exit status: 0 success, 1 config or usage error, 2 capacity or geometry
//! error, 3 I/O error, 4 validation failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use slsim_core::dataset::{
    check_annotations, check_manifest_completeness, AnnotationSet, Manifest, ANNOTATIONS_FILE, DEPTH_GT_FILE,
    DEPTH_RECON_FILE, INSTANCE_FILE, MANIFEST_FILE, PATTERNS_DIR, RGB_FILE, SCENE_FILE,
};
use slsim_core::graycode::{frame_file_name, generate_pattern_stack, GrayCodeConfig};
use slsim_core::io::{self, IoError};
use slsim_core::pipeline::{self, scene_seed, PipelineConfig, PipelineError};
use slsim_core::reconstruct::{depth_metrics, reconstruct_depth, QuantizationModel, DEFAULT_MIN_CONTRAST};
use slsim_core::scenegen::MAX_INSTANCES;
use slsim_core::Rig;

const EXIT_VALIDATION: u8 = 4;

#[derive(Parser)]
#[command(name = "slsim", version, about = "Gray-code structured-light camera simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write a dataset.
    Generate {
        /// Pipeline config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output dataset directory; overrides the config's "output".
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed; overrides the config's "seed".
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Number of scenes; overrides the config's "scenes".
        #[arg(long)]
        scenes: Option<usize>,
    },
    /// Write the gray-code pattern stack as 8-bit PNGs.
    Patterns {
        /// Projector columns.
        #[arg(long)]
        columns: u32,
        /// Projector raster as WIDTHxHEIGHT.
        #[arg(long, value_parser = parse_raster)]
        raster: (u32, u32),
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize and render one scene: RGB, ground truth and pattern captures.
    Render {
        /// Pipeline config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Base seed; overrides the config's "seed".
        #[arg(long)]
        seed: Option<u64>,
        /// Scene index within the dataset seed sequence.
        #[arg(long, default_value_t = 0)]
        scene_index: usize,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Decode captured pattern frames into a depth map.
    Reconstruct {
        /// Directory with pattern_00.png, pattern_01.png, ...
        #[arg(long)]
        frames: PathBuf,
        /// Rig calibration (JSON with camera and projector blocks).
        #[arg(long)]
        rig: PathBuf,
        /// Gray-code config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output depth map (PFM).
        #[arg(long)]
        out: PathBuf,
        /// Minimum temporal contrast for a valid pixel.
        #[arg(long, default_value_t = DEFAULT_MIN_CONTRAST)]
        min_contrast: f64,
        /// Also write the correspondence map (16-bit PNG).
        #[arg(long)]
        correspondence: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Recheck depth metrics and annotation invariants of a scene directory.
    Validate {
        /// Scene directory (scene_NNNNNN).
        scene: PathBuf,
        /// Minimum fraction of valid reconstructed pixels.
        #[arg(long, default_value_t = 0.05)]
        min_valid_ratio: f64,
    },
    /// Print version and format information, or summarize a config.
    Info {
        /// Pipeline config to summarize.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn parse_raster(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let p = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("{v:?}: {e}"));
    Ok((p(w)?, p(h)?))
}

struct Failure {
    code: u8,
    message: String,
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Self {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        PipelineError::from(e).into()
    }
}

fn config_failure(message: impl ToString) -> Failure {
    Failure {
        code: 1,
        message: message.to_string(),
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    }
}

type CmdResult = Result<serde_json::Value, Failure>;

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(config_failure)
}

fn progress(line: &str) {
    eprintln!("{line}");
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    serde_json::from_str(&text).map_err(|e| config_failure(format!("{}: {e}", path.display())))
}

fn cmd_generate(
    config: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    jobs: usize,
    scenes: Option<usize>,
) -> CmdResult {
    let cfg = PipelineConfig::load(config)?;
    let seed = cfg.resolve_seed(seed)?;
    let out = out
        .or_else(|| cfg.output.as_ref().map(|p| cfg.base_dir.join(p)))
        .ok_or_else(|| config_failure("no output directory: pass --out or set \"output\" in the config"))?;
    let scenes = scenes.unwrap_or(cfg.scenes);
    progress(&format!("generating {scenes} scene(s) into {}", out.display()));
    let summary = pipeline::generate_dataset(&cfg, &out, seed, scenes, jobs, &progress)?;
    Ok(serde_json::to_value(summary).expect("summary serializes"))
}

fn cmd_patterns(columns: u32, raster: (u32, u32), out: &Path) -> CmdResult {
    let config = GrayCodeConfig::new(columns).map_err(config_failure)?;
    let stack = generate_pattern_stack(&config, raster.0, raster.1).map_err(config_failure)?;
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    let mut files = Vec::new();
    for (k, frame) in stack.frames().iter().enumerate() {
        let name = frame_file_name(k);
        io::write_gray8(&out.join(&name), frame)?;
        files.push(name);
    }
    Ok(json!({ "columns": columns, "bit_count": config.bit_count(), "bit_order": "msb_first", "files": files }))
}

fn cmd_render(config: &Path, out: &Path, seed: Option<u64>, index: usize, jobs: usize) -> CmdResult {
    let cfg = PipelineConfig::load(config)?;
    let seed = cfg.resolve_seed(seed)?;
    let pool = thread_pool(jobs)?;
    let mesh = cfg.load_mesh()?;
    let stack = pipeline::pattern_stack(&cfg)?;
    let scene = pipeline::build_scene_for(&cfg, &mesh, scene_seed(seed, index))?;
    progress(&format!("rendering scene {index} ({} instances)", scene.instances.len()));
    let (gt, frames) = pool.install(|| pipeline::render_scene(&cfg, &scene, &stack))?;
    fs::create_dir_all(out.join(PATTERNS_DIR)).map_err(|e| io_failure(out, e))?;
    io::write_srgb(&out.join(RGB_FILE), gt.rgb.as_ref().expect("rendered"))?;
    io::write_pfm(&out.join(DEPTH_GT_FILE), &gt.depth)?;
    io::write_gray16(&out.join(INSTANCE_FILE), &gt.instance_map)?;
    let scene_path = out.join(SCENE_FILE);
    fs::write(&scene_path, scene.to_canonical_json()).map_err(|e| io_failure(&scene_path, e))?;
    for (k, f) in frames.iter().enumerate() {
        io::write_gray8(&out.join(PATTERNS_DIR).join(frame_file_name(k)), f)?;
    }
    Ok(json!({
        "output": out,
        "seed": scene.seed,
        "instances": scene.instances.len(),
        "frames": frames.len(),
        "scene_digest": scene.digest(),
    }))
}

#[allow(clippy::too_many_arguments)]
fn cmd_reconstruct(
    frames_dir: &Path,
    rig: &Path,
    config: &Path,
    out: &Path,
    min_contrast: f64,
    correspondence: Option<PathBuf>,
    jobs: usize,
) -> CmdResult {
    let rig: Rig = read_json(rig)?;
    let config: GrayCodeConfig = read_json(config)?;
    let frames = (0..config.frame_count())
        .map(|k| io::read_gray8(&frames_dir.join(frame_file_name(k))))
        .collect::<Result<Vec<_>, _>>()?;
    let pool = thread_pool(jobs)?;
    let recon = pool
        .install(|| reconstruct_depth(&frames, &rig, &config, min_contrast))
        .map_err(PipelineError::from)?;
    io::write_pfm(out, &recon.depth)?;
    if let Some(path) = &correspondence {
        io::write_gray16(path, &recon.correspondence.columns)?;
    }
    let valid = recon.correspondence.valid_count();
    Ok(json!({
        "output": out,
        "valid_pixels": valid,
        "valid_ratio": valid as f64 / recon.depth.len() as f64,
    }))
}

fn cmd_validate(scene: &Path, min_valid_ratio: f64) -> CmdResult {
    let ann: AnnotationSet = read_json(&scene.join(ANNOTATIONS_FILE))?;
    let gt = io::read_pfm(&scene.join(DEPTH_GT_FILE))?;
    let recon = io::read_pfm(&scene.join(DEPTH_RECON_FILE))?;
    let instances = io::read_gray16(&scene.join(INSTANCE_FILE))?;
    let mut failures = Vec::new();
    let metrics = match depth_metrics(&recon, &gt, &QuantizationModel::for_rig(&ann.rig)) {
        Ok(m) => Some(m),
        Err(e) => {
            failures.push(e.to_string());
            None
        }
    };
    if let Some(m) = &metrics {
        if !(m.valid_ratio > min_valid_ratio) {
            failures.push(format!("valid_ratio={} is not above {min_valid_ratio}", m.valid_ratio));
        }
    }
    if recon.data().iter().any(|d| !d.is_finite() || *d < 0.0) {
        failures.push("depth_recon contains negative or non-finite values".into());
    }
    if let Err(e) = check_annotations(&ann, &instances) {
        failures.push(e);
    }
    let root = scene.parent().unwrap_or(Path::new("."));
    if root.join(MANIFEST_FILE).exists() {
        let manifest = Manifest::read(root).map_err(PipelineError::from)?;
        let dir_name = scene.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let mut own = manifest.clone();
        own.scenes.retain(|e| e.directory == dir_name);
        if own.scenes.is_empty() {
            failures.push(format!("{dir_name} is not listed in {MANIFEST_FILE}"));
        } else if let Err(e) = check_manifest_completeness(root, &own) {
            failures.push(e);
        }
    }
    let pass = failures.is_empty();
    let report = json!({ "scene": scene, "pass": pass, "metrics": metrics, "failures": failures });
    if pass {
        Ok(report)
    } else {
        println!("{report}");
        Err(Failure {
            code: EXIT_VALIDATION,
            message: format!("validation failed: {}", failures.join("; ")),
        })
    }
}

fn cmd_info(config: Option<PathBuf>) -> CmdResult {
    let mut info = json!({
        "name": "slsim",
        "version": env!("CARGO_PKG_VERSION"),
        "dataset_format_version": slsim_core::dataset::FORMAT_VERSION,
        "config_version": pipeline::CONFIG_VERSION,
        "max_instances": MAX_INSTANCES,
        "bit_order": "msb_first",
    });
    if let Some(path) = config {
        let cfg = PipelineConfig::load(&path)?;
        let mesh = cfg.load_mesh()?;
        let clutter = cfg.clutter(mesh.clone(), cfg.seed.unwrap_or(0));
        info["config"] = json!({
            "path": path,
            "scenes": cfg.scenes,
            "seed": cfg.seed,
            "camera_resolution": [cfg.rig.camera.width(), cfg.rig.camera.height()],
            "projector_resolution": [cfg.rig.projector.width(), cfg.rig.projector.height()],
            "baseline": cfg.rig.baseline(),
            "bit_count": cfg.pattern.bit_count(),
            "frame_count": cfg.pattern.frame_count(),
            "mesh_triangles": mesh.triangles().len(),
            "voxel_edge": clutter.voxel_edge(),
            "voxel_capacity": clutter.voxel_centers().len(),
            "instances_per_scene": cfg.scene.count,
        });
    }
    Ok(info)
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Generate {
            config,
            out,
            seed,
            jobs,
            scenes,
        } => cmd_generate(&config, out, seed, jobs, scenes),
        Command::Patterns { columns, raster, out } => cmd_patterns(columns, raster, &out),
        Command::Render {
            config,
            out,
            seed,
            scene_index,
            jobs,
        } => cmd_render(&config, &out, seed, scene_index, jobs),
        Command::Reconstruct {
            frames,
            rig,
            config,
            out,
            min_contrast,
            correspondence,
            jobs,
        } => cmd_reconstruct(&frames, &rig, &config, &out, min_contrast, correspondence, jobs),
        Command::Validate { scene, min_valid_ratio } => cmd_validate(&scene, min_valid_ratio),
        Command::Info { config } => cmd_info(config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
