//! Annotations (RLE masks, boxes, poses) and the on-disk dataset layout.
//!
//! A dataset directory holds `manifest.json` and one `scene_%06d/`
//! directory per scene:
//!
//! ```text
//! scene_000000/
//!   rgb.png               8-bit sRGB
//!   depth_gt.pfm          meters, 0 = no surface
//!   depth_recon.pfm       meters, 0 = invalid
//!   instance.png          16-bit instance ids, 0 = background
//!   correspondence.png    16-bit projector column, 65535 = invalid
//!   scene.json            the rendered SceneDescription
//!   annotations.json      AnnotationSet
//!   patterns/pattern_00.png ...   captured pattern frames, 8-bit
//! ```
//!
//! Masks use the COCO run-length flavor: column-major order, counts
//! alternate background/foreground and always start with a (possibly empty)
//! background run.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{Pose, Rig};
use crate::graycode::{frame_file_name, GrayCodeConfig};
use crate::io::{self, IoError};
use crate::raster::Raster;
use crate::reconstruct::Reconstruction;
use crate::render::{GroundTruthFrames, RenderSettings, SceneDescription, BACKGROUND_ID};

pub const FORMAT_VERSION: &str = "1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RGB_FILE: &str = "rgb.png";
pub const DEPTH_GT_FILE: &str = "depth_gt.pfm";
pub const DEPTH_RECON_FILE: &str = "depth_recon.pfm";
pub const INSTANCE_FILE: &str = "instance.png";
pub const CORRESPONDENCE_FILE: &str = "correspondence.png";
pub const SCENE_FILE: &str = "scene.json";
pub const ANNOTATIONS_FILE: &str = "annotations.json";
pub const PATTERNS_DIR: &str = "patterns";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("inconsistent scene artifacts: {0}")]
    ConsistencyFailure(String),
    #[error("instance map contains id {0} which is not in the scene")]
    UnknownInstanceId(u32),
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, DatasetError>;

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| {
        DatasetError::Io(IoError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub fn scene_dir_name(index: usize) -> String {
    format!("scene_{index:06}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RleMask {
    /// `[height, width]`.
    pub size: [u32; 2],
    pub counts: Vec<u32>,
}

impl RleMask {
    /// Builds a mask from the column-major indices (`x * height + y`) of its
    /// set pixels, which must be strictly increasing.
    pub fn from_sorted_indices(height: u32, width: u32, indices: &[u64]) -> Self {
        let total = height as u64 * width as u64;
        let mut counts = Vec::new();
        let mut cursor = 0u64;
        let mut i = 0;
        while i < indices.len() {
            let start = indices[i];
            let mut end = start + 1;
            i += 1;
            while i < indices.len() && indices[i] == end {
                end += 1;
                i += 1;
            }
            counts.push((start - cursor) as u32);
            counts.push((end - start) as u32);
            cursor = end;
        }
        if cursor < total || counts.is_empty() {
            counts.push((total - cursor) as u32);
        }
        Self {
            size: [height, width],
            counts,
        }
    }

    pub fn height(&self) -> u32 {
        self.size[0]
    }

    pub fn width(&self) -> u32 {
        self.size[1]
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).map(|&c| c as u64).sum()
    }

    pub fn is_consistent(&self) -> bool {
        self.counts.iter().map(|&c| c as u64).sum::<u64>() == self.height() as u64 * self.width() as u64
    }

    pub fn decode(&self) -> Raster<bool> {
        let (h, w) = (self.height(), self.width());
        let mut out = Raster::new(w, h, false);
        let mut pos = 0u64;
        for (k, &c) in self.counts.iter().enumerate() {
            if k % 2 == 1 {
                for p in pos..pos + c as u64 {
                    let (x, y) = ((p / h as u64) as u32, (p % h as u64) as u32);
                    if x < w {
                        out.set(x, y, true);
                    }
                }
            }
            pos += c as u64;
        }
        out
    }
}

pub fn rle_encode(mask: &Raster<bool>) -> RleMask {
    let (w, h) = mask.dimensions();
    let mut indices = Vec::new();
    for x in 0..w {
        for y in 0..h {
            if *mask.get(x, y) {
                indices.push(x as u64 * h as u64 + y as u64);
            }
        }
    }
    RleMask::from_sorted_indices(h, w, &indices)
}

/// Tight `(x, y, w, h)` box around the set pixels.
pub fn bbox(mask: &Raster<bool>) -> Option<[u32; 4]> {
    let mut b: Option<[u32; 4]> = None;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if *mask.get(x, y) {
                let e = b.get_or_insert([x, y, x, y]);
                e[0] = e[0].min(x);
                e[1] = e[1].min(y);
                e[2] = e[2].max(x);
                e[3] = e[3].max(y);
            }
        }
    }
    b.map(|[x0, y0, x1, y1]| [x0, y0, x1 - x0 + 1, y1 - y0 + 1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceAnnotation {
    pub instance_id: u32,
    pub class_label: String,
    /// World-frame pose.
    pub pose: Pose,
    /// `(x, y, w, h)` in pixels, `null` when fully occluded.
    pub bbox: Option<[u32; 4]>,
    pub mask: RleMask,
    pub visible_pixels: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationSet {
    pub seed: u64,
    pub rig: Rig,
    pub pattern: GrayCodeConfig,
    pub render: RenderSettings,
    pub instances: Vec<InstanceAnnotation>,
}

/// Per-instance masks, boxes and poses from a ground-truth instance map.
/// Fully occluded instances are kept with an empty mask.
pub fn compute_annotations(
    gt: &GroundTruthFrames,
    scene: &SceneDescription,
    rig: &Rig,
    pattern: &GrayCodeConfig,
    render: &RenderSettings,
) -> Result<AnnotationSet> {
    let map = &gt.instance_map;
    let (w, h) = map.dimensions();
    let known: BTreeSet<u32> = scene.instances.iter().map(|i| i.id).collect();
    let mut pixels: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
    let mut boxes: BTreeMap<u32, [u32; 4]> = BTreeMap::new();
    for x in 0..w {
        for y in 0..h {
            let id = *map.get(x, y) as u32;
            if id == BACKGROUND_ID {
                continue;
            }
            if !known.contains(&id) {
                return Err(DatasetError::UnknownInstanceId(id));
            }
            pixels.entry(id).or_default().push(x as u64 * h as u64 + y as u64);
            let b = boxes.entry(id).or_insert([x, y, x, y]);
            b[0] = b[0].min(x);
            b[1] = b[1].min(y);
            b[2] = b[2].max(x);
            b[3] = b[3].max(y);
        }
    }
    let instances = scene
        .instances
        .iter()
        .map(|inst| {
            let idx = pixels.get(&inst.id).map(Vec::as_slice).unwrap_or(&[]);
            InstanceAnnotation {
                instance_id: inst.id,
                class_label: inst.class_label.clone(),
                pose: inst.pose,
                bbox: boxes
                    .get(&inst.id)
                    .map(|&[x0, y0, x1, y1]| [x0, y0, x1 - x0 + 1, y1 - y0 + 1]),
                mask: RleMask::from_sorted_indices(h, w, idx),
                visible_pixels: idx.len() as u64,
            }
        })
        .collect();
    Ok(AnnotationSet {
        seed: scene.seed,
        rig: rig.clone(),
        pattern: *pattern,
        render: *render,
        instances,
    })
}

/// Checks the annotation invariants against an instance map: tight boxes,
/// visible counts equal to mask areas, masks equal to the map's pixels and
/// pixel-count conservation. Returns a description of the first violation.
pub fn check_annotations(ann: &AnnotationSet, instance_map: &Raster<u16>) -> std::result::Result<(), String> {
    let (w, h) = instance_map.dimensions();
    let mut seen = BTreeSet::new();
    let mut total = 0u64;
    for a in &ann.instances {
        if !seen.insert(a.instance_id) {
            return Err(format!("instance {} annotated twice", a.instance_id));
        }
        if a.mask.size != [h, w] || !a.mask.is_consistent() {
            return Err(format!("instance {}: malformed mask", a.instance_id));
        }
        let decoded = a.mask.decode();
        let expected = instance_map.map(|&v| v as u32 == a.instance_id);
        if decoded != expected {
            return Err(format!("instance {}: mask differs from instance map", a.instance_id));
        }
        if a.visible_pixels != a.mask.area() {
            return Err(format!("instance {}: visible count {} != mask area", a.instance_id, a.visible_pixels));
        }
        if a.bbox != bbox(&decoded) {
            return Err(format!("instance {}: bbox {:?} is not tight", a.instance_id, a.bbox));
        }
        total += a.visible_pixels;
    }
    let nonzero = instance_map.data().iter().filter(|&&v| v as u32 != BACKGROUND_ID).count() as u64;
    if let Some(id) = instance_map
        .data()
        .iter()
        .map(|&v| v as u32)
        .find(|&v| v != BACKGROUND_ID && !seen.contains(&v))
    {
        return Err(format!("instance map id {id} has no annotation"));
    }
    if total != nonzero {
        return Err(format!("visible pixels {total} != {nonzero} labelled pixels"));
    }
    Ok(())
}

/// Everything written for one scene.
#[derive(Debug, Clone, Copy)]
pub struct SceneArtifacts<'a> {
    pub scene: &'a SceneDescription,
    pub ground_truth: &'a GroundTruthFrames,
    pub reconstruction: &'a Reconstruction,
    /// Captured pattern frames, already at the precision they are stored in.
    pub frames: &'a [Raster<f32>],
    pub annotations: &'a AnnotationSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub index: usize,
    pub directory: String,
    /// SHA-256 of `scene.json`.
    pub scene_digest: String,
    /// Paths relative to the scene directory, sorted.
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectorSettings {
    /// Radiant power, watts.
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: String,
    pub name: String,
    pub rig: Rig,
    pub pattern: GrayCodeConfig,
    pub render: RenderSettings,
    pub projector: ProjectorSettings,
    pub ambient_light: [f64; 3],
    pub min_contrast: f64,
    pub scenes: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(fs_err(&path))?;
        serde_json::from_str(&text).map_err(|source| DatasetError::Json { path, source })
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| DatasetError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(fs_err(path))
}

fn check_consistency(a: &SceneArtifacts<'_>) -> Result<()> {
    let size = a.ground_truth.depth.dimensions();
    let mut sizes = vec![
        ("instance map", a.ground_truth.instance_map.dimensions()),
        ("reconstructed depth", a.reconstruction.depth.dimensions()),
        ("correspondence", a.reconstruction.correspondence.columns.dimensions()),
    ];
    if let Some(rgb) = &a.ground_truth.rgb {
        sizes.push(("rgb", rgb.dimensions()));
    } else {
        return Err(DatasetError::ConsistencyFailure("missing rgb render".into()));
    }
    sizes.extend(a.frames.iter().map(|f| ("pattern frame", f.dimensions())));
    if let Some((name, s)) = sizes.into_iter().find(|(_, s)| *s != size) {
        return Err(DatasetError::ConsistencyFailure(format!("{name} is {s:?}, depth is {size:?}")));
    }
    if a.frames.len() != a.annotations.pattern.frame_count() {
        return Err(DatasetError::ConsistencyFailure(format!(
            "{} pattern frames for a {}-frame stack",
            a.frames.len(),
            a.annotations.pattern.frame_count()
        )));
    }
    check_annotations(a.annotations, &a.ground_truth.instance_map).map_err(DatasetError::ConsistencyFailure)
}

fn write_scene_files(dir: &Path, a: &SceneArtifacts<'_>) -> Result<Vec<String>> {
    fs::create_dir_all(dir.join(PATTERNS_DIR)).map_err(fs_err(dir))?;
    io::write_srgb(&dir.join(RGB_FILE), a.ground_truth.rgb.as_ref().expect("checked"))?;
    io::write_pfm(&dir.join(DEPTH_GT_FILE), &a.ground_truth.depth)?;
    io::write_pfm(&dir.join(DEPTH_RECON_FILE), &a.reconstruction.depth)?;
    io::write_gray16(&dir.join(INSTANCE_FILE), &a.ground_truth.instance_map)?;
    io::write_gray16(&dir.join(CORRESPONDENCE_FILE), &a.reconstruction.correspondence.columns)?;
    let scene_path = dir.join(SCENE_FILE);
    fs::write(&scene_path, a.scene.to_canonical_json()).map_err(fs_err(&scene_path))?;
    write_json(&dir.join(ANNOTATIONS_FILE), a.annotations)?;
    let mut files: Vec<String> = [
        RGB_FILE,
        DEPTH_GT_FILE,
        DEPTH_RECON_FILE,
        INSTANCE_FILE,
        CORRESPONDENCE_FILE,
        SCENE_FILE,
        ANNOTATIONS_FILE,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for (k, frame) in a.frames.iter().enumerate() {
        let rel = format!("{PATTERNS_DIR}/{}", frame_file_name(k));
        io::write_gray8(&dir.join(&rel), frame)?;
        files.push(rel);
    }
    files.sort();
    Ok(files)
}

/// Writes one scene directory under `root`. The files go to a temporary
/// `.partial` directory first, which is renamed into place on success and
/// removed on failure.
pub fn export_scene_record(root: &Path, index: usize, artifacts: &SceneArtifacts<'_>) -> Result<ManifestEntry> {
    check_consistency(artifacts)?;
    let name = scene_dir_name(index);
    let final_dir = root.join(&name);
    let partial = root.join(format!("{name}.partial"));
    if partial.exists() {
        fs::remove_dir_all(&partial).map_err(fs_err(&partial))?;
    }
    let files = match write_scene_files(&partial, artifacts) {
        Ok(f) => f,
        Err(e) => {
            let _ = fs::remove_dir_all(&partial);
            return Err(e);
        }
    };
    if final_dir.exists() {
        fs::remove_dir_all(&final_dir).map_err(fs_err(&final_dir))?;
    }
    fs::rename(&partial, &final_dir).map_err(fs_err(&final_dir))?;
    Ok(ManifestEntry {
        index,
        directory: name,
        scene_digest: artifacts.scene.digest(),
        files,
    })
}

/// Single writer for a dataset directory: exports scenes and keeps
/// `manifest.json` current after every export.
#[derive(Debug)]
pub struct DatasetWriter {
    root: PathBuf,
    manifest: Manifest,
}

impl DatasetWriter {
    /// Starts a new manifest. Existing scene directories are left alone
    /// until overwritten.
    pub fn create(root: &Path, mut manifest: Manifest) -> Result<Self> {
        fs::create_dir_all(root).map_err(fs_err(root))?;
        manifest.format_version = FORMAT_VERSION.into();
        manifest.scenes.clear();
        let writer = Self {
            root: root.to_path_buf(),
            manifest,
        };
        writer.write_manifest()?;
        Ok(writer)
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn export(&mut self, index: usize, artifacts: &SceneArtifacts<'_>) -> Result<ManifestEntry> {
        let entry = export_scene_record(&self.root, index, artifacts)?;
        self.manifest.scenes.retain(|e| e.index != index);
        self.manifest.scenes.push(entry.clone());
        self.manifest.scenes.sort_by_key(|e| e.index);
        self.write_manifest()?;
        Ok(entry)
    }

    fn write_manifest(&self) -> Result<()> {
        let tmp = self.root.join(format!("{MANIFEST_FILE}.tmp"));
        write_json(&tmp, &self.manifest)?;
        let path = self.root.join(MANIFEST_FILE);
        fs::rename(&tmp, &path).map_err(fs_err(&path))
    }
}

fn list_files(dir: &Path, prefix: &str, out: &mut Vec<String>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let rel = if prefix.is_empty() { name } else { format!("{prefix}/{name}") };
        if entry.file_type()?.is_dir() {
            list_files(&entry.path(), &rel, out)?;
        } else {
            out.push(rel);
        }
    }
    Ok(())
}

/// Every file the manifest lists exists and every file present is listed.
pub fn check_manifest_completeness(root: &Path, manifest: &Manifest) -> std::result::Result<(), String> {
    for entry in &manifest.scenes {
        let dir = root.join(&entry.directory);
        let mut present = Vec::new();
        list_files(&dir, "", &mut present).map_err(|e| format!("{}: {e}", dir.display()))?;
        present.sort();
        let listed: BTreeSet<&str> = entry.files.iter().map(String::as_str).collect();
        if let Some(missing) = listed.iter().find(|f| !present.iter().any(|p| p == *f)) {
            return Err(format!("{}: listed file {missing} is missing", entry.directory));
        }
        if let Some(extra) = present.iter().find(|p| !listed.contains(p.as_str())) {
            return Err(format!("{}: unlisted file {extra}", entry.directory));
        }
    }
    Ok(())
}

/// SHA-256 over every file under `root` (relative path and contents),
/// in sorted path order.
pub fn directory_digest(root: &Path) -> std::io::Result<String> {
    let mut files = Vec::new();
    list_files(root, "", &mut files)?;
    files.sort();
    let mut hasher = Sha256::new();
    for f in files {
        hasher.update(f.as_bytes());
        hasher.update([0]);
        hasher.update(fs::read(root.join(&f))?);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(bits: &[u8]) -> Raster<bool> {
        Raster::from_vec(bits.len() as u32, 1, bits.iter().map(|&b| b == 1).collect()).unwrap()
    }

    #[test]
    fn rle_row_example() {
        let m = rle_encode(&row(&[0, 0, 1, 1, 1, 0]));
        assert_eq!(m.counts, vec![2, 3, 1]);
        assert_eq!(m.size, [1, 6]);
        assert_eq!(m.decode(), row(&[0, 0, 1, 1, 1, 0]));
    }

    #[test]
    fn rle_leading_foreground_and_empty() {
        assert_eq!(rle_encode(&row(&[1, 1, 0])).counts, vec![0, 2, 1]);
        assert_eq!(rle_encode(&row(&[1, 1])).counts, vec![0, 2]);
        assert_eq!(rle_encode(&Raster::new(4, 3, false)).counts, vec![12]);
    }

    #[test]
    fn rle_is_column_major() {
        // 2x2 with only (x=1, y=0) set: column-major index 2.
        let mut m = Raster::new(2, 2, false);
        m.set(1, 0, true);
        assert_eq!(rle_encode(&m).counts, vec![2, 1, 1]);
    }

    #[test]
    fn bbox_of_block() {
        let mut m = Raster::new(50, 50, false);
        for y in 30..=40 {
            for x in 10..=20 {
                m.set(x, y, true);
            }
        }
        assert_eq!(bbox(&m), Some([10, 30, 11, 11]));
        assert_eq!(bbox(&Raster::new(3, 3, false)), None);
    }

    #[test]
    fn scene_dir_names() {
        assert_eq!(scene_dir_name(7), "scene_000007");
    }
}
