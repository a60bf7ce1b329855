//! From rendered pattern captures to a depth map: temporal binarization,
//! gray-code decoding into projector columns, and camera-ray /
//! projector-column-plane triangulation.
//!
//! Depth is camera-frame Z in meters with 0 marking every pixel that could
//! not be reconstructed: low-contrast (shadowed or outside the projector
//! frustum), out-of-range codes, and degenerate or behind-camera solutions.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{PinholeModel, ProjectionMatrix, Rig, Vec3};
use crate::graycode::{decode, GrayCodeConfig, FIRST_BIT_FRAME};
use crate::raster::Raster;

/// Column value stored for pixels without a correspondence.
pub const INVALID_COLUMN: u16 = u16::MAX;

/// Default minimum temporal contrast, linear luminance.
pub const DEFAULT_MIN_CONTRAST: f64 = 0.02;

/// Largest 1-norm condition number accepted by [`triangulate`].
pub const MAX_CONDITION: f64 = 1e12;

/// Deviation from ground truth, in multiples of the quantization bound,
/// beyond which a pixel counts as flying.
pub const FLYING_FACTOR: f64 = 10.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ReconstructError {
    #[error("expected {expected} pattern frames, got {actual}")]
    LayoutMismatch { expected: usize, actual: usize },
    #[error("raster size mismatch: {0:?} vs {1:?}")]
    ResolutionMismatch((u32, u32), (u32, u32)),
    #[error("degenerate triangulation (condition number {0:e})")]
    DegenerateGeometry(f64),
}

pub type Result<T> = std::result::Result<T, ReconstructError>;

/// Per-pixel temporal statistics and thresholded bit planes.
#[derive(Debug, Clone, PartialEq)]
pub struct BitObservation {
    pub max: Raster<f32>,
    pub min: Raster<f32>,
    /// Bit planes packed MSB-first: plane 0 is the most significant bit.
    pub codes: Raster<u32>,
    pub valid: Raster<bool>,
    pub bit_count: u32,
}

impl BitObservation {
    pub fn contrast(&self, x: u32, y: u32) -> f32 {
        self.max.get(x, y) - self.min.get(x, y)
    }

    pub fn bit(&self, x: u32, y: u32, plane: u32) -> bool {
        (self.codes.get(x, y) >> (self.bit_count - 1 - plane)) & 1 == 1
    }

    pub fn bits(&self, x: u32, y: u32) -> Vec<bool> {
        (0..self.bit_count).map(|b| self.bit(x, y, b)).collect()
    }
}

fn same_size<T, U>(a: &Raster<T>, b: &Raster<U>) -> Result<()> {
    if a.dimensions() != b.dimensions() {
        return Err(ReconstructError::ResolutionMismatch(a.dimensions(), b.dimensions()));
    }
    Ok(())
}

/// Thresholds every bit-plane frame at the midpoint of the pixel's temporal
/// range. `frames` is laid out like a pattern stack: white, black, then
/// bit planes MSB first.
pub fn binarize(frames: &[Raster<f32>], min_contrast: f64) -> Result<BitObservation> {
    if frames.len() < FIRST_BIT_FRAME + 1 {
        return Err(ReconstructError::LayoutMismatch {
            expected: FIRST_BIT_FRAME + 1,
            actual: frames.len(),
        });
    }
    let bit_count = (frames.len() - FIRST_BIT_FRAME) as u32;
    if bit_count > 32 {
        return Err(ReconstructError::LayoutMismatch {
            expected: FIRST_BIT_FRAME + 32,
            actual: frames.len(),
        });
    }
    for f in &frames[1..] {
        same_size(&frames[0], f)?;
    }
    let (w, h) = frames[0].dimensions();
    let n = frames[0].len();
    let mut max = vec![0f32; n];
    let mut min = vec![0f32; n];
    let mut codes = vec![0u32; n];
    let mut valid = vec![false; n];
    for i in 0..n {
        let (mut hi, mut lo) = (f32::NEG_INFINITY, f32::INFINITY);
        for f in frames {
            let v = f.data()[i];
            hi = hi.max(v);
            lo = lo.min(v);
        }
        let range = (hi - lo) as f64;
        let mut code = 0u32;
        for f in &frames[FIRST_BIT_FRAME..] {
            let lit = range > 0.0 && (f.data()[i] - lo) as f64 / range > 0.5;
            code = (code << 1) | lit as u32;
        }
        max[i] = hi;
        min[i] = lo;
        codes[i] = code;
        valid[i] = range >= min_contrast;
    }
    let r = |d| Raster::from_vec(w, h, d).expect("size");
    Ok(BitObservation {
        max: r(max),
        min: r(min),
        codes: Raster::from_vec(w, h, codes).expect("size"),
        valid: Raster::from_vec(w, h, valid).expect("size"),
        bit_count,
    })
}

/// Decoded projector column per camera pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceMap {
    /// [`INVALID_COLUMN`] where no correspondence exists.
    pub columns: Raster<u16>,
    pub column_count: u32,
}

impl CorrespondenceMap {
    pub fn get(&self, x: u32, y: u32) -> Option<u32> {
        let c = *self.columns.get(x, y);
        (c != INVALID_COLUMN).then_some(c as u32)
    }

    pub fn is_valid(&self, x: u32, y: u32) -> bool {
        self.get(x, y).is_some()
    }

    pub fn valid_count(&self) -> usize {
        self.columns.data().iter().filter(|&&c| c != INVALID_COLUMN).count()
    }

    pub fn mask(&self) -> Raster<bool> {
        self.columns.map(|&c| c != INVALID_COLUMN)
    }
}

pub fn decode_correspondence(obs: &BitObservation, config: &GrayCodeConfig) -> Result<CorrespondenceMap> {
    if obs.bit_count != config.bit_count() {
        return Err(ReconstructError::LayoutMismatch {
            expected: FIRST_BIT_FRAME + config.bit_count() as usize,
            actual: FIRST_BIT_FRAME + obs.bit_count as usize,
        });
    }
    let columns = Raster::from_fn(obs.codes.width(), obs.codes.height(), |x, y| {
        if !*obs.valid.get(x, y) {
            return INVALID_COLUMN;
        }
        let column = decode(&obs.bits(x, y));
        if column < config.column_count() {
            column as u16
        } else {
            INVALID_COLUMN
        }
    });
    Ok(CorrespondenceMap {
        columns,
        column_count: config.column_count(),
    })
}

/// Intersects the camera ray through `(u_c, v_c)` with the projector's
/// column plane `u_p`, returning the world point.
pub fn triangulate(u_c: f64, v_c: f64, u_p: f64, mc: &ProjectionMatrix, mp: &ProjectionMatrix) -> Result<Vec3> {
    let row = |m: &ProjectionMatrix, r: usize, s: f64| {
        (
            [
                m.m(r, 1) - s * m.m(3, 1),
                m.m(r, 2) - s * m.m(3, 2),
                m.m(r, 3) - s * m.m(3, 3),
            ],
            s * m.m(3, 4) - m.m(r, 4),
        )
    };
    let rows = [row(mc, 1, u_c), row(mc, 2, v_c), row(mp, 1, u_p)];
    let a = Matrix3::from_fn(|i, j| rows[i].0[j]);
    let b = Vector3::new(rows[0].1, rows[1].1, rows[2].1);
    let lu = a.lu();
    let inv = lu
        .try_inverse()
        .ok_or(ReconstructError::DegenerateGeometry(f64::INFINITY))?;
    let norm1 = |m: &Matrix3<f64>| m.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
    let cond = norm1(&a) * norm1(&inv);
    if !(cond.is_finite() && cond <= MAX_CONDITION) {
        return Err(ReconstructError::DegenerateGeometry(cond));
    }
    lu.solve(&b).ok_or(ReconstructError::DegenerateGeometry(cond))
}

/// Reconstructed depth plus the correspondences it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub depth: Raster<f32>,
    pub correspondence: CorrespondenceMap,
}

/// Camera-frame Z of the triangulated point for one decoded pixel, or 0.
fn pixel_depth(camera: &PinholeModel, mc: &ProjectionMatrix, mp: &ProjectionMatrix, x: u32, y: u32, col: u32) -> f32 {
    match triangulate(x as f64, y as f64, col as f64, mc, mp) {
        Ok(p) => {
            let z = camera.world_to_device(&p).z;
            if z.is_finite() && z > 0.0 {
                z as f32
            } else {
                0.0
            }
        }
        Err(_) => 0.0,
    }
}

/// Full decode pipeline. `frames` must have one capture per pattern frame.
pub fn reconstruct_depth(
    frames: &[Raster<f32>],
    rig: &Rig,
    config: &GrayCodeConfig,
    min_contrast: f64,
) -> Result<Reconstruction> {
    if frames.len() != config.frame_count() {
        return Err(ReconstructError::LayoutMismatch {
            expected: config.frame_count(),
            actual: frames.len(),
        });
    }
    let camera = &rig.camera;
    let camera_size = (camera.width(), camera.height());
    if frames[0].dimensions() != camera_size {
        return Err(ReconstructError::ResolutionMismatch(frames[0].dimensions(), camera_size));
    }
    let obs = binarize(frames, min_contrast)?;
    let mut correspondence = decode_correspondence(&obs, config)?;
    let (mc, mp) = (camera.projection_matrix(), rig.projector.projection_matrix());
    let (w, h) = camera_size;
    let rows: Vec<Vec<f32>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| match correspondence.get(x, y) {
                    Some(c) => pixel_depth(camera, &mc, &mp, x, y, c),
                    None => 0.0,
                })
                .collect()
        })
        .collect();
    let depth = Raster::from_vec(w, h, rows.into_iter().flatten().collect()).expect("size");
    // Keep depth and correspondence consistent: failed triangulations are
    // invalid correspondences too.
    for (c, d) in correspondence.columns.data_mut().iter_mut().zip(depth.data()) {
        if *d == 0.0 {
            *c = INVALID_COLUMN;
        }
    }
    Ok(Reconstruction { depth, correspondence })
}

/// Depth error from integer column quantization: one column step at depth
/// `z` moves the triangulated point by about `z² / (f_p · b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizationModel {
    pub projector_focal: f64,
    pub baseline: f64,
}

impl QuantizationModel {
    pub fn for_rig(rig: &Rig) -> Self {
        Self {
            projector_focal: rig.projector.fx(),
            baseline: rig.baseline(),
        }
    }

    pub fn bound(&self, z: f64) -> f64 {
        z * z / (self.projector_focal * self.baseline)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthMetrics {
    /// Fraction of all pixels with nonzero reconstructed depth.
    pub valid_ratio: f64,
    /// Fraction of ground-truth surface pixels that reconstructed to 0.
    pub shadow_ratio: f64,
    /// Mean absolute error over pixels valid in both maps, meters.
    pub mae: f64,
    /// Mutually valid pixels off by more than `FLYING_FACTOR` quantization
    /// bounds.
    pub flying_pixels: usize,
}

pub fn depth_metrics(recon: &Raster<f32>, gt: &Raster<f32>, model: &QuantizationModel) -> Result<DepthMetrics> {
    same_size(recon, gt)?;
    let (mut valid, mut surface, mut shadow, mut both, mut flying) = (0usize, 0usize, 0usize, 0usize, 0usize);
    let mut abs_sum = 0.0;
    for (&r, &g) in recon.data().iter().zip(gt.data()) {
        let (r, g) = (r as f64, g as f64);
        valid += (r > 0.0) as usize;
        if g > 0.0 {
            surface += 1;
            if r > 0.0 {
                both += 1;
                let err = (r - g).abs();
                abs_sum += err;
                flying += (err > FLYING_FACTOR * model.bound(g)) as usize;
            } else {
                shadow += 1;
            }
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(DepthMetrics {
        valid_ratio: ratio(valid, recon.len()),
        shadow_ratio: ratio(shadow, surface),
        mae: if both == 0 { 0.0 } else { abs_sum / both as f64 },
        flying_pixels: flying,
    })
}
