//! Reflected binary (gray) code and projector pattern stacks.
//!
//! Column `c` is encoded as `g = c ^ (c >> 1)`, so neighbouring columns
//! differ in exactly one bit and a decoding error at a stripe edge moves the
//! correspondence by one column at most. Patterns are vertical stripes only:
//! triangulation needs the projector column, never the row.
//!
//! A stack holds `2 + bit_count` frames in the order
//! `[all-white, all-black, bit plane MSB, ..., bit plane LSB]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::raster::Raster;

/// Longest supported code.
pub const MAX_BITS: u32 = 16;
/// Correspondence PNGs reserve 65535 as the invalid marker.
pub const MAX_COLUMNS: u32 = u16::MAX as u32;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GrayCodeError {
    #[error("index {index} out of range for a {bits}-bit code")]
    IndexOutOfRange { index: u32, bits: u32 },
    #[error("bit count {0} outside 1..={MAX_BITS}")]
    InvalidBitCount(u32),
    #[error("invalid column count {0}")]
    InvalidColumnCount(u32),
    #[error("unsupported bit order {0:?}; only \"msb_first\" is defined")]
    UnsupportedBitOrder(String),
    #[error("raster width {width} does not match {columns} pattern columns")]
    RasterMismatch { width: u32, columns: u32 },
}

/// A fixed-length codeword. Bits are stored in the low `len` bits of
/// `value`; bit `len - 1` is the most significant and is emitted first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Codeword {
    value: u32,
    len: u32,
}

impl Codeword {
    pub fn from_bits(bits: &[bool]) -> Result<Self, GrayCodeError> {
        if bits.len() > MAX_BITS as usize {
            return Err(GrayCodeError::InvalidBitCount(bits.len() as u32));
        }
        let value = bits.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
        Ok(Self {
            value,
            len: bits.len() as u32,
        })
    }

    pub fn value(&self) -> u32 {
        self.value
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bit `plane`, counting from the MSB (`plane = 0`).
    #[inline]
    pub fn bit(&self, plane: u32) -> bool {
        (self.value >> (self.len - 1 - plane)) & 1 == 1
    }

    /// Bits, MSB first.
    pub fn bits(&self) -> Vec<bool> {
        (0..self.len).map(|p| self.bit(p)).collect()
    }

    pub fn decode(&self) -> u32 {
        gray_to_binary(self.value)
    }
}

impl std::fmt::Display for Codeword {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[inline]
pub fn binary_to_gray(n: u32) -> u32 {
    n ^ (n >> 1)
}

#[inline]
pub fn gray_to_binary(mut g: u32) -> u32 {
    let mut n = g;
    while g > 0 {
        g >>= 1;
        n ^= g;
    }
    n
}

/// Gray codeword of `index` using `bits` bits.
pub fn encode(index: u32, bits: u32) -> Result<Codeword, GrayCodeError> {
    if bits == 0 || bits > MAX_BITS {
        return Err(GrayCodeError::InvalidBitCount(bits));
    }
    if u64::from(index) >= 1u64 << bits {
        return Err(GrayCodeError::IndexOutOfRange { index, bits });
    }
    Ok(Codeword {
        value: binary_to_gray(index),
        len: bits,
    })
}

/// Column index of an MSB-first gray bit sequence. Every pattern decodes to
/// some integer; whether it is a plausible column is judged by the caller.
pub fn decode(bits: &[bool]) -> u32 {
    let value = bits.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
    gray_to_binary(value)
}

/// Stripe direction. Only vertical stripes (varying along projector `u`)
/// are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    Columns,
}

/// Code layout for a projector with `column_count` columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ConfigRepr", into = "ConfigRepr")]
pub struct GrayCodeConfig {
    column_count: u32,
    bit_count: u32,
    orientation: Orientation,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigRepr {
    column_count: u32,
    #[serde(default)]
    bit_count: Option<u32>,
    #[serde(default)]
    orientation: Orientation,
    #[serde(default = "msb_first")]
    bit_order: String,
}

fn msb_first() -> String {
    "msb_first".to_string()
}

impl TryFrom<ConfigRepr> for GrayCodeConfig {
    type Error = GrayCodeError;

    fn try_from(r: ConfigRepr) -> Result<Self, GrayCodeError> {
        if r.bit_order != "msb_first" {
            return Err(GrayCodeError::UnsupportedBitOrder(r.bit_order));
        }
        let cfg = GrayCodeConfig::new(r.column_count)?;
        match r.bit_count {
            Some(b) if b != cfg.bit_count => Err(GrayCodeError::InvalidBitCount(b)),
            _ => Ok(cfg),
        }
    }
}

impl From<GrayCodeConfig> for ConfigRepr {
    fn from(c: GrayCodeConfig) -> Self {
        ConfigRepr {
            column_count: c.column_count,
            bit_count: Some(c.bit_count),
            orientation: c.orientation,
            bit_order: msb_first(),
        }
    }
}

impl GrayCodeConfig {
    /// `bit_count = max(1, ceil(log2(column_count)))`.
    pub fn new(column_count: u32) -> Result<Self, GrayCodeError> {
        if column_count == 0 || column_count > MAX_COLUMNS {
            return Err(GrayCodeError::InvalidColumnCount(column_count));
        }
        let bit_count = (u32::BITS - (column_count - 1).leading_zeros()).max(1);
        Ok(Self {
            column_count,
            bit_count,
            orientation: Orientation::Columns,
        })
    }

    pub fn column_count(&self) -> u32 {
        self.column_count
    }

    pub fn bit_count(&self) -> u32 {
        self.bit_count
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Total frames in a stack: white, black and one per bit plane.
    pub fn frame_count(&self) -> usize {
        2 + self.bit_count as usize
    }
}

/// Projected frames in stack order, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternStack {
    frames: Vec<Raster<f32>>,
    config: GrayCodeConfig,
}

pub const WHITE_FRAME: usize = 0;
pub const BLACK_FRAME: usize = 1;
pub const FIRST_BIT_FRAME: usize = 2;

impl PatternStack {
    pub fn frames(&self) -> &[Raster<f32>] {
        &self.frames
    }

    pub fn config(&self) -> &GrayCodeConfig {
        &self.config
    }

    pub fn resolution(&self) -> (u32, u32) {
        self.frames[0].dimensions()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// File name of frame `index` within a pattern directory.
pub fn frame_file_name(index: usize) -> String {
    format!("pattern_{index:02}.png")
}

pub fn generate_pattern_stack(
    config: &GrayCodeConfig,
    width: u32,
    height: u32,
) -> Result<PatternStack, GrayCodeError> {
    if width != config.column_count {
        return Err(GrayCodeError::RasterMismatch {
            width,
            columns: config.column_count,
        });
    }
    let bits = config.bit_count;
    let codes: Vec<Codeword> = (0..width)
        .map(|c| encode(c, bits))
        .collect::<Result<_, _>>()?;
    let frames = (0..config.frame_count())
        .into_par_iter()
        .map(|k| match k {
            WHITE_FRAME => Raster::new(width, height, 1.0f32),
            BLACK_FRAME => Raster::new(width, height, 0.0f32),
            _ => {
                let plane = (k - FIRST_BIT_FRAME) as u32;
                let row: Vec<f32> = codes.iter().map(|c| c.bit(plane) as u8 as f32).collect();
                Raster::from_fn(width, height, |x, _| row[x as usize])
            }
        })
        .collect();
    Ok(PatternStack {
        frames,
        config: *config,
    })
}
