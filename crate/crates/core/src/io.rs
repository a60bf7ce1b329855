//! Image file formats: PFM depth maps and 8/16-bit PNG.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma, Rgb};

use crate::raster::{Raster, RgbImage};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, IoError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, reason: impl ToString) -> IoError {
    IoError::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

fn image_err(path: &Path, e: image::ImageError) -> IoError {
    match e {
        image::ImageError::IoError(source) => IoError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => format_err(path, other),
    }
}

/// Single-channel PFM, little-endian, rows stored bottom to top.
pub fn encode_pfm(img: &Raster<f32>) -> Vec<u8> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", img.width(), img.height()).into_bytes();
    out.reserve(img.len() * 4);
    for row in img.rows().rev() {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_pfm(bytes: &[u8]) -> std::result::Result<Raster<f32>, String> {
    // Three whitespace-terminated header tokens, then one separator byte.
    let mut tokens = Vec::with_capacity(4);
    let mut pos = 0;
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|e| e.to_string())?);
    }
    pos += 1;
    if tokens[0] != "Pf" {
        return Err(format!("unsupported PFM type {:?}", tokens[0]));
    }
    let w: u32 = tokens[1].parse().map_err(|_| "bad width")?;
    let h: u32 = tokens[2].parse().map_err(|_| "bad height")?;
    let scale: f32 = tokens[3].parse().map_err(|_| "bad scale")?;
    let n = w as usize * h as usize;
    let body = bytes.get(pos..).ok_or("truncated data")?;
    if body.len() != n * 4 {
        return Err(format!("expected {} data bytes, found {}", n * 4, body.len()));
    }
    let read = |c: &[u8]| {
        let b = [c[0], c[1], c[2], c[3]];
        if scale < 0.0 {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        }
    };
    let mut data = Vec::with_capacity(n);
    if w > 0 {
        for row in body.chunks_exact(w as usize * 4).rev() {
            data.extend(row.chunks_exact(4).map(read));
        }
    }
    Raster::from_vec(w, h, data).ok_or_else(|| "size mismatch".into())
}

pub fn write_pfm(path: &Path, img: &Raster<f32>) -> Result<()> {
    fs::write(path, encode_pfm(img)).map_err(io_err(path))
}

pub fn read_pfm(path: &Path) -> Result<Raster<f32>> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_pfm(&bytes).map_err(|r| format_err(path, r))
}

/// Quantizes a value in [0, 1] to 8 bits with rounding.
pub fn quantize_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Linear to display encoding with a pure 2.2 gamma.
pub fn encode_gamma(v: f32) -> u8 {
    quantize_u8(v.clamp(0.0, 1.0).powf(1.0 / 2.2))
}

pub fn write_gray8(path: &Path, img: &Raster<f32>) -> Result<()> {
    let data: Vec<u8> = img.data().iter().map(|&v| quantize_u8(v)).collect();
    ImageBuffer::<Luma<u8>, _>::from_raw(img.width(), img.height(), data)
        .expect("size")
        .save(path)
        .map_err(|e| image_err(path, e))
}

/// Reads any PNG as 8-bit luminance scaled to [0, 1].
pub fn read_gray8(path: &Path) -> Result<Raster<f32>> {
    let img = image::open(path).map_err(|e| image_err(path, e))?.into_luma8();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
    Ok(Raster::from_vec(w, h, data).expect("size"))
}

pub fn write_srgb(path: &Path, img: &RgbImage) -> Result<()> {
    let data: Vec<u8> = img.data().iter().flat_map(|p| p.map(encode_gamma)).collect();
    ImageBuffer::<Rgb<u8>, _>::from_raw(img.width(), img.height(), data)
        .expect("size")
        .save(path)
        .map_err(|e| image_err(path, e))
}

pub fn write_gray16(path: &Path, img: &Raster<u16>) -> Result<()> {
    ImageBuffer::<Luma<u16>, _>::from_raw(img.width(), img.height(), img.data().to_vec())
        .expect("size")
        .save(path)
        .map_err(|e| image_err(path, e))
}

pub fn read_gray16(path: &Path) -> Result<Raster<u16>> {
    let img = image::open(path).map_err(|e| image_err(path, e))?;
    if !matches!(img.color(), image::ColorType::L16) {
        return Err(format_err(path, format!("expected 16-bit grayscale, found {:?}", img.color())));
    }
    let img = img.into_luma16();
    let (w, h) = img.dimensions();
    Ok(Raster::from_vec(w, h, img.into_raw()).expect("size"))
}
