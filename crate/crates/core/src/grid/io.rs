//! PNG and raw grid dumps.
//!
//! 8-bit values map linearly to `[-1, 1]` (`v = u / 127.5 - 1`); writers clamp
//! then round. Raw dumps carry a text header `ATTRFORGE-GRID v1 H W C\n`
//! followed by channel-planar little-endian `f32` values.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{ColorType, ImageEncoder};

use super::{ImageGrid, MaskGrid};
use crate::error::{Error, Result};

pub const GRID_MAGIC: &str = "ATTRFORGE-GRID v1";

fn to_u8(v: f64) -> u8 {
    ((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8
}

fn from_u8(u: u8) -> f64 {
    f64::from(u) / 127.5 - 1.0
}

/// Reads an 8-bit gray or RGB(A) PNG; alpha is dropped.
pub fn read_png(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::format(path, other.to_string()),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img.color() {
        ColorType::L8 | ColorType::La8 | ColorType::L16 | ColorType::La16 => {
            let g = img.to_luma8();
            let data = g.as_raw().iter().map(|&u| from_u8(u)).collect();
            ImageGrid::new(h, w, 1, data)
        }
        _ => {
            let rgb = img.to_rgb8();
            let raw = rgb.as_raw();
            ImageGrid::new(h, w, 3, vec![0.0; h * w * 3]).map(|mut g| {
                for y in 0..h {
                    for x in 0..w {
                        for c in 0..3 {
                            g.set(c, y, x, from_u8(raw[(y * w + x) * 3 + c]));
                        }
                    }
                }
                g
            })
        }
    }
}

fn encode_png(bytes: &[u8], w: usize, h: usize, color: image::ExtendedColorType) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    image::codecs::png::PngEncoder::new(&mut buf)
        .write_image(bytes, w as u32, h as u32, color)
        .map_err(|e| Error::InvalidArgument(format!("PNG encoding failed: {e}")))?;
    Ok(buf)
}

/// PNG file bytes: 1-channel images as gray, 3-channel as RGB.
pub fn png_bytes(image: &ImageGrid) -> Result<Vec<u8>> {
    let (h, w, c) = image.shape();
    match c {
        1 => {
            let bytes: Vec<u8> = image.data().iter().map(|&v| to_u8(v)).collect();
            encode_png(&bytes, w, h, image::ExtendedColorType::L8)
        }
        3 => {
            let mut bytes = Vec::with_capacity(h * w * 3);
            for y in 0..h {
                for x in 0..w {
                    for ch in 0..3 {
                        bytes.push(to_u8(image.get(ch, y, x)));
                    }
                }
            }
            encode_png(&bytes, w, h, image::ExtendedColorType::Rgb8)
        }
        _ => Err(Error::InvalidArgument(format!(
            "PNG output supports 1 or 3 channels, got {c}"
        ))),
    }
}

pub fn write_png(path: impl AsRef<Path>, image: &ImageGrid) -> Result<()> {
    write_atomic(path.as_ref(), &png_bytes(image)?)
}

/// Single-channel PNG where a value `>= 128` marks the object.
pub fn read_mask_png(path: impl AsRef<Path>) -> Result<MaskGrid> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::format(path, other.to_string()),
    })?;
    let g = img.to_luma8();
    let (w, h) = (g.width() as usize, g.height() as usize);
    let data = g
        .as_raw()
        .iter()
        .map(|&u| if u >= 128 { 1.0 } else { 0.0 })
        .collect();
    MaskGrid::new(h, w, data)
}

pub fn write_mask_png(path: impl AsRef<Path>, mask: &MaskGrid) -> Result<()> {
    let bytes: Vec<u8> = mask
        .data()
        .iter()
        .map(|&v| if v > 0.5 { 255 } else { 0 })
        .collect();
    let png = encode_png(&bytes, mask.width(), mask.height(), image::ExtendedColorType::L8)?;
    write_atomic(path.as_ref(), &png)
}

pub fn encode_grid(image: &ImageGrid) -> Vec<u8> {
    let (h, w, c) = image.shape();
    let mut out = format!("{GRID_MAGIC} {h} {w} {c}\n").into_bytes();
    out.reserve(image.len() * 4);
    for &v in image.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_grid(bytes: &[u8], path: &Path) -> Result<ImageGrid> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format(path, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::format(path, "header is not UTF-8"))?;
    let rest = header
        .strip_prefix(GRID_MAGIC)
        .ok_or_else(|| Error::format(path, "bad magic"))?;
    let dims: Vec<usize> = rest
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::format(path, "bad dimensions"))?;
    let [h, w, c] = dims[..] else {
        return Err(Error::format(path, "expected H W C"));
    };
    let payload = &bytes[nl + 1..];
    if payload.len() != h * w * c * 4 {
        return Err(Error::format(
            path,
            format!("payload has {} bytes, expected {}", payload.len(), h * w * c * 4),
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
        .collect();
    ImageGrid::new(h, w, c, data).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_grid(path: impl AsRef<Path>, image: &ImageGrid) -> Result<()> {
    write_atomic(path.as_ref(), &encode_grid(image))
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_grid(&bytes, path)
}

/// Reads a PNG or a raw grid dump, chosen by extension (`.png` vs anything else).
pub fn read_image_any(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let path = path.as_ref();
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        read_png(path)
    } else {
        read_grid(path)
    }
}

/// Loads every `.png` / `.grid` file of a directory in lexicographic order.
pub fn read_image_dir(dir: impl AsRef<Path>) -> Result<Vec<ImageGrid>> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "grid"))
        })
        .collect();
    paths.sort();
    paths.iter().map(read_image_any).collect()
}

/// Write to a sibling temp file, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
