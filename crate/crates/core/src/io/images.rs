//! Raster files: 8-bit RGB input frames (PNG or PPM), portable float maps
//! for scalar grids, PGM masks and PNG diagnostics.

use std::io::Write;
use std::path::Path;

use super::write_bytes;
use crate::energy::RgbImage;
use crate::error::{Error, Result};
use crate::evaluation::Mask;

fn image_error(path: &Path, msg: impl ToString) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    }
}

/// Loads an 8- or 16-bit RGB(A) or grey image as linear values in [0, 1].
pub fn load_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingInput(format!("image {} does not exist", path.display())));
    }
    let img = image::open(path).map_err(|e| image_error(path, e))?.to_rgb32f();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.pixels().map(|p| [p[0] as f64, p[1] as f64, p[2] as f64]).collect();
    Ok(RgbImage { width: w, height: h, data })
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn save_rgb_png(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img.data.iter().flat_map(|p| p.map(to_u8)).collect();
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image_rgb(&bytes, img.width, img.height)
        .map_err(|e| image_error(path, e))?;
    write_bytes(path, &out)
}

trait PngRgb {
    fn write_image_rgb(self, bytes: &[u8], w: usize, h: usize) -> image::ImageResult<()>;
    fn write_image_gray(self, bytes: &[u8], w: usize, h: usize) -> image::ImageResult<()>;
}

impl<W: Write> PngRgb for image::codecs::png::PngEncoder<W> {
    fn write_image_rgb(self, bytes: &[u8], w: usize, h: usize) -> image::ImageResult<()> {
        use image::ImageEncoder;
        self.write_image(bytes, w as u32, h as u32, image::ExtendedColorType::Rgb8)
    }

    fn write_image_gray(self, bytes: &[u8], w: usize, h: usize) -> image::ImageResult<()> {
        use image::ImageEncoder;
        self.write_image(bytes, w as u32, h as u32, image::ExtendedColorType::L8)
    }
}

/// Grey PNG of `values` mapped linearly from `[0, max]` to `[0, 255]`.
pub fn save_gray_png(values: &[f64], width: usize, height: usize, max: f64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    let bytes: Vec<u8> = values.iter().map(|v| to_u8(v * scale)).collect();
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image_gray(&bytes, width, height)
        .map_err(|e| image_error(path, e))?;
    write_bytes(path, &out)
}

/// Binary PGM (P5), on = 255.
pub fn save_mask_pgm(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width, mask.height).into_bytes();
    out.extend(mask.data.iter().map(|v| if *v { 255u8 } else { 0 }));
    write_bytes(path.as_ref(), &out)
}

fn header_tokens(bytes: &[u8], count: usize, path: &Path) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(Error::parse(path, 1, "truncated header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    // exactly one whitespace byte separates the header from the data
    Ok((tokens, i + 1))
}

pub fn load_mask_pgm(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (tok, start) = header_tokens(&bytes, 4, path)?;
    if tok[0] != "P5" || tok[3] != "255" {
        return Err(Error::parse(path, 1, "expected an 8-bit binary PGM"));
    }
    let w: usize = tok[1].parse().map_err(|_| Error::parse(path, 2, "bad width"))?;
    let h: usize = tok[2].parse().map_err(|_| Error::parse(path, 2, "bad height"))?;
    let data = bytes
        .get(start..start + w * h)
        .ok_or_else(|| Error::parse(path, 3, "truncated pixel data"))?;
    Ok(Mask {
        width: w,
        height: h,
        data: data.iter().map(|v| *v >= 128).collect(),
    })
}

/// Scalar or RGB float grid, rows top to bottom.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatMap {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

/// Portable float map, little endian, rows stored bottom to top.
pub fn pfm_bytes(map: &FloatMap) -> Vec<u8> {
    let tag = if map.channels == 3 { "PF" } else { "Pf" };
    let mut out = format!("{tag}\n{} {}\n-1.0\n", map.width, map.height).into_bytes();
    let row = map.width * map.channels;
    for y in (0..map.height).rev() {
        for v in &map.data[y * row..(y + 1) * row] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_pfm(map: &FloatMap, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &pfm_bytes(map))
}

pub fn load_pfm(path: impl AsRef<Path>) -> Result<FloatMap> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingInput(format!("float map {} does not exist", path.display())));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (tok, start) = header_tokens(&bytes, 4, path)?;
    let channels = match tok[0].as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(Error::parse(path, 1, format!("unknown float map tag '{other}'"))),
    };
    let w: usize = tok[1].parse().map_err(|_| Error::parse(path, 2, "bad width"))?;
    let h: usize = tok[2].parse().map_err(|_| Error::parse(path, 2, "bad height"))?;
    let scale: f64 = tok[3].parse().map_err(|_| Error::parse(path, 3, "bad scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::parse(path, 3, "scale must be non-zero"));
    }
    let little = scale < 0.0;
    let row = w * channels;
    let body = bytes
        .get(start..start + 4 * row * h)
        .ok_or_else(|| Error::parse(path, 4, "truncated float data"))?;
    let mut data = vec![0f32; row * h];
    for (k, chunk) in body.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (fy, x) = (k / row, k % row);
        data[(h - 1 - fy) * row + x] = v;
    }
    Ok(FloatMap {
        width: w,
        height: h,
        channels,
        data,
    })
}
