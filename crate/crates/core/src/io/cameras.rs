//! Camera rig files (TOML). Each camera stores its intrinsic matrix `K`,
//! world-to-camera rotation `R` and centre `o` explicitly.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{line_of, read_text, toml_error, write_text};
use crate::error::{Error, Result};
use crate::raycast::CameraModel;

pub const CAMERAS_FORMAT: &str = "sogfit-cameras";
pub const CAMERAS_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CamerasFile {
    format: String,
    version: u32,
    cameras: Vec<toml::Spanned<CameraEntry>>,
}

#[derive(Serialize)]
struct CamerasOut<'a> {
    format: &'a str,
    version: u32,
    cameras: Vec<CameraEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraEntry {
    name: String,
    width: usize,
    height: usize,
    #[serde(rename = "K")]
    k: [[f64; 3]; 3],
    #[serde(rename = "R")]
    r: [[f64; 3]; 3],
    center: [f64; 3],
}

fn matrix(rows: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| rows[i][j])
}

fn rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [0, 1, 2].map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]])
}

pub fn parse_cameras(text: &str, path: impl AsRef<Path>) -> Result<Vec<CameraModel>> {
    let path = path.as_ref();
    let file: CamerasFile = toml::from_str(text).map_err(|e| toml_error(path, text, e))?;
    if file.format != CAMERAS_FORMAT {
        return Err(Error::parse(
            path,
            1,
            format!("expected format '{CAMERAS_FORMAT}', found '{}'", file.format),
        ));
    }
    if file.version != CAMERAS_VERSION {
        return Err(Error::Version {
            what: path.display().to_string(),
            found: file.version,
            expected: CAMERAS_VERSION,
        });
    }
    if file.cameras.is_empty() {
        return Err(Error::parse(path, 1, "no cameras"));
    }
    let mut out: Vec<CameraModel> = Vec::with_capacity(file.cameras.len());
    for spanned in &file.cameras {
        let line = line_of(text, spanned.span().start);
        let c = spanned.get_ref();
        if out.iter().any(|o| o.name == c.name) {
            return Err(Error::parse(path, line, format!("duplicate camera name '{}'", c.name)));
        }
        let cam = CameraModel::new(
            c.name.clone(),
            matrix(&c.k),
            matrix(&c.r),
            Vector3::from(c.center),
            c.width,
            c.height,
        )
        .map_err(|e| Error::parse(path, line, e.to_string()))?;
        out.push(cam);
    }
    Ok(out)
}

pub fn load_cameras(path: impl AsRef<Path>) -> Result<Vec<CameraModel>> {
    let path = path.as_ref();
    parse_cameras(&read_text(path)?, path)
}

pub fn cameras_to_string(cameras: &[CameraModel]) -> String {
    let file = CamerasOut {
        format: CAMERAS_FORMAT,
        version: CAMERAS_VERSION,
        cameras: cameras
            .iter()
            .map(|c| CameraEntry {
                name: c.name.clone(),
                width: c.width,
                height: c.height,
                k: rows(&c.intrinsics),
                r: rows(&c.rotation),
                center: [c.center.x, c.center.y, c.center.z],
            })
            .collect(),
    };
    toml::to_string(&file).expect("camera file serializes")
}

pub fn save_cameras(cameras: &[CameraModel], path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &cameras_to_string(cameras))
}
