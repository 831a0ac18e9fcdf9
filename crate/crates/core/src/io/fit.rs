//! Fit results (TOML): shape coefficients, the shape space they refer to
//! and the pose and model files written next to them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_text, resolve, toml_error, write_text};
use crate::error::{Error, Result};

pub const FIT_FORMAT: &str = "sogfit-fit";
pub const FIT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFile {
    pub format: String,
    pub version: u32,
    /// Which stages produced this result: "1", "2" or "both".
    pub stage: String,
    pub shape_space: String,
    pub poses: String,
    pub model: String,
    pub shape: Vec<f64>,
}

impl FitFile {
    pub fn new(stage: &str, shape_space: String, poses: String, model: String, shape: Vec<f64>) -> Self {
        Self {
            format: FIT_FORMAT.into(),
            version: FIT_VERSION,
            stage: stage.into(),
            shape_space,
            poses,
            model,
            shape,
        }
    }
}

/// Loaded fit file with its location, for resolving the referenced files.
#[derive(Clone, Debug, PartialEq)]
pub struct FitRecord {
    pub path: PathBuf,
    pub file: FitFile,
}

impl FitRecord {
    pub fn shape_space_path(&self) -> PathBuf {
        resolve(&self.path, &self.file.shape_space)
    }

    pub fn poses_path(&self) -> PathBuf {
        resolve(&self.path, &self.file.poses)
    }

    pub fn model_path(&self) -> PathBuf {
        resolve(&self.path, &self.file.model)
    }
}

pub fn load_fit(path: impl AsRef<Path>) -> Result<FitRecord> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingInput(format!("fit result {} does not exist", path.display())));
    }
    let text = read_text(path)?;
    let file: FitFile = toml::from_str(&text).map_err(|e| toml_error(path, &text, e))?;
    if file.format != FIT_FORMAT {
        return Err(Error::parse(
            path,
            1,
            format!("expected format '{FIT_FORMAT}', found '{}'", file.format),
        ));
    }
    if file.version != FIT_VERSION {
        return Err(Error::Version {
            what: path.display().to_string(),
            found: file.version,
            expected: FIT_VERSION,
        });
    }
    Ok(FitRecord {
        path: path.to_path_buf(),
        file,
    })
}

pub fn save_fit(file: &FitFile, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &toml::to_string(file).expect("fit file serializes"))
}
