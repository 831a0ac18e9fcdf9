//! Project manifests (TOML): camera file, per-camera frame images, heat-map
//! index and output directory. Relative paths resolve against the
//! manifest's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cameras::load_cameras;
use super::{read_text, resolve, toml_error, write_text};
use crate::error::{Error, Result};
use crate::raycast::CameraModel;

pub const MANIFEST_FORMAT: &str = "sogfit-project";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    format: String,
    version: u32,
    cameras: String,
    frames: usize,
    output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    heatmaps: Option<String>,
    views: Vec<toml::Spanned<ViewEntry>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ViewEntry {
    camera: String,
    images: Vec<String>,
}

#[derive(Serialize)]
struct ManifestOut<'a> {
    format: &'a str,
    version: u32,
    cameras: &'a str,
    frames: usize,
    output: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    heatmaps: Option<&'a str>,
    views: Vec<ViewEntry>,
}

/// A validated project. Paths are kept as written; use the accessors for
/// resolved locations.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectManifest {
    /// Location of the manifest file itself.
    pub path: PathBuf,
    pub cameras_file: String,
    pub cameras: Vec<CameraModel>,
    pub frames: usize,
    /// `images[camera][frame]`, in camera-file order.
    pub images: Vec<Vec<String>>,
    pub heatmaps: Option<String>,
    pub output: String,
}

impl ProjectManifest {
    pub fn image_path(&self, camera: usize, frame: usize) -> PathBuf {
        resolve(&self.path, &self.images[camera][frame])
    }

    pub fn heatmap_index(&self) -> Option<PathBuf> {
        self.heatmaps.as_ref().map(|h| resolve(&self.path, h))
    }

    pub fn output_dir(&self) -> PathBuf {
        resolve(&self.path, &self.output)
    }
}

pub fn parse_manifest(text: &str, path: impl AsRef<Path>) -> Result<ProjectManifest> {
    let path = path.as_ref();
    let file: ManifestFile = toml::from_str(text).map_err(|e| toml_error(path, text, e))?;
    if file.format != MANIFEST_FORMAT {
        return Err(Error::parse(
            path,
            1,
            format!("expected format '{MANIFEST_FORMAT}', found '{}'", file.format),
        ));
    }
    if file.version != MANIFEST_VERSION {
        return Err(Error::Version {
            what: path.display().to_string(),
            found: file.version,
            expected: MANIFEST_VERSION,
        });
    }
    if file.frames == 0 {
        return Err(Error::parse(path, 1, "frames must be >= 1"));
    }
    let cam_path = resolve(path, &file.cameras);
    if !cam_path.exists() {
        return Err(Error::MissingInput(format!("camera file {} does not exist", cam_path.display())));
    }
    let cameras = load_cameras(&cam_path)?;
    let mut images: Vec<Option<Vec<String>>> = vec![None; cameras.len()];
    for v in &file.views {
        let line = super::line_of(text, v.span().start);
        let view = v.get_ref();
        let c = cameras
            .iter()
            .position(|c| c.name == view.camera)
            .ok_or_else(|| Error::parse(path, line, format!("view references unknown camera '{}'", view.camera)))?;
        if images[c].is_some() {
            return Err(Error::parse(path, line, format!("camera '{}' listed twice", view.camera)));
        }
        if view.images.len() != file.frames {
            return Err(Error::parse(
                path,
                line,
                format!(
                    "camera '{}' has {} images for {} frames",
                    view.camera,
                    view.images.len(),
                    file.frames
                ),
            ));
        }
        for img in &view.images {
            let p = resolve(path, img);
            if !p.exists() {
                return Err(Error::MissingInput(format!("image {} does not exist", p.display())));
            }
        }
        images[c] = Some(view.images.clone());
    }
    let images = images
        .into_iter()
        .enumerate()
        .map(|(c, v)| v.ok_or_else(|| Error::parse(path, 1, format!("no images for camera '{}'", cameras[c].name))))
        .collect::<Result<Vec<_>>>()?;
    if let Some(h) = &file.heatmaps {
        let p = resolve(path, h);
        if !p.exists() {
            return Err(Error::MissingInput(format!("heat-map index {} does not exist", p.display())));
        }
    }
    Ok(ProjectManifest {
        path: path.to_path_buf(),
        cameras_file: file.cameras,
        cameras,
        frames: file.frames,
        images,
        heatmaps: file.heatmaps,
        output: file.output,
    })
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<ProjectManifest> {
    let path = path.as_ref();
    parse_manifest(&read_text(path)?, path)
}

pub fn manifest_to_string(m: &ProjectManifest) -> String {
    let out = ManifestOut {
        format: MANIFEST_FORMAT,
        version: MANIFEST_VERSION,
        cameras: &m.cameras_file,
        frames: m.frames,
        output: &m.output,
        heatmaps: m.heatmaps.as_deref(),
        views: m
            .cameras
            .iter()
            .zip(&m.images)
            .map(|(c, i)| ViewEntry {
                camera: c.name.clone(),
                images: i.clone(),
            })
            .collect(),
    };
    toml::to_string(&out).expect("manifest serializes")
}

/// Writes the manifest text only; the referenced files must exist already.
pub fn save_manifest(m: &ProjectManifest, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &manifest_to_string(m))
}
