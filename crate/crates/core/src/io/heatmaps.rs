//! Heat maps: one single-channel float map per (camera, frame, joint) plus
//! a TOML index listing them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::images::{load_pfm, pfm_bytes, FloatMap};
use super::{read_text, resolve, toml_error, write_bytes, write_text};
use crate::energy::{HeatMap, HeatMapSet};
use crate::error::{Error, Result};

pub const HEATMAPS_FORMAT: &str = "sogfit-heatmaps";
pub const HEATMAPS_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexFile {
    format: String,
    version: u32,
    cameras: usize,
    frames: usize,
    joints: usize,
    #[serde(default)]
    maps: Vec<MapEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapEntry {
    camera: usize,
    frame: usize,
    joint: usize,
    scale: f64,
    file: String,
}

/// Writes every present map below `dir` and the index `dir/index.toml`;
/// returns the index path.
pub fn save_heatmaps(set: &HeatMapSet, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let frames = set.maps.first().map(|m| m.len()).unwrap_or(0);
    let joints = set.maps.first().and_then(|m| m.first()).map(|j| j.len()).unwrap_or(0);
    let mut maps = Vec::new();
    for (c, per_cam) in set.maps.iter().enumerate() {
        for (t, per_frame) in per_cam.iter().enumerate() {
            for (j, map) in per_frame.iter().enumerate() {
                let Some(map) = map else { continue };
                let file = format!("c{c}/f{t:04}_j{j:02}.pfm");
                let fm = FloatMap {
                    width: map.width,
                    height: map.height,
                    channels: 1,
                    data: map.data.iter().map(|v| *v as f32).collect(),
                };
                write_bytes(&dir.join(&file), &pfm_bytes(&fm))?;
                maps.push(MapEntry {
                    camera: c,
                    frame: t,
                    joint: j,
                    scale: map.scale,
                    file,
                });
            }
        }
    }
    let index = IndexFile {
        format: HEATMAPS_FORMAT.into(),
        version: HEATMAPS_VERSION,
        cameras: set.maps.len(),
        frames,
        joints,
        maps,
    };
    let path = dir.join("index.toml");
    write_text(&path, &toml::to_string(&index).expect("index serializes"))?;
    Ok(path)
}

pub fn load_heatmaps(index: impl AsRef<Path>) -> Result<HeatMapSet> {
    let path = index.as_ref();
    let text = read_text(path)?;
    let file: IndexFile = toml::from_str(&text).map_err(|e| toml_error(path, &text, e))?;
    if file.format != HEATMAPS_FORMAT {
        return Err(Error::parse(
            path,
            1,
            format!("expected format '{HEATMAPS_FORMAT}', found '{}'", file.format),
        ));
    }
    if file.version != HEATMAPS_VERSION {
        return Err(Error::Version {
            what: path.display().to_string(),
            found: file.version,
            expected: HEATMAPS_VERSION,
        });
    }
    let mut maps = vec![vec![vec![None; file.joints]; file.frames]; file.cameras];
    for (k, e) in file.maps.iter().enumerate() {
        if e.camera >= file.cameras || e.frame >= file.frames || e.joint >= file.joints {
            return Err(Error::parse(path, 0, format!("map entry {k} indexes outside the declared sizes")));
        }
        if !(e.scale >= 1.0) {
            return Err(Error::parse(path, 0, format!("map entry {k}: scale must be >= 1")));
        }
        let fm = load_pfm(resolve(path, &e.file))?;
        if fm.channels != 1 {
            return Err(Error::parse(resolve(path, &e.file), 1, "heat maps must have one channel"));
        }
        if let Some(v) = fm.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::parse(resolve(path, &e.file), 0, format!("value {v} outside [0, 1]")));
        }
        maps[e.camera][e.frame][e.joint] = Some(HeatMap {
            width: fm.width,
            height: fm.height,
            scale: e.scale,
            data: fm.data.iter().map(|v| *v as f64).collect(),
        });
    }
    Ok(HeatMapSet { maps })
}
