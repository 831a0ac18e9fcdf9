//! Pose sequences as CSV: a header, then one row per frame holding the
//! frame index followed by every pose parameter.

use std::fmt::Write as _;
use std::path::Path;

use super::{read_text, write_text};
use crate::error::{Error, Result};

pub fn poses_to_string(poses: &[Vec<f64>]) -> String {
    let dim = poses.first().map(|p| p.len()).unwrap_or(0);
    let mut out = String::from("frame");
    for k in 0..dim {
        write!(out, ",p{k}").unwrap();
    }
    out.push('\n');
    for (t, p) in poses.iter().enumerate() {
        write!(out, "{t}").unwrap();
        for v in p {
            write!(out, ",{v:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses a pose CSV; every row must carry `dim` values after the frame.
pub fn parse_poses(text: &str, dim: usize, path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::parse(path, 1, "empty pose file"))?;
    if header.split(',').count() != dim + 1 {
        return Err(Error::parse(
            path,
            1,
            format!("header has {} columns, expected {}", header.split(',').count(), dim + 1),
        ));
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != dim + 1 {
            return Err(Error::parse(path, i + 1, format!("{} columns, expected {}", fields.len(), dim + 1)));
        }
        let frame: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("bad frame index '{}'", fields[0])))?;
        if frame != out.len() {
            return Err(Error::parse(
                path,
                i + 1,
                format!("frame {frame} out of order, expected {}", out.len()),
            ));
        }
        let values = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(path, i + 1, format!("bad value '{f}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(values);
    }
    if out.is_empty() {
        return Err(Error::parse(path, 1, "no frames"));
    }
    Ok(out)
}

pub fn load_poses(path: impl AsRef<Path>, dim: usize) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    parse_poses(&read_text(path)?, dim, path)
}

pub fn save_poses(poses: &[Vec<f64>], path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &poses_to_string(poses))
}
