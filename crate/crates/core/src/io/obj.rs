//! Wavefront OBJ meshes (vertices and triangles only).

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use super::{read_text, write_text};
use crate::error::{Error, Result};
use crate::shape::Mesh;

pub fn mesh_to_obj(mesh: &Mesh) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        writeln!(out, "v {:?} {:?} {:?}", v.x, v.y, v.z).unwrap();
    }
    for t in &mesh.triangles {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    out
}

/// Reads `v` and `f` records; polygons are fan-triangulated and texture or
/// normal indices after `/` are ignored.
pub fn parse_obj(text: &str, path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let mut mesh = Mesh::default();
    let mut faces: Vec<(usize, Vec<i64>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| Error::parse(path, i + 1, format!("bad coordinate '{t}'")))
                    })
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(Error::parse(path, i + 1, "vertex needs three coordinates"));
                }
                mesh.vertices.push(Vector3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<i64> = it
                    .map(|t| {
                        t.split('/')
                            .next()
                            .and_then(|s| s.parse::<i64>().ok())
                            .ok_or_else(|| Error::parse(path, i + 1, format!("bad face index '{t}'")))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(Error::parse(path, i + 1, "face needs at least three vertices"));
                }
                faces.push((i + 1, idx));
            }
            _ => {}
        }
    }
    let n = mesh.vertices.len() as i64;
    for (line, idx) in faces {
        let resolved = idx
            .iter()
            .map(|&k| {
                let r = if k < 0 { n + k } else { k - 1 };
                if (0..n).contains(&r) {
                    Ok(r as usize)
                } else {
                    Err(Error::parse(path, line, format!("vertex index {k} out of range")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        for k in 1..resolved.len() - 1 {
            mesh.triangles.push([resolved[0], resolved[k], resolved[k + 1]]);
        }
    }
    Ok(mesh)
}

pub fn load_obj(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    parse_obj(&read_text(path)?, path)
}

pub fn save_obj(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &mesh_to_obj(mesh))
}
