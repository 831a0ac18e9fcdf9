//! Binary shape-space files.
//!
//! Layout (little endian): magic `SOGSHAPE`, `u32` version, `u32` length of
//! the embedded template actor (TOML, UTF-8) followed by its bytes, `u32`
//! stacked length, `u32` dimension, `f64` mean, `f64` basis column-major,
//! `f64` bounds, `f64` std-devs, then `u8` mesh flag and, if set, `u32`
//! vertex and triangle counts, `f64` vertices and `u32` triangle indices.

use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector3};

use super::actor::{actor_to_string, parse_actor};
use super::write_bytes;
use crate::error::{Error, Result};
use crate::shape::{Mesh, ShapeInstance, ShapeSpace};

pub const SHAPE_MAGIC: &[u8; 8] = b"SOGSHAPE";
pub const SHAPE_VERSION: u32 = 1;

pub fn shape_space_bytes(space: &ShapeSpace) -> Vec<u8> {
    let mut out = Vec::new();
    let u32le = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    let f64le = |out: &mut Vec<u8>, v: f64| out.extend_from_slice(&v.to_le_bytes());
    out.extend_from_slice(SHAPE_MAGIC);
    out.extend_from_slice(&SHAPE_VERSION.to_le_bytes());
    let actor = actor_to_string(&space.template);
    u32le(&mut out, actor.len());
    out.extend_from_slice(actor.as_bytes());
    u32le(&mut out, space.mean.len());
    u32le(&mut out, space.dim());
    space.mean.iter().for_each(|v| f64le(&mut out, *v));
    space.basis.iter().for_each(|v| f64le(&mut out, *v));
    space.bounds.iter().for_each(|v| f64le(&mut out, *v));
    space.std_devs.iter().for_each(|v| f64le(&mut out, *v));
    match &space.reference_mesh {
        None => out.push(0),
        Some(m) => {
            out.push(1);
            u32le(&mut out, m.vertices.len());
            u32le(&mut out, m.triangles.len());
            m.vertices
                .iter()
                .flat_map(|v| v.iter().cloned().collect::<Vec<_>>())
                .for_each(|v| f64le(&mut out, v));
            m.triangles.iter().flatten().for_each(|i| u32le(&mut out, *i));
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::parse(
                self.path,
                0,
                format!("truncated while reading {what} at byte {}", self.pos),
            )),
        }
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let b = self.take(n.saturating_mul(8), what)?;
        Ok(b.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn parse_shape_space(bytes: &[u8], path: impl AsRef<Path>) -> Result<ShapeSpace> {
    let path = path.as_ref();
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(8, "magic")? != SHAPE_MAGIC {
        return Err(Error::parse(path, 0, "not a shape-space file"));
    }
    let version = r.u32("version")? as u32;
    if version != SHAPE_VERSION {
        return Err(Error::Version {
            what: path.display().to_string(),
            found: version,
            expected: SHAPE_VERSION,
        });
    }
    let n = r.u32("actor length")?;
    let text = std::str::from_utf8(r.take(n, "actor")?).map_err(|_| Error::parse(path, 0, "template actor is not UTF-8"))?;
    let template = parse_actor(text, path)?.model;
    let len = r.u32("stack length")?;
    let dim = r.u32("dimension")?;
    let expect = ShapeInstance::stack_len(template.gaussians.len(), template.skeleton.num_joints());
    if len != expect || dim > len {
        return Err(Error::parse(
            path,
            0,
            format!("stack length {len} / dimension {dim} do not match the template ({expect})"),
        ));
    }
    let mean = DVector::from_vec(r.f64s(len, "mean")?);
    let basis = DMatrix::from_vec(len, dim, r.f64s(len * dim, "basis")?);
    let bounds = r.f64s(dim, "bounds")?;
    let std_devs = r.f64s(dim, "std-devs")?;
    let reference_mesh = match r.take(1, "mesh flag")?[0] {
        0 => None,
        1 => {
            let nv = r.u32("vertex count")?;
            let nt = r.u32("triangle count")?;
            let v = r.f64s(3 * nv, "vertices")?;
            let mut triangles = Vec::with_capacity(nt);
            for _ in 0..nt {
                let t = [r.u32("triangle")?, r.u32("triangle")?, r.u32("triangle")?];
                if t.iter().any(|i| *i >= nv) {
                    return Err(Error::parse(path, 0, "triangle index out of range"));
                }
                triangles.push(t);
            }
            Some(Mesh {
                vertices: v.chunks_exact(3).map(|c| Vector3::new(c[0], c[1], c[2])).collect(),
                triangles,
            })
        }
        f => return Err(Error::parse(path, 0, format!("bad mesh flag {f}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::parse(path, 0, "trailing bytes"));
    }
    Ok(ShapeSpace {
        template,
        mean,
        basis,
        bounds,
        std_devs,
        reference_mesh,
    })
}

pub fn load_shape_space(path: impl AsRef<Path>) -> Result<ShapeSpace> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingInput(format!("shape space {} does not exist", path.display())));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_shape_space(&bytes, path)
}

pub fn save_shape_space(space: &ShapeSpace, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &shape_space_bytes(space))
}
