//! Actor model files (TOML): skeleton topology, bone lengths, DOF limits,
//! joint-Gaussian parameters and the attached Gaussian set.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{read_text, toml_error, write_text};
use crate::error::{Error, Result};
use crate::scene::{ActorModel, Dof, GaussianBlob, Joint, JointGaussian, JointGroup, Skeleton};

pub const ACTOR_FORMAT: &str = "sogfit-actor";
pub const ACTOR_VERSION: u32 = 1;

pub(crate) const DEFAULT_ACTOR_TOML: &str = include_str!("../../data/default_actor.toml");

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActorFile {
    format: String,
    version: u32,
    #[serde(default)]
    joint_gaussian: Option<JointGaussianEntry>,
    joints: Vec<JointEntry>,
    #[serde(default)]
    gaussians: Vec<GaussianEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointGaussianEntry {
    std_dev: f64,
    density: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointEntry {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parent: Option<String>,
    direction: [f64; 3],
    length: f64,
    #[serde(default)]
    group: JointGroup,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    dofs: Vec<DofEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DofEntry {
    axis: [f64; 3],
    min: f64,
    max: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianEntry {
    bone: String,
    mean: [f64; 3],
    std_dev: f64,
    density: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    color: Option<[f64; 3]>,
}

/// Parsed actor file.
#[derive(Clone, Debug)]
pub struct ActorData {
    pub model: ActorModel,
}

fn unit(v: [f64; 3], what: &str, path: &Path) -> Result<Vector3<f64>> {
    let v = Vector3::from(v);
    let n = v.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::parse(path, 0, format!("{what}: zero or non-finite vector")));
    }
    // leave already-unit vectors untouched so files round-trip exactly
    Ok(if (n - 1.0).abs() < 1e-12 { v } else { v / n })
}

pub fn parse_actor(text: &str, path: impl AsRef<Path>) -> Result<ActorData> {
    let path = path.as_ref();
    let file: ActorFile = toml::from_str(text).map_err(|e| toml_error(path, text, e))?;
    if file.format != ACTOR_FORMAT {
        return Err(Error::parse(path, 0, format!("unexpected format '{}'", file.format)));
    }
    if file.version != ACTOR_VERSION {
        return Err(Error::Version {
            what: path.display().to_string(),
            found: file.version,
            expected: ACTOR_VERSION,
        });
    }
    let names: Vec<&str> = file.joints.iter().map(|j| j.name.as_str()).collect();
    let lookup = |name: &str| -> Result<usize> {
        names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| Error::parse(path, 0, format!("unknown joint '{name}'")))
    };
    let mut joints = Vec::with_capacity(file.joints.len());
    let mut lengths = Vec::with_capacity(file.joints.len());
    for j in &file.joints {
        let parent = j.parent.as_deref().map(lookup).transpose()?;
        let dofs = j
            .dofs
            .iter()
            .map(|d| {
                Ok(Dof {
                    axis: unit(d.axis, &format!("joint '{}' dof axis", j.name), path)?,
                    min: d.min,
                    max: d.max,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        joints.push(Joint {
            name: j.name.clone(),
            parent,
            direction: unit(j.direction, &format!("joint '{}' direction", j.name), path)?,
            dofs,
            group: j.group,
        });
        lengths.push(j.length);
    }
    let skeleton = Skeleton::new(joints, lengths).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    let gaussians = file
        .gaussians
        .iter()
        .map(|g| {
            Ok(GaussianBlob {
                mean_local: Vector3::from(g.mean),
                std_dev: g.std_dev,
                density: g.density,
                bone: lookup(&g.bone)?,
                color: g.color,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let joint_gaussian = file
        .joint_gaussian
        .map(|j| JointGaussian {
            std_dev: j.std_dev,
            density: j.density,
        })
        .unwrap_or_default();
    let model = ActorModel::new(skeleton, gaussians, joint_gaussian).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    Ok(ActorData { model })
}

pub fn load_actor(path: impl AsRef<Path>) -> Result<ActorModel> {
    let path = path.as_ref();
    let text = read_text(path)?;
    Ok(parse_actor(&text, path)?.model)
}

pub fn actor_to_string(model: &ActorModel) -> String {
    let sk = &model.skeleton;
    let names: Vec<&str> = sk.joints().iter().map(|j| j.name.as_str()).collect();
    let file = ActorFile {
        format: ACTOR_FORMAT.into(),
        version: ACTOR_VERSION,
        joint_gaussian: Some(JointGaussianEntry {
            std_dev: model.joint_gaussian.std_dev,
            density: model.joint_gaussian.density,
        }),
        joints: sk
            .joints()
            .iter()
            .zip(sk.bone_lengths())
            .map(|(j, &length)| JointEntry {
                name: j.name.clone(),
                parent: j.parent.map(|p| names[p].to_string()),
                direction: j.direction.into(),
                length,
                group: j.group,
                dofs: j
                    .dofs
                    .iter()
                    .map(|d| DofEntry {
                        axis: d.axis.into(),
                        min: d.min,
                        max: d.max,
                    })
                    .collect(),
            })
            .collect(),
        gaussians: model
            .gaussians
            .iter()
            .map(|g| GaussianEntry {
                bone: names[g.bone].to_string(),
                mean: g.mean_local.into(),
                std_dev: g.std_dev,
                density: g.density,
                color: g.color,
            })
            .collect(),
    };
    toml::to_string(&file).expect("actor file serializes")
}

pub fn save_actor(model: &ActorModel, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &actor_to_string(model))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_actor_has_expected_dimensions() {
        let m = parse_actor(DEFAULT_ACTOR_TOML, "default").unwrap().model;
        assert_eq!(m.skeleton.num_joints(), 16);
        assert_eq!(m.skeleton.pose_dim(), crate::scene::DEFAULT_POSE_DIM);
        assert_eq!(m.gaussians.len(), 91);
    }

    #[test]
    fn round_trip_is_exact() {
        let m = parse_actor(DEFAULT_ACTOR_TOML, "default").unwrap().model;
        let text = actor_to_string(&m);
        let back = parse_actor(&text, "rt").unwrap().model;
        assert_eq!(m, back);
    }

    #[test]
    fn unknown_bone_reports_error() {
        let text = DEFAULT_ACTOR_TOML.replacen("bone = \"pelvis\"", "bone = \"tail\"", 1);
        let err = parse_actor(&text, "bad.toml").unwrap_err();
        assert!(err.to_string().contains("tail"));
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let text = DEFAULT_ACTOR_TOML.replacen("version = 1", "version = 7", 1);
        assert!(matches!(parse_actor(&text, "v.toml"), Err(Error::Version { found: 7, .. })));
    }

    #[test]
    fn syntax_error_carries_line() {
        let text = "format = \"sogfit-actor\"\nversion = 1\njoints = [\n";
        match parse_actor(text, "s.toml") {
            Err(Error::Parse { line, .. }) => assert!(line >= 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
