//! Procedural body generator: a fixed-topology template surface whose
//! limb lengths and girths are parametrized. It stands in for a database
//! of registered body scans.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::mesh::Mesh;

/// Multiplicative body proportions; all 1.0 gives the reference template.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodyParams {
    pub height: f64,
    pub torso_length: f64,
    pub arm_length: f64,
    pub leg_length: f64,
    pub chest: f64,
    pub waist: f64,
    pub hip: f64,
    pub arm_girth: f64,
    pub leg_girth: f64,
}

impl Default for BodyParams {
    fn default() -> Self {
        Self {
            height: 1.0,
            torso_length: 1.0,
            arm_length: 1.0,
            leg_length: 1.0,
            chest: 1.0,
            waist: 1.0,
            hip: 1.0,
            arm_girth: 1.0,
            leg_girth: 1.0,
        }
    }
}

impl BodyParams {
    /// Independent factors drawn from N(1, `spread`), clamped to ±3 spread.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, spread: f64) -> Self {
        let n = Normal::new(0.0, spread).expect("finite spread");
        let mut f = || 1.0 + n.sample(rng).clamp(-3.0 * spread, 3.0 * spread);
        Self {
            height: f(),
            torso_length: f(),
            arm_length: f(),
            leg_length: f(),
            chest: f(),
            waist: f(),
            hip: f(),
            arm_girth: f(),
            leg_girth: f(),
        }
    }
}

pub const JOINT_NAMES: [&str; 16] = [
    "pelvis",
    "spine",
    "neck",
    "head",
    "l_shoulder",
    "l_elbow",
    "l_wrist",
    "r_shoulder",
    "r_elbow",
    "r_wrist",
    "l_hip",
    "l_knee",
    "l_ankle",
    "r_hip",
    "r_knee",
    "r_ankle",
];

/// Rest-pose joint positions in the order of [`JOINT_NAMES`]; floor at y = 0.
pub fn body_joints(p: &BodyParams) -> Vec<Vector3<f64>> {
    let h = p.height;
    let ankle_y = 0.07 * h;
    let knee_y = ankle_y + 0.38 * p.leg_length * h;
    let hip_y = knee_y + 0.42 * p.leg_length * h;
    let pelvis_y = hip_y + 0.08 * h;
    let spine_y = pelvis_y + 0.10 * p.torso_length * h;
    let shoulder_y = spine_y + 0.38 * p.torso_length * h;
    let neck_y = spine_y + 0.45 * p.torso_length * h;
    let head_y = neck_y + 0.12 * h;
    let sh_x = 0.19 * h;
    let el_x = sh_x + 0.29 * p.arm_length * h;
    let wr_x = el_x + 0.26 * p.arm_length * h;
    let v = Vector3::new;
    let mut out = vec![
        v(0.0, pelvis_y, 0.0),
        v(0.0, spine_y, 0.0),
        v(0.0, neck_y, 0.0),
        v(0.0, head_y, 0.0),
    ];
    for s in [1.0, -1.0] {
        out.push(v(s * sh_x, shoulder_y, 0.0));
        out.push(v(s * el_x, shoulder_y, 0.0));
        out.push(v(s * wr_x, shoulder_y, 0.0));
    }
    for s in [1.0, -1.0] {
        out.push(v(s * 0.10 * h, hip_y, 0.0));
        out.push(v(s * 0.10 * h, knee_y, 0.0));
        out.push(v(s * 0.10 * h, ankle_y, 0.0));
    }
    out
}

/// Top of the head above the floor.
pub fn body_height(p: &BodyParams) -> f64 {
    body_joints(p)[3].y + 0.19 * p.height
}

/// One tube station: position along the centerline and the two radii.
struct Station {
    at: f64,
    r1: f64,
    r2: f64,
}

fn st(at: f64, r1: f64, r2: f64) -> Station {
    Station { at, r1, r2 }
}

fn interp(stations: &[Station], t: f64) -> (f64, f64) {
    let last = stations.len() - 1;
    if t <= stations[0].at {
        return (stations[0].r1, stations[0].r2);
    }
    for w in stations.windows(2) {
        if t <= w[1].at {
            let a = (t - w[0].at) / (w[1].at - w[0].at);
            return (w[0].r1 + a * (w[1].r1 - w[0].r1), w[0].r2 + a * (w[1].r2 - w[0].r2));
        }
    }
    (stations[last].r1, stations[last].r2)
}

/// Appends a capped elliptical tube along `origin + t·axis`, t spanning the
/// first to last station, with `rings` rings of `segments` vertices.
#[allow(clippy::too_many_arguments)]
fn tube(
    mesh: &mut Mesh,
    origin: Vector3<f64>,
    axis: Vector3<f64>,
    e1: Vector3<f64>,
    e2: Vector3<f64>,
    stations: &[Station],
    rings: usize,
    segments: usize,
) {
    let t0 = stations[0].at;
    let t1 = stations[stations.len() - 1].at;
    let base = mesh.vertices.len();
    for k in 0..rings {
        let t = t0 + (t1 - t0) * k as f64 / (rings - 1) as f64;
        let (r1, r2) = interp(stations, t);
        let c = origin + axis * t;
        for m in 0..segments {
            let phi = std::f64::consts::TAU * m as f64 / segments as f64;
            mesh.vertices.push(c + e1 * (r1 * phi.cos()) + e2 * (r2 * phi.sin()));
        }
    }
    let cap0 = mesh.vertices.len();
    mesh.vertices.push(origin + axis * t0);
    mesh.vertices.push(origin + axis * t1);
    let idx = |k: usize, m: usize| base + k * segments + m % segments;
    for k in 0..rings - 1 {
        for m in 0..segments {
            let (a, b, c, d) = (idx(k, m), idx(k, m + 1), idx(k + 1, m), idx(k + 1, m + 1));
            mesh.triangles.push([a, c, b]);
            mesh.triangles.push([b, c, d]);
        }
    }
    for m in 0..segments {
        mesh.triangles.push([cap0, idx(0, m), idx(0, m + 1)]);
        mesh.triangles.push([cap0 + 1, idx(rings - 1, m + 1), idx(rings - 1, m)]);
    }
}

/// Surface mesh of the body in T-pose. Topology does not depend on `p`.
pub fn body_mesh(p: &BodyParams) -> Mesh {
    let j = body_joints(p);
    let h = p.height;
    let (x, y, z) = (Vector3::x(), Vector3::y(), Vector3::z());
    let mut mesh = Mesh::default();

    let (hip_y, pelvis_y, spine_y, neck_y, head_y) = (j[10].y, j[0].y, j[1].y, j[2].y, j[3].y);
    let tl = p.torso_length * h;
    let torso = [
        st(hip_y - 0.07 * h, 0.15 * h * p.hip, 0.10 * h * p.hip),
        st(pelvis_y - 0.03 * h, 0.175 * h * p.hip, 0.12 * h * p.hip),
        st(spine_y + 0.07 * tl, 0.14 * h * p.waist, 0.10 * h * p.waist),
        st(spine_y + 0.27 * tl, 0.165 * h * p.chest, 0.12 * h * p.chest),
        st(spine_y + 0.38 * tl, 0.17 * h * p.chest, 0.10 * h * p.chest),
        st(neck_y, 0.07 * h, 0.06 * h),
    ];
    tube(&mut mesh, Vector3::new(0.0, 0.0, 0.005 * h), y, x, z, &torso, 30, 28);

    let head = [
        st(neck_y - 0.02 * h, 0.055 * h, 0.055 * h),
        st(head_y - 0.02 * h, 0.05 * h, 0.05 * h),
        st(head_y + 0.01 * h, 0.07 * h, 0.08 * h),
        st(head_y + 0.08 * h, 0.085 * h, 0.10 * h),
        st(head_y + 0.14 * h, 0.075 * h, 0.09 * h),
        st(head_y + 0.18 * h, 0.04 * h, 0.05 * h),
        st(head_y + 0.19 * h, 0.005 * h, 0.005 * h),
    ];
    tube(&mut mesh, Vector3::new(0.0, 0.0, 0.005 * h), y, x, z, &head, 16, 16);

    let al = p.arm_length * h;
    let ag = p.arm_girth * h;
    for (side, s) in [(0usize, 1.0f64), (1, -1.0)] {
        let (sh, el, wr) = (j[4 + 3 * side], j[5 + 3 * side], j[6 + 3 * side]);
        let d_el = (el.x - sh.x).abs();
        let d_wr = (wr.x - sh.x).abs();
        let arm = [
            st(-0.03 * h, 0.06 * ag, 0.06 * ag),
            st(0.05 * al, 0.055 * ag, 0.055 * ag),
            st(d_el, 0.042 * ag, 0.042 * ag),
            st(d_el + 0.10 * al, 0.045 * ag, 0.045 * ag),
            st(d_wr, 0.03 * ag, 0.03 * ag),
            st(d_wr + 0.05 * h, 0.022 * h, 0.045 * h),
            st(d_wr + 0.16 * h, 0.015 * h, 0.035 * h),
            st(d_wr + 0.19 * h, 0.005 * h, 0.005 * h),
        ];
        tube(&mut mesh, sh, x * s, y, z, &arm, 32, 12);
    }

    let ll = p.leg_length * h;
    let lg = p.leg_girth * h;
    for side in 0..2 {
        let (hip, knee, ankle) = (j[10 + 3 * side], j[11 + 3 * side], j[12 + 3 * side]);
        let d_kn = hip.y - knee.y;
        let d_an = hip.y - ankle.y;
        let leg = [
            st(-0.04 * h, 0.09 * lg, 0.09 * lg),
            st(0.10 * ll, 0.08 * lg, 0.08 * lg),
            st(d_kn, 0.052 * lg, 0.052 * lg),
            st(d_kn + 0.10 * ll, 0.055 * lg, 0.055 * lg),
            st(d_an - 0.05 * h, 0.04 * lg, 0.04 * lg),
            st(d_an + 0.02 * h, 0.04 * lg, 0.04 * lg),
        ];
        tube(&mut mesh, hip, -y, x, z, &leg, 28, 14);
        let foot = [
            st(-0.06 * h, 0.035 * h, 0.03 * h),
            st(-0.03 * h, 0.045 * h, 0.04 * h),
            st(0.12 * h, 0.045 * h, 0.03 * h),
            st(0.19 * h, 0.01 * h, 0.01 * h),
        ];
        let heel = Vector3::new(ankle.x, 0.045 * h, 0.0);
        tube(&mut mesh, heel, z, x, y, &foot, 10, 10);
    }
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::default_actor;

    #[test]
    fn reference_joints_match_default_actor() {
        let actor = default_actor();
        let rest = actor.skeleton.rest_positions();
        let ours = body_joints(&BodyParams::default());
        for (i, name) in JOINT_NAMES.iter().enumerate() {
            assert_eq!(actor.skeleton.joints()[i].name, *name);
            assert!((rest[i] - ours[i]).norm() < 1e-5, "{name}");
        }
    }

    #[test]
    fn topology_is_parameter_independent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        use rand::SeedableRng;
        let a = body_mesh(&BodyParams::default());
        let b = body_mesh(&BodyParams::sample(&mut rng, 0.06));
        assert!(a.same_topology(&b));
        assert!(a.vertices.len() > 2000);
        assert_eq!(a.components().1, 8);
    }
}
