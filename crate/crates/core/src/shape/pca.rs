use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{Error, Result};
use crate::scene::{ActorModel, GaussianBlob};

use super::mesh::Mesh;

/// Minimum std-dev produced by [`ShapeSpace::evaluate`].
pub const MIN_STD_DEV: f64 = 1e-4;

pub const DEFAULT_SHAPE_DIM: usize = 50;

/// Shape parameters of one body: Gaussian means in their bone frames,
/// std-devs, densities and bone lengths.
///
/// Stacked layout (used by [`ShapeSpace`] and its file format): the 3Q
/// mean coordinates Gaussian-major (x, y, z), then Q std-devs, then Q
/// densities, then the bone lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeInstance {
    pub means_local: Vec<Vector3<f64>>,
    pub std_devs: Vec<f64>,
    pub densities: Vec<f64>,
    pub bone_lengths: Vec<f64>,
}

impl ShapeInstance {
    pub fn from_model(model: &ActorModel) -> Self {
        Self {
            means_local: model.gaussians.iter().map(|g| g.mean_local).collect(),
            std_devs: model.gaussians.iter().map(|g| g.std_dev).collect(),
            densities: model.gaussians.iter().map(|g| g.density).collect(),
            bone_lengths: model.skeleton.bone_lengths().to_vec(),
        }
    }

    pub fn stack_len(gaussians: usize, bones: usize) -> usize {
        5 * gaussians + bones
    }

    pub fn stack(&self) -> DVector<f64> {
        let q = self.means_local.len();
        let mut v = DVector::zeros(Self::stack_len(q, self.bone_lengths.len()));
        for (i, m) in self.means_local.iter().enumerate() {
            v.fixed_rows_mut::<3>(3 * i).copy_from(m);
        }
        for i in 0..q {
            v[3 * q + i] = self.std_devs[i];
            v[4 * q + i] = self.densities[i];
        }
        for (i, b) in self.bone_lengths.iter().enumerate() {
            v[5 * q + i] = *b;
        }
        v
    }

    pub fn unstack(v: &DVector<f64>, gaussians: usize, bones: usize) -> Self {
        let q = gaussians;
        assert_eq!(v.len(), Self::stack_len(q, bones));
        Self {
            means_local: (0..q).map(|i| v.fixed_rows::<3>(3 * i).into_owned()).collect(),
            std_devs: v.rows(3 * q, q).iter().cloned().collect(),
            densities: v.rows(4 * q, q).iter().cloned().collect(),
            bone_lengths: v.rows(5 * q, bones).iter().cloned().collect(),
        }
    }

    /// Same topology as `template`, with these parameters.
    pub fn to_model(&self, template: &ActorModel) -> Result<ActorModel> {
        let skeleton = template.skeleton.with_bone_lengths(self.bone_lengths.clone())?;
        let gaussians = template
            .gaussians
            .iter()
            .enumerate()
            .map(|(q, g)| GaussianBlob {
                mean_local: self.means_local[q],
                std_dev: self.std_devs[q],
                density: self.densities[q],
                bone: g.bone,
                color: g.color,
            })
            .collect();
        ActorModel::new(skeleton, gaussians, template.joint_gaussian)
    }
}

/// Linear shape model over stacked `(γ; b)` vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeSpace {
    /// Reference actor: topology, bone attachment and colours.
    pub template: ActorModel,
    pub mean: DVector<f64>,
    /// Orthonormal columns.
    pub basis: DMatrix<f64>,
    /// Largest |coefficient| over the training set.
    pub bounds: Vec<f64>,
    /// Standard deviation of each coefficient over the training set.
    pub std_devs: Vec<f64>,
    /// Reference surface for skinning.
    pub reference_mesh: Option<Mesh>,
}

impl ShapeSpace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn num_gaussians(&self) -> usize {
        self.template.gaussians.len()
    }

    pub fn num_bones(&self) -> usize {
        self.template.skeleton.num_joints()
    }

    fn check(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.dim() {
            return Err(Error::invalid(format!(
                "{} shape coefficients for a {}-dimensional space",
                s.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `mean + basis · s`, without clamping.
    pub fn evaluate_stack(&self, s: &[f64]) -> Result<DVector<f64>> {
        self.check(s)?;
        Ok(&self.mean + &self.basis * DVector::from_column_slice(s))
    }

    /// Shape parameters for `s`; std-devs are clamped to [`MIN_STD_DEV`].
    pub fn evaluate(&self, s: &[f64]) -> Result<ShapeInstance> {
        let v = self.evaluate_stack(s)?;
        let mut inst = ShapeInstance::unstack(&v, self.num_gaussians(), self.num_bones());
        let mut clamped = 0;
        for sd in &mut inst.std_devs {
            if !(*sd >= MIN_STD_DEV) {
                *sd = MIN_STD_DEV;
                clamped += 1;
            }
        }
        for d in &mut inst.densities {
            *d = d.max(0.0);
        }
        for b in &mut inst.bone_lengths {
            *b = b.max(0.0);
        }
        if clamped > 0 {
            log::warn!("{clamped} std-devs clamped; shape coefficients far outside the training range");
        }
        Ok(inst)
    }

    pub fn model(&self, s: &[f64]) -> Result<ActorModel> {
        self.evaluate(s)?.to_model(&self.template)
    }

    pub fn project(&self, inst: &ShapeInstance) -> Vec<f64> {
        let d = inst.stack() - &self.mean;
        (self.basis.transpose() * d).iter().cloned().collect()
    }

    /// Gradient w.r.t. `s` from a gradient w.r.t. the stacked vector.
    pub fn pullback(&self, stack_grad: &DVector<f64>) -> Vec<f64> {
        (self.basis.transpose() * stack_grad).iter().cloned().collect()
    }

    pub fn zero(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }
}

/// PCA over stacked training instances; `dim` is truncated to the rank
/// available from the data.
pub fn build_shape_space(
    template: ActorModel,
    instances: &[ShapeInstance],
    dim: usize,
    reference_mesh: Option<Mesh>,
) -> Result<ShapeSpace> {
    let n = instances.len();
    if n < 2 {
        return Err(Error::invalid("at least two instances are needed"));
    }
    let q = template.gaussians.len();
    let b = template.skeleton.num_joints();
    let len = ShapeInstance::stack_len(q, b);
    for (i, inst) in instances.iter().enumerate() {
        if inst.means_local.len() != q || inst.std_devs.len() != q || inst.densities.len() != q || inst.bone_lengths.len() != b {
            return Err(Error::invalid(format!("instance {i} does not match the template layout")));
        }
    }
    let cols: Vec<DVector<f64>> = instances.iter().map(|i| i.stack()).collect();
    let mut mean = DVector::zeros(len);
    for c in &cols {
        mean += c;
    }
    mean /= n as f64;
    let mut data = DMatrix::zeros(len, n);
    for (i, c) in cols.iter().enumerate() {
        data.set_column(i, &(c - &mean));
    }
    let max_dim = (n - 1).min(len);
    let dim = if dim > max_dim {
        log::warn!("shape dimension truncated from {dim} to {max_dim} ({n} instances)");
        max_dim
    } else {
        dim
    };
    // decompose the wide transpose: on this nearly rank-deficient input the
    // tall-matrix SVD loses about a percent of accuracy
    let svd = data.transpose().svd(false, true);
    let v_t = svd.v_t.expect("v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut basis = DMatrix::zeros(len, dim);
    for (k, &o) in order.iter().take(dim).enumerate() {
        let mut col = v_t.row(o).transpose();
        // deterministic sign: largest-magnitude entry positive
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col = -col;
        }
        basis.set_column(k, &col);
    }
    let coeffs = basis.transpose() * &data;
    let bounds = (0..dim).map(|k| coeffs.row(k).iter().fold(0.0f64, |m, v| m.max(v.abs()))).collect();
    let std_devs = (0..dim).map(|k| (coeffs.row(k).norm_squared() / (n - 1) as f64).sqrt()).collect();
    Ok(ShapeSpace {
        template,
        mean,
        basis,
        bounds,
        std_devs,
        reference_mesh,
    })
}

/// `(γ(s), b(s))`
pub fn evaluate_shape(space: &ShapeSpace, s: &[f64]) -> Result<ShapeInstance> {
    space.evaluate(s)
}
