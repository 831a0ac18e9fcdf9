use nalgebra::{Matrix2x3, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};

/// Calibrated pinhole camera. Pixel centres sit at integer coordinates,
/// `u` grows right and `v` grows down; the camera looks along its +z axis.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraModel {
    pub name: String,
    pub intrinsics: Matrix3<f64>,
    /// World-to-camera rotation.
    pub rotation: Matrix3<f64>,
    /// Camera centre in world coordinates.
    pub center: Vector3<f64>,
    pub width: usize,
    pub height: usize,
    k_inv: Matrix3<f64>,
}

/// Pixel ray: origin, unit direction and its derivatives along u and v.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vector3<f64>,
    pub dir: Vector3<f64>,
    pub d_dir: [Vector3<f64>; 2],
}

impl CameraModel {
    pub fn new(
        name: impl Into<String>,
        intrinsics: Matrix3<f64>,
        rotation: Matrix3<f64>,
        center: Vector3<f64>,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let name = name.into();
        let k = &intrinsics;
        if k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 || k[(2, 2)] != 1.0 {
            return Err(Error::invalid(format!(
                "camera '{name}': K must be upper triangular with K[2][2] = 1"
            )));
        }
        if !(k[(0, 0)] > 0.0 && k[(1, 1)] > 0.0) {
            return Err(Error::invalid(format!("camera '{name}': focal lengths must be positive")));
        }
        let orth = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if !(orth < 1e-9) || !((rotation.determinant() - 1.0).abs() < 1e-9) {
            return Err(Error::invalid(format!("camera '{name}': R is not a proper rotation")));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("camera '{name}': empty image size")));
        }
        if !center.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid(format!("camera '{name}': non-finite centre")));
        }
        let k_inv = intrinsics.try_inverse().expect("upper triangular with positive diagonal");
        Ok(Self {
            name,
            intrinsics,
            rotation,
            center,
            width,
            height,
            k_inv,
        })
    }

    /// Camera at `eye` looking at `target`, `up` roughly the world up
    /// direction, focal length in pixels, principal point at the image centre.
    pub fn look_at(
        name: impl Into<String>,
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        focal: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let f = (target - eye).normalize();
        let r = f.cross(&up);
        if r.norm() < 1e-9 {
            return Err(Error::invalid("look_at: up is parallel to the viewing direction"));
        }
        let r = r.normalize();
        let d = f.cross(&r);
        let rotation = Matrix3::from_rows(&[r.transpose(), d.transpose(), f.transpose()]);
        let k = Matrix3::new(
            focal,
            0.0,
            (width as f64 - 1.0) / 2.0,
            0.0,
            focal,
            (height as f64 - 1.0) / 2.0,
            0.0,
            0.0,
            1.0,
        );
        Self::new(name, k, rotation, eye, width, height)
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    /// Pixel coordinates of a world point, `None` if it is not in front.
    pub fn project(&self, x: &Vector3<f64>) -> Option<Vector2<f64>> {
        let c = self.rotation * (x - self.center);
        if c.z <= 0.0 {
            return None;
        }
        let p = self.intrinsics * (c / c.z);
        Some(Vector2::new(p.x, p.y))
    }

    /// Derivative of [`Self::project`] w.r.t. the world point.
    pub fn project_jacobian(&self, x: &Vector3<f64>) -> Option<Matrix2x3<f64>> {
        let c = self.rotation * (x - self.center);
        if c.z <= 0.0 {
            return None;
        }
        let dn = Matrix2x3::new(1.0 / c.z, 0.0, -c.x / (c.z * c.z), 0.0, 1.0 / c.z, -c.y / (c.z * c.z));
        let k2 = self.intrinsics.fixed_view::<2, 2>(0, 0).into_owned();
        Some(k2 * dn * self.rotation)
    }

    /// Viewing direction of the optical axis in world coordinates.
    pub fn axis(&self) -> Vector3<f64> {
        self.rotation.row(2).transpose()
    }
}

/// Ray through pixel `(u, v)` with the analytic derivative of its direction.
pub fn pixel_ray(camera: &CameraModel, u: f64, v: f64) -> Ray {
    let m = camera.rotation.transpose() * camera.k_inv;
    let d = m * Vector3::new(u, v, 1.0);
    let len = d.norm();
    let n = d / len;
    let proj = |dd: Vector3<f64>| (dd - n * n.dot(&dd)) / len;
    Ray {
        origin: camera.center,
        dir: n,
        d_dir: [proj(m.column(0).into_owned()), proj(m.column(1).into_owned())],
    }
}
