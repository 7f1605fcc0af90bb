//! Kossakowski matrix validation, its real/imaginary split, and the rotation
//! that brings the antisymmetric part into canonical form.

use nalgebra::{DMatrix, Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    antisymmetric_from_dual, c, dual_vector, hermitian_min_eigenvalue, symmetrize3, C64,
};
use crate::macroflow::BlochTriple;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = -1e-10;

/// JSON form of a Kossakowski matrix: real and imaginary parts row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KossakowskiInput {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl KossakowskiInput {
    pub fn to_matrix(&self) -> Result<DMatrix<C64>> {
        let n = self.dim;
        let shape_ok = self.re.len() == n
            && self.im.len() == n
            && self.re.iter().chain(&self.im).all(|r| r.len() == n);
        if !shape_ok {
            return Err(Error::Config(format!(
                "kossakowski re/im must both be {n}x{n}"
            )));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| c(self.re[i][j], self.im[i][j])))
    }

    pub fn from_spec(spec: &KossakowskiSpec) -> Self {
        let n = spec.dim;
        Self {
            dim: n,
            re: (0..n)
                .map(|i| (0..n).map(|j| spec.d[(i, j)].re).collect())
                .collect(),
            im: (0..n)
                .map(|i| (0..n).map(|j| spec.d[(i, j)].im).collect())
                .collect(),
        }
    }
}

/// A validated positive semi-definite Kossakowski matrix `D = A + iB`.
#[derive(Clone, Debug)]
pub struct KossakowskiSpec {
    pub dim: usize,
    pub d: DMatrix<C64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub min_eigenvalue: f64,
}

impl KossakowskiSpec {
    /// Real part embedded in the 3x3 spin frame (zero third row/column when
    /// `dim == 2`).
    pub fn a3(&self) -> Matrix3<f64> {
        embed3(&self.a)
    }

    pub fn b3(&self) -> Matrix3<f64> {
        embed3(&self.b)
    }

    pub fn d3(&self) -> Matrix3<C64> {
        let mut out = Matrix3::zeros();
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(i, j)] = self.d[(i, j)];
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.d.iter().all(|z| *z == c(0.0, 0.0))
    }

    /// Builds the validated matrix directly from a real symmetric and a real antisymmetric
    /// 3x3 part.
    pub fn from_parts(a: &Matrix3<f64>, b: &Matrix3<f64>) -> Result<Self> {
        let d = DMatrix::from_fn(3, 3, |i, j| c(a[(i, j)], b[(i, j)]));
        validate_kossakowski(&d)
    }
}

fn embed3(m: &DMatrix<f64>) -> Matrix3<f64> {
    let mut out = Matrix3::zeros();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[(i, j)] = m[(i, j)];
        }
    }
    out
}

pub fn validate_kossakowski(d_raw: &DMatrix<C64>) -> Result<KossakowskiSpec> {
    let (r, cdim) = d_raw.shape();
    if r != cdim || !(r == 2 || r == 3) {
        return Err(Error::BadDimension(r, cdim));
    }
    if d_raw.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let defect = d_raw
        .iter()
        .zip(d_raw.adjoint().iter())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).norm()));
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    let d = (d_raw + d_raw.adjoint()) * c(0.5, 0.0);
    let min_eigenvalue = hermitian_min_eigenvalue(&d);
    if min_eigenvalue < PSD_TOL {
        return Err(Error::NotPositive(min_eigenvalue));
    }
    // For Hermitian D the transpose is the conjugate, so (D + D^T)/2 = Re D and
    // (D - D^T)/(2i) = Im D.
    let a = d.map(|z| z.re);
    let b = d.map(|z| z.im);
    Ok(KossakowskiSpec {
        dim: r,
        d,
        a,
        b,
        min_eigenvalue,
    })
}

/// Rotated spin frame in which `B` only has the (1,2) entry `lambda`.
#[derive(Clone, Debug)]
pub struct CanonicalFrame {
    pub rotation: Matrix3<f64>,
    pub lambda: f64,
    pub a_rot: Matrix3<f64>,
    pub omega_rot: BlochTriple,
}

impl CanonicalFrame {
    /// `R B R^T`, canonical up to rounding.
    pub fn rotate_antisymmetric(&self, b: &Matrix3<f64>) -> Matrix3<f64> {
        self.rotation * b * self.rotation.transpose()
    }

    pub fn canonical_b(&self) -> Matrix3<f64> {
        antisymmetric_from_dual(&Vector3::new(0.0, 0.0, self.lambda))
    }

    pub fn to_lab(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * v
    }
}

/// Proper rotation taking the direction of `beta` onto `+e3`.
pub fn rotation_onto_e3(beta: &Vector3<f64>) -> Matrix3<f64> {
    let norm = beta.norm();
    if norm == 0.0 {
        return Matrix3::identity();
    }
    let u = beta / norm;
    let e3 = Vector3::z();
    let axis = u.cross(&e3);
    let s = axis.norm();
    let cos = u.dot(&e3);
    if s < 1e-15 {
        return if cos > 0.0 {
            Matrix3::identity()
        } else {
            Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0))
        };
    }
    let angle = s.atan2(cos);
    Rotation3::from_axis_angle(&Unit::new_unchecked(axis / s), angle).into_inner()
}

pub fn canonical_frame(spec: &KossakowskiSpec, omega0: &BlochTriple) -> CanonicalFrame {
    let b = spec.b3();
    let beta = dual_vector(&b);
    let rotation = rotation_onto_e3(&beta);
    let a = spec.a3();
    CanonicalFrame {
        rotation,
        lambda: beta.norm(),
        a_rot: symmetrize3(&(rotation * a * rotation.transpose())),
        omega_rot: BlochTriple::from_vector_unchecked(rotation * omega0.vector()),
    }
}

/// Transports a covariance matrix into the canonical frame.
pub fn rotate_scenario(frame: &CanonicalFrame, sigma0: &Matrix3<f64>) -> Matrix3<f64> {
    symmetrize3(&(frame.rotation * sigma0 * frame.rotation.transpose()))
}
