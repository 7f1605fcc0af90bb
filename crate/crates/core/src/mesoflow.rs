//! Gaussian fluctuation dynamics: covariance flow along the macroscopic
//! trajectory, the two-mode channel in the stationary frame, and related
//! diagnostics.

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_min_eigenvalue, levi_civita, symmetrize3, C64};
use crate::macroflow::{macro_rhs, BlochTriple, MacroTrajectory};
use crate::ode::{self, OdeOptions};

pub const SYMMETRY_TOL: f64 = 1e-12;

/// Largest deviation tolerated between the omega recomputed inside
/// [`integrate_covariance`] and the supplied macro trajectory.
pub const TRAJECTORY_TOL: f64 = 1e-6;

/// Two-mode symplectic form `[[0, 1], [-1, 0]]` in the `q, p` frame.
pub fn reduced_symplectic() -> Matrix2<f64> {
    Matrix2::new(0.0, 1.0, -1.0, 0.0)
}

/// Commutator matrix of the three fluctuation modes at the triple `omega`.
pub fn symplectic_form(omega: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::from_fn(|m, n| (0..3).map(|g| levi_civita(m, n, g) * omega[g]).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovFrame {
    Full3,
    ReducedQP,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceState {
    pub sigma: DMatrix<f64>,
    pub t: f64,
    pub frame: CovFrame,
}

impl CovarianceState {
    pub fn full(sigma: &Matrix3<f64>, t: f64) -> Result<Self> {
        Self::checked(DMatrix::from_column_slice(3, 3, sigma.as_slice()), t, CovFrame::Full3)
    }

    pub fn reduced(sigma: &Matrix2<f64>, t: f64) -> Result<Self> {
        Self::checked(
            DMatrix::from_column_slice(2, 2, sigma.as_slice()),
            t,
            CovFrame::ReducedQP,
        )
    }

    fn checked(sigma: DMatrix<f64>, t: f64, frame: CovFrame) -> Result<Self> {
        if sigma.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let asym = (&sigma - sigma.transpose()).amax();
        if asym > SYMMETRY_TOL {
            return Err(Error::NotHermitian(asym));
        }
        Ok(Self { sigma, t, frame })
    }

    pub fn full3(&self) -> Result<Matrix3<f64>> {
        match self.frame {
            CovFrame::Full3 => Ok(Matrix3::from_column_slice(self.sigma.as_slice())),
            CovFrame::ReducedQP => Err(Error::FrameMismatch("expected a 3x3 covariance")),
        }
    }

    pub fn reduced_qp(&self) -> Result<Matrix2<f64>> {
        match self.frame {
            CovFrame::ReducedQP => Ok(Matrix2::from_column_slice(self.sigma.as_slice())),
            CovFrame::Full3 => Err(Error::FrameMismatch("expected a 2x2 q,p covariance")),
        }
    }
}

/// Matrices entering `dSigma/dt = F Sigma + Sigma F^T + G`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowMatrices {
    pub sigma: Matrix3<f64>,
    pub c: Matrix3<f64>,
    pub f: Matrix3<f64>,
    pub g: Matrix3<f64>,
}

pub fn build_flow_matrices(omega: &Vector3<f64>, a: &Matrix3<f64>, b: &Matrix3<f64>) -> FlowMatrices {
    let sigma = symplectic_form(omega);
    let bw = b * omega;
    let c = Matrix3::from_fn(|m, n| (0..3).map(|k| levi_civita(m, k, n) * bw[k]).sum());
    let f = sigma * b + c;
    let g = symmetrize3(&(sigma * a * sigma.transpose()));
    FlowMatrices { sigma, c, f, g }
}

/// `q = F(s1)/sqrt|xi|`, `p = sgn(xi) F(s2)/sqrt|xi|` applied to the (1,2)
/// block of a mode covariance.
pub fn to_qp(block: &Matrix2<f64>, xi: f64) -> Result<Matrix2<f64>> {
    if xi.abs() < 1e-14 {
        return Err(Error::DegenerateLength(xi));
    }
    let s = xi.signum();
    let k = xi.abs();
    Ok(Matrix2::new(
        block[(0, 0)] / k,
        s * block[(0, 1)] / k,
        s * block[(1, 0)] / k,
        block[(1, 1)] / k,
    ))
}

/// Inverse of [`to_qp`].
pub fn from_qp(qp: &Matrix2<f64>, xi: f64) -> Result<Matrix2<f64>> {
    if xi.abs() < 1e-14 {
        return Err(Error::DegenerateLength(xi));
    }
    let s = xi.signum();
    let k = xi.abs();
    Ok(Matrix2::new(
        qp[(0, 0)] * k,
        s * qp[(0, 1)] * k,
        s * qp[(1, 0)] * k,
        qp[(1, 1)] * k,
    ))
}

pub fn upper_block(m: &Matrix3<f64>) -> Matrix2<f64> {
    m.fixed_view::<2, 2>(0, 0).into_owned()
}

/// Diffusion matrix of the `q, p` mode for canonical-frame `A` and stationary
/// triple `(0, 0, xi)`.
pub fn reduced_a2(a: &Matrix3<f64>, xi: f64) -> Matrix2<f64> {
    let k = xi.abs();
    Matrix2::new(
        a[(0, 0)] * k,
        a[(0, 1)] * xi,
        a[(0, 1)] * xi,
        a[(1, 1)] * k,
    )
}

/// `(1 - exp(-2bt)) / (2b)`, continuous at `b = 0`.
fn relax_weight(b: f64, t: f64) -> f64 {
    if b == 0.0 {
        t
    } else {
        -(-2.0 * b * t).exp_m1() / (2.0 * b)
    }
}

fn sas(a2: &Matrix2<f64>) -> Matrix2<f64> {
    let s = reduced_symplectic();
    let m = s * a2 * s.transpose();
    (m + m.transpose()) * 0.5
}

pub fn two_mode_closed_form(sigma0: &Matrix2<f64>, a2: &Matrix2<f64>, b: f64, t: f64) -> Matrix2<f64> {
    sigma0 * (-2.0 * b * t).exp() + sas(a2) * relax_weight(b, t)
}

pub fn asymptotic_covariance(a2: &Matrix2<f64>, b: f64) -> Result<Matrix2<f64>> {
    if !(b > 0.0) {
        return Err(Error::NoStationaryState(b));
    }
    let f = 1.0 / (2.0 * b);
    Ok(Matrix2::new(
        a2[(1, 1)] * f,
        -a2[(0, 1)] * f,
        -a2[(1, 0)] * f,
        a2[(0, 0)] * f,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeylChannel {
    pub t: f64,
    pub r_t: [f64; 2],
    #[serde(rename = "Y")]
    pub y: [[f64; 2]; 2],
}

pub fn weyl_channel(r: &Vector2<f64>, a2: &Matrix2<f64>, b: f64, t: f64) -> WeylChannel {
    let rt = r * (-b * t).exp();
    let y = sas(a2) * relax_weight(b, t);
    WeylChannel {
        t,
        r_t: [rt[0], rt[1]],
        y: [[y[(0, 0)], y[(0, 1)]], [y[(1, 0)], y[(1, 1)]]],
    }
}

impl WeylChannel {
    pub fn y_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.y[0][0], self.y[0][1], self.y[1][0], self.y[1][1])
    }

    /// Covariance action `Sigma -> exp(-2bt) Sigma + Y` given the contraction
    /// factor of the same channel.
    pub fn act(&self, sigma: &Matrix2<f64>, b: f64) -> Matrix2<f64> {
        sigma * (-2.0 * b * self.t).exp() + self.y_matrix()
    }
}

/// Asymptotic variance of the decoupled third mode.
pub fn third_mode_variance(omega0: &BlochTriple, sigma0: &Matrix3<f64>) -> Result<f64> {
    let w = omega0.vector();
    let xi2 = w.norm_squared();
    if xi2.sqrt() < 1e-14 {
        return Err(Error::DegenerateLength(xi2.sqrt()));
    }
    Ok(w.dot(&(sigma0 * w)) / xi2)
}

/// Gaussian characteristic function `exp(-(r, Sigma r)/2)`.
pub fn gaussian_char(state: &CovarianceState, r: &[f64]) -> Result<f64> {
    let n = state.sigma.nrows();
    if r.len() != n {
        return Err(Error::BadDimension(r.len(), n));
    }
    let rv = nalgebra::DVector::from_column_slice(r);
    Ok((-0.5 * rv.dot(&(&state.sigma * &rv))).exp())
}

/// Product-state covariance `I/4 - omega omega^T`.
pub fn product_covariance(omega: &BlochTriple) -> Matrix3<f64> {
    let w = omega.vector();
    Matrix3::identity() * 0.25 - w * w.transpose()
}

/// Smallest eigenvalue of `Sigma + (i/2) sigma`; nonnegative for a bona fide
/// Gaussian state.
pub fn admissibility_margin(cov: &DMatrix<f64>, symp: &DMatrix<f64>) -> f64 {
    let m = DMatrix::<C64>::from_fn(cov.nrows(), cov.ncols(), |i, j| {
        c(cov[(i, j)], 0.5 * symp[(i, j)])
    });
    hermitian_min_eigenvalue(&m)
}

pub fn admissibility_margin_qp(cov: &Matrix2<f64>) -> f64 {
    let s = reduced_symplectic();
    admissibility_margin(
        &DMatrix::from_column_slice(2, 2, cov.as_slice()),
        &DMatrix::from_column_slice(2, 2, s.as_slice()),
    )
}

/// The two readings of the asymptotic `Sigma_12` in mode coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sigma12Candidates {
    /// `-A12 / (2|b|)`
    pub unscaled: f64,
    /// `-xi^2 A12 / (2b)`: the mode-coordinate entry implied by the q,p
    /// asymptotic covariance.
    pub xi_scaled: f64,
}

pub fn sigma12_candidates(a: &Matrix3<f64>, lambda: f64, xi: f64) -> Sigma12Candidates {
    let b = lambda * xi;
    Sigma12Candidates {
        unscaled: -a[(0, 1)] / (2.0 * b.abs()),
        xi_scaled: -xi * xi * a[(0, 1)] / (2.0 * b),
    }
}

/// Stationary (1,2)-block of the mode covariance at `(0, 0, xi)` in the
/// canonical frame.
pub fn asymptotic_mode_block(a: &Matrix3<f64>, lambda: f64, xi: f64) -> Result<Matrix2<f64>> {
    let qp = asymptotic_covariance(&reduced_a2(a, xi), lambda * xi)?;
    from_qp(&qp, xi)
}

fn sym_to_vec(m: &Matrix3<f64>, out: &mut [f64]) {
    out[0] = m[(0, 0)];
    out[1] = m[(0, 1)];
    out[2] = m[(0, 2)];
    out[3] = m[(1, 1)];
    out[4] = m[(1, 2)];
    out[5] = m[(2, 2)];
}

fn sym_from_vec(v: &[f64]) -> Matrix3<f64> {
    Matrix3::new(v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5])
}

/// Joint integration of the triple, a drift propagator `X` and the covariance
/// `S` along `grid`. Returns `(omega, X, S)` at every grid time.
fn integrate_joint(
    omega0: &Vector3<f64>,
    x0: &Matrix3<f64>,
    s0: &Matrix3<f64>,
    a: &Matrix3<f64>,
    b: &Matrix3<f64>,
    grid: &[f64],
    tol: f64,
) -> Result<Vec<(Vector3<f64>, Matrix3<f64>, Matrix3<f64>)>> {
    let mut y0 = vec![0.0; 18];
    y0[..3].copy_from_slice(omega0.as_slice());
    y0[3..12].copy_from_slice(x0.as_slice());
    sym_to_vec(s0, &mut y0[12..]);
    let (a, b) = (*a, *b);
    let sol = ode::integrate(
        |_, y: &[f64], dy: &mut [f64]| {
            let w = Vector3::new(y[0], y[1], y[2]);
            let fm = build_flow_matrices(&w, &a, &b);
            dy[..3].copy_from_slice(macro_rhs(&w, &b).as_slice());
            let x = Matrix3::from_column_slice(&y[3..12]);
            dy[3..12].copy_from_slice((fm.f * x).as_slice());
            let s = sym_from_vec(&y[12..]);
            let fs = fm.f * s;
            sym_to_vec(&(fs + fs.transpose() + fm.g), &mut dy[12..]);
        },
        &y0,
        grid,
        &OdeOptions::with_tol(tol),
    )?;
    Ok(sol
        .into_iter()
        .map(|y| {
            (
                Vector3::new(y[0], y[1], y[2]),
                Matrix3::from_column_slice(&y[3..12]),
                sym_from_vec(&y[12..]),
            )
        })
        .collect())
}

/// Integrates the covariance flow along `traj`, starting from the
/// trajectory's initial triple at `traj.times[0]` and sampling at
/// `traj.times`. The state-dependent matrices are evaluated on the triple
/// integrated jointly with the covariance, which is checked against `traj`.
pub fn integrate_covariance(
    sigma0: &CovarianceState,
    traj: &MacroTrajectory,
    a: &Matrix3<f64>,
    b: &Matrix3<f64>,
    tol: f64,
) -> Result<Vec<CovarianceState>> {
    let s0 = sigma0.full3()?;
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let sol = integrate_joint(
        &traj.initial().vector(),
        &Matrix3::identity(),
        &s0,
        a,
        b,
        &traj.times,
        tol,
    )?;
    let mut out = Vec::with_capacity(sol.len());
    for ((t, state), (w, _, s)) in traj.times.iter().zip(&traj.states).zip(sol) {
        let dev = (w - state.vector()).amax();
        if dev > TRAJECTORY_TOL {
            return Err(Error::TrajectoryMismatch(dev));
        }
        out.push(CovarianceState {
            sigma: DMatrix::from_column_slice(3, 3, s.as_slice()),
            t: *t,
            frame: CovFrame::Full3,
        });
    }
    Ok(out)
}

/// Affine covariance map between two times along one macro trajectory:
/// `Sigma(t) = X Sigma(t0) X^T + Y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelPropagator {
    pub t0: f64,
    pub t: f64,
    pub x: Matrix3<f64>,
    pub y: Matrix3<f64>,
}

impl ChannelPropagator {
    pub fn apply(&self, sigma: &Matrix3<f64>) -> Matrix3<f64> {
        symmetrize3(&(self.x * sigma * self.x.transpose() + self.y))
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &ChannelPropagator) -> ChannelPropagator {
        ChannelPropagator {
            t0: first.t0,
            t: self.t,
            x: self.x * first.x,
            y: symmetrize3(&(self.x * first.y * self.x.transpose() + self.y)),
        }
    }
}

/// Two-time propagator along the macro trajectory that starts at `omega0`
/// at time 0.
pub fn propagator(
    omega0: &BlochTriple,
    a: &Matrix3<f64>,
    b: &Matrix3<f64>,
    t_from: f64,
    t_to: f64,
    tol: f64,
) -> Result<ChannelPropagator> {
    if !(t_from >= 0.0 && t_to >= t_from) {
        return Err(Error::BadGrid("propagator needs 0 <= t_from <= t_to"));
    }
    let mut w = omega0.vector();
    if t_from > 0.0 {
        let tr = crate::macroflow::integrate_macro(omega0, b, &[0.0, t_from], tol)?;
        w = tr.states[1].vector();
    }
    if t_to == t_from {
        return Ok(ChannelPropagator {
            t0: t_from,
            t: t_to,
            x: Matrix3::identity(),
            y: Matrix3::zeros(),
        });
    }
    let sol = integrate_joint(
        &w,
        &Matrix3::identity(),
        &Matrix3::zeros(),
        a,
        b,
        &[t_from, t_to],
        tol,
    )?;
    let (_, x, y) = sol[1];
    Ok(ChannelPropagator {
        t0: t_from,
        t: t_to,
        x,
        y,
    })
}

/// Map `Phi_tau` obtained by integrating from the original triple `omega0`
/// for an elapsed time `tau`.
pub fn elapsed_map(
    omega0: &BlochTriple,
    a: &Matrix3<f64>,
    b: &Matrix3<f64>,
    tau: f64,
    tol: f64,
) -> Result<ChannelPropagator> {
    propagator(omega0, a, b, 0.0, tau, tol)
}

pub fn composition_probes(omega0: &BlochTriple) -> [Matrix3<f64>; 3] {
    [
        Matrix3::identity() * 0.25,
        product_covariance(omega0),
        Matrix3::from_diagonal(&Vector3::new(0.3, 0.2, 0.25)),
    ]
}

/// Distance between `Phi_{t-t0}` and `Phi_{t-s} o Phi_{s-t0}` over the probe
/// covariances, with every `Phi` started from `omega0`.
pub fn composition_gap(
    omega0: &BlochTriple,
    a: &Matrix3<f64>,
    b: &Matrix3<f64>,
    t0: f64,
    s: f64,
    t: f64,
    tol: f64,
) -> Result<f64> {
    if !(t0 <= s && s <= t) {
        return Err(Error::BadGrid("composition gap needs t0 <= s <= t"));
    }
    let direct = elapsed_map(omega0, a, b, t - t0, tol)?;
    let first = elapsed_map(omega0, a, b, s - t0, tol)?;
    let second = elapsed_map(omega0, a, b, t - s, tol)?;
    Ok(composition_probes(omega0)
        .iter()
        .map(|p| (direct.apply(p) - second.apply(&first.apply(p))).norm())
        .fold(0.0, f64::max))
}

/// Cocycle defect `max(|X_{t,t0} - X_{t,s} X_{s,t0}|, |Y_{t,t0} - ...|)` of the
/// two-time propagators along the fixed trajectory from `omega0`.
pub fn cocycle_defect(
    omega0: &BlochTriple,
    a: &Matrix3<f64>,
    b: &Matrix3<f64>,
    t0: f64,
    s: f64,
    t: f64,
    tol: f64,
) -> Result<f64> {
    let whole = propagator(omega0, a, b, t0, t, tol)?;
    let first = propagator(omega0, a, b, t0, s, tol)?;
    let second = propagator(omega0, a, b, s, t, tol)?;
    let comp = second.compose(&first);
    Ok((whole.x - comp.x).amax().max((whole.y - comp.y).amax()))
}
