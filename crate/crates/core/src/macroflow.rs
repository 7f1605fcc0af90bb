//! Mean magnetization dynamics: the quadratic ODE for the macroscopic triple,
//! its tanh/sech closed form in the canonical frame, and fixed-point
//! classification.

use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, dual_vector, spin_half, C64};
use crate::ode::{self, OdeOptions, Segment};

pub const BLOCH_TOL: f64 = 1e-12;

/// Expectation values `omega_mu = <s_mu>` of a single spin-1/2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochTriple(Vector3<f64>);

impl BlochTriple {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::from_vector(Vector3::new(x, y, z))
    }

    pub fn from_vector(v: Vector3<f64>) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        if v.norm() > 0.5 + BLOCH_TOL {
            return Err(Error::InvalidBloch([v[0], v[1], v[2]]));
        }
        Ok(Self(v))
    }

    /// For values produced by length-preserving dynamics, where the bound holds
    /// up to integration error.
    pub(crate) fn from_vector_unchecked(v: Vector3<f64>) -> Self {
        Self(v)
    }

    pub fn vector(&self) -> Vector3<f64> {
        self.0
    }

    pub fn length(&self) -> f64 {
        self.0.norm()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.0[0], self.0[1], self.0[2]]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
    Frozen,
}

/// Time-sampled macroscopic triple together with the accepted integrator
/// steps for dense evaluation.
#[derive(Clone, Debug)]
pub struct MacroTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<BlochTriple>,
    pub xi: f64,
    pub stability: Stability,
    segments: Vec<Segment<f64>>,
}

impl MacroTrajectory {
    /// Dense evaluation by cubic Hermite interpolation on the accepted steps.
    pub fn omega_at(&self, t: f64) -> Option<Vector3<f64>> {
        if let Ok(i) = self.times.binary_search_by(|x| x.total_cmp(&t)) {
            return Some(self.states[i].vector());
        }
        let first = self.segments.first()?;
        let last = self.segments.last()?;
        if t < first.t0 || t > last.t1 {
            return None;
        }
        let idx = self.segments.partition_point(|s| s.t1 < t);
        let seg = &self.segments[idx.min(self.segments.len() - 1)];
        let y = seg.eval(t);
        Some(Vector3::new(y[0], y[1], y[2]))
    }

    pub fn initial(&self) -> BlochTriple {
        self.states[0]
    }

    pub fn max_length_drift(&self) -> f64 {
        self.states
            .iter()
            .map(|s| (s.length() - self.xi).abs())
            .fold(0.0, f64::max)
    }
}

/// Right-hand side of the macroscopic ODE for a general antisymmetric `B`.
pub fn macro_rhs(omega: &Vector3<f64>, b: &Matrix3<f64>) -> Vector3<f64> {
    let (w1, w2, w3) = (omega[0], omega[1], omega[2]);
    let (b12, b13, b23) = (b[(0, 1)], b[(0, 2)], b[(1, 2)]);
    Vector3::new(
        -b12 * w1 * w3 + b13 * w1 * w2 + b23 * (w2 * w2 + w3 * w3),
        -b12 * w2 * w3 - b23 * w1 * w2 - b13 * (w1 * w1 + w3 * w3),
        b13 * w2 * w3 - b23 * w1 * w3 + b12 * (w1 * w1 + w2 * w2),
    )
}

/// Jacobian of [`macro_rhs`] with respect to the triple.
pub fn macro_jacobian(omega: &Vector3<f64>, b: &Matrix3<f64>) -> Matrix3<f64> {
    let (w1, w2, w3) = (omega[0], omega[1], omega[2]);
    let (b12, b13, b23) = (b[(0, 1)], b[(0, 2)], b[(1, 2)]);
    Matrix3::new(
        -b12 * w3 + b13 * w2,
        b13 * w1 + 2.0 * b23 * w2,
        -b12 * w1 + 2.0 * b23 * w3,
        -b23 * w2 - 2.0 * b13 * w1,
        -b12 * w3 - b23 * w1,
        -b12 * w2 - 2.0 * b13 * w3,
        -b23 * w3 + 2.0 * b12 * w1,
        b13 * w3 + 2.0 * b12 * w2,
        b13 * w2 - b23 * w1,
    )
}

/// Single-site Hamiltonian `H = sum_{mu nu} B_{mu nu} omega_nu s_mu` that the
/// dissipative generator reduces to on strictly local operators.
pub fn emergent_hamiltonian(omega: &Vector3<f64>, b: &Matrix3<f64>) -> Matrix2<C64> {
    let s = spin_half();
    let mut h = Matrix2::zeros();
    for mu in 0..3 {
        let coeff: f64 = (0..3).map(|nu| b[(mu, nu)] * omega[nu]).sum();
        h += s[mu] * c(coeff, 0.0);
    }
    h
}

/// `d/dt <s_alpha>` for one site evolving under `i[H, .]` with `H` from
/// [`emergent_hamiltonian`].
pub fn local_expectation_rate(omega: &Vector3<f64>, b: &Matrix3<f64>) -> Vector3<f64> {
    let s = spin_half();
    let rho = Matrix2::identity() * c(0.5, 0.0)
        + (s[0] * c(omega[0], 0.0) + s[1] * c(omega[1], 0.0) + s[2] * c(omega[2], 0.0))
            * c(2.0, 0.0);
    let h = emergent_hamiltonian(omega, b);
    Vector3::from_fn(|alpha, _| {
        let comm = h * s[alpha] - s[alpha] * h;
        (rho * comm * c(0.0, 1.0)).trace().re
    })
}

/// Closed-form solution in the canonical frame (`B` has only the (1,2) entry
/// `lambda`).
pub fn macro_closed_form(omega0: &BlochTriple, lambda: f64, t: f64) -> Result<BlochTriple> {
    let w = omega0.vector();
    let xi = w.norm();
    if xi < 1e-14 {
        return Err(Error::DegenerateLength(xi));
    }
    let ratio3 = w[2] / xi;
    if lambda == 0.0 || (w[0] == 0.0 && w[1] == 0.0) || ratio3.abs() >= 1.0 {
        return Ok(*omega0);
    }
    let x0 = ratio3.atanh();
    let x1 = xi * lambda * t + x0;
    let w3 = xi * x1.tanh();
    // cosh(x0)/cosh(x1) without overflow
    let damp = (x0.abs() - x1.abs()).exp() * (1.0 + (-2.0 * x0.abs()).exp())
        / (1.0 + (-2.0 * x1.abs()).exp());
    Ok(BlochTriple::from_vector_unchecked(Vector3::new(
        w[0] * damp,
        w[1] * damp,
        w3,
    )))
}

/// The constant `c` in `omega3(t) = xi tanh(xi (lambda t + c))`.
pub fn tanh_offset(omega0: &BlochTriple) -> Result<f64> {
    let xi = omega0.length();
    if xi < 1e-14 {
        return Err(Error::DegenerateLength(xi));
    }
    Ok((omega0.vector()[2] / xi).atanh() / xi)
}

pub fn integrate_macro(
    omega0: &BlochTriple,
    b: &Matrix3<f64>,
    t_grid: &[f64],
    tol: f64,
) -> Result<MacroTrajectory> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let y0 = omega0.as_array();
    let b = *b;
    let mut segments = Vec::new();
    let sol = ode::integrate_observed(
        |_, y: &[f64], dy: &mut [f64]| {
            let r = macro_rhs(&Vector3::new(y[0], y[1], y[2]), &b);
            dy.copy_from_slice(r.as_slice());
        },
        &y0,
        t_grid,
        &OdeOptions::with_tol(tol),
        |s| segments.push(s.clone()),
    )?;
    let states = sol
        .into_iter()
        .map(|y| BlochTriple::from_vector_unchecked(Vector3::new(y[0], y[1], y[2])))
        .collect();
    Ok(MacroTrajectory {
        times: t_grid.to_vec(),
        states,
        xi: omega0.length(),
        stability: trajectory_stability(omega0, &b),
        segments,
    })
}

/// Stable unless the generator vanishes, the triple is zero, or the initial
/// triple sits exactly on the unstable fixed point.
pub fn trajectory_stability(omega0: &BlochTriple, b: &Matrix3<f64>) -> Stability {
    let beta = dual_vector(b);
    let lambda = beta.norm();
    let xi = omega0.length();
    if lambda == 0.0 || xi < 1e-14 {
        return Stability::Frozen;
    }
    let unstable = -beta / lambda * xi;
    if (omega0.vector() - unstable).norm() <= 1e-12 {
        Stability::Unstable
    } else {
        Stability::Stable
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FixedPoints {
    Pair {
        stable: Vector3<f64>,
        unstable: Vector3<f64>,
        /// `lambda * xi` on the stable branch; positive whenever `lambda != 0`.
        b: f64,
    },
    Frozen,
}

pub fn classify_fixed_points(lambda: f64, xi: f64) -> FixedPoints {
    if lambda == 0.0 {
        return FixedPoints::Frozen;
    }
    let xi = xi.abs();
    let (stable, unstable) = if lambda > 0.0 { (xi, -xi) } else { (-xi, xi) };
    FixedPoints::Pair {
        stable: Vector3::new(0.0, 0.0, stable),
        unstable: Vector3::new(0.0, 0.0, unstable),
        b: lambda * stable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::antisymmetric_from_dual;
    use nalgebra::{Rotation3, Unit};
    use proptest::prelude::*;

    fn canonical_b(lambda: f64) -> Matrix3<f64> {
        antisymmetric_from_dual(&Vector3::new(0.0, 0.0, lambda))
    }

    fn grid(t_max: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| t_max * i as f64 / n as f64).collect()
    }

    #[test]
    fn rhs_vanishes_at_fixed_point_and_for_zero_b() {
        let w = Vector3::new(0.0, 0.0, 0.5);
        assert_eq!(macro_rhs(&w, &canonical_b(1.0)), Vector3::zeros());
        let w = Vector3::new(0.1, -0.2, 0.3);
        assert_eq!(macro_rhs(&w, &Matrix3::zeros()), Vector3::zeros());
    }

    #[test]
    fn canonical_rhs_reduces_to_rotating_form() {
        let w = Vector3::new(0.1, -0.2, 0.3);
        let r = macro_rhs(&w, &canonical_b(1.5));
        assert!((r[0] + 1.5 * 0.1 * 0.3).abs() < 1e-15);
        assert!((r[1] - 1.5 * 0.2 * 0.3).abs() < 1e-15);
        assert!((r[2] - 1.5 * (0.01 + 0.04)).abs() < 1e-15);
    }

    #[test]
    fn closed_form_examples() {
        let fp = BlochTriple::new(0.0, 0.0, 0.5).unwrap();
        for t in [0.0, 1.0, 100.0] {
            assert_eq!(macro_closed_form(&fp, 1.0, t).unwrap(), fp);
        }
        let w0 = BlochTriple::new(0.3, 0.0, 0.4).unwrap();
        let late = macro_closed_form(&w0, 1.0, 1e3).unwrap().vector();
        assert!((late - Vector3::new(0.0, 0.0, 0.5)).norm() < 1e-14);
        let one = macro_closed_form(&w0, 1.0, 1.0).unwrap().vector();
        let c = 2.0 * 0.8f64.atanh();
        assert!((tanh_offset(&w0).unwrap() - c).abs() < 1e-14);
        let expect = 0.5 * (0.5 * (1.0 + c)).tanh();
        assert!((one[2] - expect).abs() < 1e-15);
        assert!((one[2] - 0.460_73).abs() < 1e-5);
        assert!((one.norm() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn closed_form_rejects_zero_length() {
        let z = BlochTriple::new(0.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            macro_closed_form(&z, 1.0, 1.0),
            Err(Error::DegenerateLength(_))
        ));
    }

    #[test]
    fn unstable_point_is_an_invariant_solution() {
        let w0 = BlochTriple::new(0.0, 0.0, -0.3).unwrap();
        let b = canonical_b(1.0);
        assert_eq!(trajectory_stability(&w0, &b), Stability::Unstable);
        let tr = integrate_macro(&w0, &b, &grid(10.0, 10), 1e-10).unwrap();
        assert!(tr.states.iter().all(|s| *s == w0));
        assert_eq!(macro_closed_form(&w0, 1.0, 50.0).unwrap(), w0);
    }

    #[test]
    fn fixed_point_trajectory_is_constant() {
        let w0 = BlochTriple::new(0.0, 0.0, 0.4).unwrap();
        let tr = integrate_macro(&w0, &canonical_b(2.0), &grid(5.0, 50), 1e-10).unwrap();
        assert!(tr.states.iter().all(|s| (s.vector() - w0.vector()).norm() < 1e-10));
        assert_eq!(tr.stability, Stability::Stable);
    }

    #[test]
    fn integration_matches_closed_form() {
        let w0 = BlochTriple::new(0.3, 0.0, 0.4).unwrap();
        let g = grid(20.0, 400);
        let tr = integrate_macro(&w0, &canonical_b(1.0), &g, 1e-10).unwrap();
        for (t, s) in g.iter().zip(&tr.states) {
            let exact = macro_closed_form(&w0, 1.0, *t).unwrap().vector();
            assert!((s.vector() - exact).amax() < 1e-8, "t = {t}");
        }
        assert!(tr.max_length_drift() < 1e-8);
        // dense evaluation between grid points
        for t in [0.013, 3.3333, 11.1] {
            let exact = macro_closed_form(&w0, 1.0, t).unwrap().vector();
            assert!((tr.omega_at(t).unwrap() - exact).amax() < 1e-8);
        }
        assert!(tr.omega_at(20.5).is_none());
    }

    #[test]
    fn general_frame_matches_rotated_closed_form() {
        let beta = Vector3::new(0.4, -0.5, 0.6);
        let b = antisymmetric_from_dual(&beta);
        let frame_r = crate::algebra::rotation_onto_e3(&beta);
        let w0 = BlochTriple::new(0.1, 0.35, -0.2).unwrap();
        let w0_rot = BlochTriple::from_vector_unchecked(frame_r * w0.vector());
        let g = grid(15.0, 150);
        let tr = integrate_macro(&w0, &b, &g, 1e-10).unwrap();
        for (t, s) in g.iter().zip(&tr.states) {
            let canon = macro_closed_form(&w0_rot, beta.norm(), *t).unwrap().vector();
            assert!((s.vector() - frame_r.transpose() * canon).amax() < 1e-8);
        }
    }

    #[test]
    fn classify_examples() {
        match classify_fixed_points(1.0, 0.5) {
            FixedPoints::Pair { stable, unstable, b } => {
                assert_eq!(stable, Vector3::new(0.0, 0.0, 0.5));
                assert_eq!(unstable, Vector3::new(0.0, 0.0, -0.5));
                assert_eq!(b, 0.5);
            }
            FixedPoints::Frozen => panic!(),
        }
        match classify_fixed_points(-1.0, 0.5) {
            FixedPoints::Pair { stable, b, .. } => {
                assert_eq!(stable, Vector3::new(0.0, 0.0, -0.5));
                assert!(b > 0.0);
            }
            FixedPoints::Frozen => panic!(),
        }
        assert_eq!(classify_fixed_points(0.0, 0.5), FixedPoints::Frozen);
    }

    #[test]
    fn jacobian_at_stable_point() {
        let (lambda, xi) = (1.3, 0.35);
        let j = macro_jacobian(&Vector3::new(0.0, 0.0, xi), &canonical_b(lambda));
        let b = lambda * xi;
        let mut ev: Vec<f64> = j.complex_eigenvalues().iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] + b).abs() < 1e-10 && (ev[1] + b).abs() < 1e-10 && ev[2].abs() < 1e-10);
        assert!((j * Vector3::z()).norm() < 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let b = antisymmetric_from_dual(&Vector3::new(0.3, -0.7, 1.1));
        let w = Vector3::new(0.2, -0.1, 0.25);
        let j = macro_jacobian(&w, &b);
        let h = 1e-6;
        for k in 0..3 {
            let mut e = Vector3::zeros();
            e[k] = h;
            let fd = (macro_rhs(&(w + e), &b) - macro_rhs(&(w - e), &b)) / (2.0 * h);
            assert!((fd - j.column(k)).amax() < 1e-9);
        }
    }

    #[test]
    fn frozen_and_unstable_classification_of_trajectories() {
        let w0 = BlochTriple::new(0.1, 0.0, 0.0).unwrap();
        assert_eq!(trajectory_stability(&w0, &Matrix3::zeros()), Stability::Frozen);
        let tr = integrate_macro(&w0, &Matrix3::zeros(), &grid(3.0, 3), 1e-10).unwrap();
        assert!(tr.states.iter().all(|s| *s == w0));
    }

    proptest! {
        #[test]
        fn rhs_is_orthogonal_and_equivariant(
            bx in -2.0..2.0f64, by in -2.0..2.0f64, bz in -2.0..2.0f64,
            wx in -0.28..0.28f64, wy in -0.28..0.28f64, wz in -0.28..0.28f64,
            ax in -1.0..1.0f64, ay in -1.0..1.0f64, az in -1.0..1.0f64, ang in 0.0..3.1f64,
        ) {
            let b = antisymmetric_from_dual(&Vector3::new(bx, by, bz));
            let w = Vector3::new(wx, wy, wz);
            let r = macro_rhs(&w, &b);
            prop_assert!(w.dot(&r).abs() < 1e-14);
            let axis = Vector3::new(ax, ay, az);
            prop_assume!(axis.norm() > 1e-3);
            let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), ang).into_inner();
            let lhs = macro_rhs(&(rot * w), &(rot * b * rot.transpose()));
            prop_assert!((lhs - rot * r).amax() < 1e-12);
        }

        #[test]
        fn local_hamiltonian_reproduces_macro_rhs(
            bx in -2.0..2.0f64, by in -2.0..2.0f64, bz in -2.0..2.0f64,
            wx in -0.28..0.28f64, wy in -0.28..0.28f64, wz in -0.28..0.28f64,
        ) {
            let b = antisymmetric_from_dual(&Vector3::new(bx, by, bz));
            let w = Vector3::new(wx, wy, wz);
            prop_assert!((local_expectation_rate(&w, &b) - macro_rhs(&w, &b)).amax() < 1e-14);
        }
    }

    #[test]
    fn length_is_conserved_for_random_generators() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let beta = Vector3::from_fn(|_, _| rng.random_range(-1.5..1.5));
            let mut w = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            w *= rng.random_range(0.05..0.5) / w.norm();
            let w0 = BlochTriple::from_vector(w).unwrap();
            let tr =
                integrate_macro(&w0, &antisymmetric_from_dual(&beta), &grid(20.0, 200), 1e-10)
                    .unwrap();
            assert!(tr.max_length_drift() < 1e-8);
        }
    }
}
