//! Truncated number-basis treatment of the single-mode generator with jump
//! operator `q + i b p`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_min_eigenvalue, C64};
use crate::ode::{self, OdeOptions};

/// Singular values below this fraction of the largest one count as zero.
pub const NULL_TOL: f64 = 1e-10;
/// A candidate is a truncation artifact if more than `ARTIFACT_MASS` of its
/// population sits in the top `ARTIFACT_LEVELS` fraction of levels.
pub const ARTIFACT_MASS: f64 = 0.01;
pub const ARTIFACT_LEVELS: f64 = 0.10;

pub fn annihilation(n_max: usize) -> DMatrix<C64> {
    let d = n_max + 1;
    DMatrix::from_fn(d, d, |i, j| {
        if j == i + 1 {
            c((j as f64).sqrt(), 0.0)
        } else {
            c(0.0, 0.0)
        }
    })
}

/// `(q, p)` built from the truncated ladder operators.
pub fn quadratures(n_max: usize) -> (DMatrix<C64>, DMatrix<C64>) {
    let a = annihilation(n_max);
    let ad = a.adjoint();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let q = (&a + &ad) * c(r, 0.0);
    let p = (&a - &ad) * c(0.0, -r);
    (q, p)
}

#[derive(Clone, Debug)]
pub struct FockLiouvillian {
    pub n_max: usize,
    pub b: f64,
    pub jump: DMatrix<C64>,
    /// Column-stacked superoperator.
    pub l_super: DMatrix<C64>,
}

pub fn build_liouvillian(b: f64, n_max: usize) -> Result<FockLiouvillian> {
    if n_max < 4 {
        return Err(Error::Config(format!("n_max must be at least 4, got {n_max}")));
    }
    if !b.is_finite() {
        return Err(Error::NonFinite);
    }
    let (q, p) = quadratures(n_max);
    let jump = &q + &p * c(0.0, b);
    let jd = jump.adjoint();
    let kk = &jd * &jump;
    let d = n_max + 1;
    let id = DMatrix::<C64>::identity(d, d);
    // vec(A rho B) = (B^T kron A) vec(rho)
    let l_super = jd.transpose().kronecker(&jump)
        - (id.kronecker(&kk) + kk.transpose().kronecker(&id)) * c(0.5, 0.0);
    Ok(FockLiouvillian {
        n_max,
        b,
        jump,
        l_super,
    })
}

impl FockLiouvillian {
    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    /// `K rho K^dagger - {K^dagger K, rho}/2` without forming the
    /// superoperator.
    pub fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let jd = self.jump.adjoint();
        let kk = &jd * &self.jump;
        &self.jump * rho * &jd - (&kk * rho + rho * &kk) * c(0.5, 0.0)
    }

    pub fn apply_super(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let d = self.dim();
        let v = DVector::from_column_slice(rho.as_slice());
        let out = &self.l_super * v;
        DMatrix::from_column_slice(d, d, out.as_slice())
    }
}

#[derive(Clone, Debug)]
pub struct StationaryCandidate {
    pub rho: DMatrix<C64>,
    pub min_eigenvalue: f64,
    pub top_population: f64,
    pub artifact: bool,
}

impl StationaryCandidate {
    pub fn is_physical(&self) -> bool {
        self.min_eigenvalue >= -1e-8
    }

    pub fn accepted(&self) -> bool {
        self.is_physical() && !self.artifact
    }
}

/// Connected components of the sparsity graph of a square matrix.
fn components(m: &DMatrix<C64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for j in 0..n {
        for i in 0..n {
            if m[(i, j)] != c(0.0, 0.0) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

pub fn top_population(rho: &DMatrix<C64>) -> f64 {
    let d = rho.nrows();
    let top = ((d as f64) * ARTIFACT_LEVELS).ceil() as usize;
    let total: f64 = (0..d).map(|n| rho[(n, n)].re).sum();
    let upper: f64 = (d - top..d).map(|n| rho[(n, n)].re.abs()).sum();
    if total.abs() > 0.0 {
        upper / total.abs()
    } else {
        0.0
    }
}

/// Normalizable null vectors of the superoperator, Hermitized and
/// trace-normalized, each tagged with the truncation-artifact flag.
pub fn stationary_states(l: &FockLiouvillian, tol: f64) -> Result<Vec<StationaryCandidate>> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let d = l.dim();
    let comps = components(&l.l_super);
    let mut blocks = Vec::with_capacity(comps.len());
    let mut norm: f64 = 0.0;
    for idx in &comps {
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| l.l_super[(idx[i], idx[j])]);
        let svd = sub.svd(false, true);
        norm = norm.max(svd.singular_values.max());
        blocks.push(svd);
    }
    let threshold = NULL_TOL * norm;
    let mut out = Vec::new();
    for (idx, svd) in comps.iter().zip(blocks) {
        let vt = svd.v_t.expect("requested right singular vectors");
        for (k, sv) in svd.singular_values.iter().enumerate() {
            if *sv > threshold {
                continue;
            }
            let mut rho = DMatrix::<C64>::zeros(d, d);
            for (pos, &flat) in idx.iter().enumerate() {
                rho[(flat % d, flat / d)] = vt[(k, pos)].conj();
            }
            let tr = rho.trace();
            if tr.norm() <= tol {
                continue;
            }
            // fix the arbitrary phase so the trace is real and positive
            rho *= tr.conj() / tr.norm();
            rho = (&rho + rho.adjoint()) * c(0.5, 0.0);
            let tr = rho.trace().re;
            if tr.abs() <= tol {
                continue;
            }
            rho /= c(tr, 0.0);
            let top = top_population(&rho);
            out.push(StationaryCandidate {
                min_eigenvalue: hermitian_min_eigenvalue(&rho),
                top_population: top,
                artifact: top > ARTIFACT_MASS,
                rho,
            });
        }
    }
    Ok(out)
}

/// `<0|rho|0>` for a normalized state.
pub fn vacuum_fidelity(rho: &DMatrix<C64>) -> f64 {
    rho[(0, 0)].re
}

/// Symmetrized `q, p` covariance of a truncated state.
pub fn qp_covariance(rho: &DMatrix<C64>) -> nalgebra::Matrix2<f64> {
    let n_max = rho.nrows() - 1;
    let (q, p) = quadratures(n_max);
    let ev = |x: &DMatrix<C64>| (rho * x).trace().re;
    let (mq, mp) = (ev(&q), ev(&p));
    let qq = ev(&(&q * &q)) - mq * mq;
    let pp = ev(&(&p * &p)) - mp * mp;
    let qp = 0.5 * ev(&(&q * &p + &p * &q)) - mq * mp;
    nalgebra::Matrix2::new(qq, qp, qp, pp)
}

#[derive(Clone, Debug, Serialize)]
pub struct RecursionReport {
    pub b: f64,
    pub n_max: usize,
    /// For `b = 1`: `rho_{n+1,n+1} / rho_{nn}` implied by row `n`.
    /// For `b = -1`: `rho_{nn} / rho_{n-1,n-1}` implied by row `n >= 1`.
    pub coefficients: Vec<f64>,
    pub rho00_forced_zero: bool,
    /// Normalized diagonal solution, absent when none exists.
    pub solution: Option<Vec<f64>>,
}

/// Diagonal rows of the stationarity condition for `b = +-1`, from the
/// ladder rates of `K = sqrt(2) a` or `sqrt(2) a^dagger`. Rows `0..n_max` only,
/// the last level being the truncation boundary.
pub fn diagonal_rates(b: i32, n_max: usize) -> Result<DMatrix<f64>> {
    let mut t = DMatrix::<f64>::zeros(n_max, n_max + 1);
    for n in 0..n_max {
        let nf = n as f64;
        match b {
            // d/dt rho_nn = 2 (n+1) rho_{n+1,n+1} - 2 n rho_nn
            1 => {
                t[(n, n)] = -2.0 * nf;
                t[(n, n + 1)] = 2.0 * (nf + 1.0);
            }
            // d/dt rho_nn = 2 n rho_{n-1,n-1} - 2 (n+1) rho_nn
            -1 => {
                t[(n, n)] = -2.0 * (nf + 1.0);
                if n > 0 {
                    t[(n, n - 1)] = 2.0 * nf;
                }
            }
            _ => return Err(Error::Config(format!("recursion analysis needs b = +-1, got {b}"))),
        }
    }
    Ok(t)
}

pub fn recursion_analysis(b: i32, n_max: usize) -> Result<RecursionReport> {
    if n_max < 4 {
        return Err(Error::Config(format!("n_max must be at least 4, got {n_max}")));
    }
    let t = diagonal_rates(b, n_max)?;
    let coefficients: Vec<f64> = match b {
        1 => (0..n_max).map(|n| -t[(n, n)] / t[(n, n + 1)]).collect(),
        _ => (1..n_max).map(|n| -t[(n, n - 1)] / t[(n, n)]).collect(),
    };
    let rho00_forced_zero = t[(0, 0)] != 0.0 && t[(0, 1)] == 0.0;
    // kernel of the interior rows, via the Gram matrix
    let eig = (t.transpose() * &t).symmetric_eigen();
    let lmax = eig.eigenvalues.amax();
    let mut solution = None;
    for (k, lam) in eig.eigenvalues.iter().enumerate() {
        if lam.abs() > NULL_TOL * lmax {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        let total: f64 = v.sum();
        let boundary = v[n_max].abs() / v.amax();
        if total.abs() < 1e-12 || boundary > 1e-8 {
            // not normalizable within the interior: supported on the cut
            continue;
        }
        let p: Vec<f64> = v.iter().map(|x| x / total).collect();
        if p.iter().all(|x| *x >= -1e-12) {
            solution = Some(p);
        }
    }
    Ok(RecursionReport {
        b: b as f64,
        n_max,
        coefficients,
        rho00_forced_zero,
        solution,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FockReport {
    pub b: f64,
    pub n_max: usize,
    pub stationary_count: usize,
    pub flagged_count: usize,
    pub vacuum_fidelity: Option<f64>,
}

pub fn fock_report(b: f64, n_max: usize) -> Result<FockReport> {
    let l = build_liouvillian(b, n_max)?;
    let states = stationary_states(&l, 1e-10)?;
    let accepted: Vec<&StationaryCandidate> = states.iter().filter(|s| s.accepted()).collect();
    Ok(FockReport {
        b,
        n_max,
        stationary_count: accepted.len(),
        flagged_count: states.iter().filter(|s| s.artifact).count(),
        vacuum_fidelity: match accepted.as_slice() {
            [one] => Some(vacuum_fidelity(&one.rho)),
            _ => None,
        },
    })
}

/// Integrates `d rho/dt = L[rho]` and returns the states at `grid`.
pub fn evolve_fock(
    l: &FockLiouvillian,
    rho0: &DMatrix<C64>,
    grid: &[f64],
    tol: f64,
) -> Result<Vec<DMatrix<C64>>> {
    let d = l.dim();
    let jd = l.jump.adjoint();
    let kk = &jd * &l.jump;
    let k = l.jump.clone();
    let sol = ode::integrate(
        |_, y: &[C64], dy: &mut [C64]| {
            let r = DMatrix::from_column_slice(d, d, y);
            let out = &k * &r * &jd - (&kk * &r + &r * &kk) * c(0.5, 0.0);
            dy.copy_from_slice(out.as_slice());
        },
        rho0.as_slice(),
        grid,
        &OdeOptions::with_tol(tol),
    )?;
    Ok(sol
        .into_iter()
        .map(|y| DMatrix::from_column_slice(d, d, &y))
        .collect())
}

pub fn mean_photon_number(rho: &DMatrix<C64>) -> f64 {
    (0..rho.nrows()).map(|n| n as f64 * rho[(n, n)].re).sum()
}

/// Trace norm distance `||a - b||_1 / 2` for Hermitian arguments.
pub fn trace_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    0.5 * crate::linalg::hermitian_eigenvalues(&(a - b))
        .iter()
        .map(|x| x.abs())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_density(d: usize, seed: u64) -> DMatrix<C64> {
        let mut r = rng(seed);
        let g = DMatrix::<C64>::from_fn(d, d, |_, _| c(r.sample(StandardNormal), r.sample(StandardNormal)));
        let mut rho = &g * g.adjoint();
        let tr = rho.trace();
        rho /= tr;
        rho
    }

    fn vacuum(d: usize) -> DMatrix<C64> {
        let mut v = DMatrix::zeros(d, d);
        v[(0, 0)] = c(1.0, 0.0);
        v
    }

    #[test]
    fn jump_operator_identities() {
        let n = 12;
        let a = annihilation(n);
        let s2 = c(std::f64::consts::SQRT_2, 0.0);
        let l = build_liouvillian(1.0, n).unwrap();
        assert!((&l.jump - &a * s2).camax() < 1e-12);
        let l = build_liouvillian(-1.0, n).unwrap();
        assert!((&l.jump - a.adjoint() * s2).camax() < 1e-12);
        assert!(build_liouvillian(1.0, 3).is_err());
    }

    #[test]
    fn dephasing_moves_the_vacuum() {
        let l = build_liouvillian(0.0, 10).unwrap();
        assert!(l.apply(&vacuum(11)).camax() > 0.1);
    }

    #[test]
    fn superoperator_matches_direct_application() {
        for b in [1.0, -1.0, 0.3] {
            let l = build_liouvillian(b, 9).unwrap();
            let rho = random_density(10, 3);
            assert!((l.apply_super(&rho) - l.apply(&rho)).camax() < 1e-12);
        }
    }

    #[test]
    fn trace_and_hermiticity_structure() {
        for b in [1.0, -1.0, 0.0, 0.7] {
            let n = 14;
            let l = build_liouvillian(b, n).unwrap();
            // interior-supported states keep their trace
            let inner = random_density(n - 1, 5);
            let mut rho = DMatrix::<C64>::zeros(n + 1, n + 1);
            rho.view_mut((0, 0), (n - 1, n - 1)).copy_from(&inner);
            assert!(l.apply(&rho).trace().norm() < 1e-12);
            // Hermiticity preservation on a non-Hermitian argument
            let mut r = rng(9);
            let x = DMatrix::<C64>::from_fn(n + 1, n + 1, |_, _| c(r.sample(StandardNormal), r.sample(StandardNormal)));
            assert!((l.apply(&x).adjoint() - l.apply(&x.adjoint())).camax() < 1e-12);
        }
    }

    #[test]
    fn stable_case_has_vacuum_only() {
        for n in [20, 30, 40] {
            let l = build_liouvillian(1.0, n).unwrap();
            let st = stationary_states(&l, 1e-10).unwrap();
            let ok: Vec<_> = st.iter().filter(|s| s.accepted()).collect();
            assert_eq!(ok.len(), 1, "n_max = {n}");
            assert!(vacuum_fidelity(&ok[0].rho) >= 1.0 - 1e-10);
            let cov = qp_covariance(&ok[0].rho);
            assert!((cov - nalgebra::Matrix2::identity() * 0.5).amax() < 1e-8);
            let rec = recursion_analysis(1, n).unwrap();
            let sol = rec.solution.unwrap();
            assert!((sol[0] - 1.0).abs() < 1e-12 && sol[1..].iter().all(|x| x.abs() < 1e-12));
        }
    }

    #[test]
    fn unstable_case_has_only_artifacts() {
        for n in [20, 30, 40] {
            let l = build_liouvillian(-1.0, n).unwrap();
            let st = stationary_states(&l, 1e-10).unwrap();
            assert!(st.iter().all(|s| !s.accepted()));
            assert!(st.iter().any(|s| s.artifact));
            let rec = recursion_analysis(-1, n).unwrap();
            assert!(rec.rho00_forced_zero);
            assert!(rec.solution.is_none());
        }
    }

    #[test]
    fn recursion_coefficients() {
        let rec = recursion_analysis(1, 30).unwrap();
        assert_eq!(rec.coefficients[0], 0.0);
        for (n, cf) in rec.coefficients.iter().enumerate() {
            assert!((cf - n as f64 / (n as f64 + 1.0)).abs() < 1e-12);
        }
        assert!(!rec.rho00_forced_zero);
        assert!(recursion_analysis(2, 30).is_err());
    }

    #[test]
    fn closed_form_rates_match_superoperator() {
        for b in [1i32, -1] {
            let n = 15;
            let l = build_liouvillian(b as f64, n).unwrap();
            let t = diagonal_rates(b, n).unwrap();
            let d = n + 1;
            for row in 0..n {
                for col in 0..=n {
                    let s = l.l_super[(row + row * d, col + col * d)];
                    assert!((s.re - t[(row, col)]).abs() < 1e-12 && s.im.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn stable_dynamics_reaches_vacuum() {
        let n = 20;
        let l = build_liouvillian(1.0, n).unwrap();
        let rho0 = random_density(n + 1, 21);
        let out = evolve_fock(&l, &rho0, &[0.0, 20.0], 1e-10).unwrap();
        assert!(trace_distance(&out[1], &vacuum(n + 1)) <= 1e-6);
    }

    #[test]
    fn unstable_dynamics_heats_up() {
        let n = 30;
        let l = build_liouvillian(-1.0, n).unwrap();
        let grid: Vec<f64> = (0..=40).map(|i| 0.05 * i as f64).collect();
        let out = evolve_fock(&l, &vacuum(n + 1), &grid, 1e-10).unwrap();
        let mut last = -1.0;
        for rho in &out {
            if rho[(n, n)].re >= 1e-6 {
                break;
            }
            let m = mean_photon_number(rho);
            assert!(m > last);
            last = m;
        }
        assert!(last > 0.5);
    }
}
