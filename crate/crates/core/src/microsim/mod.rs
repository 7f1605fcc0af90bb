//! Exact finite-N evolution of the mean-field GKSL generator in the
//! Schrödinger picture, with a dense engine and a collective-sector engine.

pub mod dense;
pub mod sectors;

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::algebra::KossakowskiSpec;
use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_min_eigenvalue, hermiticity_defect, spin_half, C64};
use crate::macroflow::BlochTriple;
use crate::ode::{self, OdeOptions};

use sectors::Tri;

pub const TRACE_DRIFT_TOL: f64 = 1e-9;
pub const HERMITICITY_DRIFT_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = -1e-7;
pub const EXCHANGE_TOL: f64 = 1e-8;
/// Largest irrep dimension for characteristic functions.
pub const CHAR_MAX_BLOCK: usize = 129;
pub const CHAR_MAX_DENSE_SITES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleSiteState {
    pub bloch: BlochTriple,
}

impl SingleSiteState {
    pub fn new(bloch: BlochTriple) -> Self {
        Self { bloch }
    }

    /// `I/2 + bloch . sigma`
    pub fn density(&self) -> Matrix2<C64> {
        let s = spin_half();
        let w = self.bloch.vector();
        Matrix2::identity() * c(0.5, 0.0)
            + (s[0] * c(w[0], 0.0) + s[1] * c(w[1], 0.0) + s[2] * c(w[2], 0.0)) * c(2.0, 0.0)
    }

    /// Larger eigenvalue of the density matrix.
    pub fn top_eigenvalue(&self) -> f64 {
        (0.5 + self.bloch.length()).min(1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Dense,
    Sectors,
}

/// All `multiplicity` copies of one irrep, stored summed: `weighted` is the
/// multiplicity times the per-copy block, so the total trace is the sum of
/// the weighted traces.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorBlock {
    pub twice_j: usize,
    pub multiplicity: u128,
    pub weighted: DMatrix<C64>,
}

impl SectorBlock {
    pub fn j(&self) -> f64 {
        self.twice_j as f64 * 0.5
    }

    /// Per-copy block.
    pub fn block(&self) -> DMatrix<C64> {
        &self.weighted * c(1.0 / self.multiplicity as f64, 0.0)
    }

    fn active(&self) -> bool {
        self.weighted.iter().any(|z| *z != c(0.0, 0.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SpinChainState {
    Dense { n: usize, rho: DMatrix<C64> },
    Sectors { n: usize, blocks: Vec<SectorBlock> },
}

/// `<J_mu>` and `<{J_mu, J_nu}>/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub first: Vector3<f64>,
    pub second: Matrix3<f64>,
}

trait Collective {
    fn left(&self, mu: usize, x: &DMatrix<C64>) -> DMatrix<C64>;
    fn right(&self, x: &DMatrix<C64>, mu: usize) -> DMatrix<C64>;
}

struct DenseOps(usize);

impl Collective for DenseOps {
    fn left(&self, mu: usize, x: &DMatrix<C64>) -> DMatrix<C64> {
        dense::left(mu, x, self.0)
    }
    fn right(&self, x: &DMatrix<C64>, mu: usize) -> DMatrix<C64> {
        dense::right(x, mu, self.0)
    }
}

impl Collective for [Tri; 3] {
    fn left(&self, mu: usize, x: &DMatrix<C64>) -> DMatrix<C64> {
        self[mu].left(x)
    }
    fn right(&self, x: &DMatrix<C64>, mu: usize) -> DMatrix<C64> {
        self[mu].right(x)
    }
}

/// `sum D_{mu nu} (L_nu rho L_mu - {L_mu L_nu, rho}/2)` with `L = J/sqrt(N)`.
/// The anticommutator half uses `(M rho)^dagger = rho M`, so `rho` must be
/// Hermitian.
fn gksl(ops: &impl Collective, rho: &DMatrix<C64>, d: &Matrix3<C64>, n: usize) -> DMatrix<C64> {
    let zero = c(0.0, 0.0);
    let p: Vec<DMatrix<C64>> = (0..3).map(|nu| ops.left(nu, rho)).collect();
    let (r, cc) = rho.shape();
    let mut jump = DMatrix::<C64>::zeros(r, cc);
    let mut m_rho = DMatrix::<C64>::zeros(r, cc);
    for mu in 0..3 {
        let mut q = DMatrix::<C64>::zeros(r, cc);
        let mut any = false;
        for nu in 0..3 {
            if d[(mu, nu)] != zero {
                q += &p[nu] * d[(mu, nu)];
                any = true;
            }
        }
        if !any {
            continue;
        }
        jump += ops.right(&q, mu);
        m_rho += ops.left(mu, &q);
    }
    // both parts are Hermitian for Hermitian rho; taking Hermitian parts keeps
    // rounding errors from feeding the anti-Hermitian component
    let sym = (&jump + jump.adjoint()) - (&m_rho + m_rho.adjoint());
    sym * c(0.5 / n as f64, 0.0)
}

fn moments_of(ops: &impl Collective, rho: &DMatrix<C64>) -> Moments {
    let p: Vec<DMatrix<C64>> = (0..3).map(|nu| ops.left(nu, rho)).collect();
    let first = Vector3::from_fn(|mu, _| p[mu].trace().re);
    let mut second = Matrix3::zeros();
    for mu in 0..3 {
        for nu in mu..3 {
            let v = ops.left(mu, &p[nu]).trace().re;
            let w = if mu == nu { v } else { 0.5 * (v + ops.left(nu, &p[mu]).trace().re) };
            second[(mu, nu)] = w;
            second[(nu, mu)] = w;
        }
    }
    Moments { first, second }
}

impl SpinChainState {
    pub fn n(&self) -> usize {
        match self {
            SpinChainState::Dense { n, .. } | SpinChainState::Sectors { n, .. } => *n,
        }
    }

    pub fn representation(&self) -> Representation {
        match self {
            SpinChainState::Dense { .. } => Representation::Dense,
            SpinChainState::Sectors { .. } => Representation::Sectors,
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            SpinChainState::Dense { rho, .. } => rho.trace().re,
            SpinChainState::Sectors { blocks, .. } => {
                blocks.iter().map(|b| b.weighted.trace().re).sum()
            }
        }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        match self {
            SpinChainState::Dense { rho, .. } => hermiticity_defect(rho),
            SpinChainState::Sectors { blocks, .. } => blocks
                .iter()
                .map(|b| hermiticity_defect(&b.weighted))
                .fold(0.0, f64::max),
        }
    }

    /// Smallest eigenvalue over the per-copy blocks (or the dense matrix).
    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            SpinChainState::Dense { rho, .. } => hermitian_min_eigenvalue(rho),
            SpinChainState::Sectors { blocks, .. } => blocks
                .iter()
                .filter(|b| b.active())
                .map(|b| hermitian_min_eigenvalue(&b.weighted) / b.multiplicity as f64)
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn moments(&self) -> Moments {
        match self {
            SpinChainState::Dense { n, rho } => moments_of(&DenseOps(*n), rho),
            SpinChainState::Sectors { blocks, .. } => {
                let mut acc = Moments {
                    first: Vector3::zeros(),
                    second: Matrix3::zeros(),
                };
                for b in blocks.iter().filter(|b| b.active()) {
                    let m = moments_of(&sectors::spin_ops(b.twice_j), &b.weighted);
                    acc.first += m.first;
                    acc.second += m.second;
                }
                acc
            }
        }
    }

    /// Largest deviation from exchange symmetry; zero by construction for
    /// sector states.
    pub fn exchange_defect(&self) -> f64 {
        match self {
            SpinChainState::Dense { n, rho } => dense::exchange_defect(rho, *n),
            SpinChainState::Sectors { .. } => 0.0,
        }
    }

    fn flatten(&self) -> Vec<C64> {
        match self {
            SpinChainState::Dense { rho, .. } => rho.as_slice().to_vec(),
            SpinChainState::Sectors { blocks, .. } => blocks
                .iter()
                .filter(|b| b.active())
                .flat_map(|b| b.weighted.as_slice().iter().copied())
                .collect(),
        }
    }

    /// Inverse of `flatten` using `self` as the shape template.
    fn unflatten(&self, y: &[C64]) -> SpinChainState {
        match self {
            SpinChainState::Dense { n, rho } => SpinChainState::Dense {
                n: *n,
                rho: DMatrix::from_column_slice(rho.nrows(), rho.ncols(), y),
            },
            SpinChainState::Sectors { n, blocks } => {
                let mut off = 0;
                let blocks = blocks
                    .iter()
                    .map(|b| {
                        if !b.active() {
                            return b.clone();
                        }
                        let d = b.twice_j + 1;
                        let w = DMatrix::from_column_slice(d, d, &y[off..off + d * d]);
                        off += d * d;
                        SectorBlock {
                            weighted: w,
                            ..b.clone()
                        }
                    })
                    .collect();
                SpinChainState::Sectors { n: *n, blocks }
            }
        }
    }
}

pub fn build_product_state(
    n: usize,
    site: &SingleSiteState,
    representation: Representation,
) -> Result<SpinChainState> {
    if n == 0 {
        return Err(Error::Config("site count must be positive".into()));
    }
    match representation {
        Representation::Dense => {
            if n > dense::MAX_SITES {
                return Err(Error::SizeExceeded {
                    what: format!("dense engine with N = {n}"),
                    limit: dense::MAX_SITES,
                });
            }
            Ok(SpinChainState::Dense {
                n,
                rho: dense::product_state(&site.density(), n),
            })
        }
        Representation::Sectors => {
            if n > sectors::MAX_SITES {
                return Err(Error::SizeExceeded {
                    what: format!("sector engine with N = {n}"),
                    limit: sectors::MAX_SITES,
                });
            }
            let p = site.top_eigenvalue();
            let q = 1.0 - p;
            let w = site.bloch.vector();
            let axis = if w.norm() > 0.0 { w / w.norm() } else { Vector3::z() };
            let row = sectors::binomial_row(n);
            let blocks = sectors::twice_j_values(n)
                .into_iter()
                .map(|tj| {
                    let k = (n - tj) / 2;
                    let mult = row[k] - if k == 0 { 0 } else { row[k - 1] };
                    let ops = sectors::spin_ops(tj);
                    let eig = sectors::projected(&ops, &axis).symmetric_eigen();
                    let weights: Vec<f64> = eig
                        .eigenvalues
                        .iter()
                        .map(|lam| {
                            // n/2 + m and n/2 - m are integers
                            let up = ((n as f64 + 2.0 * lam) * 0.5).round() as i32;
                            mult as f64 * p.powi(up) * q.powi(n as i32 - up)
                        })
                        .collect();
                    let v = &eig.eigenvectors;
                    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                        weights.len(),
                        weights.iter().map(|x| c(*x, 0.0)),
                    ));
                    let mut wmat = v * diag * v.adjoint();
                    wmat = (&wmat + wmat.adjoint()) * c(0.5, 0.0);
                    SectorBlock {
                        twice_j: tj,
                        multiplicity: mult,
                        weighted: wmat,
                    }
                })
                .collect();
            Ok(SpinChainState::Sectors { n, blocks })
        }
    }
}

fn require_dim3(spec: &KossakowskiSpec) -> Result<Matrix3<C64>> {
    if spec.dim != 3 {
        return Err(Error::BadDimension(spec.dim, 3));
    }
    Ok(spec.d3())
}

/// Time derivative of the state, in the same representation.
pub fn lindblad_rhs(state: &SpinChainState, spec: &KossakowskiSpec) -> Result<SpinChainState> {
    let d = require_dim3(spec)?;
    Ok(match state {
        SpinChainState::Dense { n, rho } => SpinChainState::Dense {
            n: *n,
            rho: gksl(&DenseOps(*n), rho, &d, *n),
        },
        SpinChainState::Sectors { n, blocks } => SpinChainState::Sectors {
            n: *n,
            blocks: blocks
                .iter()
                .map(|b| SectorBlock {
                    weighted: if b.active() {
                        gksl(&sectors::spin_ops(b.twice_j), &b.weighted, &d, *n)
                    } else {
                        b.weighted.clone()
                    },
                    ..b.clone()
                })
                .collect(),
        },
    })
}

pub fn evolve_micro(
    state0: &SpinChainState,
    spec: &KossakowskiSpec,
    t_grid: &[f64],
    tol: f64,
) -> Result<Vec<(f64, SpinChainState)>> {
    let d = require_dim3(spec)?;
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let n = state0.n();
    let y0 = state0.flatten();
    let sol = match state0 {
        SpinChainState::Dense { rho, .. } => {
            let dim = rho.nrows();
            let ops = DenseOps(n);
            ode::integrate(
                |_, y: &[C64], dy: &mut [C64]| {
                    let r = DMatrix::from_column_slice(dim, dim, y);
                    dy.copy_from_slice(gksl(&ops, &r, &d, n).as_slice());
                },
                &y0,
                t_grid,
                &OdeOptions::with_tol(tol),
            )?
        }
        SpinChainState::Sectors { blocks, .. } => {
            let layout: Vec<(usize, [Tri; 3])> = blocks
                .iter()
                .filter(|b| b.active())
                .map(|b| (b.twice_j + 1, sectors::spin_ops(b.twice_j)))
                .collect();
            ode::integrate(
                |_, y: &[C64], dy: &mut [C64]| {
                    let mut off = 0;
                    for (dim, ops) in &layout {
                        let len = dim * dim;
                        let r = DMatrix::from_column_slice(*dim, *dim, &y[off..off + len]);
                        dy[off..off + len].copy_from_slice(gksl(ops, &r, &d, n).as_slice());
                        off += len;
                    }
                },
                &y0,
                t_grid,
                &OdeOptions::with_tol(tol),
            )?
        }
    };
    let tr0 = state0.trace();
    let herm0 = state0.hermiticity_defect();
    let mut out = Vec::with_capacity(sol.len());
    for (t, y) in t_grid.iter().zip(sol) {
        let st = state0.unflatten(&y);
        let drift = (st.trace() - tr0).abs();
        if drift > TRACE_DRIFT_TOL {
            return Err(Error::InvariantViolated { what: "trace", value: drift });
        }
        let herm = st.hermiticity_defect() - herm0;
        if herm > HERMITICITY_DRIFT_TOL {
            return Err(Error::InvariantViolated { what: "hermiticity defect", value: herm });
        }
        let min = st.min_eigenvalue();
        if min < POSITIVITY_TOL {
            return Err(Error::InvariantViolated { what: "minimum eigenvalue", value: min });
        }
        out.push((*t, st));
    }
    Ok(out)
}

/// Which means are subtracted when forming fluctuations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FluctuationReference {
    /// Current means of the evolved state.
    Evolved,
    /// A fixed triple, normally the initial means.
    Fixed(BlochTriple),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MicroObservables {
    pub t: f64,
    pub mean: BlochTriple,
    pub fluct_cov: Matrix3<f64>,
    pub pair_corr_12: f64,
    pub char_samples: Vec<([f64; 3], [f64; 2])>,
}

impl MicroObservables {
    /// `t,m1,m2,m3,S11,S12,S13,S22,S23,S33,C12pair`
    pub fn csv_fields(&self) -> [f64; 11] {
        let m = self.mean.vector();
        let s = &self.fluct_cov;
        [
            self.t,
            m[0],
            m[1],
            m[2],
            s[(0, 0)],
            s[(0, 1)],
            s[(0, 2)],
            s[(1, 1)],
            s[(1, 2)],
            s[(2, 2)],
            self.pair_corr_12,
        ]
    }
}

/// Means, fluctuation covariance and pair correlation from the collective
/// moments. Dense states must be exchange symmetric.
pub fn collective_observables(
    state: &SpinChainState,
    t: f64,
    reference: FluctuationReference,
) -> Result<MicroObservables> {
    check_exchange(state)?;
    let n = state.n() as f64;
    let mom = state.moments();
    let mean = mom.first / n;
    let m_ref = match reference {
        FluctuationReference::Evolved => mean,
        FluctuationReference::Fixed(w) => w.vector(),
    };
    let fj = mom.first;
    let cov = Matrix3::from_fn(|mu, nu| {
        (mom.second[(mu, nu)] - n * (m_ref[mu] * fj[nu] + m_ref[nu] * fj[mu])
            + n * n * m_ref[mu] * m_ref[nu])
            / n
    });
    let cov = (cov + cov.transpose()) * 0.5;
    Ok(MicroObservables {
        t,
        mean: BlochTriple::from_vector_unchecked(mean),
        fluct_cov: cov,
        pair_corr_12: pair_from_moments(&mom, state.n(), 0, 1),
        char_samples: Vec::new(),
    })
}

fn check_exchange(state: &SpinChainState) -> Result<()> {
    let defect = state.exchange_defect();
    if defect > EXCHANGE_TOL {
        return Err(Error::NotExchangeSymmetric(defect));
    }
    Ok(())
}

fn pair_from_moments(mom: &Moments, n: usize, mu: usize, nu: usize) -> f64 {
    let nf = n as f64;
    let same_site = if mu == nu { nf * 0.25 } else { 0.0 };
    (mom.second[(mu, nu)] - same_site) / (nf * (nf - 1.0))
        - mom.first[mu] * mom.first[nu] / (nf * nf)
}

/// `<s_1^(i) s_2^(j)> - <s_1^(i)><s_2^(j)>` for `i != j`.
pub fn pair_correlation_12(state: &SpinChainState) -> Result<f64> {
    if state.n() < 2 {
        return Err(Error::Config("pair correlation needs N >= 2".into()));
    }
    check_exchange(state)?;
    Ok(pair_from_moments(&state.moments(), state.n(), 0, 1))
}

/// All nine connected two-site correlations.
pub fn pair_correlation_matrix(state: &SpinChainState) -> Result<Matrix3<f64>> {
    if state.n() < 2 {
        return Err(Error::Config("pair correlation needs N >= 2".into()));
    }
    check_exchange(state)?;
    let mom = state.moments();
    Ok(Matrix3::from_fn(|mu, nu| pair_from_moments(&mom, state.n(), mu, nu)))
}

/// `[tr(rho exp(i r.s/sqrt N))]^N exp(-i sqrt(N) r.bloch)` in closed form.
pub fn qclt_product_char(site: &SingleSiteState, n: u64, r: &Vector3<f64>) -> C64 {
    let norm = r.norm();
    if norm == 0.0 || n == 0 {
        return c(1.0, 0.0);
    }
    let nf = n as f64;
    let w = site.bloch.vector();
    let theta = norm / nf.sqrt();
    let proj = 2.0 * (r / norm).dot(&w);
    let z = c((0.5 * theta).cos(), (0.5 * theta).sin() * proj);
    (z.ln() * nf - c(0.0, nf.sqrt() * r.dot(&w))).exp()
}

/// `<exp(i r.J/sqrt N)> exp(-i sqrt(N) r.m_ref)`.
pub fn fluctuation_char(
    state: &SpinChainState,
    r: &Vector3<f64>,
    reference: FluctuationReference,
) -> Result<C64> {
    let n = state.n();
    let nf = n as f64;
    let m_ref = match reference {
        FluctuationReference::Evolved => state.moments().first / nf,
        FluctuationReference::Fixed(w) => w.vector(),
    };
    let scale = 1.0 / nf.sqrt();
    let expectation = match state {
        SpinChainState::Dense { rho, .. } => {
            if n > CHAR_MAX_DENSE_SITES {
                return Err(Error::SizeExceeded {
                    what: format!("dense characteristic function with N = {n}"),
                    limit: CHAR_MAX_DENSE_SITES,
                });
            }
            let u = site_unitary(&(r * scale));
            let mut x = rho.clone();
            for k in 0..n {
                x = dense::site_left(&u, k, &x);
            }
            x.trace()
        }
        SpinChainState::Sectors { blocks, .. } => {
            let mut acc = c(0.0, 0.0);
            for b in blocks.iter().filter(|b| b.active()) {
                let d = b.twice_j + 1;
                if d > CHAR_MAX_BLOCK {
                    return Err(Error::SizeExceeded {
                        what: format!("irrep dimension {d}"),
                        limit: CHAR_MAX_BLOCK,
                    });
                }
                let eig = sectors::projected(&sectors::spin_ops(b.twice_j), r).symmetric_eigen();
                let v = &eig.eigenvectors;
                let rotated = v.adjoint() * &b.weighted * v;
                for k in 0..d {
                    acc += rotated[(k, k)] * c(0.0, eig.eigenvalues[k] * scale).exp();
                }
            }
            acc
        }
    };
    Ok(expectation * c(0.0, -nf.sqrt() * r.dot(&m_ref)).exp())
}

/// `exp(i v.s)` for one spin-1/2.
pub fn site_unitary(v: &Vector3<f64>) -> Matrix2<C64> {
    let th = v.norm();
    if th == 0.0 {
        return Matrix2::identity();
    }
    let s = spin_half();
    let nsig = (s[0] * c(v[0], 0.0) + s[1] * c(v[1], 0.0) + s[2] * c(v[2], 0.0)) * c(2.0 / th, 0.0);
    Matrix2::identity() * c((0.5 * th).cos(), 0.0) + nsig * c(0.0, (0.5 * th).sin())
}

#[cfg(test)]
mod tests;
