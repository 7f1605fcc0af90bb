//! Dormand–Prince 5(4) integrator with PI step-size control.
//!
//! Values requested on an output grid are produced by cubic Hermite
//! interpolation between the two accepted steps that bracket them, so the
//! step sequence does not depend on the grid except for the final time.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Scalar component of an ODE state vector.
pub trait OdeScalar: Copy + Send + Sync + 'static {
    fn zero() -> Self;
    /// `self + a * x`
    fn mul_add(self, a: f64, x: Self) -> Self;
    fn magnitude(self) -> f64;
}

impl OdeScalar for f64 {
    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn mul_add(self, a: f64, x: Self) -> Self {
        self + a * x
    }
    #[inline]
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl OdeScalar for Complex64 {
    #[inline]
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    #[inline]
    fn mul_add(self, a: f64, x: Self) -> Self {
        Complex64::new(self.re + a * x.re, self.im + a * x.im)
    }
    #[inline]
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Clone, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    /// Absolute and relative tolerance both set to `tol`.
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 5_000_000,
        }
    }

    pub fn h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }
}

/// One accepted step with the coefficients of the fourth-order continuous
/// extension.
#[derive(Clone, Debug)]
pub struct Segment<T> {
    pub t0: f64,
    pub t1: f64,
    coeffs: [Vec<T>; 5],
}

impl<T: OdeScalar> Segment<T> {
    fn new(t0: f64, t1: f64, y: &[T], ynew: &[T], k: [&[T]; 7]) -> Self {
        let h = t1 - t0;
        let n = y.len();
        let mut r2 = vec![T::zero(); n];
        let mut r3 = vec![T::zero(); n];
        let mut r4 = vec![T::zero(); n];
        let mut r5 = vec![T::zero(); n];
        for i in 0..n {
            let dy = ynew[i].mul_add(-1.0, y[i]);
            let bspl = T::zero().mul_add(h, k[0][i]).mul_add(-1.0, dy);
            r2[i] = dy;
            r3[i] = bspl;
            r4[i] = dy.mul_add(-h, k[6][i]).mul_add(-1.0, bspl);
            r5[i] = T::zero()
                .mul_add(h * D1, k[0][i])
                .mul_add(h * D3, k[2][i])
                .mul_add(h * D4, k[3][i])
                .mul_add(h * D5, k[4][i])
                .mul_add(h * D6, k[5][i])
                .mul_add(h * D7, k[6][i]);
        }
        Segment {
            t0,
            t1,
            coeffs: [y.to_vec(), r2, r3, r4, r5],
        }
    }

    pub fn eval(&self, t: f64) -> Vec<T> {
        let mut out = vec![T::zero(); self.coeffs[0].len()];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [T]) {
        let h = self.t1 - self.t0;
        let th = if h == 0.0 { 1.0 } else { (t - self.t0) / h };
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        for i in 0..out.len() {
            let inner = r4[i].mul_add(th1, r5[i]);
            let inner = r3[i].mul_add(th, inner);
            let inner = r2[i].mul_add(th1, inner);
            out[i] = r1[i].mul_add(th, inner);
        }
    }
}

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = rhs(t, y)` and returns the solution at every grid time.
/// `grid[0]` is the initial time.
pub fn integrate<T, F>(rhs: F, y0: &[T], grid: &[f64], opts: &OdeOptions) -> Result<Vec<Vec<T>>>
where
    T: OdeScalar,
    F: FnMut(f64, &[T], &mut [T]),
{
    integrate_observed(rhs, y0, grid, opts, |_| {})
}

/// Like [`integrate`], additionally handing every accepted step to `observe`.
pub fn integrate_observed<T, F, O>(
    mut rhs: F,
    y0: &[T],
    grid: &[f64],
    opts: &OdeOptions,
    mut observe: O,
) -> Result<Vec<Vec<T>>>
where
    T: OdeScalar,
    F: FnMut(f64, &[T], &mut [T]),
    O: FnMut(&Segment<T>),
{
    if grid.is_empty() {
        return Err(Error::BadGrid("empty"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::BadGrid("times must be strictly increasing"));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::BadGrid("non-finite time"));
    }
    let n = y0.len();
    let mut out = Vec::with_capacity(grid.len());
    out.push(y0.to_vec());
    if grid.len() == 1 {
        return Ok(out);
    }

    let t_end = *grid.last().unwrap();
    let mut t = grid[0];
    let mut y = y0.to_vec();
    let mut f = vec![T::zero(); n];
    rhs(t, &y, &mut f);

    let mut k2 = vec![T::zero(); n];
    let mut k3 = vec![T::zero(); n];
    let mut k4 = vec![T::zero(); n];
    let mut k5 = vec![T::zero(); n];
    let mut k6 = vec![T::zero(); n];
    let mut k7 = vec![T::zero(); n];
    let mut ytmp = vec![T::zero(); n];
    let mut ynew = vec![T::zero(); n];
    let mut sample = vec![T::zero(); n];

    let mut h = match opts.h_init {
        Some(h) => h,
        None => initial_step(&mut rhs, t, &y, &f, opts, &mut ytmp, &mut k2),
    }
    .min(opts.h_max)
    .min(t_end - t);

    let beta = 0.04;
    let expo1 = 0.2 - beta * 0.75;
    let (facc1, facc2, safe) = (5.0, 0.1, 0.9);
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;
    let mut next = 1;
    let mut steps = 0usize;

    while next < grid.len() {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::StepFailure { t, h });
        }
        let h_floor = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < h_floor || !h.is_finite() {
            return Err(Error::StepFailure { t, h });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        let lin = |dst: &mut [T], terms: &[(f64, &[T])]| {
            for i in 0..n {
                let mut acc = y[i];
                for (a, k) in terms {
                    acc = acc.mul_add(h * a, k[i]);
                }
                dst[i] = acc;
            }
        };

        lin(&mut ytmp, &[(A21, &f)]);
        rhs(t + C2 * h, &ytmp, &mut k2);
        lin(&mut ytmp, &[(A31, &f), (A32, &k2)]);
        rhs(t + C3 * h, &ytmp, &mut k3);
        lin(&mut ytmp, &[(A41, &f), (A42, &k2), (A43, &k3)]);
        rhs(t + C4 * h, &ytmp, &mut k4);
        lin(&mut ytmp, &[(A51, &f), (A52, &k2), (A53, &k3), (A54, &k4)]);
        rhs(t + C5 * h, &ytmp, &mut k5);
        lin(
            &mut ytmp,
            &[(A61, &f), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        let t_new = if last { t_end } else { t + h };
        rhs(t_new, &ytmp, &mut k6);
        lin(
            &mut ynew,
            &[(A71, &f), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        rhs(t_new, &ynew, &mut k7);

        let mut err_sq = 0.0;
        for i in 0..n {
            let e = T::zero()
                .mul_add(E1, f[i])
                .mul_add(E3, k3[i])
                .mul_add(E4, k4[i])
                .mul_add(E5, k5[i])
                .mul_add(E6, k6[i])
                .mul_add(E7, k7[i])
                .magnitude()
                * h;
            let sc = opts.atol + opts.rtol * y[i].magnitude().max(ynew[i].magnitude());
            err_sq += (e / sc) * (e / sc);
        }
        let err = if n == 0 { 0.0 } else { (err_sq / n as f64).sqrt() };

        if !err.is_finite() {
            h *= 0.1;
            last_rejected = true;
            continue;
        }

        let fac11 = err.powf(expo1);
        if err <= 1.0 {
            let seg = Segment::new(t, t_new, &y, &ynew, [&f, &k2, &k3, &k4, &k5, &k6, &k7]);
            while next < grid.len() && grid[next] <= t_new {
                if grid[next] == t_new {
                    sample.copy_from_slice(&ynew);
                } else {
                    seg.eval_into(grid[next], &mut sample);
                }
                out.push(sample.clone());
                next += 1;
            }
            observe(&seg);
            let fac = (fac11 / facold.powf(beta) / safe).clamp(facc2, facc1);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            facold = err.max(1e-4);
            t = t_new;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut f, &mut k7);
            h = h_new.min(opts.h_max);
            last_rejected = false;
        } else {
            h /= (fac11 / safe).min(facc1);
            last_rejected = true;
        }
    }
    Ok(out)
}

fn initial_step<T, F>(
    rhs: &mut F,
    t: f64,
    y: &[T],
    f: &[T],
    opts: &OdeOptions,
    ytmp: &mut [T],
    f1: &mut [T],
) -> f64
where
    T: OdeScalar,
    F: FnMut(f64, &[T], &mut [T]),
{
    let n = y.len().max(1) as f64;
    let scale = |v: T, yi: T| v.magnitude() / (opts.atol + opts.rtol * yi.magnitude());
    let d0 = (y.iter().map(|&v| scale(v, v).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f
        .iter()
        .zip(y)
        .map(|(&v, &yi)| scale(v, yi).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(opts.h_max);
    for i in 0..y.len() {
        ytmp[i] = y[i].mul_add(h0, f[i]);
    }
    rhs(t + h0, ytmp, f1);
    let d2 = (f1
        .iter()
        .zip(f)
        .zip(y)
        .map(|((&a, &b), &yi)| scale(a.mul_add(-1.0, b), yi).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(opts.h_max)
}
