//! Full `2^N`-dimensional density matrices. Basis index bit `k` is site `k`,
//! bit value 0 is spin up.

use nalgebra::{DMatrix, Matrix2};

use crate::linalg::{c, C64};

pub const MAX_SITES: usize = 12;

fn half_z(i: usize, n: usize) -> f64 {
    (n as f64 - 2.0 * (i.count_ones() as f64)) * 0.5
}

/// `J_mu x`.
pub fn left(mu: usize, x: &DMatrix<C64>, n: usize) -> DMatrix<C64> {
    let dim = x.nrows();
    let src = x.as_slice();
    let mut out = DMatrix::<C64>::zeros(dim, x.ncols());
    let dst = out.as_mut_slice();
    for col in 0..x.ncols() {
        let base = col * dim;
        for i in 0..dim {
            let v = match mu {
                2 => src[base + i] * half_z(i, n),
                0 => {
                    let mut acc = c(0.0, 0.0);
                    for k in 0..n {
                        acc += src[base + (i ^ (1 << k))];
                    }
                    acc * 0.5
                }
                _ => {
                    let mut acc = c(0.0, 0.0);
                    for k in 0..n {
                        let y = src[base + (i ^ (1 << k))];
                        if i & (1 << k) == 0 {
                            acc -= y;
                        } else {
                            acc += y;
                        }
                    }
                    acc * c(0.0, 0.5)
                }
            };
            dst[base + i] = v;
        }
    }
    out
}

/// `x J_mu`.
pub fn right(x: &DMatrix<C64>, mu: usize, n: usize) -> DMatrix<C64> {
    let dim = x.ncols();
    let rows = x.nrows();
    let src = x.as_slice();
    let mut out = DMatrix::<C64>::zeros(rows, dim);
    let dst = out.as_mut_slice();
    for j in 0..dim {
        let col = &mut dst[j * rows..(j + 1) * rows];
        match mu {
            2 => {
                let m = half_z(j, n);
                for (o, s) in col.iter_mut().zip(&src[j * rows..(j + 1) * rows]) {
                    *o = s * m;
                }
            }
            0 => {
                for k in 0..n {
                    let jj = j ^ (1 << k);
                    for (o, s) in col.iter_mut().zip(&src[jj * rows..(jj + 1) * rows]) {
                        *o += s * 0.5;
                    }
                }
            }
            _ => {
                for k in 0..n {
                    let jj = j ^ (1 << k);
                    let coeff = if j & (1 << k) == 0 { c(0.0, 0.5) } else { c(0.0, -0.5) };
                    for (o, s) in col.iter_mut().zip(&src[jj * rows..(jj + 1) * rows]) {
                        *o += s * coeff;
                    }
                }
            }
        }
    }
    out
}

/// `op` acting on site `k` from the left.
pub fn site_left(op: &Matrix2<C64>, k: usize, x: &DMatrix<C64>) -> DMatrix<C64> {
    let dim = x.nrows();
    let bit = 1 << k;
    let mut out = DMatrix::<C64>::zeros(dim, x.ncols());
    for col in 0..x.ncols() {
        for i0 in (0..dim).filter(|i| i & bit == 0) {
            let i1 = i0 | bit;
            let (a, b) = (x[(i0, col)], x[(i1, col)]);
            out[(i0, col)] = op[(0, 0)] * a + op[(0, 1)] * b;
            out[(i1, col)] = op[(1, 0)] * a + op[(1, 1)] * b;
        }
    }
    out
}

pub fn product_state(site: &Matrix2<C64>, n: usize) -> DMatrix<C64> {
    let mut rho = DMatrix::<C64>::from_element(1, 1, c(1.0, 0.0));
    for _ in 0..n {
        // new site becomes the most significant bit
        let m = DMatrix::from_fn(2, 2, |i, j| site[(i, j)]);
        rho = m.kronecker(&rho);
    }
    rho
}

/// Largest entry of `P rho P^T - rho` over adjacent transpositions `P`.
pub fn exchange_defect(rho: &DMatrix<C64>, n: usize) -> f64 {
    let dim = rho.nrows();
    let swap = |i: usize, k: usize| -> usize {
        let a = (i >> k) & 1;
        let b = (i >> (k + 1)) & 1;
        if a == b {
            i
        } else {
            i ^ (0b11 << k)
        }
    };
    let mut worst = 0.0f64;
    for k in 0..n.saturating_sub(1) {
        for j in 0..dim {
            let pj = swap(j, k);
            for i in 0..dim {
                let d = (rho[(swap(i, k), pj)] - rho[(i, j)]).norm();
                worst = worst.max(d);
            }
        }
    }
    worst
}

/// `tr(rho op_a^(site_a) op_b^(site_b))` for distinct sites.
pub fn site_pair_expectation(
    rho: &DMatrix<C64>,
    (site_a, op_a): (usize, &Matrix2<C64>),
    (site_b, op_b): (usize, &Matrix2<C64>),
) -> C64 {
    let x = site_left(op_b, site_b, rho);
    let x = site_left(op_a, site_a, &x);
    x.trace()
}

pub fn site_expectation(rho: &DMatrix<C64>, site: usize, op: &Matrix2<C64>) -> C64 {
    site_left(op, site, rho).trace()
}

/// Heisenberg-picture generator on a dense observable.
pub fn heisenberg(x: &DMatrix<C64>, d: &nalgebra::Matrix3<C64>, n: usize) -> DMatrix<C64> {
    let dim = x.nrows();
    let mut out = DMatrix::<C64>::zeros(dim, dim);
    let inv_n = 1.0 / n as f64;
    let jx: Vec<DMatrix<C64>> = (0..3).map(|m| left(m, x, n)).collect();
    let xj: Vec<DMatrix<C64>> = (0..3).map(|m| right(x, m, n)).collect();
    for mu in 0..3 {
        for nu in 0..3 {
            let dmn = d[(mu, nu)];
            if dmn == c(0.0, 0.0) {
                continue;
            }
            // J_mu x J_nu - (J_mu J_nu x + x J_mu J_nu)/2
            let term = right(&jx[mu], nu, n)
                - (left(mu, &jx[nu], n) + right(&xj[mu], nu, n)) * c(0.5, 0.0);
            out += term * (dmn * inv_n);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spin_half;

    fn collective(mu: usize, n: usize) -> DMatrix<C64> {
        let s = spin_half();
        let dim = 1 << n;
        let mut j = DMatrix::<C64>::zeros(dim, dim);
        for k in 0..n {
            j += site_left(&s[mu], k, &DMatrix::identity(dim, dim));
        }
        j
    }

    #[test]
    fn bit_tricks_match_explicit_operators() {
        let n = 4;
        let dim = 1 << n;
        let x = DMatrix::<C64>::from_fn(dim, dim, |i, j| c((i * 7 + j) as f64 * 0.01, (i as f64 - j as f64) * 0.02));
        for mu in 0..3 {
            let j = collective(mu, n);
            assert!((left(mu, &x, n) - &j * &x).camax() < 1e-12);
            assert!((right(&x, mu, n) - &x * &j).camax() < 1e-12);
        }
        // [J_x, J_y] = i J_z
        let (jx, jy, jz) = (collective(0, n), collective(1, n), collective(2, n));
        assert!((&jx * &jy - &jy * &jx - jz * c(0.0, 1.0)).camax() < 1e-12);
    }

    #[test]
    fn product_state_exchange_symmetric() {
        let site = Matrix2::new(c(0.7, 0.0), c(0.1, -0.2), c(0.1, 0.2), c(0.3, 0.0));
        let rho = product_state(&site, 4);
        assert!((rho.trace() - c(1.0, 0.0)).norm() < 1e-14);
        assert!(exchange_defect(&rho, 4) < 1e-15);
        let s = spin_half();
        let e = site_expectation(&rho, 2, &s[0]);
        assert!((e - (site * s[0]).trace()).norm() < 1e-15);
    }
}
