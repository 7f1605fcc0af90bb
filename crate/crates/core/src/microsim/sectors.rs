//! Collective-spin irreducible blocks. Within each block the basis is
//! `|j, m>` with `m = j, j-1, ..., -j`.

use nalgebra::{DMatrix, Vector3};

use crate::linalg::{c, C64};

pub const MAX_SITES: usize = 128;

/// Tridiagonal matrix: `up[k] = T[k, k+1]`, `lo[k] = T[k+1, k]`.
#[derive(Clone, Debug)]
pub struct Tri {
    pub diag: Vec<C64>,
    pub up: Vec<C64>,
    pub lo: Vec<C64>,
}

impl Tri {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `T x`
    pub fn left(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        let d = self.dim();
        let mut out = DMatrix::<C64>::zeros(d, x.ncols());
        for col in 0..x.ncols() {
            for r in 0..d {
                let mut v = self.diag[r] * x[(r, col)];
                if r + 1 < d {
                    v += self.up[r] * x[(r + 1, col)];
                }
                if r > 0 {
                    v += self.lo[r - 1] * x[(r - 1, col)];
                }
                out[(r, col)] = v;
            }
        }
        out
    }

    /// `x T`
    pub fn right(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        let d = self.dim();
        let mut out = DMatrix::<C64>::zeros(x.nrows(), d);
        for col in 0..d {
            for r in 0..x.nrows() {
                let mut v = x[(r, col)] * self.diag[col];
                if col > 0 {
                    v += x[(r, col - 1)] * self.up[col - 1];
                }
                if col + 1 < d {
                    v += x[(r, col + 1)] * self.lo[col];
                }
                out[(r, col)] = v;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for k in 0..d {
            m[(k, k)] = self.diag[k];
            if k + 1 < d {
                m[(k, k + 1)] = self.up[k];
                m[(k + 1, k)] = self.lo[k];
            }
        }
        m
    }
}

/// `(J_x, J_y, J_z)` in the irrep of spin `twice_j / 2`.
pub fn spin_ops(twice_j: usize) -> [Tri; 3] {
    let d = twice_j + 1;
    let j = twice_j as f64 * 0.5;
    let m = |k: usize| j - k as f64;
    let cp: Vec<f64> = (1..d)
        .map(|k| (j * (j + 1.0) - m(k) * (m(k) + 1.0)).max(0.0).sqrt())
        .collect();
    let zero = vec![c(0.0, 0.0); d];
    [
        Tri {
            diag: zero.clone(),
            up: cp.iter().map(|v| c(0.5 * v, 0.0)).collect(),
            lo: cp.iter().map(|v| c(0.5 * v, 0.0)).collect(),
        },
        Tri {
            diag: zero,
            up: cp.iter().map(|v| c(0.0, -0.5 * v)).collect(),
            lo: cp.iter().map(|v| c(0.0, 0.5 * v)).collect(),
        },
        Tri {
            diag: (0..d).map(|k| c(m(k), 0.0)).collect(),
            up: vec![c(0.0, 0.0); d - 1],
            lo: vec![c(0.0, 0.0); d - 1],
        },
    ]
}

/// `sum_mu v_mu J_mu` as a dense Hermitian matrix.
pub fn projected(ops: &[Tri; 3], v: &Vector3<f64>) -> DMatrix<C64> {
    ops[0].to_dense() * c(v[0], 0.0) + ops[1].to_dense() * c(v[1], 0.0) + ops[2].to_dense() * c(v[2], 0.0)
}

/// Binomial coefficient table row for `n`, exact in `u128` up to `n = 128`.
pub fn binomial_row(n: usize) -> Vec<u128> {
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = vec![1u128; row.len() + 1];
        for k in 1..row.len() {
            next[k] = row[k - 1] + row[k];
        }
        row = next;
    }
    row
}

/// Number of copies of the spin-`twice_j/2` irrep in `N` spins-1/2.
pub fn multiplicity(n: usize, twice_j: usize) -> u128 {
    assert!(twice_j <= n && (n - twice_j) % 2 == 0);
    let row = binomial_row(n);
    let k = (n - twice_j) / 2;
    row[k] - if k == 0 { 0 } else { row[k - 1] }
}

/// Allowed `2j` values, largest first.
pub fn twice_j_values(n: usize) -> Vec<usize> {
    (0..=n).rev().filter(|tj| (n - tj) % 2 == 0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn irrep_relations() {
        for tj in 0..7 {
            let [jx, jy, jz] = spin_ops(tj).map(|t| t.to_dense());
            let comm = &jx * &jy - &jy * &jx;
            assert!((comm - &jz * c(0.0, 1.0)).camax() < 1e-13);
            let j = tj as f64 / 2.0;
            let cas = &jx * &jx + &jy * &jy + &jz * &jz;
            let d = tj + 1;
            assert!((cas - DMatrix::<C64>::identity(d, d) * c(j * (j + 1.0), 0.0)).camax() < 1e-12);
        }
    }

    #[test]
    fn tri_products_match_dense() {
        let ops = spin_ops(5);
        let x = DMatrix::<C64>::from_fn(6, 6, |i, j| c(i as f64 - 0.3 * j as f64, 0.1 * (i * j) as f64));
        for t in &ops {
            let d = t.to_dense();
            assert!((t.left(&x) - &d * &x).camax() < 1e-13);
            assert!((t.right(&x) - &x * &d).camax() < 1e-13);
        }
    }

    #[test]
    fn multiplicities_count_all_states() {
        for n in 1..=20 {
            let total: u128 = twice_j_values(n)
                .into_iter()
                .map(|tj| multiplicity(n, tj) * (tj as u128 + 1))
                .sum();
            assert_eq!(total, 1u128 << n);
        }
        assert_eq!(multiplicity(2, 2), 1);
        assert_eq!(multiplicity(2, 0), 1);
        assert_eq!(multiplicity(4, 0), 2);
        assert_eq!(multiplicity(4, 2), 3);
        // largest case stays exact
        let big = multiplicity(128, 0);
        assert!(big > 0);
    }
}
