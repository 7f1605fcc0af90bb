//! Seeded random generators and scenario samples shared by the sweeps and
//! the verification suite.

use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, C64};
use crate::macroflow::BlochTriple;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `G G^dagger / dim` with Gaussian `G`: full-rank positive with high
/// probability.
pub fn random_psd_with(rng: &mut impl Rng, dim: usize) -> DMatrix<C64> {
    let g = DMatrix::<C64>::from_fn(dim, dim, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let d = &g * g.adjoint() * c(1.0 / dim as f64, 0.0);
    (&d + d.adjoint()) * c(0.5, 0.0)
}

pub fn random_psd(dim: usize, seed: u64) -> DMatrix<C64> {
    random_psd_with(&mut rng(seed), dim)
}

/// Uniform direction, length uniform in `[lo, hi]`.
pub fn random_bloch_with(rng: &mut impl Rng, lo: f64, hi: f64) -> BlochTriple {
    let v = loop {
        let v = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        if v.norm() > 1e-6 {
            break v;
        }
    };
    let len = rng.random_range(lo..=hi);
    BlochTriple::from_vector(v * (len / v.norm())).expect("length below one half")
}

pub fn random_bloch(seed: u64) -> BlochTriple {
    random_bloch_with(&mut rng(seed), 0.05, 0.45)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_min_eigenvalue;

    #[test]
    fn samples_are_valid_and_reproducible() {
        for s in 0..20 {
            let d = random_psd(3, s);
            assert!(hermitian_min_eigenvalue(&d) >= -1e-12);
            assert_eq!(d, random_psd(3, s));
            let w = random_bloch(s).length();
            assert!((0.05..=0.45 + 1e-15).contains(&w));
        }
    }
}
