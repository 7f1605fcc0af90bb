use super::*;
use crate::algebra::validate_kossakowski;
use crate::linalg::hermitian_eigenvalues;
use crate::sampling::{random_bloch, random_psd, rng};
use rand::Rng;
use rand_distr::StandardNormal;

fn site(x: f64, y: f64, z: f64) -> SingleSiteState {
    SingleSiteState::new(BlochTriple::new(x, y, z).unwrap())
}

fn spec(seed: u64) -> KossakowskiSpec {
    validate_kossakowski(&random_psd(3, seed)).unwrap()
}

fn random_hermitian(dim: usize, seed: u64) -> DMatrix<C64> {
    let mut r = rng(seed);
    let g = DMatrix::<C64>::from_fn(dim, dim, |_, _| {
        c(r.sample(StandardNormal), r.sample(StandardNormal))
    });
    (&g + g.adjoint()) * c(0.5, 0.0)
}

fn moments_close(a: &Moments, b: &Moments) -> f64 {
    (a.first - b.first).camax().max((a.second - b.second).camax())
}

#[test]
fn two_site_mixed_and_pure() {
    let st = build_product_state(2, &site(0.0, 0.0, 0.0), Representation::Sectors).unwrap();
    let SpinChainState::Sectors { blocks, .. } = &st else { panic!() };
    assert_eq!(blocks.len(), 2);
    assert_eq!((blocks[0].twice_j, blocks[0].multiplicity), (2, 1));
    assert_eq!((blocks[1].twice_j, blocks[1].multiplicity), (0, 1));
    assert!((blocks[0].block() - DMatrix::<C64>::identity(3, 3) * c(0.25, 0.0)).camax() < 1e-15);
    assert!((blocks[1].block()[(0, 0)] - c(0.25, 0.0)).norm() < 1e-15);
    assert!((st.trace() - 1.0).abs() < 1e-15);

    let st = build_product_state(2, &site(0.0, 0.0, 0.5), Representation::Sectors).unwrap();
    let SpinChainState::Sectors { blocks, .. } = &st else { panic!() };
    assert!((blocks[0].weighted[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
    assert!((st.trace() - 1.0).abs() < 1e-15);
}

#[test]
fn sector_spectrum_matches_symmetrized_tensor_power() {
    for (n, seed) in [(3, 1), (4, 2), (5, 3), (6, 4)] {
        let s = SingleSiteState::new(random_bloch(seed));
        let dense = build_product_state(n, &s, Representation::Dense).unwrap();
        let sect = build_product_state(n, &s, Representation::Sectors).unwrap();
        let SpinChainState::Dense { rho, .. } = &dense else { panic!() };
        let SpinChainState::Sectors { blocks, .. } = &sect else { panic!() };
        let mut from_blocks = Vec::new();
        for b in blocks {
            for ev in hermitian_eigenvalues(&b.block()) {
                for _ in 0..b.multiplicity {
                    from_blocks.push(ev);
                }
            }
        }
        from_blocks.sort_by(f64::total_cmp);
        let direct = hermitian_eigenvalues(rho);
        assert_eq!(direct.len(), from_blocks.len());
        for (x, y) in direct.iter().zip(&from_blocks) {
            assert!((x - y).abs() < 1e-13);
        }
        assert!(moments_close(&dense.moments(), &sect.moments()) < 1e-10);
    }
}

#[test]
fn six_sites_moments_agree() {
    let s = site(0.0, 0.0, 0.4);
    let dense = build_product_state(6, &s, Representation::Dense).unwrap();
    let sect = build_product_state(6, &s, Representation::Sectors).unwrap();
    assert!(moments_close(&dense.moments(), &sect.moments()) < 1e-10);
}

#[test]
fn size_limits() {
    let s = site(0.1, 0.0, 0.0);
    assert!(matches!(
        build_product_state(13, &s, Representation::Dense),
        Err(Error::SizeExceeded { .. })
    ));
    assert!(matches!(
        build_product_state(129, &s, Representation::Sectors),
        Err(Error::SizeExceeded { .. })
    ));
    let big = build_product_state(128, &s, Representation::Sectors).unwrap();
    assert!((big.trace() - 1.0).abs() < 1e-9);
}

#[test]
fn zero_generator_gives_zero_derivative() {
    let zero = validate_kossakowski(&DMatrix::zeros(3, 3)).unwrap();
    for rep in [Representation::Dense, Representation::Sectors] {
        let st = build_product_state(4, &site(0.1, 0.2, 0.3), rep).unwrap();
        let d = lindblad_rhs(&st, &zero).unwrap();
        assert_eq!(d.moments().first, Vector3::zeros());
        assert!(d.trace().abs() == 0.0);
        let traj = evolve_micro(&st, &zero, &[0.0, 1.0, 2.0], 1e-10).unwrap();
        for (_, s) in traj {
            assert_eq!(s, st);
        }
    }
}

#[test]
fn derivative_is_traceless() {
    for seed in 0..5 {
        let sp = spec(seed);
        for rep in [Representation::Dense, Representation::Sectors] {
            let st = build_product_state(5, &SingleSiteState::new(random_bloch(seed + 50)), rep).unwrap();
            let d = lindblad_rhs(&st, &sp).unwrap();
            assert!(d.trace().abs() < 1e-12);
        }
    }
}

#[test]
fn schrodinger_form_is_dual_to_heisenberg_form() {
    let n = 3;
    let dim = 1 << n;
    let sp = spec(7);
    // random density matrix
    let g = random_hermitian(dim, 8);
    let mut rho = &g * &g;
    rho /= rho.trace();
    let st = SpinChainState::Dense { n, rho: rho.clone() };
    let SpinChainState::Dense { rho: drho, .. } = lindblad_rhs(&st, &sp).unwrap() else { panic!() };
    for k in 0..20 {
        let x = random_hermitian(dim, 100 + k);
        let lhs = (&drho * &x).trace();
        let rhs = (&rho * dense::heisenberg(&x, &sp.d3(), n)).trace();
        assert!((lhs - rhs).norm() < 1e-10, "{lhs} vs {rhs}");
    }
}

#[test]
fn derivative_moments_agree_between_engines() {
    for seed in 0..4 {
        let sp = spec(20 + seed);
        let s = SingleSiteState::new(random_bloch(30 + seed));
        let dense = build_product_state(4, &s, Representation::Dense).unwrap();
        let sect = build_product_state(4, &s, Representation::Sectors).unwrap();
        let a = lindblad_rhs(&dense, &sp).unwrap().moments();
        let b = lindblad_rhs(&sect, &sp).unwrap().moments();
        assert!(moments_close(&a, &b) < 1e-10);
    }
}

#[test]
fn engines_agree_along_trajectories() {
    let grid: Vec<f64> = (0..=10).map(|i| 0.5 * i as f64).collect();
    for seed in 0..2 {
        let sp = spec(40 + seed);
        let s = SingleSiteState::new(random_bloch(60 + seed));
        let dense = build_product_state(6, &s, Representation::Dense).unwrap();
        let sect = build_product_state(6, &s, Representation::Sectors).unwrap();
        let td = evolve_micro(&dense, &sp, &grid, 1e-11).unwrap();
        let ts = evolve_micro(&sect, &sp, &grid, 1e-11).unwrap();
        for ((t, a), (_, b)) in td.iter().zip(&ts) {
            let oa = collective_observables(a, *t, FluctuationReference::Evolved).unwrap();
            let ob = collective_observables(b, *t, FluctuationReference::Evolved).unwrap();
            assert!((oa.mean.vector() - ob.mean.vector()).camax() < 1e-9);
            assert!((oa.fluct_cov - ob.fluct_cov).camax() < 1e-9);
            assert!((oa.pair_corr_12 - ob.pair_corr_12).abs() < 1e-9);
            assert!(a.exchange_defect() < 1e-10);
        }
    }
}

#[test]
fn product_state_observables() {
    let w = Vector3::new(0.2, -0.1, 0.3);
    for rep in [Representation::Dense, Representation::Sectors] {
        let st = build_product_state(6, &site(w[0], w[1], w[2]), rep).unwrap();
        let o = collective_observables(&st, 0.0, FluctuationReference::Evolved).unwrap();
        assert!((o.mean.vector() - w).camax() < 1e-12);
        let expect = Matrix3::identity() * 0.25 - w * w.transpose();
        assert!((o.fluct_cov - expect).camax() < 1e-12);
        assert!(o.pair_corr_12.abs() < 1e-12);
        assert!(pair_correlation_matrix(&st).unwrap().camax() < 1e-12);

        let mixed = build_product_state(5, &site(0.0, 0.0, 0.0), rep).unwrap();
        let o = collective_observables(&mixed, 0.0, FluctuationReference::Evolved).unwrap();
        assert!((o.fluct_cov - Matrix3::identity() * 0.25).camax() < 1e-12);
    }
}

#[test]
fn fluctuation_first_moment_vanishes_for_evolved_reference() {
    let sp = spec(3);
    let st = build_product_state(8, &SingleSiteState::new(random_bloch(4)), Representation::Sectors).unwrap();
    let traj = evolve_micro(&st, &sp, &[0.0, 1.5], 1e-10).unwrap();
    let s = &traj[1].1;
    let n = s.n() as f64;
    let mean = s.moments().first / n;
    // <F> = (<J> - N m)/sqrt(N)
    let f = (s.moments().first - mean * n) / n.sqrt();
    assert!(f.camax() < 1e-12);
    let fixed = collective_observables(s, 1.5, FluctuationReference::Fixed(random_bloch(4))).unwrap();
    let evolved = collective_observables(s, 1.5, FluctuationReference::Evolved).unwrap();
    // fixed reference adds the outer product of the mean shift
    let shift = (mean - random_bloch(4).vector()) * n.sqrt();
    assert!((fixed.fluct_cov - evolved.fluct_cov - shift * shift.transpose()).camax() < 1e-10);
}

#[test]
fn pair_correlation_matches_site_resolved_oracle() {
    let sp = spec(11);
    let st = build_product_state(6, &site(0.25, 0.1, 0.2), Representation::Dense).unwrap();
    let traj = evolve_micro(&st, &sp, &[0.0, 2.0], 1e-11).unwrap();
    let SpinChainState::Dense { rho, .. } = &traj[1].1 else { panic!() };
    let s = spin_half();
    let joint = dense::site_pair_expectation(rho, (0, &s[0]), (1, &s[1])).re;
    let a = dense::site_expectation(rho, 0, &s[0]).re;
    let b = dense::site_expectation(rho, 1, &s[1]).re;
    let collective = pair_correlation_12(&traj[1].1).unwrap();
    assert!((joint - a * b - collective).abs() < 1e-10);
    assert!(collective.abs() > 1e-6);
}

#[test]
fn exchange_asymmetry_is_rejected() {
    let up = site(0.0, 0.0, 0.5).density();
    let down = site(0.0, 0.0, -0.5).density();
    let rho = dense::product_state(&up, 1).kronecker(&dense::product_state(&down, 1));
    let st = SpinChainState::Dense { n: 2, rho };
    assert!(matches!(pair_correlation_12(&st), Err(Error::NotExchangeSymmetric(_))));
}

#[test]
fn qclt_examples() {
    let s = site(0.0, 0.0, 0.4);
    assert_eq!(qclt_product_char(&s, 1000, &Vector3::zeros()), c(1.0, 0.0));
    let r = Vector3::new(1.0, 0.0, 0.0);
    let limit = (-0.125f64).exp();
    let v = qclt_product_char(&s, 10_000, &r);
    assert!((v - c(limit, 0.0)).norm() < 1e-2);
    let s = site(0.2, -0.15, 0.3);
    let r = Vector3::new(0.8, 1.1, -0.9);
    let w = s.bloch.vector();
    let cov = Matrix3::identity() * 0.25 - w * w.transpose();
    let gauss = (-0.5 * r.dot(&(cov * r))).exp();
    let dev: Vec<f64> = [100u64, 1000, 10_000]
        .iter()
        .map(|&n| (qclt_product_char(&s, n, &r) - c(gauss, 0.0)).norm())
        .collect();
    assert!(dev[0] > dev[1] && dev[1] > dev[2]);
    for n in [1u64, 7, 100, 1_000_000] {
        assert!(qclt_product_char(&s, n, &r).norm() <= 1.0 + 1e-15);
    }
}

#[test]
fn qclt_matches_state_based_characteristic_function() {
    let s = site(0.2, -0.15, 0.3);
    let r = Vector3::new(0.8, 1.1, -0.9);
    for rep in [Representation::Dense, Representation::Sectors] {
        let st = build_product_state(8, &s, rep).unwrap();
        let a = fluctuation_char(&st, &r, FluctuationReference::Fixed(s.bloch)).unwrap();
        let b = qclt_product_char(&s, 8, &r);
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn characteristic_function_cumulant() {
    let sp = spec(9);
    let st = build_product_state(12, &SingleSiteState::new(random_bloch(10)), Representation::Sectors).unwrap();
    let s = &evolve_micro(&st, &sp, &[0.0, 1.0], 1e-11).unwrap()[1].1;
    let r = Vector3::new(0.6, -0.4, 0.9);
    let at_zero = fluctuation_char(s, &Vector3::zeros(), FluctuationReference::Evolved).unwrap();
    assert!((at_zero - c(1.0, 0.0)).norm() < 1e-10);
    let h = 1e-3;
    let lg = |e: f64| fluctuation_char(s, &(r * e), FluctuationReference::Evolved).unwrap().norm().ln();
    let second = (lg(h) - 2.0 * lg(0.0) + lg(-h)) / (h * h);
    let cov = collective_observables(s, 1.0, FluctuationReference::Evolved).unwrap().fluct_cov;
    let quad = r.dot(&(cov * r));
    assert!((-second - quad).abs() < 1e-4 * quad, "{} vs {quad}", -second);
}

#[test]
fn dense_and_sector_characteristic_functions_agree() {
    let sp = spec(12);
    let s = SingleSiteState::new(random_bloch(13));
    let r = Vector3::new(1.2, 0.3, -0.7);
    let grid = [0.0, 0.8];
    let d = evolve_micro(&build_product_state(6, &s, Representation::Dense).unwrap(), &sp, &grid, 1e-11).unwrap();
    let q = evolve_micro(&build_product_state(6, &s, Representation::Sectors).unwrap(), &sp, &grid, 1e-11).unwrap();
    for reference in [FluctuationReference::Evolved, FluctuationReference::Fixed(s.bloch)] {
        let a = fluctuation_char(&d[1].1, &r, reference).unwrap();
        let b = fluctuation_char(&q[1].1, &r, reference).unwrap();
        assert!((a - b).norm() < 1e-9);
    }
    let big = build_product_state(11, &s, Representation::Dense).unwrap();
    assert!(matches!(
        fluctuation_char(&big, &r, FluctuationReference::Evolved),
        Err(Error::SizeExceeded { .. })
    ));
}

#[test]
fn positivity_and_trace_hold_for_random_generators() {
    let grid: Vec<f64> = (0..=5).map(|i| i as f64).collect();
    for seed in 0..3 {
        let sp = spec(70 + seed);
        let st = build_product_state(16, &SingleSiteState::new(random_bloch(80 + seed)), Representation::Sectors).unwrap();
        let traj = evolve_micro(&st, &sp, &grid, 1e-10).unwrap();
        for (_, s) in &traj {
            assert!((s.trace() - 1.0).abs() < 1e-9);
            assert!(s.min_eigenvalue() >= -1e-7);
            let SpinChainState::Sectors { blocks, .. } = s else { panic!() };
            let SpinChainState::Sectors { blocks: b0, .. } = &st else { panic!() };
            assert!(blocks.iter().zip(b0).all(|(a, b)| a.twice_j == b.twice_j && a.multiplicity == b.multiplicity));
        }
    }
}
