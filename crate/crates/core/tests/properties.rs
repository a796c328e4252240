use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use splitlab::bell::{bell_seesaw, bell_seesaw_rho, chsh_value};
use splitlab::clustering::{cj_bracket, connected_correlator, decay_fit, CorrelationSeries, DecayModel};
use splitlab::dynamics::{heisenberg_operator, lr_norm, LrOptions};
use splitlab::linalg::{self, C64, ZERO};
use splitlab::models::sector_decompose;
use splitlab::ops::*;
use splitlab::split_diag::{entanglement_entropy, mutual_information, product_distance, reduced_density};
use splitlab::{build_hamiltonian, fermion_spec, xxz_spec, ChainConfig};

fn random_op(sites: Vec<usize>, seed: u64) -> LocalOperator {
    let mut rng = linalg::seeded_rng(seed);
    let d = 1 << sites.len();
    let m = DMatrix::from_fn(d, d, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    LocalOperator::new(sites, m).unwrap()
}

fn random_hermitian_op(sites: Vec<usize>, seed: u64) -> LocalOperator {
    let mut rng = linalg::seeded_rng(seed);
    LocalOperator::new(sites.clone(), linalg::random_hermitian(1 << sites.len(), &mut rng)).unwrap()
}

/// Hermitian operator with spectral norm one.
fn unit_hermitian(sites: Vec<usize>, seed: u64) -> LocalOperator {
    let op = random_hermitian_op(sites, seed);
    let n = linalg::spectral_norm_dense(op.matrix());
    op.scaled(C64::new(1.0 / n, 0.0))
}

fn random_state(l: usize, seed: u64) -> Vec<C64> {
    linalg::random_unit_vector(1 << l, &mut linalg::seeded_rng(seed))
}

fn dense_trace_norm_distance(psi: &[C64], cut: usize) -> f64 {
    let l = psi.len().trailing_zeros() as usize;
    let rho = DMatrix::from_fn(psi.len(), psi.len(), |r, c| psi[r] * psi[c].conj());
    let left: Vec<usize> = (0..cut).collect();
    let right: Vec<usize> = (cut..l).collect();
    let rl = reduced_density(psi, &left).unwrap().matrix;
    let rr = reduced_density(psi, &right).unwrap().matrix;
    linalg::trace_norm_hermitian(&(rho - linalg::kron(&rr, &rl)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn car_holds_for_random_pairs(l in 2usize..7, i in 0usize..7, j in 0usize..7) {
        let (i, j) = (i % l, j % l);
        let a = embed(&jordan_wigner(FermionMode::annihilate(i), l).unwrap(), l).unwrap();
        let b = embed(&jordan_wigner(FermionMode::create(j), l).unwrap(), l).unwrap();
        let anti = anticommutator(&a, &b).unwrap();
        let id = GlobalOperator::identity(a.basis().clone());
        let expected = if i == j { id } else { id.scaled(ZERO) };
        prop_assert!(anti.sub(&expected).unwrap().max_abs_entry() < 1e-13);
        let aa = embed(&jordan_wigner(FermionMode::annihilate(j), l).unwrap(), l).unwrap();
        prop_assert!(anticommutator(&a, &aa).unwrap().max_abs_entry() < 1e-13);
    }

    #[test]
    fn gauge_rotations_compose(start in 0usize..5, width in 1usize..4, t1 in -7.0f64..7.0, t2 in -7.0f64..7.0, seed in any::<u64>()) {
        let op = random_op((start..start + width).collect(), seed);
        for kind in [ModelKind::Spin, ModelKind::Fermion] {
            let twice = gauge_rotate(&gauge_rotate(&op, GaugeAngle::new(t1), kind), GaugeAngle::new(t2), kind);
            let once = gauge_rotate(&op, GaugeAngle::new(t1).compose(GaugeAngle::new(t2)), kind);
            prop_assert!(twice.distance(&once) < 1e-10);
        }
    }

    #[test]
    fn parity_is_an_involutive_automorphism(start in 0usize..4, seed in any::<u64>(), cut in 0usize..7) {
        let a = random_op((start..start + 2).collect(), seed);
        let b = random_op((start + 1..start + 3).collect(), seed ^ 7);
        prop_assert!(parity_transform(&parity_transform(&a)).distance(&a) < 1e-13);
        let lhs = parity_transform(&a.mul(&b));
        let rhs = parity_transform(&a).mul(&parity_transform(&b));
        prop_assert!(lhs.distance(&rhs) < 1e-12);
        let c = SiteIndex(cut);
        prop_assert!(partial_parity(&partial_parity(&a, c), c).distance(&a) < 1e-13);
    }

    #[test]
    fn translations_invert(l in 4usize..9, shift in 0i64..8, seed in any::<u64>()) {
        let op = random_op(vec![0, 1], seed);
        let there = translate(&op, shift, l, Boundary::Periodic).unwrap();
        let back = translate(&there, -shift, l, Boundary::Periodic).unwrap();
        prop_assert!(back.distance(&op) < 1e-13);
        let full = translate(&op, l as i64, l, Boundary::Periodic).unwrap();
        prop_assert!(full.distance(&op) < 1e-13);
    }

    #[test]
    fn sectors_partition_the_spectrum(l in 3usize..7, jxy in -1.5f64..1.5, delta in -2.0f64..2.0, h in -1.0f64..1.0) {
        let hm = build_hamiltonian(&xxz_spec(jxy, delta, h), &ChainConfig::open(l)).unwrap();
        prop_assert!(hm.hermiticity_deviation() < 1e-12);
        let mut full = linalg::eigvalsh(&hm.to_dense());
        let mut parts: Vec<f64> = sector_decompose(&hm, ModelKind::Spin)
            .unwrap()
            .values()
            .flat_map(|b| linalg::eigvalsh(&b.to_dense()))
            .collect();
        full.sort_by(f64::total_cmp);
        parts.sort_by(f64::total_cmp);
        prop_assert_eq!(full.len(), parts.len());
        for (a, b) in full.iter().zip(&parts) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn correlator_is_bilinear_and_real(seed in any::<u64>(), j in 1usize..4, alpha in -2.0f64..2.0) {
        let l = 6;
        let psi = random_state(l, seed);
        let q1 = random_hermitian_op(vec![0], seed ^ 1);
        let q2 = random_hermitian_op(vec![0], seed ^ 2);
        let r = random_hermitian_op(vec![0, 1], seed ^ 3);
        let c1 = connected_correlator(&psi, &q1, &r, j).unwrap();
        let c2 = connected_correlator(&psi, &q2, &r, j).unwrap();
        let mix = q1.add(&q2.scaled(C64::new(alpha, 0.0)));
        let cm = connected_correlator(&psi, &mix, &r, j).unwrap();
        prop_assert!((cm - (c1 + c2 * alpha)).norm() < 1e-12);
        prop_assert!(c1.im.abs() < 1e-12);
        let id = LocalOperator::identity(vec![0]).unwrap().scaled(C64::new(alpha, 0.0));
        prop_assert!(connected_correlator(&psi, &id, &r, j).unwrap().norm() < 1e-12);
        let bound = 2.0 * linalg::spectral_norm_dense(q1.matrix()) * linalg::spectral_norm_dense(r.matrix());
        prop_assert!(c1.norm() <= bound + 1e-12);
    }

    #[test]
    fn correlators_respect_the_bracket(seed in any::<u64>(), j in 1usize..3, w in 1usize..3) {
        let l = 6;
        let cut = 2;
        let psi = random_state(l, seed);
        let b = cj_bracket(&psi, cut, j, w, 6, seed).unwrap();
        prop_assert!(b.lower >= 0.0 && b.lower <= b.upper + 1e-12);
        for h in &b.history {
            prop_assert!(h.windows(2).all(|p| p[1] >= p[0] - 1e-14));
        }
        let left: Vec<usize> = (cut + 1 - w..=cut).collect();
        let q = unit_hermitian(left, seed ^ 11);
        let r = unit_hermitian((0..w).collect(), seed ^ 12);
        let c = connected_correlator(&psi, &q, &r, cut + j).unwrap();
        prop_assert!(c.norm() <= b.upper + 1e-12);
    }

    #[test]
    fn synthetic_exponentials_fit_exactly(c in 0.1f64..10.0, k in 0.05f64..2.0) {
        let vals: Vec<(usize, f64)> = (2..=8).map(|j| (j, c * (-k * j as f64).exp())).collect();
        let f = decay_fit(&CorrelationSeries::from_values(&vals, "synthetic"), (2, 8)).unwrap();
        prop_assert_eq!(f.model, DecayModel::Exponential);
        prop_assert!((f.exponential.rate - k).abs() < 1e-9 && (f.exponential.c / c - 1.0).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&f.r2));
    }

    #[test]
    fn bell_values_stay_in_range(seed in any::<u64>()) {
        let psi = random_state(3, seed);
        let out = bell_seesaw(&psi, &[0], &[2], 6, 300, seed).unwrap();
        prop_assert!(out.beta_lower >= 1.0 - 1e-9 && out.beta_lower <= SQRT_2 + 1e-9);
        prop_assert!(out.trace.windows(2).all(|p| p[1] >= p[0]));
        prop_assert!((out.beta_lower - out.oracle_value.unwrap()).abs() < 1e-6);
        let v = chsh_value(&psi, &out.quadruple).unwrap();
        prop_assert!((v - out.beta_lower).abs() < 1e-9 || out.beta_lower == 1.0);
    }

    #[test]
    fn bell_is_local_unitary_invariant(seed in any::<u64>()) {
        let psi = random_state(2, seed);
        let mut rng = linalg::seeded_rng(seed ^ 99);
        let unitary = |rng: &mut rand_chacha::ChaCha8Rng| {
            let h = linalg::random_hermitian(2, rng);
            let (vals, vecs) = linalg::eigh(&h);
            let phase = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(2, vals.iter().map(|v| C64::from_polar(1.0, 3.0 * v))));
            &vecs * phase * vecs.adjoint()
        };
        let u = linalg::kron(&unitary(&mut rng), &unitary(&mut rng));
        let rotated: Vec<C64> = (0..4).map(|r| (0..4).map(|c| u[(r, c)] * psi[c]).sum()).collect();
        let a = bell_seesaw(&psi, &[0], &[1], 8, 500, 1).unwrap().beta_lower;
        let b = bell_seesaw(&rotated, &[0], &[1], 8, 500, 1).unwrap().beta_lower;
        prop_assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn product_mixtures_do_not_violate(seed in any::<u64>()) {
        let mut rng = linalg::seeded_rng(seed);
        let mut rho = DMatrix::<C64>::zeros(4, 4);
        let weights: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() + 0.1).collect();
        let total: f64 = weights.iter().sum();
        for w in &weights {
            let a = linalg::random_unit_vector(2, &mut rng);
            let b = linalg::random_unit_vector(2, &mut rng);
            let v = nalgebra::DVector::from_iterator(4, (0..4).map(|k| a[k & 1] * b[k >> 1]));
            rho += &v * v.adjoint() * C64::new(w / total, 0.0);
        }
        let out = bell_seesaw_rho(&rho, &[0], &[1], 6, 300, seed).unwrap();
        prop_assert!(out.beta_lower <= 1.0 + 1e-8);
    }

    #[test]
    fn split_diagnostics_are_consistent(seed in any::<u64>(), cut in 1usize..5) {
        let l = 5;
        let psi = random_state(l, seed);
        let s = entanglement_entropy(&psi, cut).unwrap();
        let left: Vec<usize> = (0..cut).collect();
        let right: Vec<usize> = (cut..l).collect();
        prop_assert!((s - reduced_density(&psi, &left).unwrap().entropy()).abs() < 1e-10);
        prop_assert!((s - reduced_density(&psi, &right).unwrap().entropy()).abs() < 1e-10);
        prop_assert!((product_distance(&psi, cut).unwrap() - dense_trace_norm_distance(&psi, cut)).abs() < 1e-10);
        prop_assert!(mutual_information(&psi, &left, &right).unwrap() >= -1e-12);
    }

    #[test]
    fn lr_norm_matches_dense_and_is_bounded(seed in any::<u64>(), t in 0.0f64..2.5, j in 1usize..5) {
        let l = 6;
        let h = build_hamiltonian(&xxz_spec(1.0, 0.7, 0.2), &ChainConfig::open(l)).unwrap();
        let q = random_hermitian_op(vec![0], seed);
        let r = random_op(vec![j], seed ^ 5);
        let s = lr_norm(&h, &q, &r, t, false, &LrOptions::default()).unwrap();
        let qt = heisenberg_operator(&h, &embed(&q, l).unwrap(), t).unwrap();
        let dense = linalg::spectral_norm_dense(&commutator(&qt, &embed(&r, l).unwrap()).unwrap().to_dense());
        prop_assert!((s.norm_value - dense).abs() < 1e-7);
        prop_assert!(s.norm_value <= 2.0 * s.scale + 1e-9);
    }
}

#[test]
fn fermion_ring_is_translation_invariant() {
    let spec = fermion_spec(&[1.0, 0.3], &[], 0.4).unwrap();
    let report = splitlab::verify_symmetries(&spec, &ChainConfig::periodic(6)).unwrap();
    assert!(report.all_passed(), "{report:?}");
}

#[test]
fn lr_norm_resolves_small_non_hermitian_commutators() {
    let l = 6;
    let h = build_hamiltonian(&xxz_spec(1.0, 0.7, 0.2), &ChainConfig::open(l)).unwrap();
    let q = random_hermitian_op(vec![0], 0);
    let r = random_op(vec![3], 5);
    let t = 0.041612767862157084;
    let s = lr_norm(&h, &q, &r, t, false, &LrOptions::default()).unwrap();
    let qt = heisenberg_operator(&h, &embed(&q, l).unwrap(), t).unwrap();
    let dense = linalg::spectral_norm_dense(&commutator(&qt, &embed(&r, l).unwrap()).unwrap().to_dense());
    assert!((s.norm_value - dense).abs() < 1e-9 * s.scale.max(1.0), "{} vs {dense}", s.norm_value);
}
