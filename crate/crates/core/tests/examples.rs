use std::sync::Arc;

use nalgebra::DMatrix;
use splitlab::dynamics::evolve_state;
use splitlab::linalg::{self, C64, ONE, ZERO};
use splitlab::models::sector_decompose;
use splitlab::ops::*;
use splitlab::runner::{self, ExperimentConfig, RunOptions};
use splitlab::spectral::{gap_scan, ground_bundle, SolverOptions};
use splitlab::split_diag::{split_report, SplitOptions};
use splitlab::{build_hamiltonian, fermion_spec, heisenberg_spec, xxz_spec, ChainConfig};

#[test]
fn embedding_follows_the_bit_order() {
    // site 0 is the least significant bit and bit value 0 is spin up
    let z0 = embed(&sigma(0, Pauli::Z), 2).unwrap().to_dense();
    let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, -ONE, ONE, -ONE]));
    assert_eq!(z0, expected);
    let id = embed(&LocalOperator::identity(vec![3]).unwrap(), 8).unwrap();
    assert_eq!(id.dimension(), 256);
    assert!(id.sub(&GlobalOperator::identity(id.basis().clone())).unwrap().max_abs_entry() == 0.0);
    let x1 = embed(&sigma(1, Pauli::X), 2).unwrap();
    assert!(x1.matmul(&x1).unwrap().sub(&GlobalOperator::identity(x1.basis().clone())).unwrap().max_abs_entry() == 0.0);
}

#[test]
fn operator_norms() {
    let basis = Arc::new(Basis::full(4).unwrap());
    assert!((operator_norm(&GlobalOperator::identity(basis), 1e-10).unwrap() - 1.0).abs() < 1e-12);
    let xy = LocalOperator::pauli_string(&[(0, Pauli::X), (2, Pauli::Y)], ONE).unwrap();
    assert!((operator_norm(&embed(&xy, 4).unwrap(), 1e-10).unwrap() - 1.0).abs() < 1e-12);
    let h = build_hamiltonian(&heisenberg_spec(1.0), &ChainConfig::open(2)).unwrap();
    assert!((operator_norm(&h, 1e-10).unwrap() - 3.0).abs() < 1e-10);
    // a sparse chain above the dense threshold goes through the Lanczos route
    let big = build_hamiltonian(&heisenberg_spec(1.0), &ChainConfig::open(10)).unwrap();
    let dense = linalg::eigvalsh(&big.to_dense());
    let exact = dense[0].abs().max(dense[dense.len() - 1].abs());
    assert!((operator_norm(&big, 1e-10).unwrap() - exact).abs() < 1e-6);
}

#[test]
fn commutators_of_disjoint_and_equal_operators_vanish() {
    let a = embed(&sigma(0, Pauli::X), 6).unwrap();
    let b = embed(&sigma(5, Pauli::Y), 6).unwrap();
    assert_eq!(commutator(&a, &b).unwrap().max_abs_entry(), 0.0);
    assert_eq!(commutator(&a, &a).unwrap().max_abs_entry(), 0.0);
    let c0 = embed(&jordan_wigner(FermionMode::annihilate(0), 6).unwrap(), 6).unwrap();
    let c1 = embed(&jordan_wigner(FermionMode::annihilate(1), 6).unwrap(), 6).unwrap();
    assert_eq!(anticommutator(&c0, &c1).unwrap().max_abs_entry(), 0.0);
}

#[test]
fn xx_and_hopping_agree_sector_by_sector() {
    let cfg = ChainConfig::open(8);
    let spin = sector_decompose(&build_hamiltonian(&xxz_spec(0.5, 0.0, 0.0), &cfg).unwrap(), ModelKind::Spin).unwrap();
    let ferm = sector_decompose(&build_hamiltonian(&fermion_spec(&[1.0], &[], 0.0).unwrap(), &cfg).unwrap(), ModelKind::Fermion)
        .unwrap();
    assert_eq!(spin.len(), ferm.len());
    for ((ls, hs), (lf, hf)) in spin.iter().zip(&ferm) {
        let up_s = ls.up_count(8, ModelKind::Spin).unwrap();
        let up_f = lf.up_count(8, ModelKind::Fermion).unwrap();
        assert_eq!(up_s, up_f);
        let a = linalg::eigvalsh(&hs.to_dense());
        let b = linalg::eigvalsh(&hf.to_dense());
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-10));
    }
}

#[test]
fn gap_trends() {
    let opts = SolverOptions::default();
    let heis = gap_scan(&heisenberg_spec(1.0), &[8, 10, 12], Boundary::Periodic, &opts).unwrap();
    let gaps: Vec<f64> = heis.rows.iter().map(|r| r.gap.unwrap()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");

    let polarized = ground_bundle(&xxz_spec(1.0, 1.0, 6.0), &ChainConfig::periodic(10), &opts).unwrap();
    assert_eq!(polarized.degeneracy, 1);
    assert!((polarized.gap.unwrap() - 4.0).abs() < 1e-8);

    // above the quasi-degenerate pair the Δ=2 gap stays open and shrinks far slower
    let rows: Vec<f64> = [8usize, 10, 12]
        .iter()
        .map(|&l| {
            let b = ground_bundle(&xxz_spec(1.0, 2.0, 0.0), &ChainConfig::periodic(l), &opts).unwrap();
            b.energies[2] - b.energies[0]
        })
        .collect();
    assert!(rows.iter().all(|&g| g > 2.0), "{rows:?}");
    let relative = |v: &[f64]| (v[0] - v[2]) / v[0];
    assert!(relative(&rows) < relative(&gaps), "{rows:?} vs {gaps:?}");
}

#[test]
fn evolution_preserves_the_norm() {
    let h = build_hamiltonian(&xxz_spec(1.0, 0.5, 0.3), &ChainConfig::open(9)).unwrap();
    let psi = linalg::random_unit_vector(h.dimension(), &mut linalg::seeded_rng(4));
    for t in [0.0, 0.7, 3.0, 10.0] {
        let out = evolve_state(&h, &psi, t, 1e-12).unwrap();
        assert!((linalg::norm(&out.state) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn split_report_covers_cluster_and_mixture() {
    let opts = SplitOptions { solver: SolverOptions { cluster_tol: 0.1, ..SolverOptions::default() }, ..SplitOptions::default() };
    let report = split_report(&xxz_spec(1.0, 4.0, 0.0), &ChainConfig::periodic(12), &opts).unwrap();
    assert_eq!(report.verdict_inputs.degeneracy, 2);
    assert_eq!(report.cluster.len(), 2);
    let mix = report.mixture.as_ref().unwrap();
    assert_eq!(mix.size, 2);
    // the cat states carry about one bit across the cut; so does their mixture
    assert!(report.cluster.iter().all(|c| (c.entropy_half_chain - 1.0).abs() < 0.3));
    assert!(report.cluster.iter().all(|c| c.u1_residual < 1e-10));

    let fermi = split_report(&fermion_spec(&[1.0], &[], 3.0).unwrap(), &ChainConfig::open(10), &SplitOptions::default()).unwrap();
    let f = fermi.cluster[0].fock.unwrap();
    assert!((f.f_fock - 1.0).abs() < 1e-10);
    assert!(fermi.entropy_half_chain < 1e-10 && fermi.product_distance < 1e-10);
}

#[test]
fn gauge_rotation_leaves_u1_residual() {
    let l = 6;
    let psi = linalg::random_unit_vector(1 << l, &mut linalg::seeded_rng(8));
    let theta = 0.83;
    let rotated: Vec<C64> = psi
        .iter()
        .enumerate()
        .map(|(s, a)| a * C64::from_polar(1.0, theta * charge_of_state(s as u64, l, ModelKind::Spin) as f64))
        .collect();
    let a = splitlab::split_diag::u1_residual(&psi, ModelKind::Spin).unwrap();
    let b = splitlab::split_diag::u1_residual(&rotated, ModelKind::Spin).unwrap();
    assert!((a - b).abs() < 1e-12);
    let mut vac = vec![ZERO; 1 << l];
    vac[(1 << l) - 1] = ONE;
    assert_eq!(splitlab::split_diag::u1_residual(&vac, ModelKind::Fermion).unwrap(), 0.0);
}

#[test]
fn runner_gap_record_matches_spectral() {
    let text = "task = \"gap\"\n[model]\nkind = \"heisenberg\"\n[chain]\nlength = 8\nboundary = \"periodic\"\n";
    let cfg = ExperimentConfig::from_toml(text).unwrap();
    let rec = runner::run(&cfg, RunOptions { use_cache: false, persist: false }).unwrap();
    let direct = ground_bundle(&heisenberg_spec(1.0), &cfg.chain, &SolverOptions { seed: 0, ..SolverOptions::default() }).unwrap();
    assert!((rec.payload["gap"].as_f64().unwrap() - direct.gap.unwrap()).abs() < 1e-10);
}

#[test]
fn delta_sweep_spot_checks_free_fermions() {
    let dir = tempfile::tempdir().unwrap();
    let text = "task = \"gap\"\n[model]\nkind = \"xxz\"\n[chain]\nlength = 12\nboundary = \"open\"\n";
    let mut cfg = ExperimentConfig::from_toml(text).unwrap();
    cfg.output_dir = dir.path().to_path_buf();
    let values = [0.0, 0.5, 1.0, 2.0, 4.0];
    let (records, index) = runner::sweep(&cfg, "model.delta", &values, 2, RunOptions::default()).unwrap();
    assert_eq!(records.len(), 5);
    assert!(dir.path().join(runner::SWEEP_INDEX).exists());
    assert!(index.entries.iter().all(|e| e.status == "ok"));

    // Σ (XX + YY) on an open chain is hopping 2 between neighbours
    let l = 12;
    let hop = DMatrix::<C64>::from_fn(l, l, |a, b| if a.abs_diff(b) == 1 { C64::new(2.0, 0.0) } else { ZERO });
    let e0: f64 = linalg::eigvalsh(&hop).iter().filter(|&&e| e < 0.0).sum();
    let got = records[0].payload["energies"][0].as_f64().unwrap();
    assert!((got - e0).abs() < 1e-8, "{got} vs {e0}");
    assert!(runner::sweep(&cfg, "model.delta", &[], 1, RunOptions::default()).is_err());
}
