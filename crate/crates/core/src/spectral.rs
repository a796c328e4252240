//! Low-lying spectrum: eigenpairs merged across charge sectors, ground-state
//! degeneracy, the gap above the ground cluster, and gap trends in `L`.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krylov::{self, EigOptions};
use crate::linalg::{self, C64, ZERO};
use crate::models::{build_hamiltonian, build_sector_hamiltonian, sector_labels, ChainConfig, InteractionSpec, SectorLabel, Symmetry};
use crate::ops::basis::Basis;
use crate::ops::sparse::GlobalOperator;
use crate::ops::symmetry::Boundary;

pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;
pub const DEFAULT_K: usize = 4;
/// Blocks up to this dimension are diagonalized densely.
pub const DENSE_EIG_DIM: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub k: usize,
    pub tol: f64,
    pub cluster_tol: f64,
    pub dense_threshold: usize,
    pub use_sectors: bool,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            tol: 1e-9,
            cluster_tol: DEFAULT_CLUSTER_TOL,
            dense_threshold: DENSE_EIG_DIM,
            use_sectors: true,
            seed: EigOptions::default().seed,
        }
    }
}

/// Eigenvector in the full `2^L` basis, tagged with its charge sector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Eigvec {
    pub sector: Option<SectorLabel>,
    pub amplitudes: Vec<C64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundStateBundle {
    pub energies: Vec<f64>,
    pub vectors: Vec<Eigvec>,
    /// Distance from the ground cluster to the next level; `None` when every
    /// computed level lies in the cluster.
    pub gap: Option<f64>,
    pub degeneracy: usize,
    pub method: SolveMethod,
    pub residuals: Vec<f64>,
    pub cluster_tol: f64,
}

impl GroundStateBundle {
    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    pub fn ground_vector(&self) -> &[C64] {
        &self.vectors[0].amplitudes
    }

    /// Vectors of the lowest cluster.
    pub fn cluster(&self) -> &[Eigvec] {
        &self.vectors[..self.degeneracy.min(self.vectors.len())]
    }

    fn finish(mut pairs: Vec<Pair>, k: usize, cluster_tol: f64, method: SolveMethod) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Precondition("no eigenpairs computed".into()));
        }
        pairs.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.sector.cmp(&b.sector)));
        let energies_all: Vec<f64> = pairs.iter().map(|p| p.energy).collect();
        let d = cluster_size(&energies_all, cluster_tol);
        let keep = k.max(d + 1).min(pairs.len());
        pairs.truncate(keep);
        let energies: Vec<f64> = pairs.iter().map(|p| p.energy).collect();
        let gap = (d < energies.len()).then(|| energies[d] - energies[0]);
        let residuals = pairs.iter().map(|p| p.residual).collect();
        let vectors = pairs
            .into_iter()
            .map(|p| Eigvec { sector: p.sector, amplitudes: p.basis.to_full(&p.vector) })
            .collect();
        Ok(Self { energies, vectors, gap, degeneracy: d, method, residuals, cluster_tol })
    }
}

struct Pair {
    energy: f64,
    sector: Option<SectorLabel>,
    basis: Arc<Basis>,
    vector: Vec<C64>,
    residual: f64,
}

fn cluster_size(energies: &[f64], tol: f64) -> usize {
    let e0 = energies[0];
    energies.iter().take_while(|&&e| e - e0 < tol).count()
}

/// Size of the lowest cluster: the largest `d` with `E_i − E_0 < tol` for
/// all `i < d`.
pub fn detect_degeneracy(bundle: &GroundStateBundle, cluster_tol: f64) -> usize {
    if bundle.energies.is_empty() {
        return 0;
    }
    cluster_size(&bundle.energies, cluster_tol)
}

fn residual(h: &GlobalOperator, e: f64, v: &[C64]) -> f64 {
    let mut hv = vec![ZERO; v.len()];
    h.matvec(v, &mut hv);
    linalg::axpy(C64::new(-e, 0.0), v, &mut hv);
    linalg::norm(&hv)
}

fn solve_block(h: &GlobalOperator, k: usize, opts: &SolverOptions, seed: u64) -> Result<(Vec<Pair>, SolveMethod)> {
    if !h.hermitian_flag() {
        return Err(Error::NonHermitian { deviation: h.hermiticity_deviation() });
    }
    let n = h.dimension();
    let k = k.min(n);
    let sector = None;
    if n <= opts.dense_threshold {
        let (vals, vecs) = linalg::eigh(&h.to_dense());
        let pairs = (0..k)
            .map(|i| {
                let v: Vec<C64> = vecs.column(i).iter().copied().collect();
                Pair { energy: vals[i], sector, basis: h.basis().clone(), residual: residual(h, vals[i], &v), vector: v }
            })
            .collect();
        return Ok((pairs, SolveMethod::Dense));
    }
    let eo = EigOptions { tol: opts.tol, seed, ..Default::default() };
    let res = krylov::lowest_eigenpairs(h, k, &eo)?;
    let pairs = res
        .values
        .into_iter()
        .zip(res.vectors)
        .zip(res.residuals)
        .map(|((e, v), r)| Pair { energy: e, sector, basis: h.basis().clone(), vector: v, residual: r })
        .collect();
    Ok((pairs, SolveMethod::Lanczos))
}

/// The `k` lowest eigenpairs of one operator.
pub fn lowest_eigenpairs(h: &GlobalOperator, k: usize, tol: f64) -> Result<GroundStateBundle> {
    let opts = SolverOptions { k, tol, ..Default::default() };
    lowest_eigenpairs_with(h, &opts)
}

pub fn lowest_eigenpairs_with(h: &GlobalOperator, opts: &SolverOptions) -> Result<GroundStateBundle> {
    if opts.k < 2 || opts.k > h.dimension() {
        return Err(Error::Precondition(format!(
            "need 2 <= k <= dimension, got k = {} for dimension {}",
            opts.k,
            h.dimension()
        )));
    }
    let (pairs, method) = solve_block(h, opts.k, opts, opts.seed)?;
    GroundStateBundle::finish(pairs, opts.k, opts.cluster_tol, method)
}

/// Low-lying spectrum of a model, solved sector by sector when the interaction
/// declares U(1) invariance.
pub fn ground_bundle(spec: &InteractionSpec, cfg: &ChainConfig, opts: &SolverOptions) -> Result<GroundStateBundle> {
    if opts.k == 0 {
        return Err(Error::Precondition("k must be positive".into()));
    }
    if !(opts.use_sectors && spec.declares(Symmetry::U1Gauge)) {
        let h = build_hamiltonian(spec, cfg)?;
        let k = opts.k.min(h.dimension());
        let (pairs, method) = solve_block(&h, k, opts, opts.seed)?;
        return GroundStateBundle::finish(pairs, k, opts.cluster_tol, method);
    }
    let labels = sector_labels(cfg.length, spec.kind);
    let solved: Vec<Result<(Vec<Pair>, SolveMethod)>> = labels
        .par_iter()
        .enumerate()
        .map(|(i, &label)| {
            let h = build_sector_hamiltonian(spec, cfg, label)?;
            let (mut pairs, m) = solve_block(&h, opts.k, opts, opts.seed.wrapping_add(i as u64))?;
            for p in pairs.iter_mut() {
                p.sector = Some(label);
            }
            Ok((pairs, m))
        })
        .collect();
    let mut all = Vec::new();
    let mut method = SolveMethod::Dense;
    for r in solved {
        let (pairs, m) = r?;
        if m == SolveMethod::Lanczos {
            method = SolveMethod::Lanczos;
        }
        all.extend(pairs);
    }
    GroundStateBundle::finish(all, opts.k, opts.cluster_tol, method)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    #[serde(rename = "L")]
    pub length: usize,
    pub gap: Option<f64>,
    pub degeneracy: usize,
    pub e0_per_site: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapScan {
    pub rows: Vec<GapRow>,
}

impl GapScan {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Gap above the ground cluster for each chain length.
pub fn gap_scan(spec: &InteractionSpec, lengths: &[usize], boundary: Boundary, opts: &SolverOptions) -> Result<GapScan> {
    let rows = lengths
        .iter()
        .map(|&l| {
            let b = ground_bundle(spec, &ChainConfig::new(l, boundary), opts)?;
            Ok(GapRow { length: l, gap: b.gap, degeneracy: b.degeneracy, e0_per_site: b.energies[0] / l as f64 })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GapScan { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{heisenberg_spec, xxz_spec};
    use nalgebra::DMatrix;

    #[test]
    fn two_site_heisenberg_gap() {
        let h = build_hamiltonian(&heisenberg_spec(1.0), &ChainConfig::open(2)).unwrap();
        let b = lowest_eigenpairs(&h, 2, 1e-10).unwrap();
        assert!((b.energies[0] + 3.0).abs() < 1e-12 && (b.energies[1] - 1.0).abs() < 1e-12);
        assert_eq!(b.degeneracy, 1);
        assert!((b.gap.unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn identity_is_degenerate() {
        let id = GlobalOperator::identity(Arc::new(Basis::full(3).unwrap()));
        let b = lowest_eigenpairs(&id, 2, 1e-10).unwrap();
        assert_eq!(b.energies[..2], [1.0, 1.0]);
        assert!(detect_degeneracy(&b, 1e-6) >= 2);
    }

    #[test]
    fn degeneracy_counts() {
        let mk = |e: Vec<f64>| GroundStateBundle {
            residuals: vec![0.0; e.len()],
            vectors: vec![],
            gap: None,
            degeneracy: 0,
            method: SolveMethod::Dense,
            cluster_tol: 0.0,
            energies: e,
        };
        assert_eq!(detect_degeneracy(&mk(vec![-3.0, 1.0]), 1e-6), 1);
        assert_eq!(detect_degeneracy(&mk(vec![2.0, 2.0, 5.0]), 1e-6), 2);
    }

    #[test]
    fn xx_chain_matches_free_fermions() {
        let l = 12;
        // single-particle hopping matrix of Σ(XX+YY) = 2Σ(σ⁺σ⁻ + h.c.)
        let hop = DMatrix::from_fn(l, l, |i, j| if i.abs_diff(j) == 1 { C64::new(2.0, 0.0) } else { ZERO });
        let e0: f64 = linalg::eigvalsh(&hop).into_iter().filter(|e| *e < 0.0).sum();
        let b = ground_bundle(&xxz_spec(1.0, 0.0, 0.0), &ChainConfig::open(l), &SolverOptions::default()).unwrap();
        assert!((b.energies[0] - e0).abs() < 1e-9, "{} vs {e0}", b.energies[0]);
        assert!(b.residuals.iter().all(|r| *r < 1e-9));
    }

    #[test]
    fn sectors_agree_with_full_lanczos() {
        let spec = xxz_spec(1.0, 0.7, 0.3);
        let cfg = ChainConfig::periodic(10);
        let a = ground_bundle(&spec, &cfg, &SolverOptions::default()).unwrap();
        let full = SolverOptions { use_sectors: false, ..Default::default() };
        let b = ground_bundle(&spec, &cfg, &full).unwrap();
        assert_eq!(b.method, SolveMethod::Lanczos);
        for i in 0..4 {
            assert!((a.energies[i] - b.energies[i]).abs() < 1e-9);
        }
        for v in &a.vectors {
            assert!((linalg::norm(&v.amplitudes) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn gap_scan_csv_columns() {
        let scan = gap_scan(&heisenberg_spec(1.0), &[4, 6], Boundary::Periodic, &SolverOptions::default()).unwrap();
        assert_eq!(scan.rows.len(), 2);
        let text = scan.to_csv_string().unwrap();
        assert!(text.starts_with("L,gap,degeneracy,e0_per_site\n"));
    }
}
