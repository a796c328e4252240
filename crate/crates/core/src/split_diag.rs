//! Finite-size proxies for statistical independence of the two half-chains:
//! reduced states, entanglement entropy, product distance, mutual
//! information, Fock fidelities and charge-eigenstate residuals.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, C64, ZERO};
use crate::models::{charge_diagonal, ChainConfig, InteractionSpec, SectorLabel};
use crate::ops::basis::Basis;
use crate::ops::symmetry::ModelKind;
use crate::spectral::{ground_bundle, GroundStateBundle, SolverOptions};

/// Largest joint window dimension handled with dense density matrices.
pub const DENSE_WINDOW_CAP: usize = 4096;

fn chain_length(psi: &[C64]) -> Result<usize> {
    if psi.is_empty() || !psi.len().is_power_of_two() {
        return Err(Error::Precondition("state length must be a power of two".into()));
    }
    Ok(psi.len().trailing_zeros() as usize)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReducedState {
    pub window: Vec<usize>,
    #[serde(skip)]
    pub matrix: DMatrix<C64>,
    /// Eigenvalues in descending order.
    pub spectrum: Vec<f64>,
}

impl ReducedState {
    pub fn entropy(&self) -> f64 {
        linalg::entropy_bits(&self.spectrum)
    }
}

/// Amplitude matrix `M[a][e]` with `a` indexing `window` (site order =
/// bit order) and `e` the complement.
fn split_amplitudes(psi: &[C64], l: usize, window: &[usize]) -> DMatrix<C64> {
    let rest: Vec<usize> = (0..l).filter(|s| !window.contains(s)).collect();
    let da = 1usize << window.len();
    let de = 1usize << rest.len();
    let mut m = DMatrix::zeros(da, de);
    for (idx, amp) in psi.iter().enumerate() {
        if *amp == ZERO {
            continue;
        }
        let a = crate::ops::local::gather_bits(idx as u64, window);
        let e = crate::ops::local::gather_bits(idx as u64, &rest);
        m[(a, e)] = *amp;
    }
    m
}

fn check_window(window: &[usize], l: usize) -> Result<()> {
    if window.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition(format!("window {window:?} must be sorted and distinct")));
    }
    if let Some(&s) = window.iter().find(|&&s| s >= l) {
        return Err(Error::SupportOutOfRange { site: s, len: l });
    }
    Ok(())
}

fn descending_spectrum(m: &DMatrix<C64>) -> Vec<f64> {
    let mut v = linalg::eigvalsh(m);
    v.reverse();
    v
}

/// Partial trace of `|ψ⟩⟨ψ|` onto `window`.
pub fn reduced_density(psi: &[C64], window: &[usize]) -> Result<ReducedState> {
    let l = chain_length(psi)?;
    check_window(window, l)?;
    if 1usize << window.len() > DENSE_WINDOW_CAP {
        return Err(Error::DimensionCap { dim: 1 << window.len(), cap: DENSE_WINDOW_CAP });
    }
    let m = split_amplitudes(psi, l, window);
    let rho = &m * m.adjoint();
    let spectrum = descending_spectrum(&rho);
    Ok(ReducedState { window: window.to_vec(), matrix: rho, spectrum })
}

/// Reduced state of an equal-weight mixture of pure states.
pub fn reduced_density_mixture(states: &[&[C64]], window: &[usize]) -> Result<ReducedState> {
    if states.is_empty() {
        return Err(Error::Precondition("empty mixture".into()));
    }
    let mut acc: Option<DMatrix<C64>> = None;
    for s in states {
        let r = reduced_density(s, window)?.matrix;
        acc = Some(match acc {
            None => r,
            Some(a) => a + r,
        });
    }
    let rho = acc.expect("nonempty") / C64::new(states.len() as f64, 0.0);
    let spectrum = descending_spectrum(&rho);
    Ok(ReducedState { window: window.to_vec(), matrix: rho, spectrum })
}

/// Squared Schmidt coefficients across `cut` (left = sites `0..cut`),
/// descending.
pub fn schmidt_spectrum(psi: &[C64], cut: usize) -> Result<Vec<f64>> {
    let l = chain_length(psi)?;
    if cut == 0 || cut >= l {
        return Err(Error::Precondition(format!("cut {cut} must lie strictly inside a chain of length {l}")));
    }
    let rows = 1usize << cut;
    let cols = 1usize << (l - cut);
    // left sites are the low bits, so the amplitude matrix is a plain reshape
    let m = DMatrix::from_fn(rows, cols, |a, b| psi[a + rows * b]);
    let gram = if rows <= cols { &m * m.adjoint() } else { m.adjoint() * &m };
    let mut p: Vec<f64> = descending_spectrum(&gram).into_iter().map(|x| x.max(0.0)).collect();
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter_mut().for_each(|x| *x /= total);
    }
    Ok(p)
}

/// Von Neumann entropy (bits) of the left half across `cut`.
pub fn entanglement_entropy(psi: &[C64], cut: usize) -> Result<f64> {
    Ok(linalg::entropy_bits(&schmidt_spectrum(psi, cut)?))
}

/// `‖ρ_LR − ρ_L ⊗ ρ_R‖₁` for a pure state across `cut`.
///
/// In the Schmidt basis the difference splits into the span of `|kk⟩`,
/// where it equals `s sᵀ − diag(p²)`, and the diagonal `−p_k p_l` block on
/// `|kl⟩`, `k ≠ l`, whose trace norm is `1 − Σ p²`.
pub fn product_distance(psi: &[C64], cut: usize) -> Result<f64> {
    let p: Vec<f64> = schmidt_spectrum(psi, cut)?.into_iter().filter(|&x| x > 1e-16).collect();
    let r = p.len();
    let s: Vec<f64> = p.iter().map(|x| x.sqrt()).collect();
    let block = DMatrix::from_fn(r, r, |i, j| {
        let v = s[i] * s[j] - if i == j { p[i] * p[i] } else { 0.0 };
        C64::new(v, 0.0)
    });
    let off: f64 = 1.0 - p.iter().map(|x| x * x).sum::<f64>();
    Ok((linalg::trace_norm_hermitian(&block) + off.max(0.0)).clamp(0.0, 2.0))
}

fn joint_window(a: &[usize], b: &[usize], l: usize) -> Result<Vec<usize>> {
    check_window(a, l)?;
    check_window(b, l)?;
    if let Some(&s) = a.iter().find(|s| b.contains(s)) {
        return Err(Error::OverlappingSupports(s));
    }
    let mut ab: Vec<usize> = a.iter().chain(b).copied().collect();
    ab.sort_unstable();
    if 1usize << ab.len() > DENSE_WINDOW_CAP {
        return Err(Error::DimensionCap { dim: 1 << ab.len(), cap: DENSE_WINDOW_CAP });
    }
    Ok(ab)
}

/// `I(A:B) = S(A) + S(B) − S(AB)` in bits.
pub fn mutual_information(psi: &[C64], a: &[usize], b: &[usize]) -> Result<f64> {
    let l = chain_length(psi)?;
    let ab = joint_window(a, b, l)?;
    let sa = reduced_density(psi, a)?.entropy();
    let sb = reduced_density(psi, b)?.entropy();
    let sab = reduced_density(psi, &ab)?.entropy();
    Ok(sa + sb - sab)
}

/// Mutual information of an equal-weight mixture.
pub fn mutual_information_mixture(states: &[&[C64]], a: &[usize], b: &[usize]) -> Result<f64> {
    let l = chain_length(states.first().ok_or_else(|| Error::Precondition("empty mixture".into()))?)?;
    let ab = joint_window(a, b, l)?;
    let sa = reduced_density_mixture(states, a)?.entropy();
    let sb = reduced_density_mixture(states, b)?.entropy();
    let sab = reduced_density_mixture(states, &ab)?.entropy();
    Ok(sa + sb - sab)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FockFidelity {
    /// Weight on the empty state (all bits 1).
    pub f_fock: f64,
    /// Weight on the filled state (all bits 0).
    pub f_antifock: f64,
    pub max_density: f64,
    pub max_hole_density: f64,
}

pub fn fock_fidelity(psi: &[C64]) -> Result<FockFidelity> {
    let l = chain_length(psi)?;
    let vac = psi.len() - 1;
    let mut dens = vec![0.0f64; l];
    for (idx, a) in psi.iter().enumerate() {
        let w = a.norm_sqr();
        if w == 0.0 {
            continue;
        }
        for (j, d) in dens.iter_mut().enumerate() {
            if idx >> j & 1 == 0 {
                *d += w;
            }
        }
    }
    let norm = linalg::norm_sqr(psi);
    Ok(FockFidelity {
        f_fock: psi[vac].norm_sqr() / norm,
        f_antifock: psi[0].norm_sqr() / norm,
        max_density: dens.iter().fold(0.0f64, |a, d| a.max((d / norm).abs())),
        max_hole_density: dens.iter().fold(0.0f64, |a, d| a.max((1.0 - d / norm).abs())),
    })
}

/// `‖(Q − ⟨Q⟩) ψ‖` for the charge `Q` of the model kind.
pub fn u1_residual(psi: &[C64], kind: ModelKind) -> Result<f64> {
    let l = chain_length(psi)?;
    let q = charge_diagonal(&Basis::full(l)?, kind);
    let norm = linalg::norm_sqr(psi);
    let mean: f64 = psi.iter().zip(&q).map(|(a, x)| a.norm_sqr() * x).sum::<f64>() / norm;
    let res: f64 = psi.iter().zip(&q).map(|(a, x)| a.norm_sqr() * (x - mean) * (x - mean)).sum();
    Ok((res / norm).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitOptions {
    pub solver: SolverOptions,
    /// Width of the two windows used for mutual information.
    pub mi_width: usize,
    /// Separations between the windows (gap in sites between them).
    pub mi_separations: Vec<usize>,
}

impl Default for SplitOptions {
    fn default() -> Self {
        Self { solver: SolverOptions::default(), mi_width: 2, mi_separations: vec![1, 2, 3, 4] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiPoint {
    pub separation: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDiagnostics {
    pub index: usize,
    pub energy: f64,
    pub sector: Option<SectorLabel>,
    pub entropy_half_chain: f64,
    pub product_distance: f64,
    pub mutual_information: Vec<MiPoint>,
    pub u1_residual: f64,
    pub fock: Option<FockFidelity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureDiagnostics {
    pub size: usize,
    pub entropy_half_chain: f64,
    pub mutual_information: Vec<MiPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictInputs {
    pub gap: Option<f64>,
    pub degeneracy: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub length: usize,
    pub cut: usize,
    pub entropy_half_chain: f64,
    pub product_distance: f64,
    pub mutual_information: Vec<MiPoint>,
    pub u1_residual: f64,
    pub verdict_inputs: VerdictInputs,
    pub energies: Vec<f64>,
    /// One entry per vector of the ground cluster.
    pub cluster: Vec<StateDiagnostics>,
    /// Equal-weight mixture of the cluster, when it has more than one state.
    pub mixture: Option<MixtureDiagnostics>,
}

fn mi_windows(l: usize, width: usize, sep: usize) -> Option<(Vec<usize>, Vec<usize>)> {
    let span = 2 * width + sep;
    if span > l {
        return None;
    }
    let start = (l - span) / 2;
    let a: Vec<usize> = (start..start + width).collect();
    let b: Vec<usize> = (start + width + sep..start + span).collect();
    Some((a, b))
}

fn diagnose(bundle: &GroundStateBundle, i: usize, l: usize, kind: ModelKind, opts: &SplitOptions) -> Result<StateDiagnostics> {
    let psi = &bundle.vectors[i].amplitudes;
    let cut = l / 2;
    let mut mi = Vec::new();
    for &sep in &opts.mi_separations {
        if let Some((a, b)) = mi_windows(l, opts.mi_width, sep) {
            mi.push(MiPoint { separation: sep, value: mutual_information(psi, &a, &b)? });
        }
    }
    Ok(StateDiagnostics {
        index: i,
        energy: bundle.energies[i],
        sector: bundle.vectors[i].sector,
        entropy_half_chain: entanglement_entropy(psi, cut)?,
        product_distance: product_distance(psi, cut)?,
        mutual_information: mi,
        u1_residual: u1_residual(psi, kind)?,
        fock: match kind {
            ModelKind::Fermion => Some(fock_fidelity(psi)?),
            ModelKind::Spin => None,
        },
    })
}

/// Runs the ground-state solver and collects all split diagnostics.
pub fn split_report(spec: &InteractionSpec, cfg: &ChainConfig, opts: &SplitOptions) -> Result<SplitReport> {
    let bundle = ground_bundle(spec, cfg, &opts.solver)?;
    split_report_from_bundle(&bundle, cfg, spec.kind, opts)
}

pub fn split_report_from_bundle(
    bundle: &GroundStateBundle,
    cfg: &ChainConfig,
    kind: ModelKind,
    opts: &SplitOptions,
) -> Result<SplitReport> {
    let l = cfg.length;
    let d = bundle.degeneracy.max(1).min(bundle.vectors.len());
    let cluster: Vec<StateDiagnostics> = (0..d).map(|i| diagnose(bundle, i, l, kind, opts)).collect::<Result<_>>()?;
    let mixture = if d > 1 {
        let states: Vec<&[C64]> = bundle.vectors[..d].iter().map(|v| v.amplitudes.as_slice()).collect();
        let left: Vec<usize> = (0..l / 2).collect();
        let mut mi = Vec::new();
        for &sep in &opts.mi_separations {
            if let Some((a, b)) = mi_windows(l, opts.mi_width, sep) {
                mi.push(MiPoint { separation: sep, value: mutual_information_mixture(&states, &a, &b)? });
            }
        }
        Some(MixtureDiagnostics {
            size: d,
            entropy_half_chain: reduced_density_mixture(&states, &left)?.entropy(),
            mutual_information: mi,
        })
    } else {
        None
    };
    let g = &cluster[0];
    Ok(SplitReport {
        length: l,
        cut: l / 2,
        entropy_half_chain: g.entropy_half_chain,
        product_distance: g.product_distance,
        mutual_information: g.mutual_information.clone(),
        u1_residual: g.u1_residual,
        verdict_inputs: VerdictInputs { gap: bundle.gap, degeneracy: bundle.degeneracy },
        energies: bundle.energies.clone(),
        cluster,
        mixture,
    })
}

/// Writes `cut,entropy` for every cut of a pure state.
pub fn write_entropy_csv<W: Write>(psi: &[C64], out: W) -> Result<()> {
    let l = chain_length(psi)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cut", "entropy"])?;
    for cut in 1..l {
        w.write_record(&[cut.to_string(), format!("{:e}", entanglement_entropy(psi, cut)?)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;

    fn singlet() -> Vec<C64> {
        let s = 1.0 / 2f64.sqrt();
        vec![ZERO, C64::new(s, 0.0), C64::new(-s, 0.0), ZERO]
    }

    fn up_product(l: usize) -> Vec<C64> {
        let mut v = vec![ZERO; 1 << l];
        v[0] = ONE;
        v
    }

    #[test]
    fn singlet_reduced_state_is_maximally_mixed() {
        let r = reduced_density(&singlet(), &[0]).unwrap();
        assert!((r.spectrum[0] - 0.5).abs() < 1e-14 && (r.spectrum[1] - 0.5).abs() < 1e-14);
        assert!((entanglement_entropy(&singlet(), 1).unwrap() - 1.0).abs() < 1e-12);
        assert!((mutual_information(&singlet(), &[0], &[1]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn product_state_diagnostics_vanish() {
        let p = up_product(6);
        assert!(entanglement_entropy(&p, 3).unwrap().abs() < 1e-14);
        assert!(product_distance(&p, 3).unwrap().abs() < 1e-14);
        assert!(mutual_information(&p, &[0, 1], &[4, 5]).unwrap().abs() < 1e-12);
        assert_eq!(reduced_density(&p, &[2]).unwrap().spectrum[0], 1.0);
    }

    #[test]
    fn product_distance_matches_dense_for_singlet() {
        // |ψ⟩⟨ψ| − I/4 has eigenvalues 3/4 and −1/4 (three times)
        assert!((product_distance(&singlet(), 1).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn fock_and_u1() {
        let mut vac = vec![ZERO; 16];
        vac[15] = ONE;
        let f = fock_fidelity(&vac).unwrap();
        assert_eq!((f.f_fock, f.f_antifock), (1.0, 0.0));
        assert_eq!(f.max_density, 0.0);
        assert!(u1_residual(&vac, ModelKind::Fermion).unwrap() < 1e-15);
        // equal superposition of Σσ_z = 2 and 0 on two sites
        let s = 1.0 / 2f64.sqrt();
        let psi = vec![C64::new(s, 0.0), C64::new(s, 0.0), ZERO, ZERO];
        assert!((u1_residual(&psi, ModelKind::Spin).unwrap() - 1.0).abs() < 1e-12);
    }
}
