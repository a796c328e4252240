//! CHSH-type Bell constant of a state across two disjoint windows.
//!
//! The optimizer is an alternating (seesaw) maximization over Hermitian
//! contractions; every half-step is solved exactly by a matrix sign, so the
//! recorded trace can only increase. Two-qubit windows additionally get the
//! closed-form value from the correlation matrix `T_ab = tr(ρ σ_a ⊗ σ_b)`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, C64, ZERO};
use crate::ops::local::{mat2_to_dense, LocalOperator, Pauli};
use crate::split_diag::{reduced_density, DENSE_WINDOW_CAP};

/// Largest per-side window dimension accepted by [`bell_seesaw`].
pub const WINDOW_DIM_CAP: usize = 64;
pub const SPECTRUM_TOL: f64 = 1e-10;
pub const SEESAW_TOL: f64 = 1e-10;
pub const TSIRELSON: f64 = std::f64::consts::SQRT_2;

/// Hermitian contractions `X₁, X₂` on the left window and `Y₁, Y₂` on the
/// right window.
#[derive(Debug, Clone)]
pub struct AdmissibleQuadruple {
    x1: LocalOperator,
    x2: LocalOperator,
    y1: LocalOperator,
    y2: LocalOperator,
}

fn check_contraction(op: &LocalOperator, name: &str) -> Result<()> {
    if !op.is_hermitian(SPECTRUM_TOL) {
        return Err(Error::InvalidOperator(format!("{name} is not Hermitian")));
    }
    let ev = linalg::eigvalsh(op.matrix());
    let lo = ev.first().copied().unwrap_or(0.0);
    let hi = ev.last().copied().unwrap_or(0.0);
    if lo < -1.0 - SPECTRUM_TOL || hi > 1.0 + SPECTRUM_TOL {
        return Err(Error::InvalidOperator(format!("{name} has spectrum [{lo}, {hi}] outside [-1, 1]")));
    }
    Ok(())
}

impl AdmissibleQuadruple {
    pub fn new(x1: LocalOperator, x2: LocalOperator, y1: LocalOperator, y2: LocalOperator) -> Result<Self> {
        for (op, name) in [(&x1, "X1"), (&x2, "X2"), (&y1, "Y1"), (&y2, "Y2")] {
            check_contraction(op, name)?;
        }
        if x1.support() != x2.support() || y1.support() != y2.support() {
            return Err(Error::InvalidOperator("each pair must share one window".into()));
        }
        if let Some(&s) = x1.support().iter().find(|s| y1.support().contains(s)) {
            return Err(Error::OverlappingSupports(s));
        }
        Ok(Self { x1, x2, y1, y2 })
    }

    /// All four operators equal to the identity on the given windows.
    pub fn identity(left: &[usize], right: &[usize]) -> Result<Self> {
        let x = LocalOperator::identity(left.to_vec())?;
        let y = LocalOperator::identity(right.to_vec())?;
        Self::new(x.clone(), x, y.clone(), y)
    }

    pub fn x1(&self) -> &LocalOperator {
        &self.x1
    }
    pub fn x2(&self) -> &LocalOperator {
        &self.x2
    }
    pub fn y1(&self) -> &LocalOperator {
        &self.y1
    }
    pub fn y2(&self) -> &LocalOperator {
        &self.y2
    }

    /// `½ (X₁(Y₁+Y₂) + X₂(Y₁−Y₂))`.
    pub fn bell_operator(&self) -> LocalOperator {
        let s = self.y1.add(&self.y2);
        let d = self.y1.sub(&self.y2);
        self.x1.mul(&s).add(&self.x2.mul(&d)).scaled(C64::new(0.5, 0.0))
    }
}

#[derive(Serialize)]
struct MatrixRecord<'a> {
    support: &'a [usize],
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl<'a> From<&'a LocalOperator> for MatrixRecord<'a> {
    fn from(op: &'a LocalOperator) -> Self {
        let m = op.matrix();
        let rows = |f: fn(&C64) -> f64| (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| f(&m[(r, c)])).collect()).collect();
        Self { support: op.support(), re: rows(|z| z.re), im: rows(|z| z.im) }
    }
}

impl Serialize for AdmissibleQuadruple {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("AdmissibleQuadruple", 4)?;
        st.serialize_field("x1", &MatrixRecord::from(&self.x1))?;
        st.serialize_field("x2", &MatrixRecord::from(&self.x2))?;
        st.serialize_field("y1", &MatrixRecord::from(&self.y1))?;
        st.serialize_field("y2", &MatrixRecord::from(&self.y2))?;
        st.end()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BellOutcome {
    pub beta_lower: f64,
    pub quadruple: AdmissibleQuadruple,
    pub trace: Vec<f64>,
    pub oracle_value: Option<f64>,
    pub tsirelson_ok: bool,
    pub converged: bool,
    pub restarts: usize,
}

/// Expectation of the Bell operator; errors if the result is not real.
pub fn chsh_value(psi: &[C64], q: &AdmissibleQuadruple) -> Result<f64> {
    let v = q.bell_operator().expectation(psi)?;
    if v.im.abs() > 1e-12 * v.norm().max(1.0) {
        return Err(Error::InvalidOperator(format!("Bell expectation has imaginary part {:e}", v.im)));
    }
    Ok(v.re)
}

fn check_windows(left: &[usize], right: &[usize]) -> Result<()> {
    if left.is_empty() || right.is_empty() {
        return Err(Error::Precondition("empty window".into()));
    }
    for w in [left, right] {
        if w.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::Precondition(format!("window {w:?} must be sorted and distinct")));
        }
        if 1usize << w.len() > WINDOW_DIM_CAP {
            return Err(Error::DimensionCap { dim: 1 << w.len(), cap: WINDOW_DIM_CAP });
        }
    }
    if let Some(&s) = left.iter().find(|s| right.contains(s)) {
        return Err(Error::OverlappingSupports(s));
    }
    if left.last() > right.first() {
        return Err(Error::Precondition("left window must lie entirely below the right window".into()));
    }
    Ok(())
}

/// Joint state on the two windows, indexed `a + d_A b`.
fn window_state(psi: &[C64], left: &[usize], right: &[usize]) -> Result<DMatrix<C64>> {
    let joint: Vec<usize> = left.iter().chain(right).copied().collect();
    if 1usize << joint.len() > DENSE_WINDOW_CAP {
        return Err(Error::DimensionCap { dim: 1 << joint.len(), cap: DENSE_WINDOW_CAP });
    }
    Ok(reduced_density(psi, &joint)?.matrix)
}

struct Contractor<'a> {
    rho: &'a DMatrix<C64>,
    da: usize,
    db: usize,
}

impl Contractor<'_> {
    /// Hermitian part of `M[a,a'] = Σ ρ[(a,b),(a',b')] Y[b',b]`.
    fn left(&self, y: &DMatrix<C64>) -> DMatrix<C64> {
        let m = DMatrix::from_fn(self.da, self.da, |a, a2| {
            let mut s = ZERO;
            for b in 0..self.db {
                for b2 in 0..self.db {
                    s += self.rho[(a + self.da * b, a2 + self.da * b2)] * y[(b2, b)];
                }
            }
            s
        });
        (&m + m.adjoint()) * C64::new(0.5, 0.0)
    }

    /// Hermitian part of `N[b,b'] = Σ ρ[(a,b),(a',b')] X[a',a]`.
    fn right(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        let m = DMatrix::from_fn(self.db, self.db, |b, b2| {
            let mut s = ZERO;
            for a in 0..self.da {
                for a2 in 0..self.da {
                    s += self.rho[(a + self.da * b, a2 + self.da * b2)] * x[(a2, a)];
                }
            }
            s
        });
        (&m + m.adjoint()) * C64::new(0.5, 0.0)
    }
}

struct Run {
    value: f64,
    mats: [DMatrix<C64>; 4],
    trace: Vec<f64>,
    converged: bool,
}

fn seesaw_run(c: &Contractor, mut y1: DMatrix<C64>, mut y2: DMatrix<C64>, max_iters: usize) -> Run {
    let half = C64::new(0.5, 0.0);
    let mut trace = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut converged = false;
    let (mut x1, mut x2) = (y1.clone(), y2.clone());
    for _ in 0..max_iters {
        let ms = c.left(&((&y1 + &y2) * half));
        let md = c.left(&((&y1 - &y2) * half));
        x1 = linalg::hermitian_sign(&ms);
        x2 = linalg::hermitian_sign(&md);
        let after_x = linalg::trace_norm_hermitian(&ms) + linalg::trace_norm_hermitian(&md);
        let ns = c.right(&((&x1 + &x2) * half));
        let nd = c.right(&((&x1 - &x2) * half));
        y1 = linalg::hermitian_sign(&ns);
        y2 = linalg::hermitian_sign(&nd);
        let after_y = linalg::trace_norm_hermitian(&ns) + linalg::trace_norm_hermitian(&nd);
        let prev = best;
        best = best.max(after_x).max(after_y);
        trace.push(best);
        if best - prev < SEESAW_TOL {
            converged = true;
            break;
        }
    }
    Run { value: best, mats: [x1, x2, y1, y2], trace, converged }
}

fn pauli_first(p: Pauli, sites: usize) -> DMatrix<C64> {
    // the first site of a window is its least significant bit
    let mut m = mat2_to_dense(&p.matrix());
    for _ in 1..sites {
        m = linalg::kron(&DMatrix::identity(2, 2), &m);
    }
    m
}

/// Seesaw lower bound on the Bell constant of `psi` across the windows.
pub fn bell_seesaw(
    psi: &[C64],
    left: &[usize],
    right: &[usize],
    restarts: usize,
    max_iters: usize,
    seed: u64,
) -> Result<BellOutcome> {
    check_windows(left, right)?;
    let rho = window_state(psi, left, right)?;
    bell_seesaw_rho(&rho, left, right, restarts, max_iters, seed)
}

/// Seesaw on an explicit joint density matrix indexed `a + d_A b`.
pub fn bell_seesaw_rho(
    rho: &DMatrix<C64>,
    left: &[usize],
    right: &[usize],
    restarts: usize,
    max_iters: usize,
    seed: u64,
) -> Result<BellOutcome> {
    check_windows(left, right)?;
    let da = 1usize << left.len();
    let db = 1usize << right.len();
    if rho.nrows() != da * db || rho.ncols() != da * db {
        return Err(Error::Precondition(format!("density matrix must be {0}x{0}", da * db)));
    }
    let contractor = Contractor { rho, da, db };
    let wb = right.len();
    let mut inits = vec![
        (pauli_first(Pauli::Z, wb), pauli_first(Pauli::X, wb)),
        (pauli_first(Pauli::X, wb), pauli_first(Pauli::Y, wb)),
        (pauli_first(Pauli::Y, wb), pauli_first(Pauli::Z, wb)),
    ];
    for k in 0..restarts.saturating_sub(inits.len()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let a = linalg::hermitian_sign(&linalg::random_hermitian(db, &mut rng));
        let b = linalg::hermitian_sign(&linalg::random_hermitian(db, &mut rng));
        inits.push((a, b));
    }
    let runs: Vec<Run> = inits.into_par_iter().map(|(a, b)| seesaw_run(&contractor, a, b, max_iters)).collect();
    let n_runs = runs.len();
    // first strictly-better run wins, so the result is independent of scheduling
    let best = runs.into_iter().reduce(|acc, r| if r.value > acc.value { r } else { acc }).expect("at least three runs");

    let (beta, quadruple) = if best.value >= 1.0 {
        let [x1, x2, y1, y2] = best.mats;
        let mk = |m: DMatrix<C64>, w: &[usize]| LocalOperator::new(w.to_vec(), m);
        let q = AdmissibleQuadruple::new(mk(x1, left)?, mk(x2, left)?, mk(y1, right)?, mk(y2, right)?)?;
        (best.value, q)
    } else {
        (1.0, AdmissibleQuadruple::identity(left, right)?)
    };
    let oracle_value = if da == 2 && db == 2 { Some(horodecki_oracle(rho)?) } else { None };
    Ok(BellOutcome {
        beta_lower: beta,
        quadruple,
        trace: best.trace,
        oracle_value,
        tsirelson_ok: beta <= TSIRELSON + 1e-9,
        converged: best.converged,
        restarts: n_runs,
    })
}

/// Closed-form two-qubit value `max(1, √(m₁+m₂))` from the correlation
/// matrix; the first qubit is the low index.
pub fn horodecki_oracle(rho: &DMatrix<C64>) -> Result<f64> {
    if rho.nrows() != 4 || rho.ncols() != 4 {
        return Err(Error::Precondition("two-qubit density matrix must be 4x4".into()));
    }
    let herm = (rho - rho.adjoint()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
    if herm > 1e-10 {
        return Err(Error::NonHermitian { deviation: herm });
    }
    let tr = rho.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > 1e-8 {
        return Err(Error::Precondition(format!("trace {tr} is not one")));
    }
    if linalg::eigvalsh(rho)[0] < -1e-10 {
        return Err(Error::Precondition("density matrix is not positive".into()));
    }
    let ps = [Pauli::X, Pauli::Y, Pauli::Z].map(|p| mat2_to_dense(&p.matrix()));
    let mut t = nalgebra::Matrix3::<f64>::zeros();
    for (a, pa) in ps.iter().enumerate() {
        for (b, pb) in ps.iter().enumerate() {
            t[(a, b)] = (rho * linalg::kron(pb, pa)).trace().re;
        }
    }
    let tt = t.transpose() * t;
    let mut m: Vec<f64> = tt.symmetric_eigenvalues().iter().copied().collect();
    m.sort_by(|a, b| b.total_cmp(a));
    Ok((m[0] + m[1]).max(0.0).sqrt().max(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaximalViolationReport {
    pub chsh: f64,
    /// `max |⟨X_i² P⟩ − ⟨P⟩|` and `max |⟨P X_i²⟩ − ⟨P⟩|` over the basis.
    pub square_residual: f64,
    /// `max |⟨(X₁X₂ + X₂X₁) P⟩|` over the basis.
    pub anticommutator_residual: f64,
    pub basis_size: usize,
    pub passed: bool,
}

/// Checks the algebraic consequences of attaining `√2` against every Pauli
/// string `P` on the left window.
pub fn maximal_violation_check(psi: &[C64], q: &AdmissibleQuadruple, tol: f64) -> Result<MaximalViolationReport> {
    let chsh = chsh_value(psi, q)?;
    if chsh < TSIRELSON - tol {
        return Err(Error::Precondition(format!("CHSH value {chsh} is below the maximum by more than {tol:e}")));
    }
    let left = q.x1.support().to_vec();
    let n = left.len();
    let squares = [q.x1.mul(&q.x1), q.x2.mul(&q.x2)];
    let anti = q.x1.mul(&q.x2).add(&q.x2.mul(&q.x1));
    let paulis = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    let mut square_residual = 0.0f64;
    let mut anticommutator_residual = 0.0f64;
    let total = 1usize << (2 * n);
    for code in 0..total {
        let word: Vec<(usize, Pauli)> = (0..n).map(|k| (left[k], paulis[(code >> (2 * k)) & 3])).collect();
        let p = LocalOperator::pauli_string(&word, linalg::ONE)?;
        let ep = p.expectation(psi)?;
        for s in &squares {
            square_residual = square_residual.max((s.mul(&p).expectation(psi)? - ep).norm());
            square_residual = square_residual.max((p.mul(s).expectation(psi)? - ep).norm());
        }
        anticommutator_residual = anticommutator_residual.max(anti.mul(&p).expectation(psi)?.norm());
    }
    Ok(MaximalViolationReport {
        chsh,
        square_residual,
        anticommutator_residual,
        basis_size: total,
        passed: square_residual < tol && anticommutator_residual < tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use crate::ops::local::sigma;

    fn singlet() -> Vec<C64> {
        let s = 1.0 / 2f64.sqrt();
        vec![ZERO, C64::new(s, 0.0), C64::new(-s, 0.0), ZERO]
    }

    fn textbook_quadruple() -> AdmissibleQuadruple {
        let r = 1.0 / 2f64.sqrt();
        let z1 = sigma(1, Pauli::Z);
        let x1 = sigma(1, Pauli::X);
        let y1 = z1.add(&x1).scaled(C64::new(-r, 0.0));
        let y2 = z1.scaled(C64::new(-r, 0.0)).add(&x1.scaled(C64::new(r, 0.0)));
        AdmissibleQuadruple::new(sigma(0, Pauli::Z), sigma(0, Pauli::X), y1, y2).unwrap()
    }

    #[test]
    fn identity_quadruple_gives_one() {
        let q = AdmissibleQuadruple::identity(&[0], &[1]).unwrap();
        assert!((chsh_value(&singlet(), &q).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn textbook_singlet_value() {
        assert!((chsh_value(&singlet(), &textbook_quadruple()).unwrap() - TSIRELSON).abs() < 1e-12);
    }

    #[test]
    fn contraction_check_rejects_large_spectrum() {
        let big = sigma(0, Pauli::Z).scaled(C64::new(1.5, 0.0));
        let y = sigma(1, Pauli::Z);
        assert!(AdmissibleQuadruple::new(big.clone(), big, y.clone(), y).is_err());
    }

    #[test]
    fn seesaw_on_singlet_and_product() {
        let out = bell_seesaw(&singlet(), &[0], &[1], 6, 200, 1).unwrap();
        assert!((out.beta_lower - TSIRELSON).abs() < 1e-6);
        assert!((out.oracle_value.unwrap() - TSIRELSON).abs() < 1e-12);
        assert!(out.trace.windows(2).all(|w| w[1] >= w[0]));
        let mut up = vec![ZERO; 4];
        up[0] = ONE;
        let out = bell_seesaw(&up, &[0], &[1], 6, 200, 1).unwrap();
        assert!((out.beta_lower - 1.0).abs() < 1e-9);
    }

    #[test]
    fn maximally_mixed_oracle_is_floored() {
        let rho = DMatrix::<C64>::identity(4, 4) * C64::new(0.25, 0.0);
        assert_eq!(horodecki_oracle(&rho).unwrap(), 1.0);
    }

    #[test]
    fn violation_check_on_textbook_optimum() {
        let rep = maximal_violation_check(&singlet(), &textbook_quadruple(), 1e-8).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.basis_size, 4);
        let mut up = vec![ZERO; 4];
        up[0] = ONE;
        assert!(matches!(maximal_violation_check(&up, &textbook_quadruple(), 1e-8), Err(Error::Precondition(_))));
    }
}
