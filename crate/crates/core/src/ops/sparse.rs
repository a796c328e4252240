//! Compressed-row operators on a chain basis.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, LinearMap, C64, ONE, ZERO};
use crate::ops::basis::{Basis, BasisTag};
use crate::ops::local::{gather_bits, scatter_bits, LocalOperator};
use crate::ops::string_op::StringOperator;

/// Entries whose magnitude falls below this after summation are dropped.
pub const DROP_TOL: f64 = 1e-14;

/// Absolute entry tolerance for the Hermitian flag.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Dimension up to which dense algorithms are used directly.
pub const DENSE_NORM_DIM: usize = 256;

#[derive(Debug, Clone)]
pub struct GlobalOperator {
    basis: Arc<Basis>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<C64>,
    hermitian: bool,
}

type Row = Vec<(u32, C64)>;

fn merge_sorted(mut entries: Vec<(u64, C64)>) -> Vec<(u64, C64)> {
    entries.sort_by_key(|e| e.0);
    let mut out: Vec<(u64, C64)> = Vec::with_capacity(entries.len());
    for (k, v) in entries {
        match out.last_mut() {
            Some(last) if last.0 == k => last.1 += v,
            _ => out.push((k, v)),
        }
    }
    out.retain(|e| e.1.norm() > DROP_TOL);
    out
}

impl GlobalOperator {
    fn from_rows(basis: Arc<Basis>, rows: Vec<Row>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for r in rows {
            for (c, v) in r {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        let mut op = Self {
            basis,
            row_ptr,
            cols,
            vals,
            hermitian: false,
        };
        op.hermitian = op.hermiticity_deviation() <= HERMITIAN_TOL;
        op
    }

    /// Sums string operators into a sparse matrix on `basis`.
    ///
    /// On a sector basis, the summed operator must not couple the sector to
    /// the rest of the space; leaked weight above 1e-10 is an error.
    pub fn from_terms(basis: Arc<Basis>, terms: &[StringOperator]) -> Result<Self> {
        let sites = basis.sites();
        for t in terms {
            if let Some(m) = t.max_site() {
                if m >= sites {
                    return Err(Error::SupportOutOfRange { site: m, len: sites });
                }
            }
        }
        let prepared: Vec<(&StringOperator, Vec<Vec<(usize, C64)>>)> =
            terms.iter().map(|t| (t, t.local().row_entries())).collect();
        let dim = basis.dim();
        let results: Vec<(Row, f64)> = (0..dim)
            .into_par_iter()
            .map(|i| {
                let s = basis.state(i);
                let mut raw: Vec<(u64, C64)> = Vec::new();
                for (term, rows) in &prepared {
                    let supp = term.local().support();
                    let sign = term.string_sign(s);
                    let r = gather_bits(s, supp);
                    for &(c, v) in &rows[r] {
                        raw.push((scatter_bits(s, supp, c), v * sign));
                    }
                }
                let merged = merge_sorted(raw);
                let mut leak = 0.0;
                let mut row = Vec::with_capacity(merged.len());
                for (t, v) in merged {
                    match basis.index_of(t) {
                        Some(j) => row.push((j as u32, v)),
                        None => leak += v.norm_sqr(),
                    }
                }
                (row, leak)
            })
            .collect();
        let leak = results.iter().map(|r| r.1).fold(0.0f64, f64::max).sqrt();
        if leak > 1e-10 {
            return Err(Error::SymmetryViolation {
                symmetry: format!("closure on {}", basis.tag()),
                residual: leak,
            });
        }
        Ok(Self::from_rows(basis, results.into_iter().map(|r| r.0).collect()))
    }

    pub fn zero(basis: Arc<Basis>) -> Self {
        let dim = basis.dim();
        Self::from_rows(basis, vec![Vec::new(); dim])
    }

    pub fn identity(basis: Arc<Basis>) -> Self {
        let dim = basis.dim();
        Self::from_rows(basis, (0..dim).map(|i| vec![(i as u32, ONE)]).collect())
    }

    /// Diagonal operator from real entries.
    pub fn diagonal(basis: Arc<Basis>, diag: &[f64]) -> Result<Self> {
        if diag.len() != basis.dim() {
            return Err(Error::Precondition("diagonal length must match the basis".into()));
        }
        let rows = diag
            .iter()
            .enumerate()
            .map(|(i, &d)| if d.abs() > DROP_TOL { vec![(i as u32, C64::new(d, 0.0))] } else { Vec::new() })
            .collect();
        Ok(Self::from_rows(basis, rows))
    }

    pub fn from_dense(basis: Arc<Basis>, m: &DMatrix<C64>) -> Result<Self> {
        let dim = basis.dim();
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::Precondition(format!(
                "dense matrix {}x{} does not match basis dimension {dim}",
                m.nrows(),
                m.ncols()
            )));
        }
        let rows = (0..dim)
            .map(|r| {
                (0..dim)
                    .filter_map(|c| {
                        let v = m[(r, c)];
                        (v.norm() > DROP_TOL).then_some((c as u32, v))
                    })
                    .collect()
            })
            .collect();
        Ok(Self::from_rows(basis, rows))
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn tag(&self) -> BasisTag {
        self.basis.tag()
    }

    pub fn dimension(&self) -> usize {
        self.basis.dim()
    }

    pub fn hermitian_flag(&self) -> bool {
        self.hermitian
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()].iter().map(|&c| c as usize).zip(self.vals[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&(c as u32)) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => ZERO,
        }
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.vals.iter().fold(0.0, |a, v| a.max(v.norm()))
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dimension();
        let mut m = DMatrix::zeros(n, n);
        for r in 0..n {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dimension());
        assert_eq!(y.len(), self.dimension());
        const CHUNK: usize = 4096;
        y.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, ych)| {
            let base = ci * CHUNK;
            for (k, yi) in ych.iter_mut().enumerate() {
                let r = base + k;
                let mut acc = ZERO;
                for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.vals[idx] * x[self.cols[idx] as usize];
                }
                *yi = acc;
            }
        });
    }

    /// `y = A† x`.
    pub fn matvec_adjoint(&self, x: &[C64], y: &mut [C64]) {
        if self.hermitian {
            return self.matvec(x, y);
        }
        y.iter_mut().for_each(|v| *v = ZERO);
        for (r, xr) in x.iter().enumerate() {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.cols[idx] as usize] += self.vals[idx].conj() * xr;
            }
        }
    }

    pub fn apply_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; x.len()];
        self.matvec(x, &mut y);
        y
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let n = self.dimension();
        let mut rows: Vec<Row> = vec![Vec::new(); n];
        for r in 0..n {
            for (c, v) in self.row(r) {
                rows[c].push((r as u32, v.conj()));
            }
        }
        Self::from_rows(self.basis.clone(), rows)
    }

    /// Largest entry of `A − A†`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dimension();
        let mut worst = 0.0f64;
        for r in 0..n {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    fn check_same_basis(&self, other: &Self) -> Result<()> {
        if self.tag() != other.tag() {
            return Err(Error::BasisMismatch {
                left: self.tag().to_string(),
                right: other.tag().to_string(),
            });
        }
        Ok(())
    }

    pub fn scaled(&self, c: C64) -> Self {
        let rows = (0..self.dimension())
            .map(|r| self.row(r).map(|(j, v)| (j as u32, v * c)).filter(|e| e.1.norm() > DROP_TOL).collect())
            .collect();
        Self::from_rows(self.basis.clone(), rows)
    }

    /// `alpha * self + beta * other`.
    pub fn linear_combination(&self, alpha: C64, other: &Self, beta: C64) -> Result<Self> {
        self.check_same_basis(other)?;
        let rows = (0..self.dimension())
            .into_par_iter()
            .map(|r| {
                let raw: Vec<(u64, C64)> = self
                    .row(r)
                    .map(|(c, v)| (c as u64, alpha * v))
                    .chain(other.row(r).map(|(c, v)| (c as u64, beta * v)))
                    .collect();
                merge_sorted(raw).into_iter().map(|(c, v)| (c as u32, v)).collect()
            })
            .collect();
        Ok(Self::from_rows(self.basis.clone(), rows))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.linear_combination(ONE, other, ONE)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.linear_combination(ONE, other, -ONE)
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_same_basis(other)?;
        let rows = (0..self.dimension())
            .into_par_iter()
            .map(|r| {
                let mut raw: Vec<(u64, C64)> = Vec::new();
                for (k, a) in self.row(r) {
                    for (c, b) in other.row(k) {
                        raw.push((c as u64, a * b));
                    }
                }
                merge_sorted(raw).into_iter().map(|(c, v)| (c as u32, v)).collect()
            })
            .collect();
        Ok(Self::from_rows(self.basis.clone(), rows))
    }

    /// Restriction to a sector basis of the same chain. Returns the block and
    /// the norm of the weight that left the sector.
    pub fn restrict(&self, target: Arc<Basis>) -> Result<(Self, f64)> {
        if target.sites() != self.basis.sites() {
            return Err(Error::BasisMismatch {
                left: self.tag().to_string(),
                right: target.tag().to_string(),
            });
        }
        let results: Vec<(Row, f64)> = (0..target.dim())
            .into_par_iter()
            .map(|i| {
                let s = target.state(i);
                let src = self.basis.index_of(s);
                let mut leak = 0.0;
                let mut row: Row = Vec::new();
                if let Some(src) = src {
                    for (c, v) in self.row(src) {
                        match target.index_of(self.basis.state(c)) {
                            Some(j) => row.push((j as u32, v)),
                            None => leak += v.norm_sqr(),
                        }
                    }
                }
                row.sort_by_key(|e| e.0);
                (row, leak)
            })
            .collect();
        let leak = results.iter().map(|r| r.1).sum::<f64>().sqrt();
        Ok((Self::from_rows(target, results.into_iter().map(|r| r.0).collect()), leak))
    }

    /// Applies `f(row, col, value)` to every stored entry.
    pub fn map_entries(&self, f: impl Fn(usize, usize, C64) -> C64 + Sync) -> Result<Self> {
        let rows = (0..self.dimension())
            .into_par_iter()
            .map(|r| {
                self.row(r)
                    .map(|(c, v)| (c as u32, f(r, c, v)))
                    .filter(|e| e.1.norm() > DROP_TOL)
                    .collect()
            })
            .collect();
        Ok(Self::from_rows(self.basis.clone(), rows))
    }

    /// `P A P†` for a signed permutation `P|s⟩ = sign(s) |f(s)⟩` of basis
    /// states.
    pub fn permuted(&self, f: impl Fn(u64) -> (u64, f64) + Sync) -> Result<Self> {
        let n = self.dimension();
        let image: Vec<(usize, f64)> = (0..n)
            .map(|i| {
                let (t, sign) = f(self.basis.state(i));
                self.basis
                    .index_of(t)
                    .map(|j| (j, sign))
                    .ok_or_else(|| Error::Precondition("permutation leaves the basis".into()))
            })
            .collect::<Result<_>>()?;
        let mut rows: Vec<Row> = vec![Vec::new(); n];
        for r in 0..n {
            let (pr, sr) = image[r];
            for (c, v) in self.row(r) {
                let (pc, sc) = image[c];
                rows[pr].push((pc as u32, v * (sr * sc)));
            }
        }
        for row in rows.iter_mut() {
            row.sort_by_key(|e| e.0);
        }
        Ok(Self::from_rows(self.basis.clone(), rows))
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.vals.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl LinearMap for GlobalOperator {
    fn dim(&self) -> usize {
        self.dimension()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.matvec(x, y)
    }
}

/// `op ⊗ 1` on the full basis of `sites` sites.
pub fn embed(op: &LocalOperator, sites: usize) -> Result<GlobalOperator> {
    if let Some(m) = op.max_site() {
        if m >= sites {
            return Err(Error::SupportOutOfRange { site: m, len: sites });
        }
    }
    GlobalOperator::from_terms(Arc::new(Basis::full(sites)?), &[StringOperator::plain(op.clone())])
}

/// Embedding of a local operator into an arbitrary (possibly sector) basis.
pub fn embed_in(op: &LocalOperator, basis: Arc<Basis>) -> Result<GlobalOperator> {
    GlobalOperator::from_terms(basis, &[StringOperator::plain(op.clone())])
}

pub fn commutator(a: &GlobalOperator, b: &GlobalOperator) -> Result<GlobalOperator> {
    a.matmul(b)?.sub(&b.matmul(a)?)
}

pub fn anticommutator(a: &GlobalOperator, b: &GlobalOperator) -> Result<GlobalOperator> {
    a.matmul(b)?.add(&b.matmul(a)?)
}

/// Largest singular value, within relative tolerance `tol`.
///
/// Small operators are handled densely; larger ones by a Lanczos iteration
/// on `A†A`.
pub fn operator_norm(op: &GlobalOperator, tol: f64) -> Result<f64> {
    if tol <= 0.0 {
        return Err(Error::Precondition("tolerance must be positive".into()));
    }
    let n = op.dimension();
    if op.nnz() == 0 {
        return Ok(0.0);
    }
    if n <= DENSE_NORM_DIM {
        return Ok(linalg::spectral_norm_dense(&op.to_dense()));
    }
    let map = linalg::FnMap::new(n, |x: &[C64], y: &mut [C64]| {
        let mut tmp = vec![ZERO; x.len()];
        op.matvec(x, &mut tmp);
        op.matvec_adjoint(&tmp, y);
        for v in y.iter_mut() {
            *v = -*v;
        }
    });
    // ‖A‖² ≤ ‖A‖₁‖A‖∞ sets the scale for an absolute residual target.
    let mut col_sums = vec![0.0f64; n];
    let mut row_max = 0.0f64;
    for r in 0..n {
        let mut s = 0.0;
        for (c, v) in op.row(r) {
            s += v.norm();
            col_sums[c] += v.norm();
        }
        row_max = row_max.max(s);
    }
    let bound = row_max * col_sums.iter().fold(0.0f64, |a, &b| a.max(b));
    let opts = crate::krylov::EigOptions {
        tol: (tol * bound).max(1e-13 * bound),
        ..Default::default()
    };
    let res = crate::krylov::lowest_eigenpairs(&map, 1, &opts)?;
    Ok((-res.values[0]).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::local::{sigma, Pauli};

    #[test]
    fn embed_sigma_z_site0_lsb() {
        let op = embed(&sigma(0, Pauli::Z), 2).unwrap().to_dense();
        let diag: Vec<f64> = (0..4).map(|i| op[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn embed_identity_and_involution() {
        let id = embed(&LocalOperator::identity(vec![3]).unwrap(), 8).unwrap();
        assert_eq!(id.dimension(), 256);
        assert_eq!(id.nnz(), 256);
        assert!((0..256).all(|i| id.get(i, i) == ONE));
        let x = embed(&sigma(1, Pauli::X), 2).unwrap();
        let sq = x.matmul(&x).unwrap().to_dense();
        assert!((sq - DMatrix::<C64>::identity(4, 4)).norm() < 1e-15);
    }

    #[test]
    fn embed_rejects_out_of_range() {
        assert!(matches!(embed(&sigma(4, Pauli::X), 4), Err(Error::SupportOutOfRange { .. })));
    }

    #[test]
    fn commutators_of_disjoint_and_self() {
        let a = embed(&sigma(0, Pauli::X), 6).unwrap();
        let b = embed(&sigma(5, Pauli::Y), 6).unwrap();
        assert_eq!(commutator(&a, &b).unwrap().nnz(), 0);
        assert_eq!(commutator(&a, &a).unwrap().nnz(), 0);
        let c = embed(&sigma(0, Pauli::Y), 6).unwrap();
        assert!(anticommutator(&a, &c).unwrap().nnz() == 0);
    }

    #[test]
    fn basis_mismatch_is_reported() {
        let a = embed(&sigma(0, Pauli::X), 3).unwrap();
        let b = embed(&sigma(0, Pauli::X), 4).unwrap();
        assert!(matches!(commutator(&a, &b), Err(Error::BasisMismatch { .. })));
    }

    #[test]
    fn norms_dense_and_iterative() {
        let xy = LocalOperator::pauli_string(&[(0, Pauli::X), (1, Pauli::Y)], ONE).unwrap();
        assert!((operator_norm(&embed(&xy, 3).unwrap(), 1e-10).unwrap() - 1.0).abs() < 1e-12);
        // large diagonal operator exercises the Lanczos path
        let basis = Arc::new(Basis::full(10).unwrap());
        let diag: Vec<f64> = (0..1024).map(|i| ((i * 37) % 101) as f64 / 10.0 - 5.0).collect();
        let d = GlobalOperator::diagonal(basis, &diag).unwrap();
        let expect = diag.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!((operator_norm(&d, 1e-10).unwrap() - expect).abs() < 1e-8);
    }
}
