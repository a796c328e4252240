//! Observables with finite support.
//!
//! Basis convention for the whole crate: site `i` is bit `i` of a basis
//! index (site 0 least significant). Bit value 0 is spin-up (σ_z = +1), which
//! is also the occupied fermion mode; see [`crate::ops::jw`].

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, C64, I, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SiteIndex(pub usize);

impl SiteIndex {
    pub fn get(self) -> usize {
        self.0
    }

    pub fn checked(site: usize, len: usize) -> Result<Self> {
        if site < len {
            Ok(Self(site))
        } else {
            Err(Error::SupportOutOfRange { site, len })
        }
    }
}

impl From<usize> for SiteIndex {
    fn from(v: usize) -> Self {
        Self(v)
    }
}

pub type Mat2 = [[C64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> Mat2 {
        match self {
            Pauli::I => [[ONE, ZERO], [ZERO, ONE]],
            Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
            Pauli::Y => [[ZERO, -I], [I, ZERO]],
            Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

pub fn mat2_to_dense(m: &Mat2) -> DMatrix<C64> {
    DMatrix::from_fn(2, 2, |r, c| m[r][c])
}

/// Extracts the bits of `state` at `sites` into a compact local index.
#[inline]
pub fn gather_bits(state: u64, sites: &[usize]) -> usize {
    let mut out = 0usize;
    for (m, &s) in sites.iter().enumerate() {
        out |= (((state >> s) & 1) as usize) << m;
    }
    out
}

/// Overwrites the bits of `state` at `sites` with the compact index `local`.
#[inline]
pub fn scatter_bits(state: u64, sites: &[usize], local: usize) -> u64 {
    let mut out = state;
    for (m, &s) in sites.iter().enumerate() {
        let bit = ((local >> m) & 1) as u64;
        out = (out & !(1u64 << s)) | (bit << s);
    }
    out
}

/// Dense matrix on a sorted set of distinct sites.
#[derive(Clone, PartialEq)]
pub struct LocalOperator {
    support: Vec<usize>,
    matrix: DMatrix<C64>,
}

impl fmt::Debug for LocalOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LocalOperator")
            .field("support", &self.support)
            .field("dim", &self.matrix.nrows())
            .finish()
    }
}

impl LocalOperator {
    /// `support` must be strictly increasing; local bit `m` belongs to `support[m]`.
    pub fn new(support: Vec<usize>, matrix: DMatrix<C64>) -> Result<Self> {
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidOperator(format!(
                "support {support:?} must be sorted and distinct"
            )));
        }
        let dim = 1usize << support.len();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::InvalidOperator(format!(
                "matrix is {}x{}, support needs {dim}x{dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { support, matrix })
    }

    /// Like [`LocalOperator::new`] but accepts sites in any order; the
    /// matrix is permuted so the stored support is sorted.
    pub fn with_sites(sites: Vec<usize>, matrix: DMatrix<C64>) -> Result<Self> {
        let k = sites.len();
        let dim = 1usize << k;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::InvalidOperator(format!(
                "matrix is {}x{}, {k} sites need {dim}x{dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&m| sites[m]);
        let sorted: Vec<usize> = order.iter().map(|&m| sites[m]).collect();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidOperator(format!("repeated site in {sites:?}")));
        }
        // new bit q holds old bit order[q]
        let remap = |new_idx: usize| -> usize {
            let mut old = 0usize;
            for (q, &m) in order.iter().enumerate() {
                old |= ((new_idx >> q) & 1) << m;
            }
            old
        };
        let permuted = DMatrix::from_fn(dim, dim, |r, c| matrix[(remap(r), remap(c))]);
        Self::new(sorted, permuted)
    }

    pub fn identity(support: Vec<usize>) -> Result<Self> {
        let dim = 1usize << support.len();
        Self::new(support, DMatrix::identity(dim, dim))
    }

    pub fn single_site(site: usize, m: &Mat2) -> Self {
        Self {
            support: vec![site],
            matrix: mat2_to_dense(m),
        }
    }

    pub fn pauli(site: usize, p: Pauli) -> Self {
        Self::single_site(site, &p.matrix())
    }

    /// Product of Paulis on distinct sites, times `coeff`.
    pub fn pauli_string(ops: &[(usize, Pauli)], coeff: C64) -> Result<Self> {
        let sites: Vec<usize> = ops.iter().map(|(s, _)| *s).collect();
        let mut m = DMatrix::from_element(1, 1, coeff);
        // kronecker puts its left factor on the higher bit, so iterating in
        // reverse leaves ops[0] on local bit 0
        for (_, p) in ops.iter().rev() {
            m = m.kronecker(&mat2_to_dense(&p.matrix()));
        }
        Self::with_sites(sites, m)
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn max_site(&self) -> Option<usize> {
        self.support.last().copied()
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            support: self.support.clone(),
            matrix: &self.matrix * c,
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            support: self.support.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = &self.matrix - self.matrix.adjoint();
        d.iter().all(|z| z.norm() <= tol)
    }

    /// Spectral norm (largest singular value).
    pub fn norm(&self) -> f64 {
        linalg::spectral_norm_dense(&self.matrix)
    }

    /// Same operator written on a superset of its support.
    pub fn extend_to(&self, superset: &[usize]) -> Result<Self> {
        if superset.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidOperator("superset must be sorted".into()));
        }
        let pos: Vec<usize> = self
            .support
            .iter()
            .map(|s| {
                superset
                    .iter()
                    .position(|x| x == s)
                    .ok_or_else(|| Error::InvalidOperator(format!("site {s} missing from superset")))
            })
            .collect::<Result<_>>()?;
        let k = superset.len();
        let dim = 1usize << k;
        let own_mask: usize = pos.iter().map(|p| 1usize << p).sum();
        let sub = |idx: usize| -> usize {
            let mut out = 0usize;
            for (m, &p) in pos.iter().enumerate() {
                out |= ((idx >> p) & 1) << m;
            }
            out
        };
        let m = DMatrix::from_fn(dim, dim, |r, c| {
            if (r & !own_mask) != (c & !own_mask) {
                ZERO
            } else {
                self.matrix[(sub(r), sub(c))]
            }
        });
        Self::new(superset.to_vec(), m)
    }

    fn union_support(&self, other: &Self) -> Vec<usize> {
        let mut u: Vec<usize> = self.support.iter().chain(&other.support).copied().collect();
        u.sort_unstable();
        u.dedup();
        u
    }

    /// Operator product `self * other` on the union of supports.
    pub fn mul(&self, other: &Self) -> Self {
        let u = self.union_support(other);
        let a = self.extend_to(&u).expect("union contains support");
        let b = other.extend_to(&u).expect("union contains support");
        Self {
            support: u,
            matrix: a.matrix * b.matrix,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let u = self.union_support(other);
        let a = self.extend_to(&u).expect("union contains support");
        let b = other.extend_to(&u).expect("union contains support");
        Self {
            support: u,
            matrix: a.matrix + b.matrix,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-ONE))
    }

    /// Largest entry-wise distance after aligning supports.
    pub fn distance(&self, other: &Self) -> f64 {
        let d = self.sub(other);
        d.matrix.iter().fold(0.0, |a, z| a.max(z.norm()))
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.distance(other) <= tol
    }

    /// Removes sites on which the operator acts as a multiple of the identity
    /// (the multiple is folded into the remaining matrix).
    pub fn trimmed(&self) -> Self {
        let mut op = self.clone();
        let mut m = 0;
        while m < op.support.len() {
            match op.factor_out_identity(m) {
                Some(reduced) => op = reduced,
                None => m += 1,
            }
        }
        op
    }

    fn factor_out_identity(&self, m: usize) -> Option<Self> {
        let dim = self.dim();
        let bit = 1usize << m;
        let tol = 1e-14 * self.matrix.iter().fold(1.0f64, |a, z| a.max(z.norm()));
        for r in 0..dim {
            for c in 0..dim {
                let v = self.matrix[(r, c)];
                if (r & bit) != (c & bit) {
                    if v.norm() > tol {
                        return None;
                    }
                } else if r & bit == 0 && (v - self.matrix[(r | bit, c | bit)]).norm() > tol {
                    return None;
                }
            }
        }
        let expand = |idx: usize| -> usize { (idx & (bit - 1)) | ((idx >> m) << (m + 1)) };
        let new_dim = dim / 2;
        let matrix = DMatrix::from_fn(new_dim, new_dim, |r, c| self.matrix[(expand(r), expand(c))]);
        let mut support = self.support.clone();
        support.remove(m);
        Some(Self { support, matrix })
    }

    /// Nonzero structure per local row, used by the sparse kernels.
    pub(crate) fn row_entries(&self) -> Vec<Vec<(usize, C64)>> {
        let dim = self.dim();
        (0..dim)
            .map(|r| {
                (0..dim)
                    .filter_map(|c| {
                        let v = self.matrix[(r, c)];
                        (v != ZERO).then_some((c, v))
                    })
                    .collect()
            })
            .collect()
    }

    /// `O |psi>` for a state on the full `2^L` basis.
    pub fn apply_full(&self, psi: &[C64]) -> Result<Vec<C64>> {
        let len = psi.len();
        if !len.is_power_of_two() {
            return Err(Error::InvalidOperator("state length is not a power of two".into()));
        }
        let l = len.trailing_zeros() as usize;
        if let Some(&s) = self.support.last() {
            if s >= l {
                return Err(Error::SupportOutOfRange { site: s, len: l });
            }
        }
        let rows = self.row_entries();
        let mut out = vec![ZERO; len];
        for (s, o) in out.iter_mut().enumerate() {
            let r = gather_bits(s as u64, &self.support);
            let mut acc = ZERO;
            for &(c, v) in &rows[r] {
                let t = scatter_bits(s as u64, &self.support, c) as usize;
                acc += v * psi[t];
            }
            *o = acc;
        }
        Ok(out)
    }

    /// `<psi| O |psi>` for a full-basis state.
    pub fn expectation(&self, psi: &[C64]) -> Result<C64> {
        let o = self.apply_full(psi)?;
        Ok(linalg::dot(psi, &o))
    }
}

/// Pauli operator on `site`.
pub fn sigma(site: usize, p: Pauli) -> LocalOperator {
    LocalOperator::pauli(site, p)
}
