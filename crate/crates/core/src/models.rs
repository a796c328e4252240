//! Translation-invariant finite-range interactions and the Hamiltonians they
//! generate on open or periodic chains.
//!
//! An [`InteractionSpec`] stores term templates anchored at site 0. Copies
//! are placed at every anchor that fits (open) or at every site with
//! wrap-around (periodic). Fermion templates are mapped through the
//! Jordan-Wigner transformation *after* placement, so a hopping term across
//! the periodic seam carries its parity string.
//!
//! Specs serialize to TOML:
//!
//! ```toml
//! kind = "spin"
//! range = 1
//! symmetries = ["u1_gauge", "translation"]
//!
//! [[terms]]
//! type = "pauli"
//! coeff = 1.0
//! ops = "X0 X1"
//!
//! [[terms]]
//! type = "fermion"     # only with kind = "fermion"
//! coeff = -1.0
//! ops = "+0 -1"        # c*_0 c_1
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::ops::basis::Basis;
use crate::ops::jw::{monomial, FermionMode, ModeKind};
use crate::ops::local::{LocalOperator, Pauli, SiteIndex};
use crate::ops::sparse::{operator_norm, GlobalOperator};
use crate::ops::string_op::StringOperator;
use crate::ops::symmetry::{charge_of_state, Boundary, ModelKind};

pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    U1Gauge,
    Parity,
    Translation,
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Symmetry::U1Gauge => "u1_gauge",
            Symmetry::Parity => "parity",
            Symmetry::Translation => "translation",
        })
    }
}

/// Pauli product written as `"X0 Y2 Z3"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PauliWord(pub Vec<(usize, Pauli)>);

impl TryFrom<String> for PauliWord {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        let mut ops = Vec::new();
        for tok in s.split_whitespace() {
            let mut chars = tok.chars();
            let p = chars
                .next()
                .and_then(Pauli::from_char)
                .ok_or_else(|| format!("bad Pauli token '{tok}'"))?;
            let site: usize = chars.as_str().parse().map_err(|_| format!("bad site in '{tok}'"))?;
            ops.push((site, p));
        }
        if ops.is_empty() {
            return Err("empty Pauli word".into());
        }
        let mut sites: Vec<usize> = ops.iter().map(|o| o.0).collect();
        sites.sort_unstable();
        if sites.windows(2).any(|w| w[0] == w[1]) {
            return Err(format!("repeated site in '{s}'"));
        }
        Ok(Self(ops))
    }
}

impl From<PauliWord> for String {
    fn from(w: PauliWord) -> String {
        w.0.iter().map(|(s, p)| format!("{}{s}", p.as_char())).collect::<Vec<_>>().join(" ")
    }
}

/// Ordered product of fermion modes written as `"+0 -1"` (`c*_0 c_1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FermionWord(pub Vec<FermionMode>);

impl TryFrom<String> for FermionWord {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        let mut modes = Vec::new();
        for tok in s.split_whitespace() {
            let (kind, rest) = match tok.as_bytes().first() {
                Some(b'+') => (ModeKind::Creation, &tok[1..]),
                Some(b'-') => (ModeKind::Annihilation, &tok[1..]),
                _ => return Err(format!("bad mode token '{tok}'")),
            };
            let site: usize = rest.parse().map_err(|_| format!("bad site in '{tok}'"))?;
            modes.push(FermionMode { site: SiteIndex(site), kind });
        }
        if modes.is_empty() {
            return Err("empty fermion word".into());
        }
        Ok(Self(modes))
    }
}

impl From<FermionWord> for String {
    fn from(w: FermionWord) -> String {
        w.0.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(" ")
    }
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

/// One interaction template anchored at site 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Term {
    Pauli {
        coeff: f64,
        #[serde(default, skip_serializing_if = "is_zero")]
        coeff_im: f64,
        ops: PauliWord,
    },
    Fermion {
        coeff: f64,
        #[serde(default, skip_serializing_if = "is_zero")]
        coeff_im: f64,
        ops: FermionWord,
    },
    /// Dense matrix on `sites`; `re`/`im` are row-major with site
    /// `sites[0]` on the least significant bit.
    Matrix {
        sites: Vec<usize>,
        re: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        im: Vec<Vec<f64>>,
    },
}

impl Term {
    pub fn pauli(coeff: f64, ops: &[(usize, Pauli)]) -> Self {
        Term::Pauli { coeff, coeff_im: 0.0, ops: PauliWord(ops.to_vec()) }
    }

    pub fn fermion(coeff: f64, modes: &[FermionMode]) -> Self {
        Term::Fermion { coeff, coeff_im: 0.0, ops: FermionWord(modes.to_vec()) }
    }

    fn offsets(&self) -> Vec<usize> {
        match self {
            Term::Pauli { ops, .. } => ops.0.iter().map(|o| o.0).collect(),
            Term::Fermion { ops, .. } => ops.0.iter().map(|m| m.site.0).collect(),
            Term::Matrix { sites, .. } => sites.clone(),
        }
    }

    /// Largest site offset of the template.
    pub fn extent(&self) -> usize {
        self.offsets().into_iter().max().unwrap_or(0)
    }

    fn matrix(&self) -> Result<nalgebra::DMatrix<C64>> {
        let Term::Matrix { sites, re, im } = self else {
            unreachable!("only called on matrix terms")
        };
        let dim = 1usize << sites.len();
        let bad = re.len() != dim
            || re.iter().any(|r| r.len() != dim)
            || (!im.is_empty() && (im.len() != dim || im.iter().any(|r| r.len() != dim)));
        if bad {
            return Err(Error::InvalidOperator(format!("matrix term on {sites:?} must be {dim}x{dim}")));
        }
        Ok(nalgebra::DMatrix::from_fn(dim, dim, |r, c| {
            C64::new(re[r][c], if im.is_empty() { 0.0 } else { im[r][c] })
        }))
    }

    /// Spin image of the template placed with its origin at `anchor`.
    fn place(&self, anchor: usize, sites: usize) -> Result<Option<StringOperator>> {
        let at = |o: usize| (o + anchor) % sites;
        match self {
            Term::Pauli { coeff, coeff_im, ops } => {
                let placed: Vec<(usize, Pauli)> = ops.0.iter().map(|&(o, p)| (at(o), p)).collect();
                let op = LocalOperator::pauli_string(&placed, C64::new(*coeff, *coeff_im))?;
                Ok(Some(StringOperator::plain(op)))
            }
            Term::Fermion { coeff, coeff_im, ops } => {
                let placed: Vec<FermionMode> = ops
                    .0
                    .iter()
                    .map(|m| FermionMode { site: SiteIndex(at(m.site.0)), kind: m.kind })
                    .collect();
                Ok(monomial(&placed, C64::new(*coeff, *coeff_im)))
            }
            Term::Matrix { sites: offs, .. } => {
                let placed: Vec<usize> = offs.iter().map(|&o| at(o)).collect();
                Ok(Some(StringOperator::plain(LocalOperator::with_sites(placed, self.matrix()?)?)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub length: usize,
    pub boundary: Boundary,
}

impl ChainConfig {
    pub fn new(length: usize, boundary: Boundary) -> Self {
        Self { length, boundary }
    }

    pub fn open(length: usize) -> Self {
        Self::new(length, Boundary::Open)
    }

    pub fn periodic(length: usize) -> Self {
        Self::new(length, Boundary::Periodic)
    }

    pub fn validate(&self, range: usize) -> Result<()> {
        if self.length < 2 {
            return Err(Error::Precondition(format!("chain length {} is below 2", self.length)));
        }
        if self.length > crate::ops::basis::MAX_SITES {
            return Err(Error::Precondition(format!("chain length {} is too large", self.length)));
        }
        if self.boundary == Boundary::Periodic && range >= self.length {
            return Err(Error::RangeViolation {
                range,
                detail: format!("periodic chain of length {}", self.length),
            });
        }
        Ok(())
    }
}

/// Charge of a symmetry sector: `Σσ_z` (twice `S_z`) for spin models,
/// particle number for fermion models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SectorLabel {
    pub charge: i64,
}

impl SectorLabel {
    /// Number of up spins (occupied modes) in the sector.
    pub fn up_count(self, sites: usize, kind: ModelKind) -> Result<usize> {
        let l = sites as i64;
        let up = match kind {
            ModelKind::Spin => {
                if (self.charge + l) % 2 != 0 {
                    return Err(Error::Precondition(format!("charge {} has wrong parity for L={sites}", self.charge)));
                }
                (self.charge + l) / 2
            }
            ModelKind::Fermion => self.charge,
        };
        if !(0..=l).contains(&up) {
            return Err(Error::Precondition(format!("charge {} outside the chain range", self.charge)));
        }
        Ok(up as usize)
    }

    pub fn from_up_count(up: usize, sites: usize, kind: ModelKind) -> Self {
        let charge = match kind {
            ModelKind::Spin => 2 * up as i64 - sites as i64,
            ModelKind::Fermion => up as i64,
        };
        Self { charge }
    }
}

impl fmt::Display for SectorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q={}", self.charge)
    }
}

pub fn sector_labels(sites: usize, kind: ModelKind) -> Vec<SectorLabel> {
    (0..=sites).map(|u| SectorLabel::from_up_count(u, sites, kind)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionSpec {
    pub kind: ModelKind,
    pub range: usize,
    #[serde(default)]
    pub symmetries: Vec<Symmetry>,
    #[serde(default)]
    pub terms: Vec<Term>,
}

/// `coeff · ∏ n_site` with sites relative to the anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityTerm {
    pub coeff: f64,
    pub sites: Vec<usize>,
}

impl InteractionSpec {
    pub fn new(kind: ModelKind, range: usize, symmetries: Vec<Symmetry>, terms: Vec<Term>) -> Result<Self> {
        let spec = Self { kind, range, symmetries, terms };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.range == 0 {
            return Err(Error::RangeViolation { range: 0, detail: "range must be at least 1".into() });
        }
        for t in &self.terms {
            if t.extent() > self.range {
                return Err(Error::RangeViolation {
                    range: self.range,
                    detail: format!("term reaching offset {}", t.extent()),
                });
            }
            match (t, self.kind) {
                (Term::Fermion { ops, .. }, ModelKind::Fermion) => {
                    if ops.0.len() % 2 == 1 {
                        return Err(Error::OddFermionTerm(String::from(ops.clone())));
                    }
                }
                (Term::Fermion { .. }, ModelKind::Spin) => {
                    return Err(Error::InvalidOperator("fermion term in a spin model".into()));
                }
                (Term::Pauli { .. } | Term::Matrix { .. }, ModelKind::Fermion) => {
                    return Err(Error::InvalidOperator("spin term in a fermion model; use fermion words".into()));
                }
                (Term::Matrix { .. }, ModelKind::Spin) => {
                    t.matrix()?;
                }
                (Term::Pauli { .. }, ModelKind::Spin) => {}
            }
        }
        Ok(())
    }

    pub fn declares(&self, s: Symmetry) -> bool {
        self.symmetries.contains(&s)
    }

    pub fn push_term(&mut self, term: Term) -> Result<()> {
        self.terms.push(term);
        if let Err(e) = self.validate() {
            self.terms.pop();
            return Err(e);
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// All placed terms in spin form.
    pub fn string_terms(&self, cfg: &ChainConfig) -> Result<Vec<StringOperator>> {
        self.validate()?;
        cfg.validate(self.range)?;
        let l = cfg.length;
        let mut out = Vec::new();
        for term in &self.terms {
            let ext = term.extent();
            let anchors = match cfg.boundary {
                Boundary::Periodic => l,
                Boundary::Open => l.saturating_sub(ext),
            };
            for i in 0..anchors {
                if let Some(op) = term.place(i, l)? {
                    out.push(op);
                }
            }
        }
        Ok(out)
    }
}

pub fn heisenberg_spec(j: f64) -> InteractionSpec {
    let terms = [Pauli::X, Pauli::Y, Pauli::Z]
        .iter()
        .map(|&p| Term::pauli(j, &[(0, p), (1, p)]))
        .collect();
    InteractionSpec {
        kind: ModelKind::Spin,
        range: 1,
        symmetries: vec![Symmetry::U1Gauge, Symmetry::Parity, Symmetry::Translation],
        terms,
    }
}

/// `Jxy(σxσx + σyσy) + Δ σzσz − h σz`, zero couplings omitted.
pub fn xxz_spec(jxy: f64, delta: f64, h: f64) -> InteractionSpec {
    let mut terms = Vec::new();
    if jxy != 0.0 {
        terms.push(Term::pauli(jxy, &[(0, Pauli::X), (1, Pauli::X)]));
        terms.push(Term::pauli(jxy, &[(0, Pauli::Y), (1, Pauli::Y)]));
    }
    if delta != 0.0 {
        terms.push(Term::pauli(delta, &[(0, Pauli::Z), (1, Pauli::Z)]));
    }
    if h != 0.0 {
        terms.push(Term::pauli(-h, &[(0, Pauli::Z)]));
    }
    InteractionSpec {
        kind: ModelKind::Spin,
        range: 1,
        symmetries: vec![Symmetry::U1Gauge, Symmetry::Translation],
        terms,
    }
}

/// `Σ_d t_d (c*_i c_{i+d} + h.c.) + Σ V(n) + μ Σ n_i`; `hopping[d-1]` is the
/// amplitude at distance `d`.
pub fn fermion_spec(hopping: &[f64], density: &[DensityTerm], mu: f64) -> Result<InteractionSpec> {
    let mut spec = InteractionSpec {
        kind: ModelKind::Fermion,
        range: 1,
        symmetries: vec![Symmetry::U1Gauge, Symmetry::Parity, Symmetry::Translation],
        terms: Vec::new(),
    };
    let mut range = hopping.len().max(1);
    for d in density {
        if d.sites.is_empty() {
            return Err(Error::InvalidOperator("density term without sites".into()));
        }
        range = range.max(*d.sites.iter().max().unwrap_or(&0));
    }
    spec.range = range;
    for (i, &t) in hopping.iter().enumerate() {
        if t == 0.0 {
            continue;
        }
        let d = i + 1;
        spec.push_term(Term::fermion(t, &[FermionMode::create(0), FermionMode::annihilate(d)]))?;
        spec.push_term(Term::fermion(t, &[FermionMode::create(d), FermionMode::annihilate(0)]))?;
    }
    for dt in density {
        let modes: Vec<FermionMode> = dt
            .sites
            .iter()
            .flat_map(|&s| [FermionMode::create(s), FermionMode::annihilate(s)])
            .collect();
        spec.push_term(Term::fermion(dt.coeff, &modes))?;
    }
    if mu != 0.0 {
        spec.push_term(Term::fermion(mu, &[FermionMode::create(0), FermionMode::annihilate(0)]))?;
    }
    Ok(spec)
}

fn check_hermitian(h: GlobalOperator) -> Result<GlobalOperator> {
    if !h.hermitian_flag() {
        return Err(Error::NonHermitian { deviation: h.hermiticity_deviation() });
    }
    Ok(h)
}

/// Hamiltonian on the full `2^L` basis.
pub fn build_hamiltonian(spec: &InteractionSpec, cfg: &ChainConfig) -> Result<GlobalOperator> {
    let terms = spec.string_terms(cfg)?;
    let basis = Arc::new(Basis::full(cfg.length)?);
    check_hermitian(GlobalOperator::from_terms(basis, &terms)?)
}

/// Hamiltonian block on one charge sector, built without the full matrix.
pub fn build_sector_hamiltonian(spec: &InteractionSpec, cfg: &ChainConfig, label: SectorLabel) -> Result<GlobalOperator> {
    let terms = spec.string_terms(cfg)?;
    let up = label.up_count(cfg.length, spec.kind)?;
    let basis = Arc::new(Basis::sector(cfg.length, up)?);
    check_hermitian(GlobalOperator::from_terms(basis, &terms).map_err(|e| match e {
        Error::SymmetryViolation { residual, .. } => Error::SymmetryViolation {
            symmetry: Symmetry::U1Gauge.to_string(),
            residual,
        },
        other => other,
    })?)
}

/// Splits a full-basis operator into charge blocks.
pub fn sector_decompose(h: &GlobalOperator, kind: ModelKind) -> Result<BTreeMap<SectorLabel, GlobalOperator>> {
    if h.tag().up.is_some() {
        return Err(Error::Precondition("operator is already restricted to a sector".into()));
    }
    let l = h.basis().sites();
    let mut out = BTreeMap::new();
    for up in 0..=l {
        let (block, leak) = h.restrict(Arc::new(Basis::sector(l, up)?))?;
        if leak > SYMMETRY_TOL {
            return Err(Error::SymmetryViolation { symmetry: Symmetry::U1Gauge.to_string(), residual: leak });
        }
        out.insert(SectorLabel::from_up_count(up, l, kind), block);
    }
    Ok(out)
}

/// Charge of each basis state, as a diagonal.
pub fn charge_diagonal(basis: &Basis, kind: ModelKind) -> Vec<f64> {
    (0..basis.dim())
        .map(|i| charge_of_state(basis.state(i), basis.sites(), kind) as f64)
        .collect()
}

/// Sign of the occupation state `|s⟩` relative to `c*_{i1} ⋯ c*_{ik} |vac⟩`
/// with `i1 < ⋯ < ik`.
fn canonical_fermion_sign(state: u64, sites: usize) -> f64 {
    // creating from the top down, each c*_i sees only empty sites below it
    let occupied_sum: usize = (0..sites).filter(|&i| state >> i & 1 == 0).sum();
    if occupied_sum.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Image of a basis state under the one-site translation, with its sign.
pub fn translation_image(state: u64, sites: usize, kind: ModelKind) -> (u64, f64) {
    let mask = (1u64 << sites) - 1;
    let rotated = ((state << 1) | (state >> (sites - 1))) & mask;
    match kind {
        ModelKind::Spin => (rotated, 1.0),
        ModelKind::Fermion => {
            let n = sites - state.count_ones() as usize;
            let top_occupied = state >> (sites - 1) & 1 == 0;
            // c*_{L-1} becomes c*_0 and must move past the other n-1 creators
            let reorder = if top_occupied && n >= 2 && (n - 1) % 2 == 1 { -1.0 } else { 1.0 };
            let sign = canonical_fermion_sign(state, sites) * reorder * canonical_fermion_sign(rotated, sites);
            (rotated, sign)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryCheck {
    pub symmetry: Symmetry,
    /// `None` when the check does not apply (translation on an open chain).
    pub residual: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub checks: Vec<SymmetryCheck>,
}

impl SymmetryReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, s: Symmetry) -> Option<&SymmetryCheck> {
        self.checks.iter().find(|c| c.symmetry == s)
    }
}

/// Residual norms `‖[H, Q]‖`, `‖Θ(H) − H‖` and `‖τ₁(H) − H‖` for each
/// declared symmetry.
pub fn verify_symmetries(spec: &InteractionSpec, cfg: &ChainConfig) -> Result<SymmetryReport> {
    let h = build_hamiltonian(spec, cfg)?;
    let mut checks = Vec::new();
    let mut declared = spec.symmetries.clone();
    declared.sort();
    declared.dedup();
    for s in declared {
        let residual = match s {
            Symmetry::U1Gauge => Some(u1_commutator_norm(&h, spec.kind)?),
            Symmetry::Parity => Some(parity_residual(&h)?),
            Symmetry::Translation => match cfg.boundary {
                Boundary::Open => None,
                Boundary::Periodic => Some(translation_residual(&h, spec.kind)?),
            },
        };
        checks.push(SymmetryCheck {
            symmetry: s,
            residual,
            passed: residual.is_none_or(|r| r < SYMMETRY_TOL),
        });
    }
    Ok(SymmetryReport { checks })
}

/// `‖[H, Q]‖` for the charge `Q` of the model kind.
pub fn u1_commutator_norm(h: &GlobalOperator, kind: ModelKind) -> Result<f64> {
    let q = charge_diagonal(h.basis(), kind);
    let d = h.map_entries(|r, c, v| v * (q[c] - q[r]))?;
    operator_norm(&d, 1e-8)
}

fn parity_residual(h: &GlobalOperator) -> Result<f64> {
    let basis = h.basis().clone();
    let d = h.map_entries(|r, c, v| {
        let flips = (basis.state(r) ^ basis.state(c)).count_ones();
        if flips.is_multiple_of(2) {
            C64::new(0.0, 0.0)
        } else {
            v * -2.0
        }
    })?;
    operator_norm(&d, 1e-8)
}

fn translation_residual(h: &GlobalOperator, kind: ModelKind) -> Result<f64> {
    let l = h.basis().sites();
    let moved = h.permuted(|s| translation_image(s, l, kind))?;
    operator_norm(&moved.sub(h)?, 1e-8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigvalsh;

    fn dense_spectrum(spec: &InteractionSpec, cfg: ChainConfig) -> Vec<f64> {
        eigvalsh(&build_hamiltonian(spec, &cfg).unwrap().to_dense())
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn two_site_spectra() {
        assert!(close(&dense_spectrum(&heisenberg_spec(1.0), ChainConfig::open(2)), &[-3.0, 1.0, 1.0, 1.0], 1e-12));
        assert!(close(&dense_spectrum(&xxz_spec(1.0, 0.0, 0.0), ChainConfig::open(2)), &[-2.0, 0.0, 0.0, 2.0], 1e-12));
        let f = fermion_spec(&[1.0], &[], 3.0).unwrap();
        assert!(close(&dense_spectrum(&f, ChainConfig::open(2)), &[0.0, 2.0, 4.0, 6.0], 1e-12));
    }

    #[test]
    fn odd_fermion_term_rejected() {
        let mut spec = fermion_spec(&[1.0], &[], 0.0).unwrap();
        let err = spec.push_term(Term::fermion(1.0, &[FermionMode::annihilate(0)]));
        assert!(matches!(err, Err(Error::OddFermionTerm(_))));
        assert_eq!(spec.terms.len(), 2);
    }

    #[test]
    fn zero_spec_gives_zero_operator() {
        let spec = InteractionSpec::new(ModelKind::Spin, 1, vec![], vec![]).unwrap();
        let h = build_hamiltonian(&spec, &ChainConfig::periodic(4)).unwrap();
        assert_eq!(h.nnz(), 0);
    }

    #[test]
    fn periodic_heisenberg_three_sites() {
        // H = 2 (S_tot² − 9/4)·... eigenvalues of Σ σ·σ on a triangle are −3 (×4) and 3 (×4)
        let e = dense_spectrum(&heisenberg_spec(1.0), ChainConfig::periodic(3));
        assert!(close(&e, &[-3.0, -3.0, -3.0, -3.0, 3.0, 3.0, 3.0, 3.0], 1e-12));
    }

    #[test]
    fn sectors_cover_the_space() {
        let h = build_hamiltonian(&xxz_spec(1.0, 0.0, 0.0), &ChainConfig::open(2)).unwrap();
        let blocks = sector_decompose(&h, ModelKind::Spin).unwrap();
        let dims: Vec<usize> = blocks.values().map(|b| b.dimension()).collect();
        assert_eq!(dims, vec![1, 2, 1]);
        let x = InteractionSpec::new(ModelKind::Spin, 1, vec![], vec![Term::pauli(1.0, &[(0, Pauli::X)])]).unwrap();
        let hx = build_hamiltonian(&x, &ChainConfig::open(3)).unwrap();
        assert!(matches!(sector_decompose(&hx, ModelKind::Spin), Err(Error::SymmetryViolation { .. })));
    }

    #[test]
    fn symmetry_reports() {
        let r = verify_symmetries(&heisenberg_spec(1.0), &ChainConfig::periodic(6)).unwrap();
        assert_eq!(r.checks.len(), 3);
        assert!(r.all_passed());
        let r = verify_symmetries(&xxz_spec(1.0, 0.5, 0.7), &ChainConfig::periodic(6)).unwrap();
        assert!(r.get(Symmetry::U1Gauge).unwrap().passed);
        assert!(r.get(Symmetry::Parity).is_none());
        let bad = InteractionSpec::new(
            ModelKind::Spin,
            1,
            vec![Symmetry::U1Gauge],
            vec![Term::pauli(1.0, &[(0, Pauli::X)])],
        )
        .unwrap();
        let r = verify_symmetries(&bad, &ChainConfig::open(4)).unwrap();
        assert!(r.get(Symmetry::U1Gauge).unwrap().residual.unwrap() >= 1.0);
        let f = fermion_spec(&[1.0, 0.3], &[DensityTerm { coeff: 0.7, sites: vec![0, 1] }], 0.4).unwrap();
        let r = verify_symmetries(&f, &ChainConfig::periodic(6)).unwrap();
        assert!(r.all_passed(), "{r:?}");
    }

    #[test]
    fn toml_round_trip() {
        let f = fermion_spec(&[1.0, -0.25], &[DensityTerm { coeff: 0.1 + 0.2, sites: vec![0, 1] }], 3.0).unwrap();
        let text = f.to_toml().unwrap();
        assert_eq!(InteractionSpec::from_toml(&text).unwrap(), f);
        let s = xxz_spec(0.3, 1.0 / 3.0, 0.0);
        assert_eq!(InteractionSpec::from_toml(&s.to_toml().unwrap()).unwrap(), s);
        assert!(InteractionSpec::from_toml("kind = \"spin\"\nrange = 1\nextra = 2\n").is_err());
    }
}
