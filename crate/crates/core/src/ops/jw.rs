//! Jordan-Wigner images of fermion modes.
//!
//! With bit value 0 as the occupied mode, the annihilator on site `j` is
//! `c_j = (∏_{k<j} σ_z^{(k)}) σ^-_j` with `σ^- = |1⟩⟨0|`. Then
//! `n_j = c*_j c_j = (1 + σ_z^{(j)})/2` and `σ_z = 2 c* c − 1`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, ONE, ZERO};
use crate::ops::local::{mat2_mul, LocalOperator, Mat2, Pauli, SiteIndex};
use crate::ops::string_op::StringOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Creation,
    Annihilation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FermionMode {
    pub site: SiteIndex,
    pub kind: ModeKind,
}

impl FermionMode {
    pub fn create(site: usize) -> Self {
        Self { site: SiteIndex(site), kind: ModeKind::Creation }
    }

    pub fn annihilate(site: usize) -> Self {
        Self { site: SiteIndex(site), kind: ModeKind::Annihilation }
    }

    pub fn adjoint(self) -> Self {
        let kind = match self.kind {
            ModeKind::Creation => ModeKind::Annihilation,
            ModeKind::Annihilation => ModeKind::Creation,
        };
        Self { site: self.site, kind }
    }

    fn site_matrix(self) -> Mat2 {
        match self.kind {
            ModeKind::Annihilation => [[ZERO, ZERO], [ONE, ZERO]],
            ModeKind::Creation => [[ZERO, ONE], [ZERO, ZERO]],
        }
    }
}

impl fmt::Display for FermionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = match self.kind {
            ModeKind::Creation => '+',
            ModeKind::Annihilation => '-',
        };
        write!(f, "{sign}{}", self.site.0)
    }
}

/// Spin image of one mode as a dense operator on sites `[0, site]`.
pub fn jordan_wigner(mode: FermionMode, sites: usize) -> Result<LocalOperator> {
    let j = mode.site.0;
    if j >= sites {
        return Err(Error::SupportOutOfRange { site: j, len: sites });
    }
    let string: Vec<usize> = (0..j).collect();
    let local = LocalOperator::single_site(j, &mode.site_matrix());
    let mut op = local;
    for s in string {
        op = op.mul(&LocalOperator::pauli(s, Pauli::Z));
    }
    Ok(op)
}

/// Spin image of one mode in string form.
pub fn mode_string_operator(mode: FermionMode) -> StringOperator {
    let j = mode.site.0;
    let string: Vec<usize> = (0..j).collect();
    StringOperator::new(&string, LocalOperator::single_site(j, &mode.site_matrix()))
        .expect("string sites precede the mode site")
}

fn is_multiple_of(m: &Mat2, p: &Mat2) -> Option<C64> {
    // p is ±1 on its diagonal and zero elsewhere for the cases used here
    let c = m[0][0] * p[0][0];
    let ok = (m[0][1]).norm() == 0.0
        && (m[1][0]).norm() == 0.0
        && (m[1][1] - c * p[1][1]).norm() == 0.0;
    ok.then_some(c)
}

/// Spin image of the ordered product `coeff · m_0 m_1 ⋯ m_k` of modes.
///
/// Returns `None` when the product vanishes identically (for example
/// `c_j c_j`).
pub fn monomial(modes: &[FermionMode], coeff: C64) -> Option<StringOperator> {
    let mut per_site: BTreeMap<usize, Mat2> = BTreeMap::new();
    for m in modes {
        let j = m.site.0;
        for s in 0..=j {
            let factor = if s == j { m.site_matrix() } else { Pauli::Z.matrix() };
            let cur = per_site.entry(s).or_insert(Pauli::I.matrix());
            *cur = mat2_mul(cur, &factor);
        }
    }
    let mut c = coeff;
    let mut string = Vec::new();
    let mut local_sites = Vec::new();
    let mut local_mats = Vec::new();
    for (s, m) in per_site {
        if m.iter().flatten().all(|z| *z == ZERO) {
            return None;
        }
        if let Some(k) = is_multiple_of(&m, &Pauli::I.matrix()) {
            c *= k;
        } else if let Some(k) = is_multiple_of(&m, &Pauli::Z.matrix()) {
            c *= k;
            string.push(s);
        } else {
            local_sites.push(s);
            local_mats.push(m);
        }
    }
    let mut dense = nalgebra::DMatrix::from_element(1, 1, c);
    for m in local_mats.iter().rev() {
        dense = dense.kronecker(&crate::ops::local::mat2_to_dense(m));
    }
    let local = LocalOperator::new(local_sites, dense).expect("sites come from an ordered map");
    Some(StringOperator::new(&string, local).expect("string and local sites are disjoint"))
}

/// `n_j = c*_j c_j` on a single site.
pub fn number_operator(site: usize) -> LocalOperator {
    LocalOperator::single_site(site, &[[ONE, ZERO], [ZERO, ZERO]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::local::sigma;

    #[test]
    fn number_operator_from_modes() {
        let n = monomial(&[FermionMode::create(0), FermionMode::annihilate(0)], ONE).unwrap();
        let expect = sigma(0, Pauli::Z).add(&LocalOperator::identity(vec![0]).unwrap()).scaled(C64::new(0.5, 0.0));
        assert!(n.to_local().approx_eq(&expect, 1e-15));
        assert!(number_operator(0).approx_eq(&expect, 1e-15));
    }

    #[test]
    fn c1_has_string_on_site0() {
        let c1 = jordan_wigner(FermionMode::annihilate(1), 2).unwrap();
        assert_eq!(c1.support(), &[0, 1]);
        let lower = sigma(1, Pauli::X).sub(&sigma(1, Pauli::Y).scaled(crate::linalg::I)).scaled(C64::new(0.5, 0.0));
        let expect = sigma(0, Pauli::Z).mul(&lower);
        assert!(c1.approx_eq(&expect, 1e-15));
        assert!(mode_string_operator(FermionMode::annihilate(1)).to_local().approx_eq(&c1, 1e-15));
    }

    #[test]
    fn repeated_mode_vanishes() {
        assert!(monomial(&[FermionMode::annihilate(2), FermionMode::annihilate(2)], ONE).is_none());
    }

    #[test]
    fn hopping_is_string_free() {
        let hop = monomial(&[FermionMode::create(0), FermionMode::annihilate(1)], ONE).unwrap();
        assert_eq!(hop.string_mask(), 0);
        assert_eq!(hop.local().support(), &[0, 1]);
    }
}
