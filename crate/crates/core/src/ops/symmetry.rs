use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::ops::local::{LocalOperator, SiteIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Open => "open",
            Boundary::Periodic => "periodic",
        })
    }
}

impl FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open" => Ok(Boundary::Open),
            "periodic" => Ok(Boundary::Periodic),
            other => Err(Error::Config(format!("unknown boundary '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Spin,
    Fermion,
}

/// Rotation angle of the U(1) action, kept in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeAngle(f64);

impl GaugeAngle {
    pub fn new(theta: f64) -> Self {
        let r = theta.rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU for tiny negative inputs
        Self(if r >= TAU { 0.0 } else { r })
    }

    pub fn theta(self) -> f64 {
        self.0
    }

    pub fn compose(self, other: Self) -> Self {
        Self::new(self.0 + other.0)
    }
}

fn reshape(op: &LocalOperator, f: impl Fn(usize, usize) -> C64) -> LocalOperator {
    let dim = op.dim();
    let m = DMatrix::from_fn(dim, dim, |r, c| op.matrix()[(r, c)] * f(r, c));
    LocalOperator::new(op.support().to_vec(), m).expect("support unchanged")
}

/// Lattice translation by `shift` sites.
pub fn translate(op: &LocalOperator, shift: i64, sites: usize, boundary: Boundary) -> Result<LocalOperator> {
    let l = sites as i64;
    let mut moved = Vec::with_capacity(op.support().len());
    for &s in op.support() {
        if s >= sites {
            return Err(Error::SupportOutOfRange { site: s, len: sites });
        }
        let t = s as i64 + shift;
        let t = match boundary {
            Boundary::Periodic => t.rem_euclid(l),
            Boundary::Open if (0..l).contains(&t) => t,
            Boundary::Open => {
                return Err(Error::SupportOutOfRange {
                    site: t.max(0) as usize,
                    len: sites,
                })
            }
        };
        moved.push(t as usize);
    }
    LocalOperator::with_sites(moved, op.matrix().clone())
}

fn sign_of_bits(x: usize) -> f64 {
    if x.count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Conjugation by `∏ σ_z` over the support. Odd fermion monomials change sign.
pub fn parity_transform(op: &LocalOperator) -> LocalOperator {
    reshape(op, |r, c| C64::new(sign_of_bits(r ^ c), 0.0))
}

/// Conjugation by `∏_{k ≤ cut} σ_z`: fermion generators on sites up to `cut`
/// change sign, the rest are untouched.
pub fn partial_parity(op: &LocalOperator, cut: SiteIndex) -> LocalOperator {
    let mask: usize = op
        .support()
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= cut.0)
        .map(|(m, _)| 1usize << m)
        .sum();
    reshape(op, |r, c| C64::new(sign_of_bits((r ^ c) & mask), 0.0))
}

/// Conjugation by `exp(iθ S_z)` on the support.
///
/// Under the crate's Jordan-Wigner convention this is also the fermionic
/// action `c_j ↦ e^{−iθ} c_j`, so both model kinds share one formula.
pub fn gauge_rotate(op: &LocalOperator, theta: GaugeAngle, _kind: ModelKind) -> LocalOperator {
    let th = theta.theta();
    // S_z eigenvalue difference m_r − m_c equals popcount(c) − popcount(r)
    reshape(op, |r, c| {
        let d = c.count_ones() as f64 - r.count_ones() as f64;
        C64::from_polar(1.0, th * d)
    })
}

/// Charge on a basis state: `Σσ_z` for spins, particle number for fermions.
pub fn charge_of_state(state: u64, sites: usize, kind: ModelKind) -> i64 {
    let down = state.count_ones() as i64;
    let up = sites as i64 - down;
    match kind {
        ModelKind::Spin => up - down,
        ModelKind::Fermion => up,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{I, ONE};
    use crate::ops::jw::{jordan_wigner, number_operator, FermionMode};
    use crate::ops::local::{sigma, Pauli};

    #[test]
    fn translation_examples() {
        let x0 = sigma(0, Pauli::X);
        let t = translate(&x0, 3, 8, Boundary::Periodic).unwrap();
        assert!(t.approx_eq(&sigma(3, Pauli::X), 0.0));
        assert_eq!(translate(&x0, 0, 8, Boundary::Open).unwrap(), x0);
        let two = sigma(6, Pauli::X).mul(&sigma(7, Pauli::Z));
        assert!(translate(&two, 1, 8, Boundary::Open).is_err());
        let wrapped = translate(&two, 1, 8, Boundary::Periodic).unwrap();
        assert!(wrapped.approx_eq(&sigma(7, Pauli::X).mul(&sigma(0, Pauli::Z)), 0.0));
    }

    #[test]
    fn parity_on_modes() {
        let c0 = jordan_wigner(FermionMode::annihilate(0), 4).unwrap();
        assert!(parity_transform(&c0).approx_eq(&c0.scaled(-ONE), 0.0));
        let n2 = number_operator(2);
        assert!(parity_transform(&n2).approx_eq(&n2, 0.0));
        let c5 = jordan_wigner(FermionMode::annihilate(5), 6).unwrap();
        assert!(partial_parity(&c5, SiteIndex(0)).approx_eq(&c5, 0.0));
        assert!(partial_parity(&c0, SiteIndex(0)).approx_eq(&c0.scaled(-ONE), 0.0));
        let cd0 = jordan_wigner(FermionMode::create(0), 4).unwrap();
        assert!(partial_parity(&cd0, SiteIndex(0)).approx_eq(&cd0.scaled(-ONE), 0.0));
    }

    #[test]
    fn gauge_examples() {
        let c0 = jordan_wigner(FermionMode::annihilate(0), 2).unwrap();
        let g = gauge_rotate(&c0, GaugeAngle::new(std::f64::consts::FRAC_PI_2), ModelKind::Fermion);
        assert!(g.approx_eq(&c0.scaled(-I), 1e-15));
        let full = GaugeAngle::new(TAU);
        assert_eq!(full.theta(), 0.0);
        let xy = sigma(0, Pauli::X).mul(&sigma(3, Pauli::Y));
        assert!(gauge_rotate(&xy, full, ModelKind::Spin).approx_eq(&xy, 0.0));
        let n = number_operator(1);
        assert!(gauge_rotate(&n, GaugeAngle::new(1.234), ModelKind::Fermion).approx_eq(&n, 0.0));
    }

    #[test]
    fn charges() {
        assert_eq!(charge_of_state(0, 4, ModelKind::Spin), 4);
        assert_eq!(charge_of_state(0b1111, 4, ModelKind::Fermion), 0);
    }
}
