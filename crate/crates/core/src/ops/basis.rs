use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest chain handled by the bitstring basis.
pub const MAX_SITES: usize = 40;

/// Computational basis of a chain, either complete or restricted to a fixed
/// number of up spins (bit value 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Basis {
    Full { sites: usize },
    Sector { sites: usize, up: usize, states: Vec<u64> },
}

/// Serializable identifier of a [`Basis`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisTag {
    pub sites: usize,
    /// Number of up spins for a sector basis.
    pub up: Option<usize>,
}

impl fmt::Display for BasisTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.up {
            None => write!(f, "full(L={})", self.sites),
            Some(u) => write!(f, "sector(L={}, up={u})", self.sites),
        }
    }
}

impl Basis {
    pub fn full(sites: usize) -> Result<Self> {
        if sites == 0 || sites > MAX_SITES {
            return Err(Error::Precondition(format!("chain length {sites} not in 1..={MAX_SITES}")));
        }
        Ok(Basis::Full { sites })
    }

    /// All states of `sites` bits with exactly `up` zero bits, ascending.
    pub fn sector(sites: usize, up: usize) -> Result<Self> {
        if sites == 0 || sites > MAX_SITES || up > sites {
            return Err(Error::Precondition(format!("no sector with {up} up spins on {sites} sites")));
        }
        let down = sites - up;
        let mut states = Vec::with_capacity(binomial(sites, down) as usize);
        if down == 0 {
            states.push(0);
        } else {
            // Gosper's hack over states with `down` set bits
            let limit = 1u64 << sites;
            let mut s: u64 = (1u64 << down) - 1;
            while s < limit {
                states.push(s);
                let c = s & s.wrapping_neg();
                let r = s + c;
                s = (((r ^ s) >> 2) / c) | r;
            }
        }
        Ok(Basis::Sector { sites, up, states })
    }

    pub fn sites(&self) -> usize {
        match self {
            Basis::Full { sites } | Basis::Sector { sites, .. } => *sites,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Basis::Full { sites } => 1usize << sites,
            Basis::Sector { states, .. } => states.len(),
        }
    }

    pub fn tag(&self) -> BasisTag {
        match self {
            Basis::Full { sites } => BasisTag { sites: *sites, up: None },
            Basis::Sector { sites, up, .. } => BasisTag { sites: *sites, up: Some(*up) },
        }
    }

    #[inline]
    pub fn state(&self, index: usize) -> u64 {
        match self {
            Basis::Full { .. } => index as u64,
            Basis::Sector { states, .. } => states[index],
        }
    }

    #[inline]
    pub fn index_of(&self, state: u64) -> Option<usize> {
        match self {
            Basis::Full { sites } => ((state >> sites) == 0).then_some(state as usize),
            Basis::Sector { states, .. } => states.binary_search(&state).ok(),
        }
    }

    /// Writes a vector expressed in this basis into the full `2^L` basis.
    pub fn to_full(&self, v: &[crate::linalg::C64]) -> Vec<crate::linalg::C64> {
        match self {
            Basis::Full { .. } => v.to_vec(),
            Basis::Sector { sites, states, .. } => {
                let mut out = vec![crate::linalg::ZERO; 1usize << sites];
                for (a, &s) in v.iter().zip(states) {
                    out[s as usize] = *a;
                }
                out
            }
        }
    }
}

/// Number of up spins in `state` on `sites` bits.
#[inline]
pub fn up_count(state: u64, sites: usize) -> usize {
    sites - state.count_ones() as usize
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sector_dimensions_are_binomial() {
        let dims: Vec<usize> = (0..=2).map(|u| Basis::sector(2, u).unwrap().dim()).collect();
        assert_eq!(dims, vec![1, 2, 1]);
        let total: usize = (0..=10).map(|u| Basis::sector(10, u).unwrap().dim()).sum();
        assert_eq!(total, 1024);
    }

    #[test]
    fn sector_states_sorted_and_indexed() {
        let b = Basis::sector(8, 3).unwrap();
        if let Basis::Sector { states, .. } = &b {
            assert!(states.windows(2).all(|w| w[0] < w[1]));
            for (i, &s) in states.iter().enumerate() {
                assert_eq!(up_count(s, 8), 3);
                assert_eq!(b.index_of(s), Some(i));
            }
        }
        assert_eq!(b.index_of(0), None);
    }
}
