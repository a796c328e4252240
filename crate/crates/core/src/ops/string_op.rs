use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::ops::local::LocalOperator;

/// A local operator multiplied by a product of σ_z on a disjoint set of
/// sites. This is the natural sparse form of Jordan-Wigner images, whose
/// strings can span the whole chain.
#[derive(Debug, Clone)]
pub struct StringOperator {
    string_mask: u64,
    local: LocalOperator,
}

impl StringOperator {
    pub fn new(string_sites: &[usize], local: LocalOperator) -> Result<Self> {
        let mut mask = 0u64;
        for &s in string_sites {
            if s >= 64 {
                return Err(Error::SupportOutOfRange { site: s, len: 64 });
            }
            if local.support().contains(&s) {
                return Err(Error::OverlappingSupports(s));
            }
            mask |= 1u64 << s;
        }
        Ok(Self { string_mask: mask, local })
    }

    pub fn plain(local: LocalOperator) -> Self {
        Self { string_mask: 0, local }
    }

    pub fn string_mask(&self) -> u64 {
        self.string_mask
    }

    pub fn local(&self) -> &LocalOperator {
        &self.local
    }

    pub fn string_sites(&self) -> Vec<usize> {
        (0..64).filter(|s| self.string_mask >> s & 1 == 1).collect()
    }

    pub fn max_site(&self) -> Option<usize> {
        let s = (self.string_mask != 0).then(|| 63 - self.string_mask.leading_zeros() as usize);
        match (s, self.local.max_site()) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            string_mask: self.string_mask,
            local: self.local.scaled(c),
        }
    }

    /// Dense form on the union of string and local sites.
    pub fn to_local(&self) -> LocalOperator {
        let mut op = self.local.clone();
        for s in self.string_sites() {
            op = op.mul(&crate::ops::local::sigma(s, crate::ops::local::Pauli::Z));
        }
        op
    }

    /// Sign picked up by a basis state from the σ_z string.
    #[inline]
    pub fn string_sign(&self, state: u64) -> f64 {
        if (state & self.string_mask).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }
}

impl From<LocalOperator> for StringOperator {
    fn from(op: LocalOperator) -> Self {
        Self::plain(op)
    }
}
