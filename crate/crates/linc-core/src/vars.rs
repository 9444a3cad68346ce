//! Compact variable sets over a universe of at most 32 indexed variables.
//!
//! Variables are identified by 0-based indices internally and by the names
//! `x1 .. xn` in every file format and display string.

use std::fmt;

use crate::error::{Error, Result};

/// A set of variable indices, stored as a bitmask.
///
/// All interventions, conditioning sets and observation masks in this crate
/// are `VarSet`s. Subset and superset tests are single bit operations, which
/// matters for the superset-closure queries issued by the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct VarSet(u32);

impl VarSet {
    pub const EMPTY: VarSet = VarSet(0);

    pub fn empty() -> Self {
        VarSet(0)
    }

    /// The full universe `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        debug_assert!(n <= 32);
        if n == 32 {
            VarSet(u32::MAX)
        } else {
            VarSet((1u32 << n) - 1)
        }
    }

    pub fn singleton(i: usize) -> Self {
        debug_assert!(i < 32);
        VarSet(1 << i)
    }

    pub fn from_bits(bits: u32) -> Self {
        VarSet(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        i < 32 && self.0 & (1 << i) != 0
    }

    pub fn with(self, i: usize) -> Self {
        debug_assert!(i < 32);
        VarSet(self.0 | (1 << i))
    }

    pub fn without(self, i: usize) -> Self {
        VarSet(self.0 & !(1 << i))
    }

    pub fn union(self, other: VarSet) -> Self {
        VarSet(self.0 | other.0)
    }

    pub fn intersect(self, other: VarSet) -> Self {
        VarSet(self.0 & other.0)
    }

    pub fn minus(self, other: VarSet) -> Self {
        VarSet(self.0 & !other.0)
    }

    pub fn complement(self, n: usize) -> Self {
        Self::full(n).minus(self)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: VarSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_proper_subset(self, other: VarSet) -> bool {
        self != other && self.is_subset(other)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Iterate member indices in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |i| bits & (1 << i) != 0)
    }

    /// All subsets of this set, in ascending bitmask order (∅ first).
    pub fn subsets(self) -> impl Iterator<Item = VarSet> {
        let mask = self.0;
        // Standard subset-enumeration trick on bitmasks.
        let mut current: u32 = 0;
        let mut done = false;
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            let out = VarSet(current);
            if current == mask {
                done = true;
            } else {
                current = (current.wrapping_sub(mask)) & mask;
            }
            Some(out)
        })
    }

    pub fn names(self) -> Vec<String> {
        self.iter().map(var_name).collect()
    }
}

impl FromIterator<usize> for VarSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        let mut s = VarSet::empty();
        for i in iter {
            s = s.with(i);
        }
        s
    }
}

impl fmt::Display for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", var_name(i))?;
        }
        write!(f, "}}")
    }
}

/// Canonical display name of variable index `i`: `x1`, `x2`, ...
pub fn var_name(i: usize) -> String {
    format!("x{}", i + 1)
}

/// Parse a canonical variable name back to its index.
pub fn parse_var(name: &str, n: usize) -> Result<usize> {
    let idx: usize = name
        .strip_prefix('x')
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&k| k >= 1)
        .ok_or_else(|| Error::InvalidSpec(format!("unknown variable name {name:?}")))?;
    let idx = idx - 1;
    if idx >= n {
        return Err(Error::IndexOutOfRange { index: idx, n });
    }
    Ok(idx)
}

/// Convert a list of names to a `VarSet`, validating against the universe size.
pub fn names_to_set(names: &[String], n: usize) -> Result<VarSet> {
    let mut s = VarSet::empty();
    for name in names {
        s = s.with(parse_var(name, n)?);
    }
    Ok(s)
}
