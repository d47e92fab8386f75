//! Subsets of the coordinate set `{0, .., d-1}` as bitmasks.

use std::fmt;

/// Maximum dimension for which subsets are enumerated exhaustively.
pub const MAX_SUBSET_DIM: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Subset(pub u32);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn full(d: usize) -> Self {
        debug_assert!(d < 32);
        Subset(((1u64 << d) - 1) as u32)
    }

    pub fn singleton(j: usize) -> Self {
        Subset(1 << j)
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        Subset(indices.iter().fold(0, |m, &j| m | (1 << j)))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, j: usize) -> bool {
        self.0 >> j & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn with(self, j: usize) -> Self {
        Subset(self.0 | 1 << j)
    }

    pub fn without(self, j: usize) -> Self {
        Subset(self.0 & !(1 << j))
    }

    pub fn union(self, other: Subset) -> Self {
        Subset(self.0 | other.0)
    }

    pub fn minus(self, other: Subset) -> Self {
        Subset(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    /// Coordinate indices in increasing order.
    pub fn indices(self) -> impl Iterator<Item = usize> {
        let mut m = self.0;
        std::iter::from_fn(move || {
            if m == 0 {
                return None;
            }
            let j = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(j)
        })
    }

    /// Every subset of `self`, including `∅` and `self`, in increasing bit order.
    pub fn subsets(self) -> impl Iterator<Item = Subset> {
        let full = self.0;
        let mut next = Some(0u32);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full { None } else { Some((cur.wrapping_sub(full)) & full) };
            Some(Subset(cur))
        })
    }

    /// All subsets of `{0, .., d-1}`.
    pub fn all(d: usize) -> impl Iterator<Item = Subset> {
        (0..1u32 << d).map(Subset)
    }
}

impl fmt::Display for Subset {
    /// One-based, e.g. `{1,3}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, j) in self.indices().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", j + 1)?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_of_a_mask_are_complete() {
        let u = Subset::from_indices(&[0, 2, 5]);
        let subs: Vec<_> = u.subsets().collect();
        assert_eq!(subs.len(), 8);
        assert!(subs.iter().all(|s| s.is_subset_of(u)));
        assert_eq!(subs[0], Subset::EMPTY);
        assert_eq!(*subs.last().unwrap(), u);
        assert_eq!(Subset::EMPTY.subsets().count(), 1);
    }

    #[test]
    fn display_is_one_based() {
        assert_eq!(Subset::from_indices(&[0, 2]).to_string(), "{1,3}");
        assert_eq!(Subset::EMPTY.to_string(), "{}");
    }

    #[test]
    fn set_algebra() {
        let u = Subset::full(4);
        assert_eq!(u.len(), 4);
        assert_eq!(u.without(1).indices().collect::<Vec<_>>(), vec![0, 2, 3]);
        assert_eq!(u.minus(Subset::singleton(3)), Subset::full(3));
        assert!(Subset::singleton(2).with(0).contains(0));
    }
}
