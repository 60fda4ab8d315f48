//! Sets of variable indices.

use std::fmt;

use fixedbitset::FixedBitSet;

/// A set of variable indices drawn from `0..capacity`.
///
/// All sets taking part in one circuit share the circuit's variable count as
/// capacity, so equality and hashing are well defined.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarSet(FixedBitSet);

impl VarSet {
    pub fn empty(capacity: usize) -> Self {
        VarSet(FixedBitSet::with_capacity(capacity))
    }

    pub fn full(capacity: usize) -> Self {
        let mut b = FixedBitSet::with_capacity(capacity);
        b.insert_range(..);
        VarSet(b)
    }

    pub fn singleton(capacity: usize, var: usize) -> Self {
        let mut s = Self::empty(capacity);
        s.insert(var);
        s
    }

    pub fn from_vars(capacity: usize, vars: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(capacity);
        for v in vars {
            s.insert(v);
        }
        s
    }

    pub fn capacity(&self) -> usize {
        self.0.len()
    }

    pub fn insert(&mut self, var: usize) {
        self.0.insert(var);
    }

    pub fn remove(&mut self, var: usize) {
        self.0.set(var, false);
    }

    pub fn contains(&self, var: usize) -> bool {
        self.0.contains(var)
    }

    pub fn len(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_clear()
    }

    pub fn union(&self, other: &VarSet) -> VarSet {
        let mut b = self.0.clone();
        b.union_with(&other.0);
        VarSet(b)
    }

    pub fn union_with(&mut self, other: &VarSet) {
        self.0.union_with(&other.0);
    }

    pub fn intersection(&self, other: &VarSet) -> VarSet {
        let mut b = self.0.clone();
        b.intersect_with(&other.0);
        VarSet(b)
    }

    pub fn difference(&self, other: &VarSet) -> VarSet {
        let mut b = self.0.clone();
        b.difference_with(&other.0);
        VarSet(b)
    }

    pub fn is_disjoint(&self, other: &VarSet) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn is_subset(&self, other: &VarSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn intersects(&self, other: &VarSet) -> bool {
        !self.is_disjoint(other)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.ones()
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Smallest member, if any.
    pub fn first(&self) -> Option<usize> {
        self.0.minimum()
    }
}

impl fmt::Debug for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_algebra() {
        let a = VarSet::from_vars(6, [0, 1, 2]);
        let b = VarSet::from_vars(6, [2, 3]);
        assert_eq!(a.union(&b).to_vec(), vec![0, 1, 2, 3]);
        assert_eq!(a.intersection(&b).to_vec(), vec![2]);
        assert_eq!(a.difference(&b).to_vec(), vec![0, 1]);
        assert!(!a.is_disjoint(&b));
        assert!(VarSet::empty(6).is_empty());
        assert!(VarSet::from_vars(6, [1]).is_subset(&a));
        assert_eq!(VarSet::full(6).len(), 6);
        assert_eq!(b.first(), Some(2));
    }
}
