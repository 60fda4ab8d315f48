//! Region graphs: trees of variable sets with one or more partitions each.

use crate::error::{CircuitError, Result};
use crate::varset::VarSet;

#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub scope: VarSet,
    /// Each partition lists child region ids whose scopes partition `scope`.
    pub partitions: Vec<Vec<usize>>,
}

impl Region {
    pub fn is_leaf(&self) -> bool {
        self.partitions.is_empty()
    }
}

/// Regions stored children-first; the root is the last region.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionGraph {
    num_vars: usize,
    regions: Vec<Region>,
}

#[derive(Clone, Copy)]
struct Rect {
    r0: usize,
    r1: usize,
    c0: usize,
    c1: usize,
}

impl Rect {
    fn h(&self) -> usize {
        self.r1 - self.r0
    }

    fn w(&self) -> usize {
        self.c1 - self.c0
    }

    /// Splits rows at ceil(h/2).
    fn split_rows(&self) -> (Rect, Rect) {
        let m = self.r0 + self.h().div_ceil(2);
        (Rect { r1: m, ..*self }, Rect { r0: m, ..*self })
    }

    fn split_cols(&self) -> (Rect, Rect) {
        let m = self.c0 + self.w().div_ceil(2);
        (Rect { c1: m, ..*self }, Rect { c0: m, ..*self })
    }
}

impl RegionGraph {
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn root(&self) -> usize {
        self.regions.len() - 1
    }

    fn push(&mut self, scope: VarSet, partitions: Vec<Vec<usize>>) -> usize {
        self.regions.push(Region { scope, partitions });
        self.regions.len() - 1
    }

    fn leaf(&mut self, var: usize) -> usize {
        let s = VarSet::singleton(self.num_vars, var);
        self.push(s, Vec::new())
    }

    fn rect_scope(&self, r: Rect, width: usize) -> VarSet {
        VarSet::from_vars(self.num_vars, (r.r0..r.r1).flat_map(|i| (r.c0..r.c1).map(move |j| i * width + j)))
    }

    /// Balanced binary tree over variables `0..d` in order.
    pub fn binary_tree(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(CircuitError::Input("region graph needs at least one variable".into()));
        }
        let mut g = RegionGraph { num_vars: d, regions: Vec::new() };
        g.binary_rec(0, d);
        Ok(g)
    }

    fn binary_rec(&mut self, lo: usize, hi: usize) -> usize {
        if hi - lo == 1 {
            return self.leaf(lo);
        }
        let mid = lo + (hi - lo).div_ceil(2);
        let a = self.binary_rec(lo, mid);
        let b = self.binary_rec(mid, hi);
        self.push(VarSet::from_vars(self.num_vars, lo..hi), vec![vec![a, b]])
    }

    /// Quad-tree over an `height × width` image (pixel `(r, c)` is variable
    /// `r·width + c`). Odd sides split ceil/floor. Children are ordered
    /// top-left, bottom-left, top-right, bottom-right.
    pub fn quad_tree(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(CircuitError::Input("image must be nonempty".into()));
        }
        let mut g = RegionGraph { num_vars: height * width, regions: Vec::new() };
        g.quad_rec(Rect { r0: 0, r1: height, c0: 0, c1: width }, width);
        Ok(g)
    }

    fn quad_rec(&mut self, r: Rect, width: usize) -> usize {
        if r.h() == 1 && r.w() == 1 {
            return self.leaf(r.r0 * width + r.c0);
        }
        let parts: Vec<Rect> = match (r.h() > 1, r.w() > 1) {
            (true, true) => {
                let (left, right) = r.split_cols();
                let (tl, bl) = left.split_rows();
                let (tr, br) = right.split_rows();
                vec![tl, bl, tr, br]
            }
            (true, false) => {
                let (t, b) = r.split_rows();
                vec![t, b]
            }
            _ => {
                let (a, b) = r.split_cols();
                vec![a, b]
            }
        };
        let children = parts.into_iter().map(|p| self.quad_rec(p, width)).collect();
        let scope = self.rect_scope(r, width);
        self.push(scope, vec![children])
    }

    /// Multi-split tree: a region larger than `min_patch` on both sides gets
    /// a horizontal and a vertical partition, otherwise a single cut along its
    /// longer side. Regions are never shared.
    pub fn multisplit(height: usize, width: usize, min_patch: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(CircuitError::Input("image must be nonempty".into()));
        }
        let mut g = RegionGraph { num_vars: height * width, regions: Vec::new() };
        g.multi_rec(Rect { r0: 0, r1: height, c0: 0, c1: width }, width, min_patch.max(1));
        Ok(g)
    }

    fn multi_rec(&mut self, r: Rect, width: usize, min_patch: usize) -> usize {
        if r.h() == 1 && r.w() == 1 {
            return self.leaf(r.r0 * width + r.c0);
        }
        let mut partitions = Vec::new();
        if r.h() > min_patch && r.w() > min_patch {
            for (a, b) in [r.split_rows(), r.split_cols()] {
                let ia = self.multi_rec(a, width, min_patch);
                let ib = self.multi_rec(b, width, min_patch);
                partitions.push(vec![ia, ib]);
            }
        } else {
            let (a, b) = if r.h() >= r.w() { r.split_rows() } else { r.split_cols() };
            let ia = self.multi_rec(a, width, min_patch);
            let ib = self.multi_rec(b, width, min_patch);
            partitions.push(vec![ia, ib]);
        }
        let scope = self.rect_scope(r, width);
        self.push(scope, partitions)
    }

    /// Number of leaf regions per variable.
    pub fn occurrences(&self) -> Vec<usize> {
        let mut occ = vec![0; self.num_vars];
        for r in &self.regions {
            if r.is_leaf() {
                occ[r.scope.first().expect("leaf scope is a singleton")] += 1;
            }
        }
        occ
    }

    /// Checks that every partition splits its region into disjoint pieces.
    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.regions.iter().enumerate() {
            if r.is_leaf() && r.scope.len() != 1 {
                return Err(CircuitError::Input(format!("leaf region {i} is not a single variable")));
            }
            for p in &r.partitions {
                let mut u = VarSet::empty(self.num_vars);
                for &c in p {
                    if c >= i {
                        return Err(CircuitError::Input("region graph is not in topological order".into()));
                    }
                    let s = &self.regions[c].scope;
                    if !u.is_disjoint(s) {
                        return Err(CircuitError::Input(format!("partition of region {i} overlaps")));
                    }
                    u.union_with(s);
                }
                if u != r.scope {
                    return Err(CircuitError::Input(format!("partition of region {i} does not cover it")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quad_tree_counts() {
        let g = RegionGraph::quad_tree(28, 28).unwrap();
        g.validate().unwrap();
        let inner = g.regions().iter().filter(|r| !r.is_leaf()).count();
        assert_eq!(inner, 325);
        assert!(g.occurrences().iter().all(|&o| o == 1));
        let g = RegionGraph::quad_tree(3, 5).unwrap();
        g.validate().unwrap();
        assert_eq!(g.regions()[g.root()].scope.len(), 15);
    }

    #[test]
    fn multisplit_shapes() {
        // 1×2: a single cut
        let g = RegionGraph::multisplit(1, 2, 1).unwrap();
        assert_eq!(g.regions()[g.root()].partitions.len(), 1);
        // 2×2: both cuts at the root
        let g = RegionGraph::multisplit(2, 2, 1).unwrap();
        g.validate().unwrap();
        assert_eq!(g.regions()[g.root()].partitions.len(), 2);
        assert!(g.occurrences().iter().all(|&o| o == 2));
        // 4×4 with min_patch 2: root splits both ways, 2×2 children once
        let g = RegionGraph::multisplit(4, 4, 2).unwrap();
        g.validate().unwrap();
        assert_eq!(g.regions()[g.root()].partitions.len(), 2);
        assert!(g.regions().iter().filter(|r| r.scope.len() == 4).all(|r| r.partitions.len() == 1));
    }

    #[test]
    fn binary_tree_is_balanced() {
        let g = RegionGraph::binary_tree(5).unwrap();
        g.validate().unwrap();
        assert_eq!(g.regions().len(), 9);
    }
}
