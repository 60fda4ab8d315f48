//! Permutations stored as index maps: commutation matrices and the block
//! permutations `I_n ⊗ K^{(s,m)} ⊗ I_r`.

use serde::{Deserialize, Serialize};

use crate::error::{CircuitError, Result};

/// Structured permutation matrices, never materialized densely.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PermutationSpec {
    /// `K^{(m,n)}`, the `mn×mn` matrix with `K^{(m,n)} vec(Aᵀ) = vec(A)` for
    /// `A ∈ ℂ^{m×n}`; equivalently `K^{(m,n)}(x ⊗ y) = y ⊗ x` for `x ∈ ℂ^m`,
    /// `y ∈ ℂ^n`.
    Commutation { m: usize, n: usize },
    /// `I_n ⊗ K^{(s,m)} ⊗ I_r`.
    Block { n: usize, s: usize, m: usize, r: usize },
}

impl PermutationSpec {
    pub fn len(&self) -> usize {
        match *self {
            PermutationSpec::Commutation { m, n } => m * n,
            PermutationSpec::Block { n, s, m, r } => n * s * m * r,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Source index of output position `t`: `(P v)[t] = v[source(t)]`.
    pub fn source(&self, t: usize) -> usize {
        match *self {
            PermutationSpec::Commutation { m, n } => {
                // t = i + j·m  (column-major vec of an m×n matrix)
                let (i, j) = (t % m, t / m);
                j + i * n
            }
            PermutationSpec::Block { s, m, r, .. } => {
                let inner = s * m;
                let b = t % r;
                let u = (t / r) % inner;
                let a = t / (r * inner);
                let su = PermutationSpec::Commutation { m: s, n: m }.source(u);
                (a * inner + su) * r + b
            }
        }
    }

    pub fn to_permutation(&self) -> Permutation {
        Permutation { src: (0..self.len()).map(|t| self.source(t)).collect() }
    }
}

/// General permutation as a source-index map.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation {
    src: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation { src: (0..n).collect() }
    }

    pub fn from_sources(src: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; src.len()];
        for &s in &src {
            if s >= src.len() || std::mem::replace(&mut seen[s], true) {
                return Err(CircuitError::Input("index map is not a permutation".into()));
            }
        }
        Ok(Permutation { src })
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    pub fn sources(&self) -> &[usize] {
        &self.src
    }

    #[inline]
    pub fn source(&self, t: usize) -> usize {
        self.src[t]
    }

    pub fn is_identity(&self) -> bool {
        self.src.iter().enumerate().all(|(i, &s)| i == s)
    }

    /// `P v`.
    pub fn apply<X: Copy>(&self, v: &[X]) -> Vec<X> {
        assert_eq!(v.len(), self.len(), "permutation length");
        self.src.iter().map(|&s| v[s]).collect()
    }

    /// `Pᵀ v`.
    pub fn apply_inverse<X: Copy + Default>(&self, v: &[X]) -> Vec<X> {
        assert_eq!(v.len(), self.len(), "permutation length");
        let mut out = vec![X::default(); v.len()];
        for (t, &s) in self.src.iter().enumerate() {
            out[s] = v[t];
        }
        out
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (t, &s) in self.src.iter().enumerate() {
            inv[s] = t;
        }
        Permutation { src: inv }
    }

    /// `self · other` (apply `other` first).
    pub fn compose(&self, other: &Permutation) -> Self {
        assert_eq!(self.len(), other.len(), "permutation length");
        Permutation { src: self.src.iter().map(|&s| other.src[s]).collect() }
    }

    /// `self ⊗ other`.
    pub fn kron(&self, other: &Permutation) -> Self {
        let n2 = other.len();
        let mut src = Vec::with_capacity(self.len() * n2);
        for &a in &self.src {
            for &b in &other.src {
                src.push(a * n2 + b);
            }
        }
        Permutation { src }
    }
}

impl From<PermutationSpec> for Permutation {
    fn from(p: PermutationSpec) -> Self {
        p.to_permutation()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_col_major(a: &[Vec<i64>]) -> Vec<i64> {
        let (m, n) = (a.len(), a[0].len());
        let mut v = Vec::new();
        for j in 0..n {
            for row in a.iter().take(m) {
                v.push(row[j]);
            }
        }
        v
    }

    #[test]
    fn commutation_definition_brute_force() {
        for m in 1..5 {
            for n in 1..5 {
                let a: Vec<Vec<i64>> = (0..m).map(|i| (0..n).map(|j| (10 * i + j) as i64).collect()).collect();
                let at: Vec<Vec<i64>> = (0..n).map(|j| (0..m).map(|i| a[i][j]).collect()).collect();
                let k = PermutationSpec::Commutation { m, n }.to_permutation();
                assert_eq!(k.apply(&vec_col_major(&at)), vec_col_major(&a));
            }
        }
    }

    #[test]
    fn commutation_small_cases() {
        assert!(PermutationSpec::Commutation { m: 1, n: 5 }.to_permutation().is_identity());
        let k = PermutationSpec::Commutation { m: 2, n: 2 }.to_permutation();
        assert_eq!(k.apply(&[0, 1, 2, 3]), vec![0, 2, 1, 3]);
    }

    #[test]
    fn commutation_swaps_kronecker_factors() {
        let x = [1i64, 2, 3];
        let y = [5i64, 7];
        let kron = |a: &[i64], b: &[i64]| a.iter().flat_map(|p| b.iter().map(move |q| p * 100 + q)).collect::<Vec<_>>();
        let k = PermutationSpec::Commutation { m: 3, n: 2 }.to_permutation();
        let swapped: Vec<i64> = y.iter().flat_map(|q| x.iter().map(move |p| p * 100 + q)).collect();
        assert_eq!(k.apply(&kron(&x, &y)), swapped);
    }

    #[test]
    fn block_matches_kronecker_of_parts() {
        let spec = PermutationSpec::Block { n: 2, s: 3, m: 2, r: 2 };
        let p = spec.to_permutation();
        let expected = Permutation::identity(2)
            .kron(&PermutationSpec::Commutation { m: 3, n: 2 }.to_permutation())
            .kron(&Permutation::identity(2));
        assert_eq!(p, expected);
        let v: Vec<usize> = (0..p.len()).collect();
        assert_eq!(p.apply_inverse(&p.apply(&v)), v);
        assert!(p.compose(&p.inverse()).is_identity());
    }

    #[test]
    fn rejects_non_permutations() {
        assert!(Permutation::from_sources(vec![0, 0, 1]).is_err());
        assert!(Permutation::from_sources(vec![2, 0, 1]).is_ok());
    }
}
