//! Exact products of compatible circuits and squared marginals.

use std::collections::HashMap;

use crate::error::{CircuitError, Result};
use crate::family::InputFamily;
use crate::linalg::Mat;
use crate::perm::Permutation;
use crate::real::{Real, C};
use crate::tensorized::{LayerKind, TensorBuilder, TensorizedCircuit};
use crate::varset::VarSet;

pub use crate::perm::PermutationSpec;

/// A matrix split into column blocks `[A_1 … A_N]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix<T> {
    pub blocks: Vec<Mat<T>>,
}

impl<T: Real> BlockMatrix<T> {
    /// Splits `m` into column blocks of the given widths.
    pub fn split_cols(m: &Mat<T>, widths: &[usize]) -> Result<Self> {
        if widths.iter().sum::<usize>() != m.cols() {
            return Err(CircuitError::Shape("block widths do not cover the matrix".into()));
        }
        let mut start = 0;
        let blocks = widths
            .iter()
            .map(|&w| {
                let b = m.col_block(start, w);
                start += w;
                b
            })
            .collect();
        Ok(BlockMatrix { blocks })
    }

    pub fn to_mat(&self) -> Mat<T> {
        Mat::hstack(&self.blocks.iter().collect::<Vec<_>>())
    }
}

/// Column-blocked Tracy–Singh product `[A_i ⊗ B_j]`, blocks in
/// lexicographic order of `(i, j)`.
pub fn tracy_singh<T: Real>(a: &BlockMatrix<T>, b: &BlockMatrix<T>) -> BlockMatrix<T> {
    BlockMatrix { blocks: a.blocks.iter().flat_map(|x| b.blocks.iter().map(move |y| x.kron(y))).collect() }
}

/// Row-wise Kronecker product `[a_r ⊗ b_r]_r`.
pub fn face_split<T: Real>(a: &Mat<T>, b: &Mat<T>) -> Result<Mat<T>> {
    if a.rows() != b.rows() {
        return Err(CircuitError::Shape("face-splitting product needs equal row counts".into()));
    }
    Ok(a.face_split(b))
}

/// The circuit computing `conj(c(x))`.
pub fn conjugate<T: Real>(c: &TensorizedCircuit<T>) -> Result<TensorizedCircuit<T>> {
    let mut b = TensorBuilder::new(c.domains().to_vec());
    for l in c.layers() {
        match &l.kind {
            LayerKind::Input { var, family } => b.input(*var, family.conj())?,
            LayerKind::Sum { inputs, weight } => b.sum(inputs.clone(), weight.conj())?,
            LayerKind::Hadamard { inputs: [x, y] } => b.hadamard(*x, *y)?,
            LayerKind::Kronecker { inputs: [x, y], perm } => b.kronecker_permuted(*x, *y, perm.clone())?,
        };
    }
    b.finish(c.output())
}

struct Multiplier<'a, T> {
    c1: &'a TensorizedCircuit<T>,
    c2: &'a TensorizedCircuit<T>,
    b: TensorBuilder<T>,
    memo: HashMap<(usize, usize), usize>,
    imported: [HashMap<usize, usize>; 2],
}

/// Product circuit `c1 · c2`. Layer `(i, j)` of the result computes
/// `ℓ_i ⊗ ℓ_j`; the circuits must be structured-decomposable compatible.
pub fn multiply<T: Real>(c1: &TensorizedCircuit<T>, c2: &TensorizedCircuit<T>) -> Result<TensorizedCircuit<T>> {
    if c1.domains() != c2.domains() {
        return Err(CircuitError::Precondition("circuits are over different variables".into()));
    }
    let k1 = c1.product_kind()?;
    let k2 = c2.product_kind()?;
    if let (Some(a), Some(b)) = (k1, k2) {
        if a != b {
            return Err(CircuitError::Capability("cannot multiply Hadamard and Kronecker circuits".into()));
        }
    }
    let mut m = Multiplier {
        c1,
        c2,
        b: TensorBuilder::new(c1.domains().to_vec()),
        memo: HashMap::new(),
        imported: [HashMap::new(), HashMap::new()],
    };
    let (o1, o2) = (c1.output(), c2.output());
    let (s1, s2) = (&c1.layer(o1).scope, &c2.layer(o2).scope);
    let out = if s1 == s2 {
        m.mult(o1, o2)?
    } else if s1.is_disjoint(s2) {
        let a = m.import(0, o1)?;
        let b = m.import(1, o2)?;
        m.b.kronecker(a, b)?
    } else {
        return Err(CircuitError::Precondition("output scopes overlap without being equal".into()));
    };
    m.b.finish(out)
}

/// `|c|²` as a circuit.
pub fn square<T: Real>(c: &TensorizedCircuit<T>) -> Result<TensorizedCircuit<T>> {
    multiply(c, &conjugate(c)?)
}

impl<T: Real> Multiplier<'_, T> {
    fn circuit(&self, side: usize) -> &TensorizedCircuit<T> {
        if side == 0 { self.c1 } else { self.c2 }
    }

    /// Copies a sub-circuit of one operand into the result.
    fn import(&mut self, side: usize, id: usize) -> Result<usize> {
        if let Some(&r) = self.imported[side].get(&id) {
            return Ok(r);
        }
        let l = self.circuit(side).layer(id).clone();
        let r = match &l.kind {
            LayerKind::Input { var, family } => self.b.input(*var, family.clone())?,
            LayerKind::Sum { inputs, weight } => {
                let ins = inputs.iter().map(|&j| self.import(side, j)).collect::<Result<Vec<_>>>()?;
                self.b.sum(ins, weight.clone())?
            }
            LayerKind::Hadamard { inputs: [x, y] } => {
                let (x, y) = (self.import(side, *x)?, self.import(side, *y)?);
                self.b.hadamard(x, y)?
            }
            LayerKind::Kronecker { inputs: [x, y], perm } => {
                let (x, y) = (self.import(side, *x)?, self.import(side, *y)?);
                self.b.kronecker_permuted(x, y, perm.clone())?
            }
        };
        self.imported[side].insert(id, r);
        Ok(r)
    }

    fn mult(&mut self, i: usize, j: usize) -> Result<usize> {
        if let Some(&r) = self.memo.get(&(i, j)) {
            return Ok(r);
        }
        let li = self.c1.layer(i).clone();
        let lj = self.c2.layer(j).clone();
        debug_assert_eq!(li.scope, lj.scope);
        let r = match (&li.kind, &lj.kind) {
            (LayerKind::Input { var, family: f }, LayerKind::Input { family: g, .. }) => {
                self.b.input(*var, InputFamily::product(f.clone(), g.clone()))?
            }
            (LayerKind::Sum { inputs: ia, weight: wa }, LayerKind::Sum { inputs: ib, weight: wb }) => {
                let ba = BlockMatrix::split_cols(wa, &self.widths(0, ia))?;
                let bb = BlockMatrix::split_cols(wb, &self.widths(1, ib))?;
                let mut ins = Vec::with_capacity(ia.len() * ib.len());
                for &x in ia {
                    for &y in ib {
                        ins.push(self.mult(x, y)?);
                    }
                }
                self.b.sum(ins, tracy_singh(&ba, &bb).to_mat())?
            }
            (LayerKind::Sum { inputs, weight }, _) => {
                let blocks = BlockMatrix::split_cols(weight, &self.widths(0, inputs))?;
                let eye = Mat::identity(lj.width);
                let mut ins = Vec::with_capacity(inputs.len());
                let mut w = Vec::with_capacity(inputs.len());
                for (&x, blk) in inputs.iter().zip(&blocks.blocks) {
                    ins.push(self.mult(x, j)?);
                    w.push(blk.kron(&eye));
                }
                self.b.sum(ins, BlockMatrix { blocks: w }.to_mat())?
            }
            (_, LayerKind::Sum { inputs, weight }) => {
                let blocks = BlockMatrix::split_cols(weight, &self.widths(1, inputs))?;
                let eye = Mat::identity(li.width);
                let mut ins = Vec::with_capacity(inputs.len());
                let mut w = Vec::with_capacity(inputs.len());
                for (&y, blk) in inputs.iter().zip(&blocks.blocks) {
                    ins.push(self.mult(i, y)?);
                    w.push(eye.kron(blk));
                }
                self.b.sum(ins, BlockMatrix { blocks: w }.to_mat())?
            }
            (LayerKind::Hadamard { inputs: [a1, b1] }, LayerKind::Hadamard { inputs: [a2, b2] }) => {
                let (x, y) = self.match_children([*a1, *b1], [*a2, *b2])?;
                let p = self.mult(x.0, x.1)?;
                let q = self.mult(y.0, y.1)?;
                self.b.hadamard(p, q)?
            }
            (LayerKind::Kronecker { inputs: [a1, b1], perm: p1 }, LayerKind::Kronecker { inputs: [a2, b2], perm: p2 }) => {
                let swapped = self.c1.layer(*a1).scope != self.c2.layer(*a2).scope;
                let (x, y) = self.match_children([*a1, *b1], [*a2, *b2])?;
                let p = self.mult(x.0, x.1)?;
                let q = self.mult(y.0, y.1)?;
                let w = |c: &TensorizedCircuit<T>, id: usize| c.layer(id).width;
                let (ka1, kb1) = (w(self.c1, *a1), w(self.c1, *b1));
                let (ka2, kb2) = (w(self.c2, *a2), w(self.c2, *b2));
                // position in (a1⊗b1)⊗(a2⊗b2) → position in the built p⊗q
                let kq = self.b.width(q);
                let mut src = Vec::with_capacity(ka1 * kb1 * ka2 * kb2);
                for u1 in 0..ka1 {
                    for v1 in 0..kb1 {
                        for u2 in 0..ka2 {
                            for v2 in 0..kb2 {
                                let (pi, qi) = if swapped {
                                    (u1 * kb2 + v2, v1 * ka2 + u2)
                                } else {
                                    (u1 * ka2 + u2, v1 * kb2 + v2)
                                };
                                src.push(pi * kq + qi);
                            }
                        }
                    }
                }
                let map = Permutation::from_sources(src)?;
                let pa = p1.clone().unwrap_or_else(|| Permutation::identity(li.width));
                let pb = p2.clone().unwrap_or_else(|| Permutation::identity(lj.width));
                let perm = pa.kron(&pb).compose(&map);
                self.b.kronecker_permuted(p, q, Some(perm))?
            }
            (LayerKind::Hadamard { .. }, LayerKind::Kronecker { .. }) | (LayerKind::Kronecker { .. }, LayerKind::Hadamard { .. }) => {
                return Err(CircuitError::Capability("cannot multiply Hadamard and Kronecker layers".into()))
            }
            _ => return Err(CircuitError::Precondition(format!("layers {i} and {j} are not compatible"))),
        };
        self.memo.insert((i, j), r);
        Ok(r)
    }

    fn widths(&self, side: usize, ids: &[usize]) -> Vec<usize> {
        ids.iter().map(|&x| self.circuit(side).layer(x).width).collect()
    }

    /// Pairs the children of two product layers by scope.
    fn match_children(&self, a: [usize; 2], b: [usize; 2]) -> Result<((usize, usize), (usize, usize))> {
        let s = |side: usize, id: usize| &self.circuit(side).layer(id).scope;
        if s(0, a[0]) == s(1, b[0]) && s(0, a[1]) == s(1, b[1]) {
            Ok(((a[0], b[0]), (a[1], b[1])))
        } else if s(0, a[0]) == s(1, b[1]) && s(0, a[1]) == s(1, b[0]) {
            Ok(((a[0], b[1]), (a[1], b[0])))
        } else {
            Err(CircuitError::Precondition("product layers split their scope differently".into()))
        }
    }
}

/// `Z = ∫ |c|²` via the squared circuit.
pub fn partition_via_square<T: Real>(c: &TensorizedCircuit<T>) -> Result<T> {
    let sq = square(c)?;
    let anchor: Vec<T> = c.domains().iter().map(|d| d.anchor()).collect();
    Ok(sq.integrate(&anchor, &VarSet::full(c.num_vars()))?.re)
}

/// `∫ |c(y, z)|² dz` with `y` read from `x` and `z` the variables in `z`.
pub fn marginal_via_square<T: Real>(c: &TensorizedCircuit<T>, x: &[T], z: &VarSet) -> Result<T> {
    Ok(square(c)?.integrate(x, z)?.re)
}

/// Evaluates `c1 · c2` at `x` directly, for comparisons.
pub fn product_value<T: Real>(c1: &TensorizedCircuit<T>, c2: &TensorizedCircuit<T>, x: &[T]) -> Result<C<T>> {
    Ok(c1.evaluate(x)? * c2.evaluate(x)?)
}
