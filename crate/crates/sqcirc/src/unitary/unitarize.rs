//! QR sweep turning a circuit into a unitary one computing a rescaled function.

use std::collections::HashMap;

use crate::error::{CircuitError, Result};
use crate::family::InputFamily;
use crate::linalg::Mat;
use crate::real::Real;
use crate::tensorized::{LayerKind, TensorBuilder, TensorizedCircuit};

pub const DEFAULT_WIDTH_CAP: usize = 1 << 14;

#[derive(Clone, Debug)]
pub struct UnitarizeOptions {
    /// Largest layer width the result may have.
    pub max_width: usize,
}

impl Default for UnitarizeOptions {
    fn default() -> Self {
        UnitarizeOptions { max_width: DEFAULT_WIDTH_CAP }
    }
}

/// Inserts an identity sum layer between every product layer and each of its
/// inputs that is itself a product layer.
pub fn interleave_identity_sums<T: Real>(c: &TensorizedCircuit<T>) -> Result<TensorizedCircuit<T>> {
    let mut b = TensorBuilder::new(c.domains().to_vec());
    let mut map = Vec::with_capacity(c.num_layers());
    let mut bridge: HashMap<usize, usize> = HashMap::new();
    for l in c.layers() {
        let mut child = |b: &mut TensorBuilder<T>, j: usize| -> Result<usize> {
            if !c.layer(j).kind.is_product() {
                return Ok(map[j]);
            }
            if let Some(&s) = bridge.get(&j) {
                return Ok(s);
            }
            let s = b.sum(vec![map[j]], Mat::identity(c.layer(j).width))?;
            bridge.insert(j, s);
            Ok(s)
        };
        let id = match &l.kind {
            LayerKind::Input { var, family } => b.input(*var, family.clone())?,
            LayerKind::Sum { inputs, weight } => b.sum(inputs.iter().map(|&j| map[j]).collect(), weight.clone())?,
            LayerKind::Hadamard { inputs: [x, y] } => {
                let (x, y) = (child(&mut b, *x)?, child(&mut b, *y)?);
                b.hadamard(x, y)?
            }
            LayerKind::Kronecker { inputs: [x, y], perm } => {
                let (x, y) = (child(&mut b, *x)?, child(&mut b, *y)?);
                b.kronecker_permuted(x, y, perm.clone())?
            }
        };
        map.push(id);
    }
    b.finish(map[c.output()])
}

/// Returns `(c', β)` with `c' = β·c` and every sum weight of `c'` having
/// orthonormal rows. Hadamard layers become Kronecker layers. If `c`
/// satisfies U1 and U2, `β = Z^{-1/2}`.
pub fn unitarize<T: Real>(c: &TensorizedCircuit<T>, opts: &UnitarizeOptions) -> Result<(TensorizedCircuit<T>, T)> {
    let c = interleave_identity_sums(c)?;
    let mut b = TensorBuilder::new(c.domains().to_vec());
    // layer ℓ of c equals carry · (new layer)
    let mut map = Vec::with_capacity(c.num_layers());
    let mut carry: Vec<Mat<T>> = Vec::with_capacity(c.num_layers());
    let cap = |w: usize, id: usize| -> Result<()> {
        if w > opts.max_width {
            return Err(CircuitError::Resource(format!(
                "unitarized layer {id} would have width {w}, above the cap {}",
                opts.max_width
            )));
        }
        Ok(())
    };
    for (id, l) in c.layers().iter().enumerate() {
        let (nid, r) = match &l.kind {
            LayerKind::Input { var, family } => match family {
                InputFamily::Categorical { table } => {
                    // table = R'† Q'† with Q'† having orthonormal rows
                    let (q, rq) = table.adjoint().qr_thin();
                    (b.input(*var, InputFamily::categorical(q.adjoint()))?, rq.adjoint())
                }
                f => (b.input(*var, f.clone())?, Mat::identity(l.width)),
            },
            LayerKind::Sum { inputs, weight } => {
                let mut col = 0;
                let mut blocks = Vec::with_capacity(inputs.len());
                for &j in inputs {
                    let kj = c.layer(j).width;
                    blocks.push(weight.col_block(col, kj).matmul(&carry[j]));
                    col += kj;
                }
                let v = Mat::hstack(&blocks.iter().collect::<Vec<_>>());
                let (q, rq) = v.adjoint().qr_thin();
                cap(q.cols(), id)?;
                (b.sum(inputs.iter().map(|&j| map[j]).collect(), q.adjoint())?, rq.adjoint())
            }
            LayerKind::Kronecker { inputs: [x, y], perm } => {
                let r = carry[*x].kron(&carry[*y]);
                cap(r.cols(), id)?;
                let r = match perm {
                    Some(p) => Mat::from_fn(r.rows(), r.cols(), |i, j| r[(p.source(i), j)]),
                    None => r,
                };
                (b.kronecker(map[*x], map[*y])?, r)
            }
            LayerKind::Hadamard { inputs: [x, y] } => {
                let r = carry[*x].face_split(&carry[*y]);
                cap(r.cols(), id)?;
                (b.kronecker(map[*x], map[*y])?, r)
            }
        };
        map.push(nid);
        carry.push(r);
    }
    let out = c.output();
    let mut root = map[out];
    let mut rc = carry[out].clone();
    if rc.cols() != 1 {
        // product output: close with a unit-norm sum
        let (q, rq) = rc.adjoint().qr_thin();
        root = b.sum(vec![root], q.adjoint())?;
        rc = rq.adjoint();
    }
    let s = rc[(0, 0)];
    if !(s.re > T::zero()) || s.im != T::zero() {
        return Err(CircuitError::Numerical("circuit is identically zero; no normalizing constant".into()));
    }
    Ok((b.finish(root)?, T::one() / s.re))
}
