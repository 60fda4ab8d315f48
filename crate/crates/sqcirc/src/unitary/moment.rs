//! Second-moment operators `M_ℓ = ∫ ℓ(y, z) ℓ(y, z)† dz` propagated bottom-up.

use crate::error::{CircuitError, Result};
use crate::linalg::Mat;
use crate::perm::Permutation;
use crate::real::{cone, czero, Real, C};
use crate::tensorized::{LayerKind, TensorizedCircuit};
use crate::varset::VarSet;

use super::check_unitarity;

/// Structured Hermitian PSD matrix.
#[derive(Clone, Debug)]
pub enum Moment<T> {
    Identity(usize),
    /// `v v†`.
    Rank1(Vec<C<T>>),
    Diag(Vec<T>),
    Full(Mat<T>),
    /// `P (A ⊗ B) Pᵀ`, never materialized.
    Kron { a: Box<Moment<T>>, b: Box<Moment<T>>, perm: Option<Permutation> },
}

impl<T: Real> Moment<T> {
    pub fn dim(&self) -> usize {
        match self {
            Moment::Identity(n) => *n,
            Moment::Rank1(v) => v.len(),
            Moment::Diag(d) => d.len(),
            Moment::Full(m) => m.rows(),
            Moment::Kron { a, b, .. } => a.dim() * b.dim(),
        }
    }

    /// `M x`, adding the multiplication count to `flops`.
    pub fn apply(&self, x: &[C<T>], flops: &mut u64) -> Vec<C<T>> {
        match self {
            Moment::Identity(_) => x.to_vec(),
            Moment::Rank1(v) => {
                *flops += 2 * v.len() as u64;
                let s: C<T> = v.iter().zip(x).map(|(a, b)| a.conj() * b).sum();
                v.iter().map(|a| *a * s).collect()
            }
            Moment::Diag(d) => {
                *flops += d.len() as u64;
                d.iter().zip(x).map(|(a, b)| b.scale(*a)).collect()
            }
            Moment::Full(m) => {
                *flops += (m.rows() * m.cols()) as u64;
                m.mul_vec(x)
            }
            Moment::Kron { a, b, perm } => {
                let (ka, kb) = (a.dim(), b.dim());
                let u = match perm {
                    Some(p) => p.apply_inverse(x),
                    None => x.to_vec(),
                };
                // rows of U (ka×kb) times Bᵀ, then A times the columns
                let mut v = vec![czero(); ka * kb];
                for i in 0..ka {
                    let r = b.apply(&u[i * kb..(i + 1) * kb], flops);
                    v[i * kb..(i + 1) * kb].copy_from_slice(&r);
                }
                let mut out = vec![czero(); ka * kb];
                let mut col = vec![czero(); ka];
                for j in 0..kb {
                    for i in 0..ka {
                        col[i] = v[i * kb + j];
                    }
                    let r = a.apply(&col, flops);
                    for i in 0..ka {
                        out[i * kb + j] = r[i];
                    }
                }
                match perm {
                    Some(p) => p.apply(&out),
                    None => out,
                }
            }
        }
    }

    pub fn diag(&self, flops: &mut u64) -> Vec<C<T>> {
        match self {
            Moment::Identity(n) => vec![cone(); *n],
            Moment::Rank1(v) => v.iter().map(|z| C::new(z.norm_sqr(), T::zero())).collect(),
            Moment::Diag(d) => d.iter().map(|&x| C::new(x, T::zero())).collect(),
            Moment::Full(m) => (0..m.rows()).map(|i| m[(i, i)]).collect(),
            Moment::Kron { a, b, perm } => {
                let (da, db) = (a.diag(flops), b.diag(flops));
                *flops += (da.len() * db.len()) as u64;
                let d: Vec<C<T>> = da.iter().flat_map(|x| db.iter().map(move |y| *x * *y)).collect();
                match perm {
                    Some(p) => p.apply(&d),
                    None => d,
                }
            }
        }
    }

    pub fn to_full(&self, flops: &mut u64) -> Mat<T> {
        match self {
            Moment::Full(m) => m.clone(),
            Moment::Identity(n) => Mat::identity(*n),
            Moment::Rank1(v) => {
                *flops += (v.len() * v.len()) as u64;
                Mat::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj())
            }
            Moment::Diag(d) => Mat::from_fn(d.len(), d.len(), |i, j| {
                if i == j { C::new(d[i], T::zero()) } else { czero() }
            }),
            Moment::Kron { .. } => {
                let n = self.dim();
                let mut m = Mat::zeros(n, n);
                let mut e = vec![czero(); n];
                for j in 0..n {
                    e[j] = cone();
                    let col = self.apply(&e, flops);
                    e[j] = czero();
                    for i in 0..n {
                        m[(i, j)] = col[i];
                    }
                }
                m
            }
        }
    }

    /// Elementwise product of the moments of the two inputs of a Hadamard layer.
    fn hadamard(a: &Moment<T>, b: &Moment<T>, flops: &mut u64) -> Moment<T> {
        use Moment::*;
        match (a, b) {
            (Identity(n), Identity(_)) => Identity(*n),
            (Rank1(u), Rank1(v)) => {
                *flops += u.len() as u64;
                Rank1(u.iter().zip(v).map(|(x, y)| x * y).collect())
            }
            (Identity(_), m) | (m, Identity(_)) => Diag(m.diag(flops).iter().map(|z| z.re).collect()),
            (Diag(d), m) | (m, Diag(d)) => {
                let e = m.diag(flops);
                *flops += d.len() as u64;
                Diag(d.iter().zip(e).map(|(x, y)| y.re * *x).collect())
            }
            (Rank1(v), m) | (m, Rank1(v)) => {
                let full = m.to_full(flops);
                let n = v.len();
                *flops += 2 * (n * n) as u64;
                Full(Mat::from_fn(n, n, |i, j| full[(i, j)] * v[i] * v[j].conj()))
            }
            _ => {
                let (x, y) = (a.to_full(flops), b.to_full(flops));
                *flops += (x.rows() * x.cols()) as u64;
                Full(x.hadamard(&y))
            }
        }
    }

    /// `W M W†`.
    fn sandwich(&self, w: &Mat<T>, flops: &mut u64) -> Mat<T> {
        let (k1, k2) = w.shape();
        if let Moment::Identity(_) = self {
            *flops += (k1 * k1 * k2) as u64;
            return w.matmul_adj(w);
        }
        // columns M·conj(w_r)
        let cols: Vec<Vec<C<T>>> =
            (0..k1).map(|r| self.apply(&w.row(r).iter().map(|z| z.conj()).collect::<Vec<_>>(), flops)).collect();
        *flops += (k1 * k1 * k2) as u64;
        Mat::from_fn(k1, k1, |p, q| w.row(p).iter().zip(&cols[q]).map(|(a, b)| *a * *b).sum())
    }
}

#[derive(Clone, Debug)]
pub struct MarOptions {
    /// Check U1, U3 and U4 first and fail with a property error if they do not hold.
    pub verify: bool,
    /// Keep materialized moments of mixed layers up to this width.
    pub record_up_to: usize,
}

impl Default for MarOptions {
    fn default() -> Self {
        MarOptions { verify: true, record_up_to: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct MarOutcome<T> {
    pub value: T,
    /// Complex multiplications performed.
    pub flops: u64,
    /// `(layer, M_ℓ)` for recorded mixed layers.
    pub moments: Vec<(usize, Mat<T>)>,
}

/// `∫ |c(y, z)|² dz` for a unitary circuit, with `y` read from `x` and `z`
/// the variables in `z`.
pub fn mar_squared_unitary<T: Real>(c: &TensorizedCircuit<T>, x: &[T], z: &VarSet, verify: bool) -> Result<T> {
    Ok(mar_squared_unitary_with(c, x, z, &MarOptions { verify, record_up_to: 0 })?.value)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Rel {
    Inside,
    Disjoint,
    Mixed,
}

pub fn mar_squared_unitary_with<T: Real>(
    c: &TensorizedCircuit<T>,
    x: &[T],
    z: &VarSet,
    opts: &MarOptions,
) -> Result<MarOutcome<T>> {
    if opts.verify {
        let r = check_unitarity(c);
        let full = (0..c.num_vars()).all(|v| z.contains(v));
        let ok = r.u1 && r.u3 && if full { r.u2 } else { r.u4 };
        if !ok {
            return Err(CircuitError::Property(format!(
                "circuit is not unitary (U1 {}, U2 {}, U3 {}, U4 {})",
                r.u1, r.u2, r.u3, r.u4
            )));
        }
    }
    for v in 0..c.num_vars() {
        if !z.contains(v) {
            let val = *x.get(v).ok_or_else(|| CircuitError::Input(format!("missing value for variable {v}")))?;
            c.domains()[v].check(v, val)?;
        }
    }
    let n = c.num_layers();
    let rel: Vec<Rel> = c
        .layers()
        .iter()
        .map(|l| {
            if l.scope.is_subset(z) {
                Rel::Inside
            } else if l.scope.is_disjoint(z) {
                Rel::Disjoint
            } else {
                Rel::Mixed
            }
        })
        .collect();
    // which layers need a value (disjoint) or a moment (mixed)
    let mut need = vec![false; n];
    need[c.output()] = true;
    for id in (0..n).rev() {
        if need[id] && rel[id] != Rel::Inside {
            for &j in c.layer(id).kind.inputs() {
                need[j] = true;
            }
        }
    }
    let mut flops = 0u64;
    let mut vals: Vec<Option<Vec<C<T>>>> = vec![None; n];
    let mut moms: Vec<Option<Moment<T>>> = vec![None; n];
    let mut recorded = Vec::new();
    for id in 0..n {
        if !need[id] {
            continue;
        }
        let l = c.layer(id);
        match rel[id] {
            Rel::Inside => moms[id] = Some(Moment::Identity(l.width)),
            Rel::Disjoint => vals[id] = Some(eval_layer(c, id, x, &vals, &mut flops)?),
            Rel::Mixed => {
                let get = |j: usize| -> Moment<T> {
                    match rel[j] {
                        Rel::Disjoint => Moment::Rank1(vals[j].clone().expect("value computed")),
                        _ => moms[j].clone().expect("moment computed"),
                    }
                };
                let m = match &l.kind {
                    LayerKind::Input { .. } => unreachable!("input layers are never mixed"),
                    LayerKind::Sum { inputs, weight } => {
                        let mut acc = Mat::zeros(l.width, l.width);
                        let mut col = 0;
                        let mut single_rank1 = None;
                        for &j in inputs {
                            let kj = c.layer(j).width;
                            let block = weight.col_block(col, kj);
                            col += kj;
                            let mj = get(j);
                            if inputs.len() == 1 {
                                if let Moment::Rank1(v) = &mj {
                                    flops += (l.width * kj) as u64;
                                    single_rank1 = Some(block.mul_vec(v));
                                    break;
                                }
                            }
                            acc.add_assign(&mj.sandwich(&block, &mut flops));
                        }
                        match single_rank1 {
                            Some(v) => Moment::Rank1(v),
                            None => Moment::Full(acc),
                        }
                    }
                    LayerKind::Hadamard { inputs: [a, b] } => {
                        let (ma, mb) = (get(*a), get(*b));
                        Moment::hadamard(&ma, &mb, &mut flops)
                    }
                    LayerKind::Kronecker { inputs: [a, b], perm } => Moment::Kron {
                        a: Box::new(get(*a)),
                        b: Box::new(get(*b)),
                        perm: perm.clone(),
                    },
                };
                if l.width <= opts.record_up_to {
                    let mut scratch = 0;
                    recorded.push((id, m.to_full(&mut scratch)));
                }
                moms[id] = Some(m);
            }
        }
    }
    let out = c.output();
    let total = match rel[out] {
        Rel::Disjoint => vals[out].as_ref().expect("output value")[0].norm_sqr(),
        _ => {
            let e = [cone::<T>()];
            let v = moms[out].as_ref().expect("output moment").apply(&e, &mut flops)[0];
            let tol = T::lit(1e-9) * (T::one() + v.re.abs());
            if v.im.abs() >= tol {
                return Err(CircuitError::Numerical(format!("squared marginal has imaginary part {}", v.im)));
            }
            v.re
        }
    };
    Ok(MarOutcome { value: total, flops, moments: recorded })
}

fn eval_layer<T: Real>(
    c: &TensorizedCircuit<T>,
    id: usize,
    x: &[T],
    vals: &[Option<Vec<C<T>>>],
    flops: &mut u64,
) -> Result<Vec<C<T>>> {
    let l = c.layer(id);
    let v = |j: usize| vals[j].as_ref().expect("child value");
    Ok(match &l.kind {
        LayerKind::Input { var, family } => {
            *flops += l.width as u64;
            family.eval(x[*var]).map_err(|e| match e {
                CircuitError::Domain { value, .. } => CircuitError::Domain { var: *var, value },
                e => e,
            })?
        }
        LayerKind::Sum { inputs, weight } => {
            let mut out = vec![czero(); l.width];
            let mut col = 0;
            for &j in inputs {
                let a = v(j);
                for (r, o) in out.iter_mut().enumerate() {
                    for (w, b) in weight.row(r)[col..col + a.len()].iter().zip(a) {
                        *o += *w * *b;
                    }
                }
                col += a.len();
            }
            *flops += (weight.rows() * weight.cols()) as u64;
            out
        }
        LayerKind::Hadamard { inputs: [a, b] } => {
            *flops += l.width as u64;
            v(*a).iter().zip(v(*b)).map(|(p, q)| p * q).collect()
        }
        LayerKind::Kronecker { inputs: [a, b], perm } => {
            *flops += l.width as u64;
            let (a, b) = (v(*a), v(*b));
            let k: Vec<C<T>> = a.iter().flat_map(|p| b.iter().map(move |q| p * q)).collect();
            match perm {
                Some(p) => p.apply(&k),
                None => k,
            }
        }
    })
}
