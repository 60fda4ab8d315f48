//! Negative log-likelihood and its exact reverse-mode gradient.
//!
//! Gradients of the real loss with respect to a complex parameter `w` are
//! stored as `∂L/∂Re w + i·∂L/∂Im w`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::params::{params_of, Param};
use crate::error::{CircuitError, Result};
use crate::family::{categorical_index, normal_pdf, InputFamily};
use crate::linalg::Mat;
use crate::perm::Permutation;
use crate::real::{czero, Real, C};
use crate::tensorized::{LayerKind, TensorizedCircuit};

/// `|c(x)|²` below this is clamped.
pub const LOG_FLOOR: f64 = 1e-300;
/// Examples per chunk in the deterministic parallel reduction.
const CHUNK: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossValue<T> {
    /// `|B|·log Z − Σ log |c(x)|²`.
    pub nll: T,
    /// `log Z`; exactly 0 for unitary circuits (not computed).
    pub log_partition: T,
    /// `log p(x)` per example.
    pub log_densities: Vec<T>,
    /// Examples whose `|c(x)|²` hit the floor.
    pub clamped: usize,
}

impl<T: Real> LossValue<T> {
    /// Bits per dimension for `d` variables.
    pub fn bpd(&self, d: usize) -> T {
        self.nll / (T::of_usize(self.log_densities.len() * d) * T::LN_2())
    }
}

/// `Σ_x log |c(x)|²` and its gradient (of the negated sum).
pub fn data_term<T: Real>(c: &TensorizedCircuit<T>, batch: &[Vec<T>], with_grad: bool) -> Result<(Vec<T>, usize, Vec<Param<T>>)> {
    let template: Vec<Param<T>> = params_of(c).iter().map(|p| p.zeros_like()).collect();
    let chunks: Vec<(Vec<T>, usize, Vec<Param<T>>)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = template.clone();
            let mut logs = Vec::with_capacity(chunk.len());
            let mut clamped = 0;
            for x in chunk {
                let acts = c.eval_layers(x)?;
                let out = acts[c.offset(c.output())];
                let sq = out.norm_sqr();
                if sq < T::lit(LOG_FLOOR) || !sq.is_finite() {
                    clamped += 1;
                    logs.push(T::lit(LOG_FLOOR).ln());
                    continue;
                }
                logs.push(sq.ln());
                if with_grad {
                    // d(−log|c|²) = −2c/|c|²
                    let seed = -(out * T::lit(2.0)) / sq;
                    backprop(c, x, &acts, seed, &mut g)?;
                }
            }
            Ok((logs, clamped, g))
        })
        .collect::<Result<_>>()?;
    let mut logs = Vec::with_capacity(batch.len());
    let mut clamped = 0;
    let mut grad = template;
    for (l, k, g) in chunks {
        logs.extend(l);
        clamped += k;
        for (a, b) in grad.iter_mut().zip(&g) {
            a.axpy(T::one(), b);
        }
    }
    Ok((logs, clamped, grad))
}

fn backprop<T: Real>(c: &TensorizedCircuit<T>, x: &[T], acts: &[C<T>], seed: C<T>, grad: &mut [Param<T>]) -> Result<()> {
    let mut g = vec![czero::<T>(); c.total_width()];
    g[c.offset(c.output())] = seed;
    for id in (0..c.num_layers()).rev() {
        let l = c.layer(id);
        let off = c.offset(id);
        let gy: Vec<C<T>> = g[off..off + l.width].to_vec();
        if gy.iter().all(|z| *z == czero()) {
            continue;
        }
        match &l.kind {
            LayerKind::Sum { inputs, weight } => {
                let gw = grad[id].as_mat_mut().expect("sum slot");
                let mut col = 0;
                for &j in inputs {
                    let (oj, kj) = (c.offset(j), c.layer(j).width);
                    let xj = &acts[oj..oj + kj];
                    for (r, gr) in gy.iter().enumerate() {
                        let wr = &weight.row(r)[col..col + kj];
                        let gwr = &mut gw.row_mut(r)[col..col + kj];
                        for k in 0..kj {
                            g[oj + k] += wr[k].conj() * gr;
                            gwr[k] += gr * xj[k].conj();
                        }
                    }
                    col += kj;
                }
            }
            LayerKind::Hadamard { inputs: [a, b] } => {
                let (oa, ob) = (c.offset(*a), c.offset(*b));
                for (k, gk) in gy.iter().enumerate() {
                    let (va, vb) = (acts[oa + k], acts[ob + k]);
                    g[oa + k] += gk * vb.conj();
                    g[ob + k] += gk * va.conj();
                }
            }
            LayerKind::Kronecker { inputs: [a, b], perm } => {
                let (oa, ob) = (c.offset(*a), c.offset(*b));
                let (ka, kb) = (c.layer(*a).width, c.layer(*b).width);
                let u = match perm {
                    Some(p) => p.apply_inverse(&gy),
                    None => gy,
                };
                for i in 0..ka {
                    let va = acts[oa + i];
                    let mut ga = czero();
                    for j in 0..kb {
                        let uij = u[i * kb + j];
                        ga += uij * acts[ob + j].conj();
                        g[ob + j] += uij * va.conj();
                    }
                    g[oa + i] += ga;
                }
            }
            LayerKind::Input { var, family } => input_grad(family, x[*var], &gy, &mut grad[id])?,
        }
    }
    Ok(())
}

fn input_grad<T: Real>(family: &InputFamily<T>, x: T, gy: &[C<T>], slot: &mut Param<T>) -> Result<()> {
    match family {
        InputFamily::Categorical { table } => {
            let idx = categorical_index(x, table.cols()).ok_or(CircuitError::Domain { var: usize::MAX, value: x.as_f64() })?;
            let gt = slot.as_mat_mut().expect("table slot");
            for (k, gk) in gy.iter().enumerate() {
                gt[(k, idx)] += *gk;
            }
        }
        InputFamily::Fourier { period, freqs, .. } => {
            let y = family.eval(x)?;
            let mut d = T::zero();
            for ((k, yk), gk) in freqs.iter().zip(&y).zip(gy) {
                // dy_k/db = (2πik/P)·y_k
                let dy = *yk * C::new(T::zero(), T::TAU() * T::lit(*k as f64) / *period);
                d += (gk.conj() * dy).re;
            }
            slot.as_real_mut().expect("bias slot")[0] += d;
        }
        InputFamily::Gaussian { mean, sd } => {
            let v = slot.as_real_mut().expect("gaussian slot");
            let k = mean.len();
            for i in 0..k {
                let y = normal_pdf(x, mean[i], sd[i]);
                let z = (x - mean[i]) / sd[i];
                let g = gy[i].re;
                v[i] += g * y * z / sd[i];
                v[k + i] += g * y * (z * z - T::one()) / sd[i];
            }
        }
        InputFamily::Product(..) => {
            return Err(CircuitError::Capability("product input families are not trainable".into()))
        }
    }
    Ok(())
}

enum PairOp {
    Input,
    /// `Σ A_i X_ij B_j†`; `None` stands for the identity.
    Sum { terms: Vec<(Option<(usize, usize)>, usize, Option<(usize, usize)>)> },
    Hadamard { x: usize, y: usize },
    /// Entry `[(i,j),(k,l)]` is `X[i,k]·Y[j,l]`, or `X[i,l]·Y[j,k]` when swapped.
    Kronecker { x: usize, y: usize, swapped: bool, pa: Option<Permutation>, pb: Option<Permutation> },
}

struct PairNode<T> {
    a: usize,
    b: usize,
    op: PairOp,
    value: Mat<T>,
}

/// Second moments `M(a, b) = ∫ ℓ_a ℓ_b†` for same-scope layer pairs.
struct PairMoments<'c, T> {
    c: &'c TensorizedCircuit<T>,
    nodes: Vec<PairNode<T>>,
    memo: HashMap<(usize, usize), usize>,
}

impl<'c, T: Real> PairMoments<'c, T> {
    fn new(c: &'c TensorizedCircuit<T>) -> Self {
        PairMoments { c, nodes: Vec::new(), memo: HashMap::new() }
    }

    fn block_list(&self, id: usize) -> Vec<(Option<(usize, usize)>, usize)> {
        match &self.c.layer(id).kind {
            LayerKind::Sum { inputs, .. } => {
                let mut col = 0;
                inputs
                    .iter()
                    .map(|&j| {
                        let w = self.c.layer(j).width;
                        col += w;
                        (Some((id, col - w)), j)
                    })
                    .collect()
            }
            _ => vec![(None, id)],
        }
    }

    fn weight_block(&self, blk: (usize, usize), width: usize) -> Mat<T> {
        match &self.c.layer(blk.0).kind {
            LayerKind::Sum { weight, .. } => weight.col_block(blk.1, width),
            _ => unreachable!(),
        }
    }

    fn node(&mut self, a: usize, b: usize) -> Result<usize> {
        if let Some(&n) = self.memo.get(&(a, b)) {
            return Ok(n);
        }
        let (la, lb) = (self.c.layer(a), self.c.layer(b));
        let (op, value) = match (&la.kind, &lb.kind) {
            (LayerKind::Input { family: f, .. }, LayerKind::Input { family: g, .. }) => (PairOp::Input, f.gram(g)?),
            (LayerKind::Sum { .. }, _) | (_, LayerKind::Sum { .. }) => {
                let (ba, bb) = (self.block_list(a), self.block_list(b));
                let mut terms = Vec::with_capacity(ba.len() * bb.len());
                let mut value = Mat::zeros(la.width, lb.width);
                for &(wa, ca) in &ba {
                    for &(wb, cb) in &bb {
                        let n = self.node(ca, cb)?;
                        let mut m = self.nodes[n].value.clone();
                        if let Some(blk) = wa {
                            m = self.weight_block(blk, self.c.layer(ca).width).matmul(&m);
                        }
                        if let Some(blk) = wb {
                            m = m.matmul_adj(&self.weight_block(blk, self.c.layer(cb).width));
                        }
                        value.add_assign(&m);
                        terms.push((wa, n, wb));
                    }
                }
                (PairOp::Sum { terms }, value)
            }
            (LayerKind::Hadamard { inputs: [a1, a2] }, LayerKind::Hadamard { inputs: [b1, b2] }) => {
                let (p, q) = self.matched([*a1, *a2], [*b1, *b2])?;
                let (x, y) = (self.node(p.0, p.1)?, self.node(q.0, q.1)?);
                let v = self.nodes[x].value.hadamard(&self.nodes[y].value);
                (PairOp::Hadamard { x, y }, v)
            }
            (
                LayerKind::Kronecker { inputs: [a1, a2], perm: pa },
                LayerKind::Kronecker { inputs: [b1, b2], perm: pb },
            ) => {
                let swapped = self.c.layer(*a1).scope != self.c.layer(*b1).scope;
                let (p, q) = self.matched([*a1, *a2], [*b1, *b2])?;
                let (x, y) = (self.node(p.0, p.1)?, self.node(q.0, q.1)?);
                let kb2 = self.c.layer(*b2).width;
                let (xm, ym) = (&self.nodes[x].value, &self.nodes[y].value);
                let ka2 = self.c.layer(*a2).width;
                let v = Mat::from_fn(la.width, lb.width, |t, u| {
                    let s = pa.as_ref().map_or(t, |p| p.source(t));
                    let r = pb.as_ref().map_or(u, |p| p.source(u));
                    let (i, j) = (s / ka2, s % ka2);
                    let (k, l) = (r / kb2, r % kb2);
                    if swapped { xm[(i, l)] * ym[(j, k)] } else { xm[(i, k)] * ym[(j, l)] }
                });
                (PairOp::Kronecker { x, y, swapped, pa: pa.clone(), pb: pb.clone() }, v)
            }
            _ => {
                return Err(CircuitError::Precondition(format!(
                    "layers {a} and {b} share a scope but are not compatible"
                )))
            }
        };
        self.nodes.push(PairNode { a, b, op, value });
        let n = self.nodes.len() - 1;
        self.memo.insert((a, b), n);
        Ok(n)
    }

    fn matched(&self, a: [usize; 2], b: [usize; 2]) -> Result<((usize, usize), (usize, usize))> {
        let s = |id: usize| &self.c.layer(id).scope;
        if s(a[0]) == s(b[0]) && s(a[1]) == s(b[1]) {
            Ok(((a[0], b[0]), (a[1], b[1])))
        } else if s(a[0]) == s(b[1]) && s(a[1]) == s(b[0]) {
            Ok(((a[0], b[1]), (a[1], b[0])))
        } else {
            Err(CircuitError::Precondition("product layers split their scope differently".into()))
        }
    }

    /// Reverse pass from `G` on the root pair into parameter gradients.
    fn backward(&self, root: usize, g_root: Mat<T>, grad: &mut [Param<T>]) -> Result<()> {
        let mut gs: Vec<Option<Mat<T>>> = vec![None; self.nodes.len()];
        gs[root] = Some(g_root);
        let acc = |gs: &mut Vec<Option<Mat<T>>>, n: usize, m: Mat<T>| match &mut gs[n] {
            Some(g) => g.add_assign(&m),
            slot => *slot = Some(m),
        };
        for n in (0..self.nodes.len()).rev() {
            let Some(g) = gs[n].take() else { continue };
            let node = &self.nodes[n];
            match &node.op {
                PairOp::Input => self.gram_grad(node.a, node.b, &g, grad)?,
                PairOp::Sum { terms } => {
                    for &(wa, child, wb) in terms {
                        let x = &self.nodes[child].value;
                        let (ka, kb) = (x.rows(), x.cols());
                        let a = wa.map(|blk| self.weight_block(blk, ka));
                        let b = wb.map(|blk| self.weight_block(blk, kb));
                        // Y = A X B†
                        let gb = match &b {
                            Some(b) => g.matmul(b),
                            None => g.clone(),
                        };
                        let gx = match &a {
                            Some(a) => a.adjoint().matmul(&gb),
                            None => gb.clone(),
                        };
                        if let Some(blk) = wa {
                            // G_A = G B X†
                            let ga = gb.matmul_adj(x);
                            add_cols(grad[blk.0].as_mat_mut().expect("sum slot"), blk.1, &ga);
                        }
                        if let Some(blk) = wb {
                            // G_B = G† A X
                            let ax = match &a {
                                Some(a) => a.matmul(x),
                                None => x.clone(),
                            };
                            let gbm = g.adjoint().matmul(&ax);
                            add_cols(grad[blk.0].as_mat_mut().expect("sum slot"), blk.1, &gbm);
                        }
                        acc(&mut gs, child, gx);
                    }
                }
                PairOp::Hadamard { x, y } => {
                    let (xv, yv) = (&self.nodes[*x].value, &self.nodes[*y].value);
                    acc(&mut gs, *x, g.hadamard(&yv.conj()));
                    acc(&mut gs, *y, g.hadamard(&xv.conj()));
                }
                PairOp::Kronecker { x, y, swapped, pa, pb } => {
                    let (xv, yv) = (&self.nodes[*x].value, &self.nodes[*y].value);
                    let la = self.c.layer(node.a);
                    let lb = self.c.layer(node.b);
                    let [_, a2] = la.kind.inputs() else { unreachable!() };
                    let [_, b2] = lb.kind.inputs() else { unreachable!() };
                    let (ka2, kb2) = (self.c.layer(*a2).width, self.c.layer(*b2).width);
                    let mut gx = Mat::zeros(xv.rows(), xv.cols());
                    let mut gy = Mat::zeros(yv.rows(), yv.cols());
                    for t in 0..la.width {
                        let s = pa.as_ref().map_or(t, |p| p.source(t));
                        let (i, j) = (s / ka2, s % ka2);
                        for u in 0..lb.width {
                            let r = pb.as_ref().map_or(u, |p| p.source(u));
                            let (k, l) = (r / kb2, r % kb2);
                            let gtu = g[(t, u)];
                            if *swapped {
                                gx[(i, l)] += gtu * yv[(j, k)].conj();
                                gy[(j, k)] += gtu * xv[(i, l)].conj();
                            } else {
                                gx[(i, k)] += gtu * yv[(j, l)].conj();
                                gy[(j, l)] += gtu * xv[(i, k)].conj();
                            }
                        }
                    }
                    acc(&mut gs, *x, gx);
                    acc(&mut gs, *y, gy);
                }
            }
        }
        Ok(())
    }

    fn gram_grad(&self, a: usize, b: usize, g: &Mat<T>, grad: &mut [Param<T>]) -> Result<()> {
        let (LayerKind::Input { family: fa, .. }, LayerKind::Input { family: fb, .. }) =
            (&self.c.layer(a).kind, &self.c.layer(b).kind)
        else {
            unreachable!()
        };
        match (fa, fb) {
            (InputFamily::Categorical { table: ta }, InputFamily::Categorical { table: tb }) => {
                // M = T_a T_b†
                let ga = g.matmul(tb);
                let gb = g.adjoint().matmul(ta);
                grad[a].as_mat_mut().expect("table slot").add_assign(&ga);
                grad[b].as_mat_mut().expect("table slot").add_assign(&gb);
            }
            (InputFamily::Fourier { period, freqs: ka, .. }, InputFamily::Fourier { freqs: kb, .. }) => {
                let m = fa.gram(fb)?;
                let w = T::TAU() / *period;
                let (mut da, mut db) = (T::zero(), T::zero());
                for (i, fi) in ka.iter().enumerate() {
                    for (j, fj) in kb.iter().enumerate() {
                        let gm = g[(i, j)].conj() * m[(i, j)];
                        // ∂M/∂b_a = i·w·k_i·M, ∂M/∂b_b = −i·w·k_j·M
                        da += (gm * C::new(T::zero(), w * T::lit(*fi as f64))).re;
                        db -= (gm * C::new(T::zero(), w * T::lit(*fj as f64))).re;
                    }
                }
                grad[a].as_real_mut().expect("bias slot")[0] += da;
                grad[b].as_real_mut().expect("bias slot")[0] += db;
            }
            (InputFamily::Gaussian { mean: ma, sd: sa }, InputFamily::Gaussian { mean: mb, sd: sb }) => {
                let (na, nb) = (ma.len(), mb.len());
                let mut dga = vec![T::zero(); 2 * na];
                let mut dgb = vec![T::zero(); 2 * nb];
                for i in 0..na {
                    for j in 0..nb {
                        let s = (sa[i] * sa[i] + sb[j] * sb[j]).sqrt();
                        let diff = ma[i] - mb[j];
                        let val = normal_pdf(ma[i], mb[j], s);
                        let gr = g[(i, j)].re;
                        let dmu = -val * diff / (s * s);
                        let ds = val * (diff * diff / (s * s * s) - T::one() / s);
                        dga[i] += gr * dmu;
                        dgb[j] -= gr * dmu;
                        dga[na + i] += gr * ds * sa[i] / s;
                        dgb[nb + j] += gr * ds * sb[j] / s;
                    }
                }
                for (x, d) in grad[a].as_real_mut().expect("gaussian slot").iter_mut().zip(&dga) {
                    *x += *d;
                }
                for (x, d) in grad[b].as_real_mut().expect("gaussian slot").iter_mut().zip(&dgb) {
                    *x += *d;
                }
            }
            _ => return Err(CircuitError::Capability("Gram gradient needs two families of one kind".into())),
        }
        Ok(())
    }
}

fn add_cols<T: Real>(m: &mut Mat<T>, start: usize, block: &Mat<T>) {
    for r in 0..block.rows() {
        for (x, y) in m.row_mut(r)[start..start + block.cols()].iter_mut().zip(block.row(r)) {
            *x += *y;
        }
    }
}

/// `log Z` from the pair-moment recursion, with the gradient of
/// `scale · log Z` if requested.
pub fn log_partition<T: Real>(c: &TensorizedCircuit<T>, grad_scale: Option<T>) -> Result<(T, Vec<Param<T>>)> {
    let mut pm = PairMoments::new(c);
    let root = pm.node(c.output(), c.output())?;
    let z = pm.nodes[root].value[(0, 0)].re;
    if !(z > T::zero()) || !z.is_finite() {
        return Err(CircuitError::Numerical(format!("partition function is {z}")));
    }
    let mut grad: Vec<Param<T>> = params_of(c).iter().map(|p| p.zeros_like()).collect();
    if let Some(s) = grad_scale {
        let g = Mat::from_vec(1, 1, vec![C::new(s / z, T::zero())]);
        pm.backward(root, g, &mut grad)?;
    }
    Ok((z.ln(), grad))
}

/// Loss of a batch. With `unitary` the partition function is taken to be 1.
pub fn nll<T: Real>(c: &TensorizedCircuit<T>, batch: &[Vec<T>], unitary: bool) -> Result<LossValue<T>> {
    Ok(loss_and_grad(c, batch, unitary, false)?.0)
}

/// Loss and, if `with_grad`, its gradient per parameter slot.
pub fn loss_and_grad<T: Real>(
    c: &TensorizedCircuit<T>,
    batch: &[Vec<T>],
    unitary: bool,
    with_grad: bool,
) -> Result<(LossValue<T>, Vec<Param<T>>)> {
    let n = T::of_usize(batch.len());
    let (logs, clamped, mut grad) = data_term(c, batch, with_grad)?;
    let log_z = if unitary {
        T::zero()
    } else {
        let (lz, gz) = log_partition(c, with_grad.then_some(n))?;
        for (a, b) in grad.iter_mut().zip(&gz) {
            a.axpy(T::one(), b);
        }
        lz
    };
    let nll = n * log_z - logs.iter().copied().sum::<T>();
    let log_densities = logs.into_iter().map(|l| l - log_z).collect();
    Ok((LossValue { nll, log_partition: log_z, log_densities, clamped }, grad))
}

/// Gradient of the loss with respect to every parameter slot.
pub fn backward<T: Real>(c: &TensorizedCircuit<T>, batch: &[Vec<T>], unitary: bool) -> Result<Vec<Param<T>>> {
    Ok(loss_and_grad(c, batch, unitary, true)?.1)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::domain::VarDomain;
    use crate::learning::params::{flatten, set_params, unflatten};
    use crate::oracle::enum_partition;
    use crate::tensorized::{build_quadtree, build_ttn_binary, FamilySpec, ProductKind, TensorBuilder};

    fn mixed_order_circuit() -> TensorizedCircuit<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut b = TensorBuilder::new(vec![VarDomain::categorical(3).unwrap(); 2]);
        let mut cat = |b: &mut TensorBuilder<f64>, v| {
            b.input(v, InputFamily::categorical(Mat::random_gaussian(2, 3, 1.0, &mut rng))).unwrap()
        };
        let (a0, a1, b0, b1) = (cat(&mut b, 0), cat(&mut b, 1), cat(&mut b, 0), cat(&mut b, 1));
        let perm = Permutation::from_sources(vec![2, 0, 3, 1]).unwrap();
        let p = b.kronecker_permuted(a0, a1, Some(perm)).unwrap();
        let q = b.kronecker(b1, b0).unwrap();
        let w = Mat::random_gaussian(1, 8, 0.5, &mut ChaCha8Rng::seed_from_u64(4));
        let root = b.sum(vec![p, q], w).unwrap();
        b.finish(root).unwrap()
    }

    fn fd_check(c: &TensorizedCircuit<f64>, batch: &[Vec<f64>], unitary: bool) {
        let (_, g) = loss_and_grad(c, batch, unitary, true).unwrap();
        let template = params_of(c);
        let theta = flatten(&template);
        let analytic = flatten(&g);
        let loss_at = |t: &[f64]| {
            let mut c2 = c.clone();
            set_params(&mut c2, &unflatten(&template, t)).unwrap();
            nll(&c2, batch, unitary).unwrap().nll
        };
        let h = 1e-6;
        let mut num = vec![0.0; theta.len()];
        for i in 0..theta.len() {
            let (mut tp, mut tm) = (theta.clone(), theta.clone());
            tp[i] += h;
            tm[i] -= h;
            num[i] = (loss_at(&tp) - loss_at(&tm)) / (2.0 * h);
        }
        let scale = num.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
        let err = num.iter().zip(&analytic).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err / scale < 1e-5, "relative gradient error {}", err / scale);
    }

    #[test]
    fn log_partition_matches_enumeration() {
        for c in [
            mixed_order_circuit(),
            build_quadtree(2, 2, 3, None, ProductKind::Kronecker, FamilySpec::Categorical { cardinality: 3 }, false, 5).unwrap(),
            build_quadtree(2, 2, 3, None, ProductKind::Hadamard, FamilySpec::Categorical { cardinality: 3 }, false, 6).unwrap(),
        ] {
            let (lz, _) = log_partition(&c, None).unwrap();
            let z = enum_partition(&c).unwrap().value;
            assert!((lz - z.ln()).abs() < 1e-10, "{lz} vs {}", z.ln());
        }
    }

    #[test]
    fn categorical_gradients_match_finite_differences() {
        let batch = vec![vec![0.0, 2.0], vec![1.0, 1.0], vec![2.0, 0.0]];
        fd_check(&mixed_order_circuit(), &batch, false);
        let cat = FamilySpec::Categorical { cardinality: 3 };
        let grid = vec![vec![0.0, 1.0, 2.0, 1.0], vec![2.0, 2.0, 0.0, 1.0]];
        for kind in [ProductKind::Hadamard, ProductKind::Kronecker] {
            let c = build_quadtree::<f64>(2, 2, 2, None, kind, cat.clone(), false, 7).unwrap();
            fd_check(&c, &grid, false);
            fd_check(&c, &grid, true);
        }
    }

    #[test]
    fn continuous_gradients_match_finite_differences() {
        let f = FamilySpec::Fourier { period: 2.0 };
        let c = build_ttn_binary::<f64>(2, 3, f, false, 8).unwrap();
        fd_check(&c, &[vec![0.3, 1.7], vec![1.1, 0.2]], false);
        let g = FamilySpec::Gaussian { mean_lo: -1.0, mean_hi: 1.0, sd: 0.8 };
        let c = build_ttn_binary::<f64>(2, 2, g, false, 9).unwrap();
        fd_check(&c, &[vec![0.3, -0.7], vec![-1.1, 0.2]], false);
    }

    #[test]
    fn underflow_is_clamped() {
        let mut c = build_ttn_binary::<f64>(2, 2, FamilySpec::Categorical { cardinality: 2 }, false, 1).unwrap();
        let mut p = params_of(&c);
        let out = c.output();
        let w = p[out].as_mat_mut().unwrap();
        *w = w.scale_real(1e-200);
        set_params(&mut c, &p).unwrap();
        let (lv, _) = loss_and_grad(&c, &[vec![0.0, 1.0]], true, true).unwrap();
        assert_eq!(lv.clamped, 1);
        assert!(lv.nll.is_finite());
    }
}
