//! Tensorized circuits: layers of units sharing a scope.

mod build;
mod io;
mod region;

pub use build::{
    build_mps_chain, build_quadtree, build_ttn_binary, compile_region_graph, constant_like, random_mps,
    ArchitectureConfig, FamilySpec, RegionGraphSpec, WeightInit,
};
pub use io::{from_json, to_json, FORMAT_VERSION};
pub use region::{Region, RegionGraph};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::VarDomain;
use crate::error::{CircuitError, Result};
use crate::family::InputFamily;
use crate::linalg::Mat;
use crate::perm::Permutation;
use crate::real::{czero, Real, C};
use crate::scalar::{ScalarBuilder, ScalarCircuit, MIN_WEIGHT_MODULUS};
use crate::varset::VarSet;
use crate::Circuit;

/// How product layers combine their two inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProductKind {
    Hadamard,
    Kronecker,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LayerKind<T> {
    Input { var: usize, family: InputFamily<T> },
    /// `W · [ℓ_1; …; ℓ_N]`, with `W` of shape `K × Σ K_i`.
    Sum { inputs: Vec<usize>, weight: Mat<T> },
    Hadamard { inputs: [usize; 2] },
    /// `P (ℓ_a ⊗ ℓ_b)`; `perm = None` means `P = I`.
    Kronecker { inputs: [usize; 2], perm: Option<Permutation> },
}

impl<T> LayerKind<T> {
    pub fn inputs(&self) -> &[usize] {
        match self {
            LayerKind::Input { .. } => &[],
            LayerKind::Sum { inputs, .. } => inputs,
            LayerKind::Hadamard { inputs } | LayerKind::Kronecker { inputs, .. } => inputs,
        }
    }

    pub fn is_product(&self) -> bool {
        matches!(self, LayerKind::Hadamard { .. } | LayerKind::Kronecker { .. })
    }

    pub fn product_kind(&self) -> Option<ProductKind> {
        match self {
            LayerKind::Hadamard { .. } => Some(ProductKind::Hadamard),
            LayerKind::Kronecker { .. } => Some(ProductKind::Kronecker),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    pub kind: LayerKind<T>,
    pub scope: VarSet,
    pub width: usize,
}

/// Parameter counts; a complex number counts once in `complex`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub complex: usize,
    pub real: usize,
}

impl ParamCount {
    /// Complex parameters counted as one each.
    pub fn total(&self) -> usize {
        self.complex + self.real
    }

    /// Real degrees of freedom (complex parameters count twice).
    pub fn real_dof(&self) -> usize {
        2 * self.complex + self.real
    }
}

/// Validated tensorized circuit. Layers are in topological order and the
/// output is the last layer, which has width 1.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorizedCircuit<T> {
    domains: Vec<VarDomain<T>>,
    layers: Vec<Layer<T>>,
    offsets: Vec<usize>,
    total_width: usize,
}

impl<T: Real> TensorizedCircuit<T> {
    pub fn domains(&self) -> &[VarDomain<T>] {
        &self.domains
    }

    pub fn num_vars(&self) -> usize {
        self.domains.len()
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layer(&self, id: usize) -> &Layer<T> {
        &self.layers[id]
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn output(&self) -> usize {
        self.layers.len() - 1
    }

    /// Offset of layer `id` inside the flat activation vector of [`Self::eval_layers`].
    pub fn offset(&self, id: usize) -> usize {
        self.offsets[id]
    }

    pub fn total_width(&self) -> usize {
        self.total_width
    }

    pub fn activation<'a>(&self, acts: &'a [C<T>], id: usize) -> &'a [C<T>] {
        &acts[self.offsets[id]..self.offsets[id] + self.layers[id].width]
    }

    /// The product kind used throughout, or `None` if there are no product
    /// layers. Mixed kinds are reported as an error.
    pub fn product_kind(&self) -> Result<Option<ProductKind>> {
        let mut kind = None;
        for l in &self.layers {
            if let Some(k) = l.kind.product_kind() {
                if kind.is_some_and(|p| p != k) {
                    return Err(CircuitError::Capability("circuit mixes Hadamard and Kronecker layers".into()));
                }
                kind = Some(k);
            }
        }
        Ok(kind)
    }

    /// Input connections of layer `id` in the scalar view before pruning.
    pub fn layer_size(&self, id: usize) -> usize {
        let l = &self.layers[id];
        match &l.kind {
            LayerKind::Input { .. } => 0,
            LayerKind::Sum { weight, .. } => {
                weight.data().iter().filter(|w| w.norm() >= T::lit(MIN_WEIGHT_MODULUS)).count()
            }
            LayerKind::Hadamard { .. } | LayerKind::Kronecker { .. } => 2 * l.width,
        }
    }

    /// `Σ_ℓ S(ℓ)`.
    pub fn size(&self) -> usize {
        (0..self.layers.len()).map(|i| self.layer_size(i)).sum()
    }

    /// Largest layer width.
    pub fn max_width(&self) -> usize {
        self.layers.iter().map(|l| l.width).max().unwrap_or(0)
    }

    pub fn param_count(&self) -> ParamCount {
        let mut pc = ParamCount::default();
        for l in &self.layers {
            match &l.kind {
                LayerKind::Input { family, .. } => {
                    let (c, r) = family.param_count();
                    pc.complex += c;
                    pc.real += r;
                }
                LayerKind::Sum { weight, .. } => pc.complex += weight.rows() * weight.cols(),
                _ => {}
            }
        }
        pc
    }

    /// Replaces the weight of sum layer `id`; the shape must not change.
    pub fn set_sum_weight(&mut self, id: usize, w: Mat<T>) -> Result<()> {
        match &mut self.layers[id].kind {
            LayerKind::Sum { weight, .. } if weight.shape() == w.shape() => {
                *weight = w;
                Ok(())
            }
            LayerKind::Sum { weight, .. } => Err(CircuitError::Shape(format!(
                "sum layer {id} has weight shape {:?}, got {:?}",
                weight.shape(),
                w.shape()
            ))),
            _ => Err(CircuitError::Input(format!("layer {id} is not a sum layer"))),
        }
    }

    /// Replaces the family of input layer `id`; width and domain fit are checked.
    pub fn set_input_family(&mut self, id: usize, f: InputFamily<T>) -> Result<()> {
        let width = self.layers[id].width;
        match &mut self.layers[id].kind {
            LayerKind::Input { var, family } => {
                if f.width() != width || !f.fits_domain(&self.domains[*var]) {
                    return Err(CircuitError::Shape(format!("replacement family does not fit input layer {id}")));
                }
                *family = f;
                Ok(())
            }
            _ => Err(CircuitError::Input(format!("layer {id} is not an input layer"))),
        }
    }

    /// Activations of every layer, concatenated in layer order.
    pub fn eval_layers(&self, x: &[T]) -> Result<Vec<C<T>>> {
        self.check_len(x)?;
        self.forward(|_, var, family, out| {
            let v = x[var];
            self.domains[var].check(var, v)?;
            family.eval_into(v, out).map_err(|e| relabel(e, var))
        })
    }

    fn check_len(&self, x: &[T]) -> Result<()> {
        if x.len() < self.num_vars() {
            return Err(CircuitError::Input(format!(
                "assignment has {} values, circuit has {} variables",
                x.len(),
                self.num_vars()
            )));
        }
        Ok(())
    }

    /// Forward pass with input-layer activations supplied by `input(layer,
    /// var, family, out)`.
    pub fn forward(
        &self,
        mut input: impl FnMut(usize, usize, &InputFamily<T>, &mut [C<T>]) -> Result<()>,
    ) -> Result<Vec<C<T>>> {
        let mut acts = vec![czero(); self.total_width];
        for (id, l) in self.layers.iter().enumerate() {
            let (done, rest) = acts.split_at_mut(self.offsets[id]);
            let out = &mut rest[..l.width];
            let get = |j: usize| &done[self.offsets[j]..self.offsets[j] + self.layers[j].width];
            match &l.kind {
                LayerKind::Input { var, family } => input(id, *var, family, out)?,
                LayerKind::Sum { inputs, weight } => {
                    let mut col = 0;
                    for &j in inputs {
                        let a = get(j);
                        for (r, o) in out.iter_mut().enumerate() {
                            let row = &weight.row(r)[col..col + a.len()];
                            for (w, v) in row.iter().zip(a) {
                                *o += *w * *v;
                            }
                        }
                        col += a.len();
                    }
                }
                LayerKind::Hadamard { inputs: [a, b] } => {
                    for ((o, p), q) in out.iter_mut().zip(get(*a)).zip(get(*b)) {
                        *o = *p * *q;
                    }
                }
                LayerKind::Kronecker { inputs: [a, b], perm } => {
                    let (a, b) = (get(*a), get(*b));
                    let kb = b.len();
                    match perm {
                        None => {
                            for (i, p) in a.iter().enumerate() {
                                for (j, q) in b.iter().enumerate() {
                                    out[i * kb + j] = *p * *q;
                                }
                            }
                        }
                        Some(perm) => {
                            for (t, o) in out.iter_mut().enumerate() {
                                let s = perm.source(t);
                                *o = a[s / kb] * b[s % kb];
                            }
                        }
                    }
                }
            }
        }
        Ok(acts)
    }

    /// Output with the variables in `z` integrated out of every input layer
    /// (`∫ f_k`) and the others fixed to `x`. For a squared circuit this is
    /// the unnormalized marginal.
    pub fn integrate(&self, x: &[T], z: &VarSet) -> Result<C<T>> {
        if x.len() < self.num_vars() && (0..self.num_vars()).any(|v| !z.contains(v) && v >= x.len()) {
            return Err(CircuitError::Input("assignment is missing non-integrated variables".into()));
        }
        let acts = self.forward(|_, var, family, out| {
            if z.contains(var) {
                out.copy_from_slice(&family.integral()?);
                Ok(())
            } else {
                let v = x[var];
                self.domains[var].check(var, v)?;
                family.eval_into(v, out).map_err(|e| relabel(e, var))
            }
        })?;
        Ok(acts[self.offsets[self.output()]])
    }

    pub fn evaluate(&self, x: &[T]) -> Result<C<T>> {
        let acts = self.eval_layers(x)?;
        Ok(acts[self.offsets[self.output()]])
    }

    /// Evaluates many assignments in parallel.
    pub fn eval_batch(&self, xs: &[Vec<T>]) -> Result<Vec<C<T>>> {
        xs.par_iter().map(|x| self.evaluate(x)).collect()
    }

    /// Unit-level view: one scalar unit per layer entry. Zero weights and
    /// units that do not reach the output are dropped.
    pub fn to_scalar_view(&self) -> Result<ScalarCircuit<T>> {
        let mut b = ScalarBuilder::new(self.domains.clone());
        // unit id per layer entry; None marks an identically zero entry
        let mut ids: Vec<Vec<Option<usize>>> = Vec::with_capacity(self.layers.len());
        let tiny = T::lit(MIN_WEIGHT_MODULUS);
        for l in &self.layers {
            let row = match &l.kind {
                LayerKind::Input { var, family } => {
                    let fam = b.add_family(family.clone());
                    (0..l.width).map(|k| b.input_component(*var, fam, k).map(Some)).collect::<Result<Vec<_>>>()?
                }
                LayerKind::Sum { inputs, weight } => {
                    let children: Vec<Option<usize>> = inputs.iter().flat_map(|&j| ids[j].iter().copied()).collect();
                    let mut row = Vec::with_capacity(l.width);
                    for r in 0..l.width {
                        let (mut ins, mut ws) = (Vec::new(), Vec::new());
                        for (c, w) in children.iter().zip(weight.row(r)) {
                            if let (Some(c), true) = (c, w.norm() >= tiny) {
                                ins.push(*c);
                                ws.push(*w);
                            }
                        }
                        row.push(if ins.is_empty() { None } else { Some(b.sum(ins, ws)?) });
                    }
                    row
                }
                LayerKind::Hadamard { inputs: [a, c] } => {
                    let mut row = Vec::with_capacity(l.width);
                    for k in 0..l.width {
                        row.push(match (ids[*a][k], ids[*c][k]) {
                            (Some(p), Some(q)) => Some(b.product(vec![p, q])?),
                            _ => None,
                        });
                    }
                    row
                }
                LayerKind::Kronecker { inputs: [a, c], perm } => {
                    let kb = self.layers[*c].width;
                    let mut row = Vec::with_capacity(l.width);
                    for t in 0..l.width {
                        let s = perm.as_ref().map_or(t, |p| p.source(t));
                        row.push(match (ids[*a][s / kb], ids[*c][s % kb]) {
                            (Some(p), Some(q)) => Some(b.product(vec![p, q])?),
                            _ => None,
                        });
                    }
                    row
                }
            };
            ids.push(row);
        }
        let out = ids[self.output()][0]
            .ok_or_else(|| CircuitError::Numerical("circuit output is identically zero".into()))?;
        b.finish(out)
    }
}

impl<T: Real> Circuit<T> for TensorizedCircuit<T> {
    fn domains(&self) -> &[VarDomain<T>] {
        &self.domains
    }

    fn evaluate(&self, x: &[T]) -> Result<C<T>> {
        TensorizedCircuit::evaluate(self, x)
    }

    fn size(&self) -> usize {
        TensorizedCircuit::size(self)
    }
}

fn relabel(e: CircuitError, var: usize) -> CircuitError {
    match e {
        CircuitError::Domain { value, .. } => CircuitError::Domain { var, value },
        e => e,
    }
}

/// Incremental construction of a [`TensorizedCircuit`]. Smoothness and
/// decomposability are enforced as layers are added.
#[derive(Clone, Debug)]
pub struct TensorBuilder<T> {
    domains: Vec<VarDomain<T>>,
    layers: Vec<Layer<T>>,
}

impl<T: Real> TensorBuilder<T> {
    pub fn new(domains: Vec<VarDomain<T>>) -> Self {
        TensorBuilder { domains, layers: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.domains.len()
    }

    pub fn domains(&self) -> &[VarDomain<T>] {
        &self.domains
    }

    pub fn width(&self, id: usize) -> usize {
        self.layers[id].width
    }

    pub fn scope(&self, id: usize) -> &VarSet {
        &self.layers[id].scope
    }

    pub fn layer(&self, id: usize) -> &Layer<T> {
        &self.layers[id]
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    fn existing(&self, id: usize) -> Result<&Layer<T>> {
        self.layers
            .get(id)
            .ok_or_else(|| CircuitError::Input(format!("layer {id} does not exist yet")))
    }

    fn push(&mut self, kind: LayerKind<T>, scope: VarSet, width: usize) -> usize {
        self.layers.push(Layer { kind, scope, width });
        self.layers.len() - 1
    }

    pub fn input(&mut self, var: usize, family: InputFamily<T>) -> Result<usize> {
        let dom = self
            .domains
            .get(var)
            .ok_or_else(|| CircuitError::Input(format!("unknown variable {var}")))?;
        if !family.fits_domain(dom) {
            return Err(CircuitError::Input(format!(
                "{} family does not fit the domain of variable {var}",
                family.kind_name()
            )));
        }
        let width = family.width();
        let scope = VarSet::singleton(self.num_vars(), var);
        Ok(self.push(LayerKind::Input { var, family }, scope, width))
    }

    pub fn sum(&mut self, inputs: Vec<usize>, weight: Mat<T>) -> Result<usize> {
        if inputs.is_empty() {
            return Err(CircuitError::Input("sum layer needs at least one input".into()));
        }
        let scope = self.existing(inputs[0])?.scope.clone();
        let mut fan_in = 0;
        for &j in &inputs {
            let l = self.existing(j)?;
            if l.scope != scope {
                return Err(CircuitError::Input("sum layer inputs must share one scope".into()));
            }
            fan_in += l.width;
        }
        if weight.cols() != fan_in || weight.rows() == 0 {
            return Err(CircuitError::Shape(format!(
                "sum weight is {}×{}, inputs have total width {fan_in}",
                weight.rows(),
                weight.cols()
            )));
        }
        if !weight.is_finite() {
            return Err(CircuitError::Numerical("sum weight has non-finite entries".into()));
        }
        let width = weight.rows();
        Ok(self.push(LayerKind::Sum { inputs, weight }, scope, width))
    }

    fn product_scope(&self, a: usize, b: usize) -> Result<VarSet> {
        let (sa, sb) = (&self.existing(a)?.scope, &self.existing(b)?.scope);
        if !sa.is_disjoint(sb) {
            return Err(CircuitError::Input("product layer inputs must have disjoint scopes".into()));
        }
        Ok(sa.union(sb))
    }

    pub fn hadamard(&mut self, a: usize, b: usize) -> Result<usize> {
        let scope = self.product_scope(a, b)?;
        let (wa, wb) = (self.layers[a].width, self.layers[b].width);
        if wa != wb {
            return Err(CircuitError::Shape(format!("Hadamard layer inputs have widths {wa} and {wb}")));
        }
        Ok(self.push(LayerKind::Hadamard { inputs: [a, b] }, scope, wa))
    }

    pub fn kronecker(&mut self, a: usize, b: usize) -> Result<usize> {
        self.kronecker_permuted(a, b, None)
    }

    pub fn kronecker_permuted(&mut self, a: usize, b: usize, perm: Option<Permutation>) -> Result<usize> {
        let scope = self.product_scope(a, b)?;
        let width = self.layers[a].width * self.layers[b].width;
        let perm = match perm {
            Some(p) if p.len() != width => {
                return Err(CircuitError::Shape(format!("permutation of length {} on width {width}", p.len())))
            }
            Some(p) if p.is_identity() => None,
            p => p,
        };
        Ok(self.push(LayerKind::Kronecker { inputs: [a, b], perm }, scope, width))
    }

    pub fn product(&mut self, kind: ProductKind, a: usize, b: usize) -> Result<usize> {
        match kind {
            ProductKind::Hadamard => self.hadamard(a, b),
            ProductKind::Kronecker => self.kronecker(a, b),
        }
    }

    /// Finishes with `output` (width 1) as the output layer; layers not
    /// reaching it are dropped.
    pub fn finish(self, output: usize) -> Result<TensorizedCircuit<T>> {
        let out = self.existing(output)?;
        if out.width != 1 {
            return Err(CircuitError::Shape(format!("output layer has width {}, expected 1", out.width)));
        }
        let mut live = vec![false; self.layers.len()];
        live[output] = true;
        for id in (0..=output).rev() {
            if live[id] {
                for &j in self.layers[id].kind.inputs() {
                    live[j] = true;
                }
            }
        }
        let mut remap = vec![usize::MAX; self.layers.len()];
        let mut layers = Vec::new();
        for (id, mut l) in self.layers.into_iter().enumerate().take(output + 1) {
            if !live[id] {
                continue;
            }
            remap[id] = layers.len();
            match &mut l.kind {
                LayerKind::Input { .. } => {}
                LayerKind::Sum { inputs, .. } => inputs.iter_mut().for_each(|j| *j = remap[*j]),
                LayerKind::Hadamard { inputs } | LayerKind::Kronecker { inputs, .. } => {
                    inputs.iter_mut().for_each(|j| *j = remap[*j])
                }
            }
            layers.push(l);
        }
        let mut offsets = Vec::with_capacity(layers.len());
        let mut total = 0;
        for l in &layers {
            offsets.push(total);
            total += l.width;
        }
        Ok(TensorizedCircuit { domains: self.domains, layers, offsets, total_width: total })
    }
}
