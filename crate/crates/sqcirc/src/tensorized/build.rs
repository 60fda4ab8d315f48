//! Architecture builders: region-graph compilation, MPS chains and
//! configuration-driven construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::region::RegionGraph;
use super::{LayerKind, ProductKind, TensorBuilder, TensorizedCircuit};
use crate::domain::VarDomain;
use crate::error::{CircuitError, Result};
use crate::family::{make_unitary_embedding_blocks, InputFamily};
use crate::linalg::Mat;
use crate::real::{creal, Real};

/// Input-function family attached to every variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    Categorical { cardinality: usize },
    /// Fourier basis on `[0, period]`; the input width must be odd.
    Fourier { period: f64 },
    /// Normal densities with means drawn uniformly from `[mean_lo, mean_hi]`.
    Gaussian { mean_lo: f64, mean_hi: f64, sd: f64 },
}

impl FamilySpec {
    pub fn domain<T: Real>(&self) -> Result<VarDomain<T>> {
        match *self {
            FamilySpec::Categorical { cardinality } => VarDomain::categorical(cardinality),
            FamilySpec::Fourier { period } => VarDomain::interval(T::zero(), T::lit(period)),
            FamilySpec::Gaussian { .. } => Ok(VarDomain::RealLine),
        }
    }

    /// Widest input layer this family supports for a variable appearing in
    /// `occurrences` leaves, when the leaves must be mutually orthonormal.
    fn orthonormal_capacity(&self, occurrences: usize) -> Option<usize> {
        match *self {
            FamilySpec::Categorical { cardinality } => Some(cardinality / occurrences.max(1)),
            _ => None,
        }
    }

    /// One family per occurrence of a variable.
    fn families<T: Real>(&self, width: usize, occurrences: usize, unitary: bool, rng: &mut ChaCha8Rng) -> Result<Vec<InputFamily<T>>> {
        match *self {
            FamilySpec::Categorical { cardinality } => {
                if unitary {
                    make_unitary_embedding_blocks(cardinality, &vec![width; occurrences], rng.random())
                } else {
                    Ok((0..occurrences)
                        .map(|_| InputFamily::categorical(Mat::random_gaussian(width, cardinality, T::one(), rng)))
                        .collect())
                }
            }
            FamilySpec::Fourier { period } => {
                if width % 2 == 0 {
                    return Err(CircuitError::Input(format!("Fourier input width must be odd, got {width}")));
                }
                let p = T::lit(period);
                if unitary {
                    // disjoint frequency blocks: 0, 1, -1, 2, -2, …
                    let order = |n: usize| -> i64 {
                        let k = n.div_ceil(2) as i64;
                        if n % 2 == 1 { k } else { -k }
                    };
                    (0..occurrences)
                        .map(|o| {
                            let freqs = (o * width..(o + 1) * width).map(order).collect();
                            InputFamily::fourier_with_freqs(p, freqs, T::zero())
                        })
                        .collect()
                } else {
                    (0..occurrences)
                        .map(|_| InputFamily::fourier(p, width, T::lit(rng.random_range(0.0..period))))
                        .collect()
                }
            }
            FamilySpec::Gaussian { mean_lo, mean_hi, sd } => {
                if unitary {
                    return Err(CircuitError::Infeasible("Gaussian inputs are not orthonormal".into()));
                }
                (0..occurrences)
                    .map(|_| {
                        let mean = (0..width).map(|_| T::lit(rng.random_range(mean_lo..=mean_hi))).collect();
                        InputFamily::gaussian(mean, vec![T::lit(sd); width])
                    })
                    .collect()
            }
        }
    }
}

/// Initialization of sum-layer weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightInit {
    /// i.i.d. complex normal entries with variance `1/fan_in`.
    Gaussian,
    /// Random matrix with orthonormal rows.
    SemiUnitary,
}

impl WeightInit {
    fn sample<T: Real>(self, rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Result<Mat<T>> {
        match self {
            WeightInit::Gaussian => Ok(Mat::random_gaussian(rows, cols, T::one() / T::of_usize(cols).sqrt(), rng)),
            WeightInit::SemiUnitary => Mat::random_semi_unitary(rows, cols, rng),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegionGraphSpec {
    Mps { num_vars: usize },
    Ttn { num_vars: usize },
    QuadTree { height: usize, width: usize },
    Multisplit { height: usize, width: usize, min_patch: usize },
}

/// Declarative description of a circuit architecture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub region_graph: RegionGraphSpec,
    /// Sum-layer width `K` (bond dimension for MPS).
    #[serde(alias = "K")]
    pub units: usize,
    /// Input-layer width; defaults to `units`.
    #[serde(default)]
    pub input_units: Option<usize>,
    #[serde(default = "default_product")]
    pub product_kind: ProductKind,
    pub input_family: FamilySpec,
    /// Semi-unitary sums and orthonormal inputs.
    #[serde(default)]
    pub unitary: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_product() -> ProductKind {
    ProductKind::Kronecker
}

impl ArchitectureConfig {
    pub fn build<T: Real>(&self) -> Result<TensorizedCircuit<T>> {
        if self.units == 0 {
            return Err(CircuitError::Input("units must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        match self.region_graph {
            RegionGraphSpec::Mps { num_vars } => {
                random_mps_with(num_vars, &self.input_family, self.units, self.unitary, &mut rng)
            }
            RegionGraphSpec::Ttn { num_vars } => {
                if self.product_kind != ProductKind::Kronecker {
                    return Err(CircuitError::Input("tree tensor networks use Kronecker products".into()));
                }
                compile_with(&RegionGraph::binary_tree(num_vars)?, self, &mut rng)
            }
            RegionGraphSpec::QuadTree { height, width } => {
                compile_with(&RegionGraph::quad_tree(height, width)?, self, &mut rng)
            }
            RegionGraphSpec::Multisplit { height, width, min_patch } => {
                compile_with(&RegionGraph::multisplit(height, width, min_patch)?, self, &mut rng)
            }
        }
    }
}

/// Compiles a region graph: an input layer per leaf, a binary chain of
/// product layers per partition and one sum layer per inner region.
pub fn compile_region_graph<T: Real>(g: &RegionGraph, cfg: &ArchitectureConfig) -> Result<TensorizedCircuit<T>> {
    compile_with(g, cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed))
}

fn compile_with<T: Real>(g: &RegionGraph, cfg: &ArchitectureConfig, rng: &mut ChaCha8Rng) -> Result<TensorizedCircuit<T>> {
    g.validate()?;
    let n = g.num_vars();
    let dom = cfg.input_family.domain::<T>()?;
    let occ = g.occurrences();
    let capped = |o: usize| {
        let w = cfg.input_units.unwrap_or(cfg.units);
        match cfg.input_family.orthonormal_capacity(o) {
            Some(cap) if cfg.unitary => w.min(cap),
            _ => w,
        }
    };
    // Hadamard products need equal widths, so unitary Hadamard circuits use
    // the smallest capacity everywhere.
    let uniform = (cfg.unitary && cfg.product_kind == ProductKind::Hadamard)
        .then(|| occ.iter().map(|&o| capped(o)).min().unwrap_or(0));
    let mut families: Vec<Vec<InputFamily<T>>> = Vec::with_capacity(n);
    for (var, &o) in occ.iter().enumerate() {
        let w = uniform.unwrap_or_else(|| capped(o));
        if w == 0 {
            return Err(CircuitError::Infeasible(format!(
                "variable {var} appears in {o} leaves; no room for orthonormal inputs"
            )));
        }
        let mut f = cfg.input_family.families(w, o, cfg.unitary, rng)?;
        f.reverse();
        families.push(f);
    }
    let init = if cfg.unitary { WeightInit::SemiUnitary } else { WeightInit::Gaussian };
    let mut b = TensorBuilder::new(vec![dom; n]);
    let mut ids = vec![usize::MAX; g.regions().len()];
    for (i, r) in g.regions().iter().enumerate() {
        if r.is_leaf() {
            let var = r.scope.first().expect("leaf variable");
            let f = families[var].pop().expect("one family per occurrence");
            ids[i] = b.input(var, f)?;
            continue;
        }
        let mut parts = Vec::with_capacity(r.partitions.len());
        for p in &r.partitions {
            let children: Vec<usize> = p.iter().map(|&c| ids[c]).collect();
            parts.push(product_chain(&mut b, cfg.product_kind, &children)?);
        }
        let fan_in: usize = parts.iter().map(|&p| b.width(p)).sum();
        let rows = if i == g.root() {
            1
        } else if let Some(u) = uniform {
            cfg.units.min(u)
        } else if cfg.unitary {
            cfg.units.min(fan_in)
        } else {
            cfg.units
        };
        let w = init.sample(rows, fan_in, rng)?;
        ids[i] = b.sum(parts, w)?;
    }
    let root = ids[g.root()];
    if b.width(root) != 1 {
        return Err(CircuitError::Input("region graph root must be an inner region".into()));
    }
    b.finish(root)
}

/// Balanced binary product tree over `children`, left half first.
fn product_chain<T: Real>(b: &mut TensorBuilder<T>, kind: ProductKind, children: &[usize]) -> Result<usize> {
    match children.len() {
        0 => Err(CircuitError::Input("empty partition".into())),
        1 => Ok(children[0]),
        n => {
            let (l, r) = children.split_at(n.div_ceil(2));
            let a = product_chain(b, kind, l)?;
            let c = product_chain(b, kind, r)?;
            b.product(kind, a, c)
        }
    }
}

/// Binary tree tensor network over `d` variables with bond dimension `r`.
pub fn build_ttn_binary<T: Real>(d: usize, r: usize, family: FamilySpec, unitary: bool, seed: u64) -> Result<TensorizedCircuit<T>> {
    ArchitectureConfig {
        region_graph: RegionGraphSpec::Ttn { num_vars: d },
        units: r,
        input_units: None,
        product_kind: ProductKind::Kronecker,
        input_family: family,
        unitary,
        seed,
    }
    .build()
}

#[allow(clippy::too_many_arguments)]
pub fn build_quadtree<T: Real>(
    height: usize,
    width: usize,
    k: usize,
    input_units: Option<usize>,
    product: ProductKind,
    family: FamilySpec,
    unitary: bool,
    seed: u64,
) -> Result<TensorizedCircuit<T>> {
    ArchitectureConfig {
        region_graph: RegionGraphSpec::QuadTree { height, width },
        units: k,
        input_units,
        product_kind: product,
        input_family: family,
        unitary,
        seed,
    }
    .build()
}

/// Matrix-product-state chain `Σ A_1[i_1] A_2[i_1,i_2] ⋯ A_d[i_{d-1}]`.
///
/// `cores[0]` and `cores[d-1]` have width `r`, the others width `r²` with
/// component `a·r + b` holding `A_k[a, b]`. Every contraction step is a
/// Kronecker layer followed by a selection sum whose nonzero weights equal
/// `scale` (`1` for a plain chain, `1/√r` keeps semi-unitary cores unitary).
pub fn build_mps_chain<T: Real>(domains: Vec<VarDomain<T>>, cores: Vec<InputFamily<T>>, r: usize, scale: T) -> Result<TensorizedCircuit<T>> {
    let d = cores.len();
    if d < 2 || domains.len() != d {
        return Err(CircuitError::Input("MPS chain needs at least two variables and one core per variable".into()));
    }
    for (k, f) in cores.iter().enumerate() {
        let want = if k == 0 || k == d - 1 { r } else { r * r };
        if f.width() != want {
            return Err(CircuitError::Shape(format!("core {k} has width {}, expected {want}", f.width())));
        }
    }
    let s = creal(scale);
    let mut b = TensorBuilder::new(domains);
    let mut cores = cores.into_iter().enumerate();
    let (_, first) = cores.next().expect("d ≥ 2");
    let mut v = b.input(0, first)?;
    for (k, core) in cores {
        let l = b.input(k, core)?;
        let p = b.kronecker(v, l)?;
        if k < d - 1 {
            // p[(i, (a, c))], keep a = i and sum into c
            let w = Mat::from_fn(r, r * r * r, |c, col| {
                let (i, a, cc) = (col / (r * r), (col / r) % r, col % r);
                if a == i && cc == c { s } else { Default::default() }
            });
            v = b.sum(vec![p], w)?;
        } else {
            let w = Mat::from_fn(1, r * r, |_, col| if col / r == col % r { s } else { Default::default() });
            v = b.sum(vec![p], w)?;
        }
    }
    b.finish(v)
}

/// Random categorical MPS with `d` variables, bond dimension `r` and the
/// given input family (categorical only). With `unitary` the cores are
/// semi-unitary embeddings and the circuit has unit partition function.
pub fn random_mps<T: Real>(d: usize, family: &FamilySpec, r: usize, unitary: bool, seed: u64) -> Result<TensorizedCircuit<T>> {
    random_mps_with(d, family, r, unitary, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn random_mps_with<T: Real>(d: usize, family: &FamilySpec, r: usize, unitary: bool, rng: &mut ChaCha8Rng) -> Result<TensorizedCircuit<T>> {
    if d < 2 {
        return Err(CircuitError::Input("MPS chain needs at least two variables".into()));
    }
    let mut cores = Vec::with_capacity(d);
    for k in 0..d {
        let w = if k == 0 || k == d - 1 { r } else { r * r };
        cores.push(family.families(w, 1, unitary, rng)?.pop().expect("one family"));
    }
    let scale = if unitary { T::one() / T::of_usize(r).sqrt() } else { T::one() };
    build_mps_chain(vec![family.domain()?; d], cores, r, scale)
}

/// A circuit with the layer structure of `c` that evaluates to 1 everywhere.
/// Every layer has width 1.
pub fn constant_like<T: Real>(c: &TensorizedCircuit<T>) -> Result<TensorizedCircuit<T>> {
    let mut b = TensorBuilder::new(c.domains().to_vec());
    // constant value computed by each rebuilt layer
    let mut vals: Vec<T> = Vec::with_capacity(c.num_layers());
    for l in c.layers() {
        let (id, val) = match &l.kind {
            LayerKind::Input { var, family } => {
                let (f, v) = match family.natural_domain() {
                    VarDomain::Categorical { cardinality } => {
                        (InputFamily::categorical(Mat::from_fn(1, cardinality, |_, _| creal(T::one()))), T::one())
                    }
                    VarDomain::Interval { hi, .. } => {
                        (InputFamily::fourier_with_freqs(hi, vec![0], T::zero())?, T::one() / hi.sqrt())
                    }
                    VarDomain::RealLine => {
                        return Err(CircuitError::Capability("no constant function on the real line".into()))
                    }
                };
                (b.input(*var, f)?, v)
            }
            LayerKind::Sum { inputs, .. } => {
                let n = T::of_usize(inputs.len());
                let w = Mat::from_fn(1, inputs.len(), |_, j| creal(T::one() / (n * vals[inputs[j]])));
                (b.sum(inputs.clone(), w)?, T::one())
            }
            LayerKind::Hadamard { inputs: [x, y] } => (b.hadamard(*x, *y)?, vals[*x] * vals[*y]),
            LayerKind::Kronecker { inputs: [x, y], .. } => (b.kronecker(*x, *y)?, vals[*x] * vals[*y]),
        };
        debug_assert_eq!(id, vals.len());
        vals.push(val);
    }
    let out = b.len() - 1;
    if (vals[out] - T::one()).abs() > T::lit(1e-12) {
        return Err(CircuitError::Capability("output layer is not a sum layer".into()));
    }
    b.finish(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::C;

    fn digits(mut n: usize, base: usize, d: usize) -> Vec<f64> {
        (0..d)
            .map(|_| {
                let v = n % base;
                n /= base;
                v as f64
            })
            .collect()
    }

    #[test]
    fn ttn_shapes_for_four_binary_variables() {
        let c = build_ttn_binary::<f64>(4, 2, FamilySpec::Categorical { cardinality: 2 }, false, 1).unwrap();
        let mut shapes: Vec<(usize, usize)> = c
            .layers()
            .iter()
            .filter_map(|l| match &l.kind {
                LayerKind::Sum { weight, .. } => Some(weight.shape()),
                _ => None,
            })
            .collect();
        shapes.sort();
        assert_eq!(shapes, vec![(1, 4), (2, 4), (2, 4)]);
    }

    #[test]
    fn mps_matches_matrix_contraction() {
        let (d, v, r) = (4, 3, 2);
        let c = random_mps::<f64>(d, &FamilySpec::Categorical { cardinality: v }, r, false, 5).unwrap();
        let tables: Vec<Mat<f64>> = c
            .layers()
            .iter()
            .filter_map(|l| match &l.kind {
                LayerKind::Input { family: InputFamily::Categorical { table }, .. } => Some(table.clone()),
                _ => None,
            })
            .collect();
        for n in 0..v.pow(d as u32) {
            let x = digits(n, v, d);
            let xi: Vec<usize> = x.iter().map(|&t| t as usize).collect();
            let mut row: Vec<C<f64>> = (0..r).map(|i| tables[0][(i, xi[0])]).collect();
            for k in 1..d - 1 {
                row = (0..r).map(|b| (0..r).map(|a| row[a] * tables[k][(a * r + b, xi[k])]).sum()).collect();
            }
            let want: C<f64> = (0..r).map(|a| row[a] * tables[d - 1][(a, xi[d - 1])]).sum();
            assert!((c.evaluate(&x).unwrap() - want).norm() < 1e-12);
        }
    }

    #[test]
    fn unitary_mps_needs_room_in_the_domain() {
        assert!(random_mps::<f64>(3, &FamilySpec::Categorical { cardinality: 3 }, 2, true, 0).is_err());
        assert!(random_mps::<f64>(3, &FamilySpec::Categorical { cardinality: 4 }, 2, true, 0).is_ok());
    }

    #[test]
    fn constant_like_is_one() {
        let c = build_quadtree::<f64>(2, 3, 3, None, ProductKind::Kronecker, FamilySpec::Fourier { period: 2.0 }, false, 4)
            .unwrap();
        let one = constant_like(&c).unwrap();
        assert_eq!(one.num_layers(), c.num_layers());
        assert!((one.evaluate(&[0.3, 1.1, 0.0, 2.0, 1.5, 0.7]).unwrap() - creal(1.0)).norm() < 1e-12);
    }

    #[test]
    fn config_parses_kebab_keys() {
        let cfg: ArchitectureConfig = serde_json::from_str(
            r#"{"region-graph":{"kind":"quad-tree","height":2,"width":2},"K":2,
                "product-kind":"hadamard","input-family":{"kind":"categorical","cardinality":2},"seed":3}"#,
        )
        .unwrap();
        assert_eq!(cfg.units, 2);
        let c = cfg.build::<f64>().unwrap();
        assert_eq!(c.product_kind().unwrap(), Some(ProductKind::Hadamard));
    }
}
