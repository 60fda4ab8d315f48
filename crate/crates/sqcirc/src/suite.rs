//! Randomized cross-checks between the fast algorithms and the oracles, shared
//! by the `verify` command and the test suites.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::domain::{Quadrature, VarDomain};
use crate::error::{CircuitError, Result};
use crate::family::InputFamily;
use crate::linalg::Mat;
use crate::oracle::{enum_marginal, enum_partition};
use crate::real::C;
use crate::scalar::{check_decomposable, check_orthogonal, check_smooth, default_probes, mar_ortho_dec, OrthoOptions};
use crate::scalar::{ScalarBuilder, ScalarCircuit};
use crate::squaring::{conjugate, marginal_via_square, multiply};
use crate::tensorized::{random_mps, ArchitectureConfig, FamilySpec, ProductKind, RegionGraphSpec, TensorizedCircuit};
use crate::unitary::{check_unitarity, mar_squared_unitary, unitarize, UnitarizeOptions};
use crate::varset::VarSet;

/// Worst relative disagreement over a series of comparisons.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Discrepancy {
    pub checks: usize,
    pub max_rel_err: f64,
    pub worst: String,
}

impl Discrepancy {
    /// Records `|got − want| / max(|want|, 1e-300)`.
    pub fn record(&mut self, got: f64, want: f64, label: impl FnOnce() -> String) {
        let err = (got - want).abs() / want.abs().max(1e-300);
        self.checks += 1;
        if err > self.max_rel_err || err.is_nan() {
            self.max_rel_err = if err.is_nan() { f64::INFINITY } else { err };
            self.worst = label();
        }
    }

    pub fn merge(&mut self, other: Discrepancy) {
        self.checks += other.checks;
        if other.max_rel_err > self.max_rel_err {
            self.max_rel_err = other.max_rel_err;
            self.worst = other.worst;
        }
    }
}

/// Uniform assignment plus a random marginalized set (each variable with probability ½).
pub fn random_query(domains: &[VarDomain<f64>], rng: &mut ChaCha8Rng) -> (Vec<f64>, VarSet) {
    let d = domains.len();
    let x = domains.iter().map(|dom| rng.random_range(0..dom.cardinality().unwrap_or(1)) as f64).collect();
    (x, VarSet::from_vars(d, (0..d).filter(|_| rng.random_bool(0.5))))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum UnitaryClass {
    Mps,
    Ttn,
    QuadTree,
    Multisplit,
}

impl UnitaryClass {
    pub const ALL: [UnitaryClass; 4] = [UnitaryClass::Mps, UnitaryClass::Ttn, UnitaryClass::QuadTree, UnitaryClass::Multisplit];

    /// Every class except multisplit yields structured-decomposable circuits.
    pub fn is_structured(self) -> bool {
        self != UnitaryClass::Multisplit
    }
}

/// A randomly shaped unitary circuit of the given class with at most
/// `max_vars` variables of cardinality `v`. `None` when the drawn shape cannot
/// hold orthonormal inputs over `v` values.
pub fn random_unitary_circuit(
    class: UnitaryClass,
    k: usize,
    v: usize,
    max_vars: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Option<TensorizedCircuit<f64>>> {
    let seed = rng.random();
    let kind = if rng.random_bool(0.5) { ProductKind::Kronecker } else { ProductKind::Hadamard };
    let family = FamilySpec::Categorical { cardinality: v };
    let max_vars = max_vars.max(2);
    let rg = match class {
        UnitaryClass::Mps => {
            let d = rng.random_range(2..=max_vars);
            let r = k.min(v.isqrt()).max(1);
            return random_mps(d, &family, r, true, seed).map(Some);
        }
        UnitaryClass::Ttn => RegionGraphSpec::Ttn { num_vars: rng.random_range(2..=max_vars) },
        UnitaryClass::QuadTree => {
            let h = rng.random_range(1..=max_vars.isqrt().max(2));
            let w = rng.random_range(1..=(max_vars / h).max(1)).max(if h == 1 { 2 } else { 1 });
            RegionGraphSpec::QuadTree { height: h, width: w }
        }
        UnitaryClass::Multisplit => {
            let (h, w) = *[(2, 2), (2, 3), (3, 2), (1, 4)].choose(rng).expect("nonempty");
            RegionGraphSpec::Multisplit { height: h, width: w, min_patch: 1 }
        }
    };
    let product_kind = if class == UnitaryClass::Ttn { ProductKind::Kronecker } else { kind };
    let cfg = ArchitectureConfig {
        region_graph: rg,
        units: k,
        input_units: None,
        product_kind,
        input_family: family,
        unitary: true,
        seed,
    };
    match cfg.build() {
        Ok(c) => Ok(Some(c)),
        Err(CircuitError::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `mar_squared_unitary(c, ∅, all)` against 1 over `count` random unitary
/// circuits cycling through every class and `K ∈ {1, 2, 4, 8}`.
pub fn normalization_sweep(count: usize, max_vars: usize, seed: u64) -> Result<(Discrepancy, BTreeMap<UnitaryClass, usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut disc = Discrepancy::default();
    let mut per_class = BTreeMap::new();
    let mut built = 0;
    let mut attempt = 0;
    while built < count {
        let class = UnitaryClass::ALL[attempt % 4];
        let k = [1, 2, 4, 8][(attempt / 4) % 4];
        let v = if rng.random_bool(0.5) { 2 } else { 4 };
        attempt += 1;
        if attempt > 20 * count {
            return Err(CircuitError::Infeasible("too few feasible unitary shapes".into()));
        }
        let Some(c) = random_unitary_circuit(class, k, v, max_vars, &mut rng)? else { continue };
        let z = mar_squared_unitary(&c, &vec![0.0; c.num_vars()], &VarSet::full(c.num_vars()), true)?;
        disc.record(z, 1.0, || format!("{class:?} K={k} v={v} d={}", c.num_vars()));
        *per_class.entry(class).or_insert(0) += 1;
        built += 1;
    }
    Ok((disc, per_class))
}

/// Compares the moment recursion, the materialized square (structured circuits
/// only) and enumeration on `queries` random marginal queries.
pub fn oracle_triangle(c: &TensorizedCircuit<f64>, queries: usize, structured: bool, rng: &mut ChaCha8Rng) -> Result<Discrepancy> {
    let mut disc = Discrepancy::default();
    for _ in 0..queries {
        let (x, z) = random_query(c.domains(), rng);
        let truth = enum_marginal(c, &x, &z)?.value;
        let fast = mar_squared_unitary(c, &x, &z, true)?;
        disc.record(fast, truth, || format!("moments at x={x:?} Z={:?}", z.to_vec()));
        if structured {
            let sq = marginal_via_square(c, &x, &z)?;
            disc.record(sq, truth, || format!("square at x={x:?} Z={:?}", z.to_vec()));
            disc.record(fast, sq, || format!("moments vs square at x={x:?} Z={:?}", z.to_vec()));
        }
    }
    Ok(disc)
}

/// Leaf functions of a [`decision_tree`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Leaves {
    /// Indicators, giving a deterministic circuit.
    Indicators,
    /// A random orthonormal basis: orthogonal but not deterministic.
    Orthonormal,
}

fn random_weights(n: usize, rng: &mut ChaCha8Rng, positive: bool) -> Vec<C<f64>> {
    (0..n)
        .map(|_| {
            if positive {
                C::new(rng.random_range(0.2..1.0), 0.0)
            } else {
                C::from_polar(rng.random_range(0.2..1.0), rng.random_range(0.0..std::f64::consts::TAU))
            }
        })
        .collect()
}

/// Splits on the variables in a random order; every branch is an indicator of
/// the split value times one of two shared subcircuits over the remaining
/// variables. `positive` replaces indicators by positive tables and complex
/// weights by positive ones, giving overlapping supports.
fn split_tree(d: usize, v: usize, leaves: Leaves, positive: bool, rng: &mut ChaCha8Rng) -> Result<ScalarCircuit<f64>> {
    let domains = vec![VarDomain::categorical(v)?; d];
    let mut b = ScalarBuilder::new(domains);
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(rng);
    let split_family = |b: &mut ScalarBuilder<f64>, rng: &mut ChaCha8Rng| {
        let table = if positive {
            Mat::from_fn(v, v, |_, _| C::new(rng.random_range(0.1..1.0), 0.0))
        } else {
            Mat::identity(v)
        };
        b.add_family(InputFamily::categorical(table))
    };
    let last = order[d - 1];
    let mut pool = Vec::new();
    for _ in 0..2 {
        let fam = match (positive, leaves) {
            (true, _) | (false, Leaves::Indicators) => split_family(&mut b, rng),
            (false, Leaves::Orthonormal) => {
                b.add_family(InputFamily::categorical(Mat::random_semi_unitary(v, v, rng)?))
            }
        };
        let ins = (0..v).map(|a| b.input_component(last, fam, a)).collect::<Result<Vec<_>>>()?;
        pool.push(b.sum(ins, random_weights(v, rng, positive))?);
    }
    for &s in order[..d - 1].iter().rev() {
        let mut next = Vec::new();
        for _ in 0..2 {
            let fam = split_family(&mut b, rng);
            let mut branches = Vec::with_capacity(v);
            for a in 0..v {
                let ind = b.input_component(s, fam, a)?;
                let sub = pool[rng.random_range(0..pool.len())];
                branches.push(b.product(vec![ind, sub])?);
            }
            next.push(b.sum(branches, random_weights(v, rng, positive))?);
        }
        pool = next;
    }
    b.finish(pool[0])
}

/// Random deterministic (or, with orthonormal leaves, orthogonal) circuit.
pub fn decision_tree(d: usize, v: usize, leaves: Leaves, rng: &mut ChaCha8Rng) -> Result<ScalarCircuit<f64>> {
    split_tree(d, v, leaves, false, rng)
}

/// Random monotone circuit whose sum inputs have overlapping supports.
pub fn positive_mixture(d: usize, v: usize, rng: &mut ChaCha8Rng) -> Result<ScalarCircuit<f64>> {
    split_tree(d, v, Leaves::Indicators, true, rng)
}

/// Options with the default probe set for `c`.
pub fn probe_options(c: &ScalarCircuit<f64>, seed: u64) -> OrthoOptions<f64> {
    OrthoOptions::new(c.num_vars()).with_probes(default_probes(c.domains(), 32, seed))
}

/// `mar_ortho_dec` against enumeration for every singleton `Z` and `random_z`
/// further random sets.
pub fn ortho_dec_check(c: &ScalarCircuit<f64>, random_z: usize, rng: &mut ChaCha8Rng) -> Result<Discrepancy> {
    let d = c.num_vars();
    let opts = probe_options(c, rng.random());
    let quad = Quadrature::new(d);
    let mut disc = Discrepancy::default();
    let mut sets: Vec<VarSet> = (0..d).map(|v| VarSet::singleton(d, v)).collect();
    for _ in 0..random_z {
        sets.push(random_query(c.domains(), rng).1);
    }
    for z in sets {
        let (y, _) = random_query(c.domains(), rng);
        let fast = mar_ortho_dec(c, &y, &z, Some(&opts), &quad)?;
        let truth = enum_marginal(c, &y, &z)?.value;
        disc.record(fast, truth, || format!("y={y:?} Z={:?}", z.to_vec()));
    }
    Ok(disc)
}

/// Outcome of [`multiply_check`].
#[derive(Clone, Debug, Serialize)]
pub struct MultiplyReport {
    pub pointwise: Discrepancy,
    pub smooth_and_decomposable: bool,
    /// Largest product width over the product of the operands' largest widths.
    pub width_ratio: f64,
    /// Product layers over the product of the operands' layer counts.
    pub layer_ratio: f64,
}

/// `multiply(c, conjugate(c))` against `|c(x)|²` at `points` random points.
pub fn multiply_check(c: &TensorizedCircuit<f64>, points: usize, rng: &mut ChaCha8Rng) -> Result<MultiplyReport> {
    let m = multiply(c, &conjugate(c)?)?;
    let mut pointwise = Discrepancy::default();
    for _ in 0..points {
        let (x, _) = random_query(c.domains(), rng);
        let got = m.evaluate(&x)?;
        let want = c.evaluate(&x)?.norm_sqr();
        pointwise.record(got.re, want, || format!("x={x:?}"));
        pointwise.record(want + got.im.abs(), want, || format!("imaginary part at x={x:?}"));
    }
    let view = m.to_scalar_view()?;
    Ok(MultiplyReport {
        pointwise,
        smooth_and_decomposable: check_smooth(&view) && check_decomposable(&view),
        width_ratio: m.max_width() as f64 / (c.max_width() * c.max_width()) as f64,
        layer_ratio: m.num_layers() as f64 / (c.num_layers() * c.num_layers()) as f64,
    })
}

/// Outcome of [`unitarize_check`].
#[derive(Clone, Debug, Serialize)]
pub struct UnitarizeReport {
    /// `c'(x)` against `β·c(x)`.
    pub pointwise: Discrepancy,
    /// `β` against `Z^{-1/2}` from enumeration.
    pub beta: Discrepancy,
    pub u3: bool,
}

pub fn unitarize_check(c: &TensorizedCircuit<f64>, points: usize, rng: &mut ChaCha8Rng) -> Result<UnitarizeReport> {
    let (u, beta) = unitarize(c, &UnitarizeOptions::default())?;
    let mut pointwise = Discrepancy::default();
    for _ in 0..points {
        let (x, _) = random_query(c.domains(), rng);
        let want = c.evaluate(&x)? * beta;
        let err = (u.evaluate(&x)? - want).norm();
        pointwise.record(want.norm() + err, want.norm(), || format!("x={x:?}"));
    }
    let z = enum_partition(c)?.value;
    let mut bd = Discrepancy::default();
    bd.record(beta, z.powf(-0.5), || format!("beta {beta}, Z {z}"));
    Ok(UnitarizeReport { pointwise, beta: bd, u3: check_unitarity(&u).u3 })
}

/// Whether deterministic circuits pass and overlapping monotone ones fail the
/// orthogonality check; returns `(deterministic passing, overlapping failing)`.
pub fn determinism_check(count: usize, d: usize, rng: &mut ChaCha8Rng) -> Result<(usize, usize)> {
    let mut pass = 0;
    let mut fail = 0;
    for _ in 0..count {
        let v = rng.random_range(2..=3);
        let det = decision_tree(d, v, Leaves::Indicators, rng)?;
        let z = VarSet::full(d);
        pass += check_orthogonal(&det, &z, &OrthoOptions::new(d))? as usize;
        let mono = positive_mixture(d, v, rng)?;
        fail += !check_orthogonal(&mono, &z, &OrthoOptions::new(d))? as usize;
    }
    Ok((pass, fail))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::check_deterministic;

    #[test]
    fn generators_have_the_advertised_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let det = decision_tree(4, 2, Leaves::Indicators, &mut rng).unwrap();
        assert!(check_deterministic(&det).unwrap());
        let orth = decision_tree(4, 2, Leaves::Orthonormal, &mut rng).unwrap();
        assert!(!check_deterministic(&orth).unwrap());
        assert!(check_orthogonal(&orth, &VarSet::full(4), &OrthoOptions::new(4)).unwrap());
        let mono = positive_mixture(4, 2, &mut rng).unwrap();
        assert!(!check_deterministic(&mono).unwrap());
    }

    #[test]
    fn small_sweeps_agree() {
        let (disc, classes) = normalization_sweep(16, 8, 2).unwrap();
        assert_eq!(classes.len(), 4, "{classes:?}");
        assert!(disc.max_rel_err < 1e-9, "{disc:?}");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = decision_tree(5, 2, Leaves::Orthonormal, &mut rng).unwrap();
        let disc = ortho_dec_check(&c, 5, &mut rng).unwrap();
        assert!(disc.max_rel_err < 1e-9, "{disc:?}");
        assert_eq!(determinism_check(5, 4, &mut rng).unwrap(), (5, 5));
    }
}
