//! Structural and functional property checks on scalar circuits.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ScalarCircuit, Unit};
use crate::domain::{Quadrature, Rule, VarDomain};
use crate::error::{CircuitError, Result};
use crate::family::TAU_ORTH;
use crate::real::{czero, Real, C};
use crate::varset::VarSet;

/// Values with a smaller modulus count as outside the support.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Enumeration budget for support and inner-product checks.
const ENUM_CAP: usize = 1 << 22;

pub fn check_smooth<T: Real>(c: &ScalarCircuit<T>) -> bool {
    c.units().iter().enumerate().all(|(id, u)| match u {
        Unit::Sum { inputs, .. } => inputs.iter().all(|i| c.scope(*i) == c.scope(id)),
        _ => true,
    })
}

pub fn check_decomposable<T: Real>(c: &ScalarCircuit<T>) -> bool {
    c.units().iter().all(|u| match u {
        Unit::Product { inputs } => {
            let mut seen = VarSet::empty(c.num_vars());
            for i in inputs {
                if seen.intersects(c.scope(*i)) {
                    return false;
                }
                seen.union_with(c.scope(*i));
            }
            true
        }
        _ => true,
    })
}

/// Scope partitions induced by the product units, keyed by product scope.
fn product_partitions<T: Real>(c: &ScalarCircuit<T>) -> HashMap<VarSet, BTreeSet<Vec<VarSet>>> {
    let mut out: HashMap<VarSet, BTreeSet<Vec<VarSet>>> = HashMap::new();
    for (id, u) in c.units().iter().enumerate() {
        if let Unit::Product { inputs } = u {
            let mut parts: Vec<VarSet> =
                inputs.iter().map(|i| c.scope(*i).clone()).filter(|s| !s.is_empty()).collect();
            if parts.len() < 2 {
                continue;
            }
            parts.sort();
            out.entry(c.scope(id).clone()).or_default().insert(parts);
        }
    }
    out
}

/// Products with equal scope split it identically, within and across circuits.
pub fn check_compatible<T: Real>(c1: &ScalarCircuit<T>, c2: &ScalarCircuit<T>) -> Result<bool> {
    for (name, c) in [("first", c1), ("second", c2)] {
        if !check_smooth(c) || !check_decomposable(c) {
            return Err(CircuitError::Precondition(format!(
                "{name} circuit must be smooth and decomposable"
            )));
        }
    }
    if c1.num_vars() != c2.num_vars() {
        return Ok(false);
    }
    let p1 = product_partitions(c1);
    let p2 = product_partitions(c2);
    for (scope, parts) in &p1 {
        if parts.len() > 1 {
            return Ok(false);
        }
        if let Some(other) = p2.get(scope) {
            if other != parts {
                return Ok(false);
            }
        }
    }
    Ok(p2.values().all(|p| p.len() == 1))
}

pub fn check_structured_decomposable<T: Real>(c: &ScalarCircuit<T>) -> Result<bool> {
    check_compatible(c, c)
}

/// Sum units grouped by scope, keeping only those with at least two inputs.
fn sums_by_scope<T: Real>(c: &ScalarCircuit<T>, z: Option<&VarSet>) -> BTreeMap<Vec<usize>, Vec<usize>> {
    let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (id, u) in c.units().iter().enumerate() {
        if let Unit::Sum { inputs, .. } = u {
            if inputs.len() < 2 {
                continue;
            }
            if let Some(z) = z {
                if c.scope(id).is_disjoint(z) {
                    continue;
                }
            }
            groups.entry(c.scope(id).to_vec()).or_default().push(id);
        }
    }
    groups
}

/// Visits every point of the product grid over `vars`, writing the values
/// into `x` and passing the product weight.
fn for_each_grid_point<T: Real>(
    vars: &[usize],
    rules: &[Rule<T>],
    x: &mut [T],
    mut f: impl FnMut(&[T], T) -> Result<()>,
) -> Result<()> {
    let total = rules.iter().try_fold(1usize, |acc, r| acc.checked_mul(r.len()));
    match total {
        Some(n) if n <= ENUM_CAP => {}
        _ => return Err(CircuitError::Resource("enumeration grid exceeds the configured cap".into())),
    }
    let mut idx = vec![0usize; vars.len()];
    loop {
        let mut w = T::one();
        for (k, &v) in vars.iter().enumerate() {
            x[v] = rules[k].nodes[idx[k]];
            w *= rules[k].weights[idx[k]];
        }
        f(x, w)?;
        let mut k = 0;
        loop {
            if k == vars.len() {
                return Ok(());
            }
            idx[k] += 1;
            if idx[k] < rules[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Sum inputs have pairwise disjoint supports (categorical domains only).
pub fn check_deterministic<T: Real>(c: &ScalarCircuit<T>) -> Result<bool> {
    if let Some(v) = c.domains().iter().position(|d| !d.is_categorical()) {
        return Err(CircuitError::Capability(format!(
            "determinism check needs categorical domains; variable {v} is continuous"
        )));
    }
    let tol = T::lit(SUPPORT_TOL);
    let mut x: Vec<T> = c.domains().iter().map(VarDomain::anchor).collect();
    for (vars, sums) in sums_by_scope(c, None) {
        let rules: Vec<Rule<T>> =
            vars.iter().map(|&v| Rule::counting(c.domains()[v].cardinality().expect("categorical"))).collect();
        let mut ok = true;
        for_each_grid_point(&vars, &rules, &mut x, |x, _| {
            let vals = c.eval_units(x)?;
            for &s in &sums {
                let live = c.unit(s).inputs().iter().filter(|i| vals[**i].norm() > tol).count();
                if live > 1 {
                    ok = false;
                }
            }
            Ok(())
        })?;
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Options for inner-product based checks.
#[derive(Clone, Debug)]
pub struct OrthoOptions<T> {
    pub quadrature: Quadrature<T>,
    /// Assignments fixing the variables outside `Z`.
    pub probes: Option<Vec<Vec<T>>>,
    pub tol: T,
}

impl<T: Real> OrthoOptions<T> {
    /// Counting measure on categorical variables, no probes, `τ = 1e-9`.
    pub fn new(num_vars: usize) -> Self {
        OrthoOptions { quadrature: Quadrature::new(num_vars), probes: None, tol: T::lit(TAU_ORTH) }
    }

    pub fn with_probes(mut self, probes: Vec<Vec<T>>) -> Self {
        self.probes = Some(probes);
        self
    }

    pub fn with_quadrature(mut self, q: Quadrature<T>) -> Self {
        self.quadrature = q;
        self
    }
}

/// Default probe set: the anchor assignment plus `n` seeded random ones.
pub fn default_probes<T: Real>(domains: &[VarDomain<T>], n: usize, seed: u64) -> Vec<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![domains.iter().map(VarDomain::anchor).collect::<Vec<T>>()];
    for _ in 0..n {
        out.push(
            domains
                .iter()
                .map(|d| match d {
                    VarDomain::Categorical { cardinality } => T::of_usize(rng.random_range(0..*cardinality)),
                    VarDomain::Interval { lo, hi } => *lo + (*hi - *lo) * T::lit(rng.random::<f64>()),
                    VarDomain::RealLine => T::lit(rng.sample::<f64, _>(StandardNormal)),
                })
                .collect(),
        );
    }
    out
}

/// Inputs of every sum with `scope ∩ Z ≠ ∅` are pairwise orthogonal when
/// integrating over `scope ∩ Z` (the remaining variables fixed at each probe).
pub fn check_orthogonal<T: Real>(c: &ScalarCircuit<T>, z: &VarSet, opts: &OrthoOptions<T>) -> Result<bool> {
    let anchor: Vec<T> = c.domains().iter().map(VarDomain::anchor).collect();
    let single = vec![anchor];
    for (vars, sums) in sums_by_scope(c, Some(z)) {
        let int_vars: Vec<usize> = vars.iter().copied().filter(|v| z.contains(*v)).collect();
        let fixed = int_vars.len() < vars.len();
        let probes = if fixed {
            opts.probes.as_ref().ok_or_else(|| {
                CircuitError::Input("Z-orthogonality over a mixed scope needs probe assignments".into())
            })?
        } else {
            &single
        };
        let rules = int_vars
            .iter()
            .map(|&v| opts.quadrature.rule(v, &c.domains()[v]))
            .collect::<Result<Vec<_>>>()?;
        for probe in probes {
            if probe.len() < c.num_vars() {
                return Err(CircuitError::Input("probe assignment is too short".into()));
            }
            let mut acc: Vec<Vec<C<T>>> = sums
                .iter()
                .map(|s| {
                    let n = c.unit(*s).inputs().len();
                    vec![czero(); n * n]
                })
                .collect();
            let mut x = probe.clone();
            for_each_grid_point(&int_vars, &rules, &mut x, |x, w| {
                let vals = c.eval_units(x)?;
                for (k, &s) in sums.iter().enumerate() {
                    let ins = c.unit(s).inputs();
                    let n = ins.len();
                    for a in 0..n {
                        for b in a + 1..n {
                            acc[k][a * n + b] += vals[ins[a]] * vals[ins[b]].conj() * w;
                        }
                    }
                }
                Ok(())
            })?;
            if acc.iter().flatten().any(|v| v.norm() >= opts.tol) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Per-unit map `X ↦ basis_X(unit)`.
fn basis_table<T: Real>(c: &ScalarCircuit<T>) -> Vec<BTreeMap<usize, BTreeSet<usize>>> {
    let mut table: Vec<BTreeMap<usize, BTreeSet<usize>>> = Vec::with_capacity(c.units().len());
    for u in c.units() {
        let mut m: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        match u {
            Unit::Input { var, func } => {
                m.entry(*var).or_default().insert(*func);
            }
            Unit::Sum { inputs, .. } | Unit::Product { inputs } => {
                for i in inputs {
                    for (v, fs) in &table[*i] {
                        m.entry(*v).or_default().extend(fs.iter().copied());
                    }
                }
            }
        }
        table.push(m);
    }
    table
}

/// Input functions over `var` in the sub-circuit rooted at `unit`.
pub fn basis_scope<T: Real>(c: &ScalarCircuit<T>, unit: usize, var: usize) -> BTreeSet<usize> {
    let mut seen = vec![false; c.units().len()];
    let mut stack = vec![unit];
    let mut out = BTreeSet::new();
    while let Some(u) = stack.pop() {
        if std::mem::replace(&mut seen[u], true) {
            continue;
        }
        match c.unit(u) {
            Unit::Input { var: v, func } if *v == var => {
                out.insert(*func);
            }
            other => stack.extend(other.inputs().iter().copied()),
        }
    }
    out
}

/// Every sum (with `scope ∩ Z ≠ ∅`) has a variable in `scope ∩ Z` over which
/// its inputs have pairwise disjoint basis scopes. `z = None` means all variables.
pub fn check_basis_decomposable<T: Real>(c: &ScalarCircuit<T>, z: Option<&VarSet>) -> bool {
    let table = basis_table(c);
    let empty = BTreeSet::new();
    for (id, u) in c.units().iter().enumerate() {
        let Unit::Sum { inputs, .. } = u else { continue };
        if inputs.len() < 2 {
            continue;
        }
        let cand = match z {
            Some(z) => c.scope(id).intersection(z),
            None => c.scope(id).clone(),
        };
        if cand.is_empty() {
            continue;
        }
        let witness = cand.iter().any(|x| {
            let sets: Vec<&BTreeSet<usize>> = inputs.iter().map(|i| table[*i].get(&x).unwrap_or(&empty)).collect();
            sets.iter().enumerate().all(|(a, sa)| sets[a + 1..].iter().all(|sb| sa.is_disjoint(sb)))
        });
        if !witness {
            return false;
        }
    }
    true
}

/// `∫ f(x)·g(x)* dx` for two functions of the circuit over variable `var`.
fn function_inner<T: Real>(
    c: &ScalarCircuit<T>,
    f: usize,
    g: usize,
    var: usize,
    quad: &Quadrature<T>,
) -> Result<C<T>> {
    let (fa, fb) = (c.functions()[f], c.functions()[g]);
    match c.families()[fa.family].gram(&c.families()[fb.family]) {
        Ok(m) => Ok(m[(fa.component, fb.component)]),
        Err(CircuitError::Capability(_)) => {
            let rule = quad.rule(var, &c.domains()[var])?;
            let mut s = czero();
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                s += c.eval_function(f, *x)? * c.eval_function(g, *x)?.conj() * *w;
            }
            Ok(s)
        }
        Err(e) => Err(e),
    }
}

/// Z-basis decomposability plus pairwise orthogonality of the distinct input
/// functions over every variable in `Z`.
pub fn check_regular_orthogonal<T: Real>(c: &ScalarCircuit<T>, z: &VarSet, opts: &OrthoOptions<T>) -> Result<bool> {
    if !check_basis_decomposable(c, Some(z)) {
        return Ok(false);
    }
    let mut per_var: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for u in c.units() {
        if let Unit::Input { var, func } = u {
            if z.contains(*var) {
                per_var.entry(*var).or_default().insert(*func);
            }
        }
    }
    for (var, funcs) in per_var {
        let funcs: Vec<usize> = funcs.into_iter().collect();
        for a in 0..funcs.len() {
            for b in a + 1..funcs.len() {
                if function_inner(c, funcs[a], funcs[b], var, &opts.quadrature)?.norm() >= opts.tol {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}
