//! Circuits over scalar units (input, weighted sum, product).

mod marginal;
mod poly;
mod props;

pub use marginal::mar_ortho_dec;
pub use poly::{expand_polynomial, Monomial, DEFAULT_MONOMIAL_CAP};
pub use props::{
    basis_scope, check_basis_decomposable, check_compatible, check_decomposable, check_deterministic,
    check_orthogonal, check_regular_orthogonal, check_smooth, check_structured_decomposable, default_probes,
    OrthoOptions, SUPPORT_TOL,
};

use std::collections::HashMap;

use crate::domain::VarDomain;
use crate::error::{CircuitError, Result};
use crate::family::InputFamily;
use crate::real::{cone, czero, Real, C};
use crate::varset::VarSet;
use crate::Circuit;

/// Weights with a smaller modulus are rejected: sum weights must be nonzero.
pub const MIN_WEIGHT_MODULUS: f64 = 1e-15;

/// Component `component` of family `family`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FunctionRef {
    pub family: usize,
    pub component: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Unit<T> {
    Input { var: usize, func: usize },
    Sum { inputs: Vec<usize>, weights: Vec<C<T>> },
    Product { inputs: Vec<usize> },
}

impl<T> Unit<T> {
    pub fn inputs(&self) -> &[usize] {
        match self {
            Unit::Input { .. } => &[],
            Unit::Sum { inputs, .. } | Unit::Product { inputs } => inputs,
        }
    }
}

/// Immutable scalar circuit; units are stored in topological order and the
/// output is the last unit.
#[derive(Clone, Debug)]
pub struct ScalarCircuit<T> {
    domains: Vec<VarDomain<T>>,
    families: Vec<InputFamily<T>>,
    functions: Vec<FunctionRef>,
    units: Vec<Unit<T>>,
    scopes: Vec<VarSet>,
}

impl<T: Real> ScalarCircuit<T> {
    pub fn domains(&self) -> &[VarDomain<T>] {
        &self.domains
    }

    pub fn num_vars(&self) -> usize {
        self.domains.len()
    }

    pub fn families(&self) -> &[InputFamily<T>] {
        &self.families
    }

    pub fn functions(&self) -> &[FunctionRef] {
        &self.functions
    }

    pub fn units(&self) -> &[Unit<T>] {
        &self.units
    }

    pub fn unit(&self, id: usize) -> &Unit<T> {
        &self.units[id]
    }

    pub fn scope(&self, id: usize) -> &VarSet {
        &self.scopes[id]
    }

    pub fn output(&self) -> usize {
        self.units.len() - 1
    }

    /// `|c|`: total number of edges.
    pub fn size(&self) -> usize {
        self.units.iter().map(|u| u.inputs().len()).sum()
    }

    /// Value of every unit at a complete assignment `x`.
    pub fn eval_units(&self, x: &[T]) -> Result<Vec<C<T>>> {
        if x.len() < self.num_vars() {
            return Err(CircuitError::Input(format!(
                "assignment has {} values for {} variables",
                x.len(),
                self.num_vars()
            )));
        }
        let mut vals = Vec::with_capacity(self.units.len());
        for unit in &self.units {
            let v = match unit {
                Unit::Input { var, func } => {
                    let xv = x[*var];
                    self.domains[*var].check(*var, xv)?;
                    let f = self.functions[*func];
                    self.families[f.family].eval_component(f.component, xv).map_err(|e| relabel(e, *var))?
                }
                Unit::Sum { inputs, weights } => {
                    inputs.iter().zip(weights).fold(czero(), |acc, (i, w)| acc + w * vals[*i])
                }
                Unit::Product { inputs } => inputs.iter().fold(cone(), |acc, i| acc * vals[*i]),
            };
            vals.push(v);
        }
        Ok(vals)
    }

    pub fn evaluate(&self, x: &[T]) -> Result<C<T>> {
        Ok(*self.eval_units(x)?.last().expect("nonempty circuit"))
    }

    /// Value of one function at `x`.
    pub fn eval_function(&self, func: usize, x: T) -> Result<C<T>> {
        let f = self.functions[func];
        self.families[f.family].eval_component(f.component, x)
    }
}

pub(crate) fn relabel(e: CircuitError, var: usize) -> CircuitError {
    match e {
        CircuitError::Domain { value, .. } => CircuitError::Domain { var, value },
        other => other,
    }
}

impl<T: Real> Circuit<T> for ScalarCircuit<T> {
    fn domains(&self) -> &[VarDomain<T>] {
        &self.domains
    }

    fn evaluate(&self, x: &[T]) -> Result<C<T>> {
        ScalarCircuit::evaluate(self, x)
    }

    fn size(&self) -> usize {
        ScalarCircuit::size(self)
    }
}

/// Incremental construction of a [`ScalarCircuit`].
#[derive(Clone, Debug)]
pub struct ScalarBuilder<T> {
    domains: Vec<VarDomain<T>>,
    families: Vec<InputFamily<T>>,
    functions: Vec<FunctionRef>,
    function_ids: HashMap<FunctionRef, usize>,
    units: Vec<Unit<T>>,
    scopes: Vec<VarSet>,
}

impl<T: Real> ScalarBuilder<T> {
    pub fn new(domains: Vec<VarDomain<T>>) -> Self {
        ScalarBuilder {
            domains,
            families: Vec::new(),
            functions: Vec::new(),
            function_ids: HashMap::new(),
            units: Vec::new(),
            scopes: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.domains.len()
    }

    pub fn add_family(&mut self, family: InputFamily<T>) -> usize {
        self.families.push(family);
        self.families.len() - 1
    }

    /// Dense id of `(family, component)`; repeated requests return the same id.
    pub fn function(&mut self, family: usize, component: usize) -> Result<usize> {
        let fam = self
            .families
            .get(family)
            .ok_or_else(|| CircuitError::Input(format!("unknown family {family}")))?;
        if component >= fam.width() {
            return Err(CircuitError::Input(format!(
                "component {component} out of range for family of width {}",
                fam.width()
            )));
        }
        let key = FunctionRef { family, component };
        if let Some(&id) = self.function_ids.get(&key) {
            return Ok(id);
        }
        self.functions.push(key);
        self.function_ids.insert(key, self.functions.len() - 1);
        Ok(self.functions.len() - 1)
    }

    pub fn input(&mut self, var: usize, func: usize) -> Result<usize> {
        let dom = self
            .domains
            .get(var)
            .ok_or_else(|| CircuitError::Input(format!("unknown variable {var}")))?;
        let f = *self
            .functions
            .get(func)
            .ok_or_else(|| CircuitError::Input(format!("unknown function {func}")))?;
        if !self.families[f.family].fits_domain(dom) {
            return Err(CircuitError::Input(format!(
                "{} family does not fit the domain of variable {var}",
                self.families[f.family].kind_name()
            )));
        }
        self.units.push(Unit::Input { var, func });
        self.scopes.push(VarSet::singleton(self.num_vars(), var));
        Ok(self.units.len() - 1)
    }

    /// Input unit computing component `component` of `family`.
    pub fn input_component(&mut self, var: usize, family: usize, component: usize) -> Result<usize> {
        let f = self.function(family, component)?;
        self.input(var, f)
    }

    pub fn sum(&mut self, inputs: Vec<usize>, weights: Vec<C<T>>) -> Result<usize> {
        if inputs.is_empty() {
            return Err(CircuitError::Input("sum unit needs at least one input".into()));
        }
        if inputs.len() != weights.len() {
            return Err(CircuitError::Shape("sum unit needs one weight per input".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.norm() >= T::lit(MIN_WEIGHT_MODULUS))) {
            return Err(CircuitError::Input(format!("sum weight {w} is (numerically) zero")));
        }
        let scope = self.union_scope(&inputs)?;
        self.units.push(Unit::Sum { inputs, weights });
        self.scopes.push(scope);
        Ok(self.units.len() - 1)
    }

    pub fn product(&mut self, inputs: Vec<usize>) -> Result<usize> {
        if inputs.is_empty() {
            return Err(CircuitError::Input("product unit needs at least one input".into()));
        }
        let scope = self.union_scope(&inputs)?;
        self.units.push(Unit::Product { inputs });
        self.scopes.push(scope);
        Ok(self.units.len() - 1)
    }

    fn union_scope(&self, inputs: &[usize]) -> Result<VarSet> {
        let mut s = VarSet::empty(self.num_vars());
        for &i in inputs {
            let sc = self
                .scopes
                .get(i)
                .ok_or_else(|| CircuitError::Input(format!("unit input {i} does not exist yet")))?;
            s.union_with(sc);
        }
        Ok(s)
    }

    /// Finishes with `output` as the output unit. Units not reachable from the
    /// output are dropped and the remaining ones renumbered in order.
    pub fn finish(self, output: usize) -> Result<ScalarCircuit<T>> {
        if output >= self.units.len() {
            return Err(CircuitError::Input(format!("output unit {output} does not exist")));
        }
        let mut live = vec![false; self.units.len()];
        live[output] = true;
        for id in (0..=output).rev() {
            if live[id] {
                for &i in self.units[id].inputs() {
                    live[i] = true;
                }
            }
        }
        let mut remap = vec![usize::MAX; self.units.len()];
        let mut units = Vec::new();
        let mut scopes = Vec::new();
        for id in 0..=output {
            if !live[id] {
                continue;
            }
            remap[id] = units.len();
            let u = match &self.units[id] {
                Unit::Input { var, func } => Unit::Input { var: *var, func: *func },
                Unit::Sum { inputs, weights } => {
                    Unit::Sum { inputs: inputs.iter().map(|i| remap[*i]).collect(), weights: weights.clone() }
                }
                Unit::Product { inputs } => Unit::Product { inputs: inputs.iter().map(|i| remap[*i]).collect() },
            };
            units.push(u);
            scopes.push(self.scopes[id].clone());
        }
        Ok(ScalarCircuit {
            domains: self.domains,
            families: self.families,
            functions: self.functions,
            units,
            scopes,
        })
    }
}
