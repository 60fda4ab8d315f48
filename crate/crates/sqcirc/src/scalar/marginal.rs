//! Linear-time marginalization of squared orthogonal circuits.

use super::props::{check_decomposable, check_orthogonal, check_smooth, OrthoOptions};
use super::{ScalarCircuit, Unit};
use crate::domain::{Quadrature, VarDomain};
use crate::error::{CircuitError, Result};
use crate::real::Real;
use crate::varset::VarSet;

/// `∫ |c(y, z)|² dz` in one feed-forward pass, valid for smooth, decomposable
/// and Z-orthogonal circuits.
///
/// `y` is a complete assignment whose entries for variables in `z` are ignored.
/// When `verify` is given, Z-orthogonality is checked first and a violation is
/// reported as a property error. Continuous variables in `z` whose families
/// lack a closed-form Gram are integrated with `quad`.
pub fn mar_ortho_dec<T: Real>(
    c: &ScalarCircuit<T>,
    y: &[T],
    z: &VarSet,
    verify: Option<&OrthoOptions<T>>,
    quad: &Quadrature<T>,
) -> Result<T> {
    if !check_smooth(c) || !check_decomposable(c) {
        return Err(CircuitError::Precondition("Mar-Ortho-Dec needs a smooth and decomposable circuit".into()));
    }
    if let Some(opts) = verify {
        if !check_orthogonal(c, z, opts)? {
            return Err(CircuitError::Property("circuit is not Z-orthogonal for the requested Z".into()));
        }
    }
    if y.len() < c.num_vars() {
        return Err(CircuitError::Input("partial assignment is too short".into()));
    }
    let x: Vec<T> = (0..c.num_vars())
        .map(|v| if z.contains(v) { c.domains()[v].anchor() } else { y[v] })
        .collect();
    let vals = c.eval_units(&x)?;
    let mut r: Vec<T> = Vec::with_capacity(c.units().len());
    for (id, u) in c.units().iter().enumerate() {
        let v = if c.scope(id).is_disjoint(z) {
            vals[id].norm_sqr()
        } else {
            match u {
                Unit::Input { var, func } => squared_norm(c, *func, *var, quad)?,
                Unit::Sum { inputs, weights } => {
                    inputs.iter().zip(weights).map(|(i, w)| w.norm_sqr() * r[*i]).sum()
                }
                Unit::Product { inputs } => inputs.iter().map(|i| r[*i]).fold(T::one(), |a, b| a * b),
            }
        };
        r.push(v);
    }
    Ok(*r.last().expect("nonempty circuit"))
}

fn squared_norm<T: Real>(c: &ScalarCircuit<T>, func: usize, var: usize, quad: &Quadrature<T>) -> Result<T> {
    let f = c.functions()[func];
    let fam = &c.families()[f.family];
    match fam.gram(fam) {
        Ok(g) => Ok(g[(f.component, f.component)].re),
        Err(CircuitError::Capability(_)) => {
            let dom: &VarDomain<T> = &c.domains()[var];
            let rule = quad.rule(var, dom)?;
            let mut s = T::zero();
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                s += fam.eval_component(f.component, *x)?.norm_sqr() * *w;
            }
            Ok(s)
        }
        Err(e) => Err(e),
    }
}
