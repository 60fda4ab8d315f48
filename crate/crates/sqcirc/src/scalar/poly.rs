//! Expansion of a circuit into the sum of its induced sub-circuits.

use super::props::{check_decomposable, check_smooth};
use super::{ScalarCircuit, Unit};
use crate::error::{CircuitError, Result};
use crate::real::{cone, Real, C};

/// Default bound on the number of induced sub-circuits.
pub const DEFAULT_MONOMIAL_CAP: usize = 1 << 16;

/// One induced sub-circuit: coefficient and the function used for every variable.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial<T> {
    pub coef: C<T>,
    /// `(variable, function id)` sorted by variable.
    pub leaves: Vec<(usize, usize)>,
}

impl<T: Real> Monomial<T> {
    pub fn eval(&self, c: &ScalarCircuit<T>, x: &[T]) -> Result<C<T>> {
        let mut v = self.coef;
        for &(var, func) in &self.leaves {
            v *= c.eval_function(func, x[var])?;
        }
        Ok(v)
    }
}

/// `c(x) = Σ_ζ ω(ζ) Π_X f_{ζ,X}(x_X)`.
pub fn expand_polynomial<T: Real>(c: &ScalarCircuit<T>, cap: usize) -> Result<Vec<Monomial<T>>> {
    if !check_smooth(c) || !check_decomposable(c) {
        return Err(CircuitError::Precondition("polynomial expansion needs a smooth and decomposable circuit".into()));
    }
    let mut memo: Vec<Vec<Monomial<T>>> = Vec::with_capacity(c.units().len());
    for u in c.units() {
        let terms = match u {
            Unit::Input { var, func } => vec![Monomial { coef: cone(), leaves: vec![(*var, *func)] }],
            Unit::Sum { inputs, weights } => {
                let mut out = Vec::new();
                for (i, w) in inputs.iter().zip(weights) {
                    if out.len() + memo[*i].len() > cap {
                        return Err(CircuitError::Resource(format!("more than {cap} induced sub-circuits")));
                    }
                    out.extend(memo[*i].iter().map(|m| Monomial { coef: m.coef * w, leaves: m.leaves.clone() }));
                }
                out
            }
            Unit::Product { inputs } => {
                let mut out = vec![Monomial { coef: cone(), leaves: Vec::new() }];
                for i in inputs {
                    let child = &memo[*i];
                    if out.len().saturating_mul(child.len()) > cap {
                        return Err(CircuitError::Resource(format!("more than {cap} induced sub-circuits")));
                    }
                    let mut next = Vec::with_capacity(out.len() * child.len());
                    for a in &out {
                        for b in child {
                            let mut leaves = a.leaves.clone();
                            leaves.extend_from_slice(&b.leaves);
                            next.push(Monomial { coef: a.coef * b.coef, leaves });
                        }
                    }
                    out = next;
                }
                for m in &mut out {
                    m.leaves.sort_unstable();
                }
                out
            }
        };
        memo.push(terms);
    }
    Ok(memo.pop().expect("nonempty circuit"))
}

#[cfg(test)]
mod tests {
    use super::super::ScalarBuilder;
    use super::*;
    use crate::domain::VarDomain;
    use crate::family::InputFamily;
    use crate::real::creal;

    #[test]
    fn sum_of_two_inputs_gives_two_monomials() {
        let mut b = ScalarBuilder::<f64>::new(vec![VarDomain::categorical(3).unwrap()]);
        let f = b.add_family(InputFamily::delta(3));
        let a = b.input_component(0, f, 0).unwrap();
        let a2 = b.input_component(0, f, 2).unwrap();
        let s = b.sum(vec![a, a2], vec![creal(0.5), C::new(0.0, 2.0)]).unwrap();
        let c = b.finish(s).unwrap();
        let p = expand_polynomial(&c, 10).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].coef, creal(0.5));
        assert_eq!(p[1].coef, C::new(0.0, 2.0));
        assert!(expand_polynomial(&c, 1).is_err());
    }
}
