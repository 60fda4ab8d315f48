//! Variable domains and integration rules over them.

use serde::{Deserialize, Serialize};

use crate::error::{CircuitError, Result};
use crate::real::Real;

/// Domain of a single variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VarDomain<T> {
    /// Values `0..cardinality`, integrated by summation.
    Categorical { cardinality: usize },
    /// Closed interval, integrated with the Lebesgue measure.
    Interval { lo: T, hi: T },
    RealLine,
}

impl<T: Real> VarDomain<T> {
    pub fn categorical(cardinality: usize) -> Result<Self> {
        if cardinality == 0 {
            return Err(CircuitError::Input("categorical cardinality must be at least 1".into()));
        }
        Ok(VarDomain::Categorical { cardinality })
    }

    pub fn interval(lo: T, hi: T) -> Result<Self> {
        if !(lo < hi) {
            return Err(CircuitError::Input(format!("interval needs lo < hi, got [{lo}, {hi}]")));
        }
        Ok(VarDomain::Interval { lo, hi })
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, VarDomain::Categorical { .. })
    }

    pub fn cardinality(&self) -> Option<usize> {
        match self {
            VarDomain::Categorical { cardinality } => Some(*cardinality),
            _ => None,
        }
    }

    /// Categorical index of `x`, or `None` when `x` is not one of the values.
    pub fn index_of(&self, x: T) -> Option<usize> {
        match self {
            VarDomain::Categorical { cardinality } => {
                if x < T::zero() || x.fract() != T::zero() {
                    return None;
                }
                let i = x.to_usize()?;
                (i < *cardinality).then_some(i)
            }
            _ => None,
        }
    }

    pub fn contains(&self, x: T) -> bool {
        match self {
            VarDomain::Categorical { .. } => self.index_of(x).is_some(),
            VarDomain::Interval { lo, hi } => x >= *lo && x <= *hi,
            VarDomain::RealLine => x.is_finite(),
        }
    }

    pub fn check(&self, var: usize, x: T) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(CircuitError::Domain { var, value: x.as_f64() })
        }
    }

    /// A value inside the domain, used to fill variables whose value is irrelevant.
    pub fn anchor(&self) -> T {
        match self {
            VarDomain::Categorical { .. } | VarDomain::RealLine => T::zero(),
            VarDomain::Interval { lo, .. } => *lo,
        }
    }
}

/// A one-dimensional integration rule: nodes and weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> Rule<T> {
    /// Summation over every categorical value.
    pub fn counting(cardinality: usize) -> Self {
        Rule {
            nodes: (0..cardinality).map(T::of_usize).collect(),
            weights: vec![T::one(); cardinality],
        }
    }

    /// Composite trapezoid rule with `n ≥ 2` equispaced nodes on `[lo, hi]`.
    pub fn trapezoid(lo: T, hi: T, n: usize) -> Self {
        assert!(n >= 2, "trapezoid rule needs at least two nodes");
        let h = (hi - lo) / T::of_usize(n - 1);
        let nodes = (0..n).map(|i| lo + h * T::of_usize(i)).collect();
        let mut weights = vec![h; n];
        weights[0] = h / T::lit(2.0);
        weights[n - 1] = h / T::lit(2.0);
        Rule { nodes, weights }
    }

    /// Rectangle rule on `[lo, lo + period)`; exact for trigonometric
    /// polynomials of degree below `n`.
    pub fn periodic(lo: T, period: T, n: usize) -> Self {
        let h = period / T::of_usize(n);
        Rule {
            nodes: (0..n).map(|i| lo + h * T::of_usize(i)).collect(),
            weights: vec![h; n],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Per-variable integration rules. Categorical variables default to counting.
#[derive(Clone, Debug, Default)]
pub struct Quadrature<T> {
    rules: Vec<Option<Rule<T>>>,
}

impl<T: Real> Quadrature<T> {
    pub fn new(num_vars: usize) -> Self {
        Quadrature { rules: vec![None; num_vars] }
    }

    pub fn with_rule(mut self, var: usize, rule: Rule<T>) -> Self {
        if self.rules.len() <= var {
            self.rules.resize(var + 1, None);
        }
        self.rules[var] = Some(rule);
        self
    }

    /// Rule for `var`, falling back to counting for categorical domains.
    pub fn rule(&self, var: usize, domain: &VarDomain<T>) -> Result<Rule<T>> {
        if let Some(Some(r)) = self.rules.get(var) {
            return Ok(r.clone());
        }
        match domain {
            VarDomain::Categorical { cardinality } => Ok(Rule::counting(*cardinality)),
            _ => Err(CircuitError::Capability(format!(
                "variable {var} is continuous and no quadrature rule was supplied"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categorical_membership() {
        let d = VarDomain::<f64>::categorical(3).unwrap();
        assert_eq!(d.index_of(2.0), Some(2));
        assert_eq!(d.index_of(3.0), None);
        assert_eq!(d.index_of(0.5), None);
        assert!(VarDomain::<f64>::categorical(0).is_err());
        assert!(VarDomain::interval(1.0, 1.0).is_err());
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let r = Rule::trapezoid(0.0, 2.0, 5);
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * (3.0 * x + 1.0)).sum();
        assert!((s - 8.0).abs() < 1e-14);
    }
}
