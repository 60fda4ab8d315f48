//! Brute-force reference computations: enumeration, literal MPS sums and
//! trapezoid Gram matrices.

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{Quadrature, VarDomain};
use crate::error::{CircuitError, Result};
use crate::family::InputFamily;
use crate::linalg::Mat;
use crate::real::{czero, Real, C};
use crate::varset::VarSet;
use crate::Circuit;

pub const DEFAULT_ENUM_CAP: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OracleMethod {
    Enumeration,
    NaiveContraction,
    Quadrature { grid_size: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleResult<V> {
    pub value: V,
    pub method: OracleMethod,
    /// Assignments visited times circuit size, or terms summed.
    pub cost: u64,
}

#[derive(Clone, Debug)]
pub struct EnumOptions<'a, T> {
    pub cap: usize,
    /// Rules for continuous variables in `Z`.
    pub quadrature: Option<&'a Quadrature<T>>,
}

impl<T> Default for EnumOptions<'_, T> {
    fn default() -> Self {
        EnumOptions { cap: DEFAULT_ENUM_CAP, quadrature: None }
    }
}

/// Sum by recursive halving; the result depends only on the order of `xs`.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    match xs.len() {
        0 => T::zero(),
        1 => xs[0],
        n if n <= 8 => xs.iter().fold(T::zero(), |a, &b| a + b),
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

/// `Z = Σ_x |c(x)|²` by literal enumeration.
pub fn enum_partition<T: Real>(c: &dyn Circuit<T>) -> Result<OracleResult<T>> {
    let x: Vec<T> = c.domains().iter().map(|d| d.anchor()).collect();
    enum_marginal(c, &x, &VarSet::full(c.num_vars()))
}

/// `Σ_{z} |c(y, z)|²` with `y` read from `x`.
pub fn enum_marginal<T: Real>(c: &dyn Circuit<T>, x: &[T], z: &VarSet) -> Result<OracleResult<T>> {
    enum_marginal_with(c, x, z, &EnumOptions::default())
}

pub fn enum_marginal_with<T: Real>(c: &dyn Circuit<T>, x: &[T], z: &VarSet, opts: &EnumOptions<'_, T>) -> Result<OracleResult<T>> {
    let n = c.num_vars();
    if x.len() < n {
        return Err(CircuitError::Input(format!("assignment has {} values, circuit has {n} variables", x.len())));
    }
    let vars: Vec<usize> = z.iter().filter(|&v| v < n).collect();
    let mut axes: Vec<(Vec<T>, Vec<T>)> = Vec::with_capacity(vars.len());
    let mut grid = None;
    for &v in &vars {
        match &c.domains()[v] {
            VarDomain::Categorical { cardinality } => {
                axes.push(((0..*cardinality).map(T::of_usize).collect(), vec![T::one(); *cardinality]))
            }
            d => {
                let q = opts.quadrature.ok_or_else(|| {
                    CircuitError::Capability(format!("continuous variable {v} needs a quadrature rule"))
                })?;
                let rule = q.rule(v, d)?;
                grid = Some(grid.unwrap_or(0).max(rule.len()));
                axes.push((rule.nodes, rule.weights));
            }
        }
    }
    let mut total: usize = 1;
    for (nodes, _) in &axes {
        total = total
            .checked_mul(nodes.len())
            .filter(|&t| t <= opts.cap)
            .ok_or_else(|| CircuitError::Resource(format!("enumeration exceeds the cap of {} assignments", opts.cap)))?;
    }
    let terms: Vec<T> = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut a = x.to_vec();
            let mut w = T::one();
            // last variable varies fastest (lexicographic order)
            for (k, &v) in vars.iter().enumerate().rev() {
                let (nodes, weights) = &axes[k];
                let i = idx % nodes.len();
                idx /= nodes.len();
                a[v] = nodes[i];
                w *= weights[i];
            }
            for v in 0..n {
                if !z.contains(v) {
                    c.domains()[v].check(v, a[v])?;
                }
            }
            Ok(w * c.evaluate(&a)?.norm_sqr())
        })
        .collect::<Result<_>>()?;
    Ok(OracleResult {
        value: pairwise_sum(&terms),
        method: grid.map_or(OracleMethod::Enumeration, |g| OracleMethod::Quadrature { grid_size: g }),
        cost: (total as u64).saturating_mul(c.size() as u64),
    })
}

/// Literal MPS sum over all bond indices. Cores use the layout of
/// `build_mps_chain`: `cores[0]`, `cores[d-1]` are `r×v`, the others `r²×v`
/// with row `a·r + b`.
pub fn naive_mps<T: Real>(cores: &[Mat<T>], r: usize, x: &[usize]) -> Result<OracleResult<C<T>>> {
    let d = cores.len();
    if d < 2 || x.len() != d {
        return Err(CircuitError::Input("need at least two cores and one value per core".into()));
    }
    let bonds = d - 1;
    let count = r.checked_pow(bonds as u32).ok_or_else(|| CircuitError::Resource("too many bond assignments".into()))?;
    let mut idx = vec![0usize; bonds];
    let mut acc = czero::<T>();
    for _ in 0..count {
        let mut term = cores[0][(idx[0], x[0])];
        for k in 1..d - 1 {
            term *= cores[k][(idx[k - 1] * r + idx[k], x[k])];
        }
        term *= cores[d - 1][(idx[bonds - 1], x[d - 1])];
        acc += term;
        for i in (0..bonds).rev() {
            idx[i] += 1;
            if idx[i] < r {
                break;
            }
            idx[i] = 0;
        }
    }
    Ok(OracleResult { value: acc, method: OracleMethod::NaiveContraction, cost: (count * d) as u64 })
}

/// `G[i][j] = ∫ f_i conj(g_j)` by the composite trapezoid rule on `n` points.
pub fn quadrature_gram<T: Real>(f: &InputFamily<T>, g: &InputFamily<T>, domain: &VarDomain<T>, n: usize) -> Result<OracleResult<Mat<T>>> {
    let (lo, hi) = match domain {
        VarDomain::Interval { lo, hi } => (*lo, *hi),
        _ => return Err(CircuitError::Capability("trapezoid Gram needs a bounded interval".into())),
    };
    if n < 2 {
        return Err(CircuitError::Input("trapezoid rule needs at least two points".into()));
    }
    let h = (hi - lo) / T::of_usize(n - 1);
    let mut m = Mat::zeros(f.width(), g.width());
    for k in 0..n {
        let t = if k == n - 1 { hi } else { lo + h * T::of_usize(k) };
        let w = if k == 0 || k == n - 1 { h / T::lit(2.0) } else { h };
        let (a, b) = (f.eval(t)?, g.eval(t)?);
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                m[(i, j)] += (ai * bj.conj()).scale(w);
            }
        }
    }
    Ok(OracleResult { value: m, method: OracleMethod::Quadrature { grid_size: n }, cost: (n * f.width() * g.width()) as u64 })
}
