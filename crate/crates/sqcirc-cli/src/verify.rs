//! Oracle cross-checks run by the `verify` verb.

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sqcirc::suite::{
    decision_tree, determinism_check, multiply_check, normalization_sweep, oracle_triangle, ortho_dec_check,
    random_unitary_circuit, unitarize_check, Discrepancy, Leaves, UnitaryClass,
};
use sqcirc::tensorized::{ArchitectureConfig, FamilySpec, ProductKind, RegionGraphSpec};

/// Relative tolerance for marginals and partition functions.
pub const MARGINAL_TOL: f64 = 1e-9;
/// Relative tolerance for pointwise function values.
pub const POINTWISE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub seed: u64,
    pub max_vars: usize,
    pub normalization_circuits: usize,
    pub triangle_circuits: usize,
    pub queries: usize,
    pub scalar_circuits: usize,
    pub product_circuits: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 0,
            max_vars: 10,
            normalization_circuits: 40,
            triangle_circuits: 8,
            queries: 20,
            scalar_circuits: 6,
            product_circuits: 4,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub tolerance: f64,
    pub checks: usize,
    pub max_rel_err: f64,
    pub detail: String,
}

fn judged(name: &str, d: Discrepancy, tol: f64) -> CheckResult {
    CheckResult { name: name.into(), passed: d.max_rel_err <= tol && d.checks > 0, tolerance: tol, checks: d.checks, max_rel_err: d.max_rel_err, detail: d.worst }
}

fn flag(name: &str, passed: bool, checks: usize, detail: String) -> CheckResult {
    CheckResult { name: name.into(), passed, tolerance: 0.0, checks, max_rel_err: 0.0, detail }
}

fn nonunitary(rg: RegionGraphSpec, kind: ProductKind, v: usize, seed: u64) -> ArchitectureConfig {
    ArchitectureConfig {
        region_graph: rg,
        units: 2,
        input_units: None,
        product_kind: kind,
        input_family: FamilySpec::Categorical { cardinality: v },
        unitary: false,
        seed,
    }
}

pub fn run_verify(cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();

    let (norm, classes) = normalization_sweep(cfg.normalization_circuits, cfg.max_vars, rng.random())?;
    let mut r = judged("unitary normalization", norm, MARGINAL_TOL);
    r.detail = format!("{classes:?} {}", r.detail);
    out.push(r);

    let mut tri = Discrepancy::default();
    for i in 0..cfg.triangle_circuits {
        let class = UnitaryClass::ALL[i % 4];
        let k = [1, 2, 4][i % 3];
        if let Some(c) = random_unitary_circuit(class, k, 2, cfg.max_vars.min(12), &mut rng)? {
            tri.merge(oracle_triangle(&c, cfg.queries, class.is_structured(), &mut rng)?);
        }
    }
    out.push(judged("oracle triangle", tri, MARGINAL_TOL));

    let mut ortho = Discrepancy::default();
    for i in 0..cfg.scalar_circuits {
        let leaves = if i % 2 == 0 { Leaves::Indicators } else { Leaves::Orthonormal };
        let c = decision_tree(rng.random_range(2..=cfg.max_vars.clamp(2, 8)), 2, leaves, &mut rng)?;
        ortho.merge(ortho_dec_check(&c, 5, &mut rng)?);
    }
    out.push(judged("orthogonal marginals", ortho, MARGINAL_TOL));

    let (pass, fail) = determinism_check(cfg.scalar_circuits, 4, &mut rng)?;
    out.push(flag(
        "determinism implies orthogonality",
        pass == cfg.scalar_circuits && fail == cfg.scalar_circuits,
        2 * cfg.scalar_circuits,
        format!("{pass} deterministic passed, {fail} overlapping failed"),
    ));

    let mut mult = Discrepancy::default();
    let mut structure = true;
    let mut unit_pw = Discrepancy::default();
    let mut beta = Discrepancy::default();
    let mut u3 = true;
    for i in 0..cfg.product_circuits {
        let kind = if i % 2 == 0 { ProductKind::Hadamard } else { ProductKind::Kronecker };
        let c = nonunitary(RegionGraphSpec::QuadTree { height: 2, width: 3 }, kind, 3, rng.random()).build::<f64>()?;
        let m = multiply_check(&c, cfg.queries, &mut rng)?;
        structure &= m.smooth_and_decomposable && m.width_ratio <= 1.0 && m.layer_ratio <= 1.0;
        mult.merge(m.pointwise);
        let u = unitarize_check(&c, cfg.queries, &mut rng)?;
        unit_pw.merge(u.pointwise);
        beta.merge(u.beta);
        u3 &= u.u3;
    }
    out.push(judged("multiply pointwise", mult, POINTWISE_TOL));
    out.push(flag("multiply structure", structure, cfg.product_circuits, "smooth, decomposable, quadratic widths".into()));
    out.push(judged("unitarize pointwise", unit_pw, POINTWISE_TOL));
    out.push(judged("unitarize beta", beta, MARGINAL_TOL));
    out.push(flag("unitarize semi-unitary weights", u3, cfg.product_circuits, String::new()));
    Ok(out)
}
