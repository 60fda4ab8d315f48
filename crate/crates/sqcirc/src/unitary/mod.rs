//! Unitarity conditions, linear-time squared marginals of unitary circuits
//! and conversion of circuits to unitary form.

mod moment;
mod unitarize;

pub use moment::{mar_squared_unitary, mar_squared_unitary_with, MarOptions, MarOutcome, Moment};
pub use unitarize::{interleave_identity_sums, unitarize, UnitarizeOptions, DEFAULT_WIDTH_CAP};

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::error::Result;
use crate::family::TAU_ORTH;
use crate::linalg::Mat;
use crate::real::Real;
use crate::tensorized::{LayerKind, TensorizedCircuit};
use crate::varset::VarSet;

/// Tolerance on `‖WW† − I‖_max` for semi-unitary sum weights.
pub const TAU_UNIT: f64 = 1e-9;

/// Why a condition failed.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    /// U1: an input layer whose functions are not orthonormal.
    NotOrthonormal { layer: usize, defect: f64 },
    /// U1: two input layers over one variable that are not orthogonal.
    OverlappingInputs { layers: (usize, usize), var: usize, defect: f64 },
    /// U1: no closed-form Gram for an input family.
    NoGram { layer: usize },
    /// U2: every variable of the sum layer is shared by some input pair.
    NoSeparatingVariable { layer: usize },
    /// U4: inputs `pair` of sum layer `layer` share input layers over `var`.
    SharedInputs { layer: usize, var: usize, pair: (usize, usize) },
    /// U3: more rows than columns.
    TooWide { layer: usize, rows: usize, cols: usize },
    /// U3: rows not orthonormal.
    NotSemiUnitary { layer: usize, defect: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnitarityReport {
    pub u1: bool,
    pub u2: bool,
    pub u3: bool,
    pub u4: bool,
    pub witnesses: Vec<Witness>,
}

impl UnitarityReport {
    /// U1–U3: the partition function is 1.
    pub fn is_unitary(&self) -> bool {
        self.u1 && self.u2 && self.u3
    }

    /// U1–U4: every squared marginal is computable in one pass.
    pub fn supports_marginals(&self) -> bool {
        self.u1 && self.u3 && self.u4
    }
}

/// Input layers reachable from each layer, as bitsets over input-layer ids.
pub(crate) fn reachable_inputs<T: Real>(c: &TensorizedCircuit<T>) -> (Vec<usize>, Vec<FixedBitSet>) {
    let inputs: Vec<usize> =
        (0..c.num_layers()).filter(|&i| matches!(c.layer(i).kind, LayerKind::Input { .. })).collect();
    let mut pos = vec![usize::MAX; c.num_layers()];
    for (k, &i) in inputs.iter().enumerate() {
        pos[i] = k;
    }
    let mut reach: Vec<FixedBitSet> = Vec::with_capacity(c.num_layers());
    for (i, l) in c.layers().iter().enumerate() {
        let mut b = FixedBitSet::with_capacity(inputs.len());
        if pos[i] != usize::MAX {
            b.insert(pos[i]);
        }
        for &j in l.kind.inputs() {
            b.union_with(&reach[j]);
        }
        reach.push(b);
    }
    (inputs, reach)
}

pub fn check_unitarity<T: Real>(c: &TensorizedCircuit<T>) -> UnitarityReport {
    let mut w = Vec::new();
    let tau = T::lit(TAU_ORTH);
    let mut u1 = true;
    let (inputs, reach) = reachable_inputs(c);
    let mut by_var: Vec<Vec<usize>> = vec![Vec::new(); c.num_vars()];
    for &i in &inputs {
        if let LayerKind::Input { var, family } = &c.layer(i).kind {
            by_var[*var].push(i);
            match family.orthonormality_defect() {
                Ok(d) if d < tau => {}
                Ok(d) => {
                    u1 = false;
                    w.push(Witness::NotOrthonormal { layer: i, defect: d.as_f64() });
                }
                Err(_) => {
                    u1 = false;
                    w.push(Witness::NoGram { layer: i });
                }
            }
        }
    }
    for (var, layers) in by_var.iter().enumerate() {
        for (a, &i) in layers.iter().enumerate() {
            for &j in &layers[a + 1..] {
                let (LayerKind::Input { family: f, .. }, LayerKind::Input { family: g, .. }) =
                    (&c.layer(i).kind, &c.layer(j).kind)
                else {
                    unreachable!()
                };
                match f.gram(g) {
                    Ok(m) if m.max_abs() < tau => {}
                    Ok(m) => {
                        u1 = false;
                        w.push(Witness::OverlappingInputs { layers: (i, j), var, defect: m.max_abs().as_f64() });
                    }
                    Err(_) => {
                        u1 = false;
                        w.push(Witness::NoGram { layer: j });
                    }
                }
            }
        }
    }

    let input_var: Vec<usize> = inputs
        .iter()
        .map(|&i| match &c.layer(i).kind {
            LayerKind::Input { var, .. } => *var,
            _ => unreachable!(),
        })
        .collect();
    let (mut u2, mut u3, mut u4) = (true, true, true);
    let tau_u = T::lit(TAU_UNIT);
    for (id, l) in c.layers().iter().enumerate() {
        let LayerKind::Sum { inputs: ins, weight } = &l.kind else { continue };
        if weight.rows() > weight.cols() {
            u3 = false;
            w.push(Witness::TooWide { layer: id, rows: weight.rows(), cols: weight.cols() });
        } else {
            let d = weight.row_orthonormality_defect();
            if !(d < tau_u) {
                u3 = false;
                w.push(Witness::NotSemiUnitary { layer: id, defect: d.as_f64() });
            }
        }
        if ins.len() < 2 {
            continue;
        }
        let mut shared_any = VarSet::empty(c.num_vars());
        for a in 0..ins.len() {
            for b in a + 1..ins.len() {
                let mut s = reach[ins[a]].clone();
                s.intersect_with(&reach[ins[b]]);
                let mut vars = VarSet::empty(c.num_vars());
                for k in s.ones() {
                    vars.insert(input_var[k]);
                }
                for v in vars.iter() {
                    if !shared_any.contains(v) {
                        u4 = false;
                        w.push(Witness::SharedInputs { layer: id, var: v, pair: (a, b) });
                    }
                }
                shared_any.union_with(&vars);
            }
        }
        if l.scope.is_subset(&shared_any) {
            u2 = false;
            w.push(Witness::NoSeparatingVariable { layer: id });
        }
    }
    UnitarityReport { u1, u2, u3, u4, witnesses: w }
}

/// Closest matrix with orthonormal rows in the polar sense: `(WW†)^{-1/2} W`.
pub fn project_semi_unitary<T: Real>(w: &Mat<T>) -> Result<Mat<T>> {
    if w.rows() > w.cols() {
        return Err(crate::error::CircuitError::Shape(format!(
            "a {}×{} matrix cannot have orthonormal rows",
            w.rows(),
            w.cols()
        )));
    }
    let g = w.matmul_adj(w);
    Ok(g.inv_sqrt_hermitian()?.matmul(w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::C;
    use crate::tensorized::{build_quadtree, FamilySpec, ProductKind, RegionGraph};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn projection_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = Mat::<f64>::random_semi_unitary(3, 5, &mut rng).unwrap();
        assert!(project_semi_unitary(&w).unwrap().max_abs_diff(&w) < 1e-14);
        assert!(project_semi_unitary(&w.scale_real(2.0)).unwrap().max_abs_diff(&w) < 1e-13);
        let g = Mat::<f64>::random_gaussian(4, 7, 1.0, &mut rng);
        assert!(project_semi_unitary(&g).unwrap().row_orthonormality_defect() < 1e-12);
        assert!(project_semi_unitary(&Mat::<f64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn wide_weight_fails_u3() {
        let c = build_quadtree::<f64>(1, 2, 3, Some(2), ProductKind::Kronecker, FamilySpec::Categorical { cardinality: 2 }, false, 0)
            .unwrap();
        // 3×4 inner sums are fine shape-wise; force a 3×2 weight
        let mut b = crate::tensorized::TensorBuilder::new(c.domains().to_vec());
        let x = b.input(0, crate::family::InputFamily::delta(2)).unwrap();
        let s = b.sum(vec![x], Mat::from_fn(3, 2, |r, k| C::new((r + k) as f64, 0.0))).unwrap();
        let y = b.input(1, crate::family::InputFamily::categorical(Mat::from_fn(3, 2, |r, k| C::new((r * k) as f64 + 1.0, 0.0)))).unwrap();
        let p = b.hadamard(s, y).unwrap();
        let out = b.sum(vec![p], Mat::from_fn(1, 3, |_, _| C::new(1.0, 0.0))).unwrap();
        let bad = b.finish(out).unwrap();
        let r = check_unitarity(&bad);
        assert!(!r.u3);
        assert!(r.witnesses.iter().any(|w| matches!(w, Witness::TooWide { rows: 3, cols: 2, .. })));
        assert!(!check_unitarity(&c).u3);
    }

    #[test]
    fn unitary_builders_pass() {
        let cfg = crate::tensorized::ArchitectureConfig {
            region_graph: crate::tensorized::RegionGraphSpec::Multisplit { height: 2, width: 2, min_patch: 1 },
            units: 2,
            input_units: None,
            product_kind: ProductKind::Kronecker,
            input_family: FamilySpec::Categorical { cardinality: 4 },
            unitary: true,
            seed: 3,
        };
        let c = cfg.build::<f64>().unwrap();
        let r = check_unitarity(&c);
        assert!(r.u1 && r.u2 && r.u3 && r.u4, "{r:?}");
        assert_eq!(RegionGraph::multisplit(2, 2, 1).unwrap().occurrences(), vec![2; 4]);
    }
}
