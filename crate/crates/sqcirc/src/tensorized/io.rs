//! Versioned JSON serialization of tensorized circuits.
//!
//! Floats are written as the shortest decimal that parses back to the same
//! `f64`, so a round trip reproduces every parameter bit for bit.

use serde::{Deserialize, Serialize};

use super::{LayerKind, TensorBuilder, TensorizedCircuit};
use crate::domain::VarDomain;
use crate::error::{CircuitError, Result};
use crate::family::InputFamily;
use crate::linalg::Mat;
use crate::perm::Permutation;
use crate::real::{Real, C};

pub const FORMAT_VERSION: u32 = 1;
const FORMAT_NAME: &str = "sqcirc-tensorized";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitDoc {
    format: String,
    version: u32,
    variables: Vec<VariableDoc>,
    layers: Vec<LayerDoc>,
    output: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableDoc {
    index: usize,
    domain: VarDomain<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum LayerDoc {
    Input { id: usize, width: usize, var: usize, family: FamilyDoc },
    Sum { id: usize, width: usize, inputs: Vec<usize>, rows: usize, cols: usize, weights: Vec<[f64; 2]> },
    Hadamard { id: usize, width: usize, inputs: [usize; 2] },
    Kronecker {
        id: usize,
        width: usize,
        inputs: [usize; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        perm: Option<Vec<usize>>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum FamilyDoc {
    Categorical { rows: usize, cols: usize, table: Vec<[f64; 2]> },
    Fourier { period: f64, freqs: Vec<i64>, bias: f64 },
    Gaussian { mean: Vec<f64>, sd: Vec<f64> },
    Product { a: Box<FamilyDoc>, b: Box<FamilyDoc> },
}

fn enc<T: Real>(z: &C<T>) -> [f64; 2] {
    [z.re.as_f64(), z.im.as_f64()]
}

fn dec<T: Real>(z: &[f64; 2]) -> C<T> {
    C::new(T::lit(z[0]), T::lit(z[1]))
}

fn enc_mat<T: Real>(m: &Mat<T>) -> Vec<[f64; 2]> {
    m.data().iter().map(enc).collect()
}

fn dec_mat<T: Real>(rows: usize, cols: usize, v: &[[f64; 2]]) -> Result<Mat<T>> {
    if rows * cols != v.len() {
        return Err(CircuitError::Format(format!("{rows}×{cols} matrix with {} entries", v.len())));
    }
    Ok(Mat::from_vec(rows, cols, v.iter().map(dec).collect()))
}

fn enc_family<T: Real>(f: &InputFamily<T>) -> FamilyDoc {
    match f {
        InputFamily::Categorical { table } => {
            FamilyDoc::Categorical { rows: table.rows(), cols: table.cols(), table: enc_mat(table) }
        }
        InputFamily::Fourier { period, freqs, bias } => {
            FamilyDoc::Fourier { period: period.as_f64(), freqs: freqs.clone(), bias: bias.as_f64() }
        }
        InputFamily::Gaussian { mean, sd } => FamilyDoc::Gaussian {
            mean: mean.iter().map(|m| m.as_f64()).collect(),
            sd: sd.iter().map(|s| s.as_f64()).collect(),
        },
        InputFamily::Product(a, b) => FamilyDoc::Product { a: Box::new(enc_family(a)), b: Box::new(enc_family(b)) },
    }
}

fn dec_family<T: Real>(f: &FamilyDoc) -> Result<InputFamily<T>> {
    Ok(match f {
        FamilyDoc::Categorical { rows, cols, table } => InputFamily::categorical(dec_mat(*rows, *cols, table)?),
        FamilyDoc::Fourier { period, freqs, bias } => {
            InputFamily::fourier_with_freqs(T::lit(*period), freqs.clone(), T::lit(*bias))?
        }
        FamilyDoc::Gaussian { mean, sd } => InputFamily::gaussian(
            mean.iter().map(|&m| T::lit(m)).collect(),
            sd.iter().map(|&s| T::lit(s)).collect(),
        )?,
        FamilyDoc::Product { a, b } => InputFamily::product(dec_family(a)?, dec_family(b)?),
    })
}

fn enc_domain<T: Real>(d: &VarDomain<T>) -> VarDomain<f64> {
    match d {
        VarDomain::Categorical { cardinality } => VarDomain::Categorical { cardinality: *cardinality },
        VarDomain::Interval { lo, hi } => VarDomain::Interval { lo: lo.as_f64(), hi: hi.as_f64() },
        VarDomain::RealLine => VarDomain::RealLine,
    }
}

fn dec_domain<T: Real>(d: &VarDomain<f64>) -> Result<VarDomain<T>> {
    match d {
        VarDomain::Categorical { cardinality } => VarDomain::categorical(*cardinality),
        VarDomain::Interval { lo, hi } => VarDomain::interval(T::lit(*lo), T::lit(*hi)),
        VarDomain::RealLine => Ok(VarDomain::RealLine),
    }
}

pub fn to_json<T: Real>(c: &TensorizedCircuit<T>) -> Result<String> {
    let variables = c
        .domains()
        .iter()
        .enumerate()
        .map(|(index, d)| VariableDoc { index, domain: enc_domain(d) })
        .collect();
    let layers = c
        .layers()
        .iter()
        .enumerate()
        .map(|(id, l)| {
            let width = l.width;
            match &l.kind {
                LayerKind::Input { var, family } => LayerDoc::Input { id, width, var: *var, family: enc_family(family) },
                LayerKind::Sum { inputs, weight } => LayerDoc::Sum {
                    id,
                    width,
                    inputs: inputs.clone(),
                    rows: weight.rows(),
                    cols: weight.cols(),
                    weights: enc_mat(weight),
                },
                LayerKind::Hadamard { inputs } => LayerDoc::Hadamard { id, width, inputs: *inputs },
                LayerKind::Kronecker { inputs, perm } => LayerDoc::Kronecker {
                    id,
                    width,
                    inputs: *inputs,
                    perm: perm.as_ref().map(|p| p.sources().to_vec()),
                },
            }
        })
        .collect();
    let doc = CircuitDoc {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        variables,
        layers,
        output: c.output(),
    };
    Ok(serde_json::to_string(&doc)?)
}

pub fn from_json<T: Real>(s: &str) -> Result<TensorizedCircuit<T>> {
    let doc: CircuitDoc = serde_json::from_str(s)?;
    if doc.format != FORMAT_NAME {
        return Err(CircuitError::Format(format!("unknown format {:?}", doc.format)));
    }
    if doc.version != FORMAT_VERSION {
        return Err(CircuitError::Format(format!("unsupported format version {}", doc.version)));
    }
    let mut domains = Vec::with_capacity(doc.variables.len());
    for (i, v) in doc.variables.iter().enumerate() {
        if v.index != i {
            return Err(CircuitError::Format("variables must be listed in index order".into()));
        }
        domains.push(dec_domain(&v.domain)?);
    }
    let mut b = TensorBuilder::new(domains);
    for (expect, l) in doc.layers.iter().enumerate() {
        let (id, width, got) = match l {
            LayerDoc::Input { id, width, var, family } => (*id, *width, b.input(*var, dec_family(family)?)?),
            LayerDoc::Sum { id, width, inputs, rows, cols, weights } => {
                check_refs(inputs, expect)?;
                (*id, *width, b.sum(inputs.clone(), dec_mat(*rows, *cols, weights)?)?)
            }
            LayerDoc::Hadamard { id, width, inputs } => {
                check_refs(inputs, expect)?;
                (*id, *width, b.hadamard(inputs[0], inputs[1])?)
            }
            LayerDoc::Kronecker { id, width, inputs, perm } => {
                check_refs(inputs, expect)?;
                let p = perm.clone().map(Permutation::from_sources).transpose()?;
                (*id, *width, b.kronecker_permuted(inputs[0], inputs[1], p)?)
            }
        };
        if id != expect || got != expect {
            return Err(CircuitError::Format("layers must be listed in id order".into()));
        }
        if b.width(got) != width {
            return Err(CircuitError::Format(format!("layer {id} declares width {width}, computes {}", b.width(got))));
        }
    }
    if doc.output + 1 != doc.layers.len() {
        return Err(CircuitError::Format("output must be the last layer".into()));
    }
    b.finish(doc.output)
}

fn check_refs(inputs: &[usize], id: usize) -> Result<()> {
    if inputs.iter().any(|&j| j >= id) {
        return Err(CircuitError::Format(format!("layer {id} refers to a later layer")));
    }
    Ok(())
}
