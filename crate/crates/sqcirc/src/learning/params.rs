//! Trainable parameters of a tensorized circuit, one slot per layer.

use crate::error::{CircuitError, Result};
use crate::family::InputFamily;
use crate::linalg::Mat;
use crate::real::{Real, C};
use crate::tensorized::{LayerKind, TensorizedCircuit};

/// Parameters of one layer. Gradients use the same shape.
#[derive(Clone, Debug, PartialEq)]
pub enum Param<T> {
    None,
    /// Sum weights or a categorical table.
    Complex(Mat<T>),
    /// Fourier bias, or Gaussian means followed by deviations.
    Real(Vec<T>),
}

impl<T: Real> Param<T> {
    pub fn zeros_like(&self) -> Self {
        match self {
            Param::None => Param::None,
            Param::Complex(m) => Param::Complex(Mat::zeros(m.rows(), m.cols())),
            Param::Real(v) => Param::Real(vec![T::zero(); v.len()]),
        }
    }

    pub fn as_mat(&self) -> Option<&Mat<T>> {
        match self {
            Param::Complex(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_mat_mut(&mut self) -> Option<&mut Mat<T>> {
        match self {
            Param::Complex(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_real_mut(&mut self) -> Option<&mut Vec<T>> {
        match self {
            Param::Real(v) => Some(v),
            _ => None,
        }
    }

    /// `self += s · other`.
    pub fn axpy(&mut self, s: T, other: &Param<T>) {
        match (self, other) {
            (Param::Complex(a), Param::Complex(b)) => {
                for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                    *x += y.scale(s);
                }
            }
            (Param::Real(a), Param::Real(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += s * *y;
                }
            }
            (Param::None, Param::None) => {}
            _ => panic!("parameter slot kinds differ"),
        }
    }

    fn dof(&self) -> usize {
        match self {
            Param::None => 0,
            Param::Complex(m) => 2 * m.rows() * m.cols(),
            Param::Real(v) => v.len(),
        }
    }
}

/// Current parameters of every layer.
pub fn params_of<T: Real>(c: &TensorizedCircuit<T>) -> Vec<Param<T>> {
    c.layers()
        .iter()
        .map(|l| match &l.kind {
            LayerKind::Sum { weight, .. } => Param::Complex(weight.clone()),
            LayerKind::Input { family, .. } => match family {
                InputFamily::Categorical { table } => Param::Complex(table.clone()),
                InputFamily::Fourier { bias, .. } => Param::Real(vec![*bias]),
                InputFamily::Gaussian { mean, sd } => Param::Real(mean.iter().chain(sd).copied().collect()),
                InputFamily::Product(..) => Param::None,
            },
            _ => Param::None,
        })
        .collect()
}

/// Smallest standard deviation kept when Gaussian parameters are written back.
pub const MIN_SD: f64 = 1e-3;

/// Writes parameters back into the circuit.
pub fn set_params<T: Real>(c: &mut TensorizedCircuit<T>, p: &[Param<T>]) -> Result<()> {
    if p.len() != c.num_layers() {
        return Err(CircuitError::Shape("one parameter slot per layer expected".into()));
    }
    for (id, slot) in p.iter().enumerate() {
        let fam = match (&c.layer(id).kind, slot) {
            (LayerKind::Sum { .. }, Param::Complex(w)) => {
                c.set_sum_weight(id, w.clone())?;
                continue;
            }
            (LayerKind::Input { family: InputFamily::Categorical { .. }, .. }, Param::Complex(t)) => {
                InputFamily::categorical(t.clone())
            }
            (LayerKind::Input { family: InputFamily::Fourier { period, freqs, .. }, .. }, Param::Real(b)) => {
                InputFamily::fourier_with_freqs(*period, freqs.clone(), b[0])?
            }
            (LayerKind::Input { family: InputFamily::Gaussian { mean, .. }, .. }, Param::Real(v)) => {
                let k = mean.len();
                let sd = v[k..].iter().map(|&s| s.max(T::lit(MIN_SD))).collect();
                InputFamily::gaussian(v[..k].to_vec(), sd)?
            }
            (_, Param::None) => continue,
            _ => return Err(CircuitError::Shape(format!("parameter slot {id} does not match its layer"))),
        };
        c.set_input_family(id, fam)?;
    }
    Ok(())
}

/// All real degrees of freedom, complex entries as `(re, im)` pairs.
pub fn flatten<T: Real>(p: &[Param<T>]) -> Vec<T> {
    let mut out = Vec::with_capacity(p.iter().map(|s| s.dof()).sum());
    for s in p {
        match s {
            Param::None => {}
            Param::Complex(m) => {
                for z in m.data() {
                    out.push(z.re);
                    out.push(z.im);
                }
            }
            Param::Real(v) => out.extend_from_slice(v),
        }
    }
    out
}

/// Inverse of [`flatten`] using `template` for the shapes.
pub fn unflatten<T: Real>(template: &[Param<T>], flat: &[T]) -> Vec<Param<T>> {
    let mut k = 0;
    template
        .iter()
        .map(|s| match s {
            Param::None => Param::None,
            Param::Complex(m) => {
                let data = (0..m.rows() * m.cols())
                    .map(|_| {
                        let z = C::new(flat[k], flat[k + 1]);
                        k += 2;
                        z
                    })
                    .collect();
                Param::Complex(Mat::from_vec(m.rows(), m.cols(), data))
            }
            Param::Real(v) => {
                let out = flat[k..k + v.len()].to_vec();
                k += v.len();
                Param::Real(out)
            }
        })
        .collect()
}

/// Layers whose stacked weights must keep orthonormal rows in unitary
/// training: each sum layer alone, and all categorical input layers over one
/// variable together.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StiefelGroup {
    pub layers: Vec<usize>,
}

pub fn stiefel_groups<T: Real>(c: &TensorizedCircuit<T>) -> Vec<StiefelGroup> {
    let mut groups = Vec::new();
    let mut per_var: Vec<Vec<usize>> = vec![Vec::new(); c.num_vars()];
    for (id, l) in c.layers().iter().enumerate() {
        match &l.kind {
            LayerKind::Sum { .. } => groups.push(StiefelGroup { layers: vec![id] }),
            LayerKind::Input { var, family: InputFamily::Categorical { .. } } => per_var[*var].push(id),
            _ => {}
        }
    }
    groups.extend(per_var.into_iter().filter(|v| !v.is_empty()).map(|layers| StiefelGroup { layers }));
    groups
}

/// Rows of the group's matrices stacked in layer order.
pub fn group_matrix<T: Real>(p: &[Param<T>], g: &StiefelGroup) -> Mat<T> {
    let mats: Vec<&Mat<T>> = g.layers.iter().map(|&l| p[l].as_mat().expect("complex slot")).collect();
    Mat::vstack(&mats)
}

/// Writes a stacked matrix back into the group's slots.
pub fn scatter_group<T: Real>(p: &mut [Param<T>], g: &StiefelGroup, m: &Mat<T>) {
    let mut row = 0;
    for &l in &g.layers {
        let slot = p[l].as_mat_mut().expect("complex slot");
        let r = slot.rows();
        *slot = m.row_block(row, r);
        row += r;
    }
}
