//! Complex-valued squared probabilistic circuits.
//!
//! A circuit `c` defines the density `p(x) = |c(x)|² / Z`. The crate covers
//! scalar and tensorized circuit representations, structural property checks,
//! exact squaring, linear-time marginalization of orthogonal and unitary
//! circuits, conversion to unitary form, and maximum-likelihood training on
//! the semi-unitary manifold.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below fix the scalar to `f64`.

pub mod domain;
pub mod error;
pub mod family;
pub mod learning;
pub mod linalg;
pub mod oracle;
pub mod perm;
pub mod real;
pub mod scalar;
pub mod squaring;
pub mod suite;
pub mod tensorized;
pub mod unitary;
pub mod varset;

pub use domain::{Quadrature, Rule, VarDomain};
pub use error::{CircuitError, Result};
pub use family::InputFamily;
pub use linalg::Mat;
pub use real::{Real, C};
pub use perm::{Permutation, PermutationSpec};
pub use scalar::{ScalarBuilder, ScalarCircuit};
pub use tensorized::{ArchitectureConfig, Layer, LayerKind, ProductKind, TensorBuilder, TensorizedCircuit};
pub use varset::VarSet;

/// Anything that evaluates to a complex number at a complete assignment.
pub trait Circuit<T: Real>: Sync {
    fn domains(&self) -> &[VarDomain<T>];

    fn num_vars(&self) -> usize {
        self.domains().len()
    }

    fn evaluate(&self, x: &[T]) -> Result<C<T>>;

    /// Edge count of the scalar-unit view.
    fn size(&self) -> usize;
}

pub type C64 = C<f64>;
pub type Mat64 = Mat<f64>;
pub type ScalarCircuit64 = ScalarCircuit<f64>;
pub type InputFamily64 = InputFamily<f64>;
pub type TensorizedCircuit64 = TensorizedCircuit<f64>;
pub type TensorizedCircuit32 = TensorizedCircuit<f32>;
