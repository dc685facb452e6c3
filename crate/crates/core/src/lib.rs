//! Closure coefficients for relativistic moment systems with `M` even and `N` odd
//! multiplier ranks, exact over rationals and numeric over floats.

pub mod cli;
pub mod closure;
pub mod combinatorics;
pub mod equilibrium;
pub mod error;
pub mod f_family;
pub mod moments;
pub mod oracle;
pub mod scalar;
pub mod scalar_expr;
pub mod tensor_dense;

pub use closure::{ClosureSpec, ClosureTensorSet};
pub use error::{Error, Result};
pub use f_family::FFamilyElement;
pub use scalar::{Rational, Scalar};
pub use scalar_expr::{FunctionRegistry, ScalarExpr, Symbol};
pub use tensor_dense::{DenseSymTensor, FourVector};

pub type DenseSymTensorF64 = DenseSymTensor<f64>;
pub type DenseSymTensorF32 = DenseSymTensor<f32>;
pub type DenseSymTensorQ = DenseSymTensor<Rational>;
pub type FourVectorF64 = FourVector<f64>;
pub type FourVectorQ = FourVector<Rational>;
pub type ThermoStateF64 = equilibrium::ThermoState<f64>;
pub type ThermoStateQ = equilibrium::ThermoState<Rational>;
