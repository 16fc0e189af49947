#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod ambient;
pub mod ambient_curvature;
pub mod expr;
pub mod gjms;
pub mod jet;
pub mod metric;
pub mod riemann;
#[cfg(any(test, feature = "sample"))]
pub mod sample;
pub mod scalar;
pub mod selfdual3;
pub mod tensor;

pub use expr::{EvalError, Expr, ParseError};
pub use jet::{Jet, JetError, Mono, Vanishing, VarSet};
pub use metric::{MetricError, MetricJet, MetricSpec};
pub use scalar::Scalar;
pub use tensor::{Slot, SymTag, TensorJet};
