//! Joint laws of identically distributed, minimally stable lifetimes.

pub mod archimedean;
pub mod combinatorics;
pub mod convert;
pub mod copulas;
pub mod curve;
pub mod error;
pub mod families;
pub mod loadsharing;
pub mod mchr;
pub mod model;
pub mod montecarlo;
pub mod numeric;
pub mod tabulated;

pub use curve::Curve;
pub use error::{Error, Result};
pub use families::{
    DiagonalFamily, DiagonalModel, Dimension, MarginalSurvival, OrderStatFamily, RateProfile,
};
pub use tabulated::{invert_monotone, DomainKind, Monotonicity, TabulatedFunction};
