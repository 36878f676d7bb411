//! Numerical building blocks: quadrature, root finding, differentiation and
//! quasi-random point sets.

pub mod diff;
pub mod quadrature;
pub mod roots;
pub mod sobol;

pub use diff::{derivative, derivative_on_half_line};
pub use quadrature::{integrate_gk, integrate_gk_bounded, integrate_simpson};
pub use roots::{solve_monotone, Monotone};
pub use sobol::Sobol;
