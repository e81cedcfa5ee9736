//! Numerical laboratory for the stochastic heat equation on a bounded domain
//! with a nonlinear Robin boundary condition driven by fractional noise.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::needless_range_loop)]

pub mod density;
pub mod domain;
pub mod error;
pub mod fbm;
pub mod heat_kernel;
pub mod malliavin;
pub mod model;
pub mod nonlinear_solver;
pub mod quadrature;
pub mod scalar;
pub mod special;
pub mod stoch_conv;
pub mod stats;
pub mod volterra;

pub use error::{Error, Result};
pub use scalar::Real;

/// Boundary geometry in double precision.
pub type Domain = domain::DomainSpec<f64>;
pub type Grid = domain::TimeGrid<f64>;
pub type Mesh = domain::SMesh<f64>;
pub type Point2 = domain::Point<f64>;
pub type Kernel = heat_kernel::RobinKernel<f64>;
pub type HurstIndex = fbm::Hurst<f64>;
pub type Gram = fbm::HGram<f64>;

pub use model::{Model, ModelSpec};
