//! Cauchy–Fantappié kernels, Bergman projections and L^p operator estimates
//! on strongly pseudoconvex model domains in Cⁿ.

pub mod domain;
pub mod error;
pub mod kernel;
pub mod levi;
pub mod linalg;
pub mod operators;
pub mod oracle;
pub mod quadrature;
pub mod scalar;
pub mod verification;

pub use error::{Error, Result};

pub type Domain = domain::DomainSpec<f64>;
pub type Domain32 = domain::DomainSpec<f32>;
pub type Context = levi::KernelContext<f64>;
pub type Context32 = levi::KernelContext<f32>;
