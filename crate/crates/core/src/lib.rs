//! Kernel functions of finitely connected planar domains.
//!
//! Domains are bounded by finitely many analytic curves, sampled on
//! equispaced parameter grids. On top of that the crate computes the Szegő
//! and Garabedian kernels (Kerzman–Stein integral equation), Ahlfors maps,
//! harmonic measures, the Green's function and the Bergman family (double
//! layer Dirichlet solver), checks the classical identities linking them,
//! rebuilds the Bergman kernel from a finite set of one-variable generators,
//! and fits the polynomial relations those kernels satisfy.

pub mod algebra;
pub mod calculus;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod identities;
pub mod potential;
pub mod probes;
pub mod report;
pub mod suites;
pub mod szego;

pub use calculus::BoundaryField;
pub use error::{Error, Result};
pub use geometry::{Domain, DomainSpec, ParamCurve};
pub use num_complex::Complex64;
