//! Pseudo-spectral Faedo-Galerkin toolkit for the incompressible
//! Navier-Stokes equations on the periodic box, driven by a compensated
//! Poisson random measure and a cylindrical Wiener process.
//!
//! The crate is organised around the objects a desk-scale verification
//! run needs:
//!
//! * [`spectral`] - divergence-free Fourier basis, the H / V / V_m / U
//!   norm family, projections, subdomain seminorms and grid transforms;
//! * [`operators`] - the Stokes form, the convection form `b`, the
//!   bilinear map `B` and its truncated Galerkin variant;
//! * [`noise`] - marked-point jump sampling, compensated integrals,
//!   Wiener increments and validators for the noise assumptions;
//! * [`galerkin`] - jump-adapted exponential Euler integration of the
//!   truncated dynamics, with exact weak-form bookkeeping;
//! * [`paths`] - cadlag path functionals: modulus, Skorokhod-type
//!   distances, Aldous tables and tightness reports;
//! * [`estimates`] - Monte Carlo moment estimates and the inequality
//!   audits backing them.

pub mod error;
pub mod estimates;
pub mod galerkin;
pub mod noise;
pub mod operators;
pub mod paths;
pub mod spectral;

pub use error::{Error, Result};
