//! Discrete realisation of the solution spaces on the periodic box
//! `[0, 2*pi)^d`, `d = 2, 3`.
//!
//! The velocity space is spanned by real divergence-free Fourier modes,
//! eigenfunctions of the Stokes operator, enumerated by increasing
//! eigenvalue `|k|^2`. On top of the basis the module provides the norm
//! family (`H`, `V`, `V_m`, the Holly-Wiciak space `U` and the duals),
//! the spectral projections, pseudo-spectral grid transforms and the
//! local seminorms over nested subdomains.

mod basis;
mod field;
mod grid;
mod subdomain;

pub use basis::{holly_wiciak_weights, BasisTable, Mode, Phase, WaveVector};
pub use field::{Rep, SpectralField};
pub use grid::{gauss_legendre, Grid};
pub use subdomain::{local_seminorm, SubdomainFamily};
