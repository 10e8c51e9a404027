//! Periodic pseudospectral laboratory for the defocusing cubic NLS and the
//! dispersion-managed NLS on the two-dimensional torus.

pub mod analysis;
pub mod config;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod grid;
pub mod nonlinearity;
pub mod picard;
pub mod quadrature;
pub mod report_io;
pub mod spectral;
