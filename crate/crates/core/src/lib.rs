//! Direct solver for nonlocal operators discretized by compressed wavelet
//! Galerkin matrices.
//!
//! The pipeline builds a dyadic cell tree ([`meshgeom`]), an orthonormal
//! multiwavelet basis on it ([`wavelet`]), assembles the a-priori compressed
//! Galerkin matrix of a kernel ([`kernels`], [`compress`]), reorders it by
//! nested dissection ([`ordering`]) and factorizes it ([`factor`]). The
//! [`apps`] module drives a fractional heat equation and a Gaussian random
//! field sampler on top of the factorization.

pub mod error;
pub mod meshgeom;
pub mod wavelet;
pub mod kernels;
pub mod quadrature;
pub mod sparse;
pub mod mtx;
pub mod compress;
pub mod ordering;
pub mod factor;
pub mod apps;
pub mod config;
pub mod pipeline;

pub use error::{Error, Result};
