//! Numerics for front propagation in the one-dimensional fractional
//! reaction-diffusion equation `u_t + (-Δ)^s u = f(u)`.
//!
//! Modules are layered bottom-up: [`grid`] holds sampled fields with tail
//! models, [`fraclap`] discretizes the fractional Laplacian, [`heatkernel`]
//! evaluates the stable-law kernel, [`solver`] advances the semilinear
//! problem, [`frontmetrics`] extracts level sets and growth exponents, and
//! [`analytic`] builds and certifies explicit super- and subsolutions.

pub mod analytic;
pub mod error;
pub mod fraclap;
pub mod frontmetrics;
pub mod grid;
pub mod heatkernel;
pub mod nonlin;
pub mod quad;
pub mod solver;

pub use error::{Error, Result};
