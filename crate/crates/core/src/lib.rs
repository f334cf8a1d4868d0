//! Potentials and capacity estimates for the kernel of the half-order heat
//! operator `(-Δ_x)^{1/2} + ∂_t` on unions of axis-parallel boxes.

pub mod error;
pub mod geometry;
pub mod capacity;
pub mod constants;
pub mod kernels;
mod lattice;
pub mod lp;
pub mod measures;
pub mod quadrature;
pub mod rect2d;
pub mod variational;
pub mod whitney;

pub use error::{Error, Result};
