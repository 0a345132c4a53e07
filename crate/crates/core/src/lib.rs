//! Convex identification of incrementally stable implicit state-space models.
//!
//! Models take the implicit form `e(x⁺) = f(x, u)`, `y = g(x, u)` with `e`, `f`
//! and `g` linear in a coefficient vector over polynomial bases. Fitting
//! minimizes convex upper bounds on (linearized) simulation error subject to
//! contraction constraints, lowered to a semidefinite program that is solved by
//! the interior-point engine in [`sdp`].
//!
//! The crate is `no_std` and only needs `alloc`; IO, file formats and the
//! command line front end live in the companion `sysid` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod constraints;
pub mod data;
mod error;
pub mod fit;
pub mod layout;
pub mod linalg;
pub mod model;
pub mod objectives;
pub mod poly;
pub mod sdp;
pub mod simulate;

pub use error::{Error, Result};
pub use linalg::{Mat, SymMat};
pub use model::{BasisSpec, Degrees, ModelKind, ModelParameters};

