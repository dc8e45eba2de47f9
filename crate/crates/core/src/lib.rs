//! Phase-field damage coupled to Kelvin-Voigt viscoelasticity: a
//! semi-implicit finite element solver with Moreau-Yosida regularized
//! irreversibility, executable checks of the scheme's analytical properties,
//! and a boundary-control optimizer with penalty continuation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// element kernels index several arrays in lockstep
#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod control;
pub mod error;
pub mod forcing;
pub mod grid;
pub mod io;
pub mod linsolve;
pub mod material;
pub mod par;
pub mod piecewise;
pub mod problem;
pub mod stepper;
pub mod verify;

pub use error::{Error, Result};
