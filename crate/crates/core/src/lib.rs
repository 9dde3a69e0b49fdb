//! Linear-quadratic optimal control of quantum stochastic systems driven by
//! Fermion Brownian motion, on the finite Clifford model with `N` modes.

#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod clifford;
pub mod error;
pub mod linalg;
pub mod lq;
pub mod qsde;
pub mod riccati;
pub mod verify;

pub use clifford::{CliffordElement, CliffordSpace, SuperOperator};
pub use error::{QslqError, Result};
