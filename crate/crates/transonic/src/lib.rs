//! Smooth transonic flows in a cylinder under an external force: the
//! one-dimensional background, a Bessel–Galerkin solver for the linearized
//! mixed-type equation, and the nonlinear fixed point built on top of it.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod background;
pub mod banded;
pub mod basis;
pub mod config;
pub mod error;
pub mod fd;
pub mod field;
pub mod fixed_point;
pub mod io;
pub mod linear;
pub mod force;
pub mod norms;
pub mod quadrature;
pub mod special;
pub mod cli;
pub mod verify;

pub use error::{Error, Result};
