//! Recovery of functions on the plane from circular means centred on a line.
//!
//! The crate covers the forward maps (spherical means and the wave trace on
//! the hyperplane), the two inversion routes (direct back-projection and the
//! zero-conversion/multiplier factorization) and numerical checks of the
//! isometry, range and decay properties.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod calculus;
pub mod cli;
pub mod error;
pub mod fft;
pub mod forward;
pub mod grid;
pub mod interp;
pub mod inversion;
pub mod io;
pub mod phantom;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{Axis, AxisName, GridField, Parity};
pub use phantom::{Phantom, PhantomKind};
