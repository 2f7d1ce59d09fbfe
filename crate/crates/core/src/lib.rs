//! Pseudospectral Picard solver for the diffusive Kermack-McKendrick system
//! on a periodic domain, with a laboratory that measures the norm estimates,
//! contraction factors and Lipschitz bounds behind its well-posedness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod lab;
pub mod oracles;
pub mod picard;
pub mod runner;
pub mod spaces;
pub mod spectral;

pub use error::{Error, Result};
