// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod cli;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod numgrad;
pub mod rng;
pub mod sscl;
pub mod synthetic;
pub mod transfer;

pub use error::{Error, Result};
