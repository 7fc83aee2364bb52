#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod gate;
pub mod grid;
pub mod io;
pub mod potential;
pub mod spectra;

pub use error::{Error, Result};
