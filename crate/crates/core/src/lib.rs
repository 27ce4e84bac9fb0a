//! Weyl-Titchmarsh functions, principal solutions and Green's functions of scalar and matrix
//! Sturm-Liouville problems `-(PU')' + QU = zRU`, computed with truncation ladders.

// `!(a < b)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod canonical;
pub mod classify;
pub mod cli;
pub mod config;
pub mod error;
pub mod greens;
pub mod ladder;
pub mod linalg;
pub mod ode;
pub mod oracles;
pub mod problem;
pub mod quad;
pub mod quasi;
pub mod weyl;

pub use error::{Error, Result};
