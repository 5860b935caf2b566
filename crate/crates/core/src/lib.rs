#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod error;
pub mod harness;
pub mod landscape;
pub mod objectives;
pub mod optimizer;
pub mod phase_retrieval;
pub mod sphere;
pub mod stats;
pub mod tolerances;

pub use error::{Error, Result};
