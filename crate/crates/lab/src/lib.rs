//! Experiments on a (1,λ)-ES with cumulative step-size adaptation on a
//! linear function with a linear constraint: figure tables, boundary
//! searches and a self-check suite.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod grid;
pub mod table;
pub mod verify;

pub use error::{CliError, Result};
