//! Third medium contact finite elements and end-compliance topology optimization.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod config;
pub mod design;
pub mod element;
pub mod error;
pub mod export;
pub mod material;
pub mod mesh;
pub mod optimizer;
pub mod run;
pub mod scenario;
pub mod solver;
pub mod sparse;
