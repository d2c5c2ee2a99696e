//! Discrete mean curvature flow of closed and equivariant submanifolds in
//! arbitrary codimension, with monitors that check evolution equations,
//! preserved quantities and monotone quantities along the flow.

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror tensor notation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod acceptance;
pub mod config;
pub mod coords;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod interp;
pub mod linalg;
pub mod monitors;
pub mod run;
pub mod scenarios;
pub mod snapshot;
pub mod structure;
pub mod tensor_algebra;

pub use error::{McfError, Result};
pub use grid::{Field, ImmersionGrid, ParameterDomain, StencilOrder};
