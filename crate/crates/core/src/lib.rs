//! Variable-exponent Hölder norms on lattice domains, Newtonian potentials,
//! finite-difference Dirichlet solves, extension and mollification operators,
//! and numerical checks of the inequalities that tie them together.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod config;
pub mod domain;
pub mod elliptic;
pub mod error;
pub mod exponent;
pub mod expr;
pub mod extend;
pub mod fd;
pub mod field;
pub mod fixtures;
pub mod linalg;
pub mod norms;
pub mod pairs;
pub mod potential;
pub mod verify;

pub use domain::{DistanceFields, DomainShape, Lattice, NodeClass, Point};
pub use error::{Error, Result};
pub use exponent::ExponentField;
pub use expr::{parse_expression, Expression};
pub use field::SampledField;
pub use norms::{Family, NormReport};
pub use verify::VerificationRecord;

/// Default node threshold for full pair scans.
pub const DEFAULT_PAIR_BUDGET: usize = 4096;
