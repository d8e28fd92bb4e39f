//! Checkable instances of the estimates, one suite per family of inequalities.

pub mod annulus;
pub mod ball;
pub mod extension;
pub mod interpolation;
pub mod potential;
pub mod record;
pub mod schauder;
pub mod suite;

pub use record::{Kind, Status, VerificationRecord};
