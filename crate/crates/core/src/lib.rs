//! Force-polytope cant-angle selection for star-shaped tilting hexarotors.
//!
//! The crate covers the rigid-body model ([`platform`]), allocation matrices
//! ([`allocation`]), zero-moment force polytopes and their look-up table
//! ([`polytope`]), the online angle selector ([`selector`]), the SE(3)
//! pose controller ([`controller`]), a joint-optimisation baseline
//! ([`baseline`]) and the closed-loop simulation harness ([`sim`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod baseline;
pub mod controller;
pub mod error;
pub mod math;
pub mod platform;
pub mod polytope;
pub mod selector;
pub mod sim;

pub use error::{Error, Result};
