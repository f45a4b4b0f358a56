//! Operating-regime analysis for large wireless ad hoc networks.
//!
//! The crate generates random networks under a line-of-sight path-loss model
//! with i.i.d. uniform phases, evaluates the bisection cutset bound, classifies
//! `(alpha, beta)` operating points, simulates multihop, hierarchical
//! cooperation and hybrid cooperate-locally/multihop-globally schemes, extracts
//! node-free percolation cuts and fits empirical scaling exponents.
//!
//! Throughout, `n` is the number of source-destination pairs (the network has
//! `2n` nodes in a `2 sqrt(A) x sqrt(A)` rectangle) and `beta` is the exponent
//! of the nearest-neighbour SNR, `SNR_s = n^beta`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod cutset;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod network;
pub mod percolation;
pub mod regime;
pub mod rng;
pub mod scheme;
pub mod stats;

pub use constants::Constants;
pub use error::{Error, Result};
pub use network::{NetworkInstance, PhysicalParams, Point, Role};
