//! Desk-scale simulator of decentralized satellite learning.
//!
//! The pipeline runs from orbital geometry to a trained spiking network:
//!
//! * [`geometry`]: Walker constellations and closed-form inter-satellite geometry.
//! * [`connectivity`]: link eligibility, link budget, stable inter-plane graph.
//! * [`treeopt`]: minimum-diameter aggregation trees and hop delays.
//! * [`aggregation`]: RelaySum, gossip and tree all-reduce, plus mixing-matrix analysis.
//! * [`snn`]: LIF spiking networks with hybrid-activation training and energy estimates.
//! * [`learning`]: data partitioning, local SGD, intra-plane ring all-reduce, the training loop.
//! * [`harness`]: run configuration, artifacts and the command implementations.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod aggregation;
pub mod connectivity;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod learning;
pub mod snn;
pub mod treeopt;

pub use error::{Error, Result};
