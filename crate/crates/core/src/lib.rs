//! Next-best-view photography planning.
//!
//! Given a known target and a partially known obstacle field, this crate scores
//! candidate camera positions with a photo-quality metric (perspective
//! distortion, scale and expected new coverage), searches for the best one with
//! a particle swarm, and simulates complete capture missions on an occupancy
//! grid that is refined from simulated depth scans.
//!
//! The main entry points are [`mission::run_mission`] for end-to-end missions,
//! [`optimizer::optimize_viewpoint`] for a single viewpoint search and
//! [`oracle::heatmap_oracle`] for brute-force ground truth.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coverage;
pub mod error;
pub mod geometry;
pub mod metric;
pub mod mission;
pub mod optimizer;
pub mod oracle;
pub mod planner;
pub mod raycast;
pub mod scenario;
pub mod validate;
pub mod world;

pub use error::{Error, Result};

/// Points and directions. Planar (2D) quantities keep `z = 0`.
pub type Vec3 = nalgebra::Vector3<f64>;
