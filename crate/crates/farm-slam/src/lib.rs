//! Graph SLAM for side-scan-sonar AUV surveys of rope-and-buoy line farms.
//!
//! An AUV surveying an algae farm drifts quickly on dead reckoning alone.
//! This crate keeps it localized by fusing odometry with side-scan-sonar
//! detections of the farm infrastructure: mooring buoys, and — the
//! interesting part — per-ping detections of the growth ropes, each modeled
//! as its own landmark tied to an anisotropic rope prior that is wide along
//! the rope and narrow across it. Those "sliding" constraints pin the vehicle
//! laterally against the ropes while odometry anchors it along them.
//!
//! What's here:
//!
//! - [`geometry`], [`motion`], [`sonar`]: planar pose algebra, dead
//!   reckoning, and the geometric sonar measurement model.
//! - [`graph`]: the sparse nonlinear least-squares back-end (batch and
//!   warm-started incremental solving, marginal covariances).
//! - [`frontend`]: detection-to-factor conversion under three strategies:
//!   the per-detection rope landmark method and two baselines (shared rope
//!   landmarks, buoys only).
//! - [`sim`]: a synthetic survey generator with ground truth.
//! - [`run`]: event replay driving the frontend and incremental solver.
//! - [`eval`]: mapping/trajectory metrics and method comparison tables.
//! - [`io`], [`config`], [`svg`]: dataset and result files, run
//!   configuration, and plot emission.
//!
//! See the `examples/` directory for runnable end-to-end walkthroughs, or
//! the `farm-slam` binary for the command-line pipeline
//! (`simulate` / `run` / `evaluate` / `bench`).

pub mod config;
pub mod error;
pub mod eval;
pub mod frontend;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod motion;
pub mod run;
pub mod sim;
pub mod sonar;
pub mod svg;

pub use error::GeometryError;
pub use geometry::{wrap_angle, Gaussian2, OdometryDelta, Point2, Pose2, RangeBearing};
pub use graph::{
    Factor, FactorGraph, FactorId, FactorKind, GraphError, GraphEstimate, SolveReport,
    SolverConfig, Value, VariableId, VariableKind,
};
