//! Dead-reckoning propagation of the vehicle state.

use crate::geometry::{OdometryDelta, Pose2};

/// A timestamped dead-reckoning state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrState {
    pub pose: Pose2,
    pub t: f64,
}

/// Propagate a pose through one body-frame odometry increment.
pub fn propagate(prev: &Pose2, u: &OdometryDelta) -> Pose2 {
    prev.compose(&u.as_pose())
}

/// Integrate a delta sequence from an initial pose. Returns `deltas.len() + 1`
/// poses, starting with `initial`.
pub fn dr_trajectory(initial: &Pose2, deltas: &[OdometryDelta]) -> Vec<Pose2> {
    let mut out = Vec::with_capacity(deltas.len() + 1);
    out.push(*initial);
    let mut cur = *initial;
    for u in deltas {
        cur = propagate(&cur, u);
        out.push(cur);
    }
    out
}
