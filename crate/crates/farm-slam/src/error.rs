//! Geometry-level error types shared across modules.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    /// Slant range shorter than the vehicle/target depth gap; the detection
    /// is physically impossible and must be dropped.
    #[error("infeasible geometry: slant range {slant_range} m < depth gap {depth_gap} m")]
    InfeasibleGeometry { slant_range: f64, depth_gap: f64 },
    /// Landmark coincides with the vehicle position; the range/bearing
    /// Jacobian is singular there.
    #[error("degenerate range {range} m")]
    DegenerateRange { range: f64 },
}
