//! Geometric side-scan-sonar measurement model.
//!
//! A side scan sonar reports the slant range to an acoustic return on the
//! port or starboard channel. With vehicle depth measured directly and the
//! target depth known a priori, the slant range projects onto the horizontal
//! plane, and the bearing is fixed at ±π/2 because the sonar only sees
//! broadside. This module implements that projection, the conversion of raw
//! detections into range/bearing constraints, measurement prediction, and
//! the inverse used to initialize new landmarks.

use crate::error::GeometryError;
use crate::geometry::{wrap_angle, Point2, Pose2, RangeBearing};
use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Sonar channel. Port looks to +y in the body frame, starboard to -y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "port")]
    Port,
    #[serde(rename = "stbd")]
    Starboard,
}

impl Channel {
    /// Bearing of a broadside return on this channel: +π/2 port, -π/2 starboard.
    pub fn bearing(&self) -> f64 {
        match self {
            Channel::Port => FRAC_PI_2,
            Channel::Starboard => -FRAC_PI_2,
        }
    }
}

/// What the detector believes the return came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetClass {
    #[serde(rename = "buoy")]
    Buoy,
    #[serde(rename = "rope")]
    Rope,
}

/// One per-ping sonar detection, as produced by an image-space detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    /// Timestamp, seconds.
    pub t: f64,
    pub channel: Channel,
    pub klass: TargetClass,
    /// Slant (3D) range to the target, meters, > 0.
    pub slant_range: f64,
    /// Vehicle depth at ping time, meters, >= 0.
    pub vehicle_depth: f64,
}

/// A-priori depths of the two target classes, meters below the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetDepthTable {
    pub buoy_depth: f64,
    pub rope_depth: f64,
}

impl Default for TargetDepthTable {
    fn default() -> Self {
        // Buoys float at the surface; ropes moor at ~1.5 m.
        Self {
            buoy_depth: 0.0,
            rope_depth: 1.5,
        }
    }
}

impl TargetDepthTable {
    pub fn depth_of(&self, klass: TargetClass) -> f64 {
        match klass {
            TargetClass::Buoy => self.buoy_depth,
            TargetClass::Rope => self.rope_depth,
        }
    }
}

/// Project a slant range onto the horizontal plane given the vehicle/target
/// depth offset, assuming a flat bottom:
/// `d_2d = sqrt(d_3d² - |z_vehicle - z_target|²)`.
///
/// Fails with [`GeometryError::InfeasibleGeometry`] when the slant range is
/// shorter than the depth gap; such detections are physically impossible and
/// must be dropped by the caller.
pub fn project_slant_to_ground(
    slant_range: f64,
    vehicle_depth: f64,
    target_depth: f64,
) -> Result<f64, GeometryError> {
    let dz = (vehicle_depth - target_depth).abs();
    if slant_range <= 0.0 || !slant_range.is_finite() {
        return Err(GeometryError::InfeasibleGeometry {
            slant_range,
            depth_gap: dz,
        });
    }
    if slant_range < dz {
        return Err(GeometryError::InfeasibleGeometry {
            slant_range,
            depth_gap: dz,
        });
    }
    Ok((slant_range * slant_range - dz * dz).sqrt())
}

/// Convert a raw detection into a range/bearing constraint: the ground-plane
/// range from the slant projection, and a bearing of ±π/2 from the channel.
pub fn detection_to_measurement(
    det: &Detection,
    depths: &TargetDepthTable,
    noise: Matrix2<f64>,
) -> Result<RangeBearing, GeometryError> {
    let range = project_slant_to_ground(det.slant_range, det.vehicle_depth, depths.depth_of(det.klass))?;
    Ok(RangeBearing::new(range, det.channel.bearing(), noise))
}

/// Predicted (range, bearing) of a landmark from a pose.
///
/// Fails with [`GeometryError::DegenerateRange`] when the landmark coincides
/// with the vehicle position; the measurement Jacobian is singular there and
/// the factor must be rejected.
pub fn predict_range_bearing(pose: &Pose2, landmark: &Point2) -> Result<(f64, f64), GeometryError> {
    let dx = landmark.x - pose.x;
    let dy = landmark.y - pose.y;
    let range = dx.hypot(dy);
    if range < 1e-9 {
        return Err(GeometryError::DegenerateRange { range });
    }
    Ok((range, wrap_angle(dy.atan2(dx) - pose.theta)))
}

/// Place a landmark in the world from a pose and a range/bearing measurement.
/// Exact inverse of [`predict_range_bearing`].
pub fn landmark_from_measurement(pose: &Pose2, meas: &RangeBearing) -> Point2 {
    let heading = pose.theta + meas.bearing;
    Point2::new(
        pose.x + meas.range * heading.cos(),
        pose.y + meas.range * heading.sin(),
    )
}
