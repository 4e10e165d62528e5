//! Planar geometric and probabilistic primitives shared by the whole crate.
//!
//! Conventions, fixed once here and relied on everywhere:
//! - world frame: x East, y North, headings CCW-positive from +x
//! - angles normalized to the half-open interval (-π, π]
//! - bearings are measured from the vehicle heading, port side positive

use nalgebra::{Matrix2, Matrix3, SMatrix, Vector2};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Normalize an angle to (-π, π].
///
/// Panics on non-finite input: angles only arise from composing finite
/// poses and measurements, so a NaN here is a bug upstream.
pub fn wrap_angle(a: f64) -> f64 {
    assert!(a.is_finite(), "wrap_angle: non-finite angle {a}");
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// A planar rigid-body pose: position in meters, heading in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    /// Build a pose; the heading is wrapped to (-π, π].
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    pub fn position(&self) -> Point2 {
        Point2 {
            x: self.x,
            y: self.y,
        }
    }

    /// Compose two poses: `self` followed by `other` expressed in the frame
    /// of `self`.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2 {
            x: self.x + c * other.x - s * other.y,
            y: self.y + s * other.x + c * other.y,
            theta: wrap_angle(self.theta + other.theta),
        }
    }

    /// The relative pose taking `self` to `other`, i.e. `self⁻¹ ∘ other`.
    /// Inverse of [`Pose2::compose`]: `a.compose(&a.between(&b)) == b`.
    pub fn between(&self, other: &Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        Pose2 {
            x: c * dx + s * dy,
            y: -s * dx + c * dy,
            theta: wrap_angle(other.theta - self.theta),
        }
    }
}

/// A 2D point in meters. Also used for landmark positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn to_vector(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn from_vector(v: &Vector2<f64>) -> Self {
        Self { x: v[0], y: v[1] }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A 2D Gaussian over a point: mean plus symmetric positive definite covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian2 {
    pub mean: Point2,
    pub cov: Matrix2<f64>,
}

impl Gaussian2 {
    pub fn new(mean: Point2, cov: Matrix2<f64>) -> Self {
        Self { mean, cov }
    }

    pub fn isotropic(mean: Point2, sigma: f64) -> Self {
        Self {
            mean,
            cov: Matrix2::identity() * sigma * sigma,
        }
    }
}

/// A body-frame odometry increment between consecutive pose nodes, with its
/// noise covariance over (dx, dy, dtheta).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryDelta {
    /// Surge displacement (body x), meters.
    pub dx: f64,
    /// Sway displacement (body y), meters.
    pub dy: f64,
    /// Heading change, radians.
    pub dtheta: f64,
    pub cov: Matrix3<f64>,
}

impl OdometryDelta {
    pub fn new(dx: f64, dy: f64, dtheta: f64, cov: Matrix3<f64>) -> Self {
        Self {
            dx,
            dy,
            dtheta: wrap_angle(dtheta),
            cov,
        }
    }

    pub fn as_pose(&self) -> Pose2 {
        Pose2::new(self.dx, self.dy, self.dtheta)
    }
}

/// A relative range/bearing measurement with its noise covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeBearing {
    /// Horizontal range to the target, meters, >= 0.
    pub range: f64,
    /// Bearing from the vehicle heading, radians in (-π, π].
    pub bearing: f64,
    pub cov: Matrix2<f64>,
}

impl RangeBearing {
    pub fn new(range: f64, bearing: f64, cov: Matrix2<f64>) -> Self {
        Self {
            range,
            bearing: wrap_angle(bearing),
            cov,
        }
    }
}

/// Check that a small matrix is symmetric positive definite.
pub fn is_spd<const N: usize>(m: &SMatrix<f64, N, N>) -> bool {
    let scale = m.amax().max(1.0);
    let symmetric = (m - m.transpose()).amax() <= 1e-9 * scale;
    symmetric && nalgebra::Cholesky::new(*m).is_some()
}
