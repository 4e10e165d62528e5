//! Residuals and analytic Jacobians for every factor kind.
//!
//! Local coordinates are additive (δx, δy, δθ) for poses and (δx, δy) for
//! landmarks, with angles wrapped after every update. All residuals and
//! Jacobians returned by [`linearize`] are whitened: multiplied by the
//! inverse lower Cholesky factor of the noise covariance, so that the sum of
//! squared whitened residuals is the chi² objective.

use super::{Factor, GraphError, VariableId, VariableStore};
use crate::geometry::{wrap_angle, Point2, Pose2};
use crate::sonar::predict_range_bearing;
use nalgebra::{DMatrix, DVector, Matrix2, Matrix3};

/// Static-to-dynamic conversions (nalgebra matrices are column-major).
fn dyn_mat<const R: usize, const C: usize>(m: &nalgebra::SMatrix<f64, R, C>) -> DMatrix<f64> {
    DMatrix::from_column_slice(R, C, m.as_slice())
}

fn dyn_vec<const R: usize>(v: &nalgebra::SVector<f64, R>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

/// Whitened linearization of one factor: per-variable Jacobian blocks (in
/// [`Factor::connected`] order) and the whitened residual.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub vars: Vec<VariableId>,
    pub jacobians: Vec<DMatrix<f64>>,
    pub residual: DVector<f64>,
}

fn pose_of(values: &VariableStore, id: VariableId) -> Result<Pose2, GraphError> {
    values
        .get(id)
        .and_then(|v| v.as_pose())
        .ok_or(GraphError::UnknownVariable(id))
}

fn point_of(values: &VariableStore, id: VariableId) -> Result<Point2, GraphError> {
    values
        .get(id)
        .and_then(|v| v.as_point())
        .ok_or(GraphError::UnknownVariable(id))
}

/// Unwhitened residual of a factor at the given values.
pub fn residual(factor: &Factor, values: &VariableStore) -> Result<DVector<f64>, GraphError> {
    Ok(match factor {
        Factor::PosePrior { pose, mean, .. } => {
            let p = pose_of(values, *pose)?;
            DVector::from_vec(vec![p.x - mean.x, p.y - mean.y, wrap_angle(p.theta - mean.theta)])
        }
        Factor::Odometry { from, to, delta, .. } => {
            let a = pose_of(values, *from)?;
            let b = pose_of(values, *to)?;
            let pred = a.between(&b);
            let r = pred.between(delta);
            DVector::from_vec(vec![r.x, r.y, r.theta])
        }
        Factor::BuoyPrior { buoy, mean, .. } => {
            let p = point_of(values, *buoy)?;
            DVector::from_vec(vec![p.x - mean.x, p.y - mean.y])
        }
        Factor::RopePrior { rope, mean, .. } => {
            let p = point_of(values, *rope)?;
            DVector::from_vec(vec![p.x - mean.x, p.y - mean.y])
        }
        Factor::BuoyObs { pose, buoy, meas } => {
            let p = pose_of(values, *pose)?;
            let lm = point_of(values, *buoy)?;
            let (r, b) = predict_range_bearing(&p, &lm)?;
            DVector::from_vec(vec![r - meas.range, wrap_angle(b - meas.bearing)])
        }
        Factor::RopeObs { pose, rope, meas } => {
            let p = pose_of(values, *pose)?;
            let lm = point_of(values, *rope)?;
            let (r, b) = predict_range_bearing(&p, &lm)?;
            DVector::from_vec(vec![r - meas.range, wrap_angle(b - meas.bearing)])
        }
    })
}

/// Inverse of the lower Cholesky factor of a small SPD matrix.
fn whitener2(cov: &Matrix2<f64>, kind: super::FactorKind) -> Result<Matrix2<f64>, GraphError> {
    let chol = nalgebra::Cholesky::new(*cov).ok_or(GraphError::NoiseNotSpd(kind))?;
    Ok(chol
        .l()
        .solve_lower_triangular(&Matrix2::identity())
        .expect("lower-triangular solve with positive diagonal"))
}

fn whitener3(cov: &Matrix3<f64>, kind: super::FactorKind) -> Result<Matrix3<f64>, GraphError> {
    let chol = nalgebra::Cholesky::new(*cov).ok_or(GraphError::NoiseNotSpd(kind))?;
    Ok(chol
        .l()
        .solve_lower_triangular(&Matrix3::identity())
        .expect("lower-triangular solve with positive diagonal"))
}

/// Jacobians of the range/bearing prediction w.r.t. the pose and landmark.
fn range_bearing_jacobians(p: &Pose2, lm: &Point2) -> (nalgebra::Matrix2x3<f64>, Matrix2<f64>) {
    let dx = lm.x - p.x;
    let dy = lm.y - p.y;
    let q = dx * dx + dy * dy;
    let r = q.sqrt();
    let j_pose = nalgebra::Matrix2x3::new(
        -dx / r, -dy / r, 0.0, //
        dy / q, -dx / q, -1.0,
    );
    let j_lm = Matrix2::new(
        dx / r, dy / r, //
        -dy / q, dx / q,
    );
    (j_pose, j_lm)
}

/// Whitened Jacobian blocks and residual of a factor at the given values.
pub fn linearize(factor: &Factor, values: &VariableStore) -> Result<Linearization, GraphError> {
    let raw = residual(factor, values)?;
    match factor {
        Factor::PosePrior { pose, cov, .. } => {
            let w = whitener3(cov, factor.kind())?;
            Ok(Linearization {
                vars: vec![*pose],
                jacobians: vec![dyn_mat(&(w * Matrix3::identity()))],
                residual: dyn_vec(&(w * nalgebra::Vector3::new(raw[0], raw[1], raw[2]))),
            })
        }
        Factor::Odometry { from, to, cov, .. } => {
            let a = pose_of(values, *from)?;
            let b = pose_of(values, *to)?;
            let pred = a.between(&b);
            // residual = pred⁻¹ ∘ delta; chain rule through the intermediate
            // relative pose `pred`.
            let (sp, cp) = pred.theta.sin_cos();
            let (rx, ry) = (raw[0], raw[1]);
            let j_r_pred = Matrix3::new(
                -cp, -sp, ry, //
                sp, -cp, -rx, //
                0.0, 0.0, -1.0,
            );
            let (si, ci) = a.theta.sin_cos();
            let j_pred_from = Matrix3::new(
                -ci, -si, pred.y, //
                si, -ci, -pred.x, //
                0.0, 0.0, -1.0,
            );
            let j_pred_to = Matrix3::new(
                ci, si, 0.0, //
                -si, ci, 0.0, //
                0.0, 0.0, 1.0,
            );
            let w = whitener3(cov, factor.kind())?;
            Ok(Linearization {
                vars: vec![*from, *to],
                jacobians: vec![
                    dyn_mat(&(w * j_r_pred * j_pred_from)),
                    dyn_mat(&(w * j_r_pred * j_pred_to)),
                ],
                residual: dyn_vec(&(w * nalgebra::Vector3::new(raw[0], raw[1], raw[2]))),
            })
        }
        Factor::BuoyPrior { buoy: id, cov, .. } | Factor::RopePrior { rope: id, cov, .. } => {
            let w = whitener2(cov, factor.kind())?;
            Ok(Linearization {
                vars: vec![*id],
                jacobians: vec![dyn_mat(&(w * Matrix2::identity()))],
                residual: dyn_vec(&(w * nalgebra::Vector2::new(raw[0], raw[1]))),
            })
        }
        Factor::BuoyObs { pose, buoy: lm_id, meas } | Factor::RopeObs { pose, rope: lm_id, meas } => {
            let p = pose_of(values, *pose)?;
            let lm = point_of(values, *lm_id)?;
            let (j_pose, j_lm) = range_bearing_jacobians(&p, &lm);
            let w = whitener2(&meas.cov, factor.kind())?;
            Ok(Linearization {
                vars: vec![*pose, *lm_id],
                jacobians: vec![dyn_mat(&(w * j_pose)), dyn_mat(&(w * j_lm))],
                residual: dyn_vec(&(w * nalgebra::Vector2::new(raw[0], raw[1]))),
            })
        }
    }
}

/// Chi² of a factor set at the given values: the sum of squared whitened
/// residual norms.
pub fn chi2_of(factors: &[Factor], values: &VariableStore) -> Result<f64, GraphError> {
    let mut total = 0.0;
    for f in factors {
        let raw = residual(f, values)?;
        total += match f {
            Factor::PosePrior { cov, .. } | Factor::Odometry { cov, .. } => {
                let w = whitener3(cov, f.kind())?;
                (w * nalgebra::Vector3::new(raw[0], raw[1], raw[2])).norm_squared()
            }
            Factor::BuoyPrior { cov, .. } | Factor::RopePrior { cov, .. } => {
                let w = whitener2(cov, f.kind())?;
                (w * nalgebra::Vector2::new(raw[0], raw[1])).norm_squared()
            }
            Factor::BuoyObs { meas, .. } | Factor::RopeObs { meas, .. } => {
                let w = whitener2(&meas.cov, f.kind())?;
                (w * nalgebra::Vector2::new(raw[0], raw[1])).norm_squared()
            }
        };
    }
    Ok(total)
}
