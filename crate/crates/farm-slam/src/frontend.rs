//! Detection-to-factor conversion: farm model, rope priors, data association
//! and the three back-end population strategies.
//!
//! The strategies differ only in how rope detections enter the graph:
//!
//! - [`MethodKind::Proposed`]: every rope detection becomes a brand new rope
//!   landmark, carrying a fresh instance of the (shared per physical rope)
//!   anisotropic prior plus a range/bearing factor to the observing pose.
//!   The wide-along / narrow-across prior lets pose and landmark slide along
//!   the rope together while pinning the lateral offset.
//! - [`MethodKind::BaselineSharedRope`]: all detections of one physical rope
//!   attach to a single shared landmark (created on first detection with one
//!   prior instance).
//! - [`MethodKind::BaselineBuoyOnly`]: rope detections are discarded; only
//!   buoy detections constrain the graph.
//!
//! Buoy association is maximum likelihood with a chi² gate: the detection is
//! projected into the world through the current pose estimate and matched to
//! the buoy minimizing the Mahalanobis distance under the combined buoy
//! marginal, pose marginal and measurement covariance. Rope association
//! matches the projected point against the per-rope prior Gaussians; a rope
//! detection always associates (the detector only fires on ropes) but
//! matches beyond the gate are flagged.

use crate::geometry::{Gaussian2, Point2, Pose2, RangeBearing};
use crate::graph::{Factor, FactorGraph, FactorId, GraphError, VariableId};
use crate::sonar::{
    detection_to_measurement, landmark_from_measurement, Detection, TargetClass, TargetDepthTable,
};
use nalgebra::{Matrix2, Matrix2x3, Matrix3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Chi² quantile for 2 degrees of freedom at p = 0.999; for two dof the
/// quantile has the closed form -2 ln(1 - p).
pub const CHI2_GATE_2DOF_999: f64 = 13.815510557964274;

/// One mooring buoy of the farm prior map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarmBuoy {
    pub id: usize,
    pub prior: Gaussian2,
}

/// One growth rope, moored between two buoys at a known depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rope {
    pub id: usize,
    pub buoy_a: usize,
    pub buoy_b: usize,
    pub depth: f64,
}

/// Prior map of the farm: buoy Gaussians and the ropes strung between them.
#[derive(Debug, Clone, PartialEq)]
pub struct FarmModel {
    pub buoys: Vec<FarmBuoy>,
    pub ropes: Vec<Rope>,
}

#[derive(Debug, Clone, Error)]
pub enum FrontendError {
    #[error("rope {0} references missing or duplicate buoys")]
    InvalidRope(usize),
    #[error("rope {rope_id}: mooring buoys coincide, direction undefined")]
    DegenerateRope { rope_id: usize },
    #[error("unknown rope id {0}")]
    UnknownRope(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl FarmModel {
    /// Check rope/buoy referential integrity.
    pub fn validate(&self) -> Result<(), FrontendError> {
        for rope in &self.ropes {
            let a = self.buoys.iter().any(|b| b.id == rope.buoy_a);
            let b = self.buoys.iter().any(|b| b.id == rope.buoy_b);
            if !a || !b || rope.buoy_a == rope.buoy_b {
                return Err(FrontendError::InvalidRope(rope.id));
            }
        }
        Ok(())
    }

    pub fn buoy(&self, id: usize) -> Option<&FarmBuoy> {
        self.buoys.iter().find(|b| b.id == id)
    }

    pub fn rope(&self, id: usize) -> Option<&Rope> {
        self.ropes.iter().find(|r| r.id == id)
    }

    /// Endpoints of a rope, taken from the buoy prior means.
    pub fn rope_endpoints(&self, rope_id: usize) -> Option<(Point2, Point2)> {
        let rope = self.rope(rope_id)?;
        Some((self.buoy(rope.buoy_a)?.prior.mean, self.buoy(rope.buoy_b)?.prior.mean))
    }
}

/// The anisotropic 2D Gaussian prior instantiated for rope landmarks: mean at
/// the midpoint between the mooring buoys, principal axis along the rope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RopePriorSpec {
    pub rope_id: usize,
    pub mean: Point2,
    pub cov: Matrix2<f64>,
}

/// Back-end population strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MethodKind {
    #[serde(rename = "proposed")]
    Proposed,
    #[serde(rename = "baseline_shared_rope")]
    BaselineSharedRope,
    #[serde(rename = "baseline_buoy_only")]
    BaselineBuoyOnly,
}

impl MethodKind {
    pub fn all() -> [MethodKind; 3] {
        [
            MethodKind::Proposed,
            MethodKind::BaselineSharedRope,
            MethodKind::BaselineBuoyOnly,
        ]
    }

    pub fn label(&self) -> &'static str {
        match self {
            MethodKind::Proposed => "proposed",
            MethodKind::BaselineSharedRope => "baseline_shared_rope",
            MethodKind::BaselineBuoyOnly => "baseline_buoy_only",
        }
    }
}

impl std::str::FromStr for MethodKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proposed" => Ok(MethodKind::Proposed),
            "baseline_shared_rope" | "shared" | "baseline2" => Ok(MethodKind::BaselineSharedRope),
            "baseline_buoy_only" | "buoy_only" | "baseline1" => Ok(MethodKind::BaselineBuoyOnly),
            other => Err(format!(
                "unknown method '{other}' (expected proposed | baseline_shared_rope | baseline_buoy_only)"
            )),
        }
    }
}

impl std::fmt::Display for MethodKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Build the rope prior for one rope: mean at the midpoint of the mooring
/// buoy prior means, covariance R diag(σ_along², σ_across²) Rᵀ with the x
/// axis rotated onto the rope direction. `sigma_along = None` selects the
/// auto rule: half the buoy-to-buoy distance, so the ±1σ band spans the rope.
pub fn make_rope_prior(
    farm: &FarmModel,
    rope_id: usize,
    sigma_along: Option<f64>,
    sigma_across: f64,
) -> Result<RopePriorSpec, FrontendError> {
    let (a, b) = farm
        .rope_endpoints(rope_id)
        .ok_or(FrontendError::UnknownRope(rope_id))?;
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len = dx.hypot(dy);
    if len < 1e-9 {
        return Err(FrontendError::DegenerateRope { rope_id });
    }
    let mean = Point2::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0);
    let along = sigma_along.unwrap_or(len / 2.0);
    let (c, s) = (dx / len, dy / len);
    let rot = Matrix2::new(c, -s, s, c);
    let cov = rot * Matrix2::new(along * along, 0.0, 0.0, sigma_across * sigma_across) * rot.transpose();
    Ok(RopePriorSpec { rope_id, mean, cov })
}

/// Tuning knobs of the frontend.
#[derive(Debug, Clone)]
pub struct FrontendConfig {
    /// Mahalanobis² acceptance gate for buoy association.
    pub buoy_gate: f64,
    /// Mahalanobis² flagging gate for rope association.
    pub rope_gate: f64,
    /// Rope prior sigma along the rope; `None` = half the rope length.
    pub sigma_along: Option<f64>,
    /// Rope prior sigma across the rope.
    pub sigma_across: f64,
    /// Measurement noise for buoy observations (range, bearing).
    pub buoy_obs_cov: Matrix2<f64>,
    /// Measurement noise for rope observations (range, bearing).
    pub rope_obs_cov: Matrix2<f64>,
    pub depths: TargetDepthTable,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        let obs = Matrix2::new(0.2 * 0.2, 0.0, 0.0, 0.05 * 0.05);
        Self {
            buoy_gate: CHI2_GATE_2DOF_999,
            rope_gate: CHI2_GATE_2DOF_999,
            sigma_along: None,
            sigma_across: 0.1,
            buoy_obs_cov: obs,
            rope_obs_cov: obs,
            depths: TargetDepthTable::default(),
        }
    }
}

/// Counters over one run; rejection is a normal outcome, not an error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontendStats {
    pub infeasible_dropped: usize,
    pub buoy_accepted: usize,
    pub buoy_rejected: usize,
    pub rope_accepted: usize,
    pub rope_low_confidence: usize,
    pub rope_discarded: usize,
}

/// What one detection did to the graph.
#[derive(Debug, Clone, PartialEq)]
pub enum Emission {
    /// Detection dropped (infeasible geometry, gated out, or out of scope
    /// for the method).
    None,
    /// Factors (and possibly a new landmark variable) were added.
    Added {
        new_variables: Vec<VariableId>,
        new_factors: Vec<FactorId>,
    },
}

/// Log entry for an accepted rope detection; evaluation uses this to map
/// detections through trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RopeAssociation {
    pub t: f64,
    pub pose: VariableId,
    pub rope_id: usize,
    /// Rope landmark variable the factor attached to; `None` when the method
    /// discards rope detections (they are still logged for evaluation).
    pub landmark: Option<VariableId>,
    pub range: f64,
    pub bearing: f64,
    pub low_confidence: bool,
}

/// Log entry for a buoy detection (accepted or rejected).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuoyAssociation {
    pub t: f64,
    pub pose: VariableId,
    /// Matched buoy id; `None` when gated out.
    pub buoy_id: Option<usize>,
    pub mahalanobis_sq: f64,
    pub range: f64,
    pub bearing: f64,
}

/// Converts the detection stream into graph variables and factors under one
/// of the three strategies. One instance per run; not shared across runs.
#[derive(Debug, Clone)]
pub struct Frontend {
    pub method: MethodKind,
    pub farm: FarmModel,
    pub config: FrontendConfig,
    pub stats: FrontendStats,
    /// Per-rope prior specs, identical for every detection of the same rope.
    rope_priors: Vec<RopePriorSpec>,
    /// Buoy variable per farm buoy id, in farm order.
    buoy_vars: Vec<(usize, VariableId)>,
    /// Shared-rope mode: rope id -> its single landmark variable.
    shared_rope_vars: Vec<(usize, VariableId)>,
    pub rope_log: Vec<RopeAssociation>,
    pub buoy_log: Vec<BuoyAssociation>,
}

impl Frontend {
    /// Set up the frontend and seed the graph with the prior map: one buoy
    /// variable with its prior per farm buoy.
    pub fn new(
        method: MethodKind,
        farm: FarmModel,
        config: FrontendConfig,
        graph: &mut FactorGraph,
    ) -> Result<Self, FrontendError> {
        farm.validate()?;
        let mut rope_priors = Vec::with_capacity(farm.ropes.len());
        for rope in &farm.ropes {
            rope_priors.push(make_rope_prior(
                &farm,
                rope.id,
                config.sigma_along,
                config.sigma_across,
            )?);
        }
        let mut buoy_vars = Vec::with_capacity(farm.buoys.len());
        for b in &farm.buoys {
            let var = graph.add_buoy_variable(b.prior.mean);
            graph.add_factor(Factor::BuoyPrior {
                buoy: var,
                mean: b.prior.mean,
                cov: b.prior.cov,
            })?;
            buoy_vars.push((b.id, var));
        }
        Ok(Self {
            method,
            farm,
            config,
            stats: FrontendStats::default(),
            rope_priors,
            buoy_vars,
            shared_rope_vars: Vec::new(),
            rope_log: Vec::new(),
            buoy_log: Vec::new(),
        })
    }

    pub fn rope_prior(&self, rope_id: usize) -> Option<&RopePriorSpec> {
        self.rope_priors.iter().find(|p| p.rope_id == rope_id)
    }

    pub fn buoy_variable(&self, buoy_id: usize) -> Option<VariableId> {
        self.buoy_vars
            .iter()
            .find(|(id, _)| *id == buoy_id)
            .map(|(_, v)| *v)
    }

    /// Covariance of the world-frame projection of a measurement, combining
    /// the measurement noise with the observing pose marginal.
    fn projected_measurement_cov(
        meas: &RangeBearing,
        pose: &Pose2,
        pose_cov: &Matrix3<f64>,
    ) -> Matrix2<f64> {
        let phi = pose.theta + meas.bearing;
        let (s, c) = phi.sin_cos();
        let j_meas = Matrix2::new(c, -meas.range * s, s, meas.range * c);
        let j_pose = Matrix2x3::new(1.0, 0.0, -meas.range * s, 0.0, 1.0, meas.range * c);
        j_meas * meas.cov * j_meas.transpose() + j_pose * pose_cov * j_pose.transpose()
    }

    /// Maximum-likelihood buoy association. Returns the matched farm buoy id,
    /// or `None` when every candidate lies beyond the gate. Ties break to the
    /// lowest buoy id for deterministic replay.
    pub fn associate_buoy(
        &self,
        meas: &RangeBearing,
        pose_est: &Pose2,
        pose_cov: &Matrix3<f64>,
        graph: &mut FactorGraph,
    ) -> Result<(Option<usize>, f64), FrontendError> {
        let point = landmark_from_measurement(pose_est, meas);
        let s_meas = Self::projected_measurement_cov(meas, pose_est, pose_cov);

        let mut best: Option<(usize, f64)> = None;
        for (buoy_id, var) in &self.buoy_vars {
            let marginal = graph.marginal_covariance(*var)?;
            let est = graph.point_value(*var).expect("buoy variable has a value");
            let s = Matrix2::new(
                marginal[(0, 0)] + s_meas[(0, 0)],
                marginal[(0, 1)] + s_meas[(0, 1)],
                marginal[(1, 0)] + s_meas[(1, 0)],
                marginal[(1, 1)] + s_meas[(1, 1)],
            );
            let delta = nalgebra::Vector2::new(point.x - est.x, point.y - est.y);
            let inv = s.try_inverse().ok_or_else(|| {
                FrontendError::Graph(GraphError::SingularSystem(format!(
                    "association covariance for buoy {buoy_id}"
                )))
            })?;
            let d2 = (delta.transpose() * inv * delta)[(0, 0)];
            // strict < keeps the lowest id on ties
            if best.map_or(true, |(_, bd)| d2 < bd) {
                best = Some((*buoy_id, d2));
            }
        }
        let (id, d2) = best.expect("farm has at least one buoy");
        if d2 <= self.config.buoy_gate {
            Ok((Some(id), d2))
        } else {
            Ok((None, d2))
        }
    }

    /// Associate a rope detection to the rope whose prior Gaussian is closest
    /// in Mahalanobis distance to the projected detection. Always returns a
    /// rope; matches beyond the gate are flagged low-confidence. Ties break
    /// to the lowest rope id.
    pub fn associate_rope(&self, meas: &RangeBearing, pose_est: &Pose2) -> (usize, bool) {
        let point = landmark_from_measurement(pose_est, meas);
        let mut best: Option<(usize, f64)> = None;
        for spec in &self.rope_priors {
            let delta = nalgebra::Vector2::new(point.x - spec.mean.x, point.y - spec.mean.y);
            let inv = spec.cov.try_inverse().expect("rope prior covariance is SPD");
            let d2 = (delta.transpose() * inv * delta)[(0, 0)];
            if best.map_or(true, |(_, bd)| d2 < bd) {
                best = Some((spec.rope_id, d2));
            }
        }
        let (id, d2) = best.expect("farm has at least one rope");
        (id, d2 > self.config.rope_gate)
    }

    /// Feed one detection into the graph according to the method. `pose_var`
    /// is the pose node the detection attaches to (the nearest earlier pose).
    pub fn process_detection(
        &mut self,
        graph: &mut FactorGraph,
        pose_var: VariableId,
        det: &Detection,
    ) -> Result<Emission, FrontendError> {
        let noise = match det.klass {
            TargetClass::Buoy => self.config.buoy_obs_cov,
            TargetClass::Rope => self.config.rope_obs_cov,
        };
        let meas = match detection_to_measurement(det, &self.config.depths, noise) {
            Ok(m) => m,
            Err(_) => {
                // slant range shorter than the depth gap, possible under
                // noise; drop rather than clamp to a biased zero range
                self.stats.infeasible_dropped += 1;
                return Ok(Emission::None);
            }
        };
        let pose_est = graph
            .pose_value(pose_var)
            .ok_or(FrontendError::Graph(GraphError::UnknownVariable(pose_var)))?;

        match det.klass {
            TargetClass::Buoy => self.process_buoy(graph, pose_var, &pose_est, det.t, meas),
            TargetClass::Rope => match self.method {
                MethodKind::BaselineBuoyOnly => {
                    // discarded as a constraint, but logged so evaluation can
                    // map the raw detections through the final trajectory
                    let (rope_id, low_confidence) = self.associate_rope(&meas, &pose_est);
                    self.rope_log.push(RopeAssociation {
                        t: det.t,
                        pose: pose_var,
                        rope_id,
                        landmark: None,
                        range: meas.range,
                        bearing: meas.bearing,
                        low_confidence,
                    });
                    self.stats.rope_discarded += 1;
                    Ok(Emission::None)
                }
                MethodKind::Proposed => self.process_rope_proposed(graph, pose_var, &pose_est, det.t, meas),
                MethodKind::BaselineSharedRope => {
                    self.process_rope_shared(graph, pose_var, &pose_est, det.t, meas)
                }
            },
        }
    }

    fn process_buoy(
        &mut self,
        graph: &mut FactorGraph,
        pose_var: VariableId,
        pose_est: &Pose2,
        t: f64,
        meas: RangeBearing,
    ) -> Result<Emission, FrontendError> {
        let pose_cov3 = graph.marginal_covariance(pose_var)?;
        let pose_cov = Matrix3::from_fn(|r, c| pose_cov3[(r, c)]);
        let (matched, d2) = self.associate_buoy(&meas, pose_est, &pose_cov, graph)?;
        self.buoy_log.push(BuoyAssociation {
            t,
            pose: pose_var,
            buoy_id: matched,
            mahalanobis_sq: d2,
            range: meas.range,
            bearing: meas.bearing,
        });
        match matched {
            Some(buoy_id) => {
                let var = self.buoy_variable(buoy_id).expect("logged buoy exists");
                let fid = graph.add_factor(Factor::BuoyObs {
                    pose: pose_var,
                    buoy: var,
                    meas,
                })?;
                self.stats.buoy_accepted += 1;
                Ok(Emission::Added {
                    new_variables: vec![],
                    new_factors: vec![fid],
                })
            }
            None => {
                self.stats.buoy_rejected += 1;
                Ok(Emission::None)
            }
        }
    }

    fn process_rope_proposed(
        &mut self,
        graph: &mut FactorGraph,
        pose_var: VariableId,
        pose_est: &Pose2,
        t: f64,
        meas: RangeBearing,
    ) -> Result<Emission, FrontendError> {
        let (rope_id, low_confidence) = self.associate_rope(&meas, pose_est);
        let spec = *self.rope_prior(rope_id).expect("prior per farm rope");
        // a fresh landmark per detection, initialized at the projection
        let init = landmark_from_measurement(pose_est, &meas);
        let var = graph.add_rope_variable(init);
        let f_prior = graph.add_factor(Factor::RopePrior {
            rope: var,
            mean: spec.mean,
            cov: spec.cov,
        })?;
        let f_obs = graph.add_factor(Factor::RopeObs {
            pose: pose_var,
            rope: var,
            meas,
        })?;
        self.stats.rope_accepted += 1;
        if low_confidence {
            self.stats.rope_low_confidence += 1;
        }
        self.rope_log.push(RopeAssociation {
            t,
            pose: pose_var,
            rope_id,
            landmark: Some(var),
            range: meas.range,
            bearing: meas.bearing,
            low_confidence,
        });
        Ok(Emission::Added {
            new_variables: vec![var],
            new_factors: vec![f_prior, f_obs],
        })
    }

    fn process_rope_shared(
        &mut self,
        graph: &mut FactorGraph,
        pose_var: VariableId,
        pose_est: &Pose2,
        t: f64,
        meas: RangeBearing,
    ) -> Result<Emission, FrontendError> {
        let (rope_id, low_confidence) = self.associate_rope(&meas, pose_est);
        let mut new_variables = Vec::new();
        let mut new_factors = Vec::new();
        let var = match self
            .shared_rope_vars
            .iter()
            .find(|(id, _)| *id == rope_id)
            .map(|(_, v)| *v)
        {
            Some(v) => v,
            None => {
                let spec = *self.rope_prior(rope_id).expect("prior per farm rope");
                let init = landmark_from_measurement(pose_est, &meas);
                let var = graph.add_rope_variable(init);
                new_factors.push(graph.add_factor(Factor::RopePrior {
                    rope: var,
                    mean: spec.mean,
                    cov: spec.cov,
                })?);
                self.shared_rope_vars.push((rope_id, var));
                new_variables.push(var);
                var
            }
        };
        new_factors.push(graph.add_factor(Factor::RopeObs {
            pose: pose_var,
            rope: var,
            meas,
        })?);
        self.stats.rope_accepted += 1;
        if low_confidence {
            self.stats.rope_low_confidence += 1;
        }
        self.rope_log.push(RopeAssociation {
            t,
            pose: pose_var,
            rope_id,
            landmark: Some(var),
            range: meas.range,
            bearing: meas.bearing,
            low_confidence,
        });
        Ok(Emission::Added {
            new_variables,
            new_factors,
        })
    }
}
