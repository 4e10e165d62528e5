//! Landmark-based graph-SLAM back-end.
//!
//! A [`FactorGraph`] holds pose, buoy and rope variables together with the
//! probabilistic constraints between them, and solves the resulting sparse
//! nonlinear least-squares problem:
//!
//! - unary priors on the initial pose, the buoys and the rope landmarks,
//! - binary odometry factors between consecutive poses,
//! - binary range/bearing observation factors between a pose and a landmark.
//!
//! Solving minimizes the sum of squared Mahalanobis residuals over all
//! factors (Levenberg-Marquardt over the whitened linearized system, with a
//! block-sparse Cholesky on the normal equations). Incremental operation is
//! warm-started re-optimization over the full graph: it returns the same
//! estimate as a batch solve, just cheaper because the previous solution is
//! an excellent initial guess.

mod factors;
mod linalg;
mod solver;

pub use factors::Linearization;
pub use linalg::{BlockCholesky, BlockSpdMatrix, BlockStructure};
pub use solver::{GraphEstimate, SolveReport, SolverConfig};

use crate::error::GeometryError;
use crate::geometry::{is_spd, Point2, Pose2, RangeBearing};
use nalgebra::{DMatrix, Matrix2, Matrix3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Variable categories held by the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VariableKind {
    #[serde(rename = "pose")]
    Pose,
    #[serde(rename = "buoy")]
    Buoy,
    #[serde(rename = "rope")]
    Rope,
}

impl VariableKind {
    /// Dimension of a variable of this kind: 3 for poses, 2 for landmarks.
    pub fn dim(&self) -> usize {
        match self {
            VariableKind::Pose => 3,
            VariableKind::Buoy | VariableKind::Rope => 2,
        }
    }
}

/// Identifier of a variable: kind plus per-kind ordinal. Pose indices are
/// contiguous in time order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VariableId {
    pub kind: VariableKind,
    pub index: usize,
}

impl VariableId {
    pub fn pose(index: usize) -> Self {
        Self { kind: VariableKind::Pose, index }
    }
    pub fn buoy(index: usize) -> Self {
        Self { kind: VariableKind::Buoy, index }
    }
    pub fn rope(index: usize) -> Self {
        Self { kind: VariableKind::Rope, index }
    }
}

/// A variable value: a pose or a 2D landmark position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Pose(Pose2),
    Point(Point2),
}

impl Value {
    pub fn as_pose(&self) -> Option<Pose2> {
        match self {
            Value::Pose(p) => Some(*p),
            Value::Point(_) => None,
        }
    }
    pub fn as_point(&self) -> Option<Point2> {
        match self {
            Value::Point(p) => Some(*p),
            Value::Pose(_) => None,
        }
    }
}

/// Factor kind tag, used for counting, diagnostics and errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FactorKind {
    PosePrior,
    Odometry,
    BuoyPrior,
    RopePrior,
    BuoyObs,
    RopeObs,
}

/// A measurement constraint over one or two variables, with Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    /// Prior on a pose (anchors the gauge).
    PosePrior {
        pose: VariableId,
        mean: Pose2,
        cov: Matrix3<f64>,
    },
    /// Relative pose between two consecutive pose variables, measured in the
    /// frame of `from`.
    Odometry {
        from: VariableId,
        to: VariableId,
        delta: Pose2,
        cov: Matrix3<f64>,
    },
    /// Prior on a buoy landmark position.
    BuoyPrior {
        buoy: VariableId,
        mean: Point2,
        cov: Matrix2<f64>,
    },
    /// Prior on a rope landmark position. The covariance is typically highly
    /// anisotropic: wide along the rope direction, narrow across it, so the
    /// landmark (and the pose tied to it) can slide along the rope.
    RopePrior {
        rope: VariableId,
        mean: Point2,
        cov: Matrix2<f64>,
    },
    /// Range/bearing observation of a buoy from a pose.
    BuoyObs {
        pose: VariableId,
        buoy: VariableId,
        meas: RangeBearing,
    },
    /// Range/bearing observation of a rope landmark from a pose.
    RopeObs {
        pose: VariableId,
        rope: VariableId,
        meas: RangeBearing,
    },
}

impl Factor {
    pub fn kind(&self) -> FactorKind {
        match self {
            Factor::PosePrior { .. } => FactorKind::PosePrior,
            Factor::Odometry { .. } => FactorKind::Odometry,
            Factor::BuoyPrior { .. } => FactorKind::BuoyPrior,
            Factor::RopePrior { .. } => FactorKind::RopePrior,
            Factor::BuoyObs { .. } => FactorKind::BuoyObs,
            Factor::RopeObs { .. } => FactorKind::RopeObs,
        }
    }

    /// Variables this factor connects, in Jacobian block order.
    pub fn connected(&self) -> Vec<VariableId> {
        match self {
            Factor::PosePrior { pose, .. } => vec![*pose],
            Factor::Odometry { from, to, .. } => vec![*from, *to],
            Factor::BuoyPrior { buoy, .. } => vec![*buoy],
            Factor::RopePrior { rope, .. } => vec![*rope],
            Factor::BuoyObs { pose, buoy, .. } => vec![*pose, *buoy],
            Factor::RopeObs { pose, rope, .. } => vec![*pose, *rope],
        }
    }

    /// Residual dimension.
    pub fn dim(&self) -> usize {
        match self {
            Factor::PosePrior { .. } | Factor::Odometry { .. } => 3,
            _ => 2,
        }
    }

    fn noise_is_spd(&self) -> bool {
        match self {
            Factor::PosePrior { cov, .. } | Factor::Odometry { cov, .. } => is_spd(cov),
            Factor::BuoyPrior { cov, .. } | Factor::RopePrior { cov, .. } => is_spd(cov),
            Factor::BuoyObs { meas, .. } | Factor::RopeObs { meas, .. } => is_spd(&meas.cov),
        }
    }

    /// Check the arity contract: priors bind one variable of the right kind,
    /// odometry binds two poses, observations bind one pose and one landmark
    /// of the matching kind.
    fn arity_ok(&self) -> bool {
        let k = |id: &VariableId| id.kind;
        match self {
            Factor::PosePrior { pose, .. } => k(pose) == VariableKind::Pose,
            Factor::Odometry { from, to, .. } => {
                k(from) == VariableKind::Pose && k(to) == VariableKind::Pose && from != to
            }
            Factor::BuoyPrior { buoy, .. } => k(buoy) == VariableKind::Buoy,
            Factor::RopePrior { rope, .. } => k(rope) == VariableKind::Rope,
            Factor::BuoyObs { pose, buoy, .. } => {
                k(pose) == VariableKind::Pose && k(buoy) == VariableKind::Buoy
            }
            Factor::RopeObs { pose, rope, .. } => {
                k(pose) == VariableKind::Pose && k(rope) == VariableKind::Rope
            }
        }
    }

    pub fn is_prior(&self) -> bool {
        matches!(
            self.kind(),
            FactorKind::PosePrior | FactorKind::BuoyPrior | FactorKind::RopePrior
        )
    }
}

/// Identifier of a factor within its graph (insertion order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FactorId(pub usize);

#[derive(Debug, Clone, Error)]
pub enum GraphError {
    #[error("unknown variable {0:?}")]
    UnknownVariable(VariableId),
    #[error("arity mismatch: {0}")]
    ArityMismatch(String),
    #[error("initial value does not match variable kind {0:?}")]
    ValueKindMismatch(VariableKind),
    #[error("noise covariance not symmetric positive definite on {0:?} factor")]
    NoiseNotSpd(FactorKind),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Per-kind variable storage. Values double as the current linearization
/// point; solving updates them in place.
#[derive(Debug, Clone, Default)]
pub(crate) struct VariableStore {
    pub poses: Vec<Pose2>,
    pub buoys: Vec<Point2>,
    pub ropes: Vec<Point2>,
}

impl VariableStore {
    pub fn get(&self, id: VariableId) -> Option<Value> {
        match id.kind {
            VariableKind::Pose => self.poses.get(id.index).map(|p| Value::Pose(*p)),
            VariableKind::Buoy => self.buoys.get(id.index).map(|p| Value::Point(*p)),
            VariableKind::Rope => self.ropes.get(id.index).map(|p| Value::Point(*p)),
        }
    }

    pub fn contains(&self, id: VariableId) -> bool {
        self.get(id).is_some()
    }

    pub fn len(&self) -> usize {
        self.poses.len() + self.buoys.len() + self.ropes.len()
    }
}

/// The SLAM back-end graph: variables, factors, and the current estimate.
///
/// A graph instance is single-writer; solved estimates returned from it are
/// immutable snapshots that can be shared freely.
#[derive(Debug, Clone, Default)]
pub struct FactorGraph {
    pub(crate) values: VariableStore,
    pub(crate) factors: Vec<Factor>,
    /// Set when values/factors changed after the last marginal factorization.
    pub(crate) marginal_cache: Option<solver::MarginalCache>,
}

impl FactorGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a variable with its initial value (which is also the initial
    /// linearization point). Returns its id.
    pub fn add_variable(&mut self, kind: VariableKind, initial: Value) -> Result<VariableId, GraphError> {
        let index = match (kind, initial) {
            (VariableKind::Pose, Value::Pose(p)) => {
                self.values.poses.push(p);
                self.values.poses.len() - 1
            }
            (VariableKind::Buoy, Value::Point(p)) => {
                self.values.buoys.push(p);
                self.values.buoys.len() - 1
            }
            (VariableKind::Rope, Value::Point(p)) => {
                self.values.ropes.push(p);
                self.values.ropes.len() - 1
            }
            _ => return Err(GraphError::ValueKindMismatch(kind)),
        };
        self.marginal_cache = None;
        Ok(VariableId { kind, index })
    }

    pub fn add_pose_variable(&mut self, pose: Pose2) -> VariableId {
        self.add_variable(VariableKind::Pose, Value::Pose(pose)).expect("pose value")
    }

    pub fn add_buoy_variable(&mut self, point: Point2) -> VariableId {
        self.add_variable(VariableKind::Buoy, Value::Point(point)).expect("point value")
    }

    pub fn add_rope_variable(&mut self, point: Point2) -> VariableId {
        self.add_variable(VariableKind::Rope, Value::Point(point)).expect("point value")
    }

    /// Append a factor after validating its arity, the existence of its
    /// variables and that its noise is SPD.
    pub fn add_factor(&mut self, factor: Factor) -> Result<FactorId, GraphError> {
        for id in factor.connected() {
            if !self.values.contains(id) {
                return Err(GraphError::UnknownVariable(id));
            }
        }
        if !factor.arity_ok() {
            return Err(GraphError::ArityMismatch(format!(
                "{:?} cannot connect {:?}",
                factor.kind(),
                factor.connected()
            )));
        }
        if !factor.noise_is_spd() {
            return Err(GraphError::NoiseNotSpd(factor.kind()));
        }
        self.factors.push(factor);
        self.marginal_cache = None;
        Ok(FactorId(self.factors.len() - 1))
    }

    pub fn factor(&self, id: FactorId) -> Option<&Factor> {
        self.factors.get(id.0)
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor_count(&self) -> usize {
        self.factors.len()
    }

    pub fn variable_count(&self) -> usize {
        self.values.len()
    }

    pub fn count_factors_of(&self, kind: FactorKind) -> usize {
        self.factors.iter().filter(|f| f.kind() == kind).count()
    }

    pub fn count_variables_of(&self, kind: VariableKind) -> usize {
        match kind {
            VariableKind::Pose => self.values.poses.len(),
            VariableKind::Buoy => self.values.buoys.len(),
            VariableKind::Rope => self.values.ropes.len(),
        }
    }

    /// Current value of a variable.
    pub fn value(&self, id: VariableId) -> Option<Value> {
        self.values.get(id)
    }

    pub fn pose_value(&self, id: VariableId) -> Option<Pose2> {
        self.values.get(id).and_then(|v| v.as_pose())
    }

    pub fn point_value(&self, id: VariableId) -> Option<Point2> {
        self.values.get(id).and_then(|v| v.as_point())
    }

    /// Overwrite current values (e.g. to re-run a batch solve from cold
    /// initial values). Ids not present in the map are left untouched.
    pub fn set_values(&mut self, values: &BTreeMap<VariableId, Value>) {
        for (id, v) in values {
            match (id.kind, v) {
                (VariableKind::Pose, Value::Pose(p)) => self.values.poses[id.index] = *p,
                (VariableKind::Buoy, Value::Point(p)) => self.values.buoys[id.index] = *p,
                (VariableKind::Rope, Value::Point(p)) => self.values.ropes[id.index] = *p,
                _ => {}
            }
        }
        self.marginal_cache = None;
    }

    /// Snapshot of all current values.
    pub fn values_snapshot(&self) -> BTreeMap<VariableId, Value> {
        let mut map = BTreeMap::new();
        for (i, p) in self.values.poses.iter().enumerate() {
            map.insert(VariableId::pose(i), Value::Pose(*p));
        }
        for (i, p) in self.values.buoys.iter().enumerate() {
            map.insert(VariableId::buoy(i), Value::Point(*p));
        }
        for (i, p) in self.values.ropes.iter().enumerate() {
            map.insert(VariableId::rope(i), Value::Point(*p));
        }
        map
    }

    /// Weighted squared residual sum at the current values.
    pub fn chi2(&self) -> Result<f64, GraphError> {
        factors::chi2_of(&self.factors, &self.values)
    }

    /// Unwhitened residual of one factor at the current values.
    pub fn residual(&self, id: FactorId) -> Result<nalgebra::DVector<f64>, GraphError> {
        let f = self.factors.get(id.0).ok_or(GraphError::ArityMismatch(format!(
            "no factor {id:?}"
        )))?;
        factors::residual(f, &self.values)
    }

    /// Whitened Jacobian blocks and residual of one factor at the current values.
    pub fn linearize(&self, id: FactorId) -> Result<Linearization, GraphError> {
        let f = self.factors.get(id.0).ok_or(GraphError::ArityMismatch(format!(
            "no factor {id:?}"
        )))?;
        factors::linearize(f, &self.values)
    }

    /// Text adjacency listing for diagnostics: one line per factor with its
    /// kind, connected variables and current residual norm.
    pub fn debug_dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "graph: {} variables ({} poses, {} buoys, {} ropes), {} factors",
            self.variable_count(),
            self.values.poses.len(),
            self.values.buoys.len(),
            self.values.ropes.len(),
            self.factors.len()
        );
        for (i, f) in self.factors.iter().enumerate() {
            let norm = factors::residual(f, &self.values)
                .map(|r| format!("{:.6}", r.norm()))
                .unwrap_or_else(|e| format!("<{e}>"));
            let vars: Vec<String> = f
                .connected()
                .iter()
                .map(|v| format!("{:?}{}", v.kind, v.index))
                .collect();
            let _ = writeln!(out, "  [{i:4}] {:?} ({}) |r| = {norm}", f.kind(), vars.join(", "));
        }
        out
    }

    /// Marginal covariance block of one variable: the corresponding block of
    /// the inverse Gauss-Newton information matrix at the current
    /// linearization point.
    pub fn marginal_covariance(&mut self, id: VariableId) -> Result<DMatrix<f64>, GraphError> {
        solver::marginal_covariance(self, id)
    }

    /// Batch Levenberg-Marquardt from the current values.
    pub fn solve_batch(&mut self, config: &SolverConfig) -> Result<SolveReport, GraphError> {
        solver::solve(self, config)
    }

    /// Register new variables and factors, then re-optimize warm-started from
    /// the current solution. Returns the ids assigned to `new_variables`
    /// (in order) along with the refreshed estimate, which matches what a
    /// batch solve over the same graph would produce.
    pub fn update_incremental(
        &mut self,
        new_variables: Vec<(VariableKind, Value)>,
        new_factors: Vec<Factor>,
        config: &SolverConfig,
    ) -> Result<(Vec<VariableId>, SolveReport), GraphError> {
        let mut ids = Vec::with_capacity(new_variables.len());
        for (kind, value) in new_variables {
            ids.push(self.add_variable(kind, value)?);
        }
        for f in new_factors {
            self.add_factor(f)?;
        }
        let report = solver::solve(self, config)?;
        Ok((ids, report))
    }
}
