//! Batch and incremental solving of the graph, plus marginal covariances.
//!
//! The solver is Levenberg-Marquardt on the stacked whitened system. Each
//! outer iteration linearizes every factor at the current values, assembles
//! the block-sparse normal equations, and tries damped steps until one
//! decreases chi²; the damping multiplies the diagonal (Marquardt scaling).
//! Convergence is declared when an accepted step decreases chi² by less than
//! `rel_tolerance` relative to the previous value.
//!
//! Incremental updates reuse exactly this engine warm-started from the
//! current solution, which makes them cheap (usually a single accepted step)
//! while keeping the estimate identical to a batch solve of the same graph.

use super::factors;
use super::linalg::{BlockCholesky, BlockSpdMatrix, BlockStructure};
use super::{FactorGraph, GraphError, Value, VariableId, VariableKind, VariableStore};
use crate::geometry::wrap_angle;
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

/// Levenberg-Marquardt schedule and stopping controls.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stop when an accepted step improves chi² by less than this fraction.
    pub rel_tolerance: f64,
    /// Also require the accepted step itself to be this small (inf-norm over
    /// all local coordinates). Without it, solutions stop anywhere inside the
    /// nearly-flat along-rope valleys that the sliding priors create.
    pub step_tolerance: f64,
    pub lambda_init: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            rel_tolerance: 1e-9,
            step_tolerance: 1e-9,
            lambda_init: 1e-4,
            lambda_up: 10.0,
            lambda_down: 10.0,
            lambda_min: 1e-12,
            lambda_max: 1e10,
        }
    }
}

/// Solution snapshot: every variable value, the final chi², and the number of
/// accepted iterations it took to get there.
#[derive(Debug, Clone)]
pub struct GraphEstimate {
    pub values: BTreeMap<VariableId, Value>,
    pub chi2: f64,
    pub iterations: usize,
}

impl GraphEstimate {
    pub fn pose(&self, id: VariableId) -> Option<crate::geometry::Pose2> {
        self.values.get(&id).and_then(|v| v.as_pose())
    }
    pub fn point(&self, id: VariableId) -> Option<crate::geometry::Point2> {
        self.values.get(&id).and_then(|v| v.as_point())
    }
}

/// Outcome of a solve. `converged` is false when the damping schedule ran out
/// before the relative tolerance was met; the estimate then carries the last
/// (best) iterate rather than being an error.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub estimate: GraphEstimate,
    pub converged: bool,
    /// Chi² after the initial evaluation and after every accepted step;
    /// non-increasing by construction.
    pub chi2_history: Vec<f64>,
}

/// Variable elimination order, chosen to keep fill-in low for the factor
/// patterns this graph actually produces:
///
/// 1. landmarks constrained by at most one observation (each per-detection
///    rope landmark): eliminating a degree-1 landmark adds no fill at all;
/// 2. poses in time order: the odometry chain is banded;
/// 3. landmarks observed from many poses (buoys, shared rope landmarks):
///    eliminating these early would clique together every observing pose, so
///    they go last, where the handful of trailing columns is cheap.
#[derive(Debug, Clone)]
pub(crate) struct Ordering {
    pub ids: Vec<VariableId>,
    pub structure: BlockStructure,
    pose_block: Vec<usize>,
    buoy_block: Vec<usize>,
    rope_block: Vec<usize>,
}

impl Ordering {
    pub fn build(values: &VariableStore, factors: &[super::Factor]) -> Self {
        let mut buoy_deg = vec![0usize; values.buoys.len()];
        let mut rope_deg = vec![0usize; values.ropes.len()];
        for f in factors {
            if f.is_prior() {
                continue;
            }
            for id in f.connected() {
                match id.kind {
                    VariableKind::Buoy => buoy_deg[id.index] += 1,
                    VariableKind::Rope => rope_deg[id.index] += 1,
                    VariableKind::Pose => {}
                }
            }
        }

        let n = values.len();
        let mut ids = Vec::with_capacity(n);
        for (i, &d) in rope_deg.iter().enumerate() {
            if d <= 1 {
                ids.push(VariableId::rope(i));
            }
        }
        for (i, &d) in buoy_deg.iter().enumerate() {
            if d <= 1 {
                ids.push(VariableId::buoy(i));
            }
        }
        for i in 0..values.poses.len() {
            ids.push(VariableId::pose(i));
        }
        for (i, &d) in rope_deg.iter().enumerate() {
            if d > 1 {
                ids.push(VariableId::rope(i));
            }
        }
        for (i, &d) in buoy_deg.iter().enumerate() {
            if d > 1 {
                ids.push(VariableId::buoy(i));
            }
        }

        let mut pose_block = vec![usize::MAX; values.poses.len()];
        let mut buoy_block = vec![usize::MAX; values.buoys.len()];
        let mut rope_block = vec![usize::MAX; values.ropes.len()];
        let mut dims = Vec::with_capacity(n);
        for (b, id) in ids.iter().enumerate() {
            dims.push(id.kind.dim());
            match id.kind {
                VariableKind::Pose => pose_block[id.index] = b,
                VariableKind::Buoy => buoy_block[id.index] = b,
                VariableKind::Rope => rope_block[id.index] = b,
            }
        }
        Self {
            ids,
            structure: BlockStructure::new(dims),
            pose_block,
            buoy_block,
            rope_block,
        }
    }

    pub fn block_of(&self, id: VariableId) -> usize {
        match id.kind {
            VariableKind::Pose => self.pose_block[id.index],
            VariableKind::Buoy => self.buoy_block[id.index],
            VariableKind::Rope => self.rope_block[id.index],
        }
    }
}

/// Assemble the Gauss-Newton normal equations `H δ = -g` at `values`.
fn assemble(
    factors: &[super::Factor],
    values: &VariableStore,
    ordering: &Ordering,
) -> Result<(BlockSpdMatrix, DVector<f64>), GraphError> {
    let mut h = BlockSpdMatrix::new(ordering.structure.clone());
    let mut rhs = DVector::zeros(ordering.structure.total_dim);

    for f in factors {
        let lin = factors_linearize(f, values)?;
        let blocks: Vec<usize> = lin.vars.iter().map(|v| ordering.block_of(*v)).collect();
        for (a, &ba) in blocks.iter().enumerate() {
            let ja = &lin.jacobians[a];
            // gradient contribution: rhs -= Jᵀ r
            let grad = ja.transpose() * &lin.residual;
            let off = ordering.structure.offsets[ba];
            let dim = ordering.structure.dims[ba];
            let mut seg = rhs.rows_mut(off, dim);
            seg -= grad;
            for (b, &bb) in blocks.iter().enumerate() {
                if bb > ba {
                    continue; // lower triangle only
                }
                let block = ja.transpose() * &lin.jacobians[b];
                h.add_block(ba, bb, &block);
            }
        }
    }
    Ok((h, rhs))
}

fn factors_linearize(
    f: &super::Factor,
    values: &VariableStore,
) -> Result<super::Linearization, GraphError> {
    factors::linearize(f, values)
}

/// Apply a local step to a copy of the values. Pose headings are wrapped.
fn apply_step(values: &VariableStore, ordering: &Ordering, delta: &DVector<f64>) -> VariableStore {
    let mut out = values.clone();
    for (b, id) in ordering.ids.iter().enumerate() {
        let off = ordering.structure.offsets[b];
        match id.kind {
            VariableKind::Pose => {
                let p = &mut out.poses[id.index];
                p.x += delta[off];
                p.y += delta[off + 1];
                p.theta = wrap_angle(p.theta + delta[off + 2]);
            }
            VariableKind::Buoy => {
                let p = &mut out.buoys[id.index];
                p.x += delta[off];
                p.y += delta[off + 1];
            }
            VariableKind::Rope => {
                let p = &mut out.ropes[id.index];
                p.x += delta[off];
                p.y += delta[off + 1];
            }
        }
    }
    out
}

/// Every variable must live in a factor-connected component that contains at
/// least one prior; otherwise the normal equations are rank deficient. This
/// is a modeling error and is surfaced instead of being regularized away.
fn check_anchoring(graph: &FactorGraph) -> Result<(), GraphError> {
    let ordering = Ordering::build(&graph.values, &graph.factors);
    let n = ordering.ids.len();
    if n == 0 {
        return Ok(());
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    let mut anchored = vec![false; n];
    for f in &graph.factors {
        let blocks: Vec<usize> = f.connected().iter().map(|v| ordering.block_of(*v)).collect();
        for w in blocks.windows(2) {
            let (ra, rb) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if ra != rb {
                parent[ra] = rb;
            }
        }
        if f.is_prior() {
            anchored[blocks[0]] = true;
        }
    }
    // propagate anchor flags to roots
    let mut root_anchored = vec![false; n];
    for b in 0..n {
        if anchored[b] {
            let r = find(&mut parent, b);
            root_anchored[r] = true;
        }
    }
    for b in 0..n {
        let r = find(&mut parent, b);
        if !root_anchored[r] {
            return Err(GraphError::SingularSystem(format!(
                "variable {:?} is not anchored by any prior",
                ordering.ids[b]
            )));
        }
    }
    Ok(())
}

const CHI2_ABS_FLOOR: f64 = 1e-20;
const DAMPING_FLOOR: f64 = 1e-12;

pub(crate) fn solve(graph: &mut FactorGraph, config: &SolverConfig) -> Result<SolveReport, GraphError> {
    check_anchoring(graph)?;
    graph.marginal_cache = None;

    let ordering = Ordering::build(&graph.values, &graph.factors);
    let mut chi2 = factors::chi2_of(&graph.factors, &graph.values)?;
    let mut history = vec![chi2];
    let mut lambda = config.lambda_init;
    let mut iterations = 0;
    let mut converged = chi2 <= CHI2_ABS_FLOOR || graph.factors.is_empty();

    while !converged && iterations < config.max_iterations {
        let (h, rhs) = assemble(&graph.factors, &graph.values, &ordering)?;
        let mut accepted = false;

        while lambda <= config.lambda_max {
            let chol = match h.cholesky_damped(lambda, DAMPING_FLOOR) {
                Ok(c) => c,
                Err(block) => {
                    // With positive damping this only happens for a
                    // structurally empty diagonal, i.e. missing constraints.
                    return Err(GraphError::SingularSystem(format!(
                        "normal equations not positive definite at {:?}",
                        ordering.ids[block]
                    )));
                }
            };
            let delta = chol.solve(&rhs);
            let candidate = apply_step(&graph.values, &ordering, &delta);
            let new_chi2 = factors::chi2_of(&graph.factors, &candidate)?;

            if new_chi2 <= chi2 {
                let improvement = chi2 - new_chi2;
                let step_norm = delta.amax();
                graph.values = candidate;
                lambda = (lambda / config.lambda_down).max(config.lambda_min);
                iterations += 1;
                history.push(new_chi2);
                if new_chi2 <= CHI2_ABS_FLOOR
                    || (improvement <= config.rel_tolerance * chi2
                        && step_norm <= config.step_tolerance)
                {
                    converged = true;
                }
                chi2 = new_chi2;
                accepted = true;
                break;
            }
            lambda *= config.lambda_up;
        }

        if !accepted {
            // Damping exhausted without an acceptable step: report the last
            // iterate as non-converged rather than failing.
            break;
        }
    }

    Ok(SolveReport {
        estimate: GraphEstimate {
            values: graph.values_snapshot(),
            chi2,
            iterations,
        },
        converged,
        chi2_history: history,
    })
}

/// Cached undamped factorization of the information matrix at the current
/// linearization point, reused across marginal queries.
#[derive(Debug, Clone)]
pub(crate) struct MarginalCache {
    ordering: Ordering,
    chol: BlockCholesky,
}

pub(crate) fn marginal_covariance(
    graph: &mut FactorGraph,
    id: VariableId,
) -> Result<DMatrix<f64>, GraphError> {
    if !graph.values.contains(id) {
        return Err(GraphError::UnknownVariable(id));
    }
    if graph.marginal_cache.is_none() {
        check_anchoring(graph)?;
        let ordering = Ordering::build(&graph.values, &graph.factors);
        let (h, _) = assemble(&graph.factors, &graph.values, &ordering)?;
        let chol = h.cholesky().map_err(|block| {
            GraphError::SingularSystem(format!(
                "information matrix singular at {:?}",
                ordering.ids[block]
            ))
        })?;
        graph.marginal_cache = Some(MarginalCache { ordering, chol });
    }
    let cache = graph.marginal_cache.as_ref().expect("cache populated above");
    let block = cache.ordering.block_of(id);
    let off = cache.ordering.structure.offsets[block];
    let dim = cache.ordering.structure.dims[block];
    let total = cache.ordering.structure.total_dim;

    let mut cov = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        let mut e = DVector::zeros(total);
        e[off + k] = 1.0;
        let col = cache.chol.solve(&e);
        for r in 0..dim {
            cov[(r, k)] = col[off + r];
        }
    }
    // enforce exact symmetry against round-off
    let cov_t = cov.transpose();
    Ok((cov + cov_t) * 0.5)
}
