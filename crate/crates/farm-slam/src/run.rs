//! Survey replay: feed a time-ordered event stream through the frontend and
//! the incremental solver, snapshotting the online estimate after every
//! update.
//!
//! Replay semantics: events are processed strictly in time order. Every
//! odometry event creates a new pose node (initialized by dead-reckoning from
//! the current estimate), adds the odometry factor and triggers one
//! incremental update; the online estimate of the newest pose is snapshotted
//! together with the update wall time and the factor count. Detections attach
//! to the nearest earlier pose as they arrive; their factors enter the graph
//! immediately and are absorbed by the next update.

use crate::config::Config;
use crate::frontend::{
    BuoyAssociation, FarmModel, Frontend, FrontendError, FrontendStats, MethodKind,
    RopeAssociation,
};
use crate::geometry::{OdometryDelta, Pose2};
use crate::graph::{Factor, FactorGraph, GraphError, GraphEstimate, Value, VariableId};
use crate::io::DataError;
use crate::motion::propagate;
use crate::sim::{Event, SurveyDataset};
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error("solver failure at event {event_index} (t = {t}): {source}")]
    Solver {
        event_index: usize,
        t: f64,
        #[source]
        source: GraphError,
    },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Online estimate snapshot taken right after one incremental update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    /// Newest pose variable at snapshot time.
    pub pose: VariableId,
    /// Its online estimate.
    pub estimate: Pose2,
    pub update_secs: f64,
    pub factor_count: usize,
}

/// Everything a run produces, sufficient for evaluation and replay checks.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub method: MethodKind,
    pub seed: u64,
    pub dataset_hash: Option<String>,
    pub config_hash: String,
    pub snapshots: Vec<Snapshot>,
    pub final_estimate: GraphEstimate,
    pub converged: bool,
    pub stats: FrontendStats,
    pub rope_log: Vec<RopeAssociation>,
    pub buoy_log: Vec<BuoyAssociation>,
    pub max_update_secs: f64,
    pub total_solver_secs: f64,
    pub factor_count: usize,
}

/// A run plus the artifacts needed by offline checks: the completed graph
/// and the cold initial values every variable was first created with.
#[derive(Debug)]
pub struct RunOutput {
    pub record: RunRecord,
    pub graph: FactorGraph,
    pub initial_values: BTreeMap<VariableId, Value>,
}

/// Compose two body-frame odometry increments, propagating their covariances
/// through the composition Jacobians. Used when decimating pose nodes.
pub fn compose_deltas(a: &OdometryDelta, b: &OdometryDelta) -> OdometryDelta {
    let pa = a.as_pose();
    let pb = b.as_pose();
    let c = pa.compose(&pb);
    let (sa, ca) = pa.theta.sin_cos();
    let j_a = Matrix3::new(
        1.0, 0.0, -sa * pb.x - ca * pb.y, //
        0.0, 1.0, ca * pb.x - sa * pb.y, //
        0.0, 0.0, 1.0,
    );
    let j_b = Matrix3::new(ca, -sa, 0.0, sa, ca, 0.0, 0.0, 0.0, 1.0);
    let cov = j_a * a.cov * j_a.transpose() + j_b * b.cov * j_b.transpose();
    OdometryDelta::new(c.x, c.y, c.theta, cov)
}

/// Replay a dataset under one method. The graph is seeded with the initial
/// pose prior and the buoy prior map, then events stream through it.
pub fn run_survey(
    dataset: &SurveyDataset,
    method: MethodKind,
    config: &Config,
    dataset_hash: Option<String>,
) -> Result<RunOutput, RunError> {
    let solver_cfg = config.solver_config();
    let update_cfg = config.update_solver_config();
    let mut graph = FactorGraph::new();
    let mut initial_values = BTreeMap::new();

    // initial pose anchored by the ship-position prior
    let p0 = graph.add_pose_variable(dataset.m0);
    initial_values.insert(p0, Value::Pose(dataset.m0));
    graph
        .add_factor(Factor::PosePrior {
            pose: p0,
            mean: dataset.m0,
            cov: config.sigma0(),
        })
        .map_err(|e| RunError::Solver {
            event_index: 0,
            t: 0.0,
            source: e,
        })?;

    // buoy prior map, optionally overriding the per-buoy sigma
    let farm = apply_gamma_override(&dataset.farm, config.priors.gamma_sigma);
    let mut frontend = Frontend::new(method, farm, config.frontend_config(), &mut graph)?;
    for b in &frontend.farm.buoys {
        let var = frontend.buoy_variable(b.id).expect("seeded by Frontend::new");
        initial_values.insert(var, Value::Point(b.prior.mean));
    }

    // initial solve so marginals exist for the first detections
    graph
        .solve_batch(&solver_cfg)
        .map_err(|e| RunError::Solver {
            event_index: 0,
            t: 0.0,
            source: e,
        })?;

    let mut last_pose = p0;
    let mut snapshots: Vec<Snapshot> = Vec::new();
    let mut max_update = 0.0f64;
    let mut total_update = 0.0f64;
    let mut dirty = false;
    let mut pending: Option<OdometryDelta> = None;
    let mut pending_count = 0usize;
    let decimation = config.run.pose_decimation.max(1);

    let do_update = |graph: &mut FactorGraph,
                         t: f64,
                         pose: VariableId,
                         snapshots: &mut Vec<Snapshot>,
                         event_index: usize|
     -> Result<(bool, f64), RunError> {
        let start = Instant::now();
        let report = graph
            .solve_batch(&update_cfg)
            .map_err(|e| RunError::Solver { event_index, t, source: e })?;
        let secs = start.elapsed().as_secs_f64();
        snapshots.push(Snapshot {
            t,
            pose,
            estimate: report.estimate.pose(pose).expect("pose in estimate"),
            update_secs: secs,
            factor_count: graph.factor_count(),
        });
        Ok((report.converged, secs))
    };

    for (idx, event) in dataset.events.iter().enumerate() {
        match event {
            Event::Odometry(o) => {
                let merged = match pending.take() {
                    Some(acc) => compose_deltas(&acc, &o.delta),
                    None => o.delta,
                };
                pending_count += 1;
                if pending_count < decimation {
                    pending = Some(merged);
                    continue;
                }
                pending_count = 0;

                let prev_est = graph.pose_value(last_pose).expect("pose exists");
                let init = propagate(&prev_est, &merged);
                let new_pose = graph.add_pose_variable(init);
                initial_values.insert(new_pose, Value::Pose(init));
                graph
                    .add_factor(Factor::Odometry {
                        from: last_pose,
                        to: new_pose,
                        delta: merged.as_pose(),
                        cov: merged.cov,
                    })
                    .map_err(|e| RunError::Solver {
                        event_index: idx,
                        t: o.t,
                        source: e,
                    })?;
                last_pose = new_pose;

                let (_, secs) = do_update(&mut graph, o.t, new_pose, &mut snapshots, idx)?;
                max_update = max_update.max(secs);
                total_update += secs;
                dirty = false;
            }
            Event::Detection(d) => {
                let emission = frontend.process_detection(&mut graph, last_pose, &d.det)?;
                if !matches!(emission, crate::frontend::Emission::None) {
                    // record cold initials of any landmark created just now
                    if let crate::frontend::Emission::Added { new_variables, .. } = &emission {
                        for v in new_variables {
                            if let Some(val) = graph.value(*v) {
                                initial_values.insert(*v, val);
                            }
                        }
                    }
                    dirty = true;
                }
            }
        }
    }

    // flush a partial decimation window and absorb trailing detections
    if let Some(acc) = pending.take() {
        let prev_est = graph.pose_value(last_pose).expect("pose exists");
        let init = propagate(&prev_est, &acc);
        let new_pose = graph.add_pose_variable(init);
        initial_values.insert(new_pose, Value::Pose(init));
        graph
            .add_factor(Factor::Odometry {
                from: last_pose,
                to: new_pose,
                delta: acc.as_pose(),
                cov: acc.cov,
            })
            .map_err(|e| RunError::Solver {
                event_index: dataset.events.len(),
                t: snapshots.last().map_or(0.0, |s| s.t),
                source: e,
            })?;
        last_pose = new_pose;
        dirty = true;
    }
    if dirty {
        let t = dataset.events.last().map_or(0.0, |e| e.t());
        let (_, secs) = do_update(
            &mut graph,
            t,
            last_pose,
            &mut snapshots,
            dataset.events.len(),
        )?;
        max_update = max_update.max(secs);
        total_update += secs;
    }

    let final_report = graph
        .solve_batch(&solver_cfg)
        .map_err(|e| RunError::Solver {
            event_index: dataset.events.len(),
            t: snapshots.last().map_or(0.0, |s| s.t),
            source: e,
        })?;

    let record = RunRecord {
        method,
        seed: dataset.seed,
        dataset_hash,
        config_hash: config.hash(),
        snapshots,
        final_estimate: final_report.estimate,
        converged: final_report.converged,
        stats: frontend.stats,
        rope_log: frontend.rope_log.clone(),
        buoy_log: frontend.buoy_log.clone(),
        max_update_secs: max_update,
        total_solver_secs: total_update,
        factor_count: graph.factor_count(),
    };

    Ok(RunOutput {
        record,
        graph,
        initial_values,
    })
}

fn apply_gamma_override(farm: &FarmModel, gamma_sigma: Option<f64>) -> FarmModel {
    match gamma_sigma {
        None => farm.clone(),
        Some(sigma) => {
            let mut f = farm.clone();
            for b in &mut f.buoys {
                b.prior = crate::geometry::Gaussian2::isotropic(b.prior.mean, sigma);
            }
            f
        }
    }
}

// --- serialization of run records ---------------------------------------

/// Flat serde form of a [`RunRecord`] (estimates keyed by variable).
#[derive(Debug, Serialize, Deserialize)]
pub struct RunRecordFile {
    pub method: MethodKind,
    pub seed: u64,
    pub dataset_hash: Option<String>,
    pub config_hash: String,
    pub chi2: f64,
    pub iterations: usize,
    pub converged: bool,
    pub snapshots: Vec<Snapshot>,
    pub final_values: Vec<(VariableId, Value)>,
    pub stats: FrontendStats,
    pub rope_log: Vec<RopeAssociation>,
    pub buoy_log: Vec<BuoyAssociation>,
    pub max_update_secs: f64,
    pub total_solver_secs: f64,
    pub factor_count: usize,
}

impl From<&RunRecord> for RunRecordFile {
    fn from(r: &RunRecord) -> Self {
        Self {
            method: r.method,
            seed: r.seed,
            dataset_hash: r.dataset_hash.clone(),
            config_hash: r.config_hash.clone(),
            chi2: r.final_estimate.chi2,
            iterations: r.final_estimate.iterations,
            converged: r.converged,
            snapshots: r.snapshots.clone(),
            final_values: r.final_estimate.values.iter().map(|(k, v)| (*k, *v)).collect(),
            stats: r.stats,
            rope_log: r.rope_log.clone(),
            buoy_log: r.buoy_log.clone(),
            max_update_secs: r.max_update_secs,
            total_solver_secs: r.total_solver_secs,
            factor_count: r.factor_count,
        }
    }
}

impl From<RunRecordFile> for RunRecord {
    fn from(f: RunRecordFile) -> Self {
        Self {
            method: f.method,
            seed: f.seed,
            dataset_hash: f.dataset_hash,
            config_hash: f.config_hash,
            snapshots: f.snapshots,
            final_estimate: GraphEstimate {
                values: f.final_values.into_iter().collect(),
                chi2: f.chi2,
                iterations: f.iterations,
            },
            converged: f.converged,
            stats: f.stats,
            rope_log: f.rope_log,
            buoy_log: f.buoy_log,
            max_update_secs: f.max_update_secs,
            total_solver_secs: f.total_solver_secs,
            factor_count: f.factor_count,
        }
    }
}
