//! Mapping and trajectory metrics from run artifacts: buoy RMSE against the
//! prior map, straightness of the mapped rope detections (total-least-squares
//! line fits), the online-vs-final relative pose error, and method
//! comparison tables.

use crate::config::Config;
use crate::frontend::{FarmModel, MethodKind};
use crate::geometry::{Point2, RangeBearing};
use crate::graph::{GraphEstimate, VariableId};
use crate::run::{run_survey, RunError, RunRecord};
use crate::sim::{simulate, NoiseSpec, SurveyPlan};
use crate::sonar::landmark_from_measurement;
use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum EvalError {
    #[error("buoy {0} missing from the final estimate")]
    MissingBuoy(usize),
    #[error("snapshot pose {0:?} missing from the final estimate")]
    MissingPose(VariableId),
}

/// RMS distance between the final buoy estimates and their prior means.
/// Buoy variable k corresponds to `farm.buoys[k]` (the order the frontend
/// seeded them in).
pub fn buoy_rmse(final_estimate: &GraphEstimate, farm: &FarmModel) -> Result<f64, EvalError> {
    let mut sum = 0.0;
    for (k, b) in farm.buoys.iter().enumerate() {
        let est = final_estimate
            .point(VariableId::buoy(k))
            .ok_or(EvalError::MissingBuoy(b.id))?;
        let dx = est.x - b.prior.mean.x;
        let dy = est.y - b.prior.mean.y;
        sum += dx * dx + dy * dy;
    }
    Ok((sum / farm.buoys.len() as f64).sqrt())
}

/// Total-least-squares line fit: returns the sum of squared perpendicular
/// residuals (the smallest eigenvalue of the centered scatter matrix).
fn tls_residual_ss(points: &[Point2]) -> f64 {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let dx = p.x - cx;
        let dy = p.y - cy;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // smallest eigenvalue of [[sxx, sxy], [sxy, syy]]
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    (tr / 2.0 - disc).max(0.0)
}

/// Per-rope line-fit diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RopeFit {
    pub rope_id: usize,
    pub points: usize,
    /// RMS perpendicular distance to the TLS line; `None` for < 2 points.
    pub rmse: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RopeLineRmse {
    /// Pooled RMS of perpendicular residuals over all fitted ropes.
    pub rmse: Option<f64>,
    pub per_rope: Vec<RopeFit>,
    /// Ropes skipped for having fewer than 2 points.
    pub skipped: Vec<usize>,
}

/// World-frame rope detection points of a run, grouped by physical rope.
///
/// The proposed method estimates one landmark per detection, so its final
/// landmark positions are used directly. The baselines keep no per-detection
/// landmarks; their logged raw detections are mapped through the final pose
/// estimates instead.
pub fn rope_points(record: &RunRecord) -> Result<BTreeMap<usize, Vec<Point2>>, EvalError> {
    let mut by_rope: BTreeMap<usize, Vec<Point2>> = BTreeMap::new();
    let zero = Matrix2::identity();
    for assoc in &record.rope_log {
        let point = match (record.method, assoc.landmark) {
            (MethodKind::Proposed, Some(lm)) => record
                .final_estimate
                .point(lm)
                .ok_or(EvalError::MissingPose(lm))?,
            _ => {
                let pose = record
                    .final_estimate
                    .pose(assoc.pose)
                    .ok_or(EvalError::MissingPose(assoc.pose))?;
                landmark_from_measurement(
                    &pose,
                    &RangeBearing::new(assoc.range, assoc.bearing, zero),
                )
            }
        };
        by_rope.entry(assoc.rope_id).or_default().push(point);
    }
    Ok(by_rope)
}

/// How well the mapped rope detections fit straight lines, pooled over all
/// ropes with at least two points.
pub fn rope_line_rmse(record: &RunRecord) -> Result<RopeLineRmse, EvalError> {
    let by_rope = rope_points(record)?;
    let mut per_rope = Vec::new();
    let mut skipped = Vec::new();
    let mut total_ss = 0.0;
    let mut total_n = 0usize;
    for (rope_id, pts) in &by_rope {
        if pts.len() < 2 {
            skipped.push(*rope_id);
            per_rope.push(RopeFit {
                rope_id: *rope_id,
                points: pts.len(),
                rmse: None,
            });
            continue;
        }
        let ss = tls_residual_ss(pts);
        per_rope.push(RopeFit {
            rope_id: *rope_id,
            points: pts.len(),
            rmse: Some((ss / pts.len() as f64).sqrt()),
        });
        total_ss += ss;
        total_n += pts.len();
    }
    Ok(RopeLineRmse {
        rmse: (total_n > 0).then(|| (total_ss / total_n as f64).sqrt()),
        per_rope,
        skipped,
    })
}

/// Online relative pose error: per snapshot, the positional distance between
/// the online estimate and the final estimate of the same pose variable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrpeResult {
    /// (t, positional error in meters) per snapshot.
    pub series: Vec<(f64, f64)>,
    pub rmse: f64,
    /// Heading error RMS, radians, reported separately from the positional
    /// error rather than mixed into meters.
    pub heading_rmse: f64,
}

pub fn orpe(record: &RunRecord) -> Result<OrpeResult, EvalError> {
    let mut series = Vec::with_capacity(record.snapshots.len());
    let mut sum = 0.0;
    let mut hsum = 0.0;
    for snap in &record.snapshots {
        let fin = record
            .final_estimate
            .pose(snap.pose)
            .ok_or(EvalError::MissingPose(snap.pose))?;
        let e = (snap.estimate.x - fin.x).hypot(snap.estimate.y - fin.y);
        let he = crate::geometry::wrap_angle(snap.estimate.theta - fin.theta);
        series.push((snap.t, e));
        sum += e * e;
        hsum += he * he;
    }
    let n = series.len().max(1) as f64;
    Ok(OrpeResult {
        series,
        rmse: (sum / n).sqrt(),
        heading_rmse: (hsum / n).sqrt(),
    })
}

/// The metrics of one run, in report form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: MethodKind,
    pub seed: u64,
    pub config_hash: String,
    /// Straightness of mapped rope detections; `None` when no rope had >= 2
    /// points (e.g. a detection-free dataset).
    pub rope_rmse: Option<f64>,
    pub buoy_rmse: Option<f64>,
    pub orpe_rmse: f64,
    pub orpe_heading_rmse: f64,
    pub orpe_series: Vec<(f64, f64)>,
    pub max_update_time: f64,
    pub total_time: f64,
    pub factor_count: usize,
    pub rope_fits: Vec<RopeFit>,
    pub buoy_accepted: usize,
    pub buoy_rejected: usize,
    pub rope_detections: usize,
}

/// Compute the full metrics report of one run against its farm.
pub fn metrics(record: &RunRecord, farm: &FarmModel) -> Result<MetricsReport, EvalError> {
    let rope = rope_line_rmse(record)?;
    let buoy = buoy_rmse(&record.final_estimate, farm)?;
    let o = orpe(record)?;
    Ok(MetricsReport {
        method: record.method,
        seed: record.seed,
        config_hash: record.config_hash.clone(),
        rope_rmse: rope.rmse,
        buoy_rmse: Some(buoy),
        orpe_rmse: o.rmse,
        orpe_heading_rmse: o.heading_rmse,
        orpe_series: o.series,
        max_update_time: record.max_update_secs,
        total_time: record.total_solver_secs,
        factor_count: record.factor_count,
        rope_fits: rope.per_rope,
        buoy_accepted: record.stats.buoy_accepted,
        buoy_rejected: record.stats.buoy_rejected,
        rope_detections: record.stats.rope_accepted,
    })
}

/// Side-by-side comparison of per-method metrics, renderable as a text table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: MethodKind,
    pub rope_rmse: Option<f64>,
    pub buoy_rmse: Option<f64>,
    pub orpe_rmse: Option<f64>,
    pub max_update_time: Option<f64>,
    pub total_time: Option<f64>,
    pub factor_count: Option<usize>,
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(x) => format!("{x:.digits$}"),
        None => "n/a".to_string(),
    }
}

impl std::fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:<22} | {:>9} | {:>9} | {:>9} | {:>12} | {:>10} | {:>8}",
            "Method", "Rope (m)", "Buoy (m)", "oRPE (m)", "Max upd (s)", "Total (s)", "Factors"
        )?;
        writeln!(f, "{}", "-".repeat(97))?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<22} | {:>9} | {:>9} | {:>9} | {:>12} | {:>10} | {:>8}",
                r.method.label(),
                fmt_opt(r.rope_rmse, 2),
                fmt_opt(r.buoy_rmse, 2),
                fmt_opt(r.orpe_rmse, 2),
                fmt_opt(r.max_update_time, 2),
                fmt_opt(r.total_time, 1),
                r.factor_count.map_or("n/a".into(), |c| c.to_string()),
            )?;
        }
        Ok(())
    }
}

/// Build a comparison table from per-method reports, ordered
/// buoy-only / shared / proposed like the reference layout.
pub fn compare_methods(reports: &BTreeMap<MethodKind, MetricsReport>) -> ComparisonTable {
    let order = [
        MethodKind::BaselineBuoyOnly,
        MethodKind::BaselineSharedRope,
        MethodKind::Proposed,
    ];
    let rows = order
        .iter()
        .filter_map(|m| reports.get(m))
        .map(|r| ComparisonRow {
            method: r.method,
            rope_rmse: r.rope_rmse,
            buoy_rmse: r.buoy_rmse,
            orpe_rmse: Some(r.orpe_rmse),
            max_update_time: Some(r.max_update_time),
            total_time: Some(r.total_time),
            factor_count: Some(r.factor_count),
        })
        .collect();
    ComparisonTable { rows }
}

/// Mean/stddev aggregate of one metric across seeds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub stddev: f64,
    pub n: usize,
}

pub fn aggregate(values: &[f64]) -> Aggregate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n.max(1) as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0)
    } else {
        0.0
    };
    Aggregate {
        mean,
        stddev: var.sqrt(),
        n,
    }
}

/// Multi-seed summary per method: mean/stddev of the headline metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedSummary {
    pub method: MethodKind,
    pub orpe_rmse: Aggregate,
    pub rope_rmse: Aggregate,
    pub buoy_rmse: Aggregate,
    pub seeds: usize,
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Run a seed x method matrix over synthetic surveys, in parallel across
/// pairs (each run owns an independent graph). Returns one metrics report
/// per pair, tagged with its seed.
pub fn seed_sweep(
    farm: &FarmModel,
    plan: &SurveyPlan,
    noise_base: &NoiseSpec,
    seeds: &[u64],
    methods: &[MethodKind],
    config: &Config,
) -> Result<Vec<(u64, MetricsReport)>, SweepError> {
    let pairs: Vec<(u64, MethodKind)> = seeds
        .iter()
        .flat_map(|s| methods.iter().map(move |m| (*s, *m)))
        .collect();
    pairs
        .par_iter()
        .map(|(seed, method)| {
            let noise = NoiseSpec {
                seed: *seed,
                ..noise_base.clone()
            };
            let ds = simulate(farm, plan, &noise);
            let out = run_survey(&ds, *method, config, None)?;
            let report = metrics(&out.record, &ds.farm)?;
            Ok((*seed, report))
        })
        .collect()
}

pub fn summarize_seeds(method: MethodKind, reports: &[MetricsReport]) -> SeedSummary {
    let orpes: Vec<f64> = reports.iter().map(|r| r.orpe_rmse).collect();
    let ropes: Vec<f64> = reports.iter().filter_map(|r| r.rope_rmse).collect();
    let buoys: Vec<f64> = reports.iter().filter_map(|r| r.buoy_rmse).collect();
    SeedSummary {
        method,
        orpe_rmse: aggregate(&orpes),
        rope_rmse: aggregate(&ropes),
        buoy_rmse: aggregate(&buoys),
        seeds: reports.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{FarmBuoy, Rope, RopeAssociation};
    use crate::geometry::{Gaussian2, Pose2};
    use crate::graph::Value;
    use crate::run::Snapshot;
    use approx::assert_relative_eq;

    fn farm2() -> FarmModel {
        let buoy = |id, x, y| FarmBuoy {
            id,
            prior: Gaussian2::isotropic(Point2::new(x, y), 0.5),
        };
        FarmModel {
            buoys: vec![
                buoy(0, 0.0, 0.0),
                buoy(1, 26.0, 0.0),
                buoy(2, 0.0, 13.0),
                buoy(3, 26.0, 13.0),
            ],
            ropes: vec![
                Rope { id: 0, buoy_a: 0, buoy_b: 1, depth: 1.5 },
                Rope { id: 1, buoy_a: 2, buoy_b: 3, depth: 1.5 },
            ],
        }
    }

    fn estimate_with_buoys(points: &[(f64, f64)]) -> GraphEstimate {
        let mut values = BTreeMap::new();
        for (k, (x, y)) in points.iter().enumerate() {
            values.insert(VariableId::buoy(k), Value::Point(Point2::new(*x, *y)));
        }
        GraphEstimate {
            values,
            chi2: 0.0,
            iterations: 0,
        }
    }

    #[test]
    fn buoy_rmse_examples() {
        let farm = farm2();
        let exact = estimate_with_buoys(&[(0.0, 0.0), (26.0, 0.0), (0.0, 13.0), (26.0, 13.0)]);
        assert_relative_eq!(buoy_rmse(&exact, &farm).unwrap(), 0.0);

        // one of four displaced by 2 m: sqrt(4/4) = 1
        let off = estimate_with_buoys(&[(0.0, 2.0), (26.0, 0.0), (0.0, 13.0), (26.0, 13.0)]);
        assert_relative_eq!(buoy_rmse(&off, &farm).unwrap(), 1.0, epsilon = 1e-12);

        let missing = estimate_with_buoys(&[(0.0, 0.0)]);
        assert!(matches!(
            buoy_rmse(&missing, &farm),
            Err(EvalError::MissingBuoy(_))
        ));
    }

    #[test]
    fn one_of_six_displaced_by_2m() {
        // sqrt(4/6)
        let farm = crate::sim::default_farm();
        let mut pts: Vec<(f64, f64)> = farm
            .buoys
            .iter()
            .map(|b| (b.prior.mean.x, b.prior.mean.y))
            .collect();
        pts[3].1 += 2.0;
        let est = estimate_with_buoys(&pts);
        assert_relative_eq!(
            buoy_rmse(&est, &farm).unwrap(),
            (4.0f64 / 6.0).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn tls_trivial_cases() {
        // collinear -> 0
        let pts: Vec<Point2> = (0..10).map(|i| Point2::new(i as f64, 2.0 * i as f64)).collect();
        assert!(tls_residual_ss(&pts) < 1e-18);

        // symmetric offsets +d, -d, +d, -d around a line (two per station so
        // the base line is the TLS optimum) -> rmse d
        let d = 0.35;
        let pts = vec![
            Point2::new(0.0, d),
            Point2::new(0.0, -d),
            Point2::new(1.0, d),
            Point2::new(1.0, -d),
        ];
        let rmse = (tls_residual_ss(&pts) / 4.0).sqrt();
        assert_relative_eq!(rmse, d, epsilon = 1e-9);
    }

    #[test]
    fn tls_matches_brute_force_eigen() {
        let mut state = 0xabcdu64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..100 {
            let pts: Vec<Point2> = (0..20)
                .map(|_| Point2::new(next() * 20.0, next() * 20.0))
                .collect();
            let ss = tls_residual_ss(&pts);
            // oracle: nalgebra symmetric eigendecomposition of the scatter
            let n = pts.len() as f64;
            let cx = pts.iter().map(|p| p.x).sum::<f64>() / n;
            let cy = pts.iter().map(|p| p.y).sum::<f64>() / n;
            let mut m = Matrix2::zeros();
            for p in &pts {
                let v = nalgebra::Vector2::new(p.x - cx, p.y - cy);
                m += v * v.transpose();
            }
            let eig = nalgebra::SymmetricEigen::new(m);
            let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            assert_relative_eq!(ss, min_eig.max(0.0), epsilon = 1e-8, max_relative = 1e-8);
        }
    }

    #[test]
    fn tls_invariant_under_rigid_motion() {
        let pts: Vec<Point2> = (0..15)
            .map(|i| Point2::new(i as f64, 0.3 * ((i * 7) % 5) as f64))
            .collect();
        let ss = tls_residual_ss(&pts);
        let (st, ct) = 0.7f64.sin_cos();
        let moved: Vec<Point2> = pts
            .iter()
            .map(|p| Point2::new(ct * p.x - st * p.y + 11.0, st * p.x + ct * p.y - 4.0))
            .collect();
        assert_relative_eq!(tls_residual_ss(&moved), ss, epsilon = 1e-8, max_relative = 1e-10);
    }

    fn record_with_snapshots(snaps: Vec<(Pose2, Pose2)>) -> RunRecord {
        // (online, final) pairs
        let mut values = BTreeMap::new();
        let mut snapshots = Vec::new();
        for (i, (online, fin)) in snaps.iter().enumerate() {
            let id = VariableId::pose(i);
            values.insert(id, Value::Pose(*fin));
            snapshots.push(Snapshot {
                t: i as f64,
                pose: id,
                estimate: *online,
                update_secs: 0.0,
                factor_count: 0,
            });
        }
        RunRecord {
            method: MethodKind::Proposed,
            seed: 0,
            dataset_hash: None,
            config_hash: String::new(),
            snapshots,
            final_estimate: GraphEstimate {
                values,
                chi2: 0.0,
                iterations: 0,
            },
            converged: true,
            stats: Default::default(),
            rope_log: vec![],
            buoy_log: vec![],
            max_update_secs: 0.0,
            total_solver_secs: 0.0,
            factor_count: 0,
        }
    }

    #[test]
    fn orpe_examples() {
        // online == final everywhere -> zeros
        let p = Pose2::new(1.0, 2.0, 0.3);
        let r = record_with_snapshots(vec![(p, p), (p, p)]);
        let o = orpe(&r).unwrap();
        assert_eq!(o.series.iter().filter(|(_, e)| *e != 0.0).count(), 0);
        assert_eq!(o.rmse, 0.0);

        // single snapshot offset by (3,4) -> series [5], rmse 5
        let online = Pose2::new(3.0, 4.0, 0.0);
        let r = record_with_snapshots(vec![(online, Pose2::identity())]);
        let o = orpe(&r).unwrap();
        assert_eq!(o.series.len(), 1);
        assert_relative_eq!(o.series[0].1, 5.0);
        assert_relative_eq!(o.rmse, 5.0);
    }

    #[test]
    fn orpe_matches_direct_recomputation() {
        let mut state = 99u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let pairs: Vec<(Pose2, Pose2)> = (0..50)
            .map(|_| {
                (
                    Pose2::new(next() * 10.0, next() * 10.0, next()),
                    Pose2::new(next() * 10.0, next() * 10.0, next()),
                )
            })
            .collect();
        let r = record_with_snapshots(pairs.clone());
        let o = orpe(&r).unwrap();
        let direct: f64 = (pairs
            .iter()
            .map(|(a, b)| (a.x - b.x).powi(2) + (a.y - b.y).powi(2))
            .sum::<f64>()
            / pairs.len() as f64)
            .sqrt();
        assert_relative_eq!(o.rmse, direct, epsilon = 1e-12);
    }

    #[test]
    fn missing_pose_is_reported() {
        let mut r = record_with_snapshots(vec![(Pose2::identity(), Pose2::identity())]);
        r.final_estimate.values.clear();
        assert!(matches!(orpe(&r), Err(EvalError::MissingPose(_))));
    }

    /// Rendering fixture: the table format itself, checked against frozen
    /// reference values.
    #[test]
    fn comparison_table_golden_rendering() {
        let mk = |method, rope: f64, buoy: f64, orpe: f64, upd: f64, tot: f64, n: usize| ComparisonRow {
            method,
            rope_rmse: Some(rope),
            buoy_rmse: Some(buoy),
            orpe_rmse: Some(orpe),
            max_update_time: Some(upd),
            total_time: Some(tot),
            factor_count: Some(n),
        };
        let table = ComparisonTable {
            rows: vec![
                mk(MethodKind::BaselineBuoyOnly, 1.23, 1.06, 2.68, 0.30, 15.0, 254),
                mk(MethodKind::BaselineSharedRope, 2.55, 0.95, 5.53, 0.26, 15.3, 322),
                mk(MethodKind::Proposed, 1.00, 1.14, 2.04, 0.29, 17.0, 381),
            ],
        };
        let rendered = table.to_string();
        let expected = "\
Method                 |  Rope (m) |  Buoy (m) |  oRPE (m) |  Max upd (s) |  Total (s) |  Factors
-------------------------------------------------------------------------------------------------
baseline_buoy_only     |      1.23 |      1.06 |      2.68 |         0.30 |       15.0 |      254
baseline_shared_rope   |      2.55 |      0.95 |      5.53 |         0.26 |       15.3 |      322
proposed               |      1.00 |      1.14 |      2.04 |         0.29 |       17.0 |      381
";
        assert_eq!(rendered, expected);
    }

    #[test]
    fn single_report_renders_one_row() {
        let mut reports = BTreeMap::new();
        reports.insert(
            MethodKind::Proposed,
            MetricsReport {
                method: MethodKind::Proposed,
                seed: 1,
                config_hash: String::new(),
                rope_rmse: Some(0.1),
                buoy_rmse: Some(0.2),
                orpe_rmse: 0.3,
                orpe_heading_rmse: 0.0,
                orpe_series: vec![],
                max_update_time: 0.0,
                total_time: 0.0,
                factor_count: 10,
                rope_fits: vec![],
                buoy_accepted: 0,
                buoy_rejected: 0,
                rope_detections: 0,
            },
        );
        let table = compare_methods(&reports);
        assert_eq!(table.rows.len(), 1);
    }

    #[test]
    fn aggregate_matches_independent_computation() {
        let vals = [1.0, 2.0, 3.0, 4.0, 10.0];
        let a = aggregate(&vals);
        assert_relative_eq!(a.mean, 4.0);
        // sample stddev
        let mean = 4.0;
        let var: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
        assert_relative_eq!(a.stddev, var.sqrt(), epsilon = 1e-12);
        assert_eq!(a.n, 5);
    }

    #[test]
    fn single_point_ropes_are_skipped_not_fatal() {
        let mut r = record_with_snapshots(vec![(Pose2::identity(), Pose2::identity())]);
        // rope 0 has two mapped detections, rope 1 only one
        for (i, (rope_id, y)) in [(0usize, 0.0), (0, 0.1), (1, 5.0)].iter().enumerate() {
            r.final_estimate
                .values
                .insert(VariableId::rope(i), Value::Point(Point2::new(i as f64, *y)));
            r.rope_log.push(RopeAssociation {
                t: i as f64,
                pose: VariableId::pose(0),
                rope_id: *rope_id,
                landmark: Some(VariableId::rope(i)),
                range: 1.0,
                bearing: 0.0,
                low_confidence: false,
            });
        }
        let fit = rope_line_rmse(&r).unwrap();
        assert_eq!(fit.skipped, vec![1]);
        assert!(fit.rmse.is_some(), "rope 0 still pools into the total");
        let fits: Vec<_> = fit.per_rope.iter().filter(|f| f.rope_id == 1).collect();
        assert_eq!(fits[0].points, 1);
        assert!(fits[0].rmse.is_none());
    }

    #[test]
    fn proposed_rope_points_use_landmarks() {
        let mut r = record_with_snapshots(vec![(Pose2::identity(), Pose2::identity())]);
        r.final_estimate
            .values
            .insert(VariableId::rope(0), Value::Point(Point2::new(5.0, 6.0)));
        r.rope_log.push(RopeAssociation {
            t: 0.0,
            pose: VariableId::pose(0),
            rope_id: 0,
            landmark: Some(VariableId::rope(0)),
            range: 1.0,
            bearing: 0.0,
            low_confidence: false,
        });
        let pts = rope_points(&r).unwrap();
        assert_eq!(pts[&0][0], Point2::new(5.0, 6.0));

        // baseline: same log maps the measurement through the final pose
        r.method = MethodKind::BaselineBuoyOnly;
        let pts = rope_points(&r).unwrap();
        assert_eq!(pts[&0][0], Point2::new(1.0, 0.0));
    }
}
