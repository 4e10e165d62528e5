//! Run the per-detection rope-landmark SLAM method over a synthetic survey
//! and print its mapping/trajectory metrics.
//!
//! The survey is replayed event by event: every odometry step creates a pose
//! node and triggers one incremental solver update; each sonar detection is
//! associated and becomes a landmark observation (plus, for rope detections,
//! a brand-new landmark with its sliding prior).
//!
//! ```bash
//! cargo run --example run_slam
//! ```

use farm_slam::config::Config;
use farm_slam::eval::metrics;
use farm_slam::frontend::MethodKind;
use farm_slam::run::run_survey;
use farm_slam::sim::{default_farm, simulate, NoiseSpec, SurveyPlan};

fn main() {
    let farm = default_farm();
    let dataset = simulate(&farm, &SurveyPlan::default(), &NoiseSpec::default());
    let cfg = Config::default();

    let out = run_survey(&dataset, MethodKind::Proposed, &cfg, None).expect("run");
    let r = &out.record;
    println!(
        "graph: {} factors over {} variables, final chi2 {:.1}, converged: {}",
        r.factor_count,
        out.graph.variable_count(),
        r.final_estimate.chi2,
        r.converged
    );
    println!(
        "associations: {} buoy obs accepted ({} gated out), {} rope landmarks created",
        r.stats.buoy_accepted, r.stats.buoy_rejected, r.stats.rope_accepted
    );
    println!(
        "timing: max update {:.1} ms, solver total {:.2} s over {} updates",
        r.max_update_secs * 1e3,
        r.total_solver_secs,
        r.snapshots.len()
    );

    let report = metrics(r, &dataset.farm).expect("metrics");
    println!(
        "metrics: rope line RMSE {:.3} m, buoy RMSE {:.3} m, oRPE RMSE {:.3} m (heading {:.2} deg)",
        report.rope_rmse.unwrap_or(f64::NAN),
        report.buoy_rmse.unwrap_or(f64::NAN),
        report.orpe_rmse,
        report.orpe_heading_rmse.to_degrees()
    );
}
