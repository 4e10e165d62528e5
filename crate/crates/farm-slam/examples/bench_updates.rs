//! Incremental update timing across graph sizes.
//!
//! Sweeps survey speed (slower survey = more pose nodes and detections =
//! bigger graph) and reports per-update latency plus the fraction of survey
//! time spent solving. Same sweep as `farm-slam bench`.
//!
//! ```bash
//! cargo run --release --example bench_updates
//! ```

use farm_slam::config::Config;
use farm_slam::frontend::MethodKind;
use farm_slam::run::run_survey;
use farm_slam::sim::{default_farm, simulate};

fn main() {
    let farm = default_farm();
    println!(
        "{:>6} | {:>8} | {:>7} | {:>12} | {:>14} | {:>11}",
        "speed", "duration", "factors", "max upd (ms)", "mean upd (ms)", "utilization"
    );
    println!("{}", "-".repeat(74));
    for speed in [2.0, 1.4, 1.0, 0.7] {
        let mut cfg = Config::default();
        cfg.sim.speed = speed;
        let dataset = simulate(&farm, &cfg.survey_plan(), &cfg.noise_spec());
        let duration = dataset.events.last().map_or(0.0, |e| e.t());

        let out = run_survey(&dataset, MethodKind::Proposed, &cfg, None).expect("run");
        let r = &out.record;
        let mean_upd = r.total_solver_secs / r.snapshots.len().max(1) as f64;
        println!(
            "{:>6.2} | {:>7.0}s | {:>7} | {:>12.2} | {:>14.2} | {:>10.2}%",
            speed,
            duration,
            r.factor_count,
            r.max_update_secs * 1e3,
            mean_upd * 1e3,
            100.0 * r.total_solver_secs / duration.max(1e-9)
        );
    }
}
