//! End-to-end run with plot emission: trajectory overlays (dead reckoning in
//! red, optimized in green, ground truth dashed) and the per-method online
//! relative pose error chart, written as plain SVG files under `plots/`.
//!
//! ```bash
//! cargo run --example plot_survey
//! ```

use farm_slam::config::Config;
use farm_slam::eval::{metrics, rope_points};
use farm_slam::frontend::MethodKind;
use farm_slam::motion::dr_trajectory;
use farm_slam::run::run_survey;
use farm_slam::sim::{default_farm, simulate, NoiseSpec, SurveyPlan};
use farm_slam::{svg, Point2, Pose2, VariableId};

fn main() {
    let dataset = simulate(&default_farm(), &SurveyPlan::default(), &NoiseSpec::default());
    let cfg = Config::default();
    std::fs::create_dir_all("plots").expect("mkdir plots");

    let dr = dr_trajectory(&dataset.m0, &dataset.odometry_deltas());
    let truth: Vec<Pose2> = dataset
        .ground_truth
        .as_ref()
        .expect("synthetic truth")
        .iter()
        .map(|s| s.pose)
        .collect();

    let mut orpe_series = Vec::new();
    for method in MethodKind::all() {
        let out = run_survey(&dataset, method, &cfg, None).expect("run");
        let record = &out.record;

        let n_poses = out.graph.count_variables_of(farm_slam::VariableKind::Pose);
        let optimized: Vec<Pose2> = (0..n_poses)
            .filter_map(|i| record.final_estimate.pose(VariableId::pose(i)))
            .collect();
        let buoys: Vec<Point2> = (0..dataset.farm.buoys.len())
            .filter_map(|k| record.final_estimate.point(VariableId::buoy(k)))
            .collect();
        let ropes: Vec<Point2> = rope_points(record)
            .expect("rope points")
            .into_values()
            .flatten()
            .collect();

        let overlay = svg::trajectory_overlay(
            &format!("{method} trajectory"),
            &dataset.farm,
            &dr,
            &optimized,
            Some(&truth),
            &buoys,
            &ropes,
        );
        let path = format!("plots/trajectory_{method}.svg");
        std::fs::write(&path, overlay).expect("write svg");
        println!("wrote {path}");

        let report = metrics(record, &dataset.farm).expect("metrics");
        orpe_series.push((method, report.orpe_series));
    }

    let chart = svg::orpe_chart("online relative pose error", &orpe_series);
    std::fs::write("plots/orpe.svg", chart).expect("write svg");
    println!("wrote plots/orpe.svg");
}
