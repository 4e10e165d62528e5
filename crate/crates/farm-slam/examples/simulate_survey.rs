//! Generate a synthetic farm survey and write it to disk.
//!
//! Produces `survey.jsonl` (farm header + time-ordered odometry/detection
//! events) and `truth.jsonl` (ground-truth trajectory), then prints what the
//! dataset contains.
//!
//! ```bash
//! cargo run --example simulate_survey
//! ```

use farm_slam::config::Config;
use farm_slam::io::write_dataset;
use farm_slam::sim::{default_farm, path_length, simulate, Event, NoiseSpec, SurveyPlan};
use farm_slam::sonar::TargetClass;
use std::path::Path;

fn main() {
    let farm = default_farm();
    let plan = SurveyPlan::default();
    let noise = NoiseSpec::default();

    println!(
        "farm: {} ropes x 26 m in two 13 m corridors, {} mooring buoys",
        farm.ropes.len(),
        farm.buoys.len()
    );
    println!(
        "plan: {} swaths at {:?} m lateral offset, {:.1} m/s, path {:.1} m",
        plan.swath_offsets.len(),
        plan.swath_offsets,
        plan.speed,
        path_length(&farm, &plan)
    );

    let dataset = simulate(&farm, &plan, &noise);
    let (mut n_odom, mut n_rope, mut n_buoy) = (0, 0, 0);
    for e in &dataset.events {
        match e {
            Event::Odometry(_) => n_odom += 1,
            Event::Detection(d) => match d.det.klass {
                TargetClass::Rope => n_rope += 1,
                TargetClass::Buoy => n_buoy += 1,
            },
        }
    }
    println!("events: {n_odom} odometry steps, {n_rope} rope detections, {n_buoy} buoy detections");

    let cfg = Config::default();
    write_dataset(
        &dataset,
        Path::new("survey.jsonl"),
        Some(Path::new("truth.jsonl")),
        &cfg.hash(),
    )
    .expect("write dataset");
    println!("wrote survey.jsonl and truth.jsonl (seed {})", noise.seed);
}
