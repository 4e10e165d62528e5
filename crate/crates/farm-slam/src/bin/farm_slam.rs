//! Command-line pipeline: simulate a survey, run a SLAM method over it,
//! evaluate run records into metrics and plots, and benchmark update times.
//!
//! Exit codes: 0 ok, 2 config error, 3 data error, 4 solver failure.

use clap::{Args, Parser, Subcommand};
use farm_slam::config::{Config, ConfigError};
use farm_slam::eval::{compare_methods, metrics, MetricsReport};
use farm_slam::frontend::MethodKind;
use farm_slam::graph::VariableKind;
use farm_slam::io::{self, DataError};
use farm_slam::motion::dr_trajectory;
use farm_slam::run::{run_survey, RunError, RunRecord, RunRecordFile};
use farm_slam::sim::{default_farm_with_sigma, path_length, simulate, SurveyDataset};
use farm_slam::{svg, Point2, Pose2};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Output directory override; relative output paths are resolved against it.
const OUT_DIR_ENV: &str = "FARM_SLAM_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "farm-slam",
    about = "Side-scan-sonar graph SLAM for rope-and-buoy line farms",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML configuration file; omitted sections use built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set sim.speed=1.4 (repeatable).
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    /// Shorthand for --set run.seed=N.
    #[arg(long)]
    seed: Option<u64>,
    /// Shorthand for --set run.method=M.
    #[arg(long)]
    method: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic survey dataset (plus ground truth).
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Dataset output path (line-delimited JSON).
        #[arg(long, default_value = "survey.jsonl")]
        out: PathBuf,
        /// Ground-truth output path.
        #[arg(long, default_value = "truth.jsonl")]
        truth_out: PathBuf,
    },
    /// Replay a dataset through one SLAM method and write a run record.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dataset: PathBuf,
        /// Run record output path.
        #[arg(long, default_value = "run.json")]
        out: PathBuf,
    },
    /// Compute metrics and plots from run records.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dataset: PathBuf,
        /// Ground-truth file matching the dataset (optional).
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Run record(s) to evaluate (repeatable).
        #[arg(long = "run", required = true)]
        runs: Vec<PathBuf>,
        /// Directory for metrics JSON and SVG plots.
        #[arg(long, default_value = "eval-out")]
        out_dir: PathBuf,
    },
    /// Timing sweep over growing factor-graph sizes.
    Bench {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Survey speeds to sweep (each produces a different graph size).
        #[arg(long, value_delimiter = ',', default_value = "2.0,1.4,1.0,0.7")]
        speeds: Vec<f64>,
    },
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Data(String),
    Solver(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Solver(_) => 4,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Solver(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}
impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}
impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Data(d) => CliError::Data(d.to_string()),
            other => CliError::Solver(other.to_string()),
        }
    }
}
impl From<farm_slam::eval::EvalError> for CliError {
    fn from(e: farm_slam::eval::EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

fn out_path(p: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if p.is_relative() => PathBuf::from(dir).join(p),
        _ => p.to_path_buf(),
    }
}

/// Load the config file, then apply --set/--seed/--method overrides on the
/// TOML document before the typed parse, so any config key can be overridden.
fn load_config(args: &ConfigArgs) -> Result<Config, CliError> {
    let mut doc: toml::Value = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            text.parse()
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => toml::Value::Table(Default::default()),
    };

    let mut sets = args.set.clone();
    if let Some(seed) = args.seed {
        sets.push(format!("run.seed={seed}"));
    }
    if let Some(method) = &args.method {
        sets.push(format!("run.method=\"{method}\""));
    }
    for set in &sets {
        let (key, value) = set
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects SECTION.KEY=VALUE, got '{set}'")))?;
        let parsed: toml::Value = format!("v = {value}")
            .parse::<toml::Value>()
            .ok()
            .and_then(|t| t.get("v").cloned())
            .or_else(|| {
                // bare strings: --set run.method=proposed
                Some(toml::Value::String(value.to_string()))
            })
            .expect("value parse always yields something");
        let mut node = &mut doc;
        let parts: Vec<&str> = key.split('.').collect();
        for part in &parts[..parts.len() - 1] {
            node = node
                .as_table_mut()
                .ok_or_else(|| CliError::Config(format!("--set {key}: not a table")))?
                .entry(part.to_string())
                .or_insert(toml::Value::Table(Default::default()));
        }
        node.as_table_mut()
            .ok_or_else(|| CliError::Config(format!("--set {key}: not a table")))?
            .insert(parts[parts.len() - 1].to_string(), parsed);
    }

    let cfg: Config = doc
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_simulate(cfg: &Config, out: &Path, truth_out: &Path) -> Result<(), CliError> {
    let farm = default_farm_with_sigma(cfg.sim.buoy_prior_sigma);
    let plan = cfg.survey_plan();
    let noise = cfg.noise_spec();
    let dataset = simulate(&farm, &plan, &noise);

    let out = out_path(out);
    let truth_out = out_path(truth_out);
    io::write_dataset(&dataset, &out, Some(&truth_out), &cfg.hash())?;

    let n_odom = dataset.odometry_deltas().len();
    let n_det = dataset.detection_count();
    println!(
        "wrote {} ({} odometry steps, {} detections) and {}",
        out.display(),
        n_odom,
        n_det,
        truth_out.display()
    );
    println!(
        "farm: {} ropes / {} buoys; path {:.1} m over {:.0} s; seed {}",
        farm.ropes.len(),
        farm.buoys.len(),
        path_length(&farm, &plan),
        n_odom as f64 / plan.pose_rate,
        noise.seed
    );
    Ok(())
}

fn load_run_record(path: &Path) -> Result<RunRecord, CliError> {
    let file: RunRecordFile = io::read_json(path)?;
    Ok(file.into())
}

fn cmd_run(cfg: &Config, dataset_path: &Path, out: &Path) -> Result<(), CliError> {
    let dataset = io::read_dataset(dataset_path, None)?;
    let hash = io::file_hash(dataset_path)?;
    let method = cfg.method()?;
    let output = run_survey(&dataset, method, cfg, Some(hash))?;
    let record = &output.record;

    let out = out_path(out);
    io::write_json(&RunRecordFile::from(record), &out)?;
    println!(
        "{}: {} factors, chi2 {:.3e}, converged {}, max update {:.3} s, solver total {:.2} s",
        method,
        record.factor_count,
        record.final_estimate.chi2,
        record.converged,
        record.max_update_secs,
        record.total_solver_secs
    );
    println!(
        "detections: {} buoy accepted / {} rejected, {} rope used / {} discarded, {} infeasible dropped",
        record.stats.buoy_accepted,
        record.stats.buoy_rejected,
        record.stats.rope_accepted,
        record.stats.rope_discarded,
        record.stats.infeasible_dropped
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn optimized_trajectory(record: &RunRecord) -> Vec<Pose2> {
    let n = record
        .final_estimate
        .values
        .keys()
        .filter(|id| id.kind == VariableKind::Pose)
        .count();
    (0..n)
        .filter_map(|i| record.final_estimate.pose(farm_slam::VariableId::pose(i)))
        .collect()
}

fn cmd_evaluate(
    dataset_path: &Path,
    truth_path: Option<&Path>,
    run_paths: &[PathBuf],
    out_dir: &Path,
) -> Result<(), CliError> {
    let dataset = io::read_dataset(dataset_path, truth_path)?;
    let dataset_hash = io::file_hash(dataset_path)?;
    let out_dir = out_path(out_dir);
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Data(e.to_string()))?;

    let mut reports: BTreeMap<MethodKind, MetricsReport> = BTreeMap::new();
    let mut orpe_series = Vec::new();
    for path in run_paths {
        let record = load_run_record(path)?;
        if let Some(h) = &record.dataset_hash {
            if *h != dataset_hash {
                return Err(CliError::Data(
                    DataError::HashMismatch {
                        expected: h.clone(),
                        actual: dataset_hash,
                    }
                    .to_string(),
                ));
            }
        }
        let report = metrics(&record, &dataset.farm)?;

        // per-run artifacts: metrics JSON + trajectory overlay
        let stem = format!("{}", record.method);
        io::write_json(&report, &out_dir.join(format!("metrics_{stem}.json")))?;
        let overlay = render_overlay(&dataset, &record)?;
        std::fs::write(out_dir.join(format!("trajectory_{stem}.svg")), overlay)
            .map_err(|e| CliError::Data(e.to_string()))?;

        orpe_series.push((record.method, report.orpe_series.clone()));
        reports.insert(record.method, report);
    }

    let chart = svg::orpe_chart("online relative pose error", &orpe_series);
    std::fs::write(out_dir.join("orpe.svg"), chart).map_err(|e| CliError::Data(e.to_string()))?;

    let table = compare_methods(&reports);
    io::write_json(&table, &out_dir.join("comparison.json"))?;
    std::fs::write(out_dir.join("comparison.txt"), table.to_string())
        .map_err(|e| CliError::Data(e.to_string()))?;
    if truth_path.is_none() {
        println!("note: no ground-truth file given; overlay omits the truth layer");
    }
    print!("{table}");
    println!("wrote metrics and plots to {}", out_dir.display());
    Ok(())
}

fn render_overlay(dataset: &SurveyDataset, record: &RunRecord) -> Result<String, CliError> {
    let dr = dr_trajectory(&dataset.m0, &dataset.odometry_deltas());
    let optimized = optimized_trajectory(record);
    let truth: Option<Vec<Pose2>> = dataset
        .ground_truth
        .as_ref()
        .map(|t| t.iter().map(|s| s.pose).collect());
    let buoys: Vec<Point2> = (0..dataset.farm.buoys.len())
        .filter_map(|k| record.final_estimate.point(farm_slam::VariableId::buoy(k)))
        .collect();
    let rope_points: Vec<Point2> = farm_slam::eval::rope_points(record)?
        .into_values()
        .flatten()
        .collect();
    Ok(svg::trajectory_overlay(
        &format!("{} trajectory", record.method),
        &dataset.farm,
        &dr,
        &optimized,
        truth.as_deref(),
        &buoys,
        &rope_points,
    ))
}

fn cmd_bench(cfg: &Config, speeds: &[f64]) -> Result<(), CliError> {
    let method = cfg.method()?;
    println!(
        "{:>6} | {:>8} | {:>7} | {:>12} | {:>13} | {:>11} | {:>11}",
        "speed", "duration", "factors", "max upd (s)", "mean upd (ms)", "solver (s)", "utilization"
    );
    println!("{}", "-".repeat(88));
    for &speed in speeds {
        let mut c = cfg.clone();
        c.sim.speed = speed;
        c.validate()?;
        let farm = default_farm_with_sigma(c.sim.buoy_prior_sigma);
        let dataset = simulate(&farm, &c.survey_plan(), &c.noise_spec());
        let duration = dataset.events.last().map_or(0.0, |e| e.t());
        let output = run_survey(&dataset, method, &c, None)?;
        let r = &output.record;
        let mean_upd = r.total_solver_secs / r.snapshots.len().max(1) as f64;
        println!(
            "{:>6.2} | {:>7.0}s | {:>7} | {:>12.4} | {:>13.2} | {:>11.2} | {:>10.1}%",
            speed,
            duration,
            r.factor_count,
            r.max_update_secs,
            mean_upd * 1e3,
            r.total_solver_secs,
            100.0 * r.total_solver_secs / duration.max(1e-9)
        );
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { cfg, out, truth_out } => {
            let cfg = load_config(&cfg)?;
            cmd_simulate(&cfg, &out, &truth_out)
        }
        Command::Run { cfg, dataset, out } => {
            let cfg = load_config(&cfg)?;
            cmd_run(&cfg, &dataset, &out)
        }
        Command::Evaluate {
            cfg: _,
            dataset,
            truth,
            runs,
            out_dir,
        } => cmd_evaluate(&dataset, truth.as_deref(), &runs, &out_dir),
        Command::Bench { cfg, speeds } => {
            let cfg = load_config(&cfg)?;
            cmd_bench(&cfg, &speeds)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
