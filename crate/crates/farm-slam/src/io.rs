//! Dataset, run-record and metrics files.
//!
//! Datasets are line-delimited JSON for streamability and diffability: a farm
//! header object on the first line, then one event per line in time order.
//!
//! ```text
//! {"buoys":[{"id":0,"x":0.0,"y":0.0,"sigma":0.5},...],"ropes":[{"id":0,"a":0,"b":1,"depth":1.5},...],"m0":{...},"seed":42,"config_hash":"..."}
//! {"t":1.0,"type":"odom","dx":1.0,"dy":0.0,"dtheta":0.0,"cov":[1e-4,0,0,1e-4,0,1e-4]}
//! {"t":1.0,"type":"det","channel":"stbd","class":"rope","slant":2.5,"depth":0.0}
//! ```
//!
//! `cov` holds the six upper-triangular entries row-major:
//! (xx, xy, xθ, yy, yθ, θθ). Ground truth lives in a parallel file of
//! `{"t","x","y","theta"}` lines. Run records and metrics are single JSON
//! documents. Every output embeds the seed and a config hash for provenance.

use crate::frontend::{FarmBuoy, FarmModel, Rope};
use crate::geometry::{Gaussian2, OdometryDelta, Point2, Pose2};
use crate::motion::DrState;
use crate::sim::{DetectionEvent, Event, OdometryEvent, SurveyDataset};
use crate::sonar::{Channel, Detection, TargetClass};
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("dataset hash mismatch: run record was produced from {expected}, got {actual}")]
    HashMismatch { expected: String, actual: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct BuoyJson {
    id: usize,
    x: f64,
    y: f64,
    sigma: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RopeJson {
    id: usize,
    a: usize,
    b: usize,
    depth: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct HeaderJson {
    buoys: Vec<BuoyJson>,
    ropes: Vec<RopeJson>,
    m0: Pose2,
    seed: u64,
    #[serde(default)]
    config_hash: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type")]
enum EventJson {
    #[serde(rename = "odom")]
    Odom {
        t: f64,
        dx: f64,
        dy: f64,
        dtheta: f64,
        cov: [f64; 6],
    },
    #[serde(rename = "det")]
    Det {
        t: f64,
        channel: Channel,
        class: TargetClass,
        slant: f64,
        depth: f64,
    },
}

fn cov3_to_upper(m: &Matrix3<f64>) -> [f64; 6] {
    [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 1)], m[(1, 2)], m[(2, 2)]]
}

fn upper_to_cov3(u: &[f64; 6]) -> Matrix3<f64> {
    Matrix3::new(
        u[0], u[1], u[2], //
        u[1], u[3], u[4], //
        u[2], u[4], u[5],
    )
}

/// Write a dataset; ground truth (when present) goes to `truth_path`.
pub fn write_dataset(
    dataset: &SurveyDataset,
    path: &Path,
    truth_path: Option<&Path>,
    config_hash: &str,
) -> Result<(), DataError> {
    let mut w = BufWriter::new(File::create(path)?);
    let header = HeaderJson {
        buoys: dataset
            .farm
            .buoys
            .iter()
            .map(|b| BuoyJson {
                id: b.id,
                x: b.prior.mean.x,
                y: b.prior.mean.y,
                sigma: b.prior.cov[(0, 0)].sqrt(),
            })
            .collect(),
        ropes: dataset
            .farm
            .ropes
            .iter()
            .map(|r| RopeJson {
                id: r.id,
                a: r.buoy_a,
                b: r.buoy_b,
                depth: r.depth,
            })
            .collect(),
        m0: dataset.m0,
        seed: dataset.seed,
        config_hash: config_hash.to_string(),
    };
    serde_json::to_writer(&mut w, &header).map_err(|e| DataError::Json { line: 1, source: e })?;
    w.write_all(b"\n")?;
    for (i, e) in dataset.events.iter().enumerate() {
        let ej = match e {
            Event::Odometry(o) => EventJson::Odom {
                t: o.t,
                dx: o.delta.dx,
                dy: o.delta.dy,
                dtheta: o.delta.dtheta,
                cov: cov3_to_upper(&o.delta.cov),
            },
            Event::Detection(d) => EventJson::Det {
                t: d.det.t,
                channel: d.det.channel,
                class: d.det.klass,
                slant: d.det.slant_range,
                depth: d.det.vehicle_depth,
            },
        };
        serde_json::to_writer(&mut w, &ej).map_err(|e| DataError::Json {
            line: i + 2,
            source: e,
        })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;

    if let (Some(tp), Some(truth)) = (truth_path, dataset.ground_truth.as_ref()) {
        write_truth(truth, tp)?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct TruthJson {
    t: f64,
    x: f64,
    y: f64,
    theta: f64,
}

pub fn write_truth(truth: &[DrState], path: &Path) -> Result<(), DataError> {
    let mut w = BufWriter::new(File::create(path)?);
    for (i, s) in truth.iter().enumerate() {
        let tj = TruthJson {
            t: s.t,
            x: s.pose.x,
            y: s.pose.y,
            theta: s.pose.theta,
        };
        serde_json::to_writer(&mut w, &tj).map_err(|e| DataError::Json {
            line: i + 1,
            source: e,
        })?;
        w.write_all(b"\n")?;
    }
    Ok(w.flush()?)
}

pub fn read_truth(path: &Path) -> Result<Vec<DrState>, DataError> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let tj: TruthJson =
            serde_json::from_str(&line).map_err(|e| DataError::Json { line: i + 1, source: e })?;
        out.push(DrState {
            pose: Pose2::new(tj.x, tj.y, tj.theta),
            t: tj.t,
        });
    }
    Ok(out)
}

/// Parse a dataset file; ground truth is attached when `truth_path` is given.
pub fn read_dataset(path: &Path, truth_path: Option<&Path>) -> Result<SurveyDataset, DataError> {
    let r = BufReader::new(File::open(path)?);
    let mut lines = r.lines().enumerate();

    let (_, header_line) = lines
        .next()
        .ok_or_else(|| DataError::Schema("empty dataset file".into()))?;
    let header: HeaderJson = serde_json::from_str(&header_line?)
        .map_err(|e| DataError::Json { line: 1, source: e })?;

    let farm = FarmModel {
        buoys: header
            .buoys
            .iter()
            .map(|b| FarmBuoy {
                id: b.id,
                prior: Gaussian2::isotropic(Point2::new(b.x, b.y), b.sigma),
            })
            .collect(),
        ropes: header
            .ropes
            .iter()
            .map(|r| Rope {
                id: r.id,
                buoy_a: r.a,
                buoy_b: r.b,
                depth: r.depth,
            })
            .collect(),
    };
    farm.validate()
        .map_err(|e| DataError::Schema(format!("farm header: {e}")))?;

    let mut events = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ej: EventJson =
            serde_json::from_str(&line).map_err(|e| DataError::Json { line: i + 1, source: e })?;
        let ev = match ej {
            EventJson::Odom { t, dx, dy, dtheta, cov } => Event::Odometry(OdometryEvent {
                t,
                delta: OdometryDelta::new(dx, dy, dtheta, upper_to_cov3(&cov)),
            }),
            EventJson::Det { t, channel, class, slant, depth } => {
                if slant <= 0.0 {
                    return Err(DataError::Schema(format!(
                        "line {}: slant range must be > 0",
                        i + 1
                    )));
                }
                Event::Detection(DetectionEvent {
                    det: Detection {
                        t,
                        channel,
                        klass: class,
                        slant_range: slant,
                        vehicle_depth: depth,
                    },
                })
            }
        };
        if ev.t() < last_t - 1e-9 {
            return Err(DataError::Schema(format!(
                "line {}: events out of time order",
                i + 1
            )));
        }
        last_t = ev.t();
        events.push(ev);
    }

    let ground_truth = match truth_path {
        Some(tp) if tp.exists() => Some(read_truth(tp)?),
        _ => None,
    };

    Ok(SurveyDataset {
        farm,
        m0: header.m0,
        events,
        ground_truth,
        seed: header.seed,
    })
}

/// SHA-256 of a file, hex-encoded.
pub fn file_hash(path: &Path) -> Result<String, DataError> {
    let mut f = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// SHA-256 of a string, hex-encoded; used for config provenance.
pub fn string_hash(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

/// Serialize any serde value as pretty JSON to a file.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), DataError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| DataError::Json { line: 0, source: e })?;
    w.write_all(b"\n")?;
    Ok(w.flush()?)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, DataError> {
    let r = BufReader::new(File::open(path)?);
    serde_json::from_reader(r).map_err(|e| DataError::Json { line: 0, source: e })
}
