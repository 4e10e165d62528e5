//! Synthetic survey generator: farm layout, lawnmower trajectory with ground
//! truth, drifting odometry and per-ping sonar detections.
//!
//! Everything is seeded and deterministic: the same plan/noise produce the
//! same dataset byte for byte.

use crate::frontend::{FarmBuoy, FarmModel, Rope};
use crate::geometry::{Gaussian2, OdometryDelta, Point2, Pose2};
use crate::motion::DrState;
use crate::sonar::{Channel, Detection, TargetClass};
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Survey geometry and sensor envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyPlan {
    /// Lateral offsets (meters) of the swath lines in the farm frame, run in
    /// the given order with alternating direction.
    pub swath_offsets: Vec<f64>,
    /// Vehicle speed, m/s.
    pub speed: f64,
    /// Sonar ping rate, Hz. Must be >= pose_rate.
    pub ping_rate: f64,
    /// Pose node / odometry rate, Hz.
    pub pose_rate: f64,
    /// Extra straight distance past the rope ends on each swath, meters.
    pub lead_in: f64,
    /// Maximum detection range, meters.
    pub max_range: f64,
    /// Half-width of the "abeam" bearing window around ±π/2, radians.
    pub abeam_tol: f64,
    /// Constant vehicle depth during the survey, meters.
    pub vehicle_depth: f64,
}

impl Default for SurveyPlan {
    fn default() -> Self {
        Self {
            swath_offsets: vec![-2.0, 2.0, 15.0, 24.0, 28.0],
            speed: 1.0,
            ping_rate: 1.0,
            pose_rate: 1.0,
            lead_in: 12.0,
            max_range: 15.0,
            abeam_tol: 3.0_f64.to_radians(),
            vehicle_depth: 0.0,
        }
    }
}

impl SurveyPlan {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.pose_rate > 0.0) {
            return Err("pose_rate must be > 0".into());
        }
        if self.ping_rate < self.pose_rate {
            return Err("ping_rate must be >= pose_rate".into());
        }
        if !(self.speed > 0.0) {
            return Err("speed must be > 0".into());
        }
        if self.swath_offsets.is_empty() {
            return Err("at least one swath offset required".into());
        }
        Ok(())
    }
}

/// Noise model of the synthetic survey. Sigmas are per odometry step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Gaussian odometry noise (x, y, theta) per step.
    pub odom_sigma: [f64; 3],
    /// Deterministic odometry bias (x, y, theta) per step; emulates drift and
    /// is deliberately not reflected in the attached covariance.
    pub odom_bias: [f64; 3],
    /// Gaussian slant-range noise, meters.
    pub range_sigma: f64,
    pub detect_prob_rope: f64,
    pub detect_prob_buoy: f64,
    /// Amplitude of the sinusoidal lateral rope displacement, meters.
    /// Emulates ropes undulating in the water column; 0 disables it.
    pub undulation_amp: f64,
    /// Spatial period of the undulation along the rope, meters.
    pub undulation_period: f64,
    pub seed: u64,
    /// Lower bound on the per-axis sigma used for the attached odometry
    /// covariance, so zero-noise runs still carry an SPD noise model.
    pub sigma_floor: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            odom_sigma: [0.02, 0.01, 0.2_f64.to_radians()],
            odom_bias: [0.0, 0.0, 0.05_f64.to_radians()],
            range_sigma: 0.2,
            detect_prob_rope: 0.9,
            detect_prob_buoy: 0.8,
            undulation_amp: 0.3,
            undulation_period: 8.0,
            seed: 42,
            sigma_floor: 1e-4,
        }
    }
}

impl NoiseSpec {
    /// Exact measurements, no dropout, no undulation; the noise *model*
    /// (attached covariances) stays at the floor so factors remain SPD.
    pub fn zero_noise(seed: u64) -> Self {
        Self {
            odom_sigma: [0.0, 0.0, 0.0],
            odom_bias: [0.0, 0.0, 0.0],
            range_sigma: 0.0,
            detect_prob_rope: 1.0,
            detect_prob_buoy: 1.0,
            undulation_amp: 0.0,
            undulation_period: 8.0,
            seed,
            sigma_floor: 1e-4,
        }
    }
}

/// An odometry increment event at a pose-node time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryEvent {
    pub t: f64,
    pub delta: OdometryDelta,
}

/// A detection event; carries the raw detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionEvent {
    pub det: Detection,
}

/// Time-ordered survey event. Odometry sorts before detections at equal
/// timestamps so detections always attach to an existing pose node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    Odometry(OdometryEvent),
    Detection(DetectionEvent),
}

impl Event {
    pub fn t(&self) -> f64 {
        match self {
            Event::Odometry(e) => e.t,
            Event::Detection(e) => e.det.t,
        }
    }

    fn order_rank(&self) -> u8 {
        match self {
            Event::Odometry(_) => 0,
            Event::Detection(_) => 1,
        }
    }
}

/// A complete synthetic (or ingested) survey.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyDataset {
    pub farm: FarmModel,
    /// Initial vehicle pose (e.g. from the support ship position).
    pub m0: Pose2,
    pub events: Vec<Event>,
    /// Truth aligned to the odometry timestamps; absent for field data.
    pub ground_truth: Option<Vec<DrState>>,
    pub seed: u64,
}

impl SurveyDataset {
    pub fn odometry_deltas(&self) -> Vec<OdometryDelta> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::Odometry(o) => Some(o.delta),
                Event::Detection(_) => None,
            })
            .collect()
    }

    pub fn detection_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::Detection(_)))
            .count()
    }
}

/// The default three-line farm: 26 m ropes at lateral offsets 0, 13 and 26 m
/// (two 13 m corridors), moored at 1.5 m depth, one buoy at each rope end
/// with an isotropic 0.5 m prior sigma.
pub fn default_farm() -> FarmModel {
    default_farm_with_sigma(0.5)
}

pub fn default_farm_with_sigma(buoy_sigma: f64) -> FarmModel {
    let mut buoys = Vec::new();
    let mut ropes = Vec::new();
    for (k, y) in [0.0, 13.0, 26.0].into_iter().enumerate() {
        let a = 2 * k;
        let b = 2 * k + 1;
        buoys.push(FarmBuoy {
            id: a,
            prior: Gaussian2::isotropic(Point2::new(0.0, y), buoy_sigma),
        });
        buoys.push(FarmBuoy {
            id: b,
            prior: Gaussian2::isotropic(Point2::new(26.0, y), buoy_sigma),
        });
        ropes.push(Rope {
            id: k,
            buoy_a: a,
            buoy_b: b,
            depth: 1.5,
        });
    }
    FarmModel { buoys, ropes }
}

/// Extent of the rope field along the rope direction, from the buoy means.
fn rope_x_extent(farm: &FarmModel) -> (f64, f64) {
    let xs: Vec<f64> = farm.buoys.iter().map(|b| b.prior.mean.x).collect();
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// One leg of the lawnmower path: a straight swath or a turn polyline. The
/// sonar only surveys on swath legs; turns are transit.
struct Leg {
    pts: Vec<Point2>,
    is_swath: bool,
}

impl Leg {
    fn length(&self) -> f64 {
        self.pts.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }
}

/// Lawnmower path: straight swaths at the planned lateral offsets joined by
/// semicircular turns past the rope ends.
fn path_legs(farm: &FarmModel, plan: &SurveyPlan) -> Vec<Leg> {
    let (x_min, x_max) = rope_x_extent(farm);
    let x_w = x_min - plan.lead_in;
    let x_e = x_max + plan.lead_in;
    let mut legs: Vec<Leg> = Vec::new();

    for (i, &y) in plan.swath_offsets.iter().enumerate() {
        let eastbound = i % 2 == 0;
        let (x0, x1) = if eastbound { (x_w, x_e) } else { (x_e, x_w) };
        legs.push(Leg {
            pts: vec![Point2::new(x0, y), Point2::new(x1, y)],
            is_swath: true,
        });

        if let Some(&y_next) = plan.swath_offsets.get(i + 1) {
            // semicircle past the swath end, bulging outward
            let r = (y_next - y).abs() / 2.0;
            let ym = (y + y_next) / 2.0;
            let sign = if y_next > y { 1.0 } else { -1.0 };
            let n_seg = ((PI * r / 0.5).ceil() as usize).max(8);
            let mut pts = vec![Point2::new(x1, y)];
            for k in 1..n_seg {
                let phi = -PI / 2.0 + PI * k as f64 / n_seg as f64;
                let (dx, dy) = (phi.cos() * r, phi.sin() * r * sign);
                let x = if eastbound { x1 + dx } else { x1 - dx };
                pts.push(Point2::new(x, ym + dy));
            }
            pts.push(Point2::new(x1, y_next));
            legs.push(Leg { pts, is_swath: false });
        }
    }
    legs
}

/// Length of the planned survey path, meters.
pub fn path_length(farm: &FarmModel, plan: &SurveyPlan) -> f64 {
    path_legs(farm, plan).iter().map(Leg::length).sum()
}

struct PathSample {
    state: DrState,
    on_swath: bool,
}

/// Walk the path at constant speed, emitting a state every `1/rate` seconds
/// of travel within each leg. Sampling restarts at every leg boundary, so
/// swath samples sit at exact multiples of the step from the swath start
/// (this keeps broadside crossings of grid-aligned targets exact); the step
/// across a boundary is correspondingly shorter. Headings follow the local
/// segment direction.
fn sample_path(farm: &FarmModel, plan: &SurveyPlan, rate: f64) -> Vec<PathSample> {
    let legs = path_legs(farm, plan);
    let step = plan.speed / rate;
    let mut out: Vec<PathSample> = Vec::new();
    let mut s_leg_start = 0.0f64; // cumulative arc length at leg start

    for (li, leg) in legs.iter().enumerate() {
        let leg_len = leg.length();
        let mut seg = 0usize;
        let mut seg_start = 0.0f64;
        let mut seg_len = leg.pts[1].distance(&leg.pts[0]);
        let mut k = 0usize;
        loop {
            let s_local = k as f64 * step;
            let is_last_leg = li + 1 == legs.len();
            if s_local > leg_len - 1e-9 && !(is_last_leg && s_local <= leg_len + 1e-9) {
                break;
            }
            let s_local = s_local.min(leg_len);
            while s_local > seg_start + seg_len + 1e-12 && seg + 2 < leg.pts.len() {
                seg_start += seg_len;
                seg += 1;
                seg_len = leg.pts[seg + 1].distance(&leg.pts[seg]);
            }
            let a = leg.pts[seg];
            let b = leg.pts[seg + 1];
            let frac = ((s_local - seg_start) / seg_len).clamp(0.0, 1.0);
            let x = a.x + (b.x - a.x) * frac;
            let y = a.y + (b.y - a.y) * frac;
            let heading = (b.y - a.y).atan2(b.x - a.x);
            let t = (s_leg_start + s_local) / plan.speed;
            out.push(PathSample {
                state: DrState {
                    pose: Pose2::new(x, y, heading),
                    t,
                },
                on_swath: leg.is_swath,
            });
            k += 1;
        }
        s_leg_start += leg_len;
    }
    out
}

/// Ground-truth trajectory at the pose-node rate (includes turn samples).
pub fn generate_truth(farm: &FarmModel, plan: &SurveyPlan) -> Vec<DrState> {
    sample_path(farm, plan, plan.pose_rate)
        .into_iter()
        .map(|s| s.state)
        .collect()
}

/// Corrupt per-step true relative poses with bias plus seeded Gaussian noise.
/// The attached covariance reflects only the Gaussian part (the bias is
/// unmodeled, as in real dead reckoning), floored to stay SPD.
pub fn corrupt_odometry(truth: &[DrState], noise: &NoiseSpec) -> Vec<OdometryDelta> {
    let mut rng = ChaCha12Rng::seed_from_u64(noise.seed ^ 0x6f646f6d); // "odom"
    let floor = noise.sigma_floor;
    let sig = [
        noise.odom_sigma[0].max(floor),
        noise.odom_sigma[1].max(floor),
        noise.odom_sigma[2].max(floor),
    ];
    let cov = Matrix3::from_diagonal(&nalgebra::Vector3::new(
        sig[0] * sig[0],
        sig[1] * sig[1],
        sig[2] * sig[2],
    ));
    truth
        .windows(2)
        .map(|w| {
            let d = w[0].pose.between(&w[1].pose);
            let n: [f64; 3] = std::array::from_fn(|i| {
                let g: f64 = StandardNormal.sample(&mut rng);
                noise.odom_bias[i] + noise.odom_sigma[i] * g
            });
            OdometryDelta::new(d.x + n[0], d.y + n[1], d.theta + n[2], cov)
        })
        .collect()
}

/// Foot of the perpendicular from `p` onto segment a-b, with its parameter.
fn segment_foot(p: &Point2, a: &Point2, b: &Point2) -> (Point2, f64) {
    let abx = b.x - a.x;
    let aby = b.y - a.y;
    let len2 = abx * abx + aby * aby;
    let t = ((p.x - a.x) * abx + (p.y - a.y) * aby) / len2;
    (Point2::new(a.x + abx * t, a.y + aby * t), t)
}

const MIN_DETECTION_RANGE: f64 = 0.5;

/// Simulate per-ping detections from the true geometry: a perfect detector
/// with dropout. The detector only runs on straight swath legs (side scan
/// imagery is unusable while turning). Targets must lie abeam (within
/// `abeam_tol` of ±π/2) and in range. Emitted slant ranges are clamped to
/// the depth gap so every emitted detection is feasible by construction.
pub fn simulate_detections(
    farm: &FarmModel,
    plan: &SurveyPlan,
    noise: &NoiseSpec,
) -> Vec<DetectionEvent> {
    let samples = sample_path(farm, plan, plan.ping_rate);
    let mut rng = ChaCha12Rng::seed_from_u64(noise.seed ^ 0x70696e67); // "ping"

    // fixed per-rope undulation phases
    let phases: Vec<f64> = farm.ropes.iter().map(|_| rng.gen::<f64>() * 2.0 * PI).collect();

    let mut out = Vec::new();
    for sample in &samples {
        if !sample.on_swath {
            continue;
        }
        let st = &sample.state;
        let pos = st.pose.position();
        for channel in [Channel::Port, Channel::Starboard] {
            // buoys: point targets
            for b in &farm.buoys {
                if let Some(det) = try_detect(
                    st,
                    &b.prior.mean,
                    0.0,
                    channel,
                    TargetClass::Buoy,
                    plan,
                    noise,
                    noise.detect_prob_buoy,
                    &mut rng,
                ) {
                    out.push(DetectionEvent { det });
                }
            }
            // ropes: perpendicular-foot targets, laterally displaced when
            // undulation is enabled
            for (ri, rope) in farm.ropes.iter().enumerate() {
                let (a, b) = farm
                    .rope_endpoints(rope.id)
                    .expect("validated farm geometry");
                let (foot, tpar) = segment_foot(&pos, &a, &b);
                if !(0.0..=1.0).contains(&tpar) {
                    continue;
                }
                let target = if noise.undulation_amp > 0.0 {
                    let len = a.distance(&b);
                    let (nx, ny) = (-(b.y - a.y) / len, (b.x - a.x) / len);
                    let disp = noise.undulation_amp
                        * (2.0 * PI * tpar * len / noise.undulation_period + phases[ri]).sin();
                    Point2::new(foot.x + nx * disp, foot.y + ny * disp)
                } else {
                    foot
                };
                if let Some(det) = try_detect(
                    st,
                    &target,
                    rope.depth,
                    channel,
                    TargetClass::Rope,
                    plan,
                    noise,
                    noise.detect_prob_rope,
                    &mut rng,
                ) {
                    out.push(DetectionEvent { det });
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn try_detect(
    st: &DrState,
    target: &Point2,
    target_depth: f64,
    channel: Channel,
    klass: TargetClass,
    plan: &SurveyPlan,
    noise: &NoiseSpec,
    prob: f64,
    rng: &mut ChaCha12Rng,
) -> Option<Detection> {
    let dx = target.x - st.pose.x;
    let dy = target.y - st.pose.y;
    let ground = dx.hypot(dy);
    if ground < MIN_DETECTION_RANGE || ground > plan.max_range {
        return None;
    }
    let bearing = crate::geometry::wrap_angle(dy.atan2(dx) - st.pose.theta);
    if crate::geometry::wrap_angle(bearing - channel.bearing()).abs() > plan.abeam_tol {
        return None;
    }
    // dropout draw happens for every geometrically visible target so the
    // random stream is a pure function of the geometry
    if rng.gen::<f64>() >= prob {
        return None;
    }
    let dz = plan.vehicle_depth - target_depth;
    let true_slant = (ground * ground + dz * dz).sqrt();
    let g: f64 = StandardNormal.sample(rng);
    let slant = (true_slant + noise.range_sigma * g).max(dz.abs() + 1e-12);
    Some(Detection {
        t: st.t,
        channel,
        klass,
        slant_range: slant,
        vehicle_depth: plan.vehicle_depth,
    })
}

/// Generate a complete survey: truth, odometry and detections merged into a
/// strictly time-ordered event stream (odometry first at equal timestamps).
pub fn simulate(farm: &FarmModel, plan: &SurveyPlan, noise: &NoiseSpec) -> SurveyDataset {
    let truth = generate_truth(farm, plan);
    let deltas = corrupt_odometry(&truth, noise);
    let detections = simulate_detections(farm, plan, noise);

    let mut events: Vec<Event> = Vec::with_capacity(deltas.len() + detections.len());
    for (i, d) in deltas.iter().enumerate() {
        events.push(Event::Odometry(OdometryEvent {
            t: truth[i + 1].t,
            delta: *d,
        }));
    }
    events.extend(detections.into_iter().map(Event::Detection));
    events.sort_by(|a, b| {
        a.t()
            .total_cmp(&b.t())
            .then_with(|| a.order_rank().cmp(&b.order_rank()))
    });

    SurveyDataset {
        farm: farm.clone(),
        m0: truth[0].pose,
        events,
        ground_truth: Some(truth),
        seed: noise.seed,
    }
}
