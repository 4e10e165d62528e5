//! Run configuration: one TOML document with sections, mirrored by CLI flags
//! (flags override file values). All covariances are given as sigmas; angles
//! are radians unless the key says `_deg`.

use crate::frontend::{FrontendConfig, MethodKind};
use crate::geometry::is_spd;
use crate::graph::SolverConfig;
use crate::sim::{NoiseSpec, SurveyPlan};
use crate::sonar::TargetDepthTable;
use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {field}: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// `[run]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    /// proposed | baseline_shared_rope | baseline_buoy_only
    pub method: String,
    pub seed: u64,
    /// Fold every k consecutive odometry events into one pose step.
    pub pose_decimation: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            method: "proposed".into(),
            seed: 42,
            pose_decimation: 1,
        }
    }
}

/// `[sim]` section: survey plan of the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSection {
    pub swath_offsets: Vec<f64>,
    pub speed: f64,
    pub ping_rate: f64,
    pub pose_rate: f64,
    pub lead_in: f64,
    pub max_range: f64,
    pub abeam_tol_deg: f64,
    pub vehicle_depth: f64,
    pub buoy_prior_sigma: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let p = SurveyPlan::default();
        Self {
            swath_offsets: p.swath_offsets,
            speed: p.speed,
            ping_rate: p.ping_rate,
            pose_rate: p.pose_rate,
            lead_in: p.lead_in,
            max_range: p.max_range,
            abeam_tol_deg: p.abeam_tol.to_degrees(),
            vehicle_depth: p.vehicle_depth,
            buoy_prior_sigma: 0.5,
        }
    }
}

/// `[noise]` section: synthetic noise model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSection {
    pub odom_sigma: [f64; 3],
    pub odom_bias: [f64; 3],
    pub range_sigma: f64,
    pub detect_prob_rope: f64,
    pub detect_prob_buoy: f64,
    pub undulation_amp: f64,
    pub undulation_period: f64,
    pub sigma_floor: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseSpec::default();
        Self {
            odom_sigma: n.odom_sigma,
            odom_bias: n.odom_bias,
            range_sigma: n.range_sigma,
            detect_prob_rope: n.detect_prob_rope,
            detect_prob_buoy: n.detect_prob_buoy,
            undulation_amp: n.undulation_amp,
            undulation_period: n.undulation_period,
            sigma_floor: n.sigma_floor,
        }
    }
}

/// `[priors]` section: factor noise defaults, as sigmas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorSection {
    /// Initial pose prior sigma (x m, y m, theta rad); e.g. a surface-ship
    /// position fix.
    pub sigma0: [f64; 3],
    /// Override of the per-buoy prior sigma from the dataset header.
    pub gamma_sigma: Option<f64>,
    /// Buoy observation noise (range m, bearing rad).
    pub omega: [f64; 2],
    /// Rope observation noise (range m, bearing rad).
    pub xi: [f64; 2],
    /// Rope prior sigma across the rope, meters.
    pub rope_sigma_across: f64,
    /// Rope prior sigma along the rope; omit for the auto rule (half the
    /// rope length).
    pub rope_sigma_along: Option<f64>,
}

impl Default for PriorSection {
    fn default() -> Self {
        Self {
            sigma0: [1.0, 1.0, 5.0_f64.to_radians()],
            gamma_sigma: None,
            omega: [0.2, 0.05],
            xi: [0.2, 0.05],
            rope_sigma_across: 0.1,
            rope_sigma_along: None,
        }
    }
}

/// `[assoc]` section: data-association gates (Mahalanobis², 2 dof).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssocSection {
    pub buoy_gate: f64,
    pub rope_gate: f64,
}

impl Default for AssocSection {
    fn default() -> Self {
        Self {
            buoy_gate: crate::frontend::CHI2_GATE_2DOF_999,
            rope_gate: crate::frontend::CHI2_GATE_2DOF_999,
        }
    }
}

/// `[solver]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSection {
    pub max_iterations: usize,
    /// Iteration cap for per-step incremental updates; warm starts make a
    /// handful of iterations enough, and the cap bounds update latency.
    pub update_max_iterations: usize,
    pub rel_tolerance: f64,
    pub step_tolerance: f64,
    pub lambda_init: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            max_iterations: s.max_iterations,
            update_max_iterations: 8,
            rel_tolerance: s.rel_tolerance,
            step_tolerance: s.step_tolerance,
            lambda_init: s.lambda_init,
            lambda_up: s.lambda_up,
            lambda_down: s.lambda_down,
        }
    }
}

/// `[depths]` section: a-priori target depths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DepthSection {
    pub buoy_depth: f64,
    pub rope_depth: f64,
}

impl Default for DepthSection {
    fn default() -> Self {
        let d = TargetDepthTable::default();
        Self {
            buoy_depth: d.buoy_depth,
            rope_depth: d.rope_depth,
        }
    }
}

/// The whole configuration document.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub run: RunSection,
    pub sim: SimSection,
    pub noise: NoiseSection,
    pub priors: PriorSection,
    pub assoc: AssocSection,
    pub solver: SolverSection,
    pub depths: DepthSection,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Config = toml::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Field-level validation with actionable messages.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.method()?;
        if self.run.pose_decimation == 0 {
            return Err(invalid("run.pose_decimation", "must be >= 1"));
        }
        self.survey_plan()
            .validate()
            .map_err(|e| invalid("sim", e))?;
        for (name, p) in [
            ("noise.detect_prob_rope", self.noise.detect_prob_rope),
            ("noise.detect_prob_buoy", self.noise.detect_prob_buoy),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(name, "probability must be in [0, 1]"));
            }
        }
        for (i, s) in self.noise.odom_sigma.iter().enumerate() {
            if *s < 0.0 {
                return Err(invalid(&format!("noise.odom_sigma[{i}]"), "must be >= 0"));
            }
        }
        if !is_spd(&self.sigma0()) {
            return Err(invalid("priors.sigma0", "must give an SPD covariance"));
        }
        if !is_spd(&self.omega()) || !is_spd(&self.xi()) {
            return Err(invalid("priors.omega/xi", "must give SPD covariances"));
        }
        if self.priors.rope_sigma_across <= 0.0 {
            return Err(invalid("priors.rope_sigma_across", "must be > 0"));
        }
        if let Some(a) = self.priors.rope_sigma_along {
            if a <= 0.0 {
                return Err(invalid("priors.rope_sigma_along", "must be > 0"));
            }
        }
        if self.assoc.buoy_gate <= 0.0 || self.assoc.rope_gate <= 0.0 {
            return Err(invalid("assoc", "gates must be > 0"));
        }
        if self.depths.buoy_depth < 0.0 || self.depths.rope_depth < 0.0 {
            return Err(invalid("depths", "target depths must be >= 0"));
        }
        if self.solver.max_iterations == 0 || self.solver.update_max_iterations == 0 {
            return Err(invalid("solver.max_iterations", "must be >= 1"));
        }
        Ok(())
    }

    pub fn method(&self) -> Result<MethodKind, ConfigError> {
        self.run
            .method
            .parse()
            .map_err(|e: String| invalid("run.method", e))
    }

    pub fn survey_plan(&self) -> SurveyPlan {
        SurveyPlan {
            swath_offsets: self.sim.swath_offsets.clone(),
            speed: self.sim.speed,
            ping_rate: self.sim.ping_rate,
            pose_rate: self.sim.pose_rate,
            lead_in: self.sim.lead_in,
            max_range: self.sim.max_range,
            abeam_tol: self.sim.abeam_tol_deg.to_radians(),
            vehicle_depth: self.sim.vehicle_depth,
        }
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec {
            odom_sigma: self.noise.odom_sigma,
            odom_bias: self.noise.odom_bias,
            range_sigma: self.noise.range_sigma,
            detect_prob_rope: self.noise.detect_prob_rope,
            detect_prob_buoy: self.noise.detect_prob_buoy,
            undulation_amp: self.noise.undulation_amp,
            undulation_period: self.noise.undulation_period,
            seed: self.run.seed,
            sigma_floor: self.noise.sigma_floor,
        }
    }

    pub fn sigma0(&self) -> Matrix3<f64> {
        let s = self.priors.sigma0;
        Matrix3::from_diagonal(&nalgebra::Vector3::new(s[0] * s[0], s[1] * s[1], s[2] * s[2]))
    }

    pub fn omega(&self) -> Matrix2<f64> {
        let s = self.priors.omega;
        Matrix2::new(s[0] * s[0], 0.0, 0.0, s[1] * s[1])
    }

    pub fn xi(&self) -> Matrix2<f64> {
        let s = self.priors.xi;
        Matrix2::new(s[0] * s[0], 0.0, 0.0, s[1] * s[1])
    }

    pub fn frontend_config(&self) -> FrontendConfig {
        FrontendConfig {
            buoy_gate: self.assoc.buoy_gate,
            rope_gate: self.assoc.rope_gate,
            sigma_along: self.priors.rope_sigma_along,
            sigma_across: self.priors.rope_sigma_across,
            buoy_obs_cov: self.omega(),
            rope_obs_cov: self.xi(),
            depths: TargetDepthTable {
                buoy_depth: self.depths.buoy_depth,
                rope_depth: self.depths.rope_depth,
            },
        }
    }

    /// Solver schedule for per-step incremental updates (bounded work).
    pub fn update_solver_config(&self) -> SolverConfig {
        SolverConfig {
            max_iterations: self.solver.update_max_iterations,
            ..self.solver_config()
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            max_iterations: self.solver.max_iterations,
            rel_tolerance: self.solver.rel_tolerance,
            step_tolerance: self.solver.step_tolerance,
            lambda_init: self.solver.lambda_init,
            lambda_up: self.solver.lambda_up,
            lambda_down: self.solver.lambda_down,
            ..SolverConfig::default()
        }
    }

    /// Canonical serialization used for provenance hashing.
    pub fn canonical_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        crate::io::string_hash(&self.canonical_string())[..16].to_string()
    }
}
