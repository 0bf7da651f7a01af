//! Scenario files (TOML).
//!
//! ```toml
//! seed = 1
//!
//! [field]
//! n = 100
//! bounds = [0.0, 0.0, 100.0, 100.0]   # xmin, ymin, xmax, ymax
//!
//! [motion]
//! model = "constant-velocity"
//! x0 = [30.0, 10.0]
//! velocity = [1.0, 2.0]
//!
//! [observation]
//! period = 1.0
//! duration = 40.0
//! ```
//!
//! Everything except `[field]` and `[motion]` has defaults.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{CvExperiment, EstimatorConfig, TrackExperiment};
use crate::geom::{Leg, RandomWalk, Rect, TrajectoryModel, Vec2};
use crate::ppr::{Kernel, DEFAULT_GRID};
use crate::svm::{Margin, Method, DEFAULT_C};
use crate::track::{TrackerConfig, VsMode, DEFAULT_WINDOW, SIGMA_MIN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    pub field: FieldConfig,
    pub motion: MotionConfig,
    #[serde(default)]
    pub observation: ObservationConfig,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub bench: BenchConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub n: usize,
    pub bounds: [f64; 4],
    /// Fixed layout seed; otherwise the layout follows the run seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegConfig {
    pub velocity: [f64; 2],
    pub end_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MotionConfig {
    ConstantVelocity {
        x0: [f64; 2],
        velocity: [f64; 2],
    },
    MultiLeg {
        x0: [f64; 2],
        legs: Vec<LegConfig>,
    },
    ConstantAcceleration {
        x0: [f64; 2],
        v0: [f64; 2],
        a0: [f64; 2],
    },
    RandomWalk {
        x0: [f64; 2],
        v0: [f64; 2],
        position_var: f64,
        velocity_var: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservationConfig {
    pub period: f64,
    pub duration: f64,
    /// Probability that a report is correct.
    pub keep_probability: f64,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        Self {
            period: 1.0,
            duration: 30.0,
            keep_probability: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    pub method: Method,
    /// Soft-margin bound; `hard = true` ignores it.
    pub c: f64,
    pub hard: bool,
    pub kernel: Kernel,
    pub bandwidth: Option<f64>,
    pub grid: usize,
    pub window: usize,
    pub sigma_min: f64,
    pub vs_mode: VsMode,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            method: Method::Ppr,
            c: DEFAULT_C,
            hard: false,
            kernel: Kernel::Gaussian,
            bandwidth: None,
            grid: DEFAULT_GRID,
            window: DEFAULT_WINDOW,
            sigma_min: SIGMA_MIN,
            vs_mode: VsMode::Midpoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    /// Sensor counts for batch sweeps (ignored by tracking scenarios).
    pub sensor_counts: Vec<usize>,
    pub reps: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sensor_counts: Vec::new(),
            reps: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// Field-level diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn vec2(v: [f64; 2]) -> Vec2 {
    Vec2::new(v[0], v[1])
}

/// Parsed and validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub bounds: Rect,
    pub model: TrajectoryModel,
    pub samples: usize,
    /// Hex SHA-256 of the file contents.
    pub hash: String,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .message()
                .split('`')
                .nth(1)
                .filter(|_| e.message().contains("field"))
                .unwrap_or("")
                .to_string();
            ConfigError {
                field,
                message: e.message().trim().to_string(),
            }
        })?;
        let hash = hex(&Sha256::digest(text.as_bytes()));
        Self::from_config(config, hash)
    }

    pub fn from_config(config: ScenarioConfig, hash: String) -> Result<Self, ConfigError> {
        let f = &config.field;
        if f.n < 3 {
            return Err(ConfigError::new(
                "field.n",
                format!("need at least 3 sensors, got {}", f.n),
            ));
        }
        let [x0, y0, x1, y1] = f.bounds;
        let bounds = Rect::new(Vec2::new(x0, y0), Vec2::new(x1, y1))
            .map_err(|e| ConfigError::new("field.bounds", e.to_string()))?;

        let obs = &config.observation;
        if !(obs.period > 0.0 && obs.period.is_finite()) {
            return Err(ConfigError::new("observation.period", "must be positive"));
        }
        if !obs.duration.is_finite() {
            return Err(ConfigError::new("observation.duration", "must be finite"));
        }
        let samples = (obs.duration / obs.period + 1e-9).floor();
        if !(samples >= 2.0) {
            return Err(ConfigError::new(
                "observation.duration",
                "duration / period must give at least 2 samples",
            ));
        }
        if !(obs.keep_probability > 0.0 && obs.keep_probability <= 1.0) {
            return Err(ConfigError::new(
                "observation.keep_probability",
                "must lie in (0, 1]",
            ));
        }

        let model = match &config.motion {
            MotionConfig::ConstantVelocity { x0, velocity } => {
                TrajectoryModel::constant_velocity(vec2(*x0), vec2(*velocity))
            }
            MotionConfig::MultiLeg { x0, legs } => TrajectoryModel::multi_leg(
                vec2(*x0),
                legs.iter()
                    .map(|l| Leg {
                        velocity: vec2(l.velocity),
                        end_time: l.end_time,
                    })
                    .collect(),
            ),
            MotionConfig::ConstantAcceleration { x0, v0, a0 } => {
                TrajectoryModel::constant_acceleration(vec2(*x0), vec2(*v0), vec2(*a0))
            }
            MotionConfig::RandomWalk {
                x0,
                v0,
                position_var,
                velocity_var,
            } => RandomWalk::constant_velocity(
                vec2(*x0),
                vec2(*v0),
                *position_var,
                *velocity_var,
                obs.period,
            )
            .map(TrajectoryModel::GaussianRandomWalk),
        }
        .map_err(|e| ConfigError::new("motion", e.to_string()))?;

        let est = &config.estimator;
        if !est.hard && !(est.c > 0.0 && est.c.is_finite()) {
            return Err(ConfigError::new("estimator.c", "must be positive"));
        }
        if let Some(h) = est.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(ConfigError::new("estimator.bandwidth", "must be positive"));
            }
        }
        if est.grid < 8 {
            return Err(ConfigError::new("estimator.grid", "must be at least 8"));
        }
        if est.window < 2 {
            return Err(ConfigError::new("estimator.window", "must be at least 2"));
        }
        if !(est.sigma_min >= 0.0 && est.sigma_min.is_finite()) {
            return Err(ConfigError::new(
                "estimator.sigma_min",
                "must be non-negative",
            ));
        }
        if config.bench.reps == 0 {
            return Err(ConfigError::new("bench.reps", "must be at least 1"));
        }
        if let Some(&n) = config.bench.sensor_counts.iter().find(|&&n| n < 3) {
            return Err(ConfigError::new(
                "bench.sensor_counts",
                format!("need at least 3 sensors, got {n}"),
            ));
        }
        if config.output.dir.is_empty() {
            return Err(ConfigError::new("output.dir", "must not be empty"));
        }
        Ok(Self {
            config,
            bounds,
            model,
            samples: samples as usize,
            hash,
        })
    }

    pub fn margin(&self) -> Margin {
        if self.config.estimator.hard {
            Margin::Hard
        } else {
            Margin::Soft(self.config.estimator.c)
        }
    }

    pub fn is_tracking(&self) -> bool {
        matches!(self.model, TrajectoryModel::GaussianRandomWalk(_))
    }

    pub fn estimator(&self, method: Method) -> EstimatorConfig {
        let e = &self.config.estimator;
        EstimatorConfig {
            method,
            margin: self.margin(),
            kernel: e.kernel,
            bandwidth: e.bandwidth,
            grid: e.grid,
        }
    }

    pub fn tracker(&self) -> TrackerConfig {
        let e = &self.config.estimator;
        TrackerConfig {
            window: e.window,
            sigma_min: e.sigma_min,
            vs_mode: e.vs_mode,
            margin: self.margin(),
        }
    }

    pub fn cv_experiment(&self, method: Method) -> CvExperiment {
        CvExperiment {
            bounds: self.bounds,
            model: self.model.clone(),
            period: self.config.observation.period,
            samples: self.samples,
            keep_probability: self.config.observation.keep_probability,
            estimator: self.estimator(method),
            field_seed: self.config.field.seed,
        }
    }

    pub fn track_experiment(&self) -> TrackExperiment {
        TrackExperiment {
            n_sensors: self.config.field.n,
            bounds: self.bounds,
            model: self.model.clone(),
            period: self.config.observation.period,
            samples: self.samples,
            keep_probability: self.config.observation.keep_probability,
            tracker: self.tracker(),
            field_seed: self.config.field.seed,
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const CV: &str = r#"
seed = 3
[field]
n = 100
bounds = [0.0, 0.0, 100.0, 100.0]
[motion]
model = "constant-velocity"
x0 = [30.0, 10.0]
velocity = [1.0, 2.0]
[observation]
period = 1.0
duration = 40.0
"#;

    #[test]
    fn parses_minimal_cv_scenario() {
        let s = Scenario::parse(CV).unwrap();
        assert_eq!(s.samples, 40);
        assert_eq!(s.config.estimator.method, Method::Ppr);
        assert_eq!(s.margin(), Margin::Soft(10.0));
        assert!(!s.is_tracking());
        assert_eq!(s.hash.len(), 64);
    }

    #[test]
    fn unknown_key_is_reported_by_name() {
        let err = Scenario::parse(&CV.replace("duration", "durationn")).unwrap_err();
        assert_eq!(err.field, "durationn", "{err:?}");
    }

    #[test]
    fn field_level_diagnostics() {
        let err = Scenario::parse(&CV.replace("n = 100", "n = 2")).unwrap_err();
        assert_eq!(err.field, "field.n");
        let err = Scenario::parse(&CV.replace("duration = 40.0", "duration = 1.0")).unwrap_err();
        assert_eq!(err.field, "observation.duration");
        let err = Scenario::parse(&CV.replace("velocity = [1.0, 2.0]", "velocity = [0.0, 0.0]"))
            .unwrap_err();
        assert_eq!(err.field, "motion");
    }

    #[test]
    fn random_walk_uses_sampling_period() {
        let text = CV.replace(
            "model = \"constant-velocity\"\nx0 = [30.0, 10.0]\nvelocity = [1.0, 2.0]",
            "model = \"random-walk\"\nx0 = [100.0, 100.0]\nv0 = [1.0, 1.0]\nposition_var = 0.0\nvelocity_var = 0.01",
        );
        let s = Scenario::parse(&text).unwrap();
        assert!(s.is_tracking());
        match s.model {
            TrajectoryModel::GaussianRandomWalk(w) => assert_eq!(w.period, 1.0),
            _ => unreachable!(),
        }
    }
}
