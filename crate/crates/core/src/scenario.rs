//! JSON scenario files.
//!
//! A scenario bundles the simulation geometry with the estimator parameters
//! used to process it. Unknown keys are rejected so that a typo in a physics
//! parameter cannot be silently ignored.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, DEFAULT_CHI2_THRESHOLD};
use crate::geometry::{Anchor, Wall};
use crate::kfbank::KfParams;
use crate::metrics::{ErrorMode, Exclusion};
use crate::rangesim::{ScenarioConfig, Trajectory, TrajectorySpec, WallRandomization};
use crate::wls::WlsOptions;

pub const SCHEMA_VERSION: u32 = 1;

const BUNDLED: [(&str, &str); 4] = [
    ("case1", include_str!("../scenarios/case1.json")),
    ("case2", include_str!("../scenarios/case2.json")),
    ("case3", include_str!("../scenarios/case3.json")),
    ("case4", include_str!("../scenarios/case4.json")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSettings {
    #[serde(default = "default_chi2")]
    pub chi2_threshold: f64,
    pub sigma_u: f64,
    pub sigma_x: f64,
    #[serde(default = "default_min_los")]
    pub min_los: usize,
    #[serde(default)]
    pub initial_rate_var: f64,
    #[serde(default = "default_tol")]
    pub wls_tol: f64,
    #[serde(default = "default_max_iter")]
    pub wls_max_iter: usize,
}

fn default_chi2() -> f64 {
    DEFAULT_CHI2_THRESHOLD
}
fn default_min_los() -> usize {
    2
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    50
}

impl EstimatorSettings {
    pub fn to_config(&self, dt: f64) -> Result<EstimatorConfig<f64>> {
        let kf = KfParams::new(dt, self.sigma_u, self.sigma_x)?.with_initial_rate_var(self.initial_rate_var)?;
        let cfg = EstimatorConfig {
            chi2_threshold: self.chi2_threshold,
            wls: WlsOptions { tol: self.wls_tol, max_iter: self.wls_max_iter },
            min_los: self.min_los,
            ..EstimatorConfig::new(kf)
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub anchors: Vec<Anchor<f64>>,
    #[serde(default)]
    pub walls: Vec<Wall<f64>>,
    #[serde(default)]
    pub randomize_walls: Option<WallRandomization>,
    pub trajectory: TrajectorySpec,
    pub speed: f64,
    pub dt: f64,
    pub sigma_m: f64,
    #[serde(default)]
    pub seed: u64,
    pub estimator: EstimatorSettings,
    /// Default epochs left out of reports: `"lap1"`, ranges like `0..40`, or `"none"`.
    #[serde(default)]
    pub report_exclude: Option<String>,
    #[serde(default)]
    pub metric: Option<String>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        if sc.schema_version != SCHEMA_VERSION {
            return Err(Error::Scenario(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                sc.schema_version
            )));
        }
        sc.sim_config(sc.seed).validate().map_err(|e| Error::Scenario(e.to_string()))?;
        sc.estimator_config()?;
        if let Some(m) = &sc.metric {
            m.parse::<ErrorMode>().map_err(|e| Error::Scenario(format!("metric: {e}")))?;
        }
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Scenario(msg) => Error::Scenario(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// One of the bundled scenarios: `case1` .. `case4`.
    pub fn bundled(name: &str) -> Option<Self> {
        BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| Self::from_json(text).expect("bundled scenario is valid"))
    }

    pub fn bundled_names() -> impl Iterator<Item = &'static str> {
        BUNDLED.iter().map(|(n, _)| *n)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn sim_config(&self, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            anchors: self.anchors.clone(),
            walls: self.walls.clone(),
            randomize_walls: self.randomize_walls.clone(),
            trajectory: self.trajectory,
            speed: self.speed,
            dt: self.dt,
            sigma_m: self.sigma_m,
            rng_seed: seed,
        }
    }

    pub fn estimator_config(&self) -> Result<EstimatorConfig<f64>> {
        self.estimator.to_config(self.dt)
    }

    pub fn metric(&self) -> ErrorMode {
        self.metric.as_deref().and_then(|m| m.parse().ok()).unwrap_or(ErrorMode::Euclidean)
    }

    /// Resolves the scenario's default exclusion against a trajectory.
    pub fn default_exclusion(&self, trajectory: &Trajectory<f64>) -> Result<Exclusion> {
        resolve_exclusion(self.report_exclude.as_deref().unwrap_or("none"), |lap| trajectory.first_index_of_lap(lap))
    }
}

/// Parses an exclusion spec; `lap1` needs the index of the first lap-2 epoch.
pub fn resolve_exclusion(spec: &str, first_index_of_lap: impl Fn(u32) -> Option<usize>) -> Result<Exclusion> {
    if spec.trim() == "lap1" {
        let k = first_index_of_lap(2).ok_or_else(|| Error::invalid("lap1 exclusion needs a trajectory with a second lap"))?;
        return Ok(Exclusion::first_lap(k));
    }
    Exclusion::parse_ranges(spec)
}
