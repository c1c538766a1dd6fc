//! In-process models hub and the commands behind the `hemskit` binary.
//!
//! Every command turns a [`RunConfig`] and a seed into an [`OutputSet`];
//! nothing touches the output directory until the whole run succeeded.

pub mod commands;
pub mod forecast;
pub mod io;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flex::EpsoParams;
pub use forecast::{run_forecast, ForecastConfig, ForecastInputs, ForecastOutcome};
pub use io::OutputSet;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Forecast,
    Collab,
    Flex,
    Schedule,
    Evaluate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Forecast => "forecast",
            Command::Collab => "collab",
            Command::Flex => "flex",
            Command::Schedule => "schedule",
            Command::Evaluate => "evaluate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSection {
    /// Long-format grid CSV; synthetic data is generated when both paths
    /// are absent.
    pub nwp_path: Option<PathBuf>,
    /// `timestamp,value` PV observations, kW.
    pub pv_path: Option<PathBuf>,
    pub synthetic_days: usize,
    pub pipeline: ForecastConfig,
}

impl Default for ForecastSection {
    fn default() -> Self {
        Self { nwp_path: None, pv_path: None, synthetic_days: 55, pipeline: ForecastConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollabSection {
    /// `timestamp,id...` panel; a VAR process is simulated when absent.
    pub panel_path: Option<PathBuf>,
    pub n_series: usize,
    pub length: usize,
    pub p: usize,
    /// Absolute penalty; when absent, `lambda_fraction · λ_max`.
    pub lambda: Option<f64>,
    pub lambda_fraction: f64,
    pub rho: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub workers: usize,
    /// Rounds whose broadcast payloads stay in the round log.
    pub log_rounds: usize,
}

impl Default for CollabSection {
    fn default() -> Self {
        Self {
            panel_path: None,
            n_series: 5,
            length: 500,
            p: 2,
            lambda: None,
            lambda_fraction: 0.1,
            rho: 50.0,
            tol: 1e-10,
            max_iter: 20_000,
            workers: 3,
            log_rounds: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlexSection {
    /// JSON `{fleet, base_load, baseline, pv_scenarios}`; generated when
    /// absent.
    pub instance_path: Option<PathBuf>,
    pub horizon: usize,
    pub scenarios: usize,
    pub alpha: f64,
    pub k: usize,
    pub test_k: usize,
    pub nu: f64,
    /// Defaults to `1 / horizon`.
    pub gamma: Option<f64>,
    pub coef0: f64,
    pub unfeasible_scale: f64,
    pub epso: EpsoParams,
}

impl Default for FlexSection {
    fn default() -> Self {
        Self {
            instance_path: None,
            horizon: 8,
            scenarios: 10,
            alpha: 0.9,
            k: 20,
            test_k: 50,
            nu: 0.05,
            gamma: None,
            coef0: 0.0,
            unfeasible_scale: 1.5,
            epso: EpsoParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    /// JSON `{fleet, tariff, pv, base_load}`; generated when absent.
    pub instance_path: Option<PathBuf>,
    pub horizon: usize,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self { instance_path: None, horizon: 24 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    /// Forecast CSV as written by `forecast`.
    pub forecast_path: Option<PathBuf>,
    /// `timestamp,value` observations.
    pub observations_path: Option<PathBuf>,
}

/// Parameters of every command; each run uses its own section.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub forecast: ForecastSection,
    pub collab: CollabSection,
    pub flex: FlexSection,
    pub schedule: ScheduleSection,
    pub evaluate: EvaluateSection,
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Schema(format!("config: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::from_json(&text)
    }

    /// The command-line seed wins over the config's.
    pub fn resolve_seed(&mut self, cli: Option<u64>) -> u64 {
        let seed = cli.or(self.seed).unwrap_or(DEFAULT_SEED);
        self.seed = Some(seed);
        seed
    }
}

/// Result of one command: files to write and a human-readable summary.
pub struct RunOutput {
    pub files: OutputSet,
    pub summary: Vec<String>,
}

/// Runs `command` fully in memory.
pub fn run(command: Command, config: &RunConfig, seed: u64) -> Result<RunOutput> {
    let mut cfg = config.clone();
    cfg.seed = Some(seed);
    let mut out = match command {
        Command::Forecast => commands::forecast(&cfg.forecast, seed)?,
        Command::Collab => commands::collab(&cfg.collab, seed)?,
        Command::Flex => commands::flex(&cfg.flex, seed)?,
        Command::Schedule => commands::schedule(&cfg.schedule, seed)?,
        Command::Evaluate => commands::evaluate(&cfg.evaluate)?,
    };
    out.files.add("config.json", io::json_bytes(&cfg)?);
    Ok(out)
}

/// 0 success, 1 numerical non-convergence, 2 I/O, schema or other input
/// errors.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NotConverged { .. } => 1,
        _ => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.collab.lambda = Some(0.25);
        cfg.flex.gamma = Some(0.3);
        cfg.seed = Some(9);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&json).unwrap(), cfg);
        assert!(RunConfig::from_json("{\"bogus\": 1}").is_err());
        let partial = RunConfig::from_json("{\"flex\": {\"k\": 5}}").unwrap();
        assert_eq!(partial.flex.k, 5);
        assert_eq!(partial.flex.horizon, 8);
    }

    #[test]
    fn seed_precedence() {
        let mut cfg = RunConfig { seed: Some(3), ..RunConfig::default() };
        assert_eq!(cfg.resolve_seed(Some(7)), 7);
        assert_eq!(cfg.resolve_seed(None), 7);
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.resolve_seed(None), DEFAULT_SEED);
    }
}
