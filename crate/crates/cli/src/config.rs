use std::path::PathBuf;

use pcombine_core::engine::{DEFAULT_MAX_CELLS, EnsembleCalibration, Engine, TableSettings};
use pcombine_core::TableCache;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::Cli;

pub const DEFAULT_SEED: u64 = 20_220_101;
pub const DEFAULT_B: usize = 100_000;

/// Optional defaults read from `--config`. Precedence is flags, then this
/// file, then built-in values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub table_dir: Option<PathBuf>,
    #[serde(rename = "B")]
    pub b: Option<usize>,
    pub max_cells: Option<u128>,
    pub ensemble_calibration: Option<String>,
    pub reps: Option<usize>,
    pub alpha: Option<f64>,
    pub delta: Option<f64>,
}

/// Resolved global settings.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub seed: u64,
    pub threads: Option<usize>,
    pub table_dir: Option<PathBuf>,
    #[serde(rename = "B")]
    pub b: usize,
    pub max_cells: u128,
    pub ensemble_calibration: String,
    pub config_file: Option<PathBuf>,
    #[serde(skip)]
    pub file: FileConfig,
}

pub fn parse_ensemble(s: &str) -> Result<EnsembleCalibration, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "cauchy" | "cauchy_approx" => Ok(EnsembleCalibration::CauchyApprox),
        "mc" | "montecarlo" => Ok(EnsembleCalibration::MonteCarlo),
        other => Err(CliError::Usage(format!("unknown ensemble calibration '{other}' (use cauchy or mc)"))),
    }
}

impl Settings {
    pub fn resolve(cli: &Cli) -> Result<Self, CliError> {
        let file = match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
                toml::from_str::<FileConfig>(&text)
                    .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };
        let ensemble = cli
            .ensemble_calibration
            .clone()
            .or_else(|| file.ensemble_calibration.clone())
            .unwrap_or_else(|| "cauchy".into());
        parse_ensemble(&ensemble)?;
        let threads = cli.threads.or(file.threads);
        if threads == Some(0) {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        Ok(Self {
            seed: cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            threads,
            table_dir: cli.table_dir.clone().or_else(|| file.table_dir.clone()),
            b: cli.b.or(file.b).unwrap_or(DEFAULT_B),
            max_cells: cli.max_cells.or(file.max_cells).unwrap_or(DEFAULT_MAX_CELLS),
            ensemble_calibration: ensemble,
            config_file: cli.config.clone(),
            file,
        })
    }

    pub fn ensemble(&self) -> EnsembleCalibration {
        parse_ensemble(&self.ensemble_calibration).expect("validated in resolve")
    }

    pub fn reps(&self, flag: Option<usize>, builtin: usize) -> usize {
        flag.or(self.file.reps).unwrap_or(builtin)
    }

    pub fn alpha(&self, flag: Option<f64>, builtin: f64) -> f64 {
        flag.or(self.file.alpha).unwrap_or(builtin)
    }

    pub fn delta(&self, flag: Option<f64>) -> f64 {
        flag.or(self.file.delta).unwrap_or(pcombine_core::pvalue::DEFAULT_DELTA)
    }

    /// Engine with the resolved table settings. Tables persist under the table
    /// directory when one is set.
    pub fn engine(&self) -> Engine {
        let table = TableSettings::new(self.b, self.seed).with_max_cells(self.max_cells);
        let cache = match &self.table_dir {
            Some(dir) => TableCache::with_dir(dir),
            None => TableCache::in_memory(),
        };
        Engine::with_cache(table, cache).with_ensemble_calibration(self.ensemble())
    }
}
