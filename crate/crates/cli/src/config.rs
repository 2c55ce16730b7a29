//! Run configuration files: one TOML document per run, fully determining the
//! outputs (seeds included). Every numeric field is validated before any
//! computation starts, and the resolved configuration is hashed into each
//! output file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use ptcure::data::ColumnMap;
use ptcure::linalg::Matrix;
use ptcure::model::EtaCovariance;
use ptcure::sampler::SamplerConfig;
use ptcure::Scenario;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFile {
    pub data: DataSection,
    pub prior: PriorSection,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub report: ReportSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: String,
    pub time_col: String,
    pub status_col: String,
    #[serde(default)]
    pub covariate_cols: Vec<String>,
}

impl DataSection {
    pub fn column_map(&self) -> ColumnMap {
        ColumnMap {
            time_col: self.time_col.clone(),
            status_col: self.status_col.clone(),
            covariate_cols: self.covariate_cols.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub theta_mean: Vec<f64>,
    pub theta_var: Vec<f64>,
    pub eta_mean: MuSection,
    pub eta_cov: EtaCovSection,
}

/// Either explicit values or "npmle" (elicited from the isotonic survival
/// pre-check on the loaded data).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuSection {
    Values(Vec<f64>),
    Mode(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaCovSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ar1: Option<Ar1Section>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explicit: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ar1Section {
    pub scale: f64,
    pub rho: f64,
}

impl EtaCovSection {
    pub fn to_model(&self) -> Result<EtaCovariance<f64>, CliError> {
        match (&self.ar1, &self.explicit) {
            (Some(ar1), None) => Ok(EtaCovariance::Ar1 {
                scale: ar1.scale,
                rho: ar1.rho,
            }),
            (None, Some(rows)) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(CliError::validation(
                        "prior.eta_cov.explicit must be a square matrix",
                    ));
                }
                Ok(EtaCovariance::Explicit(Matrix::from_fn(n, n, |i, j| {
                    rows[i][j]
                })))
            }
            _ => Err(CliError::validation(
                "prior.eta_cov needs exactly one of `ar1` or `explicit`",
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// credible level for the interval estimates
    pub level: f64,
    /// covariate profiles (without the intercept) for cure and survival
    pub profiles: Vec<Vec<f64>>,
    /// also report posterior means of transformed quantities
    pub functional_mean: bool,
    pub max_lag: usize,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection {
            level: 0.95,
            profiles: vec![Vec::new()],
            functional_mean: false,
            max_lag: 40,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateFile {
    pub scenario: SimulateSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n: usize,
    pub theta_true: Vec<f64>,
    pub gompertz: ptcure::simulation::GompertzParams<f64>,
    pub scheme: ptcure::simulation::MonitoringScheme<f64>,
    pub seed: u64,
    #[serde(default)]
    pub rep_index: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyFile {
    pub study: StudySection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    #[serde(flatten)]
    pub scenario: Scenario,
    /// rayon worker count; 0 uses every core (results are identical either way)
    #[serde(default)]
    pub workers: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseFile {
    pub diagnose: DiagnoseSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseSection {
    pub chains: Vec<String>,
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
}

fn default_max_lag() -> usize {
    40
}

pub fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))
}

/// FNV-1a hash of the resolved configuration's canonical JSON; embedded in
/// every output file so results can be traced back to their exact inputs.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in canonical.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}
