//! Replayable run manifests.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use qtask_core::cutting::CutPlan;
use qtask_core::sim::BackendConfig;
use qtask_runtime::Policy;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GhzCut,
    GhzNocut,
    QirRun,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyName {
    #[default]
    RoundRobin,
    LeastLoaded,
}

impl From<PolicyName> for Policy {
    fn from(p: PolicyName) -> Self {
        match p {
            PolicyName::RoundRobin => Policy::RoundRobin,
            PolicyName::LeastLoaded => Policy::LeastLoaded,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TransportName {
    #[default]
    Memory,
    Socket,
    Process,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Table,
}

/// Everything needed to repeat a run. Written next to the report as
/// `<stem>.manifest.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cuts: Option<CutPlan>,
    pub shots: u64,
    pub workers: usize,
    #[serde(default)]
    pub policy: PolicyName,
    pub backend: String,
    pub seed: u64,
    #[serde(default = "one")]
    pub batch: usize,
    #[serde(default)]
    pub dedup: bool,
    #[serde(default)]
    pub exact: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub transport: TransportName,
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl RunManifest {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read manifest {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid manifest {}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    /// Checks every field before anything runs.
    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.shots == 0 {
            return usage("shots must be at least 1".into());
        }
        if self.workers == 0 {
            return usage("workers must be at least 1".into());
        }
        if self.batch == 0 {
            return usage("batch must be at least 1".into());
        }
        self.backend
            .parse::<BackendConfig>()
            .map_err(|e| CliError::Usage(format!("backend {:?}: {e}", self.backend)))?;
        match self.experiment {
            Experiment::GhzCut => {
                let n = self.require_n()?;
                let Some(plan) = &self.cuts else {
                    return usage("ghz-cut needs cuts".into());
                };
                plan.check_for(n)
                    .map_err(|e| CliError::Usage(e.to_string()))?;
            }
            Experiment::GhzNocut => {
                let n = self.require_n()?;
                qtask_core::ghz_circuit(n).map_err(|e| CliError::Usage(e.to_string()))?;
            }
            Experiment::QirRun => {
                if self.file.is_none() {
                    return usage("qir-run needs file".into());
                }
            }
        }
        Ok(())
    }

    fn require_n(&self) -> Result<usize, CliError> {
        self.n
            .ok_or_else(|| CliError::Usage("manifest is missing the qubit count n".into()))
    }
}

/// `out/report.csv` becomes `out/report.manifest.json`.
pub fn manifest_path_for(report: &Path) -> PathBuf {
    let stem = report
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    report.with_file_name(format!("{stem}.manifest.json"))
}
