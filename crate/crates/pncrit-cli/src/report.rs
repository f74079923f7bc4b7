//! Versioned JSON reports.
//!
//! Every subcommand emits one JSON document that embeds the fully
//! resolved configuration (including the effective seed), so a report is
//! reproducible from its own contents. Reports carry no timestamps:
//! identical config and seed must produce byte-identical output. Files
//! are written atomically via a sibling temp file.

use std::io::Write;
use std::path::Path;

use pncrit_core::expfam::FilterReport;
use pncrit_core::mle::MleSolution;
use pncrit_core::modelsel::ModelComparison;
use pncrit_core::risk::RiskReport;
use pncrit_core::threshold::ThresholdSpec;
use serde::Serialize;

use crate::config::{CompareConfig, CriterionConfig, OrderArg, SimulateConfig};
use crate::error::CliError;
use crate::ingest::ColumnScale;
use crate::pipeline::SamplingProvenance;

pub const SCHEMA_VERSION: u32 = 1;

/// `threshold` subcommand output.
#[derive(Serialize)]
pub struct ThresholdDoc {
    pub schema: u32,
    pub command: &'static str,
    pub threshold: ThresholdSpec,
}

/// `sample-size` subcommand output.
#[derive(Serialize)]
pub struct SampleSizeDoc {
    pub schema: u32,
    pub command: &'static str,
    pub config: SampleSizeInputs,
    pub required_n: u64,
    pub threshold: ThresholdSpec,
}

#[derive(Serialize)]
pub struct SampleSizeInputs {
    pub p: usize,
    pub m_hat: f64,
    pub alpha: f64,
}

/// `multinomial` subcommand output.
#[derive(Serialize)]
pub struct MultinomialDoc {
    pub schema: u32,
    pub command: &'static str,
    pub config: MultinomialInputs,
    pub data: MultinomialData,
    pub risk: RiskReport,
}

#[derive(Serialize)]
pub struct MultinomialInputs {
    pub counts: String,
    pub alpha: f64,
    pub order: OrderArg,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pseudo_count: Option<u64>,
}

#[derive(Serialize)]
pub struct MultinomialData {
    pub cells: usize,
    /// Observed sample size (before any pseudo-counts).
    pub n: u64,
    pub labels: Vec<String>,
    pub counts: Vec<u64>,
    /// Counts actually screened (after pseudo-counts, if any).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub screened_counts: Option<Vec<u64>>,
    pub m_hat: f64,
}

/// `criterion` subcommand output.
#[derive(Serialize)]
pub struct CriterionDoc {
    pub schema: u32,
    pub command: &'static str,
    /// The resolved run config; `seed` is the effective seed.
    pub config: CriterionConfig,
    pub data: DataBlock,
    pub model: ModelBlock,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<MleSolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingProvenance>,
    pub risk: RiskReport,
}

#[derive(Serialize)]
pub struct DataBlock {
    pub path: String,
    pub rows: usize,
    /// Rows actually used to fit (the leading slice).
    pub base_rows: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub column_scales: Vec<ColumnScale>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub level_labels: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub level_counts: Vec<u64>,
}

#[derive(Serialize)]
pub struct ModelBlock {
    pub kind: &'static str,
    pub p: usize,
    pub raw_dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterReport>,
}

/// `compare` subcommand output.
#[derive(Serialize)]
pub struct CompareDoc {
    pub schema: u32,
    pub command: &'static str,
    pub config: CompareConfig,
    pub data: DataBlock,
    pub first: CandidateBlock,
    pub second: CandidateBlock,
    pub comparison: ModelComparison,
}

#[derive(Serialize)]
pub struct CandidateBlock {
    pub model: ModelBlock,
    pub fit: MleSolution,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingProvenance>,
}

/// `simulate` subcommand output.
#[derive(Serialize)]
pub struct SimulateDoc {
    pub schema: u32,
    pub command: &'static str,
    pub config: SimulateConfig,
    pub result: pncrit_verify::scenarios::SimulationResult,
}

/// Serialize a report and write it once: to stdout, or atomically into
/// the target path through a temp file in the same directory.
pub fn emit<T: Serialize>(doc: &T, output: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(doc)
        .map_err(|e| CliError::Numeric(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    match output {
        None => {
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Numeric(format!("cannot write report: {e}")))?;
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| {
                CliError::Numeric(format!(
                    "cannot create temp file next to '{}': {e}",
                    path.display()
                ))
            })?;
            tmp.write_all(text.as_bytes())
                .map_err(|e| CliError::Numeric(format!("cannot write report: {e}")))?;
            tmp.persist(path).map_err(|e| {
                CliError::Numeric(format!("cannot persist report '{}': {e}", path.display()))
            })?;
        }
    }
    Ok(())
}
