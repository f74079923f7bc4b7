//! CSV ingestion: headered UTF-8 tables into model-ready matrices.
//!
//! Continuous columns are selected by header name and may be rescaled by
//! twice their column maximum (a two-pass rule that puts every value in
//! (0, 1) when the raw values are positive). Categorical columns are
//! combined into a composite key and coded to integer levels through the
//! explicit merge lists in the configuration.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::{CategoricalConfig, RescaleRule};
use crate::error::CliError;

/// Per-column provenance of the half-max rescale.
#[derive(Debug, Clone, Serialize)]
pub struct ColumnScale {
    pub column: String,
    /// The raw column maximum; stored values are `raw / (2 * max)`.
    pub max: f64,
}

/// A parsed data table in the layout the model builders expect:
/// continuous columns first, then one coded level column if categorical
/// structure is configured.
#[derive(Debug, Clone)]
pub struct IngestedTable {
    pub rows: DMatrix<f64>,
    pub n_cont: usize,
    /// Number of category levels (0 when no categorical coding).
    pub cat_levels: usize,
    /// Observations per level, in config order (empty when no coding).
    pub level_counts: Vec<u64>,
    pub level_labels: Vec<String>,
    pub scales: Vec<ColumnScale>,
}

impl IngestedTable {
    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::Reader::from_path(path)
        .map_err(|e| CliError::Data(format!("cannot read data file '{}': {e}", path.display())))
}

fn header_index(
    headers: &csv::StringRecord,
    wanted: &str,
    path: &Path,
) -> Result<usize, CliError> {
    headers
        .iter()
        .position(|h| h == wanted)
        .ok_or_else(|| {
            CliError::Data(format!(
                "missing column '{wanted}' in '{}'",
                path.display()
            ))
        })
}

fn parse_cell(raw: &str, column: &str, row: usize) -> Result<f64, CliError> {
    let value: f64 = raw.trim().parse().map_err(|_| {
        CliError::Data(format!(
            "non-numeric cell in column '{column}' at data row {row}: '{raw}'"
        ))
    })?;
    if !value.is_finite() {
        return Err(CliError::Data(format!(
            "non-finite value in column '{column}' at data row {row}: '{raw}'"
        )));
    }
    Ok(value)
}

/// Read the columns a model needs and code its categorical key.
pub fn ingest_table(
    path: &Path,
    continuous: &[String],
    categorical: Option<&CategoricalConfig>,
    rescale: RescaleRule,
) -> Result<IngestedTable, CliError> {
    let mut reader = open_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(format!("cannot read header of '{}': {e}", path.display())))?
        .clone();

    let cont_idx: Vec<usize> = continuous
        .iter()
        .map(|name| header_index(&headers, name, path))
        .collect::<Result<_, _>>()?;
    let cat_idx: Vec<usize> = match categorical {
        Some(cfg) => cfg
            .columns
            .iter()
            .map(|name| header_index(&headers, name, path))
            .collect::<Result<_, _>>()?,
        None => Vec::new(),
    };

    // Member value -> 1-based level index, per the configured merge lists.
    let mut member_level: HashMap<&str, usize> = HashMap::new();
    let mut level_labels = Vec::new();
    if let Some(cfg) = categorical {
        for (k, level) in cfg.levels.iter().enumerate() {
            level_labels.push(level.label.clone());
            for member in &level.members {
                member_level.insert(member.as_str(), k + 1);
            }
        }
    }
    let cat_levels = level_labels.len();
    let cat_name = categorical
        .map(|cfg| cfg.columns.join("|"))
        .unwrap_or_default();

    let n_cont = continuous.len();
    let width = n_cont + usize::from(cat_levels > 0);
    let mut data: Vec<f64> = Vec::new();
    let mut level_counts = vec![0u64; cat_levels];

    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            CliError::Data(format!(
                "malformed record at data row {row} of '{}': {e}",
                path.display()
            ))
        })?;
        for (c, &idx) in cont_idx.iter().enumerate() {
            let raw = record.get(idx).unwrap_or("");
            data.push(parse_cell(raw, &continuous[c], row)?);
        }
        if cat_levels > 0 {
            let key = cat_idx
                .iter()
                .map(|&idx| record.get(idx).unwrap_or("").trim())
                .collect::<Vec<_>>()
                .join("|");
            let level = *member_level.get(key.as_str()).ok_or_else(|| {
                CliError::Data(format!(
                    "unknown category '{key}' in column '{cat_name}' at data row {row}"
                ))
            })?;
            level_counts[level - 1] += 1;
            data.push(level as f64);
        }
    }

    let n_rows = data.len().checked_div(width).unwrap_or(0);
    if n_rows == 0 {
        return Err(CliError::Data(format!(
            "no data rows in '{}'",
            path.display()
        )));
    }
    let mut rows = DMatrix::from_row_slice(n_rows, width, &data);

    let mut scales = Vec::new();
    if rescale == RescaleRule::HalfMax {
        for c in 0..n_cont {
            let mut max = f64::NEG_INFINITY;
            for r in 0..n_rows {
                max = max.max(rows[(r, c)]);
            }
            if max <= 0.0 {
                return Err(CliError::Data(format!(
                    "column '{}' needs a positive maximum to rescale, got {max}",
                    continuous[c]
                )));
            }
            for r in 0..n_rows {
                rows[(r, c)] /= 2.0 * max;
            }
            scales.push(ColumnScale {
                column: continuous[c].clone(),
                max,
            });
        }
    }

    Ok(IngestedTable {
        rows,
        n_cont,
        cat_levels,
        level_counts,
        level_labels,
        scales,
    })
}

/// Read a two-column counts file (`label,count` header).
pub fn read_counts(path: &Path) -> Result<(Vec<String>, Vec<u64>), CliError> {
    let mut reader = open_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(format!("cannot read header of '{}': {e}", path.display())))?
        .clone();
    let label_idx = header_index(&headers, "label", path)?;
    let count_idx = header_index(&headers, "count", path)?;

    let mut labels = Vec::new();
    let mut counts = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            CliError::Data(format!(
                "malformed record at data row {row} of '{}': {e}",
                path.display()
            ))
        })?;
        labels.push(record.get(label_idx).unwrap_or("").to_string());
        let raw = record.get(count_idx).unwrap_or("");
        let count: u64 = raw.trim().parse().map_err(|_| {
            CliError::Data(format!(
                "non-numeric cell in column 'count' at data row {row}: '{raw}'"
            ))
        })?;
        counts.push(count);
    }
    if counts.is_empty() {
        return Err(CliError::Data(format!(
            "no data rows in '{}'",
            path.display()
        )));
    }
    Ok((labels, counts))
}
