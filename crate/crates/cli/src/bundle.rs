//! Result bundles: a directory with the summary, draws, diagnostics and the
//! manifest of the run that produced them.

use std::fs;
use std::path::Path;

use dtameta::data::Formula;
use dtameta::diagnostics::mcse;
use dtameta::model::{Model, ModelKind};
use dtameta::sampler::{ChainConfig, ChainDraws};
use dtameta::summary::{FitSummary, SCHEMA_VERSION};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SUMMARY_FILE: &str = "summary.json";
pub const DRAWS_FILE: &str = "draws.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Columns of `draws.csv` ahead of the model quantities.
const DRAW_META: [&str; 5] = ["chain", "draw", "lp__", "accept_stat__", "treedepth__"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Builtin { name: String },
    File { path: String, sid: String, format: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormatVersions {
    pub summary: String,
    pub draws: String,
    pub diagnostics: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub data: DataSource,
    pub model: ModelKind,
    pub formula: Formula,
    pub config: ChainConfig,
    pub output_dir: String,
    pub formats: FormatVersions,
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        data: DataSource,
        model: ModelKind,
        formula: &Formula,
        config: &ChainConfig,
        out: &Path,
    ) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            data,
            model,
            formula: formula.clone(),
            config: config.clone(),
            output_dir: out.display().to_string(),
            formats: FormatVersions {
                summary: SCHEMA_VERSION.to_string(),
                draws: "v1".to_string(),
                diagnostics: "v1".to_string(),
            },
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn draws_csv(model: &Model, draws: &[ChainDraws]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = DRAW_META.iter().map(|s| s.to_string()).collect();
    header.extend(model.derived_names());
    w.write_record(&header).map_err(|e| CliError::Internal(e.to_string()))?;
    for c in draws {
        for (k, row) in c.constrained.iter().enumerate() {
            let mut rec = vec![
                (c.chain + 1).to_string(),
                (k + 1).to_string(),
                c.log_density[k].to_string(),
                c.accept_stats[k].to_string(),
                c.tree_depths[k].to_string(),
            ];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(|e| CliError::Internal(e.to_string()))?;
        }
    }
    w.into_inner().map_err(|e| CliError::Internal(e.to_string()))
}

fn diagnostics_csv(summary: &FitSummary, draws: &[ChainDraws]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let internal = |e: csv::Error| CliError::Internal(e.to_string());
    w.write_record(["parameter", "mean", "sd", "mcse", "n_eff", "rhat"])
        .map_err(internal)?;
    let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    // global quantities lead the derived layout
    for (col, p) in summary.parameters.iter().enumerate() {
        let series: Vec<Vec<f64>> = draws
            .iter()
            .map(|c| c.constrained.iter().map(|r| r[col]).collect())
            .collect();
        let se = mcse(&series).ok().map(|e| e.value);
        w.write_record([
            p.name.clone(),
            p.mean.to_string(),
            p.sd.to_string(),
            na(se),
            na(p.n_eff),
            na(p.rhat),
        ])
        .map_err(internal)?;
    }
    w.into_inner().map_err(|e| CliError::Internal(e.to_string()))
}

pub fn write(
    dir: &Path,
    manifest: &RunManifest,
    model: &Model,
    draws: &[ChainDraws],
    summary: &FitSummary,
) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_file(&dir.join(SUMMARY_FILE), &to_json(summary)?)?;
    write_file(&dir.join(DRAWS_FILE), &draws_csv(model, draws)?)?;
    write_file(&dir.join(DIAGNOSTICS_FILE), &diagnostics_csv(summary, draws)?)?;
    write_file(&dir.join(MANIFEST_FILE), &to_json(manifest)?)
}

pub fn read_summary(dir: &Path) -> Result<FitSummary, CliError> {
    let path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let summary: FitSummary =
        serde_json::from_str(&text).map_err(|e| io_err(&path, format!("corrupt summary: {e}")))?;
    if summary.schema_version != SCHEMA_VERSION {
        return Err(io_err(
            &path,
            format!("unsupported schema version {}", summary.schema_version),
        ));
    }
    Ok(summary)
}

/// Kept draws read back from `draws.csv`.
pub struct DrawTable {
    pub columns: Vec<String>,
    pub chain: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
}

impl DrawTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn n_chains(&self) -> usize {
        self.chain.iter().copied().max().unwrap_or(0)
    }

    /// Series of column `col` for chain `c` (1-based).
    pub fn series(&self, col: usize, c: usize) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.chain)
            .filter(|(_, &k)| k == c)
            .map(|(r, _)| r[col])
            .collect()
    }
}

pub fn read_draws(dir: &Path) -> Result<DrawTable, CliError> {
    let path = dir.join(DRAWS_FILE);
    let corrupt = |e: &dyn std::fmt::Display| io_err(&path, format!("corrupt draws: {e}"));
    let mut r = csv::Reader::from_path(&path).map_err(|e| io_err(&path, e))?;
    let header = r.headers().map_err(|e| corrupt(&e))?.clone();
    if header.len() < DRAW_META.len() || header.iter().take(2).ne(DRAW_META.iter().take(2).copied()) {
        return Err(corrupt(&"unexpected header"));
    }
    let columns: Vec<String> = header.iter().map(String::from).collect();
    let mut chain = Vec::new();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| corrupt(&e))?;
        let values = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| corrupt(&e))?;
        chain.push(values[0] as usize);
        rows.push(values);
    }
    Ok(DrawTable { columns, chain, rows })
}
