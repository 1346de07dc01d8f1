//! Diagnostic accuracy datasets: ingestion, validation and design matrices.
//!
//! Both accepted table layouts are normalized into the canonical
//! `(tp, n_diseased, tn, n_healthy)` form on load.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub study_id: String,
    pub tp: u64,
    pub n_diseased: u64,
    pub tn: u64,
    pub n_healthy: u64,
    pub covariates: BTreeMap<String, String>,
}

impl StudyRecord {
    pub fn new(study_id: impl Into<String>, tp: u64, n_diseased: u64, tn: u64, n_healthy: u64) -> Self {
        Self {
            study_id: study_id.into(),
            tp,
            n_diseased,
            tn,
            n_healthy,
            covariates: BTreeMap::new(),
        }
    }

    pub fn with_covariate(mut self, name: &str, level: &str) -> Self {
        self.covariates.insert(name.to_string(), level.to_string());
        self
    }

    pub fn false_positives(&self) -> u64 {
        self.n_healthy - self.tn
    }

    pub fn false_negatives(&self) -> u64 {
        self.n_diseased - self.tp
    }

    pub fn observed_sensitivity(&self) -> f64 {
        self.tp as f64 / self.n_diseased as f64
    }

    pub fn observed_specificity(&self) -> f64 {
        self.tn as f64 / self.n_healthy as f64
    }

    fn validate(&self, row: usize) -> Result<()> {
        let fail = |msg: String| {
            Err(Error::Validation(format!(
                "row {row} (study `{}`): {msg}",
                self.study_id
            )))
        };
        if self.n_diseased == 0 {
            return fail("no diseased subjects".into());
        }
        if self.n_healthy == 0 {
            return fail("no healthy subjects".into());
        }
        if self.tp > self.n_diseased {
            return fail(format!("tp={} exceeds n_diseased={}", self.tp, self.n_diseased));
        }
        if self.tn > self.n_healthy {
            return fail(format!("tn={} exceeds n_healthy={}", self.tn, self.n_healthy));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Covariate {
    pub name: String,
    /// Levels in order of first appearance.
    pub levels: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<StudyRecord>,
    covariates: Vec<Covariate>,
}

impl Dataset {
    /// Validates the records and derives covariate levels.
    pub fn new(records: Vec<StudyRecord>) -> Result<Self> {
        if records.len() < 2 {
            return Err(Error::Validation(format!(
                "need at least 2 studies, got {}",
                records.len()
            )));
        }
        for (i, r) in records.iter().enumerate() {
            r.validate(i + 1)?;
        }
        let keys: Vec<String> = records[0].covariates.keys().cloned().collect();
        for (i, r) in records.iter().enumerate() {
            if !r.covariates.keys().eq(keys.iter()) {
                return Err(Error::Validation(format!(
                    "row {}: covariate keys differ from the first row",
                    i + 1
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for (i, r) in records.iter().enumerate() {
            let cell: Vec<&String> = r.covariates.values().collect();
            if !seen.insert((r.study_id.clone(), cell)) {
                return Err(Error::Validation(format!(
                    "row {}: duplicate study id `{}` within the same covariate cell",
                    i + 1,
                    r.study_id
                )));
            }
        }
        let covariates = keys
            .iter()
            .map(|k| {
                let mut levels: Vec<String> = Vec::new();
                for r in &records {
                    let l = &r.covariates[k];
                    if !levels.contains(l) {
                        levels.push(l.clone());
                    }
                }
                Covariate {
                    name: k.clone(),
                    levels,
                }
            })
            .collect();
        Ok(Self { records, covariates })
    }

    pub fn records(&self) -> &[StudyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn covariates(&self) -> &[Covariate] {
        &self.covariates
    }

    pub fn covariate(&self, name: &str) -> Option<&Covariate> {
        self.covariates.iter().find(|c| c.name == name)
    }

    /// Returns a dataset with rows reordered by `order` (a permutation).
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        Self::new(order.iter().map(|&i| self.records[i].clone()).collect())
    }

    /// Canonical comma-separated rendering, used for fingerprinting.
    pub fn to_canonical_csv(&self) -> String {
        let mut out = String::from("study_id,tp,n_diseased,tn,n_healthy");
        for c in &self.covariates {
            out.push(',');
            out.push_str(&c.name);
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}",
                r.study_id, r.tp, r.n_diseased, r.tn, r.n_healthy
            ));
            for c in &self.covariates {
                out.push(',');
                out.push_str(&r.covariates[&c.name]);
            }
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the canonical rendering, hex encoded.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_canonical_csv().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    /// Columns `Dis`, `TP`, `NonDis`, `TN`.
    DisNondis,
    /// Columns `TP`, `FP`, `TN`, `FN`.
    TpFpTnFn,
}

impl FromStr for TableFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dis_nondis" => Ok(Self::DisNondis),
            "tp_fp_tn_fn" => Ok(Self::TpFpTnFn),
            other => Err(Error::Argument(format!("unknown table format `{other}`"))),
        }
    }
}

fn find_column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
}

fn parse_count(field: &str, column: &str, row: usize) -> Result<u64> {
    let t = field.trim();
    if let Some(rest) = t.strip_prefix('-') {
        if rest.parse::<u64>().is_ok() {
            return Err(Error::Validation(format!(
                "row {row}: negative count {t} in column `{column}`"
            )));
        }
    }
    t.parse::<u64>().map_err(|_| {
        Error::Parse(format!(
            "row {row}: `{t}` in column `{column}` is not a non-negative integer"
        ))
    })
}

/// Parses a comma-separated table into a validated [`Dataset`].
pub fn parse_csv(text: &str, format: TableFormat, id_column: &str, covariate_columns: &[&str]) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let id_idx = find_column(&headers, id_column)?;
    let names: [&str; 4] = match format {
        TableFormat::DisNondis => ["Dis", "TP", "NonDis", "TN"],
        TableFormat::TpFpTnFn => ["TP", "FP", "TN", "FN"],
    };
    let mut count_idx = [0usize; 4];
    for (slot, name) in count_idx.iter_mut().zip(names) {
        *slot = find_column(&headers, name)?;
    }
    let cov_idx = covariate_columns
        .iter()
        .map(|c| find_column(&headers, c).map(|i| (c.to_string(), i)))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 1;
        let get = |idx: usize| row.get(idx).unwrap_or("");
        let mut c = [0u64; 4];
        for k in 0..4 {
            c[k] = parse_count(get(count_idx[k]), names[k], line)?;
        }
        let (tp, n_diseased, tn, n_healthy) = match format {
            TableFormat::DisNondis => (c[1], c[0], c[3], c[2]),
            TableFormat::TpFpTnFn => (c[0], c[0] + c[3], c[2], c[2] + c[1]),
        };
        let mut rec = StudyRecord::new(get(id_idx).to_string(), tp, n_diseased, tn, n_healthy);
        for (name, idx) in &cov_idx {
            rec.covariates.insert(name.clone(), get(*idx).to_string());
        }
        rec.validate(line)?;
        records.push(rec);
    }
    Dataset::new(records)
}

pub fn parse_csv_file(
    path: &std::path::Path,
    format: TableFormat,
    id_column: &str,
    covariate_columns: &[&str],
) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, format, id_column, covariate_columns)
}

/// (ID, Dis, TP, NonDis, TN)
const TELOMERASE: [(&str, u64, u64, u64, u64); 10] = [
    ("1", 33, 25, 26, 25),
    ("2", 21, 17, 14, 11),
    ("3", 104, 88, 47, 31),
    ("4", 26, 16, 83, 80),
    ("5", 57, 40, 138, 137),
    ("6", 47, 38, 30, 24),
    ("7", 42, 23, 12, 12),
    ("8", 33, 27, 20, 18),
    ("9", 17, 14, 32, 29),
    ("10", 44, 37, 29, 7),
];

/// (Test, StudyID, TP, FP, TN, FN)
const ASCUS: [(&str, &str, u64, u64, u64, u64); 20] = [
    ("RepC", "Andersson 2005", 6, 14, 28, 4),
    ("RepC", "Bergeron 2000", 8, 28, 71, 4),
    ("RepC", "Del Mistro 2010", 20, 191, 483, 7),
    ("RepC", "Kulasingam 2002", 20, 74, 170, 6),
    ("RepC", "Lytwyn 2000", 4, 20, 26, 2),
    ("RepC", "Manos 1999", 48, 324, 570, 15),
    ("RepC", "Monsonego 2008", 10, 18, 168, 15),
    ("RepC", "Morin 2001", 14, 126, 214, 5),
    ("RepC", "Silverloo 2009", 24, 43, 105, 10),
    ("RepC", "Solomon 2001", 227, 1132, 914, 40),
    ("HC2", "Andersson 2005", 6, 17, 25, 4),
    ("HC2", "Bergeron 2000", 10, 38, 61, 2),
    ("HC2", "Del Mistro 2010", 27, 154, 566, 2),
    ("HC2", "Kulasingam 2002", 23, 115, 129, 3),
    ("HC2", "Lytwyn 2000", 4, 19, 33, 1),
    ("HC2", "Manos 1999", 58, 326, 582, 7),
    ("HC2", "Monsonego 2008", 22, 110, 72, 2),
    ("HC2", "Morin 2001", 17, 88, 253, 2),
    ("HC2", "Silverloo 2009", 34, 65, 81, 2),
    ("HC2", "Solomon 2001", 256, 1050, 984, 11),
];

pub const BUILTIN_NAMES: [&str; 2] = ["telomerase", "ascus"];

/// Built-in example datasets: `telomerase` (10 studies, intercept only) and
/// `ascus` (20 rows, covariate `Test` with levels `RepC`, `HC2`).
pub fn builtin_dataset(name: &str) -> Result<Dataset> {
    match name {
        "telomerase" => Dataset::new(
            TELOMERASE
                .iter()
                .map(|&(id, dis, tp, nondis, tn)| StudyRecord::new(id, tp, dis, tn, nondis))
                .collect(),
        ),
        "ascus" => Dataset::new(
            ASCUS
                .iter()
                .map(|&(test, id, tp, fp, tn, fn_)| {
                    StudyRecord::new(id, tp, tp + fn_, tn, tn + fp).with_covariate("Test", test)
                })
                .collect(),
        ),
        other => Err(Error::UnknownDataset(other.to_string())),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "coding", content = "covariate", rename_all = "snake_case")]
pub enum Formula {
    Intercept,
    CellMeans(String),
}

impl FromStr for Formula {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "intercept" || s == "1" {
            return Ok(Self::Intercept);
        }
        match s.strip_prefix("cellmeans:") {
            Some(cov) if !cov.is_empty() => Ok(Self::CellMeans(cov.to_string())),
            _ => Err(Error::Argument(format!(
                "formula `{s}` is neither `intercept` nor `cellmeans:<covariate>`"
            ))),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Intercept => write!(f, "~ 1"),
            Formula::CellMeans(c) => write!(f, "~ {c} + 0"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coding {
    InterceptOnly,
    CellMeans,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub rows: Vec<Vec<f64>>,
    pub column_names: Vec<String>,
    pub coding: Coding,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    /// Linear predictor `x_i · coef` for row `i`.
    pub fn dot_row(&self, i: usize, coef: &[f64]) -> f64 {
        self.rows[i].iter().zip(coef).map(|(x, b)| x * b).sum()
    }

    /// One representative row per column group: the unit vectors for
    /// cell-means coding, the single all-ones row for intercept-only.
    pub fn cells(&self) -> Vec<(String, Vec<f64>)> {
        match self.coding {
            Coding::InterceptOnly => vec![(self.column_names[0].clone(), vec![1.0])],
            Coding::CellMeans => (0..self.n_cols())
                .map(|k| {
                    let mut row = vec![0.0; self.n_cols()];
                    row[k] = 1.0;
                    (self.column_names[k].clone(), row)
                })
                .collect(),
        }
    }

    /// Index of the cell that row `i` belongs to.
    pub fn cell_of_row(&self, i: usize) -> usize {
        match self.coding {
            Coding::InterceptOnly => 0,
            Coding::CellMeans => self.rows[i].iter().position(|&x| x == 1.0).unwrap_or(0),
        }
    }
}

pub fn design_matrix(dataset: &Dataset, formula: &Formula) -> Result<DesignMatrix> {
    match formula {
        Formula::Intercept => Ok(DesignMatrix {
            rows: vec![vec![1.0]; dataset.len()],
            column_names: vec!["(Intercept)".to_string()],
            coding: Coding::InterceptOnly,
        }),
        Formula::CellMeans(name) => {
            let cov = dataset
                .covariate(name)
                .ok_or_else(|| Error::Covariate(format!("unknown covariate `{name}`")))?;
            if cov.levels.len() < 2 {
                return Err(Error::Covariate(format!(
                    "covariate `{name}` has a single level; cell-means coding needs at least 2"
                )));
            }
            let rows = dataset
                .records()
                .iter()
                .map(|r| {
                    let level = &r.covariates[name];
                    cov.levels.iter().map(|l| if l == level { 1.0 } else { 0.0 }).collect()
                })
                .collect();
            Ok(DesignMatrix {
                rows,
                column_names: cov.levels.clone(),
                coding: Coding::CellMeans,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn telomerase_row_maps_to_canonical_counts() {
        let csv = "ID,Dis,TP,NonDis,TN\n1,33,25,26,25\n2,21,17,14,11\n";
        let d = parse_csv(csv, TableFormat::DisNondis, "ID", &[]).unwrap();
        let r = &d.records()[0];
        assert_eq!((r.tp, r.n_diseased, r.tn, r.n_healthy), (25, 33, 25, 26));
    }

    #[test]
    fn ascus_row_maps_to_canonical_counts() {
        let csv = "Test,StudyID,TP,FP,TN,FN\nHC2,Solomon 2001,256,1050,984,11\nRepC,Solomon 2001,227,1132,914,40\n";
        let d = parse_csv(csv, TableFormat::TpFpTnFn, "StudyID", &["Test"]).unwrap();
        let r = &d.records()[0];
        assert_eq!((r.tp, r.n_diseased, r.tn, r.n_healthy), (256, 267, 984, 2034));
        assert_eq!(r.covariates["Test"], "HC2");
    }

    #[test]
    fn quoted_fields_are_accepted() {
        let csv = "\"ID\",Dis,TP,NonDis,TN\n\"a, b\",3,1,4,2\nc,5,5,5,0\n";
        let d = parse_csv(csv, TableFormat::DisNondis, "ID", &[]).unwrap();
        assert_eq!(d.records()[0].study_id, "a, b");
    }

    #[test]
    fn tp_above_diseased_is_a_validation_error() {
        let csv = "ID,Dis,TP,NonDis,TN\n1,3,5,4,2\n2,5,1,5,1\n";
        let err = parse_csv(csv, TableFormat::DisNondis, "ID", &[]).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("row 1")), "{err}");
    }

    #[test]
    fn negative_and_fractional_counts() {
        let neg = "ID,Dis,TP,NonDis,TN\n1,3,-1,4,2\n2,5,1,5,1\n";
        assert!(matches!(
            parse_csv(neg, TableFormat::DisNondis, "ID", &[]),
            Err(Error::Validation(_))
        ));
        let frac = "ID,Dis,TP,NonDis,TN\n1,3,1.5,4,2\n2,5,1,5,1\n";
        assert!(matches!(
            parse_csv(frac, TableFormat::DisNondis, "ID", &[]),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let csv = "ID,Dis,TP,TN\n1,3,1,2\n";
        assert!(matches!(
            parse_csv(csv, TableFormat::DisNondis, "ID", &[]),
            Err(Error::Schema(_))
        ));
        let csv = "ID,Dis,TP,NonDis,TN\n1,3,1,4,2\n";
        assert!(matches!(
            parse_csv(csv, TableFormat::DisNondis, "ID", &["Test"]),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn builtins() {
        let t = builtin_dataset("telomerase").unwrap();
        assert_eq!(t.len(), 10);
        let s7 = &t.records()[6];
        assert_eq!((s7.tn, s7.n_healthy), (12, 12));
        let a = builtin_dataset("ascus").unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(a.covariate("Test").unwrap().levels, vec!["RepC", "HC2"]);
        assert!(matches!(builtin_dataset("foo"), Err(Error::UnknownDataset(_))));
    }

    #[test]
    fn design_matrices() {
        let a = builtin_dataset("ascus").unwrap();
        let x = design_matrix(&a, &Formula::CellMeans("Test".into())).unwrap();
        assert_eq!((x.n_rows(), x.n_cols()), (20, 2));
        assert_eq!(x.column_names, vec!["RepC", "HC2"]);
        for i in 0..10 {
            assert_eq!(x.rows[i], vec![1.0, 0.0]);
            assert_eq!(x.rows[i + 10], vec![0.0, 1.0]);
        }
        let t = builtin_dataset("telomerase").unwrap();
        let x = design_matrix(&t, &Formula::Intercept).unwrap();
        assert!(x.rows.iter().all(|r| r == &vec![1.0]));
        assert!(matches!(
            design_matrix(&t, &Formula::CellMeans("nonexistent".into())),
            Err(Error::Covariate(_))
        ));
    }

    #[test]
    fn single_level_covariate_rejected_for_cell_means() {
        let recs = vec![
            StudyRecord::new("a", 1, 2, 1, 2).with_covariate("T", "x"),
            StudyRecord::new("b", 1, 2, 1, 2).with_covariate("T", "x"),
        ];
        let d = Dataset::new(recs).unwrap();
        assert!(matches!(
            design_matrix(&d, &Formula::CellMeans("T".into())),
            Err(Error::Covariate(_))
        ));
    }

    #[test]
    fn duplicate_ids_only_allowed_across_cells() {
        let dup = vec![StudyRecord::new("a", 1, 2, 1, 2), StudyRecord::new("a", 1, 2, 1, 2)];
        assert!(Dataset::new(dup).is_err());
        assert!(Dataset::new(vec![StudyRecord::new("a", 1, 2, 1, 2)]).is_err());
    }

    #[test]
    fn formula_parsing() {
        assert_eq!("intercept".parse::<Formula>().unwrap(), Formula::Intercept);
        assert_eq!(
            "cellmeans:Test".parse::<Formula>().unwrap(),
            Formula::CellMeans("Test".into())
        );
        assert!("Test+0".parse::<Formula>().is_err());
    }
}
