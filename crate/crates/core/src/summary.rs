//! Posterior summaries, WAIC, exact binomial intervals and model comparison.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{ess, split_rhat};
use crate::error::{Error, Result};
use crate::model::{Model, ModelKind};
use crate::sampler::{run_chains, ChainConfig, ChainDraws};
use crate::special::{beta_quantile, log_sum_exp};

pub const SCHEMA_VERSION: &str = "v1";

/// Quantile of sorted data with linear interpolation (type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
    /// `None` when there are too few draws or the series is constant.
    pub n_eff: Option<f64>,
    /// `None` when there are too few draws or R̂ is infinite.
    pub rhat: Option<f64>,
}

impl ParamSummary {
    /// Summarizes one scalar given as per-chain series.
    pub fn from_chains(name: &str, chains: &[Vec<f64>]) -> Self {
        let mut pooled: Vec<f64> = chains.iter().flatten().copied().collect();
        pooled.sort_by(f64::total_cmp);
        let n = pooled.len() as f64;
        let (first, last) = (pooled[0], pooled[pooled.len() - 1]);
        // summing a constant series can drift by an ulp
        let mean = if first == last {
            first
        } else {
            pooled.iter().sum::<f64>() / n
        };
        let sd = if pooled.len() > 1 {
            (pooled.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let n_eff = ess(chains).ok().filter(|e| !e.degenerate).map(|e| e.value);
        let rhat = split_rhat(chains).ok().and_then(|r| finite(r.value));
        Self {
            name: name.to_string(),
            mean,
            sd,
            q025: quantile_sorted(&pooled, 0.025),
            q975: quantile_sorted(&pooled, 0.975),
            n_eff,
            rhat,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaicResult {
    pub lppd: f64,
    pub p_waic: f64,
    pub waic: f64,
}

impl WaicResult {
    pub fn from_parts(lppd: f64, p_waic: f64) -> Self {
        Self {
            lppd,
            p_waic,
            waic: -2.0 * (lppd - p_waic),
        }
    }
}

/// WAIC from a draws × points log-likelihood matrix (variance form of the
/// effective number of parameters).
pub fn waic(loglik: &[Vec<f64>]) -> Result<WaicResult> {
    let s = loglik.len();
    if s < 2 {
        return Err(Error::Precondition("WAIC needs at least two draws".into()));
    }
    let points = loglik[0].len();
    if loglik.iter().any(|r| r.len() != points) {
        return Err(Error::Layout("log-likelihood rows differ in length".into()));
    }
    if loglik.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("non-finite log-likelihood".into()));
    }
    let sf = s as f64;
    let mut lppd = 0.0;
    let mut p_waic = 0.0;
    let mut column = vec![0.0; s];
    for i in 0..points {
        for (c, row) in column.iter_mut().zip(loglik) {
            *c = row[i];
        }
        lppd += log_sum_exp(&column) - sf.ln();
        let m = column.iter().sum::<f64>() / sf;
        p_waic += column.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (sf - 1.0);
    }
    Ok(WaicResult::from_parts(lppd, p_waic))
}

/// Clopper–Pearson interval for `k` successes out of `n`.
pub fn exact_ci(k: u64, n: u64, level: f64) -> Result<(f64, f64)> {
    if n == 0 || k > n {
        return Err(Error::Precondition(format!(
            "need 0 <= k <= n and n >= 1, got k={k}, n={n}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Precondition(format!("level must lie in (0, 1), got {level}")));
    }
    let alpha = 1.0 - level;
    let (kf, nf) = (k as f64, n as f64);
    let low = if k == 0 {
        0.0
    } else {
        beta_quantile(alpha / 2.0, kf, nf - kf + 1.0)
    };
    let high = if k == n {
        1.0
    } else {
        beta_quantile(1.0 - alpha / 2.0, kf + 1.0, nf - kf)
    };
    Ok((low, high))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
}

/// Observed and fitted accuracy of one study, for forest plots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub study_id: String,
    pub tp: u64,
    pub n_diseased: u64,
    pub tn: u64,
    pub n_healthy: u64,
    /// Observed proportion with its 95% exact interval.
    pub observed_se: Interval,
    pub observed_sp: Interval,
    /// Posterior mean of the study-specific accuracy with a 95% credible interval.
    pub fitted_se: Interval,
    pub fitted_sp: Interval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainInfo {
    pub chain: usize,
    pub kept_draws: usize,
    pub divergences: usize,
    pub step_size: f64,
    pub mean_accept_stat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub schema_version: String,
    pub model: ModelKind,
    pub formula: String,
    pub cells: Vec<String>,
    pub config: ChainConfig,
    pub n_studies: usize,
    pub data_fingerprint: String,
    pub total_draws: usize,
    pub divergences: usize,
    pub chains: Vec<ChainInfo>,
    pub parameters: Vec<ParamSummary>,
    pub studies: Vec<StudySummary>,
    pub waic: WaicResult,
}

impl FitSummary {
    pub fn parameter(&self, name: &str) -> Option<&ParamSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// The headline quantities per cell: sensitivity, specificity and
    /// Kendall's τ (plus Pearson ρ for BRMA).
    pub fn key_parameters(&self) -> Vec<&ParamSummary> {
        let names: &[&str] = match self.model {
            ModelKind::Copula(_) => &["sens", "spec", "tau"],
            ModelKind::Brma => &["MU_se", "MU_sp", "rho", "ktau"],
        };
        let head = |p: &ParamSummary| p.name.split('[').next().unwrap_or("").to_string();
        self.parameters
            .iter()
            .filter(|p| names.contains(&head(p).as_str()))
            .collect()
    }
}

fn column_series(draws: &[ChainDraws], col: usize) -> Vec<Vec<f64>> {
    draws
        .iter()
        .map(|c| c.constrained.iter().map(|r| r[col]).collect())
        .collect()
}

/// Summarizes the chains of a fitted model.
pub fn summarize(draws: &[ChainDraws], model: &Model, config: &ChainConfig) -> Result<FitSummary> {
    if draws.len() < 2 {
        return Err(Error::Precondition(format!(
            "summaries need at least 2 chains, got {}",
            draws.len()
        )));
    }
    let names = model.derived_names();
    let dim = model.dim();
    let n_points = 2 * model.data().len();
    for c in draws {
        let bad_row = c.draws.iter().any(|r| r.len() != dim)
            || c.constrained.iter().any(|r| r.len() != names.len())
            || c.loglik.iter().any(|r| r.len() != n_points)
            || c.constrained.len() != c.draws.len()
            || c.loglik.len() != c.draws.len();
        if bad_row {
            return Err(Error::Layout(format!(
                "chain {} does not match the model layout",
                c.chain
            )));
        }
    }
    let kept = draws[0].draws.len();
    if kept == 0 || draws.iter().any(|c| c.draws.len() != kept) {
        return Err(Error::Layout(
            "chains must hold the same positive number of draws".into(),
        ));
    }

    let n = model.data().len();
    let n_global = names.len() - 2 * n;
    let parameters: Vec<ParamSummary> = (0..n_global)
        .map(|j| ParamSummary::from_chains(&names[j], &column_series(draws, j)))
        .collect();

    let mut studies = Vec::with_capacity(n);
    for (i, rec) in model.data().records().iter().enumerate() {
        let fitted = |col: usize| {
            let s = ParamSummary::from_chains("", &column_series(draws, col));
            Interval {
                estimate: s.mean,
                low: s.q025,
                high: s.q975,
            }
        };
        let observed = |k: u64, m: u64| -> Result<Interval> {
            let (low, high) = exact_ci(k, m, 0.95)?;
            Ok(Interval {
                estimate: k as f64 / m as f64,
                low,
                high,
            })
        };
        studies.push(StudySummary {
            study_id: rec.study_id.clone(),
            tp: rec.tp,
            n_diseased: rec.n_diseased,
            tn: rec.tn,
            n_healthy: rec.n_healthy,
            observed_se: observed(rec.tp, rec.n_diseased)?,
            observed_sp: observed(rec.tn, rec.n_healthy)?,
            fitted_se: fitted(n_global + i),
            fitted_sp: fitted(n_global + n + i),
        });
    }

    let loglik: Vec<Vec<f64>> = draws.iter().flat_map(|c| c.loglik.iter().cloned()).collect();
    let chains = draws
        .iter()
        .map(|c| ChainInfo {
            chain: c.chain,
            kept_draws: c.draws.len(),
            divergences: c.divergence_count,
            step_size: c.step_size,
            mean_accept_stat: c.accept_stats.iter().sum::<f64>() / c.accept_stats.len().max(1) as f64,
        })
        .collect();
    let spec = model.spec();
    Ok(FitSummary {
        schema_version: SCHEMA_VERSION.to_string(),
        model: spec.kind,
        formula: spec.formula.to_string(),
        cells: spec.design.cells().into_iter().map(|(l, _)| l).collect(),
        config: config.clone(),
        n_studies: n,
        data_fingerprint: model.data().fingerprint(),
        total_draws: kept * draws.len(),
        divergences: draws.iter().map(|c| c.divergence_count).sum(),
        chains,
        parameters,
        studies,
        waic: waic(&loglik)?,
    })
}

/// Samples `model` and summarizes the result.
pub fn fit(model: &Model, config: &ChainConfig) -> Result<(Vec<ChainDraws>, FitSummary)> {
    let draws = run_chains(model, config)?;
    let summary = summarize(&draws, model, config)?;
    Ok((draws, summary))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: ModelKind,
    pub formula: String,
    pub parameters: Vec<ParamSummary>,
    pub waic: WaicResult,
}

/// Models ordered by ascending WAIC; ties keep their input order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub data_fingerprint: String,
    pub rows: Vec<ComparisonRow>,
}

pub fn compare(fits: &[FitSummary]) -> Result<ComparisonTable> {
    if fits.len() < 2 {
        return Err(Error::Precondition(format!(
            "comparison needs at least 2 fits, got {}",
            fits.len()
        )));
    }
    let fp = &fits[0].data_fingerprint;
    if let Some(other) = fits.iter().find(|f| &f.data_fingerprint != fp) {
        return Err(Error::Comparability(format!(
            "fits use different data ({} vs {})",
            &fp[..fp.len().min(12)],
            &other.data_fingerprint[..other.data_fingerprint.len().min(12)]
        )));
    }
    let mut rows: Vec<ComparisonRow> = fits
        .iter()
        .map(|f| ComparisonRow {
            model: f.model,
            formula: f.formula.clone(),
            parameters: f.key_parameters().into_iter().cloned().collect(),
            waic: f.waic,
        })
        .collect();
    rows.sort_by(|a, b| a.waic.waic.total_cmp(&b.waic.waic));
    Ok(ComparisonTable {
        data_fingerprint: fp.clone(),
        rows,
    })
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.digits$}"))
}

impl ComparisonTable {
    /// Long-format CSV: one line per model and reported parameter.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "parameter", "mean", "lower", "upper", "n_eff", "rhat", "waic"])?;
        for r in &self.rows {
            for p in &r.parameters {
                w.write_record([
                    r.model.name().to_string(),
                    p.name.clone(),
                    format!("{:.6}", p.mean),
                    format!("{:.6}", p.q025),
                    format!("{:.6}", p.q975),
                    opt(p.n_eff, 1),
                    opt(p.rhat, 4),
                    format!("{:.4}", r.waic.waic),
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<8} {:<18} {:>8} {:>8} {:>8} {:>8} {:>7} {:>9}\n",
            "model", "parameter", "mean", "lower", "upper", "n_eff", "Rhat", "WAIC"
        );
        for r in &self.rows {
            for (k, p) in r.parameters.iter().enumerate() {
                let (model, w) = if k == 0 {
                    (r.model.name().to_string(), format!("{:.4}", r.waic.waic))
                } else {
                    (String::new(), String::new())
                };
                out.push_str(&format!(
                    "{:<8} {:<18} {:>8.4} {:>8.4} {:>8.4} {:>8} {:>7} {:>9}\n",
                    model,
                    p.name,
                    p.mean,
                    p.q025,
                    p.q975,
                    opt(p.n_eff, 0),
                    opt(p.rhat, 3),
                    w
                ));
            }
        }
        out
    }
}
