//! Log posterior and gradient for the copula bivariate beta-binomial models
//! and the bivariate normal random-effects (BRMA) model.
//!
//! Unconstrained layout, with `p` design columns and `n` studies:
//!
//! * copula: `b_se[p] b_sp[p] c_se[p] c_sp[p] d[p] z_se[n] z_sp[n]`
//!   (`d` is absent when the association is fixed)
//! * brma:   `b_se[p] b_sp[p] log_sigma[2] eta_rho z_se[n] z_sp[n]`
//!
//! `z` are the study-specific logits of sensitivity and specificity.
//! Every study contributes a term that depends on seven local scalars; the
//! gradient seeds those seven as dual directions and chains the result
//! through the (linear) design rows.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::copula::CopulaFamily;
use crate::data::{design_matrix, Dataset, DesignMatrix, Formula, StudyRecord};
use crate::error::{Error, Result};
use crate::scalar::{inv_logit, logit, Dual, Scalar};
use crate::special::{beta_lpdf, binomial_lpmf, gauss_hermite, ln_choose, reg_inc_beta};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Copula(CopulaFamily),
    Brma,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Copula(f) => f.name(),
            ModelKind::Brma => "brma",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "brma" {
            Ok(ModelKind::Brma)
        } else {
            s.parse().map(ModelKind::Copula)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Standard deviation of the normal prior on every regression
    /// coefficient (and on the BRMA Fisher-z correlation).
    pub coef_sd: f64,
    /// Scale of the half-Cauchy prior on the BRMA standard deviations.
    pub sigma_scale: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            coef_sd: 10.0,
            sigma_scale: 2.5,
        }
    }
}

/// How the copula association parameter enters the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "theta", rename_all = "snake_case")]
pub enum Association {
    /// Regressed on the design matrix through the family link.
    Free,
    /// Held at a constant θ; no association coefficients are sampled.
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub formula: Formula,
    /// Shared design for mean, certainty and association (X = W = Z).
    pub design: DesignMatrix,
    pub prior: PriorConfig,
    pub association: Association,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, formula: Formula, data: &Dataset) -> Result<Self> {
        let design = design_matrix(data, &formula)?;
        Ok(Self {
            kind,
            formula,
            design,
            prior: PriorConfig::default(),
            association: Association::Free,
        })
    }

    pub fn with_prior(mut self, prior: PriorConfig) -> Result<Self> {
        if !(prior.coef_sd > 0.0 && prior.sigma_scale > 0.0) {
            return Err(Error::Argument("prior scales must be positive".into()));
        }
        self.prior = prior;
        Ok(self)
    }

    pub fn with_fixed_association(mut self, theta: f64) -> Result<Self> {
        match self.kind {
            ModelKind::Copula(f) => f.check_theta(theta)?,
            ModelKind::Brma => {
                return Err(Error::Argument("the BRMA correlation cannot be fixed".into()));
            }
        }
        self.association = Association::Fixed(theta);
        Ok(self)
    }

    pub fn design_mu(&self) -> &DesignMatrix {
        &self.design
    }
    pub fn design_psi(&self) -> &DesignMatrix {
        &self.design
    }
    pub fn design_assoc(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn n_studies(&self) -> usize {
        self.design.n_rows()
    }

    fn n_coef(&self) -> usize {
        self.design.n_cols()
    }

    fn n_global(&self) -> usize {
        let p = self.n_coef();
        match self.kind {
            ModelKind::Copula(_) => match self.association {
                Association::Free => 5 * p,
                Association::Fixed(_) => 4 * p,
            },
            ModelKind::Brma => 2 * p + 3,
        }
    }

    pub fn dim(&self) -> usize {
        self.n_global() + 2 * self.n_studies()
    }

    /// Names of the unconstrained coordinates, in layout order.
    pub fn param_names(&self) -> Vec<String> {
        let cols = &self.design.column_names;
        let block = |prefix: &'static str| cols.iter().map(move |c| format!("{prefix}[{c}]"));
        let mut names: Vec<String> = Vec::with_capacity(self.dim());
        names.extend(block("b_se"));
        names.extend(block("b_sp"));
        match self.kind {
            ModelKind::Copula(_) => {
                names.extend(block("c_se"));
                names.extend(block("c_sp"));
                if self.association == Association::Free {
                    names.extend(block("d"));
                }
            }
            ModelKind::Brma => {
                names.push("log_sigma[1]".into());
                names.push("log_sigma[2]".into());
                names.push("eta_rho".into());
            }
        }
        let n = self.n_studies();
        names.extend((1..=n).map(|i| format!("z_se[{i}]")));
        names.extend((1..=n).map(|i| format!("z_sp[{i}]")));
        names
    }

    fn z_offset(&self) -> usize {
        self.n_global()
    }
}

/// Standard normal log-density scaled by `sd`.
fn normal_lpdf<S: Scalar>(x: S, sd: f64) -> S {
    let z = x / sd;
    z * z * -0.5 - (sd.ln() + 0.5 * (2.0 * PI).ln())
}

/// Half-Cauchy log-density on `σ = e^{s}`, including the `ln σ` Jacobian.
fn half_cauchy_log_sigma_lpdf<S: Scalar>(log_sigma: S, scale: f64) -> S {
    let r = log_sigma.exp() / scale;
    -(r * r).ln_1p() + ((2.0 / (PI * scale)).ln()) + log_sigma
}

/// `(ln p, ln(1 − p), p, 1 − p)` for `p = logit⁻¹(z)`.
fn logit_parts<S: Scalar>(z: S) -> (S, S, S, S) {
    (-(-z).softplus(), -z.softplus(), z.inv_logit(), (-z).inv_logit())
}

fn study_loglik<S: Scalar>(rec: &StudyRecord, z_se: S, z_sp: S) -> [S; 2] {
    let (lp1, lq1, _, _) = logit_parts(z_se);
    let (lp2, lq2, _, _) = logit_parts(z_sp);
    [
        binomial_lpmf(rec.tp, rec.n_diseased, lp1, lq1),
        binomial_lpmf(rec.tn, rec.n_healthy, lp2, lq2),
    ]
}

/// Latent log density of one study on the logit scale of π:
/// two beta margins, the copula term, and the logit Jacobians of π.
fn copula_latent<S: Scalar>(family: CopulaFamily, z: [S; 2], alpha: [S; 2], beta: [S; 2], theta: S) -> (S, S) {
    let mut margins = S::cst(0.0);
    let mut jac = S::cst(0.0);
    let mut cdf = [S::cst(0.0); 2];
    for j in 0..2 {
        let (lp, lq, p, q) = logit_parts(z[j]);
        margins += beta_lpdf(lp, lq, alpha[j], beta[j]);
        jac += lp + lq;
        cdf[j] = reg_inc_beta(p, q, alpha[j], beta[j]);
    }
    (margins + family.log_density(cdf[0], cdf[1], theta), jac)
}

/// Beta margins and copula density at a point `π` (constrained scale).
pub fn copula_latent_log_density(
    family: CopulaFamily,
    pi: [f64; 2],
    alpha: [f64; 2],
    beta: [f64; 2],
    theta: f64,
) -> Result<f64> {
    family.check_theta(theta)?;
    for j in 0..2 {
        if !(pi[j] > 0.0 && pi[j] < 1.0 && alpha[j] > 0.0 && beta[j] > 0.0) {
            return Err(Error::Domain("π must lie in (0,1) and α, β must be positive".into()));
        }
    }
    let z = [logit(pi[0]), logit(pi[1])];
    Ok(copula_latent(family, z, alpha, beta, theta).0)
}

/// Mean and certainty of a beta margin from its linear predictors.
fn beta_shape<S: Scalar>(eta_mu: S, eta_psi: S) -> (S, S) {
    let psi = eta_psi.exp();
    (eta_mu.inv_logit() * psi, (-eta_mu).inv_logit() * psi)
}

/// Per-study inputs in the order seeded for differentiation:
/// `[z_se, z_sp, η_mu_se, η_mu_sp, η_psi_se, η_psi_sp, η_assoc]` for copula
/// models and `[z_se, z_sp, m_se, m_sp, log σ_se, log σ_sp, η_ρ]` for BRMA.
const LOCAL: usize = 7;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Components {
    pub log_likelihood: f64,
    pub log_random_effects: f64,
    pub log_prior: f64,
    pub log_jacobian: f64,
}

impl Components {
    pub fn total(&self) -> f64 {
        self.log_likelihood + self.log_random_effects + self.log_prior + self.log_jacobian
    }
}

/// A model bound to its data: the target density for the sampler.
#[derive(Clone, Debug)]
pub struct Model {
    spec: ModelSpec,
    data: Dataset,
}

impl Model {
    pub fn new(spec: ModelSpec, data: Dataset) -> Result<Self> {
        if spec.n_studies() != data.len() {
            return Err(Error::Layout(format!(
                "design has {} rows but the dataset has {} studies",
                spec.n_studies(),
                data.len()
            )));
        }
        Ok(Self { spec, data })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn check_len(&self, x: &[f64]) {
        assert_eq!(
            x.len(),
            self.dim(),
            "parameter vector length does not match the model layout"
        );
    }

    fn coef<'a>(&self, x: &'a [f64], block: usize) -> &'a [f64] {
        let p = self.spec.n_coef();
        &x[block * p..(block + 1) * p]
    }

    fn z(&self, x: &[f64], i: usize) -> [f64; 2] {
        let off = self.spec.z_offset();
        let n = self.spec.n_studies();
        [x[off + i], x[off + n + i]]
    }

    /// Local inputs of study `i`.
    fn local_inputs(&self, x: &[f64], i: usize) -> [f64; LOCAL] {
        let xd = &self.spec.design;
        let z = self.z(x, i);
        match self.spec.kind {
            ModelKind::Copula(_) => {
                let assoc = match self.spec.association {
                    Association::Free => xd.dot_row(i, self.coef(x, 4)),
                    Association::Fixed(_) => 0.0,
                };
                [
                    z[0],
                    z[1],
                    xd.dot_row(i, self.coef(x, 0)),
                    xd.dot_row(i, self.coef(x, 1)),
                    xd.dot_row(i, self.coef(x, 2)),
                    xd.dot_row(i, self.coef(x, 3)),
                    assoc,
                ]
            }
            ModelKind::Brma => {
                let g = 2 * self.spec.n_coef();
                [
                    z[0],
                    z[1],
                    xd.dot_row(i, self.coef(x, 0)),
                    xd.dot_row(i, self.coef(x, 1)),
                    x[g],
                    x[g + 1],
                    x[g + 2],
                ]
            }
        }
    }

    /// Likelihood, latent density and Jacobian of one study.
    fn study_terms<S: Scalar>(&self, rec: &StudyRecord, l: [S; LOCAL]) -> (S, S, S) {
        let ll = study_loglik(rec, l[0], l[1]);
        let loglik = ll[0] + ll[1];
        match self.spec.kind {
            ModelKind::Copula(family) => {
                let (a1, b1) = beta_shape(l[2], l[4]);
                let (a2, b2) = beta_shape(l[3], l[5]);
                let theta = match self.spec.association {
                    Association::Free => family.from_unconstrained(l[6]).0,
                    Association::Fixed(t) => S::cst(t),
                };
                let (re, jac) = copula_latent(family, [l[0], l[1]], [a1, a2], [b1, b2], theta);
                (loglik, re, jac)
            }
            ModelKind::Brma => (loglik, brma_latent(l), S::cst(0.0)),
        }
    }

    fn global_prior<S: Scalar>(&self, x: &[S]) -> S {
        let pr = &self.spec.prior;
        let mut lp = S::cst(0.0);
        match self.spec.kind {
            ModelKind::Copula(_) => {
                for &c in x {
                    lp += normal_lpdf(c, pr.coef_sd);
                }
            }
            ModelKind::Brma => {
                let g = 2 * self.spec.n_coef();
                for &c in &x[..g] {
                    lp += normal_lpdf(c, pr.coef_sd);
                }
                lp += half_cauchy_log_sigma_lpdf(x[g], pr.sigma_scale);
                lp += half_cauchy_log_sigma_lpdf(x[g + 1], pr.sigma_scale);
                lp += normal_lpdf(x[g + 2], pr.coef_sd);
            }
        }
        lp
    }

    /// The log posterior split into its parts.
    pub fn components(&self, x: &[f64]) -> Components {
        self.check_len(x);
        let mut c = Components {
            log_prior: self.global_prior(&x[..self.spec.n_global()]),
            ..Components::default()
        };
        for (i, rec) in self.data.records().iter().enumerate() {
            let (ll, re, jac) = self.study_terms(rec, self.local_inputs(x, i));
            c.log_likelihood += ll;
            c.log_random_effects += re;
            c.log_jacobian += jac;
        }
        c
    }

    pub fn log_likelihood(&self, x: &[f64]) -> f64 {
        self.check_len(x);
        (0..self.data.len())
            .map(|i| {
                let z = self.z(x, i);
                let ll = study_loglik(&self.data.records()[i], z[0], z[1]);
                ll[0] + ll[1]
            })
            .sum()
    }

    /// Pointwise log-likelihood: `n` sensitivity points then `n` specificity points.
    pub fn pointwise_log_likelihood(&self, x: &[f64]) -> Vec<f64> {
        self.check_len(x);
        let n = self.data.len();
        let mut out = vec![0.0; 2 * n];
        for (i, rec) in self.data.records().iter().enumerate() {
            let z = self.z(x, i);
            let ll = study_loglik(rec, z[0], z[1]);
            out[i] = ll[0];
            out[n + i] = ll[1];
        }
        out
    }

    pub fn log_random_effects_density(&self, x: &[f64]) -> f64 {
        self.components(x).log_random_effects
    }

    pub fn log_posterior(&self, x: &[f64]) -> f64 {
        if x.iter().any(|v| v.is_nan()) {
            return f64::NAN;
        }
        let v = self.components(x).total();
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    /// Log posterior and its exact gradient.
    pub fn log_posterior_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.check_len(x);
        let spec = &self.spec;
        let p = spec.n_coef();
        let n = spec.n_studies();
        let ng = spec.n_global();
        let zo = spec.z_offset();
        grad.iter_mut().for_each(|g| *g = 0.0);

        let mut total = 0.0;
        for (k, &v) in x[..ng].iter().enumerate() {
            let mut seeded: Vec<Dual<1>> = x[..ng].iter().map(|&c| Dual::constant(c)).collect();
            seeded[k] = Dual::variable(v, 0);
            let lp = self.global_prior(&seeded);
            if k == 0 {
                total += lp.v;
            }
            grad[k] += lp.d[0];
        }
        if ng == 0 {
            total += self.global_prior::<f64>(&[]);
        }

        for (i, rec) in self.data.records().iter().enumerate() {
            let l = Dual::<LOCAL>::seed(self.local_inputs(x, i));
            let (ll, re, jac) = self.study_terms(rec, l);
            let t = ll + re + jac;
            total += t.v;
            let d = t.d;
            grad[zo + i] += d[0];
            grad[zo + n + i] += d[1];
            let row = &spec.design.rows[i];
            match spec.kind {
                ModelKind::Copula(_) => {
                    for (k, &xk) in row.iter().enumerate() {
                        grad[k] += xk * d[2];
                        grad[p + k] += xk * d[3];
                        grad[2 * p + k] += xk * d[4];
                        grad[3 * p + k] += xk * d[5];
                        if spec.association == Association::Free {
                            grad[4 * p + k] += xk * d[6];
                        }
                    }
                }
                ModelKind::Brma => {
                    for (k, &xk) in row.iter().enumerate() {
                        grad[k] += xk * d[2];
                        grad[p + k] += xk * d[3];
                    }
                    grad[2 * p] += d[4];
                    grad[2 * p + 1] += d[5];
                    grad[2 * p + 2] += d[6];
                }
            }
        }
        if total.is_nan() {
            total = f64::NEG_INFINITY;
        }
        total
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.log_posterior_and_gradient(x, &mut g);
        g
    }

    /// Names of the derived (constrained) quantities returned by [`Model::derived`].
    pub fn derived_names(&self) -> Vec<String> {
        let cells = self.spec.design.cells();
        let mut names = Vec::new();
        match self.spec.kind {
            ModelKind::Copula(_) => {
                for (label, _) in &cells {
                    for q in ["sens", "spec", "psi_se", "psi_sp", "theta", "tau"] {
                        names.push(format!("{q}[{label}]"));
                    }
                }
            }
            ModelKind::Brma => {
                for (label, _) in &cells {
                    for q in ["MU_se", "MU_sp", "mu_se", "mu_sp"] {
                        names.push(format!("{q}[{label}]"));
                    }
                }
                names.extend(["sigma[1]", "sigma[2]", "rho", "ktau"].map(String::from));
            }
        }
        let n = self.data.len();
        names.extend((1..=n).map(|i| format!("pi_se[{i}]")));
        names.extend((1..=n).map(|i| format!("pi_sp[{i}]")));
        names
    }

    /// Constrained quantities for one draw, aligned with [`Model::derived_names`].
    pub fn derived(&self, x: &[f64]) -> Vec<f64> {
        self.check_len(x);
        let cells = self.spec.design.cells();
        let dot = |row: &[f64], b: &[f64]| row.iter().zip(b).map(|(a, b)| a * b).sum::<f64>();
        let mut out = Vec::new();
        match self.spec.kind {
            ModelKind::Copula(family) => {
                for (_, row) in &cells {
                    let theta = match self.spec.association {
                        Association::Free => family.from_unconstrained(dot(row, self.coef(x, 4))).0,
                        Association::Fixed(t) => t,
                    };
                    out.push(inv_logit(dot(row, self.coef(x, 0))));
                    out.push(inv_logit(dot(row, self.coef(x, 1))));
                    out.push(dot(row, self.coef(x, 2)).exp());
                    out.push(dot(row, self.coef(x, 3)).exp());
                    out.push(theta);
                    out.push(family.kendall_tau(theta).unwrap_or(f64::NAN));
                }
            }
            ModelKind::Brma => {
                let g = 2 * self.spec.n_coef();
                let sigma = [x[g].exp(), x[g + 1].exp()];
                for (_, row) in &cells {
                    let m = [dot(row, self.coef(x, 0)), dot(row, self.coef(x, 1))];
                    out.push(brma_meta_analytic_mean(m[0], sigma[0]));
                    out.push(brma_meta_analytic_mean(m[1], sigma[1]));
                    out.push(inv_logit(m[0]));
                    out.push(inv_logit(m[1]));
                }
                let rho = x[g + 2].tanh();
                out.extend([sigma[0], sigma[1], rho, 2.0 / PI * rho.asin()]);
            }
        }
        let n = self.data.len();
        for j in 0..2 {
            for i in 0..n {
                out.push(inv_logit(self.z(x, i)[j]));
            }
        }
        out
    }

    /// An unconstrained point with the given coefficients and latent π set to
    /// the (continuity-corrected) observed proportions. Useful for tests.
    pub fn point_at_observed(&self, coef_fill: f64) -> Vec<f64> {
        let mut x = vec![coef_fill; self.dim()];
        let zo = self.spec.z_offset();
        let n = self.data.len();
        for (i, r) in self.data.records().iter().enumerate() {
            x[zo + i] = logit((r.tp as f64 + 0.5) / (r.n_diseased as f64 + 1.0));
            x[zo + n + i] = logit((r.tn as f64 + 0.5) / (r.n_healthy as f64 + 1.0));
        }
        x
    }
}

/// Bivariate normal log-density of `(z_se, z_sp)` around `(m_se, m_sp)`.
fn brma_latent<S: Scalar>(l: [S; LOCAL]) -> S {
    let (ls1, ls2, eta) = (l[4], l[5], l[6]);
    let e1 = (l[0] - l[2]) / ls1.exp();
    let e2 = (l[1] - l[3]) / ls2.exp();
    let rho = eta.tanh();
    // ln(1 − ρ²) = −2 ln cosh η
    let ln_one_m_r2 = eta.ln_cosh() * -2.0;
    let one_m_r2 = ln_one_m_r2.exp();
    let q = (e1 * e1 - rho * e1 * e2 * 2.0 + e2 * e2) / (one_m_r2 * 2.0);
    -q - ls1 - ls2 - ln_one_m_r2 * 0.5 - (2.0 * PI).ln()
}

/// Binomial log-likelihood of one study at constrained `(π_se, π_sp)`.
pub fn study_log_likelihood(rec: &StudyRecord, pi_se: f64, pi_sp: f64) -> f64 {
    let part = |k: u64, n: u64, p: f64| {
        let mut v = ln_choose(n, k);
        if k > 0 {
            v += k as f64 * p.ln();
        }
        if n > k {
            v += (n - k) as f64 * (1.0 - p).ln();
        }
        v
    };
    part(rec.tp, rec.n_diseased, pi_se) + part(rec.tn, rec.n_healthy, pi_sp)
}

fn hermite_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite(61))
}

/// Meta-analytic mean `E[logit⁻¹(μ + ε)]`, `ε ~ N(0, σ²)`, by 61-node
/// Gauss–Hermite quadrature.
pub fn brma_meta_analytic_mean(mu: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return inv_logit(mu);
    }
    let (nodes, weights) = hermite_rule();
    let s = std::f64::consts::SQRT_2 * sigma;
    nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * inv_logit(mu + s * x))
        .sum::<f64>()
        / PI.sqrt()
}
