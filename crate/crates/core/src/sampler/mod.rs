//! Multi-chain NUTS sampling with staged warmup adaptation.

pub mod adapt;
pub mod nuts;
pub mod rng;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::Model;
use adapt::{DualAveraging, RunningVariance, WarmupSchedule};
pub use nuts::{hmc_transition, leapfrog, nuts_transition, PhasePoint, TransitionStats, MAX_ENERGY_ERROR};

/// A differentiable log density on an unconstrained space.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    /// Writes the gradient into `grad` and returns the log density.
    fn logp_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

impl LogDensity for Model {
    fn dim(&self) -> usize {
        Model::dim(self)
    }

    fn logp_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.log_posterior_and_gradient(x, grad)
    }
}

/// Transition kernel used after the step size is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Nuts,
    /// Fixed-length HMC; for debugging.
    StaticHmc {
        n_steps: usize,
    },
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChainConfig {
    pub chains: usize,
    pub iter: usize,
    pub warmup: usize,
    pub thin: usize,
    pub seed: u64,
    pub max_tree_depth: usize,
    pub target_accept: f64,
    pub engine: Engine,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            chains: 3,
            iter: 2000,
            warmup: 1000,
            thin: 1,
            seed: 1,
            max_tree_depth: 10,
            target_accept: 0.8,
            engine: Engine::Nuts,
        }
    }
}

impl ChainConfig {
    pub fn new(iter: usize, warmup: usize, thin: usize, seed: u64) -> Self {
        Self {
            iter,
            warmup,
            thin,
            seed,
            ..Self::default()
        }
    }

    pub fn with_chains(mut self, chains: usize) -> Self {
        self.chains = chains;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::Argument("chains must be at least 1".into()));
        }
        if self.warmup >= self.iter {
            return Err(Error::Argument(format!(
                "warmup ({}) must be less than iter ({})",
                self.warmup, self.iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::Argument("thin must be at least 1".into()));
        }
        if self.max_tree_depth == 0 {
            return Err(Error::Argument("max_tree_depth must be at least 1".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Argument(format!(
                "target_accept must lie in (0, 1), got {}",
                self.target_accept
            )));
        }
        if let Engine::StaticHmc { n_steps: 0 } = self.engine {
            return Err(Error::Argument("HMC needs at least one leapfrog step".into()));
        }
        Ok(())
    }

    /// Kept draws per chain.
    pub fn kept_per_chain(&self) -> usize {
        (self.iter - self.warmup) / self.thin
    }

    /// Whether post-warmup iteration `j` (0-based) is kept.
    pub fn keeps(&self, j: usize) -> bool {
        (j + 1).is_multiple_of(self.thin)
    }
}

/// Output of one chain on the unconstrained scale.
#[derive(Clone, Debug, PartialEq)]
pub struct RawChain {
    pub chain: usize,
    pub draws: Vec<Vec<f64>>,
    pub log_density: Vec<f64>,
    /// Acceptance statistic of every post-warmup iteration.
    pub accept_stats: Vec<f64>,
    pub tree_depths: Vec<usize>,
    pub divergence_count: usize,
    pub warmup_divergences: usize,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
}

/// Draws of one chain together with the model quantities computed per draw.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainDraws {
    pub chain: usize,
    /// Kept draws × dim, unconstrained.
    pub draws: Vec<Vec<f64>>,
    /// Kept draws × derived quantities (see [`Model::derived_names`]).
    pub constrained: Vec<Vec<f64>>,
    /// Kept draws × 2n pointwise log-likelihoods.
    pub loglik: Vec<Vec<f64>>,
    pub log_density: Vec<f64>,
    pub accept_stats: Vec<f64>,
    pub tree_depths: Vec<usize>,
    pub divergence_count: usize,
    pub warmup_divergences: usize,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
}

const INIT_ATTEMPTS: u64 = 100;
const INIT_RADIUS: f64 = 2.0;

fn initialize<T: LogDensity + ?Sized>(target: &T, seed: u64, chain: u64) -> Result<PhasePoint> {
    let dim = target.dim();
    for attempt in 0..INIT_ATTEMPTS {
        let mut rng = rng::init_rng(seed, chain, attempt);
        let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-INIT_RADIUS..INIT_RADIUS)).collect();
        let z = PhasePoint::new(target, q);
        if z.logp.is_finite() && z.grad.iter().all(|g| g.is_finite()) {
            return Ok(z);
        }
    }
    Err(Error::Initialization(format!(
        "chain {chain}: log posterior not finite at any of {INIT_ATTEMPTS} random starting points"
    )))
}

fn transition<T: LogDensity + ?Sized, R: Rng>(
    target: &T,
    z: &PhasePoint,
    eps: f64,
    inv_metric: &[f64],
    config: &ChainConfig,
    rng: &mut R,
) -> (PhasePoint, TransitionStats) {
    match config.engine {
        Engine::Nuts => nuts_transition(target, z, eps, inv_metric, config.max_tree_depth, rng),
        Engine::StaticHmc { n_steps } => hmc_transition(target, z, eps, inv_metric, n_steps, rng),
    }
}

/// Runs a single chain. Deterministic in `(config, chain)`.
pub fn run_chain<T: LogDensity + ?Sized>(target: &T, config: &ChainConfig, chain: usize) -> Result<RawChain> {
    config.validate()?;
    let dim = target.dim();
    let c = chain as u64;
    let mut z = initialize(target, config.seed, c)?;
    let mut inv_metric = vec![1.0; dim];
    let mut eps = {
        let mut r = rng::init_rng(config.seed, c, INIT_ATTEMPTS);
        nuts::find_reasonable_step(target, &z, 1.0, &inv_metric, &mut r)
    };
    let mut da = DualAveraging::new(config.target_accept, eps);
    let schedule = WarmupSchedule::new(config.warmup);
    let mut var = RunningVariance::new(dim);

    let mut out = RawChain {
        chain,
        draws: Vec::with_capacity(config.kept_per_chain()),
        log_density: Vec::with_capacity(config.kept_per_chain()),
        accept_stats: Vec::with_capacity(config.iter - config.warmup),
        tree_depths: Vec::with_capacity(config.iter - config.warmup),
        divergence_count: 0,
        warmup_divergences: 0,
        step_size: eps,
        inv_metric: inv_metric.clone(),
    };

    for it in 0..config.iter {
        let mut r = rng::iteration_rng(config.seed, c, it as u64);
        let (next, stats) = transition(target, &z, eps, &inv_metric, config, &mut r);
        z = next;
        if it < config.warmup {
            out.warmup_divergences += stats.divergent as usize;
            eps = da.update(stats.accept_stat);
            if schedule.in_slow_phase(it) {
                var.add(&z.q);
            }
            if schedule.closes_window(it) {
                inv_metric = var.regularized_variance();
                var.reset();
                eps = nuts::find_reasonable_step(target, &z, eps, &inv_metric, &mut r);
                da.restart(eps);
            }
            if it + 1 == config.warmup {
                eps = da.final_step();
            }
            continue;
        }
        let j = it - config.warmup;
        out.accept_stats.push(stats.accept_stat);
        out.tree_depths.push(stats.tree_depth);
        out.divergence_count += stats.divergent as usize;
        if config.keeps(j) {
            out.draws.push(z.q.clone());
            out.log_density.push(z.logp);
        }
    }
    out.step_size = eps;
    out.inv_metric = inv_metric;
    Ok(out)
}

/// Runs all chains in parallel; results are ordered by chain index and do
/// not depend on scheduling.
pub fn run_raw_chains<T: LogDensity + ?Sized>(target: &T, config: &ChainConfig) -> Result<Vec<RawChain>> {
    config.validate()?;
    let results: Vec<Result<RawChain>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..config.chains)
            .map(|k| s.spawn(move || run_chain(target, config, k)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Initialization("sampler thread panicked".into())))
            })
            .collect()
    });
    results.into_iter().collect()
}

/// Samples the posterior of `model` and evaluates derived quantities and
/// pointwise log-likelihoods on every kept draw.
pub fn run_chains(model: &Model, config: &ChainConfig) -> Result<Vec<ChainDraws>> {
    let raw = run_raw_chains(model, config)?;
    Ok(raw.into_iter().map(|r| attach(model, r)).collect())
}

fn attach(model: &Model, r: RawChain) -> ChainDraws {
    let constrained = r.draws.iter().map(|x| model.derived(x)).collect();
    let loglik = r.draws.iter().map(|x| model.pointwise_log_likelihood(x)).collect();
    ChainDraws {
        chain: r.chain,
        draws: r.draws,
        constrained,
        loglik,
        log_density: r.log_density,
        accept_stats: r.accept_stats,
        tree_depths: r.tree_depths,
        divergence_count: r.divergence_count,
        warmup_divergences: r.warmup_divergences,
        step_size: r.step_size,
        inv_metric: r.inv_metric,
    }
}
