//! Convergence and mixing diagnostics over several chains of one scalar.

use crate::error::{Error, Result};
use crate::sampler::ChainDraws;

/// A diagnostic value and whether the input series was constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub degenerate: bool,
}

impl Estimate {
    fn regular(value: f64) -> Self {
        Self {
            value,
            degenerate: false,
        }
    }

    fn degenerate(value: f64) -> Self {
        Self {
            value,
            degenerate: true,
        }
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with the `n - 1` denominator.
fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn check(chains: &[Vec<f64>], min_len: usize) -> Result<usize> {
    let Some(first) = chains.first() else {
        return Err(Error::Precondition("no chains given".into()));
    };
    let n = first.len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::Precondition("chains differ in length".into()));
    }
    if n < min_len {
        return Err(Error::Precondition(format!(
            "need at least {min_len} draws per chain, got {n}"
        )));
    }
    if chains.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("non-finite value in chain".into()));
    }
    Ok(n)
}

fn is_constant(chains: &[Vec<f64>]) -> bool {
    let v0 = chains[0][0];
    chains.iter().flatten().all(|&v| v == v0)
}

/// Split potential scale reduction factor. Odd-length chains drop their
/// middle draw.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<Estimate> {
    let n_full = check(chains, 4)?;
    let n = n_full / 2;
    let halves: Vec<&[f64]> = chains.iter().flat_map(|c| [&c[..n], &c[n_full - n..]]).collect();
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let b = n as f64 * variance(&means);
    let w = halves.iter().map(|h| variance(h)).sum::<f64>() / halves.len() as f64;
    if w == 0.0 {
        return Ok(if b > 0.0 {
            Estimate::regular(f64::INFINITY)
        } else {
            Estimate::degenerate(1.0)
        });
    }
    let nf = n as f64;
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    Ok(Estimate::regular((var_plus / w).sqrt()))
}

/// Autocovariance at `lag` with the biased (`1/N`) normalisation.
fn autocov(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    x[..n - lag]
        .iter()
        .zip(&x[lag..])
        .map(|(a, b)| (a - m) * (b - m))
        .sum::<f64>()
        / n as f64
}

/// Multi-chain effective sample size with Geyer's initial monotone
/// sequence truncation.
pub fn ess(chains: &[Vec<f64>]) -> Result<Estimate> {
    let n = check(chains, 8)?;
    let m = chains.len();
    let total = (m * n) as f64;
    if is_constant(chains) {
        return Ok(Estimate::degenerate(total));
    }
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let vars: Vec<f64> = chains.iter().map(|c| variance(c)).collect();
    let w = mean(&vars);
    let b = if m > 1 { nf * variance(&means) } else { 0.0 };
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    if var_plus <= 0.0 {
        return Ok(Estimate::degenerate(total));
    }
    let rho = |t: usize| {
        let mean_acov = chains.iter().zip(&means).map(|(c, &mu)| autocov(c, mu, t)).sum::<f64>() / m as f64;
        1.0 - (w - mean_acov) / var_plus
    };

    // sum of positive, non-increasing autocorrelation pairs
    let mut sum_pairs = 0.0;
    let mut prev = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let pair = rho(t) + rho(t + 1);
        if pair.is_nan() || pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum_pairs += pair;
        prev = pair;
        t += 2;
    }
    let tau = (-1.0 + 2.0 * sum_pairs).max(1.0 / total.log10());
    Ok(Estimate::regular(total / tau))
}

/// Monte Carlo standard error of the mean: posterior SD over `sqrt(ESS)`.
pub fn mcse(chains: &[Vec<f64>]) -> Result<Estimate> {
    let e = ess(chains)?;
    if e.degenerate {
        return Ok(Estimate::degenerate(0.0));
    }
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    Ok(Estimate::regular((variance(&pooled) / e.value).sqrt()))
}

/// Per-chain kept-draw series of derived quantity `column`.
pub fn trace_series(chains: &[ChainDraws], column: usize) -> Vec<Vec<f64>> {
    chains
        .iter()
        .map(|c| c.constrained.iter().map(|row| row[column]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_rhat_hand_example() {
        let r = split_rhat(&[vec![1.0, 2.0, 3.0, 4.0], vec![3.0, 4.0, 5.0, 6.0]]).unwrap();
        let expected = (2.916_666_666_666_667f64 / 0.5).sqrt();
        assert!((r.value - expected).abs() < 1e-12);
        assert!((r.value - 2.4152).abs() < 1e-4);
        assert!(!r.degenerate);
    }

    #[test]
    fn constant_chains_are_flagged() {
        let c = vec![vec![2.0; 10], vec![2.0; 10]];
        assert_eq!(split_rhat(&c).unwrap(), Estimate::degenerate(1.0));
        assert_eq!(ess(&c).unwrap(), Estimate::degenerate(20.0));
        assert_eq!(mcse(&c).unwrap(), Estimate::degenerate(0.0));
    }

    #[test]
    fn between_without_within_is_infinite() {
        let r = split_rhat(&[vec![1.0; 4], vec![2.0; 4]]).unwrap();
        assert!(r.value.is_infinite());
    }

    #[test]
    fn preconditions() {
        assert!(split_rhat(&[vec![1.0, 2.0, 3.0]]).is_err());
        assert!(ess(&[vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]]).is_err());
        assert!(ess(&[vec![0.0; 8], vec![0.0; 9]]).is_err());
        assert!(ess(&[]).is_err());
    }
}
