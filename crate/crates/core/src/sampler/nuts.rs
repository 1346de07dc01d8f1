//! Hamiltonian transitions with a diagonal Euclidean metric: multinomial
//! NUTS with the generalized no-U-turn criterion, and fixed-length HMC.

use rand::Rng;
use rand_distr::StandardNormal;

use super::LogDensity;
use crate::special::log_add_exp;

/// Energy error beyond which a trajectory is marked divergent.
pub const MAX_ENERGY_ERROR: f64 = 1000.0;

/// A point in phase space together with its cached log density and gradient.
#[derive(Clone, Debug)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub grad: Vec<f64>,
    pub logp: f64,
}

impl PhasePoint {
    pub fn new<T: LogDensity + ?Sized>(target: &T, q: Vec<f64>) -> Self {
        let mut grad = vec![0.0; q.len()];
        let logp = target.logp_grad(&q, &mut grad);
        let p = vec![0.0; q.len()];
        Self { q, p, grad, logp }
    }

    pub fn kinetic(&self, inv_metric: &[f64]) -> f64 {
        0.5 * self.p.iter().zip(inv_metric).map(|(p, m)| p * p * m).sum::<f64>()
    }

    pub fn hamiltonian(&self, inv_metric: &[f64]) -> f64 {
        let h = -self.logp + self.kinetic(inv_metric);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn velocity(&self, inv_metric: &[f64]) -> Vec<f64> {
        self.p.iter().zip(inv_metric).map(|(p, m)| p * m).collect()
    }

    pub fn resample_momentum<R: Rng>(&mut self, inv_metric: &[f64], rng: &mut R) {
        for (p, m) in self.p.iter_mut().zip(inv_metric) {
            let z: f64 = rng.sample(StandardNormal);
            *p = z / m.sqrt();
        }
    }
}

/// One leapfrog step: half kick, drift, half kick. `grad` must hold the
/// gradient of the log density at `q` on entry and holds it at the new `q`
/// on return. Returns the log density at the new position.
pub fn leapfrog<F>(
    q: &mut [f64],
    p: &mut [f64],
    grad: &mut [f64],
    step: f64,
    inv_metric: &[f64],
    mut logp_grad: F,
) -> f64
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    for (pi, gi) in p.iter_mut().zip(grad.iter()) {
        *pi += 0.5 * step * gi;
    }
    for ((qi, pi), mi) in q.iter_mut().zip(p.iter()).zip(inv_metric) {
        *qi += step * mi * pi;
    }
    let logp = logp_grad(q, grad);
    for (pi, gi) in p.iter_mut().zip(grad.iter()) {
        *pi += 0.5 * step * gi;
    }
    logp
}

fn step<T: LogDensity + ?Sized>(target: &T, z: &mut PhasePoint, eps: f64, inv_metric: &[f64]) {
    z.logp = leapfrog(&mut z.q, &mut z.p, &mut z.grad, eps, inv_metric, |q, g| {
        target.logp_grad(q, g)
    });
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TransitionStats {
    pub accept_stat: f64,
    pub tree_depth: usize,
    pub n_leapfrog: usize,
    pub divergent: bool,
    pub energy: f64,
}

fn criterion(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    let a: f64 = p_sharp_plus.iter().zip(rho).map(|(x, y)| x * y).sum();
    let b: f64 = p_sharp_minus.iter().zip(rho).map(|(x, y)| x * y).sum();
    a > 0.0 && b > 0.0
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

fn sum(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

struct TreeBuilder<'a, T: ?Sized, R> {
    target: &'a T,
    inv_metric: &'a [f64],
    eps: f64,
    h0: f64,
    n_leapfrog: usize,
    sum_metro_prob: f64,
    divergent: bool,
    rng: &'a mut R,
}

/// Edge momenta of a (sub)trajectory, in the direction of integration.
struct Edges {
    p_beg: Vec<f64>,
    p_end: Vec<f64>,
    p_sharp_beg: Vec<f64>,
    p_sharp_end: Vec<f64>,
}

impl<T: LogDensity + ?Sized, R: Rng> TreeBuilder<'_, T, R> {
    /// Extends the trajectory from `z` by `2^depth` steps. On success
    /// `z_propose` holds the multinomial sample of the new subtree.
    fn build(
        &mut self,
        depth: usize,
        z: &mut PhasePoint,
        z_propose: &mut PhasePoint,
        rho: &mut [f64],
        log_sum_weight: &mut f64,
    ) -> Option<Edges> {
        if depth == 0 {
            step(self.target, z, self.eps, self.inv_metric);
            self.n_leapfrog += 1;
            let h = z.hamiltonian(self.inv_metric);
            if h - self.h0 > MAX_ENERGY_ERROR || z.grad.iter().any(|g| !g.is_finite()) {
                self.divergent = true;
            }
            *log_sum_weight = log_add_exp(*log_sum_weight, self.h0 - h);
            self.sum_metro_prob += if self.h0 - h > 0.0 { 1.0 } else { (self.h0 - h).exp() };
            *z_propose = z.clone();
            add_into(rho, &z.p);
            let sharp = z.velocity(self.inv_metric);
            return if self.divergent {
                None
            } else {
                Some(Edges {
                    p_beg: z.p.clone(),
                    p_end: z.p.clone(),
                    p_sharp_beg: sharp.clone(),
                    p_sharp_end: sharp,
                })
            };
        }

        let dim = z.q.len();
        let mut lsw_init = f64::NEG_INFINITY;
        let mut rho_init = vec![0.0; dim];
        let init = self.build(depth - 1, z, z_propose, &mut rho_init, &mut lsw_init)?;

        let mut z_propose_final = z.clone();
        let mut lsw_final = f64::NEG_INFINITY;
        let mut rho_final = vec![0.0; dim];
        let fin = self.build(depth - 1, z, &mut z_propose_final, &mut rho_final, &mut lsw_final)?;

        let lsw_subtree = log_add_exp(lsw_init, lsw_final);
        *log_sum_weight = log_add_exp(*log_sum_weight, lsw_subtree);
        if lsw_final > lsw_subtree || self.rng.random::<f64>() < (lsw_final - lsw_subtree).exp() {
            *z_propose = z_propose_final;
        }

        let rho_subtree = sum(&rho_init, &rho_final);
        add_into(rho, &rho_subtree);
        let mut persist = criterion(&init.p_sharp_beg, &fin.p_sharp_end, &rho_subtree);
        persist &= criterion(&init.p_sharp_beg, &fin.p_sharp_beg, &sum(&rho_init, &fin.p_beg));
        persist &= criterion(&init.p_sharp_end, &fin.p_sharp_end, &sum(&rho_final, &init.p_end));
        if !persist {
            return None;
        }
        Some(Edges {
            p_beg: init.p_beg,
            p_end: fin.p_end,
            p_sharp_beg: init.p_sharp_beg,
            p_sharp_end: fin.p_sharp_end,
        })
    }
}

/// One multinomial NUTS transition from `current` (momentum is resampled).
pub fn nuts_transition<T: LogDensity + ?Sized, R: Rng>(
    target: &T,
    current: &PhasePoint,
    eps: f64,
    inv_metric: &[f64],
    max_depth: usize,
    rng: &mut R,
) -> (PhasePoint, TransitionStats) {
    let dim = current.q.len();
    let mut z0 = current.clone();
    z0.resample_momentum(inv_metric, rng);
    let h0 = z0.hamiltonian(inv_metric);

    let mut z_fwd = z0.clone();
    let mut z_bck = z0.clone();
    let mut z_sample = z0.clone();
    let mut z_propose = z0.clone();

    let sharp0 = z0.velocity(inv_metric);
    // momenta and velocities at the two ends of the whole trajectory
    let (mut p_left, mut sharp_left) = (z0.p.clone(), sharp0.clone());
    let (mut p_right, mut sharp_right) = (z0.p.clone(), sharp0);

    let mut rho = z0.p.clone();
    let mut log_sum_weight = 0.0;
    let mut depth = 0;

    let mut builder = TreeBuilder {
        target,
        inv_metric,
        eps,
        h0,
        n_leapfrog: 0,
        sum_metro_prob: 0.0,
        divergent: false,
        rng,
    };

    while depth < max_depth {
        let mut rho_new = vec![0.0; dim];
        let mut lsw_subtree = f64::NEG_INFINITY;
        let forward = builder.rng.random::<f64>() > 0.5;
        let (z_edge, sign) = if forward { (&mut z_fwd, 1.0) } else { (&mut z_bck, -1.0) };
        builder.eps = sign * eps;
        let Some(e) = builder.build(depth, z_edge, &mut z_propose, &mut rho_new, &mut lsw_subtree) else {
            break;
        };
        depth += 1;

        if lsw_subtree > log_sum_weight || builder.rng.random::<f64>() < (lsw_subtree - log_sum_weight).exp() {
            z_sample = z_propose.clone();
        }
        log_sum_weight = log_add_exp(log_sum_weight, lsw_subtree);

        let rho_old = std::mem::take(&mut rho);
        rho = sum(&rho_old, &rho_new);
        let persist = if forward {
            criterion(&sharp_left, &e.p_sharp_end, &rho)
                && criterion(&sharp_left, &e.p_sharp_beg, &sum(&rho_old, &e.p_beg))
                && criterion(&sharp_right, &e.p_sharp_end, &sum(&rho_new, &p_right))
        } else {
            criterion(&e.p_sharp_end, &sharp_right, &rho)
                && criterion(&e.p_sharp_end, &sharp_left, &sum(&rho_new, &p_left))
                && criterion(&e.p_sharp_beg, &sharp_right, &sum(&rho_old, &e.p_beg))
        };
        if forward {
            p_right = e.p_end;
            sharp_right = e.p_sharp_end;
        } else {
            p_left = e.p_end;
            sharp_left = e.p_sharp_end;
        }
        if !persist {
            break;
        }
    }
    // a divergent trajectory yields its starting point
    if builder.divergent {
        z_sample = current.clone();
    }

    let n = builder.n_leapfrog.max(1);
    let stats = TransitionStats {
        accept_stat: builder.sum_metro_prob / n as f64,
        tree_depth: depth,
        n_leapfrog: builder.n_leapfrog,
        divergent: builder.divergent,
        energy: z_sample.hamiltonian(inv_metric),
    };
    (z_sample, stats)
}

/// Fixed-length HMC with a Metropolis correction.
pub fn hmc_transition<T: LogDensity + ?Sized, R: Rng>(
    target: &T,
    current: &PhasePoint,
    eps: f64,
    inv_metric: &[f64],
    n_steps: usize,
    rng: &mut R,
) -> (PhasePoint, TransitionStats) {
    let mut z = current.clone();
    z.resample_momentum(inv_metric, rng);
    let h0 = z.hamiltonian(inv_metric);
    let mut divergent = false;
    for _ in 0..n_steps {
        step(target, &mut z, eps, inv_metric);
        if z.hamiltonian(inv_metric) - h0 > MAX_ENERGY_ERROR || z.grad.iter().any(|g| !g.is_finite()) {
            divergent = true;
            break;
        }
    }
    let h = z.hamiltonian(inv_metric);
    let accept = if divergent { 0.0 } else { (h0 - h).exp().min(1.0) };
    let take = !divergent && rng.random::<f64>() < accept;
    let next = if take { z } else { current.clone() };
    let energy = next.hamiltonian(inv_metric);
    (
        next,
        TransitionStats {
            accept_stat: accept,
            tree_depth: 0,
            n_leapfrog: n_steps,
            divergent,
            energy,
        },
    )
}

/// Heuristic initial step size: doubles or halves until the one-step
/// acceptance crosses 0.8.
pub fn find_reasonable_step<T: LogDensity + ?Sized, R: Rng>(
    target: &T,
    start: &PhasePoint,
    initial: f64,
    inv_metric: &[f64],
    rng: &mut R,
) -> f64 {
    let mut eps = initial;
    let threshold = 0.8f64.ln();
    let mut direction = 0.0;
    for _ in 0..100 {
        let mut z = start.clone();
        z.resample_momentum(inv_metric, rng);
        let h0 = z.hamiltonian(inv_metric);
        step(target, &mut z, eps, inv_metric);
        let delta = h0 - z.hamiltonian(inv_metric);
        let up = delta > threshold;
        if direction == 0.0 {
            direction = if up { 1.0 } else { -1.0 };
        } else if (direction > 0.0) != up {
            break;
        }
        eps = if direction > 0.0 { 2.0 * eps } else { 0.5 * eps };
        if !(1e-10..=1e7).contains(&eps) {
            break;
        }
    }
    eps.clamp(1e-10, 1e7)
}
