//! Warmup adaptation: dual averaging of the step size and windowed
//! estimation of a diagonal inverse metric.

#[derive(Clone, Debug)]
pub struct DualAveraging {
    target: f64,
    gamma: f64,
    t0: f64,
    kappa: f64,
    mu: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl DualAveraging {
    pub fn new(target: f64, initial_step: f64) -> Self {
        let mut da = Self {
            target,
            gamma: 0.05,
            t0: 10.0,
            kappa: 0.75,
            mu: 0.0,
            counter: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
        };
        da.restart(initial_step);
        da
    }

    pub fn restart(&mut self, step: f64) {
        self.mu = (10.0 * step).ln();
        self.counter = 0.0;
        self.s_bar = 0.0;
        self.x_bar = 0.0;
    }

    /// Updates with the latest acceptance statistic; returns the next step size.
    pub fn update(&mut self, accept_stat: f64) -> f64 {
        let a = if accept_stat.is_finite() {
            accept_stat.min(1.0)
        } else {
            0.0
        };
        self.counter += 1.0;
        let eta = 1.0 / (self.counter + self.t0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - a);
        let x = self.mu - self.s_bar * self.counter.sqrt() / self.gamma;
        let w = self.counter.powf(-self.kappa);
        self.x_bar = (1.0 - w) * self.x_bar + w * x;
        x.exp()
    }

    /// Final step size after warmup.
    pub fn final_step(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Welford accumulator for per-coordinate variances.
#[derive(Clone, Debug)]
pub struct RunningVariance {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningVariance {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn add(&mut self, x: &[f64]) {
        self.n += 1.0;
        for (i, &v) in x.iter().enumerate() {
            let d = v - self.mean[i];
            self.mean[i] += d / self.n;
            self.m2[i] += d * (v - self.mean[i]);
        }
    }

    pub fn count(&self) -> usize {
        self.n as usize
    }

    /// Sample variance shrunk towards 1e-3, as in Stan's diagonal adaptation.
    pub fn regularized_variance(&self) -> Vec<f64> {
        let n = self.n;
        self.m2
            .iter()
            .map(|m2| {
                let var = m2 / (n - 1.0);
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }

    pub fn reset(&mut self) {
        let dim = self.mean.len();
        *self = Self::new(dim);
    }
}

/// Staged warmup: an initial fast interval, doubling slow windows for the
/// metric, and a terminal fast interval.
#[derive(Clone, Debug, PartialEq)]
pub struct WarmupSchedule {
    /// Iteration indices (exclusive ends) at which a slow window closes.
    pub window_ends: Vec<usize>,
    pub warmup: usize,
}

impl WarmupSchedule {
    pub const INIT_FRACTION: f64 = 0.15;
    pub const TERM_FRACTION: f64 = 0.10;
    pub const BASE_WINDOW: usize = 25;

    pub fn new(warmup: usize) -> Self {
        // too short for metric estimation: step size only
        if warmup < 20 {
            return Self {
                window_ends: Vec::new(),
                warmup,
            };
        }
        let init = (Self::INIT_FRACTION * warmup as f64).round() as usize;
        let term = (Self::TERM_FRACTION * warmup as f64).round() as usize;
        let slow_end = warmup - term;
        let mut ends = Vec::new();
        let mut start = init;
        let mut size = Self::BASE_WINDOW.min(slow_end - init).max(1);
        while start < slow_end {
            let mut end = start + size;
            // absorb a following window that would not fit
            if end + 2 * size > slow_end {
                end = slow_end;
            }
            ends.push(end);
            start = end;
            size *= 2;
        }
        Self {
            window_ends: ends,
            warmup,
        }
    }

    pub fn slow_start(&self) -> usize {
        if self.window_ends.is_empty() {
            self.warmup
        } else {
            (Self::INIT_FRACTION * self.warmup as f64).round() as usize
        }
    }

    pub fn in_slow_phase(&self, it: usize) -> bool {
        it >= self.slow_start() && self.window_ends.last().is_some_and(|&e| it < e)
    }

    pub fn closes_window(&self, it: usize) -> bool {
        self.window_ends.contains(&(it + 1))
    }
}
