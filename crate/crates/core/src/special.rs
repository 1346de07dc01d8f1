//! Special functions and quadrature used by the densities and summaries.

use crate::scalar::{Dual, Scalar};
use statrs::function::gamma::ln_gamma;

pub fn ln_beta<S: Scalar>(a: S, b: S) -> S {
    a.ln_gamma() + b.ln_gamma() - (a + b).ln_gamma()
}

/// `ln C(n, k)`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Binomial log-pmf given `ln p` and `ln (1 - p)`.
pub fn binomial_lpmf<S: Scalar>(k: u64, n: u64, ln_p: S, ln_q: S) -> S {
    let mut out = S::cst(ln_choose(n, k));
    if k > 0 {
        out += ln_p * k as f64;
    }
    if n > k {
        out += ln_q * (n - k) as f64;
    }
    out
}

/// Beta log-density evaluated from `ln x` and `ln(1 - x)`.
pub fn beta_lpdf<S: Scalar>(ln_x: S, ln_1mx: S, a: S, b: S) -> S {
    (a - 1.0) * ln_x + (b - 1.0) * ln_1mx - ln_beta(a, b)
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

const CF_MAX_ITER: usize = 5000;
const CF_EPS: f64 = 1e-15;
const CF_TINY: f64 = 1e-300;

/// Continued fraction for the incomplete beta function (modified Lentz).
/// Convergence is tested on every tangent component, not just the value.
fn beta_cf<S: Scalar>(a: S, b: S, x: S) -> S {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let guard = |d: S| if d.value().abs() < CF_TINY { S::cst(CF_TINY) } else { d };
    let mut c = S::cst(1.0);
    let mut d = guard(S::cst(1.0) - qab * x / qap).recip();
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let mf = m as f64;
        let m2 = 2.0 * mf;
        let aa = x * (b - mf) * mf / ((qam + m2) * (a + m2));
        d = guard(S::cst(1.0) + aa * d).recip();
        c = guard(S::cst(1.0) + aa / c);
        h *= d * c;
        let aa = -(x * (a + mf) * (qab + mf)) / ((a + m2) * (qap + m2));
        d = guard(S::cst(1.0) + aa * d).recip();
        c = guard(S::cst(1.0) + aa / c);
        let del = d * c;
        h *= del;
        if (del - 1.0).max_abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`; `y` must equal `1 - x` and is
/// passed separately so callers can supply it without cancellation.
///
/// Wide dual numbers are not pushed through the continued fraction: it runs
/// on three tangents `(x, a, b)` and the result is chained back.
pub fn reg_inc_beta<S: Scalar>(x: S, y: S, a: S, b: S) -> S {
    if !S::HAS_TANGENTS {
        return S::cst(reg_inc_beta_direct(x.value(), y.value(), a.value(), b.value()));
    }
    let [xd, ad, bd] = Dual::<3>::seed([x.value(), a.value(), b.value()]);
    let yd = Dual {
        v: y.value(),
        d: [-1.0, 0.0, 0.0],
    };
    let r = reg_inc_beta_direct(xd, yd, ad, bd);
    S::cst(r.v) + (x - x.value()) * r.d[0] + (a - a.value()) * r.d[1] + (b - b.value()) * r.d[2]
}

fn reg_inc_beta_direct<S: Scalar>(x: S, y: S, a: S, b: S) -> S {
    if x.value() <= 0.0 {
        return S::cst(0.0);
    }
    if y.value() <= 0.0 {
        return S::cst(1.0);
    }
    let ln_front = a * x.ln() + b * y.ln() - ln_beta(a, b);
    if x.value() < (a.value() + 1.0) / (a.value() + b.value() + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        S::cst(1.0) - ln_front.exp() * beta_cf(b, a, y) / b
    }
}

/// Quantile of the Beta(a, b) distribution by bisection on `I_x(a, b)`.
pub fn beta_quantile(p: f64, a: f64, b: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if reg_inc_beta(mid, 1.0 - mid, a, b) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Gauss–Hermite nodes and weights for `∫ f(x) e^{-x²} dx`, by Newton
/// iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-14 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * GK_WEIGHTS[7];
    let mut gauss = fc * G_WEIGHTS[3];
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let s = f(c - dx) + f(c + dx);
        kronrod += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            gauss += G_WEIGHTS[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) quadrature of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (val, err) = gk15(f, a, b);
        if err <= tol || depth >= 40 {
            return val;
        }
        let m = 0.5 * (a + b);
        recurse(f, a, m, 0.5 * tol, depth + 1) + recurse(f, m, b, 0.5 * tol, depth + 1)
    }
    if a == b {
        return 0.0;
    }
    recurse(&f, a, b, tol, 0)
}
