//! Copula densities, distribution functions, rank correlations and
//! parameter transforms for the five supported families.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{normal_cdf, normal_quantile, Scalar};
use crate::special::integrate;

/// Clamp applied to `u` and `v` before any copula evaluation.
pub const UNIT_EPS: f64 = 1e-12;

/// Below this |θ| the Frank copula is evaluated by its expansion around independence.
const FRANK_SERIES_CUTOFF: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopulaFamily {
    Gauss,
    Frank,
    Fgm,
    /// Clayton rotated by 90 degrees.
    C90,
    /// Clayton rotated by 270 degrees.
    C270,
}

impl CopulaFamily {
    pub const ALL: [CopulaFamily; 5] = [Self::Gauss, Self::Frank, Self::Fgm, Self::C90, Self::C270];

    pub fn name(self) -> &'static str {
        match self {
            Self::Gauss => "gauss",
            Self::Frank => "frank",
            Self::Fgm => "fgm",
            Self::C90 => "c90",
            Self::C270 => "c270",
        }
    }

    pub fn check_theta(self, theta: f64) -> Result<()> {
        let ok = match self {
            Self::Gauss | Self::Fgm => theta > -1.0 && theta < 1.0,
            Self::Frank => theta.is_finite(),
            Self::C90 | Self::C270 => theta > 0.0 && theta.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "θ = {theta} is outside the {} domain",
                self.name()
            )))
        }
    }

    /// Log copula density at `(u, v)`, with `u` and `v` clamped into
    /// `[ε, 1 − ε]`. The caller guarantees `theta` lies in the domain.
    pub fn log_density<S: Scalar>(self, u: S, v: S, theta: S) -> S {
        let u = u.clamp_to(UNIT_EPS, 1.0 - UNIT_EPS);
        let v = v.clamp_to(UNIT_EPS, 1.0 - UNIT_EPS);
        match self {
            Self::Gauss => gauss_log_density(u, v, theta),
            Self::Frank => frank_log_density(u, v, theta),
            Self::Fgm => (S::cst(1.0) + theta * (u * 2.0 - 1.0) * (v * 2.0 - 1.0)).ln(),
            Self::C90 => clayton_log_density(-u + 1.0, v, theta),
            Self::C270 => clayton_log_density(u, -v + 1.0, theta),
        }
    }

    /// Checked log density for external callers.
    pub fn log_density_checked(self, u: f64, v: f64, theta: f64) -> Result<f64> {
        check_unit_args(u, v, theta)?;
        self.check_theta(theta)?;
        Ok(self.log_density(u, v, theta))
    }

    pub fn density(self, u: f64, v: f64, theta: f64) -> Result<f64> {
        self.log_density_checked(u, v, theta).map(f64::exp)
    }

    /// Copula distribution function `C(u, v; θ)`.
    pub fn cdf(self, u: f64, v: f64, theta: f64) -> Result<f64> {
        check_unit_args(u, v, theta)?;
        self.check_theta(theta)?;
        let u = u.clamp(0.0, 1.0);
        let v = v.clamp(0.0, 1.0);
        if u == 0.0 || v == 0.0 {
            return Ok(0.0);
        }
        if u == 1.0 {
            return Ok(v);
        }
        if v == 1.0 {
            return Ok(u);
        }
        let c = match self {
            Self::Gauss => bivariate_normal_cdf(normal_quantile(u), normal_quantile(v), theta),
            Self::Frank => frank_cdf(u, v, theta),
            Self::Fgm => u * v * (1.0 + theta * (1.0 - u) * (1.0 - v)),
            Self::C90 => v - clayton_cdf(1.0 - u, v, theta),
            Self::C270 => u - clayton_cdf(u, 1.0 - v, theta),
        };
        Ok(c.clamp(0.0, 1.0))
    }

    /// Like [`check_theta`](Self::check_theta) but admits `|θ| = 1` for the
    /// Gaussian and FGM families, where rank correlations stay defined.
    fn check_theta_closed(self, theta: f64) -> Result<()> {
        match self {
            Self::Gauss | Self::Fgm if theta.abs() == 1.0 => Ok(()),
            _ => self.check_theta(theta),
        }
    }

    /// Kendall's τ. Rotated Clayton families report `−θ/(θ + 2)`.
    pub fn kendall_tau(self, theta: f64) -> Result<f64> {
        self.check_theta_closed(theta)?;
        Ok(match self {
            Self::Gauss => 2.0 / PI * theta.asin(),
            Self::Frank => {
                if theta.abs() < FRANK_SERIES_CUTOFF {
                    theta / 9.0 - theta.powi(3) / 900.0
                } else {
                    1.0 + 4.0 * (debye(1, theta)? - 1.0) / theta
                }
            }
            Self::Fgm => 2.0 * theta / 9.0,
            Self::C90 | Self::C270 => -theta / (theta + 2.0),
        })
    }

    /// Spearman's ρ_s, available for FGM and Frank.
    pub fn spearman_rho(self, theta: f64) -> Result<f64> {
        match self {
            Self::Fgm => {
                self.check_theta_closed(theta)?;
                Ok(theta / 3.0)
            }
            Self::Frank => {
                self.check_theta(theta)?;
                if theta.abs() < FRANK_SERIES_CUTOFF {
                    return Ok(theta / 6.0);
                }
                Ok(1.0 - 12.0 * (debye(1, theta)? - debye(2, theta)?) / theta)
            }
            other => Err(Error::Capability(format!(
                "Spearman's rho has no closed form for the {} copula",
                other.name()
            ))),
        }
    }

    pub fn to_unconstrained(self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match self {
            Self::Gauss | Self::Fgm => theta.atanh(),
            Self::Frank => theta,
            Self::C90 | Self::C270 => theta.ln(),
        })
    }

    /// Maps an unconstrained value to `(θ, ln |dθ/dt|)`.
    pub fn from_unconstrained<S: Scalar>(self, t: S) -> (S, S) {
        match self {
            Self::Gauss | Self::Fgm => {
                // ln(1 − tanh² t) = −2 ln cosh t
                (t.tanh(), t.ln_cosh() * -2.0)
            }
            Self::Frank => (t, S::cst(0.0)),
            Self::C90 | Self::C270 => (t.exp(), t),
        }
    }
}

impl fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CopulaFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss" => Ok(Self::Gauss),
            "frank" => Ok(Self::Frank),
            "fgm" => Ok(Self::Fgm),
            "c90" => Ok(Self::C90),
            "c270" | "270" => Ok(Self::C270),
            other => Err(Error::Argument(format!("unknown copula family `{other}`"))),
        }
    }
}

/// A copula family together with a validated association parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CopulaParam {
    family: CopulaFamily,
    theta: f64,
}

impl CopulaParam {
    pub fn new(family: CopulaFamily, theta: f64) -> Result<Self> {
        family.check_theta(theta)?;
        Ok(Self { family, theta })
    }

    pub fn family(&self) -> CopulaFamily {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn log_density(&self, u: f64, v: f64) -> Result<f64> {
        self.family.log_density_checked(u, v, self.theta)
    }

    pub fn cdf(&self, u: f64, v: f64) -> Result<f64> {
        self.family.cdf(u, v, self.theta)
    }

    pub fn kendall_tau(&self) -> f64 {
        self.family.kendall_tau(self.theta).expect("validated on construction")
    }
}

fn check_unit_args(u: f64, v: f64, theta: f64) -> Result<()> {
    if u.is_nan() || v.is_nan() || theta.is_nan() {
        return Err(Error::Argument("NaN copula argument".into()));
    }
    Ok(())
}

fn gauss_log_density<S: Scalar>(u: S, v: S, rho: S) -> S {
    let x = u.normal_quantile();
    let y = v.normal_quantile();
    let one_m_r2 = S::cst(1.0) - rho * rho;
    let quad = (rho * x * y * 2.0 - rho * rho * (x * x + y * y)) / (one_m_r2 * 2.0);
    quad - one_m_r2.ln() * 0.5
}

/// `ln(e^a + e^b)` for generic scalars.
fn log_add_exp<S: Scalar>(a: S, b: S) -> S {
    let (hi, lo) = if a.value() >= b.value() { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(1 − e^{−x})` for `x > 0`.
fn ln_one_minus_exp_neg<S: Scalar>(x: S) -> S {
    (-(-x).exp_m1()).ln()
}

fn frank_log_density<S: Scalar>(u: S, v: S, theta: S) -> S {
    let t = theta.value();
    if t.abs() < FRANK_SERIES_CUTOFF {
        let a = u * 2.0 - 1.0;
        let b = v * 2.0 - 1.0;
        let w = u * v * (-u + 1.0) * (-v + 1.0) - 1.0 / 24.0;
        return theta * a * b * 0.5 + theta * theta * w;
    }
    if t < 0.0 {
        // c(u, v; θ) = c(1 − u, v; −θ)
        return frank_log_density_pos(-u + 1.0, v, -theta);
    }
    frank_log_density_pos(u, v, theta)
}

/// Frank log density for θ > 0. The denominator
/// `1 − e^{−θ} − (1 − e^{−θu})(1 − e^{−θv})` is rewritten as
/// `e^{−θu}(1 − e^{−θv}) + e^{−θv}(1 − e^{−θ(1−v)})`, a sum of non-negative terms.
fn frank_log_density_pos<S: Scalar>(u: S, v: S, theta: S) -> S {
    let ln_den = log_add_exp(
        -(theta * u) + ln_one_minus_exp_neg(theta * v),
        -(theta * v) + ln_one_minus_exp_neg(theta * (-v + 1.0)),
    );
    theta.ln() + ln_one_minus_exp_neg(theta) - theta * (u + v) - ln_den * 2.0
}

fn clayton_log_density<S: Scalar>(u: S, v: S, theta: S) -> S {
    let lu = u.ln();
    let lv = v.ln();
    let a = -(theta * lu);
    let b = -(theta * lv);
    let (hi, lo) = if a.value() >= b.value() { (a, b) } else { (b, a) };
    // ln(u^{−θ} + v^{−θ} − 1)
    let ln_sum = hi + (lo.exp_m1() * (-hi).exp()).ln_1p();
    (theta + 1.0).ln() - (theta + 1.0) * (lu + lv) - (theta.recip() + 2.0) * ln_sum
}

fn frank_cdf(u: f64, v: f64, theta: f64) -> f64 {
    if theta.abs() < FRANK_SERIES_CUTOFF {
        return u * v * (1.0 + 0.5 * theta * (1.0 - u) * (1.0 - v));
    }
    let num = (-theta * u).exp_m1() * (-theta * v).exp_m1();
    -(num / (-theta).exp_m1()).ln_1p() / theta
}

fn clayton_cdf(u: f64, v: f64, theta: f64) -> f64 {
    if u <= 0.0 || v <= 0.0 {
        return 0.0;
    }
    let s = u.powf(-theta) + v.powf(-theta) - 1.0;
    s.powf(-1.0 / theta)
}

/// Standard bivariate normal CDF via the integral over the correlation,
/// `Φ₂(h, k; ρ) = Φ(h)Φ(k) + (1/2π) ∫₀^ρ exp(−(h² − 2rhk + k²)/(2(1−r²))) / √(1−r²) dr`.
pub fn bivariate_normal_cdf(h: f64, k: f64, rho: f64) -> f64 {
    let base = normal_cdf(h) * normal_cdf(k);
    if rho == 0.0 {
        return base;
    }
    let f = |r: f64| {
        let s = 1.0 - r * r;
        (-(h * h - 2.0 * r * h * k + k * k) / (2.0 * s)).exp() / s.sqrt()
    };
    base + integrate(f, 0.0, rho, 1e-13) / (2.0 * PI)
}

/// Debye function `D_j(δ) = (j/δ^j) ∫₀^δ t^j/(e^t − 1) dt`, with `D_j(0) = 1`.
pub fn debye(j: u32, delta: f64) -> Result<f64> {
    if j != 1 && j != 2 {
        return Err(Error::Argument(format!("Debye order must be 1 or 2, got {j}")));
    }
    if delta.is_nan() {
        return Err(Error::Argument("NaN Debye argument".into()));
    }
    if delta == 0.0 {
        return Ok(1.0);
    }
    let integrand = |t: f64| {
        if t.abs() < 1e-10 {
            // t^j / (e^t − 1) → t^{j−1}
            if j == 1 {
                1.0 - t / 2.0
            } else {
                t
            }
        } else {
            t.powi(j as i32) / t.exp_m1()
        }
    };
    let integral = integrate(integrand, 0.0, delta, 1e-14);
    Ok(j as f64 / delta.powi(j as i32) * integral)
}
