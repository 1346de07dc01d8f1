//! Copula densities, distribution functions and rank correlations checked
//! against brute-force quadrature written independently of the crate.

use dtameta::copula::CopulaFamily;
use proptest::prelude::*;

mod common;
use common::{check_copula_quadrature, integrate_unit_square, theta_grid};

#[test]
fn densities_integrate_to_one_and_match_kendall_tau() {
    check_copula_quadrature().unwrap();
}

#[test]
fn spearman_matches_quadrature_identity() {
    for (f, theta) in [
        (CopulaFamily::Frank, 1.0),
        (CopulaFamily::Frank, -4.0),
        (CopulaFamily::Fgm, 0.7),
    ] {
        let rho = 12.0 * integrate_unit_square(|u, v| f.cdf(u, v, theta).unwrap()) - 3.0;
        let closed = f.spearman_rho(theta).unwrap();
        assert!(
            (rho - closed).abs() < 1e-6,
            "{f} θ={theta}: quadrature {rho} vs {closed}"
        );
    }
    let r = CopulaFamily::Frank.spearman_rho(1.0).unwrap();
    assert!(r > 0.0, "positive θ gives positive dependence");
}

#[test]
fn mixed_difference_of_cdf_is_density() {
    let h = 1e-3;
    let grid = [0.2, 0.45, 0.7];
    for f in CopulaFamily::ALL {
        for theta in theta_grid(f) {
            for &u in &grid {
                for &v in &grid {
                    let c = |a: f64, b: f64| f.cdf(a, b, theta).unwrap();
                    let mixed = (c(u + h, v + h) - c(u + h, v - h) - c(u - h, v + h) + c(u - h, v - h)) / (4.0 * h * h);
                    let dens = f.density(u, v, theta).unwrap();
                    assert!(
                        (mixed - dens).abs() < 1e-4 * dens.max(1.0),
                        "{f} θ={theta} ({u},{v}): {mixed} vs {dens}"
                    );
                }
            }
        }
    }
}

#[test]
fn frank_cdf_matches_integrated_density() {
    let (f, theta) = (CopulaFamily::Frank, 2.0);
    let (a, b) = (0.4, 0.7);
    let mass = integrate_unit_square(|s, t| a * b * f.density(a * s, b * t, theta).unwrap());
    assert!((mass - f.cdf(a, b, theta).unwrap()).abs() < 1e-8);
}

/// Clayton density written out directly.
fn clayton(u: f64, v: f64, t: f64) -> f64 {
    (1.0 + t) * (u * v).powf(-1.0 - t) * (u.powf(-t) + v.powf(-t) - 1.0).powf(-1.0 / t - 2.0)
}

#[test]
fn spec_examples() {
    let ld = |f: CopulaFamily, u, v, t| f.log_density_checked(u, v, t).unwrap();
    assert_eq!(ld(CopulaFamily::Fgm, 0.5, 0.5, 0.9), 0.0);
    assert!((ld(CopulaFamily::Gauss, 0.5, 0.5, 0.6) - 1.25f64.ln()).abs() < 1e-12);
    assert!((ld(CopulaFamily::C90, 0.5, 0.5, 2.0) - (192.0 / 7f64.powf(2.5)).ln()).abs() < 1e-12);
    assert!(ld(CopulaFamily::Frank, 0.2, 0.9, 1e-9).abs() < 1e-9);
    assert!((CopulaFamily::Gauss.kendall_tau(-0.5).unwrap() + 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(CopulaFamily::Fgm.kendall_tau(0.0).unwrap(), 0.0);
    assert!((CopulaFamily::C270.kendall_tau(2.0).unwrap() + 0.5).abs() < 1e-15);
    assert!((CopulaFamily::Fgm.spearman_rho(1.0 - 1e-15).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!(CopulaFamily::Gauss.spearman_rho(0.2).is_err());
    assert!((CopulaFamily::Gauss.cdf(0.5, 0.5, 0.0).unwrap() - 0.25).abs() < 1e-12);
    assert_eq!(CopulaFamily::Gauss.from_unconstrained(0.0f64), (0.0, 0.0));
    assert_eq!(CopulaFamily::C90.from_unconstrained(0.0f64), (1.0, 0.0));
    assert!((CopulaFamily::Fgm.to_unconstrained(1.5f64.tanh()).unwrap() - 1.5).abs() < 1e-12);
    assert!(CopulaFamily::Gauss.log_density_checked(0.5, 0.5, 1.2).is_err());
    assert!(CopulaFamily::Gauss.log_density_checked(f64::NAN, 0.5, 0.2).is_err());
}

proptest! {
    #[test]
    fn boundary_conditions(u in 0.0f64..=1.0, fi in 0usize..5, t in 0.05f64..0.9) {
        let f = CopulaFamily::ALL[fi];
        let theta = if matches!(f, CopulaFamily::Frank | CopulaFamily::C90 | CopulaFamily::C270) { 5.0 * t } else { t };
        prop_assert!((f.cdf(u, 1.0, theta).unwrap() - u).abs() < 1e-12);
        prop_assert!((f.cdf(1.0, u, theta).unwrap() - u).abs() < 1e-12);
        prop_assert_eq!(f.cdf(u, 0.0, theta).unwrap(), 0.0);
        prop_assert_eq!(f.cdf(0.0, u, theta).unwrap(), 0.0);
    }

    #[test]
    fn fgm_density_bounds(u in 0.0f64..1.0, v in 0.0f64..1.0, theta in -0.999f64..0.999) {
        let c = CopulaFamily::Fgm.density(u, v, theta).unwrap();
        prop_assert!((0.0..=2.0).contains(&c));
    }

    #[test]
    fn gauss_symmetry(u in 0.001f64..0.999, v in 0.001f64..0.999, rho in -0.95f64..0.95) {
        let a = CopulaFamily::Gauss.log_density_checked(u, v, rho).unwrap();
        let b = CopulaFamily::Gauss.log_density_checked(v, u, rho).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn rotations_are_reflected_clayton(u in 0.01f64..0.99, v in 0.01f64..0.99, theta in 0.1f64..6.0) {
        let c90 = CopulaFamily::C90.density(u, v, theta).unwrap();
        let c270 = CopulaFamily::C270.density(u, v, theta).unwrap();
        let r90 = clayton(1.0 - u, v, theta);
        let r270 = clayton(u, 1.0 - v, theta);
        prop_assert!((c90 - r90).abs() <= 1e-9 * r90.max(1.0));
        prop_assert!((c270 - r270).abs() <= 1e-9 * r270.max(1.0));
    }

    #[test]
    fn unconstrained_round_trip(fi in 0usize..5, t in -3.0f64..3.0) {
        let f = CopulaFamily::ALL[fi];
        let (theta, _) = f.from_unconstrained(t);
        prop_assert!((f.to_unconstrained(theta).unwrap() - t).abs() < 1e-12);
    }
}
