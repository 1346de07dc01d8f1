//! WAIC, exact intervals, model comparison and summaries of fitted chains.

use dtameta::copula::CopulaFamily;
use dtameta::data::{builtin_dataset, Dataset, Formula};
use dtameta::model::{Model, ModelKind, ModelSpec};
use dtameta::sampler::ChainConfig;
use dtameta::summary::{compare, exact_ci, fit, summarize, waic, FitSummary, WaicResult};
use dtameta::Error;
use proptest::prelude::*;

mod common;
use common::{binomial_pmf, check_cp_coverage, check_independence_oracle};

#[test]
fn waic_identity_on_printed_components() {
    let w = WaicResult::from_parts(-37.8529, 7.0941);
    assert!((w.waic - 89.8940).abs() < 1e-9);
}

#[test]
fn exact_ci_edge_cases() {
    let (lo, hi) = exact_ci(0, 10, 0.95).unwrap();
    assert_eq!(lo, 0.0);
    assert!((hi - (1.0 - 0.025f64.powf(0.1))).abs() < 1e-9);
    let (lo, hi) = exact_ci(10, 10, 0.95).unwrap();
    assert!((lo - 0.025f64.powf(0.1)).abs() < 1e-9);
    assert_eq!(hi, 1.0);
    let (lo, hi) = exact_ci(25, 33, 0.95).unwrap();
    assert!(lo < 25.0 / 33.0 && 25.0 / 33.0 < hi);
    assert!(exact_ci(11, 10, 0.95).is_err());
    assert!(exact_ci(0, 0, 0.95).is_err());
    assert!(exact_ci(3, 10, 1.0).is_err());
}

#[test]
fn exact_ci_tail_probabilities() {
    // the bounds solve P(X >= k | low) = α/2 and P(X <= k | high) = α/2
    let (k, n) = (7u64, 20u64);
    let (lo, hi) = exact_ci(k, n, 0.95).unwrap();
    let upper_tail: f64 = (k..=n).map(|j| binomial_pmf(j, n, lo)).sum();
    let lower_tail: f64 = (0..=k).map(|j| binomial_pmf(j, n, hi)).sum();
    assert!((upper_tail - 0.025).abs() < 1e-8, "{upper_tail}");
    assert!((lower_tail - 0.025).abs() < 1e-8, "{lower_tail}");
}

#[test]
fn exact_ci_coverage_at_n_20() {
    check_cp_coverage().unwrap();
}

fn loglik_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..30, 1usize..12).prop_flat_map(|(s, m)| prop::collection::vec(prop::collection::vec(-30.0f64..0.0, m), s))
}

proptest! {
    #[test]
    fn waic_is_permutation_invariant(ll in loglik_matrix(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let base = waic(&ll).unwrap();
        prop_assert!(base.p_waic >= 0.0);
        prop_assert!((base.waic + 2.0 * (base.lppd - base.p_waic)).abs() < 1e-9);

        let mut rows = ll.clone();
        rows.shuffle(&mut rng);
        let mut cols: Vec<usize> = (0..ll[0].len()).collect();
        cols.shuffle(&mut rng);
        let moved: Vec<Vec<f64>> = rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
        let w = waic(&moved).unwrap();
        let tol = 1e-9 * base.waic.abs().max(1.0);
        prop_assert!((w.lppd - base.lppd).abs() < tol);
        prop_assert!((w.p_waic - base.p_waic).abs() < tol);
        prop_assert!((w.waic - base.waic).abs() < tol);
    }
}

#[test]
fn waic_rejects_bad_input() {
    assert!(waic(&[vec![-1.0, f64::NEG_INFINITY], vec![-1.0, -2.0]]).is_err());
    assert!(waic(&[vec![-1.0, -2.0], vec![-1.0]]).is_err());
}

fn copula_model(data: &Dataset, family: CopulaFamily, fixed: Option<f64>) -> Model {
    let mut spec = ModelSpec::new(ModelKind::Copula(family), Formula::Intercept, data).unwrap();
    if let Some(t) = fixed {
        spec = spec.with_fixed_association(t).unwrap();
    }
    Model::new(spec, data.clone()).unwrap()
}

fn small_fit(family: CopulaFamily, data: &str, seed: u64) -> FitSummary {
    let ds = builtin_dataset(data).unwrap();
    let m = copula_model(&ds, family, None);
    fit(&m, &ChainConfig::new(200, 100, 1, seed).with_chains(2)).unwrap().1
}

#[test]
fn compare_orders_and_checks_data() {
    let a = small_fit(CopulaFamily::Fgm, "telomerase", 1);
    assert!(matches!(compare(std::slice::from_ref(&a)), Err(Error::Precondition(_))));

    let mut b = a.clone();
    b.model = ModelKind::Copula(CopulaFamily::Frank);
    b.waic.waic = a.waic.waic - 1.0;
    let table = compare(&[a.clone(), b.clone()]).unwrap();
    assert_eq!(table.rows.len(), 2);
    assert_eq!(table.rows[0].model, b.model);
    assert!(table.rows[0].waic.waic <= table.rows[1].waic.waic);

    let mut tie = a.clone();
    tie.model = ModelKind::Copula(CopulaFamily::Gauss);
    let table = compare(&[a.clone(), tie.clone()]).unwrap();
    assert_eq!(table.rows[0].model, a.model);
    let table = compare(&[tie.clone(), a.clone()]).unwrap();
    assert_eq!(table.rows[0].model, tie.model);

    let csv = table.to_csv().unwrap();
    assert!(csv.starts_with("model,parameter,mean,lower,upper,n_eff,rhat,waic\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 3);

    let other = small_fit(CopulaFamily::Fgm, "ascus", 1);
    assert!(matches!(compare(&[a, other]), Err(Error::Comparability(_))));
}

#[test]
fn summaries_of_copula_draws() {
    let ds = builtin_dataset("telomerase").unwrap();
    let m = copula_model(&ds, CopulaFamily::Gauss, None);
    let cfg = ChainConfig::new(300, 150, 1, 5).with_chains(2);
    let (draws, s) = fit(&m, &cfg).unwrap();
    assert_eq!(s.total_draws, 300);
    assert_eq!(s.studies.len(), 10);
    assert_eq!(s.schema_version, "v1");

    // sensitivity is the average of logit⁻¹ of the mean coefficient, draw by draw
    let mut sum = 0.0;
    let mut count = 0.0;
    for c in &draws {
        for x in &c.draws {
            sum += 1.0 / (1.0 + (-x[0]).exp());
            count += 1.0;
        }
    }
    let sens = s.parameters.iter().find(|p| p.name.starts_with("sens[")).unwrap();
    assert!((sens.mean - sum / count).abs() < 1e-12);
    for p in &s.parameters {
        assert!(p.q025 <= p.q975, "{}", p.name);
    }
    let r7 = &s.studies[6];
    assert_eq!(r7.observed_sp.estimate, 1.0);
    assert_eq!(r7.observed_sp.high, 1.0);

    assert!(matches!(summarize(&draws[..1], &m, &cfg), Err(Error::Precondition(_))));
    let other = copula_model(&ds, CopulaFamily::Gauss, Some(0.2));
    assert!(matches!(summarize(&draws, &other, &cfg), Err(Error::Layout(_))));
}

#[test]
fn degenerate_draws_summarize_to_a_point() {
    let ds = builtin_dataset("telomerase").unwrap();
    let m = copula_model(&ds, CopulaFamily::Frank, None);
    let cfg = ChainConfig::new(40, 20, 1, 2).with_chains(2);
    let (mut draws, _) = fit(&m, &cfg).unwrap();
    for c in draws.iter_mut() {
        let (x, y, l) = (c.draws[0].clone(), c.constrained[0].clone(), c.loglik[0].clone());
        c.draws.iter_mut().for_each(|r| *r = x.clone());
        c.constrained.iter_mut().for_each(|r| *r = y.clone());
        c.loglik.iter_mut().for_each(|r| *r = l.clone());
    }
    let value = draws[0].constrained[0][0];
    for c in draws.iter_mut() {
        c.constrained.iter_mut().for_each(|r| r[0] = value);
    }
    let s = summarize(&draws, &m, &cfg).unwrap();
    let p = &s.parameters[0];
    assert_eq!(p.mean, value);
    assert_eq!(p.q025, p.q975);
    assert_eq!(p.n_eff, None);
}

#[test]
fn independence_fit_matches_beta_binomial_quadrature() {
    check_independence_oracle().unwrap();
}
