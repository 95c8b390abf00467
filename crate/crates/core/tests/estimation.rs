mod common;

use common::{random_distribution, rng};
use dnm_core::dnm::{mixture_eval, mixture_eval_additive, mixture_eval_multiplicative, Decomposition};
use dnm_core::estimation::{
    alpha_extremum, likelihood_coefficients, maximize_numeric, maximize_quadratic_on_unit,
    window_likelihood, MaximizationBranch, PeriodTerm, WindowPeriod,
};
use dnm_core::network::Distribution;
use dnm_core::Error;
use proptest::prelude::*;
use rand::Rng;

fn binary(p: f64) -> Distribution {
    Distribution::binary(p).unwrap()
}

fn period(t: usize, observed: usize, q: f64, r: f64) -> WindowPeriod {
    WindowPeriod { t, observed, q_row: binary(q), r_row: binary(r) }
}

fn grid_max(decomposition: Decomposition, periods: &[WindowPeriod]) -> f64 {
    (0..=10_000)
        .map(|i| window_likelihood(decomposition, periods, i as f64 * 1e-4))
        .fold(f64::NEG_INFINITY, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]
    #[test]
    fn closed_form_dominates_grid(q1 in 0.0..=1.0f64, r1 in 0.0..=1.0f64, q2 in 0.0..=1.0f64, r2 in 0.0..=1.0f64, prev in 0.0..=1.0f64) {
        let quad = likelihood_coefficients(PeriodTerm { q: q2, r: r2 }, PeriodTerm { q: q1, r: r1 });
        let est = maximize_quadratic_on_unit(&quad, prev);
        prop_assert!((0.0..=1.0).contains(&est.alpha_star));
        let periods = [period(1, 0, q1, r1), period(2, 0, q2, r2)];
        let at_star = window_likelihood(Decomposition::Additive, &periods, est.alpha_star);
        prop_assert!(at_star >= grid_max(Decomposition::Additive, &periods) - 1e-12);
        prop_assert!((quad.eval(est.alpha_star) - at_star).abs() < 1e-12);
    }

    #[test]
    fn closed_form_agrees_with_numeric(q1 in 0.01..=0.99f64, r1 in 0.01..=0.99f64, q2 in 0.01..=0.99f64, r2 in 0.01..=0.99f64) {
        let periods = [period(1, 0, q1, r1), period(2, 0, q2, r2)];
        let quad = likelihood_coefficients(periods[1].term(), periods[0].term());
        let closed = maximize_quadratic_on_unit(&quad, 0.5);
        let numeric = maximize_numeric(Decomposition::Additive, &periods, 0.5);
        let lc = quad.eval(closed.alpha_star);
        let ln = quad.eval(numeric.alpha_star);
        prop_assert!(lc >= ln - 1e-12);
        prop_assert!(lc - ln < 1e-9);
    }

    #[test]
    fn window_order_does_not_matter(q1 in 0.0..=1.0f64, r1 in 0.0..=1.0f64, q2 in 0.0..=1.0f64, r2 in 0.0..=1.0f64) {
        let a = likelihood_coefficients(PeriodTerm { q: q2, r: r2 }, PeriodTerm { q: q1, r: r1 });
        let b = likelihood_coefficients(PeriodTerm { q: q1, r: r1 }, PeriodTerm { q: q2, r: r2 });
        prop_assert_eq!(a, b);
        let ea = maximize_quadratic_on_unit(&a, 0.3);
        let eb = maximize_quadratic_on_unit(&b, 0.3);
        prop_assert_eq!(ea.alpha_star, eb.alpha_star);
    }

    #[test]
    fn multiplicative_numeric_dominates_grid(seed in any::<u64>(), prev in 0.0..=1.0f64) {
        let mut r = rng(seed);
        let len = r.random_range(1..=5);
        let periods: Vec<WindowPeriod> = (0..len)
            .map(|t| WindowPeriod {
                t,
                observed: r.random_range(0..3),
                q_row: random_distribution(&mut r, 3),
                r_row: random_distribution(&mut r, 3),
            })
            .collect();
        for decomposition in [Decomposition::Additive, Decomposition::Multiplicative] {
            let est = maximize_numeric(decomposition, &periods, prev);
            let at_star = window_likelihood(decomposition, &periods, est.alpha_star);
            prop_assert!(at_star >= grid_max(decomposition, &periods) * (1.0 - 1e-9) - 1e-12);
        }
    }

    #[test]
    fn additive_stays_in_envelope(seed in any::<u64>(), alpha in 0.0..=1.0f64) {
        let mut r = rng(seed);
        let q = random_distribution(&mut r, 3);
        let rr = random_distribution(&mut r, 3);
        let m = mixture_eval_additive(&q, &rr, alpha).unwrap().distribution;
        for i in 0..3 {
            let (lo, hi) = (q.get(i).min(rr.get(i)), q.get(i).max(rr.get(i)));
            prop_assert!(m.get(i) >= lo && m.get(i) <= hi);
            let linear = alpha * q.get(i) + (1.0 - alpha) * rr.get(i);
            prop_assert!((m.get(i) - linear).abs() < 1e-12);
        }
    }

    #[test]
    fn multiplicative_log_odds_are_linear(q in 0.001..0.999f64, r in 0.001..0.999f64, alpha in 0.0..=1.0f64) {
        let m = mixture_eval_multiplicative(&binary(q), &binary(r), alpha).unwrap().distribution;
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let expected = alpha * logit(q) + (1.0 - alpha) * logit(r);
        prop_assert!((logit(m.get(0)) - expected).abs() < 1e-9);
    }

    #[test]
    fn endpoints_return_components(seed in any::<u64>()) {
        let mut r = rng(seed);
        let q = random_distribution(&mut r, 4);
        let rr = random_distribution(&mut r, 4);
        for d in [Decomposition::Additive, Decomposition::Multiplicative] {
            prop_assert_eq!(&mixture_eval(d, &q, &rr, 1.0).unwrap().distribution, &q);
            prop_assert_eq!(&mixture_eval(d, &q, &rr, 0.0).unwrap().distribution, &rr);
        }
    }
}

#[test]
fn sign_of_leading_coefficient_selects_branch() {
    // concave: interior maximum
    let quad = likelihood_coefficients(PeriodTerm { q: 0.9, r: 0.1 }, PeriodTerm { q: 0.1, r: 0.9 });
    assert!(quad.a < 0.0);
    let est = maximize_quadratic_on_unit(&quad, 0.0);
    assert_eq!(est.branch, MaximizationBranch::InteriorExtremum);
    assert!((est.alpha_star - 0.5).abs() < 1e-12);
    // convex: a boundary wins
    let quad = likelihood_coefficients(PeriodTerm { q: 0.9, r: 0.1 }, PeriodTerm { q: 0.8, r: 0.3 });
    assert!(quad.a > 0.0);
    let est = maximize_quadratic_on_unit(&quad, 0.5);
    assert_eq!(est.branch, MaximizationBranch::Boundary);
    assert_eq!(est.alpha_star, 1.0);
    // identical tables: flat, previous weight kept
    let quad = likelihood_coefficients(PeriodTerm { q: 0.4, r: 0.4 }, PeriodTerm { q: 0.7, r: 0.7 });
    assert_eq!(alpha_extremum(&quad), Err(Error::NoExtremum));
    let est = maximize_quadratic_on_unit(&quad, 0.37);
    assert_eq!(est.branch, MaximizationBranch::Flat);
    assert_eq!(est.alpha_star, 0.37);
}

#[test]
fn degenerate_multiplicative_mixture_is_an_error() {
    let q = Distribution::new(vec![1.0, 0.0]).unwrap();
    let r = Distribution::new(vec![0.0, 1.0]).unwrap();
    assert_eq!(mixture_eval_multiplicative(&q, &r, 0.5), Err(Error::DegenerateMixture));
    assert!(mixture_eval_additive(&q, &r, 1.5).is_err());
}
