//! Maximum-likelihood updating of mixture likelihood weights.
//!
//! For an additive mixture node observed over two consecutive periods the
//! likelihood of the observed outcomes is a quadratic in `alpha`:
//!
//! ```text
//! L(alpha) = (R_{t-1} + alpha * d_{t-1}) * (R_t + alpha * d_t)
//!          = a alpha^2 + b alpha + c
//! ```
//!
//! where `R_i` is the lagged table's probability of the observed outcome and
//! `d_i = Q_i - R_i`. Longer windows and the multiplicative form fall back
//! to a grid search refined by golden-section search; both likelihoods are
//! log-concave in `alpha`, so the refinement cannot get stuck.

use alloc::vec::Vec;

use crate::dnm::{mixture_eval, CompiledDnm, Decomposition};
use crate::engine::ObservationHistory;
use crate::network::Distribution;
use crate::{Error, Result};

/// Likelihood values closer than this are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-14;

/// Points in the coarse grid of the numeric maximizer.
pub const GRID_POINTS: usize = 1001;

/// Bracket width at which golden-section refinement stops.
pub const GOLDEN_TOLERANCE: f64 = 1e-6;

/// Difference between the contemporaneous and lagged predictions of the
/// observed outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaTerm {
    pub value: f64,
}

pub fn delta_term(q_prob_of_observed: f64, r_prob_of_observed: f64) -> DeltaTerm {
    DeltaTerm { value: q_prob_of_observed - r_prob_of_observed }
}

/// Probabilities that `Q` and `R` assigned to the outcome observed in one period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodTerm {
    pub q: f64,
    pub r: f64,
}

impl PeriodTerm {
    pub fn delta(&self) -> DeltaTerm {
        delta_term(self.q, self.r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticLikelihood {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadraticLikelihood {
    pub fn eval(&self, alpha: f64) -> f64 {
        (self.a * alpha + self.b) * alpha + self.c
    }
}

/// Coefficients of the two-period likelihood.
pub fn likelihood_coefficients(current: PeriodTerm, previous: PeriodTerm) -> QuadraticLikelihood {
    let dt = current.delta().value;
    let dp = previous.delta().value;
    QuadraticLikelihood {
        a: dt * dp,
        b: dt * previous.r + dp * current.r,
        c: previous.r * current.r,
    }
}

/// Location of the parabola's vertex, `-b / 2a`.
pub fn alpha_extremum(quad: &QuadraticLikelihood) -> Result<f64> {
    if quad.a == 0.0 {
        return Err(Error::NoExtremum);
    }
    Ok(-quad.b / (2.0 * quad.a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaximizationBranch {
    /// Concave parabola with its vertex inside (0, 1).
    InteriorExtremum,
    /// The maximum sits on 0 or 1.
    Boundary,
    /// Likelihood does not depend on alpha; previous weight kept.
    Flat,
    /// Grid search plus golden-section refinement.
    Numeric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightEstimate {
    pub alpha_star: f64,
    /// Vertex of the quadratic likelihood, when it has one.
    pub alpha_m: Option<f64>,
    pub branch: MaximizationBranch,
    /// First and last period of the observations used.
    pub window: Option<(usize, usize)>,
}

/// Picks the best candidate, preferring `previous` on ties and otherwise the
/// smallest alpha.
fn select(candidates: &mut [f64], previous: f64, likelihood: impl Fn(f64) -> f64) -> f64 {
    candidates.sort_by(f64::total_cmp);
    let best = candidates
        .iter()
        .map(|&a| likelihood(a))
        .fold(f64::NEG_INFINITY, f64::max);
    if (0.0..=1.0).contains(&previous) && likelihood(previous) >= best - TIE_TOLERANCE {
        return previous;
    }
    *candidates
        .iter()
        .find(|&&a| likelihood(a) >= best - TIE_TOLERANCE)
        .expect("non-empty candidate list")
}

/// Exact argmax of a quadratic likelihood over [0, 1].
pub fn maximize_quadratic_on_unit(quad: &QuadraticLikelihood, previous_alpha: f64) -> WeightEstimate {
    let alpha_m = alpha_extremum(quad).ok();
    if quad.a == 0.0 && quad.b == 0.0 {
        return WeightEstimate {
            alpha_star: previous_alpha.clamp(0.0, 1.0),
            alpha_m,
            branch: MaximizationBranch::Flat,
            window: None,
        };
    }
    let mut candidates = alloc::vec![0.0, 1.0];
    let interior = alpha_m.filter(|&m| quad.a < 0.0 && m > 0.0 && m < 1.0);
    if let Some(m) = interior {
        candidates.push(m);
    }
    let alpha_star = select(&mut candidates, previous_alpha, |a| quad.eval(a));
    let branch = if interior == Some(alpha_star) {
        MaximizationBranch::InteriorExtremum
    } else {
        MaximizationBranch::Boundary
    };
    WeightEstimate { alpha_star, alpha_m, branch, window: None }
}

/// One period of a node's estimation window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPeriod {
    pub t: usize,
    pub observed: usize,
    pub q_row: Distribution,
    pub r_row: Distribution,
}

impl WindowPeriod {
    pub fn term(&self) -> PeriodTerm {
        PeriodTerm { q: self.q_row.get(self.observed), r: self.r_row.get(self.observed) }
    }
}

/// Likelihood of the window's observed outcomes at `alpha`.
pub fn window_likelihood(decomposition: Decomposition, periods: &[WindowPeriod], alpha: f64) -> f64 {
    periods
        .iter()
        .map(|p| match mixture_eval(decomposition, &p.q_row, &p.r_row, alpha) {
            Ok(m) => m.distribution.get(p.observed),
            Err(_) => 0.0,
        })
        .product()
}

fn window_log_likelihood(decomposition: Decomposition, periods: &[WindowPeriod], alpha: f64) -> f64 {
    periods
        .iter()
        .map(|p| match mixture_eval(decomposition, &p.q_row, &p.r_row, alpha) {
            Ok(m) => libm::log(m.distribution.get(p.observed)),
            Err(_) => f64::NEG_INFINITY,
        })
        .sum()
}

/// Numeric argmax over [0, 1]: a uniform grid, then golden-section search
/// inside the bracket around the best grid point.
pub fn maximize_numeric(
    decomposition: Decomposition,
    periods: &[WindowPeriod],
    previous_alpha: f64,
) -> WeightEstimate {
    let ll = |a: f64| window_log_likelihood(decomposition, periods, a);
    let step = 1.0 / (GRID_POINTS - 1) as f64;
    let (mut best_i, mut best_v) = (0, f64::NEG_INFINITY);
    for i in 0..GRID_POINTS {
        let v = ll(i as f64 * step);
        if v > best_v {
            best_i = i;
            best_v = v;
        }
    }
    let mut lo = (best_i.saturating_sub(1)) as f64 * step;
    let mut hi = ((best_i + 1).min(GRID_POINTS - 1)) as f64 * step;
    let ratio = (libm::sqrt(5.0) - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (ll(x1), ll(x2));
    while hi - lo > GOLDEN_TOLERANCE {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = ll(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = ll(x2);
        }
    }
    let refined = 0.5 * (lo + hi);
    let mut candidates = alloc::vec![best_i as f64 * step, refined];
    let likelihood = |a: f64| window_likelihood(decomposition, periods, a);
    let alpha_star = select(&mut candidates, previous_alpha, likelihood);
    let flat = likelihood(0.0) == likelihood(1.0) && likelihood(refined) == likelihood(0.0);
    WeightEstimate {
        alpha_star,
        alpha_m: None,
        branch: if flat { MaximizationBranch::Flat } else { MaximizationBranch::Numeric },
        window: periods.first().zip(periods.last()).map(|(f, l)| (f.t, l.t)),
    }
}

/// Collects the observed outcome and the `Q`/`R` rows for periods
/// `t + 1 - window ..= t`.
pub fn window_periods(
    model: &CompiledDnm,
    history: &ObservationHistory,
    node: usize,
    t: usize,
    window: usize,
) -> Result<Vec<WindowPeriod>> {
    let mixture = model
        .mixture(node)
        .ok_or(Error::InvalidArgument("node has no mixture CPD"))?;
    if window == 0 {
        return Err(Error::InvalidArgument("estimation window must be at least 1"));
    }
    let required = model.max_lag() + window;
    if t + 1 < required {
        return Err(Error::SeriesTooShort { len: t + 1, required });
    }
    let incomplete = |period| Error::IncompleteWindow {
        node: model.variable(node).name().into(),
        period,
    };
    let mut out = Vec::with_capacity(window);
    for i in (t + 1 - window)..=t {
        let observed = history.get(i, node).ok_or_else(|| incomplete(i))?;
        let q_states = mixture
            .q_parents()
            .iter()
            .map(|&p| history.get(i, p).ok_or_else(|| incomplete(i)))
            .collect::<Result<Vec<_>>>()?;
        let r_states = mixture
            .r_parents()
            .iter()
            .map(|&(p, lag)| history.get(i - lag, p).ok_or_else(|| incomplete(i)))
            .collect::<Result<Vec<_>>>()?;
        out.push(WindowPeriod {
            t: i,
            observed,
            q_row: mixture.q_row(&q_states).clone(),
            r_row: mixture.r_row(&r_states).clone(),
        });
    }
    Ok(out)
}

/// Maximum-likelihood weight for `node` from the `window` periods ending at `t`.
pub fn mle_alpha_window(
    model: &CompiledDnm,
    history: &ObservationHistory,
    node: usize,
    t: usize,
    window: usize,
    previous_alpha: f64,
) -> Result<WeightEstimate> {
    let periods = window_periods(model, history, node, t, window)?;
    let decomposition = model.mixture(node).expect("checked above").decomposition();
    let mut estimate = match (decomposition, periods.as_slice()) {
        (Decomposition::Additive, [only]) => {
            // linear in alpha with slope d_t
            let term = only.term();
            let quad = QuadraticLikelihood { a: 0.0, b: term.delta().value, c: term.r };
            maximize_quadratic_on_unit(&quad, previous_alpha)
        }
        (Decomposition::Additive, [previous, current]) => {
            let quad = likelihood_coefficients(current.term(), previous.term());
            maximize_quadratic_on_unit(&quad, previous_alpha)
        }
        _ => maximize_numeric(decomposition, &periods, previous_alpha),
    };
    estimate.window = Some((t + 1 - window, t));
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn term(q: f64, r: f64) -> PeriodTerm {
        PeriodTerm { q, r }
    }

    // Observed supply lookups along the reference series:
    //   t=1,2: s=L, Q[L|H,H]=0.45, R[L|H,L]=0.60
    //   t=3:   s=H, Q[H|L,H]=0.60, R[H|H,L]=0.40
    //   t=4:   s=H, Q[H|L,H]=0.60, R[H|H,H]=0.90

    #[test]
    fn delta_examples() {
        assert!((delta_term(0.60, 0.90).value + 0.30).abs() < 1e-15);
        assert!((delta_term(0.60, 0.40).value - 0.20).abs() < 1e-15);
        assert_eq!(delta_term(0.37, 0.37).value, 0.0);
    }

    #[test]
    fn coefficients_at_t4() {
        let q = likelihood_coefficients(term(0.60, 0.90), term(0.60, 0.40));
        assert!((q.a + 0.06).abs() < 1e-12);
        assert!((q.b - 0.06).abs() < 1e-12);
        assert!((q.c - 0.36).abs() < 1e-12);
        assert!((alpha_extremum(&q).unwrap() - 0.5).abs() < 1e-9);
        let est = maximize_quadratic_on_unit(&q, 0.0);
        assert!((est.alpha_star - 0.5).abs() < 1e-9);
        assert_eq!(est.branch, MaximizationBranch::InteriorExtremum);
    }

    #[test]
    fn coefficients_at_t2() {
        let q = likelihood_coefficients(term(0.45, 0.60), term(0.45, 0.60));
        assert!((q.a - 0.0225).abs() < 1e-12);
        assert!((q.b + 0.18).abs() < 1e-12);
        assert!((q.c - 0.36).abs() < 1e-12);
        assert!((alpha_extremum(&q).unwrap() - 4.0).abs() < 1e-9);
        assert!((q.eval(1.0) - 0.2025).abs() < 1e-12);
        let est = maximize_quadratic_on_unit(&q, 0.0);
        assert_eq!(est.alpha_star, 0.0);
        assert_eq!(est.branch, MaximizationBranch::Boundary);
    }

    #[test]
    fn t3_maximum_at_one() {
        let q = likelihood_coefficients(term(0.60, 0.40), term(0.45, 0.60));
        assert!((q.a + 0.03).abs() < 1e-12);
        assert!((alpha_extremum(&q).unwrap() - 1.0).abs() < 1e-9);
        assert!((maximize_quadratic_on_unit(&q, 0.0).alpha_star - 1.0).abs() < 1e-9);
    }

    #[test]
    fn uninformative_window() {
        let q = likelihood_coefficients(term(0.3, 0.3), term(0.8, 0.8));
        assert_eq!((q.a, q.b), (0.0, 0.0));
        assert_eq!(alpha_extremum(&q), Err(Error::NoExtremum));
        let est = maximize_quadratic_on_unit(&q, 0.5);
        assert_eq!(est.alpha_star, 0.5);
        assert_eq!(est.branch, MaximizationBranch::Flat);
    }

    #[test]
    fn linear_slope_picks_endpoint() {
        // single period t=1: d = 0.45 - 0.60 < 0
        let quad = QuadraticLikelihood { a: 0.0, b: -0.15, c: 0.60 };
        assert_eq!(maximize_quadratic_on_unit(&quad, 0.5).alpha_star, 0.0);
        let quad = QuadraticLikelihood { a: 0.0, b: 0.2, c: 0.40 };
        assert_eq!(maximize_quadratic_on_unit(&quad, 0.5).alpha_star, 1.0);
    }

    #[test]
    fn endpoint_tie_keeps_previous_or_smaller() {
        // L(0) = L(1) with a convex parabola
        let quad = QuadraticLikelihood { a: 0.04, b: -0.04, c: 0.2 };
        assert_eq!(maximize_quadratic_on_unit(&quad, 1.0).alpha_star, 1.0);
        assert_eq!(maximize_quadratic_on_unit(&quad, 0.5).alpha_star, 0.0);
    }

    #[test]
    fn numeric_matches_closed_form_at_t4() {
        let d = |p: f64| Distribution::binary(p).unwrap();
        let periods = [
            WindowPeriod { t: 3, observed: 0, q_row: d(0.60), r_row: d(0.40) },
            WindowPeriod { t: 4, observed: 0, q_row: d(0.60), r_row: d(0.90) },
        ];
        let est = maximize_numeric(Decomposition::Additive, &periods, 0.0);
        assert!((est.alpha_star - 0.5).abs() < 1e-6);
        assert_eq!(est.window, Some((3, 4)));
    }
}
