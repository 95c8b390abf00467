#![allow(dead_code)]

use std::collections::BTreeMap;

use dnm_core::dnm::{
    ConditionalTable, Decomposition, DnmSpec, InitialProvision, LaggedArc, MixtureCpd, NodeCpd,
    ParentRef, SliceTemplate,
};
use dnm_core::engine::ObservationHistory;
use dnm_core::network::{Distribution, Variable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly positive random distribution.
pub fn random_distribution(rng: &mut ChaCha8Rng, cardinality: usize) -> Distribution {
    let raw: Vec<f64> = (0..cardinality).map(|_| 0.05 + rng.random::<f64>()).collect();
    let sum: f64 = raw.iter().sum();
    Distribution::new(raw.into_iter().map(|x| x / sum).collect()).unwrap()
}

fn rows(rng: &mut ChaCha8Rng, count: usize, cardinality: usize) -> Vec<Distribution> {
    (0..count).map(|_| random_distribution(rng, cardinality)).collect()
}

/// A small random DNM: 2-4 variables of cardinality 2-3, lags up to 2, and
/// at least one mixture node.
pub fn random_dnm(rng: &mut ChaCha8Rng) -> DnmSpec {
    let n = rng.random_range(2..=4);
    let variables: Vec<Variable> = (0..n)
        .map(|i| {
            let card = rng.random_range(2..=3);
            Variable::new(format!("x{i}"), (0..card).map(|s| format!("s{s}")))
        })
        .collect();
    let card = |i: usize| variables[i].cardinality();
    let mut contemporaneous = Vec::new();
    let mut current_parents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for j in 0..n {
        for i in 0..j {
            if rng.random::<f64>() < 0.4 {
                contemporaneous.push((format!("x{i}"), format!("x{j}")));
                current_parents[j].push(i);
            }
        }
    }
    let mut lagged: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut lagged_arcs = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if rng.random::<f64>() < 0.3 {
                let lag = rng.random_range(1..=2);
                lagged_arcs.push(LaggedArc::new(format!("x{i}"), lag, format!("x{j}")));
                lagged[j].push((i, lag));
            }
        }
    }
    // guarantee one mixture node
    let mixer = rng.random_range(0..n);
    if lagged[mixer].is_empty() {
        let src = rng.random_range(0..n);
        lagged_arcs.push(LaggedArc::new(format!("x{src}"), 1, format!("x{mixer}")));
        lagged[mixer].push((src, 1));
    }
    let mut cpds = Vec::new();
    let mut initial_slices = BTreeMap::new();
    for j in 0..n {
        let name = format!("x{j}");
        let q_count: usize = current_parents[j].iter().map(|&p| card(p)).product();
        let r_count: usize = lagged[j].iter().map(|&(p, _)| card(p)).product();
        if j == mixer {
            let decomposition =
                if rng.random::<bool>() { Decomposition::Additive } else { Decomposition::Multiplicative };
            cpds.push(NodeCpd::Mixture(MixtureCpd {
                target: name.clone(),
                q_parents: current_parents[j].iter().map(|p| format!("x{p}")).collect(),
                q_rows: rows(rng, q_count, card(j)),
                r_parents: lagged[j].iter().map(|&(p, l)| ParentRef::lagged(format!("x{p}"), l)).collect(),
                r_rows: rows(rng, r_count, card(j)),
                decomposition,
                alpha: rng.random::<f64>(),
            }));
        } else {
            let parents: Vec<ParentRef> = current_parents[j]
                .iter()
                .map(|p| ParentRef::current(format!("x{p}")))
                .chain(lagged[j].iter().map(|&(p, l)| ParentRef::lagged(format!("x{p}"), l)))
                .collect();
            cpds.push(NodeCpd::Tabular(ConditionalTable {
                target: name.clone(),
                parents,
                rows: rows(rng, q_count * r_count, card(j)),
            }));
        }
        if !lagged[j].is_empty() {
            let provision = if rng.random::<f64>() < 0.3 {
                InitialProvision::Observed
            } else {
                InitialProvision::Table {
                    parents: current_parents[j].iter().map(|p| format!("x{p}")).collect(),
                    rows: rows(rng, q_count, card(j)),
                }
            };
            initial_slices.insert(name, provision);
        }
    }
    DnmSpec {
        template: SliceTemplate { variables, contemporaneous_arcs: contemporaneous },
        lagged_arcs,
        cpds,
        initial_slices,
    }
}

/// Random observations over `periods` slices, each cell observed with
/// probability `p_observed`. Variables listed in `required` are always
/// observed in slices before `max_lag`.
pub fn random_history(
    rng: &mut ChaCha8Rng,
    spec: &DnmSpec,
    periods: usize,
    p_observed: f64,
    max_lag: usize,
) -> ObservationHistory {
    let vars = &spec.template.variables;
    let mut h = ObservationHistory::new(vars.clone());
    for t in 0..periods {
        let row: Vec<Option<usize>> = vars
            .iter()
            .map(|v| {
                let required = t < max_lag
                    && matches!(spec.initial_slices.get(v.name()), Some(InitialProvision::Observed));
                (required || rng.random::<f64>() < p_observed)
                    .then(|| rng.random_range(0..v.cardinality()))
            })
            .collect();
        h.insert(t, &row).unwrap();
    }
    h
}
