//! The CARSALES model: U.S. car supply in Japan driven by demand `d`,
//! industry health `h`, price `p` and supply `s`, all binary (`H`/`L`).
//!
//! Supply is an additive mixture of a contemporaneous table over `(d, h)`
//! and a lagged table over last period's `(p, s)`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::dnm::{
    ConditionalTable, Decomposition, DnmSpec, InitialProvision, LaggedArc, MixtureCpd, NodeCpd,
    ParentRef, SliceTemplate,
};
use crate::engine::ObservationHistory;
use crate::network::{Distribution, Variable};

/// Variable order used by the model and the reference series.
pub const VARIABLES: [&str; 4] = ["d", "h", "p", "s"];

/// Twelve observed periods `t = 0..=11`, columns in [`VARIABLES`] order.
pub const REFERENCE_SERIES: [[&str; 4]; 12] = [
    ["H", "H", "H", "L"],
    ["H", "H", "H", "L"],
    ["H", "H", "H", "L"],
    ["L", "H", "H", "H"],
    ["L", "H", "H", "H"],
    ["L", "H", "H", "H"],
    ["L", "H", "L", "H"],
    ["L", "H", "L", "H"],
    ["L", "H", "L", "H"],
    ["L", "L", "L", "L"],
    ["L", "L", "L", "L"],
    ["L", "L", "L", "L"],
];

/// Maximum-likelihood weights of the reference series for `t = 1..=11`.
pub const REFERENCE_ALPHA_STAR: [f64; 11] = [0.0, 0.0, 1.0, 0.5, 0.0, 0.0, 0.5, 1.0, 1.0, 0.0, 0.0];

/// Reference `Pr[s_{t+1} = H | observations through t]` for `t = 1..=11`,
/// rounded to two decimals.
pub const REFERENCE_SUPPLY_FORECAST: [f64; 11] =
    [0.40, 0.40, 0.56, 0.73, 0.90, 0.90, 0.48, 0.56, 0.56, 0.10, 0.10];

/// `[p, 1 - p]` with the complement rounded to twelve decimals, so the
/// table holds the same short decimals it is written with.
fn b(p: f64) -> Distribution {
    let complement = libm::round((1.0 - p) * 1e12) / 1e12;
    Distribution::new(vec![p, complement]).expect("valid binary probability")
}

fn variables() -> Vec<Variable> {
    VARIABLES.iter().map(|n| Variable::binary(*n)).collect()
}

fn tabular(target: &str, parents: &[&str], high: &[f64]) -> NodeCpd {
    NodeCpd::Tabular(ConditionalTable {
        target: target.into(),
        parents: parents.iter().map(|p| ParentRef::current(*p)).collect(),
        rows: high.iter().map(|&p| b(p)).collect(),
    })
}

fn contemporaneous_arcs() -> Vec<(alloc::string::String, alloc::string::String)> {
    [("h", "p"), ("p", "d"), ("d", "s"), ("h", "s")]
        .iter()
        .map(|(a, c)| ((*a).into(), (*c).into()))
        .collect()
}

/// `Q[s = H | d, h]` rows in order HH, HL, LH, LL.
pub const Q_SUPPLY_HIGH: [f64; 4] = [0.55, 0.25, 0.60, 0.55];

/// `R[s = H | p_{t-1}, s_{t-1}]` rows in order HH, HL, LH, LL.
pub const R_SUPPLY_HIGH: [f64; 4] = [0.90, 0.40, 0.40, 0.10];

/// The CARSALES DNM with initial weight 0.5.
pub fn build_carsales() -> DnmSpec {
    let mut initial_slices = BTreeMap::new();
    initial_slices.insert("s".into(), InitialProvision::Observed);
    DnmSpec {
        template: SliceTemplate { variables: variables(), contemporaneous_arcs: contemporaneous_arcs() },
        lagged_arcs: vec![LaggedArc::new("p", 1, "s"), LaggedArc::new("s", 1, "s")],
        cpds: vec![
            tabular("d", &["p"], &[0.25, 0.65]),
            tabular("h", &[], &[0.85]),
            tabular("p", &["h"], &[0.35, 0.80]),
            NodeCpd::Mixture(MixtureCpd {
                target: "s".into(),
                q_parents: vec!["d".into(), "h".into()],
                q_rows: Q_SUPPLY_HIGH.iter().map(|&p| b(p)).collect(),
                r_parents: vec![ParentRef::lagged("p", 1), ParentRef::lagged("s", 1)],
                r_rows: R_SUPPLY_HIGH.iter().map(|&p| b(p)).collect(),
                decomposition: Decomposition::Additive,
                alpha: 0.5,
            }),
        ],
        initial_slices,
    }
}

/// The CARSALES slice with supply driven by `Q` alone and no lagged arcs.
pub fn static_slice_spec() -> DnmSpec {
    DnmSpec {
        template: SliceTemplate { variables: variables(), contemporaneous_arcs: contemporaneous_arcs() },
        lagged_arcs: Vec::new(),
        cpds: vec![
            tabular("d", &["p"], &[0.25, 0.65]),
            tabular("h", &[], &[0.85]),
            tabular("p", &["h"], &[0.35, 0.80]),
            tabular("s", &["d", "h"], &Q_SUPPLY_HIGH),
        ],
        initial_slices: BTreeMap::new(),
    }
}

/// [`REFERENCE_SERIES`] as an observation history.
pub fn reference_history() -> ObservationHistory {
    let mut h = ObservationHistory::new(variables());
    for (t, row) in REFERENCE_SERIES.iter().enumerate() {
        let labels = VARIABLES.iter().copied().zip(row.iter().copied());
        let row = h.row_from_labels(labels).expect("valid labels");
        h.insert(t, &row).expect("fresh slice");
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnm::compile;

    #[test]
    fn table_lookups() {
        let m = compile(&build_carsales()).unwrap();
        let s = m.index_of("s").unwrap();
        let mix = m.mixture(s).unwrap();
        // Q[s=H | d=L, h=H]
        assert_eq!(mix.q_row(&[1, 0]).get(0), 0.60);
        // R[s=H | p=L, s=L]
        assert_eq!(mix.r_row(&[1, 1]).get(0), 0.10);
    }

    #[test]
    fn demand_given_low_price() {
        let spec = build_carsales();
        let NodeCpd::Tabular(d) = &spec.cpds[0] else { panic!() };
        assert_eq!(d.target, "d");
        assert_eq!(d.rows[1].get(0), 0.65);
    }

    #[test]
    fn reference_history_row_three() {
        let h = reference_history();
        assert_eq!(h.len(), 12);
        assert_eq!(h.slice(3).unwrap(), &[Some(1), Some(0), Some(0), Some(0)]);
    }
}
