//! Temporal model layer: slice templates, lagged arcs, mixture CPDs,
//! unrolling to a ground network, and scrolling.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::engine::ObservationHistory;
use crate::factor::Factor;
use crate::network::{
    BeliefNetwork, Distribution, NetworkStructure, StructureViolation, Variable,
};
use crate::{Error, Result};

/// Reference to a parent `lag` slices back (0 = same slice).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParentRef {
    pub variable: String,
    pub lag: usize,
}

impl ParentRef {
    pub fn current(variable: impl Into<String>) -> Self {
        ParentRef { variable: variable.into(), lag: 0 }
    }

    pub fn lagged(variable: impl Into<String>, lag: usize) -> Self {
        ParentRef { variable: variable.into(), lag }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SliceTemplate {
    pub variables: Vec<Variable>,
    /// `(source, target)` arcs inside one slice.
    pub contemporaneous_arcs: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaggedArc {
    pub source: String,
    pub lag: usize,
    pub target: String,
}

impl LaggedArc {
    pub fn new(source: impl Into<String>, lag: usize, target: impl Into<String>) -> Self {
        LaggedArc { source: source.into(), lag, target: target.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decomposition {
    /// `alpha * Q + (1 - alpha) * R`
    Additive,
    /// `N * Q^alpha * R^(1 - alpha)`
    Multiplicative,
}

/// Table over an ordered parent list; rows in mixed-radix order with the
/// first parent most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTable {
    pub target: String,
    pub parents: Vec<ParentRef>,
    pub rows: Vec<Distribution>,
}

/// Likelihood-weighted blend of a contemporaneous table `Q` and a lagged
/// table `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureCpd {
    pub target: String,
    pub q_parents: Vec<String>,
    pub q_rows: Vec<Distribution>,
    pub r_parents: Vec<ParentRef>,
    pub r_rows: Vec<Distribution>,
    pub decomposition: Decomposition,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeCpd {
    Tabular(ConditionalTable),
    Mixture(MixtureCpd),
}

impl NodeCpd {
    pub fn target(&self) -> &str {
        match self {
            NodeCpd::Tabular(t) => &t.target,
            NodeCpd::Mixture(m) => &m.target,
        }
    }
}

/// How a variable with lagged parents is specified in slices `0..max_lag`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialProvision {
    /// The variable must be observed there.
    Observed,
    /// Table over contemporaneous parents only.
    Table { parents: Vec<String>, rows: Vec<Distribution> },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DnmSpec {
    pub template: SliceTemplate,
    pub lagged_arcs: Vec<LaggedArc>,
    pub cpds: Vec<NodeCpd>,
    pub initial_slices: BTreeMap<String, InitialProvision>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpecViolation {
    Structure(StructureViolation),
    UnknownArcEndpoint { source: String, target: String },
    ZeroLag { source: String, target: String },
    DuplicateCpd(String),
    MissingCpd(String),
    CpdForUnknown(String),
    UndeclaredParent { target: String, parent: String, lag: usize },
    DuplicateParent { target: String, parent: String, lag: usize },
    /// A mixture Q parent that is lagged or an R parent that is not.
    MisplacedParent { target: String, parent: String, lag: usize },
    RowCount { target: String, table: &'static str, expected: usize, found: usize },
    RowWidth { target: String, table: &'static str, row: usize },
    AlphaOutOfRange { target: String, alpha: String },
    MissingProvision(String),
    ProvisionForUnknown(String),
    ProvisionParent { target: String, parent: String },
}

impl fmt::Display for SpecViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Structure(v) => write!(f, "{v}"),
            Self::UnknownArcEndpoint { source, target } => {
                write!(f, "arc {source} -> {target} names an unknown variable")
            }
            Self::ZeroLag { source, target } => {
                write!(f, "lagged arc {source} -> {target} must have lag >= 1")
            }
            Self::DuplicateCpd(v) => write!(f, "`{v}` has more than one CPD"),
            Self::MissingCpd(v) => write!(f, "`{v}` has no CPD"),
            Self::CpdForUnknown(v) => write!(f, "CPD given for unknown variable `{v}`"),
            Self::UndeclaredParent { target, parent, lag } => {
                write!(f, "CPD of `{target}` uses parent ({parent}, lag {lag}) with no matching arc")
            }
            Self::DuplicateParent { target, parent, lag } => {
                write!(f, "CPD of `{target}` repeats parent ({parent}, lag {lag})")
            }
            Self::MisplacedParent { target, parent, lag } => write!(
                f,
                "mixture `{target}`: parent ({parent}, lag {lag}) belongs in the other table"
            ),
            Self::RowCount { target, table, expected, found } => write!(
                f,
                "{table} table of `{target}` has {found} rows, expected {expected}"
            ),
            Self::RowWidth { target, table, row } => write!(
                f,
                "{table} table of `{target}` row {row} has the wrong number of states"
            ),
            Self::AlphaOutOfRange { target, alpha } => {
                write!(f, "mixture `{target}` has alpha {alpha} outside [0, 1]")
            }
            Self::MissingProvision(v) => {
                write!(f, "`{v}` has lagged parents but no initial-slice provision")
            }
            Self::ProvisionForUnknown(v) => {
                write!(f, "initial-slice provision for unknown variable `{v}`")
            }
            Self::ProvisionParent { target, parent } => write!(
                f,
                "initial table of `{target}` uses `{parent}`, which is not a contemporaneous parent"
            ),
        }
    }
}

/// Distribution produced by mixing one `Q` row with one `R` row.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureEvalResult {
    pub distribution: Distribution,
    /// Multiplicative normalizing constant; 1 for the additive form.
    pub normalizer: f64,
}

fn check_mixture_args(q: &Distribution, r: &Distribution, alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    if q.len() != r.len() {
        return Err(Error::InvalidArgument("Q and R rows differ in length"));
    }
    Ok(())
}

pub fn mixture_eval_additive(
    q: &Distribution,
    r: &Distribution,
    alpha: f64,
) -> Result<MixtureEvalResult> {
    check_mixture_args(q, r, alpha)?;
    let distribution = if alpha == 1.0 {
        q.clone()
    } else if alpha == 0.0 {
        r.clone()
    } else {
        let mixed = q
            .probabilities()
            .iter()
            .zip(r.probabilities())
            .map(|(&qi, &ri)| (alpha * qi + (1.0 - alpha) * ri).clamp(qi.min(ri), qi.max(ri)))
            .collect();
        Distribution::from_normalized(mixed)
    };
    Ok(MixtureEvalResult { distribution, normalizer: 1.0 })
}

/// `x^y` with `0^0 = 1`.
fn pow0(x: f64, y: f64) -> f64 {
    if y == 0.0 {
        1.0
    } else {
        libm::pow(x, y)
    }
}

pub fn mixture_eval_multiplicative(
    q: &Distribution,
    r: &Distribution,
    alpha: f64,
) -> Result<MixtureEvalResult> {
    check_mixture_args(q, r, alpha)?;
    let raw: Vec<f64> = q
        .probabilities()
        .iter()
        .zip(r.probabilities())
        .map(|(&qi, &ri)| pow0(qi, alpha) * pow0(ri, 1.0 - alpha))
        .collect();
    let sum: f64 = raw.iter().sum();
    if sum <= 0.0 {
        return Err(Error::DegenerateMixture);
    }
    let normalizer = 1.0 / sum;
    let distribution = if alpha == 1.0 {
        q.clone()
    } else if alpha == 0.0 {
        r.clone()
    } else {
        Distribution::from_normalized(raw.into_iter().map(|v| v / sum).collect())
    };
    Ok(MixtureEvalResult { distribution, normalizer })
}

pub fn mixture_eval(
    decomposition: Decomposition,
    q: &Distribution,
    r: &Distribution,
    alpha: f64,
) -> Result<MixtureEvalResult> {
    match decomposition {
        Decomposition::Additive => mixture_eval_additive(q, r, alpha),
        Decomposition::Multiplicative => mixture_eval_multiplicative(q, r, alpha),
    }
}

#[derive(Debug, Clone)]
struct MixtureParams {
    q_parents: Vec<usize>,
    q_rows: Vec<Distribution>,
    r_parents: Vec<(usize, usize)>,
    r_rows: Vec<Distribution>,
    decomposition: Decomposition,
    alpha: f64,
}

#[derive(Debug, Clone)]
enum Provision {
    Observed,
    Table { parents: Vec<usize>, rows: Vec<Distribution> },
}

#[derive(Debug, Clone)]
struct CompiledNode {
    /// `(variable, lag)` in table order.
    parents: Vec<(usize, usize)>,
    /// Tabular rows, or the mixture materialized at the current alpha.
    rows: Vec<Distribution>,
    mixture: Option<MixtureParams>,
    provision: Option<Provision>,
}

/// Read-only view of a node's mixture CPD.
#[derive(Debug, Clone, Copy)]
pub struct MixtureView<'a> {
    params: &'a MixtureParams,
    cards: &'a [usize],
}

impl<'a> MixtureView<'a> {
    pub fn q_parents(&self) -> &'a [usize] {
        &self.params.q_parents
    }

    /// `(variable, lag)` pairs.
    pub fn r_parents(&self) -> &'a [(usize, usize)] {
        &self.params.r_parents
    }

    pub fn decomposition(&self) -> Decomposition {
        self.params.decomposition
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    pub fn q_row(&self, parent_states: &[usize]) -> &'a Distribution {
        let idx = row_index(self.params.q_parents.iter().copied(), self.cards, parent_states);
        &self.params.q_rows[idx]
    }

    pub fn r_row(&self, parent_states: &[usize]) -> &'a Distribution {
        let idx = row_index(self.params.r_parents.iter().map(|p| p.0), self.cards, parent_states);
        &self.params.r_rows[idx]
    }
}

fn row_index(parents: impl Iterator<Item = usize>, cards: &[usize], states: &[usize]) -> usize {
    parents
        .zip(states)
        .fold(0, |acc, (p, &s)| acc * cards[p] + s)
}

/// A validated DNM ready for unrolling, scrolling and estimation.
#[derive(Debug, Clone)]
pub struct CompiledDnm {
    variables: Vec<Variable>,
    cards: Vec<usize>,
    index: BTreeMap<String, usize>,
    nodes: Vec<CompiledNode>,
    max_lag: usize,
    /// Variables that are the source of some lagged dependency.
    interface: Vec<usize>,
}

fn product_of(cards: &[usize], vars: impl Iterator<Item = usize>) -> usize {
    vars.map(|v| cards[v]).product()
}

fn materialize(m: &MixtureParams) -> Result<Vec<Distribution>> {
    let mut rows = Vec::with_capacity(m.q_rows.len() * m.r_rows.len());
    for q in &m.q_rows {
        for r in &m.r_rows {
            rows.push(mixture_eval(m.decomposition, q, r, m.alpha)?.distribution);
        }
    }
    Ok(rows)
}

/// Validates a [`DnmSpec`] and prepares it for inference.
pub fn compile(spec: &DnmSpec) -> Result<CompiledDnm> {
    let mut violations = Vec::new();

    // slice template as a static structure
    let mut parents_map: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let names: BTreeSet<&str> = spec.template.variables.iter().map(Variable::name).collect();
    for (a, b) in &spec.template.contemporaneous_arcs {
        if !names.contains(a.as_str()) || !names.contains(b.as_str()) {
            violations.push(SpecViolation::UnknownArcEndpoint { source: a.clone(), target: b.clone() });
            continue;
        }
        parents_map.entry(b.clone()).or_default().push(a.clone());
    }
    let structure = NetworkStructure {
        variables: spec.template.variables.clone(),
        parents: parents_map,
    };
    let report = crate::network::validate_structure(&structure);
    violations.extend(report.violations.into_iter().map(SpecViolation::Structure));

    let variables = spec.template.variables.clone();
    let cards: Vec<usize> = variables.iter().map(Variable::cardinality).collect();
    let index: BTreeMap<String, usize> = variables
        .iter()
        .enumerate()
        .map(|(i, v)| (v.name().to_string(), i))
        .collect();

    let mut declared: BTreeSet<(usize, usize, usize)> = BTreeSet::new(); // (parent, lag, child)
    for (a, b) in &spec.template.contemporaneous_arcs {
        if let (Some(&pa), Some(&pb)) = (index.get(a), index.get(b)) {
            declared.insert((pa, 0, pb));
        }
    }
    let mut max_lag = 0;
    for arc in &spec.lagged_arcs {
        match (index.get(&arc.source), index.get(&arc.target)) {
            (Some(&s), Some(&t)) => {
                if arc.lag == 0 {
                    violations.push(SpecViolation::ZeroLag {
                        source: arc.source.clone(),
                        target: arc.target.clone(),
                    });
                } else {
                    declared.insert((s, arc.lag, t));
                    max_lag = max_lag.max(arc.lag);
                }
            }
            _ => violations.push(SpecViolation::UnknownArcEndpoint {
                source: arc.source.clone(),
                target: arc.target.clone(),
            }),
        }
    }

    let mut cpd_for: BTreeMap<usize, &NodeCpd> = BTreeMap::new();
    for cpd in &spec.cpds {
        match index.get(cpd.target()) {
            None => violations.push(SpecViolation::CpdForUnknown(cpd.target().into())),
            Some(&t) => {
                if cpd_for.insert(t, cpd).is_some() {
                    violations.push(SpecViolation::DuplicateCpd(cpd.target().into()));
                }
            }
        }
    }

    let resolve = |target: &str,
                   refs: &[ParentRef],
                   violations: &mut Vec<SpecViolation>|
     -> Option<Vec<(usize, usize)>> {
        let t = index[target];
        let mut out = Vec::new();
        let mut ok = true;
        for r in refs {
            let Some(&p) = index.get(&r.variable) else {
                violations.push(SpecViolation::UndeclaredParent {
                    target: target.into(),
                    parent: r.variable.clone(),
                    lag: r.lag,
                });
                ok = false;
                continue;
            };
            if !declared.contains(&(p, r.lag, t)) {
                violations.push(SpecViolation::UndeclaredParent {
                    target: target.into(),
                    parent: r.variable.clone(),
                    lag: r.lag,
                });
                ok = false;
            }
            if out.contains(&(p, r.lag)) {
                violations.push(SpecViolation::DuplicateParent {
                    target: target.into(),
                    parent: r.variable.clone(),
                    lag: r.lag,
                });
                ok = false;
            }
            out.push((p, r.lag));
        }
        ok.then_some(out)
    };

    let check_rows = |target: &str,
                      table: &'static str,
                      rows: &[Distribution],
                      expected: usize,
                      width: usize,
                      violations: &mut Vec<SpecViolation>| {
        if rows.len() != expected {
            violations.push(SpecViolation::RowCount {
                target: target.into(),
                table,
                expected,
                found: rows.len(),
            });
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                violations.push(SpecViolation::RowWidth { target: target.into(), table, row: i });
            }
        }
    };

    let mut nodes: Vec<Option<CompiledNode>> = vec![None; variables.len()];
    for (v, var) in variables.iter().enumerate() {
        let Some(cpd) = cpd_for.get(&v) else {
            violations.push(SpecViolation::MissingCpd(var.name().into()));
            continue;
        };
        let width = cards[v];
        let node = match cpd {
            NodeCpd::Tabular(t) => {
                let Some(parents) = resolve(&t.target, &t.parents, &mut violations) else {
                    continue;
                };
                let expected = product_of(&cards, parents.iter().map(|p| p.0));
                check_rows(&t.target, "tabular", &t.rows, expected, width, &mut violations);
                CompiledNode { parents, rows: t.rows.clone(), mixture: None, provision: None }
            }
            NodeCpd::Mixture(m) => {
                let q_refs: Vec<ParentRef> = m.q_parents.iter().map(ParentRef::current).collect();
                let q = resolve(&m.target, &q_refs, &mut violations);
                let r = resolve(&m.target, &m.r_parents, &mut violations);
                for pr in &m.r_parents {
                    if pr.lag == 0 {
                        violations.push(SpecViolation::MisplacedParent {
                            target: m.target.clone(),
                            parent: pr.variable.clone(),
                            lag: 0,
                        });
                    }
                }
                if !(0.0..=1.0).contains(&m.alpha) {
                    violations.push(SpecViolation::AlphaOutOfRange {
                        target: m.target.clone(),
                        alpha: format!("{}", m.alpha),
                    });
                }
                let (Some(q), Some(r)) = (q, r) else { continue };
                let q_parents: Vec<usize> = q.iter().map(|p| p.0).collect();
                check_rows(
                    &m.target,
                    "Q",
                    &m.q_rows,
                    product_of(&cards, q_parents.iter().copied()),
                    width,
                    &mut violations,
                );
                check_rows(
                    &m.target,
                    "R",
                    &m.r_rows,
                    product_of(&cards, r.iter().map(|p| p.0)),
                    width,
                    &mut violations,
                );
                let mut parents = q.clone();
                parents.extend(r.iter().copied());
                let params = MixtureParams {
                    q_parents,
                    q_rows: m.q_rows.clone(),
                    r_parents: r,
                    r_rows: m.r_rows.clone(),
                    decomposition: m.decomposition,
                    alpha: m.alpha.clamp(0.0, 1.0),
                };
                CompiledNode { parents, rows: Vec::new(), mixture: Some(params), provision: None }
            }
        };
        nodes[v] = Some(node);
    }

    for name in spec.initial_slices.keys() {
        if !index.contains_key(name) {
            violations.push(SpecViolation::ProvisionForUnknown(name.clone()));
        }
    }
    for (v, slot) in nodes.iter_mut().enumerate() {
        let Some(node) = slot else { continue };
        let name = variables[v].name();
        let lagged = node.parents.iter().any(|p| p.1 > 0);
        match spec.initial_slices.get(name) {
            None if lagged => violations.push(SpecViolation::MissingProvision(name.into())),
            None => {}
            Some(InitialProvision::Observed) => node.provision = Some(Provision::Observed),
            Some(InitialProvision::Table { parents, rows }) => {
                let mut idx = Vec::new();
                for p in parents {
                    match index.get(p) {
                        Some(&pi) if declared.contains(&(pi, 0, v)) => idx.push(pi),
                        _ => violations.push(SpecViolation::ProvisionParent {
                            target: name.into(),
                            parent: p.clone(),
                        }),
                    }
                }
                if idx.len() == parents.len() {
                    let expected = product_of(&cards, idx.iter().copied());
                    check_rows(name, "initial", rows, expected, cards[v], &mut violations);
                }
                node.provision = Some(Provision::Table { parents: idx, rows: rows.clone() });
            }
        }
    }

    if !violations.is_empty() {
        return Err(Error::InvalidSpec(violations));
    }

    let mut nodes: Vec<CompiledNode> = nodes.into_iter().map(|n| n.expect("checked")).collect();
    for node in &mut nodes {
        if let Some(m) = &node.mixture {
            node.rows = materialize(m)?;
        }
    }
    let interface: Vec<usize> = (0..variables.len())
        .filter(|&v| nodes.iter().any(|n| n.parents.iter().any(|&(p, lag)| p == v && lag > 0)))
        .collect();

    Ok(CompiledDnm { variables, cards, index, nodes, max_lag, interface })
}

impl CompiledDnm {
    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, v: usize) -> &Variable {
        &self.variables[v]
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    /// Variables whose past values feed a later slice.
    pub fn interface(&self) -> &[usize] {
        &self.interface
    }

    /// Indices of nodes carrying a mixture CPD.
    pub fn mixture_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&v| self.nodes[v].mixture.is_some()).collect()
    }

    pub fn mixture(&self, node: usize) -> Option<MixtureView<'_>> {
        self.nodes[node]
            .mixture
            .as_ref()
            .map(|params| MixtureView { params, cards: &self.cards })
    }

    pub fn alpha(&self, node: usize) -> Option<f64> {
        self.nodes[node].mixture.as_ref().map(|m| m.alpha)
    }

    /// Sets a mixture node's likelihood weight and rematerializes its table.
    pub fn set_alpha(&mut self, node: usize, alpha: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::AlphaOutOfRange(alpha));
        }
        let n = &mut self.nodes[node];
        let Some(m) = n.mixture.as_mut() else {
            return Err(Error::InvalidArgument("node has no mixture CPD"));
        };
        let previous = m.alpha;
        m.alpha = alpha;
        match materialize(m) {
            Ok(rows) => {
                n.rows = rows;
                Ok(())
            }
            Err(e) => {
                m.alpha = previous;
                Err(e)
            }
        }
    }

    /// Parents `(variable, lag)` and rows used for `v` at `slice`, or `None`
    /// when the variable must be observed there.
    fn cpd_at(&self, v: usize, slice: usize) -> Option<(Vec<(usize, usize)>, &[Distribution])> {
        let node = &self.nodes[v];
        if slice < self.max_lag {
            match &node.provision {
                Some(Provision::Observed) => return None,
                Some(Provision::Table { parents, rows }) => {
                    return Some((parents.iter().map(|&p| (p, 0)).collect(), rows));
                }
                None => {}
            }
        }
        Some((node.parents.clone(), &node.rows))
    }

    fn cpd_factor(&self, v: usize, slice: usize) -> Factor {
        let n = self.len();
        match self.cpd_at(v, slice) {
            Some((parents, rows)) => {
                let mut vars: Vec<usize> =
                    parents.iter().map(|&(p, lag)| (slice - lag) * n + p).collect();
                vars.push(slice * n + v);
                let cards: Vec<usize> = parents
                    .iter()
                    .map(|&(p, _)| self.cards[p])
                    .chain(core::iter::once(self.cards[v]))
                    .collect();
                let values = rows.iter().flat_map(|r| r.probabilities().iter().copied()).collect();
                Factor::from_table(&vars, &cards, values)
            }
            None => {
                let u = Distribution::uniform(self.cards[v]);
                Factor::from_table(&[slice * n + v], &[self.cards[v]], u.probabilities().to_vec())
            }
        }
    }
}

/// Static network obtained by instantiating the template at slices `0..=T`.
#[derive(Debug, Clone)]
pub struct GroundNetwork {
    network: BeliefNetwork,
    slices: usize,
    width: usize,
    required: Vec<usize>,
}

impl GroundNetwork {
    pub fn network(&self) -> &BeliefNetwork {
        &self.network
    }

    /// Number of slices (`T + 1`).
    pub fn slices(&self) -> usize {
        self.slices
    }

    /// Ground node for template variable `v` at `slice`.
    pub fn node(&self, v: usize, slice: usize) -> usize {
        slice * self.width + v
    }

    /// Nodes that the model requires to be observed.
    pub fn required_observations(&self) -> &[usize] {
        &self.required
    }
}

/// Unrolls the model over slices `0..=last_slice` using each mixture node's
/// current weight.
pub fn unroll(model: &CompiledDnm, last_slice: usize) -> Result<GroundNetwork> {
    let slices = last_slice + 1;
    if model.max_lag > 0 && slices < model.max_lag {
        return Err(Error::TooFewSlices { slices, max_lag: model.max_lag });
    }
    let n = model.len();
    let mut variables = Vec::with_capacity(n * slices);
    let mut parents = Vec::with_capacity(n * slices);
    let mut cpts = Vec::with_capacity(n * slices);
    let mut required = Vec::new();
    for s in 0..slices {
        for v in 0..n {
            let var = &model.variables[v];
            variables.push(Variable::new(format!("{}@{}", var.name(), s), var.states().iter().cloned()));
            match model.cpd_at(v, s) {
                Some((ps, rows)) => {
                    parents.push(ps.iter().map(|&(p, lag)| (s - lag) * n + p).collect());
                    cpts.push(rows.to_vec());
                }
                None => {
                    required.push(s * n + v);
                    parents.push(Vec::new());
                    cpts.push(vec![Distribution::uniform(var.cardinality())]);
                }
            }
        }
    }
    Ok(GroundNetwork {
        network: BeliefNetwork::from_parts(variables, parents, cpts),
        slices,
        width: n,
        required,
    })
}

/// Belief over the model's interface nodes after some slice, advanced one
/// slice at a time. Scrolling never changes likelihood weights.
#[derive(Debug, Clone)]
pub struct ScrollState<'m> {
    model: &'m CompiledDnm,
    next_slice: usize,
    /// Normalized joint over interface nodes of the last `max_lag` slices;
    /// observed nodes appear as point masses. Node id = `slice * width + var`.
    belief: Factor,
}

impl<'m> ScrollState<'m> {
    /// State before slice 0.
    pub fn initial(model: &'m CompiledDnm) -> Self {
        ScrollState { model, next_slice: 0, belief: Factor::scalar(1.0) }
    }

    /// State after slice `t` given every observation in `history` up to `t`.
    ///
    /// Filtering restarts from the latest slice whose interface window is
    /// fully observed, which d-separates everything earlier.
    pub fn from_history(model: &'m CompiledDnm, history: &ObservationHistory, t: usize) -> Result<Self> {
        let lag = model.max_lag;
        let interface_observed = |end: usize| {
            (end + 1).saturating_sub(lag)..=end
        };
        let mut start: Option<usize> = None;
        for end in (0..=t).rev() {
            let window = interface_observed(end);
            if window.clone().all(|s| model.interface.iter().all(|&v| history.get(s, v).is_some())) {
                start = Some(end);
                break;
            }
        }
        let mut state = match start {
            Some(end) => {
                let n = model.len();
                let mut belief = Factor::scalar(1.0);
                for s in interface_observed(end) {
                    for &v in &model.interface {
                        let obs = history.get(s, v).expect("checked observed");
                        belief = belief.product(&Factor::indicator(s * n + v, model.cards[v], obs));
                    }
                }
                ScrollState { model, next_slice: end + 1, belief }
            }
            None => ScrollState::initial(model),
        };
        while state.next_slice <= t {
            let s = state.next_slice;
            let evidence: Vec<Option<usize>> = (0..model.len()).map(|v| history.get(s, v)).collect();
            state.advance(&evidence)?;
        }
        Ok(state)
    }

    /// The slice the next scroll will produce.
    pub fn next_slice(&self) -> usize {
        self.next_slice
    }

    pub fn model(&self) -> &'m CompiledDnm {
        self.model
    }

    /// Joint belief over the interface window.
    pub fn belief(&self) -> &Factor {
        &self.belief
    }

    /// Moves one slice into the future with nothing observed there; returns
    /// the marginal of every variable at the new slice.
    pub fn scroll(&mut self) -> Result<Vec<Distribution>> {
        let none = vec![None; self.model.len()];
        self.advance(&none)
    }

    /// Moves one slice forward, conditioning on `evidence` (indexed by
    /// variable) at the new slice.
    pub fn advance(&mut self, evidence: &[Option<usize>]) -> Result<Vec<Distribution>> {
        let model = self.model;
        let n = model.len();
        let s = self.next_slice;
        let mut joint = self.belief.clone();
        for v in 0..n {
            if s < model.max_lag && matches!(model.nodes[v].provision, Some(Provision::Observed)) && evidence[v].is_none() {
                return Err(Error::MissingRequiredObservation {
                    variable: model.variables[v].name().into(),
                    slice: s,
                });
            }
            joint = joint.product(&model.cpd_factor(v, s));
            if let Some(state) = evidence[v] {
                if state >= model.cards[v] {
                    return Err(Error::UnknownState {
                        variable: model.variables[v].name().into(),
                        state: format!("#{state}"),
                    });
                }
                joint = joint.product(&Factor::indicator(s * n + v, model.cards[v], state));
            }
        }
        if joint.rescale() == 0.0 {
            return Err(Error::InconsistentEvidence);
        }

        let keep: Vec<usize> = ((s + 1).saturating_sub(model.max_lag)..=s)
            .flat_map(|slice| model.interface.iter().map(move |&v| slice * n + v))
            .collect();
        let mut belief = joint.marginalize_to(&keep);
        belief.normalize();

        let marginals = (0..n)
            .map(|v| {
                let mut m = joint.marginalize_to(&[s * n + v]);
                m.normalize();
                Distribution::from_normalized(m.values().to_vec())
            })
            .collect();
        self.belief = belief;
        self.next_slice = s + 1;
        Ok(marginals)
    }
}

/// Forward-samples `periods` slices of the ground model; rows are indexed
/// by variable. Variables that must be observed in the initial slices are
/// drawn uniformly.
pub fn simulate(model: &CompiledDnm, periods: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if periods == 0 {
        return Err(Error::InvalidArgument("period count must be at least 1"));
    }
    let ground = unroll(model, periods - 1)?;
    let sample = crate::network::forward_sample(ground.network(), seed, 1)?
        .pop()
        .expect("one sample");
    Ok(sample.chunks(model.len()).map(<[usize]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carsales::build_carsales;

    fn d(p: &[f64]) -> Distribution {
        Distribution::new(p.to_vec()).unwrap()
    }

    #[test]
    fn carsales_compiles_with_lag_one() {
        let m = compile(&build_carsales()).unwrap();
        assert_eq!(m.max_lag(), 1);
        assert_eq!(m.mixture_nodes(), vec![m.index_of("s").unwrap()]);
        let mut iface: Vec<&str> = m.interface().iter().map(|&v| m.variable(v).name()).collect();
        iface.sort();
        assert_eq!(iface, vec!["p", "s"]);
    }

    #[test]
    fn mismatched_r_parent_lag_rejected() {
        let mut spec = build_carsales();
        for cpd in &mut spec.cpds {
            if let NodeCpd::Mixture(m) = cpd {
                m.r_parents = vec![ParentRef::lagged("p", 1), ParentRef::lagged("s", 2)];
            }
        }
        let Err(Error::InvalidSpec(v)) = compile(&spec) else { panic!("expected violations") };
        assert!(v.contains(&SpecViolation::UndeclaredParent {
            target: "s".into(),
            parent: "s".into(),
            lag: 2
        }));
    }

    #[test]
    fn static_spec_compiles() {
        let spec = DnmSpec {
            template: SliceTemplate {
                variables: vec![Variable::binary("a"), Variable::binary("b")],
                contemporaneous_arcs: vec![("a".into(), "b".into())],
            },
            lagged_arcs: vec![],
            cpds: vec![
                NodeCpd::Tabular(ConditionalTable { target: "a".into(), parents: vec![], rows: vec![d(&[0.3, 0.7])] }),
                NodeCpd::Tabular(ConditionalTable {
                    target: "b".into(),
                    parents: vec![ParentRef::current("a")],
                    rows: vec![d(&[0.9, 0.1]), d(&[0.2, 0.8])],
                }),
            ],
            initial_slices: BTreeMap::new(),
        };
        let m = compile(&spec).unwrap();
        assert_eq!(m.max_lag(), 0);
        assert!(m.interface().is_empty());
        let g = unroll(&m, 0).unwrap();
        assert_eq!(g.network().len(), 2);
    }

    #[test]
    fn missing_provision_and_cycle_reported() {
        let mut spec = build_carsales();
        spec.initial_slices.clear();
        spec.template.contemporaneous_arcs.push(("s".into(), "h".into()));
        let Err(Error::InvalidSpec(v)) = compile(&spec) else { panic!() };
        assert!(v.contains(&SpecViolation::MissingProvision("s".into())));
        assert!(v.iter().any(|x| matches!(x, SpecViolation::Structure(StructureViolation::Cycle(_)))));
    }

    #[test]
    fn alpha_out_of_range_rejected() {
        let mut spec = build_carsales();
        for cpd in &mut spec.cpds {
            if let NodeCpd::Mixture(m) = cpd {
                m.alpha = 1.5;
            }
        }
        assert!(matches!(compile(&spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn additive_examples() {
        let q = d(&[0.60, 0.40]);
        let r = d(&[0.90, 0.10]);
        assert_eq!(mixture_eval_additive(&q, &r, 1.0).unwrap().distribution, q);
        let half = mixture_eval_additive(&q, &r, 0.5).unwrap();
        assert!((half.distribution.get(0) - 0.75).abs() < 1e-15);
        assert!((half.distribution.get(1) - 0.25).abs() < 1e-15);
        assert_eq!(half.normalizer, 1.0);
        let same = d(&[0.3, 0.7]);
        for a in [0.0, 0.13, 0.5, 0.77, 1.0] {
            assert_eq!(mixture_eval_additive(&same, &same, a).unwrap().distribution, same);
        }
        assert_eq!(mixture_eval_additive(&q, &r, 1.1), Err(Error::AlphaOutOfRange(1.1)));
        assert!(mixture_eval_additive(&q, &r, -0.1).is_err());
    }

    #[test]
    fn multiplicative_examples() {
        let q = d(&[0.6, 0.4]);
        let r = d(&[0.9, 0.1]);
        assert_eq!(mixture_eval_multiplicative(&q, &r, 0.0).unwrap().distribution, r);
        let half = mixture_eval_multiplicative(&q, &r, 0.5).unwrap();
        // unnormalized (sqrt(0.54), sqrt(0.04)) = (0.734847.., 0.2)
        let raw0 = 0.54_f64.sqrt();
        let sum = raw0 + 0.2;
        assert!((half.distribution.get(0) - raw0 / sum).abs() < 1e-12);
        assert!((half.distribution.get(0) - 0.786061).abs() < 1e-6);
        assert!((half.normalizer - 1.0 / sum).abs() < 1e-12);
        let disjoint = mixture_eval_multiplicative(&d(&[1.0, 0.0]), &d(&[0.0, 1.0]), 0.5);
        assert_eq!(disjoint, Err(Error::DegenerateMixture));
    }

    #[test]
    fn unroll_carsales_one_slice() {
        let m = compile(&build_carsales()).unwrap();
        let g = unroll(&m, 1).unwrap();
        assert_eq!(g.network().len(), 8);
        let s1 = g.node(m.index_of("s").unwrap(), 1);
        let mut parent_names: Vec<&str> =
            g.network().parents(s1).iter().map(|&p| g.network().variable(p).name()).collect();
        parent_names.sort();
        assert_eq!(parent_names, vec!["d@1", "h@1", "p@0", "s@0"]);
        assert_eq!(g.network().cpt(s1).len(), 16);
        // row (d1=L, h1=H, p0=H, s0=H): q index 2 (LH), r index 0 (HH)
        let row = &g.network().cpt(s1)[2 * 4];
        assert!((row.get(0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn unroll_base_case_requires_observed_supply() {
        let m = compile(&build_carsales()).unwrap();
        let g = unroll(&m, 0).unwrap();
        assert_eq!(g.network().len(), 4);
        assert_eq!(g.required_observations(), &[m.index_of("s").unwrap()]);
    }

    #[test]
    fn set_alpha_rematerializes() {
        let mut m = compile(&build_carsales()).unwrap();
        let s = m.index_of("s").unwrap();
        m.set_alpha(s, 1.0).unwrap();
        let g = unroll(&m, 1).unwrap();
        let row = &g.network().cpt(g.node(s, 1))[2 * 4];
        assert_eq!(row.get(0), 0.60);
        assert!(m.set_alpha(s, 2.0).is_err());
        assert!(m.set_alpha(0, 0.5).is_err());
    }

    #[test]
    fn scroll_preserves_alpha() {
        let m = compile(&build_carsales()).unwrap();
        let s = m.index_of("s").unwrap();
        let mut history = ObservationHistory::for_model(&m);
        history.insert(0, &[Some(0), Some(0), Some(0), Some(1)]).unwrap();
        let mut state = ScrollState::from_history(&m, &history, 0).unwrap();
        state.scroll().unwrap();
        state.scroll().unwrap();
        assert_eq!(state.model().alpha(s), Some(0.5));
        assert_eq!(state.next_slice(), 3);
    }

    #[test]
    fn scroll_from_empty_history_needs_observed_supply() {
        let m = compile(&build_carsales()).unwrap();
        let mut state = ScrollState::initial(&m);
        assert!(matches!(state.scroll(), Err(Error::MissingRequiredObservation { .. })));
    }
}
