//! Static discrete belief networks and exact inference.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::factor::Factor;
use crate::{Error, Result};

/// Tolerance on the sum of a probability vector.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Largest joint state space [`posterior_enumerate`] will walk.
pub const ENUMERATION_LIMIT: u128 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    name: String,
    states: Vec<String>,
}

impl Variable {
    pub fn new(name: impl Into<String>, states: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Variable {
            name: name.into(),
            states: states.into_iter().map(Into::into).collect(),
        }
    }

    /// A variable with the two states `H` and `L`, in that order.
    pub fn binary(name: impl Into<String>) -> Self {
        Variable::new(name, ["H", "L"])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    pub fn state_label(&self, index: usize) -> &str {
        &self.states[index]
    }

    pub(crate) fn state_or_err(&self, label: &str) -> Result<usize> {
        self.state_index(label).ok_or_else(|| Error::UnknownState {
            variable: self.name.clone(),
            state: label.to_string(),
        })
    }
}

/// A probability vector over the states of one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidDistribution("empty probability vector".into()));
        }
        if let Some(p) = probabilities.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("entry {p} is not a probability")));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Distribution(probabilities))
    }

    /// Binary distribution `(p, 1 - p)`.
    pub fn binary(p: f64) -> Result<Self> {
        Distribution::new(vec![p, 1.0 - p])
    }

    pub fn point_mass(cardinality: usize, state: usize) -> Self {
        let mut v = vec![0.0; cardinality];
        v[state] = 1.0;
        Distribution(v)
    }

    pub fn uniform(cardinality: usize) -> Self {
        Distribution(vec![1.0 / cardinality as f64; cardinality])
    }

    /// Caller guarantees nonnegative entries summing to one.
    pub(crate) fn from_normalized(probabilities: Vec<f64>) -> Self {
        Distribution(probabilities)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, state: usize) -> f64 {
        self.0[state]
    }

    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NetworkStructure {
    pub variables: Vec<Variable>,
    /// Ordered parent list per child.
    pub parents: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructureViolation {
    DuplicateVariable(String),
    TooFewStates(String),
    DuplicateState { variable: String, state: String },
    UnknownChild(String),
    UnknownParent { child: String, parent: String },
    DuplicateParent { child: String, parent: String },
    /// Variables along one directed cycle, in arc order.
    Cycle(Vec<String>),
    MissingCpd(String),
    CpdParentMismatch(String),
    CpdRowCount { variable: String, expected: usize, found: usize },
    CpdRowWidth { variable: String, row: usize },
}

impl fmt::Display for StructureViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DuplicateVariable(v) => write!(f, "duplicate variable `{v}`"),
            Self::TooFewStates(v) => write!(f, "variable `{v}` needs at least two states"),
            Self::DuplicateState { variable, state } => {
                write!(f, "variable `{variable}` repeats state `{state}`")
            }
            Self::UnknownChild(v) => write!(f, "parent list given for unknown variable `{v}`"),
            Self::UnknownParent { child, parent } => {
                write!(f, "`{child}` names unknown parent `{parent}`")
            }
            Self::DuplicateParent { child, parent } => {
                write!(f, "`{child}` lists parent `{parent}` twice")
            }
            Self::Cycle(vs) => write!(f, "cycle through {}", vs.join(" -> ")),
            Self::MissingCpd(v) => write!(f, "no CPD for `{v}`"),
            Self::CpdParentMismatch(v) => {
                write!(f, "CPD parents of `{v}` differ from the structure")
            }
            Self::CpdRowCount {
                variable,
                expected,
                found,
            } => write!(f, "CPD of `{variable}` has {found} rows, expected {expected}"),
            Self::CpdRowWidth { variable, row } => {
                write!(f, "CPD row {row} of `{variable}` has the wrong number of states")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<StructureViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks names, state lists, parent references and acyclicity.
pub fn validate_structure(structure: &NetworkStructure) -> ValidationReport {
    let mut violations = Vec::new();
    let mut index = BTreeMap::new();
    for (i, var) in structure.variables.iter().enumerate() {
        if index.insert(var.name().to_string(), i).is_some() {
            violations.push(StructureViolation::DuplicateVariable(var.name().into()));
        }
        if var.cardinality() < 2 {
            violations.push(StructureViolation::TooFewStates(var.name().into()));
        }
        let mut seen = BTreeSet::new();
        for s in var.states() {
            if !seen.insert(s) {
                violations.push(StructureViolation::DuplicateState {
                    variable: var.name().into(),
                    state: s.clone(),
                });
            }
        }
    }

    let mut edges: Vec<Vec<usize>> = vec![Vec::new(); structure.variables.len()];
    for (child, parents) in &structure.parents {
        let Some(&c) = index.get(child) else {
            violations.push(StructureViolation::UnknownChild(child.clone()));
            continue;
        };
        let mut seen = BTreeSet::new();
        for p in parents {
            if !seen.insert(p) {
                violations.push(StructureViolation::DuplicateParent {
                    child: child.clone(),
                    parent: p.clone(),
                });
                continue;
            }
            match index.get(p) {
                Some(&pi) => edges[pi].push(c),
                None => violations.push(StructureViolation::UnknownParent {
                    child: child.clone(),
                    parent: p.clone(),
                }),
            }
        }
    }

    if let Some(cycle) = find_cycle(&edges) {
        violations.push(StructureViolation::Cycle(
            cycle
                .into_iter()
                .map(|i| structure.variables[i].name().to_string())
                .collect(),
        ));
    }
    ValidationReport { violations }
}

/// Returns one directed cycle of the graph given as child adjacency lists.
pub(crate) fn find_cycle(children: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let n = children.len();
    let mut mark = vec![Mark::New; n];
    let mut stack_path: Vec<usize> = Vec::new();
    for root in 0..n {
        if mark[root] != Mark::New {
            continue;
        }
        // iterative DFS: (node, next child index)
        let mut stack = vec![(root, 0usize)];
        mark[root] = Mark::Active;
        stack_path.push(root);
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if *next < children[node].len() {
                let child = children[node][*next];
                *next += 1;
                match mark[child] {
                    Mark::New => {
                        mark[child] = Mark::Active;
                        stack.push((child, 0));
                        stack_path.push(child);
                    }
                    Mark::Active => {
                        let start = stack_path.iter().position(|&v| v == child).unwrap();
                        return Some(stack_path[start..].to_vec());
                    }
                    Mark::Done => {}
                }
            } else {
                mark[node] = Mark::Done;
                stack.pop();
                stack_path.pop();
            }
        }
    }
    None
}

/// Kahn topological order, or `None` when the graph has a cycle.
pub(crate) fn topological_order(parents: &[Vec<usize>]) -> Option<Vec<usize>> {
    let n = parents.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut children = vec![Vec::new(); n];
    for (c, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(c);
        }
    }
    let mut ready: Vec<usize> = (0..n).rev().filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop() {
        order.push(v);
        for &c in children[v].iter().rev() {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(c);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Conditional probability table; rows follow the mixed-radix order of the
/// parent states with the first parent most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularCpd {
    pub target: String,
    pub parent_order: Vec<String>,
    pub rows: Vec<Distribution>,
}

/// A validated, immutable belief network.
#[derive(Debug, Clone)]
pub struct BeliefNetwork {
    variables: Vec<Variable>,
    parents: Vec<Vec<usize>>,
    cpts: Vec<Vec<Distribution>>,
    topo: Vec<usize>,
    index: BTreeMap<String, usize>,
}

impl BeliefNetwork {
    pub fn new(structure: NetworkStructure, cpds: Vec<TabularCpd>) -> Result<Self> {
        let mut report = validate_structure(&structure);
        if !report.is_valid() {
            return Err(Error::InvalidNetwork(report.violations));
        }
        let index: BTreeMap<String, usize> = structure
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name().to_string(), i))
            .collect();
        let mut by_target: BTreeMap<&str, &TabularCpd> = BTreeMap::new();
        for cpd in &cpds {
            by_target.insert(cpd.target.as_str(), cpd);
        }
        let mut parents = Vec::new();
        let mut cpts = Vec::new();
        for var in &structure.variables {
            let declared = structure.parents.get(var.name()).cloned().unwrap_or_default();
            let Some(cpd) = by_target.get(var.name()) else {
                report
                    .violations
                    .push(StructureViolation::MissingCpd(var.name().into()));
                continue;
            };
            if cpd.parent_order.len() != declared.len()
                || cpd.parent_order.iter().any(|p| !declared.contains(p))
            {
                report
                    .violations
                    .push(StructureViolation::CpdParentMismatch(var.name().into()));
                continue;
            }
            let pidx: Vec<usize> = cpd.parent_order.iter().map(|p| index[p]).collect();
            let expected: usize = pidx
                .iter()
                .map(|&p| structure.variables[p].cardinality())
                .product();
            if cpd.rows.len() != expected {
                report.violations.push(StructureViolation::CpdRowCount {
                    variable: var.name().into(),
                    expected,
                    found: cpd.rows.len(),
                });
            }
            for (r, row) in cpd.rows.iter().enumerate() {
                if row.len() != var.cardinality() {
                    report.violations.push(StructureViolation::CpdRowWidth {
                        variable: var.name().into(),
                        row: r,
                    });
                }
            }
            parents.push(pidx);
            cpts.push(cpd.rows.clone());
        }
        if !report.is_valid() {
            return Err(Error::InvalidNetwork(report.violations));
        }
        let topo = topological_order(&parents).expect("validated acyclic");
        Ok(BeliefNetwork {
            variables: structure.variables,
            parents,
            cpts,
            topo,
            index,
        })
    }

    /// Assembles a network from parts already known to be consistent.
    pub(crate) fn from_parts(
        variables: Vec<Variable>,
        parents: Vec<Vec<usize>>,
        cpts: Vec<Vec<Distribution>>,
    ) -> Self {
        debug_assert_eq!(variables.len(), parents.len());
        debug_assert_eq!(variables.len(), cpts.len());
        let topo = topological_order(&parents).expect("acyclic by construction");
        let index = variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name().to_string(), i))
            .collect();
        BeliefNetwork {
            variables,
            parents,
            cpts,
            topo,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, node: usize) -> &Variable {
        &self.variables[node]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn cpt(&self, node: usize) -> &[Distribution] {
        &self.cpts[node]
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    /// Row of `node`'s table selected by a full assignment of the network.
    pub fn row_for(&self, node: usize, assignment: &[usize]) -> &Distribution {
        let mut idx = 0;
        for &p in &self.parents[node] {
            idx = idx * self.variables[p].cardinality() + assignment[p];
        }
        &self.cpts[node][idx]
    }

    pub fn factor(&self, node: usize) -> Factor {
        let mut vars = self.parents[node].clone();
        vars.push(node);
        let cards: Vec<usize> = vars.iter().map(|&v| self.variables[v].cardinality()).collect();
        let values: Vec<f64> = self.cpts[node]
            .iter()
            .flat_map(|row| row.probabilities().iter().copied())
            .collect();
        Factor::from_table(&vars, &cards, values)
    }

    fn check_node(&self, node: usize) -> Result<()> {
        if node < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownVariable(format!("#{node}")))
        }
    }

    fn check_evidence(&self, evidence: &Evidence) -> Result<()> {
        for (&v, &s) in &evidence.assignments {
            self.check_node(v)?;
            if s >= self.variables[v].cardinality() {
                return Err(Error::UnknownState {
                    variable: self.variables[v].name().into(),
                    state: format!("#{s}"),
                });
            }
        }
        Ok(())
    }
}

/// Observed states keyed by node index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Evidence {
    assignments: BTreeMap<usize, usize>,
}

impl Evidence {
    pub fn new() -> Self {
        Evidence::default()
    }

    /// Builds evidence from `(variable, state)` labels.
    pub fn from_labels<'a>(
        network: &BeliefNetwork,
        labels: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        let mut ev = Evidence::new();
        for (name, state) in labels {
            let node = network
                .index_of(name)
                .ok_or_else(|| Error::UnknownVariable(name.into()))?;
            let s = network.variable(node).state_or_err(state)?;
            ev.observe(node, s);
        }
        Ok(ev)
    }

    pub fn observe(&mut self, node: usize, state: usize) {
        self.assignments.insert(node, state);
    }

    pub fn get(&self, node: usize) -> Option<usize> {
        self.assignments.get(&node).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assignments.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// Brute-force posterior: sums the full joint over every completion of the
/// evidence. Reference implementation for [`posterior_eliminate`].
pub fn posterior_enumerate(
    network: &BeliefNetwork,
    evidence: &Evidence,
    query: usize,
) -> Result<Distribution> {
    network.check_node(query)?;
    network.check_evidence(evidence)?;
    let cards: Vec<usize> = network.variables.iter().map(Variable::cardinality).collect();
    let space: u128 = cards.iter().map(|&c| c as u128).product();
    if space > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge(space));
    }
    let mut totals = vec![0.0; cards[query]];
    let mut assignment = vec![0usize; cards.len()];
    'outer: loop {
        let consistent = evidence.iter().all(|(v, s)| assignment[v] == s);
        if consistent {
            let mut p = 1.0;
            for node in 0..network.len() {
                p *= network.row_for(node, &assignment).get(assignment[node]);
            }
            totals[assignment[query]] += p;
        }
        for i in (0..assignment.len()).rev() {
            assignment[i] += 1;
            if assignment[i] < cards[i] {
                continue 'outer;
            }
            assignment[i] = 0;
        }
        break;
    }
    let z: f64 = totals.iter().sum();
    if z <= 0.0 {
        return Err(Error::InconsistentEvidence);
    }
    Ok(Distribution::from_normalized(totals.into_iter().map(|t| t / z).collect()))
}

/// Exact posterior marginal by variable elimination.
pub fn posterior_eliminate(
    network: &BeliefNetwork,
    evidence: &Evidence,
    query: usize,
) -> Result<Distribution> {
    let joint = joint_posterior(network, evidence, &[query])?;
    Ok(Distribution::from_normalized(joint.values().to_vec()))
}

/// Exact joint posterior over `queries` by variable elimination with a
/// min-degree order. The returned factor is normalized; observed query
/// variables appear as point masses.
pub fn joint_posterior(
    network: &BeliefNetwork,
    evidence: &Evidence,
    queries: &[usize],
) -> Result<Factor> {
    for &q in queries {
        network.check_node(q)?;
    }
    network.check_evidence(evidence)?;

    // barren nodes (neither query, evidence, nor their ancestors) sum to one
    let mut relevant = vec![false; network.len()];
    let mut stack: Vec<usize> = queries.iter().copied().chain(evidence.iter().map(|(v, _)| v)).collect();
    while let Some(v) = stack.pop() {
        if !relevant[v] {
            relevant[v] = true;
            stack.extend_from_slice(network.parents(v));
        }
    }

    let mut factors: Vec<Factor> = Vec::new();
    for node in (0..network.len()).filter(|&n| relevant[n]) {
        let mut f = network.factor(node);
        for &v in f.vars().to_vec().iter() {
            if let Some(s) = evidence.get(v) {
                f = f.reduce(v, s);
            }
        }
        push_factor(&mut factors, f)?;
    }

    let mut pending: BTreeSet<usize> = (0..network.len())
        .filter(|&n| relevant[n] && evidence.get(n).is_none() && !queries.contains(&n))
        .collect();
    while let Some(var) = min_degree(&factors, &pending) {
        pending.remove(&var);
        let (touching, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.contains(var));
        factors = rest;
        let mut acc = Factor::scalar(1.0);
        for f in &touching {
            acc = acc.product(f);
        }
        push_factor(&mut factors, acc.sum_out(var))?;
    }

    let mut result = Factor::scalar(1.0);
    for f in &factors {
        result = result.product(f);
        result.rescale();
    }
    for &q in queries {
        if let Some(s) = evidence.get(q) {
            if !result.contains(q) {
                result = result.product(&Factor::indicator(q, network.variable(q).cardinality(), s));
            }
        } else if !result.contains(q) {
            // query with no relevant factor mentioning it cannot happen: its own CPT is relevant
            unreachable!("query variable dropped from elimination");
        }
    }
    if result.normalize() <= 0.0 {
        return Err(Error::InconsistentEvidence);
    }
    Ok(result)
}

fn push_factor(factors: &mut Vec<Factor>, mut f: Factor) -> Result<()> {
    if f.rescale() == 0.0 {
        return Err(Error::InconsistentEvidence);
    }
    if !f.vars().is_empty() {
        factors.push(f);
    }
    Ok(())
}

fn min_degree(factors: &[Factor], pending: &BTreeSet<usize>) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for &v in pending {
        let mut neighbours = BTreeSet::new();
        for f in factors.iter().filter(|f| f.contains(v)) {
            neighbours.extend(f.vars().iter().copied());
        }
        let degree = neighbours.len();
        if best.is_none_or(|(d, _)| degree < d) {
            best = Some((degree, v));
        }
    }
    best.map(|(_, v)| v)
}

/// Draws `n` ancestral samples; each sample is a full assignment indexed by
/// node. Deterministic for a given seed.
pub fn forward_sample(network: &BeliefNetwork, seed: u64, n: usize) -> Result<Vec<Vec<usize>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut assignment = vec![0usize; network.len()];
        for &node in network.topological_order() {
            let row = network.row_for(node, &assignment);
            assignment[node] = draw(row, rng.random::<f64>());
        }
        out.push(assignment);
    }
    Ok(out)
}

pub(crate) fn draw(row: &Distribution, u: f64) -> usize {
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, &p) in row.probabilities().iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
        }
        cum += p;
        if u < cum {
            return i;
        }
    }
    last_positive
}
