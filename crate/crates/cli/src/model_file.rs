//! JSON model files.
//!
//! Conditional tables are objects mapping a comma-joined assignment of the
//! parents (in the listed parent order) to a probability row over the
//! target's states. A node without parents uses the key `""`.

use std::collections::BTreeMap;

use dnm_core::dnm::{
    ConditionalTable, Decomposition, DnmSpec, InitialProvision, LaggedArc, MixtureCpd, NodeCpd,
    ParentRef, SliceTemplate,
};
use dnm_core::network::{Distribution, Variable};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub type TableJson = IndexMap<String, Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub variables: Vec<VariableJson>,
    #[serde(default)]
    pub contemporaneous_arcs: Vec<(String, String)>,
    #[serde(default)]
    pub lagged_arcs: Vec<LaggedArcJson>,
    pub cpds: Vec<CpdJson>,
    #[serde(default)]
    pub initial_slices: IndexMap<String, InitialJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableJson {
    pub name: String,
    pub states: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaggedArcJson {
    pub from: String,
    pub lag: usize,
    pub to: String,
}

/// A parent written either as a bare name (same slice) or `[name, lag]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParentJson {
    Current(String),
    Lagged(String, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecompositionJson {
    Additive,
    Multiplicative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum CpdJson {
    Tabular {
        target: String,
        #[serde(default)]
        parents: Vec<ParentJson>,
        table: TableJson,
    },
    Mixture {
        target: String,
        decomposition: DecompositionJson,
        alpha_init: f64,
        #[serde(default)]
        q_parents: Vec<String>,
        q_table: TableJson,
        r_parents: Vec<(String, usize)>,
        r_table: TableJson,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservedKeyword {
    Observed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialJson {
    Observed(ObservedKeyword),
    Table {
        #[serde(default)]
        parents: Vec<String>,
        table: TableJson,
    },
}

/// Parses model JSON; syntax and shape errors are usage errors.
pub fn parse_model_file(text: &str) -> CliResult<ModelFile> {
    serde_json::from_str(text).map_err(|e| CliError::usage(format!("malformed model file: {e}")))
}

/// Indented JSON with arrays of scalars kept on one line, plus a trailing
/// newline.
pub fn emit_model_file(file: &ModelFile) -> String {
    let value = serde_json::to_value(file).expect("model file serializes");
    let mut out = String::new();
    write_value(&value, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(value: &Value, depth: usize, out: &mut String) {
    let pad = |d: usize| "  ".repeat(d);
    match value {
        Value::Array(items) if items.iter().all(|v| !v.is_array() && !v.is_object()) => {
            let inner: Vec<String> = items.iter().map(Value::to_string).collect();
            out.push_str(&format!("[{}]", inner.join(", ")));
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                write_value(item, depth + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            for (i, (k, v)) in map.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(v, depth + 1, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push('}');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

/// Builds the engine-level specification. Table keys are resolved against
/// the declared states; every problem found is reported.
pub fn to_spec(file: &ModelFile) -> CliResult<DnmSpec> {
    let variables: Vec<Variable> =
        file.variables.iter().map(|v| Variable::new(v.name.as_str(), v.states.iter().map(String::as_str))).collect();
    let by_name: BTreeMap<&str, &Variable> = variables.iter().map(|v| (v.name(), v)).collect();
    let mut problems = Vec::new();

    let mut table = |owner: &str, label: &str, parents: &[&str], table: &TableJson| -> Vec<Distribution> {
        let mut parent_vars = Vec::with_capacity(parents.len());
        for p in parents {
            match by_name.get(p) {
                Some(v) => parent_vars.push(*v),
                None => {
                    problems.push(format!("{label} table of `{owner}` names unknown parent `{p}`"));
                    return Vec::new();
                }
            }
        }
        let keys = assignment_keys(&parent_vars);
        let mut rows = Vec::with_capacity(keys.len());
        for key in &keys {
            match table.get(key) {
                None => problems.push(format!("{label} table of `{owner}` has no row \"{key}\"")),
                Some(values) => match Distribution::new(values.clone()) {
                    Ok(d) => rows.push(d),
                    Err(e) => problems.push(format!("{label} table of `{owner}` row \"{key}\": {e}")),
                },
            }
        }
        for key in table.keys() {
            if !keys.contains(key) {
                problems.push(format!("{label} table of `{owner}` has unexpected row \"{key}\""));
            }
        }
        rows
    };

    let mut cpds = Vec::with_capacity(file.cpds.len());
    for cpd in &file.cpds {
        match cpd {
            CpdJson::Tabular { target, parents, table: t } => {
                let refs: Vec<ParentRef> = parents.iter().map(parent_ref).collect();
                let names: Vec<&str> = refs.iter().map(|p| p.variable.as_str()).collect();
                let rows = table(target, "conditional", &names, t);
                cpds.push(NodeCpd::Tabular(ConditionalTable { target: target.clone(), parents: refs, rows }));
            }
            CpdJson::Mixture { target, decomposition, alpha_init, q_parents, q_table, r_parents, r_table } => {
                let q_names: Vec<&str> = q_parents.iter().map(String::as_str).collect();
                let r_names: Vec<&str> = r_parents.iter().map(|(v, _)| v.as_str()).collect();
                let q_rows = table(target, "Q", &q_names, q_table);
                let r_rows = table(target, "R", &r_names, r_table);
                cpds.push(NodeCpd::Mixture(MixtureCpd {
                    target: target.clone(),
                    q_parents: q_parents.clone(),
                    q_rows,
                    r_parents: r_parents.iter().map(|(v, l)| ParentRef::lagged(v.as_str(), *l)).collect(),
                    r_rows,
                    decomposition: match decomposition {
                        DecompositionJson::Additive => Decomposition::Additive,
                        DecompositionJson::Multiplicative => Decomposition::Multiplicative,
                    },
                    alpha: *alpha_init,
                }));
            }
        }
    }

    let mut initial_slices = BTreeMap::new();
    for (name, provision) in &file.initial_slices {
        let provision = match provision {
            InitialJson::Observed(_) => InitialProvision::Observed,
            InitialJson::Table { parents, table: t } => {
                let names: Vec<&str> = parents.iter().map(String::as_str).collect();
                let rows = table(name, "initial", &names, t);
                InitialProvision::Table { parents: parents.clone(), rows }
            }
        };
        initial_slices.insert(name.clone(), provision);
    }

    if !problems.is_empty() {
        return Err(CliError::Domain(problems));
    }
    Ok(DnmSpec {
        template: SliceTemplate {
            variables,
            contemporaneous_arcs: file.contemporaneous_arcs.clone(),
        },
        lagged_arcs: file
            .lagged_arcs
            .iter()
            .map(|a| LaggedArc::new(a.from.as_str(), a.lag, a.to.as_str()))
            .collect(),
        cpds,
        initial_slices,
    })
}

/// Inverse of [`to_spec`]. Parents must name declared variables.
pub fn from_spec(spec: &DnmSpec) -> CliResult<ModelFile> {
    let variables = &spec.template.variables;
    let lookup = |name: &str| {
        variables
            .iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| CliError::domain(format!("unknown variable `{name}`")))
    };
    let table = |names: &[&str], rows: &[Distribution]| -> CliResult<TableJson> {
        let parent_vars = names.iter().map(|n| lookup(n)).collect::<CliResult<Vec<_>>>()?;
        let keys = assignment_keys(&parent_vars);
        if keys.len() != rows.len() {
            return Err(CliError::domain("table row count does not match its parents"));
        }
        Ok(keys.into_iter().zip(rows).map(|(k, r)| (k, r.probabilities().to_vec())).collect())
    };

    let mut cpds = Vec::with_capacity(spec.cpds.len());
    for cpd in &spec.cpds {
        cpds.push(match cpd {
            NodeCpd::Tabular(t) => {
                let names: Vec<&str> = t.parents.iter().map(|p| p.variable.as_str()).collect();
                CpdJson::Tabular {
                    target: t.target.clone(),
                    parents: t
                        .parents
                        .iter()
                        .map(|p| match p.lag {
                            0 => ParentJson::Current(p.variable.clone()),
                            lag => ParentJson::Lagged(p.variable.clone(), lag),
                        })
                        .collect(),
                    table: table(&names, &t.rows)?,
                }
            }
            NodeCpd::Mixture(m) => {
                let q_names: Vec<&str> = m.q_parents.iter().map(String::as_str).collect();
                let r_names: Vec<&str> = m.r_parents.iter().map(|p| p.variable.as_str()).collect();
                CpdJson::Mixture {
                    target: m.target.clone(),
                    decomposition: match m.decomposition {
                        Decomposition::Additive => DecompositionJson::Additive,
                        Decomposition::Multiplicative => DecompositionJson::Multiplicative,
                    },
                    alpha_init: m.alpha,
                    q_parents: m.q_parents.clone(),
                    q_table: table(&q_names, &m.q_rows)?,
                    r_parents: m.r_parents.iter().map(|p| (p.variable.clone(), p.lag)).collect(),
                    r_table: table(&r_names, &m.r_rows)?,
                }
            }
        });
    }

    let mut initial_slices = IndexMap::new();
    for (name, provision) in &spec.initial_slices {
        let json = match provision {
            InitialProvision::Observed => InitialJson::Observed(ObservedKeyword::Observed),
            InitialProvision::Table { parents, rows } => {
                let names: Vec<&str> = parents.iter().map(String::as_str).collect();
                InitialJson::Table { parents: parents.clone(), table: table(&names, rows)? }
            }
        };
        initial_slices.insert(name.clone(), json);
    }

    Ok(ModelFile {
        variables: variables
            .iter()
            .map(|v| VariableJson { name: v.name().into(), states: v.states().to_vec() })
            .collect(),
        contemporaneous_arcs: spec.template.contemporaneous_arcs.clone(),
        lagged_arcs: spec
            .lagged_arcs
            .iter()
            .map(|a| LaggedArcJson { from: a.source.clone(), lag: a.lag, to: a.target.clone() })
            .collect(),
        cpds,
        initial_slices,
    })
}

fn parent_ref(p: &ParentJson) -> ParentRef {
    match p {
        ParentJson::Current(v) => ParentRef::current(v.as_str()),
        ParentJson::Lagged(v, lag) => ParentRef::lagged(v.as_str(), *lag),
    }
}

/// Row keys in table order: the last parent varies fastest.
fn assignment_keys(parents: &[&Variable]) -> Vec<String> {
    let mut keys = vec![String::new()];
    for (i, v) in parents.iter().enumerate() {
        keys = keys
            .iter()
            .flat_map(|prefix| {
                v.states().iter().map(move |s| if i == 0 { s.clone() } else { format!("{prefix},{s}") })
            })
            .collect();
    }
    keys
}
