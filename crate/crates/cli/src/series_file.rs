//! CSV series files: header `t,<var>,...`, one row per period, state labels
//! as cells and empty cells for missing values. Periods absent from the
//! file are treated as fully unobserved.

use dnm_core::engine::ObservationHistory;
use dnm_core::network::Variable;

use crate::error::{CliError, CliResult};

/// Reads a series whose columns must cover exactly the given variables
/// (in any order).
pub fn parse_series(text: &str, variables: &[Variable]) -> CliResult<ObservationHistory> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::usage(format!("malformed series file: {e}")))?
        .clone();
    if header.get(0) != Some("t") {
        return Err(CliError::usage("series file header must start with `t`"));
    }
    let mut columns = Vec::with_capacity(header.len() - 1);
    let mut problems = Vec::new();
    for name in header.iter().skip(1) {
        match variables.iter().position(|v| v.name() == name) {
            Some(v) if columns.contains(&v) => problems.push(format!("duplicate column `{name}`")),
            Some(v) => columns.push(v),
            None => problems.push(format!("column `{name}` is not a model variable")),
        }
    }
    for (v, var) in variables.iter().enumerate() {
        if !columns.contains(&v) {
            problems.push(format!("data has no column `{}`", var.name()));
        }
    }
    if !problems.is_empty() {
        return Err(CliError::Domain(problems));
    }

    let mut history = ObservationHistory::new(variables.to_vec());
    let mut last: Option<usize> = None;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::usage(format!("malformed series file: {e}")))?;
        let line = line + 2;
        let t: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("line {line}: `{}` is not a period index", &record[0])))?;
        if last.is_some_and(|prev| t <= prev) {
            return Err(CliError::usage(format!("line {line}: periods must be strictly increasing")));
        }
        last = Some(t);
        let mut row = vec![None; variables.len()];
        for (cell, &v) in record.iter().skip(1).zip(&columns) {
            let cell = cell.trim();
            if cell.is_empty() {
                continue;
            }
            let state = variables[v].state_index(cell).ok_or_else(|| {
                CliError::domain(format!(
                    "line {line}: `{cell}` is not a state of `{}`",
                    variables[v].name()
                ))
            })?;
            row[v] = Some(state);
        }
        history.insert(t, &row)?;
    }
    Ok(history)
}

/// Writes a series with columns in variable order; every period in
/// `0..len` gets a row.
pub fn write_series(history: &ObservationHistory) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend(history.variables().iter().map(|v| v.name().to_string()));
    w.write_record(&header)?;
    for t in 0..history.len() {
        let mut record = vec![t.to_string()];
        for (v, var) in history.variables().iter().enumerate() {
            record.push(history.get(t, v).map_or(String::new(), |s| var.state_label(s).to_string()));
        }
        w.write_record(&record)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::domain(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
