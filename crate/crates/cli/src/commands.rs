//! Command implementations. Each returns the text destined for standard
//! output so the binary stays a thin argument-parsing shell.

use std::fmt::Write as _;

use dnm_core::carsales::{build_carsales, reference_history};
use dnm_core::diagnostics::{residuals, whiteness_summary, Verdict};
use dnm_core::dnm::{compile, simulate as simulate_series, CompiledDnm};
use dnm_core::engine::{backtest as run_backtest, BacktestOptions, ObservationHistory, Session};

use crate::error::{CliError, CliResult};
use crate::format::prob;
use crate::model_file::{emit_model_file, from_spec, parse_model_file, to_spec};
use crate::series_file::{parse_series, write_series};

/// Parses and compiles model JSON.
pub fn load_model(text: &str) -> CliResult<CompiledDnm> {
    let spec = to_spec(&parse_model_file(text)?)?;
    Ok(compile(&spec)?)
}

/// Parses a series against the model's variables.
pub fn load_series(model: &CompiledDnm, text: &str) -> CliResult<ObservationHistory> {
    parse_series(text, model.variables())
}

pub fn validate(model_text: &str) -> CliResult<String> {
    let model = load_model(model_text)?;
    let mixtures: Vec<&str> =
        model.mixture_nodes().iter().map(|&n| model.variable(n).name()).collect();
    Ok(format!(
        "ok: {} variables, max lag {}, mixture nodes: {}\n",
        model.len(),
        model.max_lag(),
        if mixtures.is_empty() { "none".to_string() } else { mixtures.join(",") }
    ))
}

/// Estimation settings shared by the replaying commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplayOptions {
    pub window: usize,
    /// Keep the weights from the model file instead of re-estimating them.
    pub fixed_alpha: bool,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions { window: BacktestOptions::default().window, fixed_alpha: false }
    }
}

impl ReplayOptions {
    fn backtest_options(self) -> BacktestOptions {
        BacktestOptions { window: self.window, update_weights: !self.fixed_alpha }
    }
}

/// Parses `var=state,...` into `(variable, state)` index pairs.
pub fn parse_state_map(model: &CompiledDnm, text: &str) -> CliResult<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (var, state) = item
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("state map entry `{item}` is not var=state")))?;
        let v = model
            .index_of(var)
            .ok_or_else(|| CliError::domain(format!("state map names unknown variable `{var}`")))?;
        let s = model.variable(v).state_index(state).ok_or_else(|| {
            CliError::domain(format!("state map: `{state}` is not a state of `{var}`"))
        })?;
        match out.iter_mut().find(|(x, _)| *x == v) {
            Some(entry) => entry.1 = s,
            None => out.push((v, s)),
        }
    }
    Ok(out)
}

/// One-step-ahead replay as CSV. `designated` overrides the reported state
/// per variable; other variables report their first state.
pub fn backtest(
    model: &CompiledDnm,
    series: &ObservationHistory,
    designated: &[(usize, usize)],
    options: ReplayOptions,
) -> CliResult<String> {
    let report = run_backtest(model, series, options.backtest_options())?;
    let states: Vec<usize> = (0..model.len())
        .map(|v| designated.iter().find(|(x, _)| *x == v).map_or(0, |&(_, s)| s))
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend(report.mixture_nodes.iter().map(|&n| format!("alpha_star:{}", model.variable(n).name())));
    header.extend((0..model.len()).map(|v| {
        let var = model.variable(v);
        format!("forecast:{}={}", var.name(), var.state_label(states[v]))
    }));
    header.extend(model.variables().iter().map(|v| format!("observed:{}", v.name())));
    w.write_record(&header)?;
    for row in &report.rows {
        let mut record = vec![row.t.to_string()];
        record.extend(row.alphas.iter().map(|&a| prob(a)));
        record.extend((0..model.len()).map(|v| prob(row.forecast[v].get(states[v]))));
        record.extend(row.observed.iter().enumerate().map(|(v, o)| {
            o.map_or(String::new(), |s| model.variable(v).state_label(s).to_string())
        }));
        w.write_record(&record)?;
    }
    finish_csv(w)
}

/// Ingests the whole series (re-estimating weights after each period unless
/// fixed) and forecasts `horizon` periods past its end.
pub fn forecast(
    model: &CompiledDnm,
    series: &ObservationHistory,
    horizon: usize,
    options: ReplayOptions,
) -> CliResult<String> {
    if horizon == 0 {
        return Err(CliError::usage("horizon must be at least 1"));
    }
    let mut session = Session::new(model.clone()).with_window(options.window)?;
    for t in 0..series.len() {
        session.observe_row(t, series.slice(t).expect("t < len"))?;
        if t >= model.max_lag() && !options.fixed_alpha {
            session.update_weights()?;
        }
    }
    let profile = session.forecast(horizon)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["horizon", "variable", "state", "probability"])?;
    for (h, marginals) in profile.horizons.iter().enumerate() {
        for (v, dist) in marginals.iter().enumerate() {
            let var = model.variable(v);
            for (s, &p) in dist.probabilities().iter().enumerate() {
                w.write_record([(h + 1).to_string(), var.name().into(), var.state_label(s).into(), prob(p)])?;
            }
        }
    }
    finish_csv(w)
}

/// Residual whiteness report for one variable/state.
pub fn diagnose(
    model: &CompiledDnm,
    series: &ObservationHistory,
    variable: &str,
    state: &str,
    max_lag: usize,
    options: ReplayOptions,
) -> CliResult<String> {
    if max_lag == 0 {
        return Err(CliError::usage("maxlag must be at least 1"));
    }
    let report = run_backtest(model, series, options.backtest_options())?;
    let res = residuals(&report, variable, state)?;
    let summary = whiteness_summary(&res.values, max_lag).map_err(|e| match e {
        dnm_core::Error::ZeroVariance => {
            CliError::domain("residual autocorrelation is undefined: residuals are constant")
        }
        other => other.into(),
    })?;
    let mut out = String::new();
    let _ = writeln!(out, "residuals: {variable}={state}, n={}", summary.n);
    let _ = writeln!(out, "mean: {}", prob(summary.mean));
    let _ = writeln!(out, "std_dev: {}", prob(summary.std_dev));
    let _ = writeln!(out, "z: {}", prob(summary.z));
    let _ = writeln!(out, "band: {}", prob(summary.acf.band));
    for (k, rho) in summary.acf.autocorrelations.iter().enumerate() {
        let flag = if summary.acf.flagged.contains(&(k + 1)) { " flagged" } else { "" };
        let _ = writeln!(out, "rho_{}: {}{flag}", k + 1, prob(*rho));
    }
    let flagged: Vec<String> = summary.acf.flagged.iter().map(ToString::to_string).collect();
    let _ = writeln!(
        out,
        "flagged lags: {}",
        if flagged.is_empty() { "none".to_string() } else { flagged.join(",") }
    );
    let verdict = match summary.verdict {
        Verdict::Adequate => "adequate",
        Verdict::Inadequate => "inadequate",
    };
    let _ = writeln!(out, "verdict: {verdict}");
    Ok(out)
}

/// Forward-sampled series of `periods` slices.
pub fn simulate(model: &CompiledDnm, periods: usize, seed: u64) -> CliResult<String> {
    if periods == 0 {
        return Err(CliError::usage("periods must be at least 1"));
    }
    let rows = simulate_series(model, periods, seed)?;
    let mut history = ObservationHistory::for_model(model);
    for (t, row) in rows.into_iter().enumerate() {
        let row: Vec<Option<usize>> = row.into_iter().map(Some).collect();
        history.insert(t, &row)?;
    }
    write_series(&history)
}

/// The CARSALES model file and its twelve-period series.
pub fn carsales_example() -> CliResult<(String, String)> {
    let json = emit_model_file(&from_spec(&build_carsales())?);
    let csv = write_series(&reference_history())?;
    Ok((json, csv))
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> CliResult<String> {
    let bytes = w.into_inner().map_err(|e| CliError::domain(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
