//! Forecasting sessions: observations, weight updates, multi-step forecasts
//! and backtests.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dnm::{unroll, CompiledDnm, ScrollState};
use crate::estimation::{mle_alpha_window, WeightEstimate};
use crate::network::{posterior_eliminate, Distribution, Evidence, Variable};
use crate::{Error, Result};

/// Default estimation window: the two most recent periods.
pub const DEFAULT_WINDOW: usize = 2;

/// Partial assignments indexed by time, then by variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationHistory {
    variables: Vec<Variable>,
    slices: Vec<Vec<Option<usize>>>,
}

impl ObservationHistory {
    pub fn new(variables: Vec<Variable>) -> Self {
        ObservationHistory { variables, slices: Vec::new() }
    }

    pub fn for_model(model: &CompiledDnm) -> Self {
        ObservationHistory::new(model.variables().to_vec())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    /// One past the last time index with a slice entry.
    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn get(&self, t: usize, variable: usize) -> Option<usize> {
        self.slices.get(t).and_then(|s| s[variable])
    }

    pub fn slice(&self, t: usize) -> Option<&[Option<usize>]> {
        self.slices.get(t).map(Vec::as_slice)
    }

    pub fn is_complete(&self, t: usize) -> bool {
        self.slice(t).is_some_and(|s| s.iter().all(Option::is_some))
    }

    /// Merges observations at `t`. Re-observing the same value is allowed;
    /// a different value is a conflict.
    pub fn insert(&mut self, t: usize, assignments: &[Option<usize>]) -> Result<()> {
        if assignments.len() != self.variables.len() {
            return Err(Error::InvalidArgument("observation width differs from the model"));
        }
        for (v, obs) in assignments.iter().enumerate() {
            if let Some(s) = *obs {
                let var = &self.variables[v];
                if s >= var.cardinality() {
                    return Err(Error::UnknownState {
                        variable: var.name().into(),
                        state: format!("#{s}"),
                    });
                }
                if let Some(existing) = self.get(t, v) {
                    if existing != s {
                        return Err(Error::ObservationConflict {
                            variable: var.name().into(),
                            t,
                            existing: var.state_label(existing).into(),
                            new: var.state_label(s).into(),
                        });
                    }
                }
            }
        }
        if self.slices.len() <= t {
            self.slices.resize(t + 1, vec![None; self.variables.len()]);
        }
        for (slot, obs) in self.slices[t].iter_mut().zip(assignments) {
            if obs.is_some() {
                *slot = *obs;
            }
        }
        Ok(())
    }

    /// Converts `(variable, state)` labels to an index row.
    pub fn row_from_labels<'a>(
        &self,
        labels: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Vec<Option<usize>>> {
        let mut row = vec![None; self.variables.len()];
        for (name, state) in labels {
            let v = self
                .variables
                .iter()
                .position(|x| x.name() == name)
                .ok_or_else(|| Error::UnknownVariable(name.into()))?;
            row[v] = Some(self.variables[v].state_or_err(state)?);
        }
        Ok(row)
    }

    /// Copy holding only slices `0..=t`.
    pub fn truncated(&self, t: usize) -> Self {
        let mut out = self.clone();
        out.slices.truncate(t + 1);
        out
    }
}

/// Marginal forecasts for horizons `1..=l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastProfile {
    /// Last observed time the forecast conditions on.
    pub origin: Option<usize>,
    /// `horizons[h - 1][v]` is the marginal of variable `v` at `origin + h`.
    pub horizons: Vec<Vec<Distribution>>,
}

impl ForecastProfile {
    pub fn horizon(&self, h: usize) -> &[Distribution] {
        &self.horizons[h - 1]
    }

    pub fn probability(&self, h: usize, variable: usize, state: usize) -> f64 {
        self.horizons[h - 1][variable].get(state)
    }

    pub fn len(&self) -> usize {
        self.horizons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.horizons.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeUpdate {
    Updated(WeightEstimate),
    /// Weight retained; the error says why no estimate was possible.
    Skipped(Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaUpdate {
    pub t: usize,
    pub node: usize,
    pub estimate: WeightEstimate,
}

/// Single-owner forecasting session over one series.
#[derive(Debug, Clone)]
pub struct Session {
    model: CompiledDnm,
    history: ObservationHistory,
    time: Option<usize>,
    window: usize,
    trace: Vec<AlphaUpdate>,
}

impl Session {
    pub fn new(model: CompiledDnm) -> Self {
        let history = ObservationHistory::for_model(&model);
        Session { model, history, time: None, window: DEFAULT_WINDOW, trace: Vec::new() }
    }

    pub fn with_window(mut self, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidArgument("estimation window must be at least 1"));
        }
        self.window = window;
        Ok(self)
    }

    pub fn model(&self) -> &CompiledDnm {
        &self.model
    }

    pub fn history(&self) -> &ObservationHistory {
        &self.history
    }

    /// Latest observed time index.
    pub fn time(&self) -> Option<usize> {
        self.time
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn alpha(&self, node: usize) -> Option<f64> {
        self.model.alpha(node)
    }

    /// Every completed weight update, in order.
    pub fn trace(&self) -> &[AlphaUpdate] {
        &self.trace
    }

    /// Records observations at `t` given as `(variable, state)` labels.
    pub fn observe<'a>(
        &mut self,
        t: usize,
        assignments: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<()> {
        let row = self.history.row_from_labels(assignments)?;
        self.observe_row(t, &row)
    }

    /// Records observations at `t` given as state indices per variable.
    pub fn observe_row(&mut self, t: usize, row: &[Option<usize>]) -> Result<()> {
        let next = self.time.map_or(0, |c| c + 1);
        if t > next {
            return Err(Error::ObservationOutOfOrder { t, current: self.time });
        }
        self.history.insert(t, row)?;
        self.time = Some(self.time.map_or(t, |c| c.max(t)));
        Ok(())
    }

    /// Re-estimates every mixture weight from the most recent window. Nodes
    /// whose window is not estimable keep their weight.
    pub fn update_weights(&mut self) -> Result<Vec<(usize, NodeUpdate)>> {
        let t = self.time.ok_or(Error::InvalidArgument("session has no observations"))?;
        let max_lag = self.model.max_lag();
        let mut out = Vec::new();
        for node in self.model.mixture_nodes() {
            let previous = self.model.alpha(node).expect("mixture node");
            let available = (t + 1).saturating_sub(max_lag);
            let outcome = if available == 0 {
                NodeUpdate::Skipped(Error::SeriesTooShort { len: t + 1, required: max_lag + 1 })
            } else {
                let window = self.window.min(available);
                match mle_alpha_window(&self.model, &self.history, node, t, window, previous)
                    .and_then(|est| self.model.set_alpha(node, est.alpha_star).map(|()| est))
                {
                    Ok(estimate) => {
                        self.trace.push(AlphaUpdate { t, node, estimate: estimate.clone() });
                        NodeUpdate::Updated(estimate)
                    }
                    Err(e) => NodeUpdate::Skipped(e),
                }
            };
            out.push((node, outcome));
        }
        Ok(out)
    }

    /// Marginal forecasts for the next `horizon` slices, obtained by
    /// scrolling the model forward with the current weights.
    pub fn forecast(&self, horizon: usize) -> Result<ForecastProfile> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("forecast horizon must be at least 1"));
        }
        let mut state = match self.time {
            Some(t) => ScrollState::from_history(&self.model, &self.history, t)?,
            None => ScrollState::initial(&self.model),
        };
        let horizons = (0..horizon).map(|_| state.scroll()).collect::<Result<Vec<_>>>()?;
        Ok(ForecastProfile { origin: self.time, horizons })
    }

    /// Same quantity as [`Session::forecast`], computed by unrolling the whole
    /// history into one ground network and running exact inference on it.
    pub fn forecast_by_unrolling(&self, horizon: usize) -> Result<ForecastProfile> {
        forecast_by_unrolling(&self.model, &self.history, self.time, horizon)
    }
}

/// Single-shot forecast: ground network over `0..=t + horizon`, all history
/// as evidence, posterior marginals at each future slice.
pub fn forecast_by_unrolling(
    model: &CompiledDnm,
    history: &ObservationHistory,
    time: Option<usize>,
    horizon: usize,
) -> Result<ForecastProfile> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("forecast horizon must be at least 1"));
    }
    let first_future = time.map_or(0, |t| t + 1);
    let ground = unroll(model, first_future + horizon - 1)?;
    let net = ground.network();
    let mut evidence = Evidence::new();
    for t in 0..first_future {
        for v in 0..model.len() {
            if let Some(s) = history.get(t, v) {
                evidence.observe(ground.node(v, t), s);
            }
        }
    }
    for &node in ground.required_observations() {
        if evidence.get(node).is_none() {
            let v = node % model.len();
            return Err(Error::MissingRequiredObservation {
                variable: model.variable(v).name().into(),
                slice: node / model.len(),
            });
        }
    }
    let horizons = (first_future..first_future + horizon)
        .map(|s| {
            (0..model.len())
                .map(|v| posterior_eliminate(net, &evidence, ground.node(v, s)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForecastProfile { origin: time, horizons })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BacktestOptions {
    pub window: usize,
    /// When false the model's weights stay at their specified values.
    pub update_weights: bool,
}

impl Default for BacktestOptions {
    fn default() -> Self {
        BacktestOptions { window: DEFAULT_WINDOW, update_weights: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestRow {
    pub t: usize,
    /// Weight per mixture node after the update at `t`, in
    /// [`BacktestReport::mixture_nodes`] order.
    pub alphas: Vec<f64>,
    /// One-step-ahead marginals for `t + 1`, per variable.
    pub forecast: Vec<Distribution>,
    /// Observations at `t`, per variable.
    pub observed: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub variables: Vec<Variable>,
    pub mixture_nodes: Vec<usize>,
    pub rows: Vec<BacktestRow>,
}

/// Replays `series` in time order: ingest slice `t`, update weights, then
/// forecast `t + 1`. Rows start at the first period with lagged context.
pub fn backtest(
    model: &CompiledDnm,
    series: &ObservationHistory,
    options: BacktestOptions,
) -> Result<BacktestReport> {
    if series.variables() != model.variables() {
        return Err(Error::InvalidArgument("series variables differ from the model"));
    }
    let mut session = Session::new(model.clone()).with_window(options.window)?;
    let mixture_nodes = model.mixture_nodes();
    let mut rows = Vec::new();
    for t in 0..series.len() {
        let observed = series.slice(t).expect("t < len").to_vec();
        session.observe_row(t, &observed)?;
        if t < model.max_lag() {
            continue;
        }
        if options.update_weights {
            session.update_weights()?;
        }
        let profile = session.forecast(1)?;
        rows.push(BacktestRow {
            t,
            alphas: mixture_nodes.iter().map(|&n| session.alpha(n).expect("mixture")).collect(),
            forecast: profile.horizons.into_iter().next().expect("one horizon"),
            observed,
        });
    }
    Ok(BacktestReport {
        variables: model.variables().to_vec(),
        mixture_nodes,
        rows,
    })
}
