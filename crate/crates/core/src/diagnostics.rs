//! Residual diagnostics for one-step-ahead forecasts.
//!
//! A residual is the indicator of a designated state minus the probability
//! the previous period's forecast gave it. Under an adequate model the
//! residuals have mean zero and no serial correlation.

use alloc::vec::Vec;

use crate::engine::BacktestReport;
use crate::{Error, Result};

/// Minimum series length for [`whiteness_summary`].
pub const MIN_WHITENESS_LEN: usize = 8;

/// Width of the white-noise band in standard errors.
pub const BAND_SIGMAS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeries {
    pub variable: usize,
    pub state: usize,
    /// Period each residual belongs to.
    pub times: Vec<usize>,
    pub values: Vec<f64>,
}

/// Residuals of `variable` for `state` across consecutive backtest rows.
pub fn residuals(
    report: &BacktestReport,
    variable: &str,
    state: &str,
) -> Result<ResidualSeries> {
    let v = report
        .variables
        .iter()
        .position(|x| x.name() == variable)
        .ok_or_else(|| Error::UnknownVariable(variable.into()))?;
    let s = report.variables[v].state_or_err(state)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for pair in report.rows.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        if cur.t != prev.t + 1 {
            continue;
        }
        let Some(observed) = cur.observed[v] else { continue };
        let hit = if observed == s { 1.0 } else { 0.0 };
        times.push(cur.t);
        values.push(hit - prev.forecast[v].get(s));
    }
    Ok(ResidualSeries { variable: v, state: s, times, values })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcfReport {
    /// `autocorrelations[k - 1]` is the lag-`k` sample autocorrelation.
    pub autocorrelations: Vec<f64>,
    pub n: usize,
    /// Half-width of the white-noise band, `2 / sqrt(n)`.
    pub band: f64,
    /// Lags whose autocorrelation falls outside the band.
    pub flagged: Vec<usize>,
}

pub fn sample_acf(series: &[f64], max_lag: usize) -> Result<AcfReport> {
    if max_lag == 0 {
        return Err(Error::InvalidArgument("maximum lag must be at least 1"));
    }
    let n = series.len();
    if n <= max_lag {
        return Err(Error::SeriesTooShort { len: n, required: max_lag + 1 });
    }
    let (lo, hi) = series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let scale = lo.abs().max(hi.abs()).max(1.0);
    if hi - lo <= 1e-12 * scale {
        return Err(Error::ZeroVariance);
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    let autocorrelations: Vec<f64> = (1..=max_lag)
        .map(|k| dev.iter().zip(&dev[k..]).map(|(a, b)| a * b).sum::<f64>() / denom)
        .collect();
    let band = BAND_SIGMAS / libm::sqrt(n as f64);
    let flagged = autocorrelations
        .iter()
        .enumerate()
        .filter(|(_, r)| r.abs() > band)
        .map(|(k, _)| k + 1)
        .collect();
    Ok(AcfReport { autocorrelations, n, band, flagged })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Adequate,
    Inadequate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhitenessReport {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std_dev: f64,
    /// `mean / (std_dev / sqrt(n))`
    pub z: f64,
    pub acf: AcfReport,
    pub verdict: Verdict,
}

/// Mean-zero check plus autocorrelation band flags. The verdict is adequate
/// iff `|z| < 2` and no lag is flagged.
pub fn whiteness_summary(series: &[f64], max_lag: usize) -> Result<WhitenessReport> {
    let n = series.len();
    if n < MIN_WHITENESS_LEN {
        return Err(Error::SeriesTooShort { len: n, required: MIN_WHITENESS_LEN });
    }
    let acf = sample_acf(series, max_lag)?;
    let mean = series.iter().sum::<f64>() / n as f64;
    let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let std_dev = libm::sqrt(var);
    let z = mean / (std_dev / libm::sqrt(n as f64));
    let verdict = if z.abs() < BAND_SIGMAS && acf.flagged.is_empty() {
        Verdict::Adequate
    } else {
        Verdict::Inadequate
    };
    Ok(WhitenessReport { n, mean, std_dev, z, acf, verdict })
}
