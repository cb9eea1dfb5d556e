//! Chain diagnostics: traces, ACF/PACF and posterior quantiles.

use serde::{Deserialize, Serialize};
use stdlm_core::gibbs::{DrawRecord, PosteriorDraws};
use stdlm_core::stats::{mean, quantile_sorted, sorted_copy};
use stdlm_core::{DlmError, Result};

/// Probabilities of the reported posterior quantiles.
pub const QUANTILE_PROBS: [f64; 3] = [0.025, 0.5, 0.975];

pub const PARAMETERS: [&str; 4] = ["lambda", "sigma2", "a1", "a2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDiagnostics {
    pub name: String,
    pub mean: f64,
    /// At [`QUANTILE_PROBS`], type-7 interpolation.
    pub quantiles: [f64; 3],
    /// Lags `0..=max_lag`.
    pub acf: Vec<f64>,
    /// Lags `1..=max_lag`.
    pub pacf: Vec<f64>,
    /// The chain never moved; ACF is reported as 1 at every lag.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_draws: usize,
    pub requested_lag: usize,
    pub max_lag: usize,
    pub acceptance_rate: f64,
    pub parameters: Vec<ParameterDiagnostics>,
}

/// Sample autocorrelation `c(h) / c(0)` with the `1/N` autocovariance.
/// A constant series gives all ones and `true`.
pub fn acf(x: &[f64], max_lag: usize) -> (Vec<f64>, bool) {
    let n = x.len();
    let m = mean(x);
    let c0: f64 = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
    // the mean of a constant series may differ from it by rounding
    if x.iter().all(|v| *v == x[0]) || !(c0 > 0.0) {
        return (vec![1.0; max_lag + 1], true);
    }
    let r = (0..=max_lag)
        .map(|h| {
            let c: f64 = (0..n - h).map(|t| (x[t] - m) * (x[t + h] - m)).sum::<f64>() / n as f64;
            c / c0
        })
        .collect();
    (r, false)
}

/// Partial autocorrelations at lags `1..` from `acf` (lag 0 first) by the
/// Durbin-Levinson recursion. Stops with zeros if the prediction variance
/// collapses.
pub fn pacf(acf: &[f64]) -> Vec<f64> {
    let max_lag = acf.len().saturating_sub(1);
    let mut out = Vec::with_capacity(max_lag);
    let mut phi: Vec<f64> = Vec::new();
    let mut v = 1.0;
    for k in 1..=max_lag {
        if !(v > 1e-12) {
            out.push(0.0);
            continue;
        }
        let num = acf[k] - (0..k - 1).map(|j| phi[j] * acf[k - 1 - j]).sum::<f64>();
        let a = num / v;
        let mut next = vec![0.0; k];
        for j in 0..k - 1 {
            next[j] = phi[j] - a * phi[k - 2 - j];
        }
        next[k - 1] = a;
        phi = next;
        v *= 1.0 - a * a;
        out.push(a);
    }
    out
}

fn parameter(name: &str, x: &[f64], max_lag: usize) -> ParameterDiagnostics {
    let sorted = sorted_copy(x);
    let (acf, degenerate) = acf(x, max_lag);
    let pacf = if degenerate {
        (1..=max_lag)
            .map(|h| if h == 1 { 1.0 } else { 0.0 })
            .collect()
    } else {
        pacf(&acf)
    };
    ParameterDiagnostics {
        name: name.to_string(),
        mean: mean(x),
        quantiles: QUANTILE_PROBS.map(|p| quantile_sorted(&sorted, p)),
        acf,
        pacf,
        degenerate,
    }
}

pub fn traces(records: &[DrawRecord]) -> [Vec<f64>; 4] {
    [
        records.iter().map(|r| r.lambda).collect(),
        records.iter().map(|r| r.sigma2).collect(),
        records.iter().map(|r| r.a1).collect(),
        records.iter().map(|r| r.a2).collect(),
    ]
}

/// Diagnostics of the retained draws. The lag is truncated to `N - 1` when
/// the chain is too short.
pub fn diagnostics_of(
    records: &[DrawRecord],
    acceptance_rate: f64,
    max_lag: usize,
) -> Result<Diagnostics> {
    let n = records.len();
    if n == 0 {
        return Err(DlmError::EmptyReport(
            "no retained draws to diagnose".into(),
        ));
    }
    let lag = if n < max_lag + 1 {
        log::warn!(
            "{n} draws support lags up to {} only; truncating from {max_lag}",
            n - 1
        );
        n - 1
    } else {
        max_lag
    };
    let parameters = PARAMETERS
        .iter()
        .zip(traces(records).iter())
        .map(|(name, x)| parameter(name, x, lag))
        .collect();
    Ok(Diagnostics {
        n_draws: n,
        requested_lag: max_lag,
        max_lag: lag,
        acceptance_rate,
        parameters,
    })
}

pub fn diagnostics(draws: &PosteriorDraws, max_lag: usize) -> Result<Diagnostics> {
    diagnostics_of(&draws.records, draws.acceptance_rate, max_lag)
}
