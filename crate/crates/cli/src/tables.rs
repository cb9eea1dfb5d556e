//! Grids of the closed-form predictive variances of the two-site polynomial
//! DLM.

use serde::Serialize;
use stdlm_core::analytic::{corollary2_paradox, theorem1, theorem2_gaps, PolyDlmParams};
use stdlm_core::{DlmError, Result};

/// Parameter swept by [`analytic_grid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepParam {
    D01,
    SigmaEps2,
    Lambda,
}

impl SweepParam {
    fn set(self, p: &PolyDlmParams, value: f64) -> PolyDlmParams {
        let mut q = *p;
        match self {
            SweepParam::D01 => q.d01 = value,
            SweepParam::SigmaEps2 => q.sigma_eps2 = value,
            SweepParam::Lambda => q.lambda = value,
        }
        q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRow {
    pub sigma_beta2: f64,
    pub sigma_delta2: f64,
    pub sigma_eps2: f64,
    pub lambda: f64,
    pub d01: f64,
    pub var_y01_y11: f64,
    pub var_y02_y12: f64,
    pub var_y01_y11_y12: f64,
    pub var_y02_y11_y12: f64,
    pub gap_more_data_hour1: f64,
    pub gap_more_data_hour2: f64,
    pub gap_later_hour_all_data: f64,
    pub gap_later_hour_own_data: f64,
    pub paradox: bool,
}

pub fn grid_row(p: &PolyDlmParams) -> GridRow {
    let v = theorem1(p);
    let g = theorem2_gaps(p);
    GridRow {
        sigma_beta2: p.sigma_beta2,
        sigma_delta2: p.sigma_delta2,
        sigma_eps2: p.sigma_eps2,
        lambda: p.lambda,
        d01: p.d01,
        var_y01_y11: v.var_y01_y11,
        var_y02_y12: v.var_y02_y12,
        var_y01_y11_y12: v.var_y01_y11_y12,
        var_y02_y11_y12: v.var_y02_y11_y12,
        gap_more_data_hour1: g.more_data_hour1,
        gap_more_data_hour2: g.more_data_hour2,
        gap_later_hour_all_data: g.later_hour_all_data,
        gap_later_hour_own_data: g.later_hour_own_data,
        paradox: corollary2_paradox(p),
    }
}

/// `points` evenly spaced values of `param` from `from` to `to` inclusive,
/// other parameters held at `base`.
pub fn analytic_grid(
    base: &PolyDlmParams,
    param: SweepParam,
    from: f64,
    to: f64,
    points: usize,
) -> Result<Vec<GridRow>> {
    if points == 0 {
        return Err(DlmError::Configuration(
            "a grid needs at least one point".into(),
        ));
    }
    (0..points)
        .map(|k| {
            let x = if points == 1 {
                from
            } else {
                from + (to - from) * k as f64 / (points - 1) as f64
            };
            let p = param.set(base, x);
            p.validate()?;
            Ok(grid_row(&p))
        })
        .collect()
}

pub fn write_grid<W: std::io::Write>(out: W, rows: &[GridRow]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(e) => e,
            other => std::io::Error::other(format!("{other:?}")),
        })?;
    }
    w.flush()
}
