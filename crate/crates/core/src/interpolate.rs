//! Spatial prediction at ungauged sites.
//!
//! For every retained posterior draw the ungauged coefficients are propagated
//! through time by kriging the gauged increments, and a response is drawn by
//! kriging the gauged residuals. Quantiles across draws give predictive
//! intervals; comparing them with held-out truth gives coverage.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, DlmError, Result};
use crate::gibbs::{ChainObserver, IterationView};
use crate::linalg::cholesky_jittered;
use crate::model::{Gamma, InitialState, Phase, StationSet, HOURS_PER_WEEK};
use crate::stats::{quantile_sorted, sorted_copy};

/// Variances within this distance below zero are clamped to zero.
pub const VARIANCE_CLAMP_TOL: f64 = 1e-12;

/// A prediction-only location.
#[derive(Debug, Clone, PartialEq)]
pub struct UngaugedSite {
    pub id: String,
    pub coord: [f64; 2],
    /// Distances to every gauged site, km.
    pub dist_to_gauged: DVector<f64>,
    /// Whether the site lies in the convex hull of the gauged sites.
    pub in_hull: bool,
    /// The full `(n+1) x (n+1)` distance matrix with this site first.
    pub augmented: DMatrix<f64>,
}

impl UngaugedSite {
    pub fn new(id: impl Into<String>, coord: [f64; 2], stations: &StationSet) -> Result<Self> {
        if !(coord[0].is_finite() && coord[1].is_finite()) {
            return Err(DlmError::Contract(
                "ungauged coordinate is not finite".into(),
            ));
        }
        let pts: Vec<[f64; 2]> = stations.sites().iter().map(|s| s.coord).collect();
        Ok(UngaugedSite {
            id: id.into(),
            coord,
            dist_to_gauged: stations.distances_to(coord),
            in_hull: in_convex_hull(coord, &pts),
            augmented: stations.augmented_distances(coord),
        })
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Point-in-convex-hull test (boundary counts as inside). Coordinates are
/// treated as planar.
pub fn in_convex_hull(p: [f64; 2], points: &[[f64; 2]]) -> bool {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return false;
    }
    // Andrew's monotone chain, counter-clockwise
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &q in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0
            {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        return false;
    }
    (0..hull.len()).all(|k| cross(hull[k], hull[(k + 1) % hull.len()], p) >= 0.0)
}

/// Blocks of `exp(-V*/theta)` with the ungauged site first, plus the derived
/// kriging weights and Schur complement.
#[derive(Debug, Clone, PartialEq)]
pub struct KrigingBlocks {
    pub s11: f64,
    pub s12: DVector<f64>,
    pub s22: DMatrix<f64>,
    /// `S22^{-1} S21`.
    pub weights: DVector<f64>,
    /// `S11 - S12 S22^{-1} S21`, clamped at zero.
    pub schur: f64,
    /// Gauged site at distance zero, if any.
    pub collocated: Option<usize>,
}

pub fn partition_cov(theta: f64, v_star: &DMatrix<f64>) -> Result<KrigingBlocks> {
    ensure_positive("theta", theta)?;
    let n1 = v_star.nrows();
    if n1 < 2 || v_star.ncols() != n1 {
        return Err(DlmError::Contract(format!(
            "augmented distance matrix has shape {:?}",
            v_star.shape()
        )));
    }
    let n = n1 - 1;
    let s = v_star.map(|d| (-d / theta).exp());
    let s11 = s[(0, 0)];
    let s12 = DVector::from_fn(n, |i, _| s[(0, i + 1)]);
    let s22 = s.view((1, 1), (n, n)).into_owned();
    let collocated = (0..n).find(|&i| v_star[(0, i + 1)] == 0.0);
    let (weights, schur) = match collocated {
        Some(i) => {
            let mut w = DVector::zeros(n);
            w[i] = 1.0;
            (w, 0.0)
        }
        None => {
            let chol = cholesky_jittered(&s22, 0, "gauged correlation block")?;
            let w = chol.solve(&s12);
            let raw = s11 - s12.dot(&w);
            if raw < -VARIANCE_CLAMP_TOL {
                return Err(DlmError::numerical(
                    0,
                    format!("kriging variance {raw:e} is negative"),
                ));
            }
            (w, raw.max(0.0))
        }
    };
    Ok(KrigingBlocks {
        s11,
        s12,
        s22,
        weights,
        schur,
        collocated,
    })
}

/// Mean and variance of `alpha^s_{jt}` given the previous ungauged value and
/// the gauged values at `t` and `t-1`.
pub fn ungauged_state_moments(
    alpha_prev_s: f64,
    alpha_t: &DVector<f64>,
    alpha_prev: &DVector<f64>,
    tau_j2: f64,
    sigma2: f64,
    blocks: &KrigingBlocks,
) -> (f64, f64) {
    let mean = match blocks.collocated {
        Some(i) => alpha_prev_s + (alpha_t[i] - alpha_prev[i]),
        None => alpha_prev_s + blocks.weights.dot(&(alpha_t - alpha_prev)),
    };
    (mean, sigma2 * tau_j2 * blocks.schur)
}

/// One draw of `alpha^s_{jt}`; always consumes one standard normal.
pub fn sample_ungauged_state<R: Rng + ?Sized>(
    alpha_prev_s: f64,
    alpha_t: &DVector<f64>,
    alpha_prev: &DVector<f64>,
    tau_j2: f64,
    sigma2: f64,
    blocks: &KrigingBlocks,
    rng: &mut R,
) -> f64 {
    let (m, v) = ungauged_state_moments(alpha_prev_s, alpha_t, alpha_prev, tau_j2, sigma2, blocks);
    let z: f64 = rng.sample(StandardNormal);
    m + v.sqrt() * z
}

/// Gauged quantities at one hour needed for a response prediction.
#[derive(Debug, Clone, Copy)]
pub struct GaugedSlice<'a> {
    pub t: i64,
    pub beta: f64,
    pub alpha1: &'a DVector<f64>,
    pub alpha2: &'a DVector<f64>,
    pub y: &'a DVector<f64>,
}

/// Mean and variance of `y^s_t`.
pub fn response_moments(
    g: &GaugedSlice<'_>,
    alpha_s: (f64, f64),
    phase: Phase,
    sigma2: f64,
    blocks: &KrigingBlocks,
) -> (f64, f64) {
    let (s1, s2) = phase.regressors(g.t);
    if let Some(i) = blocks.collocated {
        return (g.y[i], 0.0);
    }
    let resid = DVector::from_fn(g.y.len(), |i, _| {
        g.y[i] - g.beta - s1 * g.alpha1[i] - s2 * g.alpha2[i]
    });
    let mean = g.beta + s1 * alpha_s.0 + s2 * alpha_s.1 + blocks.weights.dot(&resid);
    (mean, sigma2 * blocks.schur)
}

/// One draw of `y^s_t`; always consumes one standard normal.
pub fn predict_response<R: Rng + ?Sized>(
    g: &GaugedSlice<'_>,
    alpha_s: (f64, f64),
    phase: Phase,
    sigma2: f64,
    blocks: &KrigingBlocks,
    rng: &mut R,
) -> f64 {
    let (m, v) = response_moments(g, alpha_s, phase, sigma2, blocks);
    let z: f64 = rng.sample(StandardNormal);
    m + v.sqrt() * z
}

/// Predictive draws at one site: `draws[k][col]` is draw `k` at panel column `col`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSeries {
    pub site: String,
    pub t_index: Vec<i64>,
    pub draws: Vec<Vec<f64>>,
}

/// Central interval of one nominal mass at every hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub level: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub median: Vec<f64>,
    /// Sorted by level.
    pub bands: Vec<Band>,
}

fn validate_levels(levels: &[f64]) -> Result<Vec<f64>> {
    if levels.is_empty() {
        return Err(DlmError::Configuration("no nominal levels given".into()));
    }
    if let Some(l) = levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(DlmError::Configuration(format!(
            "nominal level {l} is outside (0, 1)"
        )));
    }
    let mut v = levels.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

impl PredictiveSeries {
    pub fn n_times(&self) -> usize {
        self.t_index.len()
    }

    /// Sorted draws at column `col`.
    pub fn sorted_at(&self, col: usize) -> Vec<f64> {
        sorted_copy(&self.draws.iter().map(|d| d[col]).collect::<Vec<_>>())
    }

    /// Median and central equal-tailed type-7 intervals.
    pub fn summarize(&self, levels: &[f64]) -> Result<SeriesSummary> {
        if self.draws.is_empty() {
            return Err(DlmError::EmptyReport(format!(
                "no predictive draws for `{}`",
                self.site
            )));
        }
        let levels = validate_levels(levels)?;
        let cols: Vec<Vec<f64>> = (0..self.n_times()).map(|c| self.sorted_at(c)).collect();
        let median = cols.iter().map(|s| quantile_sorted(s, 0.5)).collect();
        let bands = levels
            .iter()
            .map(|&level| Band {
                level,
                lower: cols
                    .iter()
                    .map(|s| quantile_sorted(s, (1.0 - level) / 2.0))
                    .collect(),
                upper: cols
                    .iter()
                    .map(|s| quantile_sorted(s, (1.0 + level) / 2.0))
                    .collect(),
            })
            .collect();
        Ok(SeriesSummary { median, bands })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCoverage {
    pub level: f64,
    pub covered: usize,
    pub evaluated: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekCoverage {
    pub week: usize,
    pub level: f64,
    pub covered: usize,
    pub evaluated: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub site: String,
    pub levels: Vec<LevelCoverage>,
    pub weekly: Vec<WeekCoverage>,
}

/// Fraction of observed hours whose truth lies inside the central interval
/// (bounds inclusive), per level and per 168-hour week.
pub fn coverage(
    series: &PredictiveSeries,
    truth: &[f64],
    observed: &[bool],
    levels: &[f64],
) -> Result<CoverageReport> {
    let t = series.n_times();
    if truth.len() != t || observed.len() != t {
        return Err(DlmError::Contract(format!(
            "truth has {} hours and mask {} for a {t}-hour series",
            truth.len(),
            observed.len()
        )));
    }
    let evaluated = observed.iter().filter(|o| **o).count();
    if evaluated == 0 {
        return Err(DlmError::EmptyReport(format!(
            "no observed truth at `{}` to evaluate",
            series.site
        )));
    }
    let summary = series.summarize(levels)?;
    let n_weeks = t.div_ceil(HOURS_PER_WEEK);
    let mut level_rows = Vec::new();
    let mut weekly = Vec::new();
    for band in &summary.bands {
        let inside: Vec<bool> = (0..t)
            .map(|c| band.lower[c] <= truth[c] && truth[c] <= band.upper[c])
            .collect();
        let count = |range: std::ops::Range<usize>| {
            range.clone().filter(|&c| observed[c] && inside[c]).count()
        };
        let covered = count(0..t);
        level_rows.push(LevelCoverage {
            level: band.level,
            covered,
            evaluated,
            coverage: covered as f64 / evaluated as f64,
        });
        for week in 0..n_weeks {
            let range = week * HOURS_PER_WEEK..((week + 1) * HOURS_PER_WEEK).min(t);
            let ev = range.clone().filter(|&c| observed[c]).count();
            if ev == 0 {
                continue;
            }
            let cov = count(range);
            weekly.push(WeekCoverage {
                week: week + 1,
                level: band.level,
                covered: cov,
                evaluated: ev,
                coverage: cov as f64 / ev as f64,
            });
        }
    }
    Ok(CoverageReport {
        site: series.site.clone(),
        levels: level_rows,
        weekly,
    })
}

/// Prior moments of the ungauged coefficient at `t = 0`, kriged from the
/// gauged initial values with the prior covariance `c_bar exp(-V*/lambda_j)`.
pub fn initial_ungauged_moments(
    alpha0: &DVector<f64>,
    m0_alpha: &DVector<f64>,
    block_mean: f64,
    block_var: f64,
    sigma2: f64,
    blocks: &KrigingBlocks,
) -> (f64, f64) {
    let mean = match blocks.collocated {
        Some(i) => alpha0[i],
        None => block_mean + blocks.weights.dot(&(alpha0 - m0_alpha)),
    };
    (mean, sigma2 * block_var * blocks.schur)
}

/// Composition sampler attached to a chain: one predictive path per site for
/// every `every`-th retained iteration.
pub struct Interpolator {
    sites: Vec<UngaugedSite>,
    gamma: Gamma,
    init: InitialState,
    every: usize,
    seen: usize,
    rng: ChaCha8Rng,
    state_blocks: Vec<[KrigingBlocks; 2]>,
    t_index: Vec<i64>,
    draws: Vec<Vec<Vec<f64>>>,
}

impl Interpolator {
    pub fn new(
        sites: Vec<UngaugedSite>,
        gamma: Gamma,
        init: InitialState,
        t_index: Vec<i64>,
        seed: u64,
        stream: u64,
        every: usize,
    ) -> Result<Self> {
        gamma.validate()?;
        if every == 0 {
            return Err(DlmError::Configuration(
                "interpolation thinning must be at least 1".into(),
            ));
        }
        let state_blocks = sites
            .iter()
            .map(|s| {
                Ok([
                    partition_cov(gamma.lambda1, &s.augmented)?,
                    partition_cov(gamma.lambda2, &s.augmented)?,
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let draws = vec![Vec::new(); sites.len()];
        Ok(Interpolator {
            sites,
            gamma,
            init,
            every,
            seen: 0,
            rng,
            state_blocks,
            t_index,
            draws,
        })
    }

    pub fn sites(&self) -> &[UngaugedSite] {
        &self.sites
    }

    pub fn into_series(self) -> Vec<PredictiveSeries> {
        self.sites
            .into_iter()
            .zip(self.draws)
            .map(|(s, draws)| PredictiveSeries {
                site: s.id,
                t_index: self.t_index.clone(),
                draws,
            })
            .collect()
    }

    fn predict_path(&mut self, k: usize, view: &IterationView<'_>) -> Result<Vec<f64>> {
        let traj = view.trajectory;
        let big_t = traj.n_times();
        let site = &self.sites[k];
        let n = traj.n_sites();
        let mut resp_blocks: BTreeMap<usize, KrigingBlocks> = BTreeMap::new();
        for (slot, l) in view.schedule.values().into_iter().enumerate() {
            resp_blocks.insert(slot, partition_cov(l, &site.augmented)?);
        }

        let mut alpha_s = [0.0; 2];
        for j in 1..=2 {
            let (block_mean, block_var) = self.init.alpha_block_moments(j);
            let start = if j == 1 { 1 } else { 1 + n };
            let m0_alpha = self.init.m0.rows(start, n).into_owned();
            let (m, v) = initial_ungauged_moments(
                &traj.alpha(j, 0),
                &m0_alpha,
                block_mean,
                block_var,
                view.sigma2,
                &self.state_blocks[k][j - 1],
            );
            let z: f64 = self.rng.sample(StandardNormal);
            alpha_s[j - 1] = m + v.sqrt() * z;
        }

        let mut path = Vec::with_capacity(big_t);
        let mut prev = [traj.alpha(1, 0), traj.alpha(2, 0)];
        for col in 0..big_t {
            let cur = [traj.alpha(1, col + 1), traj.alpha(2, col + 1)];
            for j in 0..2 {
                alpha_s[j] = sample_ungauged_state(
                    alpha_s[j],
                    &cur[j],
                    &prev[j],
                    self.gamma.tau2(j + 1),
                    view.sigma2,
                    &self.state_blocks[k][j],
                    &mut self.rng,
                );
            }
            let y = view.filled.column(col).into_owned();
            let g = GaugedSlice {
                t: self.t_index[col],
                beta: traj.beta(col + 1),
                alpha1: &cur[0],
                alpha2: &cur[1],
                y: &y,
            };
            let blocks = &resp_blocks[&view.schedule.slot(col)];
            path.push(predict_response(
                &g,
                (alpha_s[0], alpha_s[1]),
                view.phase,
                view.sigma2,
                blocks,
                &mut self.rng,
            ));
            prev = cur;
        }
        Ok(path)
    }
}

impl ChainObserver for Interpolator {
    fn observe(&mut self, view: &IterationView<'_>) -> Result<()> {
        self.seen += 1;
        if !self.seen.is_multiple_of(self.every) {
            return Ok(());
        }
        if view.trajectory.n_times() != self.t_index.len() {
            return Err(DlmError::Contract(format!(
                "trajectory covers {} hours, interpolator expects {}",
                view.trajectory.n_times(),
                self.t_index.len()
            )));
        }
        for k in 0..self.sites.len() {
            let path = self.predict_path(k, view)?;
            self.draws[k].push(path);
        }
        Ok(())
    }
}
