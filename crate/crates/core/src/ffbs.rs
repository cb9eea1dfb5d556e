//! Kalman forward filter and backward sampler for the identity-evolution DLM.
//!
//! Every covariance is carried as a scale matrix with `sigma2` factored out:
//! the filter itself never sees `sigma2`, and the backward pass multiplies the
//! conditional scales by it.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{DlmError, Result};
use crate::linalg::{cholesky_jittered, log_det, sample_mvn, symmetrize};
use crate::model::{
    design_matrix, state_noise_cov, Gamma, InitialState, ObsCorrelation, ObservationPanel, Phase,
    RangeSchedule,
};

/// Prior, evolution and observation scales of one DLM.
#[derive(Debug, Clone)]
pub struct DlmSystem {
    pub m0: DVector<f64>,
    pub c0: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub obs: ObsCorrelation,
}

impl DlmSystem {
    pub fn new(
        init: &InitialState,
        gamma: &Gamma,
        v: &DMatrix<f64>,
        schedule: RangeSchedule,
    ) -> Result<Self> {
        let w = state_noise_cov(gamma, v)?;
        let obs = ObsCorrelation::new(v, schedule)?;
        DlmSystem::from_parts(init.m0.clone(), init.c0.clone(), w, obs)
    }

    pub fn from_parts(
        m0: DVector<f64>,
        c0: DMatrix<f64>,
        w: DMatrix<f64>,
        obs: ObsCorrelation,
    ) -> Result<Self> {
        let dim = m0.len();
        let n = obs.at(0).nrows();
        if dim != 2 * n + 1 || c0.shape() != (dim, dim) || w.shape() != (dim, dim) {
            return Err(DlmError::Contract(format!(
                "system dimensions disagree: m0 {dim}, C0 {:?}, W {:?}, {n} sites",
                c0.shape(),
                w.shape()
            )));
        }
        Ok(DlmSystem { m0, c0, w, obs })
    }

    pub fn n_sites(&self) -> usize {
        self.obs.at(0).nrows()
    }

    pub fn dim(&self) -> usize {
        self.m0.len()
    }

    /// Same system with a different observation range schedule.
    pub fn with_schedule(&self, v: &DMatrix<f64>, schedule: RangeSchedule) -> Result<Self> {
        Ok(DlmSystem {
            obs: ObsCorrelation::new(v, schedule)?,
            ..self.clone()
        })
    }
}

/// Filtered moments at one hour.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    /// Posterior mean `m_t`.
    pub m: DVector<f64>,
    /// Posterior covariance scale `C_t`.
    pub c: DMatrix<f64>,
    /// One-step forecast error `e_t = y_t - F_t m_{t-1}`.
    pub e: DVector<f64>,
    /// Forecast error covariance scale `Q_t`.
    pub q: DMatrix<f64>,
}

/// Output of [`forward_filter`].
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub initial_mean: DVector<f64>,
    pub initial_cov: DMatrix<f64>,
    pub states: Vec<FilterState>,
    pub w: DMatrix<f64>,
    /// `sum_t log |Q_t|`.
    pub log_det_sum: f64,
    /// `sum_t e_t' Q_t^{-1} e_t`.
    pub quad_form_sum: f64,
    /// Largest `|Q_t - Q_t'|` seen before symmetrization.
    pub max_q_asymmetry: f64,
}

impl ForwardPass {
    pub fn n_times(&self) -> usize {
        self.states.len()
    }

    pub fn dim(&self) -> usize {
        self.initial_mean.len()
    }

    /// Number of scalar observations `n T`.
    pub fn n_obs(&self) -> usize {
        self.states.len() * self.states.first().map_or(0, |s| s.e.len())
    }
}

/// Runs the Kalman filter over a fully filled `n x T` response matrix.
///
/// `t_index` gives the absolute hour of every column (it drives the harmonic
/// regressors); the range schedule in `system` is indexed by column.
pub fn forward_filter(
    y: &DMatrix<f64>,
    t_index: &[i64],
    system: &DlmSystem,
    phase: Phase,
) -> Result<ForwardPass> {
    let n = system.n_sites();
    if y.nrows() != n || t_index.len() != y.ncols() {
        return Err(DlmError::Contract(format!(
            "responses {:?} with {} time stamps do not fit a {n}-site system",
            y.shape(),
            t_index.len()
        )));
    }
    if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
        return Err(DlmError::Contract(format!(
            "response at site {}, column {} is missing or not finite; impute before filtering",
            pos % n,
            pos / n
        )));
    }

    let mut m = system.m0.clone();
    let mut c = system.c0.clone();
    let mut states = Vec::with_capacity(y.ncols());
    let (mut log_det_sum, mut quad_form_sum, mut max_q_asymmetry) = (0.0, 0.0, 0.0f64);

    for (col, &t) in t_index.iter().enumerate() {
        let step = col + 1;
        let mut r = &c + &system.w;
        symmetrize(&mut r);
        let f = design_matrix(t, n, phase);
        let fr = &f * &r;
        let mut q = &fr * f.transpose() + system.obs.at(col);
        max_q_asymmetry = max_q_asymmetry.max((&q - q.transpose()).amax());
        symmetrize(&mut q);

        let e = y.column(col) - &f * &m;
        let chol = cholesky_jittered(&q, step, "forecast covariance Q_t")?;
        let l = chol.l();
        // K = L^{-1} F R and z = L^{-1} e, so that R F' Q^{-1} e = K' z
        let k = l
            .solve_lower_triangular(&fr)
            .ok_or_else(|| DlmError::numerical(step, "triangular solve for the gain"))?;
        let z = l
            .solve_lower_triangular(&e)
            .ok_or_else(|| DlmError::numerical(step, "triangular solve for the innovation"))?;

        log_det_sum += log_det(&chol);
        quad_form_sum += z.norm_squared();

        m += k.transpose() * &z;
        c = r - k.transpose() * &k;
        symmetrize(&mut c);

        if !(m.iter().all(|v| v.is_finite()) && c.iter().all(|v| v.is_finite())) {
            return Err(DlmError::numerical(step, "filtered moments are not finite"));
        }
        states.push(FilterState {
            m: m.clone(),
            c: c.clone(),
            e,
            q,
        });
    }
    if !(log_det_sum.is_finite() && quad_form_sum.is_finite()) {
        return Err(DlmError::numerical(
            y.ncols(),
            "likelihood accumulators are not finite",
        ));
    }

    Ok(ForwardPass {
        initial_mean: system.m0.clone(),
        initial_cov: system.c0.clone(),
        states,
        w: system.w.clone(),
        log_det_sum,
        quad_form_sum,
        max_q_asymmetry,
    })
}

/// [`forward_filter`] on a panel with nothing missing.
pub fn forward_filter_panel(
    panel: &ObservationPanel,
    system: &DlmSystem,
    phase: Phase,
) -> Result<ForwardPass> {
    if panel.n_missing() > 0 {
        return Err(DlmError::Contract(format!(
            "panel has {} unfilled entries",
            panel.n_missing()
        )));
    }
    forward_filter(panel.values(), panel.t_index(), system, phase)
}

/// A sampled trajectory `x_0, x_1, ..., x_T`, one column per hour.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    x: DMatrix<f64>,
}

impl StateTrajectory {
    pub fn from_columns(x: DMatrix<f64>) -> Result<Self> {
        if x.ncols() == 0 || x.nrows().is_multiple_of(2) {
            return Err(DlmError::Contract(format!(
                "trajectory shape {:?} is not (2n+1) x (T+1)",
                x.shape()
            )));
        }
        Ok(StateTrajectory { x })
    }

    /// Number of hours `T`, not counting `x_0`.
    pub fn n_times(&self) -> usize {
        self.x.ncols() - 1
    }

    pub fn n_sites(&self) -> usize {
        (self.x.nrows() - 1) / 2
    }

    /// State at hour `t` in `0..=T`; `t = 0` is the initial state.
    pub fn at(&self, t: usize) -> DVector<f64> {
        self.x.column(t).into_owned()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.x[(0, t)]
    }

    /// `alpha_j` at hour `t`, all sites.
    pub fn alpha(&self, j: usize, t: usize) -> DVector<f64> {
        let n = self.n_sites();
        let start = if j == 1 { 1 } else { 1 + n };
        self.x.view((start, t), (n, 1)).column(0).into_owned()
    }
}

/// Smoothing gain `B = C (C + W)^{-1}` and the conditional scale `C - B C`.
///
/// When `C + W` vanishes the next state carries no information and both are 0.
fn backward_kernel(
    c: &DMatrix<f64>,
    w: &DMatrix<f64>,
    step: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let dim = c.nrows();
    let mut r = c + w;
    symmetrize(&mut r);
    if r.amax() == 0.0 {
        return Ok((DMatrix::zeros(dim, dim), DMatrix::zeros(dim, dim)));
    }
    let chol = cholesky_jittered(&r, step, "one-step prior covariance C_t + W")?;
    // (C+W)^{-1} C, transposed, is C (C+W)^{-1} since both are symmetric
    let b = chol.solve(c).transpose();
    let mut h = c - &b * c;
    symmetrize(&mut h);
    Ok((b, h))
}

/// Draws `x_{0:T}` from its joint smoothing distribution given `sigma2`.
pub fn backward_sample<R: Rng + ?Sized>(
    pass: &ForwardPass,
    sigma2: f64,
    rng: &mut R,
) -> Result<StateTrajectory> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(DlmError::domain("sigma2", sigma2, "must be finite and > 0"));
    }
    let dim = pass.dim();
    let big_t = pass.n_times();
    if big_t == 0 {
        return Err(DlmError::Contract("forward pass has no time steps".into()));
    }
    if pass.w.shape() != (dim, dim)
        || pass
            .states
            .iter()
            .any(|s| s.m.len() != dim || s.c.shape() != (dim, dim))
    {
        return Err(DlmError::Contract(
            "forward pass dimensions are inconsistent".into(),
        ));
    }

    let mut x = DMatrix::zeros(dim, big_t + 1);
    let last = &pass.states[big_t - 1];
    let xt = sample_mvn(
        &last.m,
        &(&last.c * sigma2),
        rng,
        big_t,
        "final smoothing covariance",
    )?;
    x.set_column(big_t, &xt);

    for t in (0..big_t).rev() {
        let (m, c) = if t == 0 {
            (&pass.initial_mean, &pass.initial_cov)
        } else {
            (&pass.states[t - 1].m, &pass.states[t - 1].c)
        };
        let (b, h) = backward_kernel(c, &pass.w, t)?;
        let next = x.column(t + 1).into_owned();
        let mean = m + &b * (next - m);
        let draw = sample_mvn(
            &mean,
            &(h * sigma2),
            rng,
            t,
            "backward conditional covariance",
        )?;
        x.set_column(t, &draw);
    }
    Ok(StateTrajectory { x })
}

/// Smoothed means and covariance scales for `t = 0..=T`.
#[derive(Debug, Clone)]
pub struct SmoothedMoments {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
}

/// Rauch-Tung-Striebel smoother over a forward pass (covariances are scales).
pub fn smoothed_moments(pass: &ForwardPass) -> Result<SmoothedMoments> {
    let big_t = pass.n_times();
    if big_t == 0 {
        return Err(DlmError::Contract("forward pass has no time steps".into()));
    }
    let mut means = vec![DVector::zeros(pass.dim()); big_t + 1];
    let mut covs = vec![DMatrix::zeros(pass.dim(), pass.dim()); big_t + 1];
    means[big_t] = pass.states[big_t - 1].m.clone();
    covs[big_t] = pass.states[big_t - 1].c.clone();
    for t in (0..big_t).rev() {
        let (m, c) = if t == 0 {
            (&pass.initial_mean, &pass.initial_cov)
        } else {
            (&pass.states[t - 1].m, &pass.states[t - 1].c)
        };
        let (b, _) = backward_kernel(c, &pass.w, t)?;
        let r = c + &pass.w;
        means[t] = m + &b * (&means[t + 1] - m);
        let mut s = c + &b * (&covs[t + 1] - r) * b.transpose();
        symmetrize(&mut s);
        covs[t] = s;
    }
    Ok(SmoothedMoments { means, covs })
}
