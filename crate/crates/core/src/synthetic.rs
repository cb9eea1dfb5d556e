//! Data simulated from the model, for calibration studies and fixtures.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{DlmError, Result};
use crate::linalg::{psd_sqrt, standard_normals};
use crate::model::{
    apply_design, exp_correlation, state_noise_cov, Gamma, InitialState, Phase, StateLayout,
    StationSet,
};

/// Prior on `x_0` whose alpha blocks are spatially correlated,
/// `C0 = diag(beta_var, alpha_var exp(-V/lambda1), alpha_var exp(-V/lambda2))`.
///
/// This is the prior under which kriging the initial ungauged coefficients
/// from the gauged ones is exact.
pub fn coherent_initial_state(
    v: &DMatrix<f64>,
    gamma: &Gamma,
    means: [f64; 3],
    beta_var: f64,
    alpha_var: f64,
) -> Result<InitialState> {
    let n = v.nrows();
    let layout = StateLayout::new(n);
    let mut init = InitialState::block_constant(n, means, [beta_var, alpha_var, alpha_var]);
    for j in 1..=2 {
        let block = exp_correlation(v, gamma.lambda(j))? * alpha_var;
        let start = layout.alpha(j, 0);
        init.c0.view_mut((start, start), (n, n)).copy_from(&block);
    }
    Ok(init)
}

/// Settings of a simulated panel.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub gamma: Gamma,
    pub sigma2: f64,
    /// Range of the observation noise.
    pub lambda: f64,
    pub phase: Phase,
    /// Block means of `x_0`.
    pub means: [f64; 3],
    pub beta_var: f64,
    pub alpha_var: f64,
    pub n_times: usize,
    /// Absolute hour of the first column.
    pub first_hour: i64,
    /// Hold the states at `x_0` instead of letting them evolve.
    pub static_states: bool,
}

/// Simulated responses (`sites x T`) and states (`(2n+1) x (T+1)`).
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub y: DMatrix<f64>,
    pub states: DMatrix<f64>,
    pub t_index: Vec<i64>,
}

pub fn simulate<R: Rng + ?Sized>(
    stations: &StationSet,
    spec: &SyntheticSpec,
    rng: &mut R,
) -> Result<SyntheticData> {
    if spec.n_times == 0 {
        return Err(DlmError::Configuration(
            "simulation needs at least one hour".into(),
        ));
    }
    let v = stations.distances();
    let n = stations.len();
    let dim = 2 * n + 1;
    let init = coherent_initial_state(v, &spec.gamma, spec.means, spec.beta_var, spec.alpha_var)?;
    let x0_root = psd_sqrt(&(&init.c0 * spec.sigma2), 0, "initial state covariance")?;
    let w_root = psd_sqrt(
        &(state_noise_cov(&spec.gamma, v)? * spec.sigma2),
        0,
        "evolution covariance",
    )?;
    let nu_root = psd_sqrt(
        &(exp_correlation(v, spec.lambda)? * spec.sigma2),
        0,
        "observation covariance",
    )?;

    let mut states = DMatrix::zeros(dim, spec.n_times + 1);
    let mut x: DVector<f64> = &init.m0 + &x0_root * standard_normals(dim, rng);
    states.set_column(0, &x);
    let mut y = DMatrix::zeros(n, spec.n_times);
    let t_index: Vec<i64> = (0..spec.n_times as i64)
        .map(|k| spec.first_hour + k)
        .collect();
    for (col, &t) in t_index.iter().enumerate() {
        let omega = standard_normals(dim, rng);
        if !spec.static_states {
            x += &w_root * omega;
        }
        states.set_column(col + 1, &x);
        let nu = &nu_root * standard_normals(n, rng);
        y.set_column(col, &(apply_design(t, n, spec.phase, &x) + nu));
    }
    Ok(SyntheticData { y, states, t_index })
}
