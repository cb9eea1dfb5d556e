//! Metropolis-within-Gibbs sampler over `(lambda, sigma2, x)`, the missing
//! responses and the phase pair.
//!
//! One iteration runs three blocks:
//!
//! 1. `lambda` by a log-scale random-walk Metropolis step on its marginal
//!    posterior (states and `sigma2` integrated out by the filter), then
//!    `sigma2` from its conjugate inverse gamma, then `x_{0:T}` by FFBS;
//! 2. the missing responses from their Gaussian conditionals;
//! 3. the phase pair as the componentwise median of per-hour draws.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, DlmError, Result};
use crate::ffbs::{backward_sample, forward_filter, DlmSystem, ForwardPass, StateTrajectory};
use crate::linalg::{cholesky_jittered, condition_gaussian, sample_mvn};
use crate::model::{
    apply_design, harmonic_basis, InverseGamma, ModelConfig, ObsCorrelation, ObservationPanel,
    Phase, PhasePrior, RangeSchedule, StationSet,
};
use crate::stats::median;

/// The two scalars of a forward pass that the `lambda` and `sigma2`
/// posteriors depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accumulators {
    pub log_det_sum: f64,
    pub quad_form_sum: f64,
    /// `n T`.
    pub n_obs: usize,
}

impl From<&ForwardPass> for Accumulators {
    fn from(p: &ForwardPass) -> Self {
        Accumulators {
            log_det_sum: p.log_det_sum,
            quad_form_sum: p.quad_form_sum,
            n_obs: p.n_obs(),
        }
    }
}

/// Log of the unnormalized marginal posterior of `lambda`:
/// `log IG(lambda) - sum log|Q_t| / 2 - (a + nT/2) log(b + sum e'Q^{-1}e / 2)`.
pub fn lambda_log_target(
    lambda: f64,
    acc: &Accumulators,
    prior_lambda: &InverseGamma,
    prior_sigma2: &InverseGamma,
) -> Result<f64> {
    ensure_positive("lambda", lambda)?;
    if !(acc.log_det_sum.is_finite() && acc.quad_form_sum.is_finite()) || acc.quad_form_sum < 0.0 {
        return Err(DlmError::numerical(
            0,
            format!(
                "accumulators (log det {}, quadratic form {}) are not usable",
                acc.log_det_sum, acc.quad_form_sum
            ),
        ));
    }
    let shape = prior_sigma2.shape + acc.n_obs as f64 / 2.0;
    let rate = prior_sigma2.scale + 0.5 * acc.quad_form_sum;
    Ok(prior_lambda.ln_kernel(lambda) - 0.5 * acc.log_det_sum - shape * rate.ln())
}

/// Current value of the Metropolis chain for `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MhState {
    pub lambda: f64,
    /// Variance of the log-scale proposal increment.
    pub tuning: f64,
    pub proposed: usize,
    pub accepted: usize,
}

impl MhState {
    pub fn new(lambda: f64, tuning: f64) -> Result<Self> {
        ensure_positive("lambda", lambda)?;
        ensure_positive("tuning", tuning)?;
        Ok(MhState {
            lambda,
            tuning,
            proposed: 0,
            accepted: 0,
        })
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Accept/reject for a given proposal increment `z` and uniform `u`.
///
/// `lambda* = lambda e^z` is accepted when
/// `ln u < target(lambda*) - target(lambda) + ln lambda* - ln lambda`.
pub fn mh_decide(
    state: MhState,
    z: f64,
    u: f64,
    current_target: f64,
    proposal_target: f64,
) -> (MhState, bool) {
    let proposal = state.lambda * z.exp();
    let log_ratio = proposal_target - current_target + z;
    let accept = proposal > 0.0 && proposal.is_finite() && u.ln() < log_ratio;
    let mut next = state;
    next.proposed += 1;
    if accept {
        next.lambda = proposal;
        next.accepted += 1;
    }
    (next, accept)
}

/// One Metropolis step with proposal `lambda e^Z`, `Z ~ N(0, tuning)`.
///
/// Always consumes one normal and one uniform from `rng`.
pub fn mh_lambda_step<R, F>(state: MhState, mut log_target: F, rng: &mut R) -> Result<MhState>
where
    R: Rng + ?Sized,
    F: FnMut(f64) -> Result<f64>,
{
    let z: f64 = state.tuning.sqrt() * rng.sample::<f64, _>(StandardNormal);
    let u: f64 = rng.random();
    let current = log_target(state.lambda)?;
    let proposal = log_target(state.lambda * z.exp())?;
    Ok(mh_decide(state, z, u, current, proposal).0)
}

/// Conditional posterior `IG(a + nT/2, b + sum e'Q^{-1}e / 2)` of `sigma2`.
pub fn sigma2_posterior(acc: &Accumulators, prior: &InverseGamma) -> Result<InverseGamma> {
    if !acc.quad_form_sum.is_finite() || acc.quad_form_sum < 0.0 {
        return Err(DlmError::numerical(
            0,
            format!(
                "quadratic form {} is negative or not finite",
                acc.quad_form_sum
            ),
        ));
    }
    InverseGamma::new(
        prior.shape + acc.n_obs as f64 / 2.0,
        prior.scale + 0.5 * acc.quad_form_sum,
    )
}

pub fn sigma2_gibbs<R: Rng + ?Sized>(
    acc: &Accumulators,
    prior: &InverseGamma,
    rng: &mut R,
) -> Result<f64> {
    Ok(sigma2_posterior(acc, prior)?.sample(rng))
}

/// Moments of the missing entries of one response column.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMoments {
    pub missing: Vec<usize>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Gaussian conditional of the missing entries of `y_t ~ N(mean, sigma2 R)`
/// given the observed ones. With nothing observed this is the marginal.
pub fn conditional_moments(
    y: &DVector<f64>,
    observed: &[bool],
    mean: &DVector<f64>,
    corr: &DMatrix<f64>,
    sigma2: f64,
    step: usize,
) -> Result<ConditionalMoments> {
    let missing: Vec<usize> = (0..y.len()).filter(|&i| !observed[i]).collect();
    let obs: Vec<usize> = (0..y.len()).filter(|&i| observed[i]).collect();
    if missing.is_empty() {
        return Ok(ConditionalMoments {
            missing,
            mean: DVector::zeros(0),
            cov: DMatrix::zeros(0, 0),
        });
    }
    let value_b = DVector::from_iterator(obs.len(), obs.iter().map(|&i| y[i]));
    let (m, c) = condition_gaussian(mean, &(corr * sigma2), &missing, &obs, &value_b, step)?;
    Ok(ConditionalMoments {
        missing,
        mean: m,
        cov: c,
    })
}

/// Fills the missing entries of one column given the state `x_t`.
#[allow(clippy::too_many_arguments)]
pub fn impute_column<R: Rng + ?Sized>(
    y: &DVector<f64>,
    observed: &[bool],
    t: i64,
    x_t: &DVector<f64>,
    phase: Phase,
    corr: &DMatrix<f64>,
    sigma2: f64,
    rng: &mut R,
    step: usize,
) -> Result<DVector<f64>> {
    let n = y.len();
    let mean = apply_design(t, n, phase, x_t);
    let cm = conditional_moments(y, observed, &mean, corr, sigma2, step)?;
    let mut out = y.clone();
    if cm.missing.is_empty() {
        return Ok(out);
    }
    let draw = sample_mvn(&cm.mean, &cm.cov, rng, step, "missing-data conditional")?;
    for (k, &i) in cm.missing.iter().enumerate() {
        out[i] = draw[k];
    }
    Ok(out)
}

/// Redraws every missing entry of `filled` in place; observed entries are
/// left untouched.
pub fn impute_missing<R: Rng + ?Sized>(
    panel: &ObservationPanel,
    filled: &mut DMatrix<f64>,
    trajectory: &StateTrajectory,
    phase: Phase,
    obs: &ObsCorrelation,
    sigma2: f64,
    rng: &mut R,
) -> Result<()> {
    let n = panel.n_sites();
    for col in 0..panel.n_times() {
        let observed: Vec<bool> = (0..n).map(|i| panel.is_observed(i, col)).collect();
        if observed.iter().all(|o| *o) {
            continue;
        }
        let y = filled.column(col).into_owned();
        let new = impute_column(
            &y,
            &observed,
            panel.t_index()[col],
            &trajectory.at(col + 1),
            phase,
            obs.at(col),
            sigma2,
            rng,
            col + 1,
        )?;
        filled.set_column(col, &new);
    }
    Ok(())
}

/// Conjugate posterior of the phase pair from a single hour.
///
/// The residual `y_t - beta - cos(.) alpha1 - cos(.) alpha2` is regressed on
/// `(sin(.) alpha1, sin(.) alpha2)` with noise `sigma2 R`. Hours with
/// `t = 0 (mod 12)` carry no information on the phase and give `None`.
pub fn phase_posterior_at(
    t: i64,
    y: &DVector<f64>,
    x_t: &DVector<f64>,
    corr_chol: &Cholesky<f64, Dyn>,
    sigma2: f64,
    prior: &PhasePrior,
) -> Option<(Vector2<f64>, Matrix2<f64>)> {
    if t.rem_euclid(12) == 0 {
        return None;
    }
    let n = y.len();
    let (c1, s1) = harmonic_basis(t, 1);
    let (c2, s2) = harmonic_basis(t, 2);
    let mut x = DMatrix::zeros(n, 2);
    let mut r = DVector::zeros(n);
    for i in 0..n {
        let (a1, a2) = (x_t[1 + i], x_t[1 + n + i]);
        r[i] = y[i] - x_t[0] - c1 * a1 - c2 * a2;
        x[(i, 0)] = s1 * a1;
        x[(i, 1)] = s2 * a2;
    }
    let sx = corr_chol.solve(&x) / sigma2;
    let p_full = x.transpose() * &sx;
    let b_full = sx.transpose() * &r;
    let p = Matrix2::new(
        p_full[(0, 0)],
        p_full[(0, 1)],
        p_full[(1, 0)],
        p_full[(1, 1)],
    );
    let b = Vector2::new(b_full[0], b_full[1]);
    // (I + S0 P)^{-1} S0 stays defined when the prior covariance S0 is singular
    let a = Matrix2::identity() + prior.cov * p;
    let a_inv = a.try_inverse()?;
    let mut cov = a_inv * prior.cov;
    let off = 0.5 * (cov[(0, 1)] + cov[(1, 0)]);
    cov[(0, 1)] = off;
    cov[(1, 0)] = off;
    let mean = a_inv * (prior.mean + prior.cov * b);
    Some((mean, cov))
}

/// Draws one phase pair per informative hour and returns the componentwise
/// median.
pub fn sample_phase<R: Rng + ?Sized>(
    trajectory: &StateTrajectory,
    y: &DMatrix<f64>,
    t_index: &[i64],
    obs: &ObsCorrelation,
    sigma2: f64,
    prior: &PhasePrior,
    rng: &mut R,
) -> Result<Phase> {
    if t_index.iter().all(|t| t.rem_euclid(12) == 0) {
        return Err(DlmError::Configuration(
            "every hour is a multiple of 12; the phase pair cannot be sampled".into(),
        ));
    }
    let chols = obs
        .slots()
        .iter()
        .enumerate()
        .map(|(k, c)| cholesky_jittered(c, k, "observation correlation"))
        .collect::<Result<Vec<_>>>()?;
    let mut a1 = Vec::with_capacity(t_index.len());
    let mut a2 = Vec::with_capacity(t_index.len());
    for (col, &t) in t_index.iter().enumerate() {
        let Some((mean, cov)) = phase_posterior_at(
            t,
            &y.column(col).into_owned(),
            &trajectory.at(col + 1),
            &chols[obs.slot(col)],
            sigma2,
            prior,
        ) else {
            continue;
        };
        let draw = sample_mvn(
            &DVector::from_column_slice(mean.as_slice()),
            &DMatrix::from_column_slice(2, 2, cov.as_slice()),
            rng,
            col + 1,
            "phase posterior",
        )?;
        a1.push(draw[0]);
        a2.push(draw[1]);
    }
    Ok(Phase::new(median(&a1), median(&a2)))
}

/// How `lambda` is treated by the chain.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainMode {
    /// Sample `lambda` by Metropolis-Hastings.
    FullMh,
    /// Hold the observation range fixed at the given schedule.
    FixedLambda(RangeSchedule),
}

/// One retained iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawRecord {
    pub iteration: usize,
    pub lambda: f64,
    pub sigma2: f64,
    pub a1: f64,
    pub a2: f64,
    pub accepted: bool,
}

/// Thinned snapshot of the states and imputed responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub iteration: usize,
    pub states: DMatrix<f64>,
    /// Imputed values in column-major order of the missing entries.
    pub imputed: Vec<f64>,
}

/// Output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub records: Vec<DrawRecord>,
    pub snapshots: Vec<Snapshot>,
    pub accept_count: usize,
    pub iterations: usize,
    pub burn_in: usize,
    /// Acceptance rate over all iterations; 1 in fixed-lambda mode.
    pub acceptance_rate: f64,
}

impl PosteriorDraws {
    pub fn lambdas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.lambda).collect()
    }

    pub fn sigma2s(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.sigma2).collect()
    }

    pub fn a1s(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.a1).collect()
    }

    pub fn a2s(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.a2).collect()
    }
}

/// Full state of the chain after a retained iteration.
pub struct IterationView<'a> {
    pub iteration: usize,
    pub lambda: f64,
    pub sigma2: f64,
    pub phase: Phase,
    pub schedule: &'a RangeSchedule,
    pub trajectory: &'a StateTrajectory,
    /// Responses with the current imputations.
    pub filled: &'a DMatrix<f64>,
}

/// Receives every post-burn-in iteration.
pub trait ChainObserver {
    fn observe(&mut self, view: &IterationView<'_>) -> Result<()>;
}

struct NoObserver;

impl ChainObserver for NoObserver {
    fn observe(&mut self, _: &IterationView<'_>) -> Result<()> {
        Ok(())
    }
}

/// Runs one chain on the default random stream.
pub fn run_chain(
    panel: &ObservationPanel,
    stations: &StationSet,
    cfg: &ModelConfig,
    mode: &ChainMode,
) -> Result<PosteriorDraws> {
    run_chain_with(panel, stations, cfg, mode, 0, &mut NoObserver)
}

/// Runs one chain seeded by `cfg.seed` on random stream `stream`, passing
/// every retained iteration to `observer`.
pub fn run_chain_with(
    panel: &ObservationPanel,
    stations: &StationSet,
    cfg: &ModelConfig,
    mode: &ChainMode,
    stream: u64,
    observer: &mut dyn ChainObserver,
) -> Result<PosteriorDraws> {
    let n = panel.n_sites();
    if stations.len() != n {
        return Err(DlmError::Contract(format!(
            "{} stations for a {n}-site panel",
            stations.len()
        )));
    }
    cfg.validate(n)?;
    if let ChainMode::FixedLambda(s) = mode {
        s.validate()?;
    }
    if panel.t_index().iter().all(|t| t.rem_euclid(12) == 0) {
        return Err(DlmError::Configuration(
            "every hour is a multiple of 12; the phase pair cannot be sampled".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let v = stations.distances();
    let base = DlmSystem::new(&cfg.init, &cfg.gamma, v, RangeSchedule::Constant(1.0))?;

    // initialization
    let mut lambda = match mode {
        ChainMode::FullMh => cfg.prior_lambda.sample(&mut rng),
        ChainMode::FixedLambda(s) => s.leading(),
    };
    let mut sigma2 = cfg.prior_sigma2.sample(&mut rng);
    // initial states are drawn for completeness; block 1 redraws them before use
    let _x_init = sample_mvn(
        &cfg.init.m0,
        &(&cfg.init.c0 * sigma2),
        &mut rng,
        0,
        "initial state prior",
    )?;
    let mut filled = panel.filled_with_site_means();
    let mut phase = Phase::new(cfg.prior_a.mean[0], cfg.prior_a.mean[1]);
    let mut mh = MhState::new(lambda, cfg.mh_tuning)?;

    let mut records = Vec::with_capacity(cfg.iterations - cfg.burn_in);
    let mut snapshots = Vec::new();
    let mut accept_count = 0usize;
    let missing_idx: Vec<(usize, usize)> = (0..panel.n_times())
        .flat_map(|c| (0..n).map(move |i| (i, c)))
        .filter(|&(i, c)| !panel.is_observed(i, c))
        .collect();

    for iter in 1..=cfg.iterations {
        let step = (|| -> Result<(StateTrajectory, RangeSchedule, bool)> {
            // block 1: lambda, sigma2, states
            let (pass, schedule, accepted) = match mode {
                ChainMode::FullMh => {
                    let mut cache: Vec<(f64, ForwardPass)> = Vec::with_capacity(2);
                    let before = mh.accepted;
                    mh = mh_lambda_step(
                        mh,
                        |l| {
                            let sys = base.with_schedule(v, RangeSchedule::Constant(l))?;
                            let pass = forward_filter(&filled, panel.t_index(), &sys, phase)?;
                            let target = lambda_log_target(
                                l,
                                &Accumulators::from(&pass),
                                &cfg.prior_lambda,
                                &cfg.prior_sigma2,
                            )?;
                            cache.push((l, pass));
                            Ok(target)
                        },
                        &mut rng,
                    )?;
                    lambda = mh.lambda;
                    let pass = cache
                        .into_iter()
                        .find(|(l, _)| *l == lambda)
                        .map(|(_, p)| p)
                        .expect("the chosen lambda was filtered");
                    (pass, RangeSchedule::Constant(lambda), mh.accepted > before)
                }
                ChainMode::FixedLambda(s) => {
                    let sys = base.with_schedule(v, s.clone())?;
                    let pass = forward_filter(&filled, panel.t_index(), &sys, phase)?;
                    (pass, s.clone(), true)
                }
            };
            sigma2 = sigma2_gibbs(&Accumulators::from(&pass), &cfg.prior_sigma2, &mut rng)?;
            let trajectory = backward_sample(&pass, sigma2, &mut rng)?;

            // block 2: missing responses
            let obs = ObsCorrelation::new(v, schedule.clone())?;
            impute_missing(
                panel,
                &mut filled,
                &trajectory,
                phase,
                &obs,
                sigma2,
                &mut rng,
            )?;

            // block 3: phase pair
            phase = sample_phase(
                &trajectory,
                &filled,
                panel.t_index(),
                &obs,
                sigma2,
                &cfg.prior_a,
                &mut rng,
            )?;
            Ok((trajectory, schedule, accepted))
        })();
        let (trajectory, schedule, accepted) = step.map_err(|e| e.at_iteration(iter))?;
        if accepted {
            accept_count += 1;
        }

        if iter > cfg.burn_in {
            records.push(DrawRecord {
                iteration: iter,
                lambda: schedule.leading(),
                sigma2,
                a1: phase.a1,
                a2: phase.a2,
                accepted,
            });
            let retained = iter - cfg.burn_in;
            if retained.is_multiple_of(cfg.thinning) {
                snapshots.push(Snapshot {
                    iteration: iter,
                    states: trajectory.matrix().clone(),
                    imputed: missing_idx.iter().map(|&(i, c)| filled[(i, c)]).collect(),
                });
            }
            observer
                .observe(&IterationView {
                    iteration: iter,
                    lambda: schedule.leading(),
                    sigma2,
                    phase,
                    schedule: &schedule,
                    trajectory: &trajectory,
                    filled: &filled,
                })
                .map_err(|e| e.at_iteration(iter))?;
        }
    }

    let acceptance_rate = accept_count as f64 / cfg.iterations as f64;
    Ok(PosteriorDraws {
        records,
        snapshots,
        accept_count,
        iterations: cfg.iterations,
        burn_in: cfg.burn_in,
        acceptance_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DistanceMetric, Site};

    #[test]
    fn posterior_shape_for_reference_dimensions() {
        let acc = Accumulators {
            log_det_sum: 0.0,
            quad_form_sum: 3.0,
            n_obs: 10 * 2880,
        };
        let prior = InverseGamma::new(2.0, 0.01).unwrap();
        let post = sigma2_posterior(&acc, &prior).unwrap();
        assert_eq!(post.shape, 2.0 + 14400.0);
        let zero = Accumulators {
            quad_form_sum: 0.0,
            ..acc
        };
        assert_eq!(sigma2_posterior(&zero, &prior).unwrap().scale, 0.01);
        let neg = Accumulators {
            quad_form_sum: -1.0,
            ..acc
        };
        assert!(sigma2_posterior(&neg, &prior).unwrap_err().is_numerical());
    }

    #[test]
    fn zero_increment_is_always_accepted() {
        let s = MhState::new(3.0, 0.1).unwrap();
        for u in [0.0, 0.3, 0.999_999] {
            let (next, acc) = mh_decide(s, 0.0, u, -2.0, -2.0);
            assert!(acc);
            assert_eq!(next.lambda, 3.0);
            assert_eq!(next.accepted, 1);
        }
    }

    #[test]
    fn lambda_target_is_pure() {
        let acc = Accumulators {
            log_det_sum: 1.5,
            quad_form_sum: 2.5,
            n_obs: 12,
        };
        let pl = InverseGamma::new(1.0, 5.0).unwrap();
        let ps = InverseGamma::new(2.0, 0.01).unwrap();
        let a = lambda_log_target(7.0, &acc, &pl, &ps).unwrap();
        let b = lambda_log_target(7.0, &acc, &pl, &ps).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(lambda_log_target(0.0, &acc, &pl, &ps).is_err());
        let bad = Accumulators {
            log_det_sum: f64::NAN,
            ..acc
        };
        assert!(lambda_log_target(7.0, &bad, &pl, &ps)
            .unwrap_err()
            .is_numerical());
    }

    #[test]
    fn no_missing_leaves_column_unchanged() {
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = DVector::from_element(7, 0.1);
        let corr = DMatrix::identity(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = impute_column(
            &y,
            &[true; 3],
            5,
            &x,
            Phase::new(1.0, 1.0),
            &corr,
            1.0,
            &mut rng,
            1,
        )
        .unwrap();
        assert_eq!(out, y);
    }

    #[test]
    fn phase_sampling_needs_an_informative_hour() {
        let stations = StationSet::new(
            vec![Site::new("a", [0.0, 0.0]), Site::new("b", [10.0, 0.0])],
            DistanceMetric::Euclidean,
        )
        .unwrap();
        let obs = ObsCorrelation::new(stations.distances(), RangeSchedule::Constant(20.0)).unwrap();
        let traj = StateTrajectory::from_columns(DMatrix::from_element(5, 2, 0.3)).unwrap();
        let y = DMatrix::from_element(2, 1, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = sample_phase(
            &traj,
            &y,
            &[12],
            &obs,
            1.0,
            &PhasePrior::reference(),
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, DlmError::Configuration(_)));
    }

    #[test]
    fn degenerate_phase_prior_returns_prior_mean() {
        let stations = StationSet::new(
            vec![Site::new("a", [0.0, 0.0]), Site::new("b", [10.0, 0.0])],
            DistanceMetric::Euclidean,
        )
        .unwrap();
        let obs = ObsCorrelation::new(stations.distances(), RangeSchedule::Constant(20.0)).unwrap();
        let traj = StateTrajectory::from_columns(DMatrix::from_fn(5, 26, |i, t| {
            0.1 * i as f64 - 0.01 * t as f64
        }))
        .unwrap();
        let y = DMatrix::from_fn(2, 25, |i, t| (i + t) as f64 * 0.05);
        let prior = PhasePrior {
            mean: Vector2::new(2.5, 9.8),
            cov: Matrix2::zeros(),
        };
        let t_index: Vec<i64> = (1..=25).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = sample_phase(&traj, &y, &t_index, &obs, 0.4, &prior, &mut rng).unwrap();
        assert_eq!((a.a1, a.a2), (2.5, 9.8));
    }
}
