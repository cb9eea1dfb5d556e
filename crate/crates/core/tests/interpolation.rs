mod common;

use common::condition_dense;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use stdlm_core::gibbs::{run_chain_with, ChainMode};
use stdlm_core::interpolate::{
    coverage, initial_ungauged_moments, partition_cov, response_moments, ungauged_state_moments,
    GaugedSlice, Interpolator, PredictiveSeries, UngaugedSite,
};
use stdlm_core::model::{
    DistanceMetric, Gamma, ModelConfig, ObservationPanel, Phase, RangeSchedule, Site, StationSet,
};
use stdlm_core::synthetic::{simulate, SyntheticSpec};

fn network(seed: u64, n: usize) -> StationSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites = (0..n)
        .map(|i| {
            Site::new(
                format!("g{i}"),
                [rng.random_range(0.0..60.0), rng.random_range(0.0..60.0)],
            )
        })
        .collect();
    StationSet::new(sites, DistanceMetric::Euclidean).unwrap()
}

fn normals(k: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal))
}

#[test]
fn kriging_blocks_match_explicit_inverse() {
    let st = network(1, 5);
    let site = UngaugedSite::new("u", [31.0, 22.0], &st).unwrap();
    let theta = 25.0;
    let b = partition_cov(theta, &site.augmented).unwrap();
    let s = site.augmented.map(|d| (-d / theta).exp());
    let s22_inv = s.view((1, 1), (5, 5)).into_owned().try_inverse().unwrap();
    let s12 = s.view((1, 0), (5, 1)).into_owned();
    let w = &s22_inv * &s12;
    let schur = 1.0 - (s12.transpose() * &w)[(0, 0)];
    assert_eq!(b.s11, 1.0);
    assert!((&b.weights - w.column(0)).amax() < 1e-12);
    assert!((b.schur - schur).abs() < 1e-12);
    assert!(b.schur > 0.0 && b.collocated.is_none());
}

#[test]
fn state_step_matches_joint_increment_conditioning() {
    let st = network(2, 4);
    let site = UngaugedSite::new("u", [12.0, 40.0], &st).unwrap();
    let (tau2, lambda, sigma2) = (0.0003, 25.0, 0.4);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let alpha_prev = normals(4, &mut rng);
    let alpha_t = &alpha_prev + normals(4, &mut rng) * 0.02;
    let alpha_prev_s = 0.37;

    let blocks = partition_cov(lambda, &site.augmented).unwrap();
    let (m, v) = ungauged_state_moments(alpha_prev_s, &alpha_t, &alpha_prev, tau2, sigma2, &blocks);

    let joint = site.augmented.map(|d| sigma2 * tau2 * (-d / lambda).exp());
    let (cm, cv) = condition_dense(
        &DVector::zeros(5),
        &joint,
        &[0],
        &[1, 2, 3, 4],
        &(&alpha_t - &alpha_prev),
    );
    assert!((m - (alpha_prev_s + cm[0])).abs() < 1e-12);
    assert!((v - cv[(0, 0)]).abs() < 1e-12 * sigma2 * tau2 + 1e-18);
}

#[test]
fn response_matches_joint_residual_conditioning() {
    let st = network(4, 4);
    let site = UngaugedSite::new("u", [20.0, 20.0], &st).unwrap();
    let (lambda, sigma2) = (18.0, 0.3);
    let phase = Phase::new(2.5, 9.8);
    let t = 17;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a1 = normals(4, &mut rng) * 0.3;
    let a2 = normals(4, &mut rng) * 0.3;
    let y = normals(4, &mut rng) + DVector::from_element(4, 2.8);
    let beta = 2.7;
    let alpha_s = (0.2, -0.1);
    let g = GaugedSlice {
        t,
        beta,
        alpha1: &a1,
        alpha2: &a2,
        y: &y,
    };
    let blocks = partition_cov(lambda, &site.augmented).unwrap();
    let (m, v) = response_moments(&g, alpha_s, phase, sigma2, &blocks);

    let (s1, s2) = phase.regressors(t);
    let mean = DVector::from_fn(5, |i, _| {
        if i == 0 {
            beta + s1 * alpha_s.0 + s2 * alpha_s.1
        } else {
            beta + s1 * a1[i - 1] + s2 * a2[i - 1]
        }
    });
    let cov = site.augmented.map(|d| sigma2 * (-d / lambda).exp());
    let (cm, cv) = condition_dense(&mean, &cov, &[0], &[1, 2, 3, 4], &y);
    assert!((m - cm[0]).abs() < 1e-12 * cm[0].abs().max(1.0));
    assert!((v - cv[(0, 0)]).abs() < 1e-12);
}

#[test]
fn initial_coefficients_match_joint_prior_conditioning() {
    let st = network(6, 3);
    let site = UngaugedSite::new("u", [30.0, 10.0], &st).unwrap();
    let (lambda, sigma2, block_mean, block_var) = (25.0, 0.5, -0.75, 0.01);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let alpha0 = DVector::from_element(3, block_mean) + normals(3, &mut rng) * 0.05;
    let m0 = DVector::from_element(3, block_mean);
    let blocks = partition_cov(lambda, &site.augmented).unwrap();
    let (m, v) = initial_ungauged_moments(&alpha0, &m0, block_mean, block_var, sigma2, &blocks);
    let cov = site
        .augmented
        .map(|d| sigma2 * block_var * (-d / lambda).exp());
    let (cm, cv) = condition_dense(
        &DVector::from_element(4, block_mean),
        &cov,
        &[0],
        &[1, 2, 3],
        &alpha0,
    );
    assert!((m - cm[0]).abs() < 1e-12);
    assert!((v - cv[(0, 0)]).abs() < 1e-14);
}

#[test]
fn collocated_site_reproduces_gauged_series_through_a_chain() {
    let st = network(8, 3);
    let spec = SyntheticSpec {
        gamma: Gamma::reference(),
        sigma2: 0.05,
        lambda: 25.0,
        phase: Phase::new(2.5, 9.8),
        means: [2.85, -0.75, -0.08],
        beta_var: 1.0,
        alpha_var: 0.01,
        n_times: 36,
        first_hour: 1,
        static_states: false,
    };
    let data = simulate(&st, &spec, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let mut mask = DMatrix::from_element(3, 36, true);
    mask[(1, 4)] = false;
    mask[(1, 20)] = false;
    let panel = ObservationPanel::new(data.y.clone(), mask, data.t_index.clone()).unwrap();
    let mut cfg = ModelConfig::reference(3);
    cfg.iterations = 30;
    cfg.burn_in = 10;
    let target = st.sites()[1].coord;
    let sites = vec![UngaugedSite::new("twin", target, &st).unwrap()];
    let mut interp = Interpolator::new(
        sites,
        cfg.gamma,
        cfg.init.clone(),
        data.t_index.clone(),
        5,
        1,
        1,
    )
    .unwrap();
    run_chain_with(&panel, &st, &cfg, &ChainMode::FullMh, 0, &mut interp).unwrap();
    let series = interp.into_series().remove(0);
    assert_eq!(series.draws.len(), 20);
    for draw in &series.draws {
        for col in 0..36 {
            if panel.is_observed(1, col) {
                assert_eq!(draw[col], data.y[(1, col)]);
            } else {
                assert!(draw[col].is_finite());
            }
        }
    }
    // imputed hours follow the imputation, which varies between iterations
    assert!(series.draws.iter().any(|d| d[4] != series.draws[0][4]));
}

#[test]
fn coverage_counts_inclusive_bounds_per_week() {
    let hours = 2 * 168;
    // draws 0..=100 at every hour give a 50% interval [25, 75]
    let series = PredictiveSeries {
        site: "u".into(),
        t_index: (1..=hours as i64).collect(),
        draws: (0..=100).map(|k| vec![k as f64; hours]).collect(),
    };
    let mut truth = vec![50.0; hours];
    truth[0] = 75.0;
    truth[1] = 75.000001;
    truth[200] = 10.0;
    let mut observed = vec![true; hours];
    observed[2] = false;
    let r = coverage(&series, &truth, &observed, &[0.5]).unwrap();
    assert_eq!(r.levels[0].evaluated, hours - 1);
    assert_eq!(r.levels[0].covered, hours - 3);
    assert_eq!(r.weekly.len(), 2);
    assert_eq!((r.weekly[0].covered, r.weekly[0].evaluated), (166, 167));
    assert_eq!((r.weekly[1].covered, r.weekly[1].evaluated), (167, 168));

    let s = series.summarize(&[0.5, 0.95]).unwrap();
    assert_eq!(s.median[0], 50.0);
    assert_eq!((s.bands[0].lower[0], s.bands[0].upper[0]), (25.0, 75.0));
    assert!((s.bands[1].lower[0] - 2.5).abs() < 1e-12);
    assert!((s.bands[1].upper[0] - 97.5).abs() < 1e-12);
}

#[test]
fn fixed_schedule_feeds_weekly_response_blocks() {
    let st = network(10, 3);
    let spec = SyntheticSpec {
        gamma: Gamma::reference(),
        sigma2: 0.05,
        lambda: 25.0,
        phase: Phase::new(2.5, 9.8),
        means: [2.85, -0.75, -0.08],
        beta_var: 1.0,
        alpha_var: 0.01,
        n_times: 2 * 168,
        first_hour: 1,
        static_states: true,
    };
    let data = simulate(&st, &spec, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    let mask = DMatrix::from_element(3, 2 * 168, true);
    let panel = ObservationPanel::new(data.y.clone(), mask, data.t_index.clone()).unwrap();
    let mut cfg = ModelConfig::reference(3);
    cfg.iterations = 6;
    cfg.burn_in = 2;
    let sites = vec![UngaugedSite::new("u", [25.0, 25.0], &st).unwrap()];
    let mut interp = Interpolator::new(
        sites,
        cfg.gamma,
        cfg.init.clone(),
        data.t_index.clone(),
        5,
        1,
        2,
    )
    .unwrap();
    let mode = ChainMode::FixedLambda(RangeSchedule::Weekly(vec![20.0, 30.0]));
    run_chain_with(&panel, &st, &cfg, &mode, 0, &mut interp).unwrap();
    let series = interp.into_series().remove(0);
    assert_eq!(series.draws.len(), 2);
    assert!(series.draws.iter().flatten().all(|v| v.is_finite()));
}
