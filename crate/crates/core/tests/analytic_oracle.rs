mod common;

use common::{poly_conditional_variance, poly_dlm_sigma};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use stdlm_core::analytic::{
    corollary1_check, corollary2_paradox, corollary2_threshold, finite_difference,
    misprinted_derivative, moment_structure, more_data_hour2_alternative, partial_derivative,
    theorem1, theorem2_gaps, Direction, PolyDlmParams, PredictiveVariance,
};

// (y01, y11, y02, y12) are indices 0..4 of the oracle covariance
const Y01: usize = 0;
const Y11: usize = 1;
const Y02: usize = 2;
const Y12: usize = 3;

struct OracleVariances {
    v01_11: f64,
    v02_12: f64,
    v01_11_12: f64,
    v02_11_12: f64,
}

fn oracle(p: &PolyDlmParams) -> OracleVariances {
    let s = poly_dlm_sigma(p.sigma_beta2, p.sigma_delta2, p.sigma_eps2, p.lambda, p.d01);
    OracleVariances {
        v01_11: poly_conditional_variance(&s, Y01, &[Y11]),
        v02_12: poly_conditional_variance(&s, Y02, &[Y12]),
        v01_11_12: poly_conditional_variance(&s, Y01, &[Y11, Y12]),
        v02_11_12: poly_conditional_variance(&s, Y02, &[Y11, Y12]),
    }
}

fn random_params(rng: &mut ChaCha8Rng) -> PolyDlmParams {
    let log_uniform =
        |rng: &mut ChaCha8Rng, lo: f64, hi: f64| (rng.random_range(lo.ln()..hi.ln())).exp();
    PolyDlmParams::new(
        log_uniform(rng, 0.01, 10.0),
        log_uniform(rng, 0.01, 10.0),
        log_uniform(rng, 0.01, 10.0),
        log_uniform(rng, 1.0, 200.0),
        rng.random_range(0.0..150.0),
    )
    .unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-12)
}

#[test]
fn closed_form_variances_match_joint_conditioning() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..2000 {
        let p = random_params(&mut rng);
        let r = theorem1(&p);
        let o = oracle(&p);
        assert!(close(r.var_y01_y11, o.v01_11, 1e-9), "{p:?}");
        assert!(close(r.var_y02_y12, o.v02_12, 1e-9), "{p:?}");
        assert!(close(r.var_y01_y11_y12, o.v01_11_12, 1e-9), "{p:?}");
        assert!(close(r.var_y02_y11_y12, o.v02_11_12, 1e-9), "{p:?}");
    }
}

#[test]
fn gaps_match_differences_of_conditioned_variances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..2000 {
        let p = random_params(&mut rng);
        let g = theorem2_gaps(&p);
        let o = oracle(&p);
        let diffs = [
            o.v01_11 - o.v01_11_12,
            o.v02_12 - o.v02_11_12,
            o.v02_11_12 - o.v01_11_12,
            o.v02_12 - o.v01_11,
        ];
        let margins = [diffs[0] - diffs[1], diffs[2] - diffs[3]];
        let scale = o.v02_12.max(p.sigma_eps2);
        for (k, want) in diffs.iter().chain(margins.iter()).enumerate() {
            let got = g.as_array()[k];
            // differences of O(1) variances carry their rounding
            assert!(
                (got - want).abs() <= 1e-9 * scale,
                "gap {k}: {got} vs {want} at {p:?}"
            );
        }
    }
}

#[test]
fn rho_squared_grouping_of_second_gap_is_wrong() {
    let p = PolyDlmParams::new(1.0, 0.5, 2.0, 25.0, 20.0).unwrap();
    let o = oracle(&p);
    let exact = o.v02_12 - o.v02_11_12;
    assert!(close(theorem2_gaps(&p).more_data_hour2, exact, 1e-10));
    assert!(!close(more_data_hour2_alternative(&p), exact, 1e-2));
}

#[test]
fn simulated_moments_match_moment_structure() {
    let p = PolyDlmParams::new(0.8, 0.2, 0.5, 25.0, 15.0).unwrap();
    let rho = p.rho();
    let sims = 1_000_000;
    let (t, s) = (3usize, 7usize);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut sums = [0.0f64; 3];
    let mut prods = [0.0f64; 3];
    let mut squares = [0.0f64; 3];
    let z = |rng: &mut ChaCha8Rng| rng.sample::<f64, _>(StandardNormal);
    for _ in 0..sims {
        let mut beta = p.sigma_beta2.sqrt() * z(&mut rng);
        let mut at_t = 0.0;
        for k in 1..=s {
            beta += p.sigma_delta2.sqrt() * z(&mut rng);
            if k == t {
                at_t = beta;
            }
        }
        let at_s = beta;
        let e = |rng: &mut ChaCha8Rng| {
            let a = z(rng);
            let b = rho * a + (1.0 - rho * rho).sqrt() * z(rng);
            (p.sigma_eps2.sqrt() * a, p.sigma_eps2.sqrt() * b)
        };
        let (e0t, e1t) = e(&mut rng);
        let (_, e1s) = e(&mut rng);
        let y = [at_t + e0t, at_t + e1t, at_s + e1s];
        // y0t, y1t, y1s: Var(y0t), Cov(y0t, y1t), Cov(y0t, y1s)
        for k in 0..3 {
            sums[k] += y[k];
            squares[k] += y[k] * y[k];
        }
        prods[0] += y[0] * y[0];
        prods[1] += y[0] * y[1];
        prods[2] += y[0] * y[2];
    }
    let nf = sims as f64;
    let mean = |k: usize| sums[k] / nf;
    let var = |k: usize| squares[k] / nf - mean(k) * mean(k);
    let checks = [
        (
            prods[0] / nf - mean(0) * mean(0),
            moment_structure(&p, 3, 3, true),
            0,
        ),
        (
            prods[1] / nf - mean(0) * mean(1),
            moment_structure(&p, 3, 3, false),
            1,
        ),
        (
            prods[2] / nf - mean(0) * mean(2),
            moment_structure(&p, 3, 7, false),
            2,
        ),
    ];
    for (got, want, k) in checks {
        // SE of a sample covariance under normality
        let se = ((var(0) * var(k) + want * want) / nf).sqrt();
        assert!(
            (got - want).abs() < 3.0 * se,
            "covariance {k}: {got} vs {want} (se {se})"
        );
    }
}

#[test]
fn paradox_condition_agrees_with_oracle_ordering() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut seen = [0usize; 2];
    for _ in 0..5000 {
        let p = random_params(&mut rng);
        let o = oracle(&p);
        let gap = o.v02_11_12 - o.v01_11;
        // skip draws whose ordering is within rounding of a tie
        if gap.abs() < 1e-9 * o.v02_12.max(1.0)
            || (p.sigma_eps2 / corollary2_threshold(&p) - 1.0).abs() < 1e-9
        {
            continue;
        }
        let paradox = corollary2_paradox(&p);
        assert_eq!(paradox, gap > 0.0, "{p:?}: gap {gap}");
        seen[paradox as usize] += 1;
    }
    assert!(seen[0] > 100 && seen[1] > 100, "{seen:?}");
    let collocated = PolyDlmParams::new(0.1, 1.0, 5.0, 25.0, 0.0).unwrap();
    assert!(!corollary2_paradox(&collocated));
}

#[test]
fn derivatives_agree_with_central_differences_on_a_grid() {
    for &sb in &[0.1, 1.0, 5.0] {
        for &sd in &[0.05, 0.5, 3.0] {
            for &se in &[0.1, 1.0, 8.0] {
                for &lambda in &[5.0, 25.0, 120.0] {
                    for &d in &[0.0, 3.0, 30.0, 100.0] {
                        let p = PolyDlmParams::new(sb, sd, se, lambda, d).unwrap();
                        for dir in Direction::ALL {
                            for c in corollary1_check(&p, dir) {
                                assert!(c.agrees, "{c:?} at {p:?}");
                                assert!(c.monotone, "{c:?} at {p:?}");
                            }
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn typeset_derivatives_disagree_with_central_differences() {
    let p = PolyDlmParams::new(1.0, 0.5, 2.0, 25.0, 10.0).unwrap();
    for (which, dir) in [
        (PredictiveVariance::Y01GivenY11, Direction::DistanceUp),
        (PredictiveVariance::Y01GivenY11Y12, Direction::NoiseUp),
    ] {
        let fd = finite_difference(which, dir, &p, 1e-6);
        let printed = misprinted_derivative(which, dir, &p).unwrap();
        let fixed = partial_derivative(which, dir, &p);
        assert!(close(fixed, fd, 1e-5), "{fixed} vs {fd}");
        assert!(!close(printed, fd, 1e-2), "{printed} vs {fd}");
    }
}

proptest! {
    #[test]
    fn conditioning_on_more_hours_never_hurts(
        sb in 0.01f64..10.0, sd in 0.01f64..10.0, se in 0.01f64..10.0,
        lambda in 1.0f64..200.0, d in 0.0f64..150.0,
    ) {
        let r = theorem1(&PolyDlmParams::new(sb, sd, se, lambda, d).unwrap());
        let tol = 1e-12 * se;
        prop_assert!(r.var_y01_y11_y12 <= r.var_y01_y11 + tol);
        prop_assert!(r.var_y02_y11_y12 <= r.var_y02_y12 + tol);
        prop_assert!(r.var_y01_y11_y12 >= -tol && r.var_y02_y11_y12 >= -tol);
    }
}
