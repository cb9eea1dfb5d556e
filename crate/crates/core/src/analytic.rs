//! Closed-form results for the first-order polynomial DLM
//!
//! ```text
//! y_it = beta_t + eps_it,   beta_t = beta_{t-1} + delta_t,   beta_0 ~ N(0, s_b)
//! ```
//!
//! with `delta_t ~ N(0, s_d)` and `eps_t ~ N(0, s_e exp(-V/lambda))`, for one
//! gauged site (index 1) and one ungauged site (index 0) at distance `d01`
//! over two hours.
//!
//! Shorthand used throughout, with `rho = exp(-d01/lambda)`:
//!
//! ```text
//! k  = s_b + s_d            v1 = k + s_e            c1 = k + s_e rho
//!                           v2 = s_b + 2 s_d + s_e  c2 = s_b + 2 s_d + s_e rho
//! Delta = v1 v2 - k^2
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{DlmError, Result};

/// Parameters of the two-site, two-hour polynomial DLM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyDlmParams {
    pub sigma_beta2: f64,
    pub sigma_delta2: f64,
    pub sigma_eps2: f64,
    pub lambda: f64,
    pub d01: f64,
}

impl PolyDlmParams {
    pub fn new(
        sigma_beta2: f64,
        sigma_delta2: f64,
        sigma_eps2: f64,
        lambda: f64,
        d01: f64,
    ) -> Result<Self> {
        let p = PolyDlmParams {
            sigma_beta2,
            sigma_delta2,
            sigma_eps2,
            lambda,
            d01,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_beta2", self.sigma_beta2),
            ("sigma_delta2", self.sigma_delta2),
            ("sigma_eps2", self.sigma_eps2),
            ("lambda", self.lambda),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(DlmError::domain(name, v, "must be finite and > 0"));
            }
        }
        if !(self.d01.is_finite() && self.d01 >= 0.0) {
            return Err(DlmError::domain("d01", self.d01, "must be finite and >= 0"));
        }
        Ok(())
    }

    /// `exp(-d01 / lambda)`.
    pub fn rho(&self) -> f64 {
        (-self.d01 / self.lambda).exp()
    }

    fn parts(&self) -> Parts {
        let (sb, sd, se) = (self.sigma_beta2, self.sigma_delta2, self.sigma_eps2);
        let rho = self.rho();
        let k = sb + sd;
        let v1 = k + se;
        let v2 = sb + 2.0 * sd + se;
        Parts {
            se,
            sd,
            rho,
            k,
            v1,
            v2,
            c1: k + se * rho,
            c2: sb + 2.0 * sd + se * rho,
            delta: v1 * v2 - k * k,
        }
    }
}

struct Parts {
    se: f64,
    sd: f64,
    rho: f64,
    k: f64,
    v1: f64,
    v2: f64,
    c1: f64,
    c2: f64,
    delta: f64,
}

/// `Cov(y_it, y_js)`; `same_site` selects `i = j` when `t = s`.
pub fn moment_structure(p: &PolyDlmParams, t: u64, s: u64, same_site: bool) -> f64 {
    assert!(t >= 1 && s >= 1, "time indices start at 1");
    let base = p.sigma_beta2 + t.min(s) as f64 * p.sigma_delta2;
    if t != s {
        base
    } else if same_site {
        base + p.sigma_eps2
    } else {
        base + p.sigma_eps2 * p.rho()
    }
}

/// `Cor(y_it, y_js)` for two distinct sites at distance `d01`.
pub fn correlations(p: &PolyDlmParams, t: u64, s: u64) -> f64 {
    let var = |u: u64| p.sigma_beta2 + u as f64 * p.sigma_delta2 + p.sigma_eps2;
    moment_structure(p, t, s, false) / (var(t) * var(s)).sqrt()
}

/// The four predictive variances and their building blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremOneResult {
    pub var_y01_y11: f64,
    pub var_y02_y12: f64,
    pub var_y01_y11_y12: f64,
    pub var_y02_y11_y12: f64,
    pub delta: f64,
    pub m1: f64,
    pub m2: f64,
}

/// Predictive variances of the ungauged responses `y01`, `y02` given the
/// gauged `y11` and/or `y12`.
pub fn theorem1(p: &PolyDlmParams) -> TheoremOneResult {
    let q = p.parts();
    let u = q.se - q.se * q.rho;
    let m1 = q.v2 * (q.v1 * q.v1 - q.c1 * q.c1) - 2.0 * q.k * q.k * u;
    let m2 = q.v1 * (q.v2 * q.v2 - q.c2 * q.c2) - 2.0 * q.k * q.k * u;
    TheoremOneResult {
        var_y01_y11: (q.v1 * q.v1 - q.c1 * q.c1) / q.v1,
        var_y02_y12: (q.v2 * q.v2 - q.c2 * q.c2) / q.v2,
        var_y01_y11_y12: m1 / q.delta,
        var_y02_y11_y12: m2 / q.delta,
        delta: q.delta,
        m1,
        m2,
    }
}

/// Closed-form differences between the predictive variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremTwoGaps {
    /// `Var(y01|y11) - Var(y01|y11,y12)`.
    pub more_data_hour1: f64,
    /// `Var(y02|y12) - Var(y02|y11,y12)`.
    pub more_data_hour2: f64,
    /// `Var(y02|y11,y12) - Var(y01|y11,y12)`.
    pub later_hour_all_data: f64,
    /// `Var(y02|y12) - Var(y01|y11)`.
    pub later_hour_own_data: f64,
    /// `more_data_hour1 - more_data_hour2`.
    pub margin_more_data: f64,
    /// `later_hour_all_data - later_hour_own_data`.
    pub margin_later_hour: f64,
}

impl TheoremTwoGaps {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.more_data_hour1,
            self.more_data_hour2,
            self.later_hour_all_data,
            self.later_hour_own_data,
            self.margin_more_data,
            self.margin_later_hour,
        ]
    }
}

pub fn theorem2_gaps(p: &PolyDlmParams) -> TheoremTwoGaps {
    let q = p.parts();
    let one_minus = 1.0 - q.rho;
    let common = q.se * q.se * one_minus * one_minus;
    let g1 = common * q.k * q.k / (q.delta * q.v1);
    // the squared factor is (1 - rho)^2 here as well
    let g2 = common * q.k * q.k / (q.delta * q.v2);
    let g3 = common * q.sd / q.delta;
    let g4 = common * q.sd / (q.v1 * q.v2);
    TheoremTwoGaps {
        more_data_hour1: g1,
        more_data_hour2: g2,
        later_hour_all_data: g3,
        later_hour_own_data: g4,
        margin_more_data: common * q.k * q.k * (q.v2 - q.v1) / (q.delta * q.v1 * q.v2),
        margin_later_hour: common * q.sd * (q.v1 * q.v2 - q.delta) / (q.delta * q.v1 * q.v2),
    }
}

/// The gap `Var(y02|y12) - Var(y02|y11,y12)` with `(1 - rho^2)` in place of
/// `(1 - rho)^2`, kept to show that this grouping does not match the exact
/// difference.
pub fn more_data_hour2_alternative(p: &PolyDlmParams) -> f64 {
    let q = p.parts();
    q.se * q.se * q.k * q.k * (1.0 - q.rho * q.rho) / (q.delta * q.v2)
}

/// Which of the four predictive variances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PredictiveVariance {
    Y01GivenY11,
    Y02GivenY12,
    Y01GivenY11Y12,
    Y02GivenY11Y12,
}

impl PredictiveVariance {
    pub const ALL: [PredictiveVariance; 4] = [
        PredictiveVariance::Y01GivenY11,
        PredictiveVariance::Y02GivenY12,
        PredictiveVariance::Y01GivenY11Y12,
        PredictiveVariance::Y02GivenY11Y12,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PredictiveVariance::Y01GivenY11 => "var_y01_y11",
            PredictiveVariance::Y02GivenY12 => "var_y02_y12",
            PredictiveVariance::Y01GivenY11Y12 => "var_y01_y11_y12",
            PredictiveVariance::Y02GivenY11Y12 => "var_y02_y11_y12",
        }
    }

    pub fn eval(self, p: &PolyDlmParams) -> f64 {
        let r = theorem1(p);
        match self {
            PredictiveVariance::Y01GivenY11 => r.var_y01_y11,
            PredictiveVariance::Y02GivenY12 => r.var_y02_y12,
            PredictiveVariance::Y01GivenY11Y12 => r.var_y01_y11_y12,
            PredictiveVariance::Y02GivenY11Y12 => r.var_y02_y11_y12,
        }
    }
}

/// Parameter moved in a monotonicity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// `d01` increases.
    DistanceUp,
    /// `sigma_eps2` increases.
    NoiseUp,
    /// `lambda` decreases.
    RangeDown,
}

impl Direction {
    pub const ALL: [Direction; 3] = [
        Direction::DistanceUp,
        Direction::NoiseUp,
        Direction::RangeDown,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Direction::DistanceUp => "d01_up",
            Direction::NoiseUp => "sigma_eps2_up",
            Direction::RangeDown => "lambda_down",
        }
    }

    /// Value of the moved parameter.
    pub fn get(self, p: &PolyDlmParams) -> f64 {
        match self {
            Direction::DistanceUp => p.d01,
            Direction::NoiseUp => p.sigma_eps2,
            Direction::RangeDown => p.lambda,
        }
    }

    pub fn with(self, p: &PolyDlmParams, value: f64) -> PolyDlmParams {
        let mut q = *p;
        match self {
            Direction::DistanceUp => q.d01 = value,
            Direction::NoiseUp => q.sigma_eps2 = value,
            Direction::RangeDown => q.lambda = value,
        }
        q
    }

    /// +1 when the variance should grow with the parameter, -1 when it should
    /// shrink.
    pub fn expected_sign(self) -> f64 {
        match self {
            Direction::RangeDown => -1.0,
            _ => 1.0,
        }
    }
}

/// `A = k (s_d + s_e) / (s_e v2)`, the ratio appearing in the rewritten form
/// `Var(y01|y11,y12) = (1 - rho) s_e {2 - (1 - rho)/(1 + A)}`.
fn ratio_a(q: &Parts) -> f64 {
    q.k * (q.sd + q.se) / (q.se * q.v2)
}

/// Partial derivative of a predictive variance with respect to the
/// parameter moved by `dir` (`d01`, `sigma_eps2` or `lambda`).
pub fn partial_derivative(which: PredictiveVariance, dir: Direction, p: &PolyDlmParams) -> f64 {
    let q = p.parts();
    let (rho, se, lam, d) = (q.rho, q.se, p.lambda, p.d01);
    // d rho / d d01 and d rho / d lambda
    let drho_dd = -rho / lam;
    let drho_dl = rho * d / (lam * lam);
    match which {
        PredictiveVariance::Y01GivenY11 => match dir {
            Direction::DistanceUp => 2.0 / lam * rho * se * q.c1 / q.v1,
            Direction::RangeDown => -2.0 * d / (lam * lam) * rho * se * q.c1 / q.v1,
            Direction::NoiseUp => {
                (1.0 - rho) * (2.0 - (1.0 - rho) * se * (se + 2.0 * q.k) / (q.v1 * q.v1))
            }
        },
        PredictiveVariance::Y01GivenY11Y12 => {
            let a = ratio_a(&q);
            match dir {
                Direction::DistanceUp => 2.0 / lam * rho * se * (a + rho) / (1.0 + a),
                Direction::RangeDown => -2.0 * d / (lam * lam) * rho * se * (a + rho) / (1.0 + a),
                Direction::NoiseUp => {
                    let (sb, sd) = (p.sigma_beta2, q.sd);
                    let poly = 2.0 * sb * sb
                        + 6.0 * sb * sd
                        + 4.0 * sb * se
                        + 4.0 * sd * sd
                        + 5.0 * sd * se
                        + se * se;
                    let x = se * (sd + se) * poly / (q.delta * q.delta);
                    (1.0 - rho) * (2.0 - (1.0 - rho) * x)
                }
            }
        }
        PredictiveVariance::Y02GivenY12 => {
            // (v2^2 - c2^2) / v2 with d/d rho = -2 s_e c2 / v2
            let dv_drho = -2.0 * se * q.c2 / q.v2;
            match dir {
                Direction::DistanceUp => dv_drho * drho_dd,
                Direction::RangeDown => dv_drho * drho_dl,
                Direction::NoiseUp => {
                    (q.v2 * q.v2 - 2.0 * rho * q.c2 * q.v2 + q.c2 * q.c2) / (q.v2 * q.v2)
                }
            }
        }
        PredictiveVariance::Y02GivenY11Y12 => {
            let dm_drho = 2.0 * se * (q.k * q.k - q.v1 * q.c2);
            match dir {
                Direction::DistanceUp => dm_drho / q.delta * drho_dd,
                Direction::RangeDown => dm_drho / q.delta * drho_dl,
                Direction::NoiseUp => {
                    let m2 = theorem1(p).m2;
                    let dm = (q.v2 * q.v2 - q.c2 * q.c2) + q.v1 * (2.0 * q.v2 - 2.0 * rho * q.c2)
                        - 2.0 * q.k * q.k * (1.0 - rho);
                    let ddelta = q.v1 + q.v2;
                    (dm * q.delta - m2 * ddelta) / (q.delta * q.delta)
                }
            }
        }
    }
}

/// Two derivative expressions as they are commonly typeset, kept only to
/// demonstrate that they disagree with finite differences: the `d01`
/// derivative of `Var(y01|y11)` with a stray `d01` factor and the
/// `sigma_eps2` derivative of `Var(y01|y11,y12)` written through
/// `c1 A - c2 c3`.
pub fn misprinted_derivative(
    which: PredictiveVariance,
    dir: Direction,
    p: &PolyDlmParams,
) -> Option<f64> {
    let q = p.parts();
    let (rho, se, lam, d) = (q.rho, q.se, p.lambda, p.d01);
    match (which, dir) {
        (PredictiveVariance::Y01GivenY11, Direction::DistanceUp) => {
            Some(2.0 * d / lam * rho * se * q.c1 / q.v1)
        }
        (PredictiveVariance::Y01GivenY11Y12, Direction::NoiseUp) => {
            let a = ratio_a(&q);
            let c1 = q.v2;
            let c2 = q.k;
            let c3 = q.sd * c1 + se * (q.sd + se);
            Some((1.0 - rho) * (2.0 - (1.0 - rho) * se / (a * a) * (c1 * a - c2 * c3)))
        }
        _ => None,
    }
}

fn fd_step(dir: Direction, p: &PolyDlmParams, rel_step: f64) -> f64 {
    let x = dir.get(p);
    match dir {
        Direction::DistanceUp => rel_step * x.max(p.lambda),
        _ => rel_step * x.abs(),
    }
}

/// Finite difference of a predictive variance along `dir`, Richardson
/// extrapolated. The step is `rel_step` times the parameter, or times
/// `lambda` for `d01`, whose natural scale is the range. Central where the
/// step stays in the domain, forward at `d01 = 0`.
pub fn finite_difference(
    which: PredictiveVariance,
    dir: Direction,
    p: &PolyDlmParams,
    rel_step: f64,
) -> f64 {
    let x = dir.get(p);
    let h = fd_step(dir, p, rel_step);
    let f = |v: f64| which.eval(&dir.with(p, v));
    if x - h >= 0.0 {
        let central = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
        (4.0 * central(0.5 * h) - central(h)) / 3.0
    } else {
        let forward = |h: f64| (f(x + h) - f(x)) / h;
        2.0 * forward(0.5 * h) - forward(h)
    }
}

/// Analytic derivative, finite difference and verdicts for one variance and
/// direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityCheck {
    pub variance: PredictiveVariance,
    pub direction: Direction,
    pub analytic: f64,
    pub finite_difference: f64,
    /// Analytic and numerical derivative agree within the tolerance.
    pub agrees: bool,
    /// The variance does not move against the stated direction.
    pub monotone: bool,
}

/// Relative step of the finite differences.
pub const FD_REL_STEP: f64 = 1e-3;
/// Relative agreement required between analytic and numerical derivatives.
pub const FD_REL_TOL: f64 = 1e-4;

/// Whether the variances grow as `d01` grows, `sigma_eps2` grows or `lambda`
/// shrinks, checked through the analytic derivatives and confirmed by
/// central differences.
pub fn corollary1_check(p: &PolyDlmParams, dir: Direction) -> Vec<MonotonicityCheck> {
    PredictiveVariance::ALL
        .iter()
        .map(|&which| {
            let analytic = partial_derivative(which, dir, p);
            let fd = finite_difference(which, dir, p, FD_REL_STEP);
            // rounding of the differenced variances, for derivatives that
            // vanish (e.g. along lambda at d01 = 0)
            let magnitude = p.sigma_beta2 + p.sigma_delta2 + p.sigma_eps2;
            let rounding = 1e-13 * magnitude / fd_step(dir, p, FD_REL_STEP);
            let agrees = (analytic - fd).abs() <= FD_REL_TOL * analytic.abs() + rounding;
            let monotone = analytic * dir.expected_sign() >= 0.0;
            MonotonicityCheck {
                variance: which,
                direction: dir,
                analytic,
                finite_difference: fd,
                agrees,
                monotone,
            }
        })
        .collect()
}

/// `s_b (1 + s_b / s_d)`.
pub fn corollary2_threshold(p: &PolyDlmParams) -> f64 {
    p.sigma_beta2 * (1.0 + p.sigma_beta2 / p.sigma_delta2)
}

/// Whether fitting only the second hour gives a smaller predictive variance
/// than fitting both, i.e. `Var(y01|y11) < Var(y02|y11,y12)`.
///
/// Holds exactly when `sigma_eps2` exceeds the threshold and the sites are
/// apart; collocated sites make both variances zero.
pub fn corollary2_paradox(p: &PolyDlmParams) -> bool {
    p.d01 > 0.0 && p.sigma_eps2 > corollary2_threshold(p)
}
