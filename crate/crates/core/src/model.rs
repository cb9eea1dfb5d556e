//! Domain types and model structure: stations, observation panels, the
//! harmonic regressors, the design matrix and the covariance builders.
//!
//! The state at hour `t` is `x_t = (beta_t, alpha1_t, alpha2_t)` with
//! dimension `2n + 1`. Observations follow
//!
//! ```text
//! y_t = F_t x_t + nu_t,       nu_t    ~ N(0, sigma2 * exp(-V / lambda))
//! x_t = x_{t-1} + omega_t,    omega_t ~ N(0, sigma2 * W)
//! ```
//!
//! where row `i` of `F_t` is `(1, S_1t(a1) e_i', S_2t(a2) e_i')` and `W` is
//! block diagonal with blocks `tau_y2`, `tau1_2 exp(-V/lambda1)` and
//! `tau2_2 exp(-V/lambda2)`. Each alpha block uses its own `tau_j2` and
//! `lambda_j`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, DlmError, Result};

/// Hours per week; studies slice panels into blocks of this length.
pub const HOURS_PER_WEEK: usize = 168;

/// Mean Earth radius used for great-circle distances, km.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// How pairwise distances are computed from site coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMetric {
    /// Planar coordinates in km, Euclidean distance.
    Euclidean,
    /// `(lat, lon)` in degrees, haversine distance in km.
    GreatCircle,
}

impl DistanceMetric {
    pub fn distance(self, a: [f64; 2], b: [f64; 2]) -> f64 {
        match self {
            DistanceMetric::Euclidean => ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt(),
            DistanceMetric::GreatCircle => {
                let (lat1, lon1) = (a[0].to_radians(), a[1].to_radians());
                let (lat2, lon2) = (b[0].to_radians(), b[1].to_radians());
                let h = ((lat2 - lat1) / 2.0).sin().powi(2)
                    + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
                2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DistanceMetric::Euclidean => "euclidean",
            DistanceMetric::GreatCircle => "great-circle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: String,
    pub coord: [f64; 2],
}

impl Site {
    pub fn new(id: impl Into<String>, coord: [f64; 2]) -> Self {
        Site {
            id: id.into(),
            coord,
        }
    }
}

/// Gauged sites and their distance matrix `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationSet {
    sites: Vec<Site>,
    metric: DistanceMetric,
    distances: DMatrix<f64>,
}

impl StationSet {
    /// Builds the set and its distance matrix. Ids must be unique and no two
    /// sites may share a location.
    pub fn new(sites: Vec<Site>, metric: DistanceMetric) -> Result<Self> {
        if sites.is_empty() {
            return Err(DlmError::Contract(
                "station set needs at least one site".into(),
            ));
        }
        for (i, s) in sites.iter().enumerate() {
            if !(s.coord[0].is_finite() && s.coord[1].is_finite()) {
                return Err(DlmError::Contract(format!(
                    "site `{}` has a non-finite coordinate",
                    s.id
                )));
            }
            if sites[..i].iter().any(|o| o.id == s.id) {
                return Err(DlmError::Contract(format!("duplicate site id `{}`", s.id)));
            }
        }
        let n = sites.len();
        let mut distances = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let d = metric.distance(sites[i].coord, sites[j].coord);
                if d <= 0.0 {
                    return Err(DlmError::Contract(format!(
                        "sites `{}` and `{}` are collocated",
                        sites[i].id, sites[j].id
                    )));
                }
                distances[(i, j)] = d;
                distances[(j, i)] = d;
            }
        }
        Ok(StationSet {
            sites,
            metric,
            distances,
        })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn metric(&self) -> DistanceMetric {
        self.metric
    }

    /// The `n x n` distance matrix, km.
    pub fn distances(&self) -> &DMatrix<f64> {
        &self.distances
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.sites.iter().position(|s| s.id == id)
    }

    /// Distances from an arbitrary location to every site.
    pub fn distances_to(&self, coord: [f64; 2]) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.sites
                .iter()
                .map(|s| self.metric.distance(coord, s.coord)),
        )
    }

    /// Distance matrix of the location followed by every site; index 0 is the
    /// new location.
    pub fn augmented_distances(&self, coord: [f64; 2]) -> DMatrix<f64> {
        let n = self.len();
        let to = self.distances_to(coord);
        DMatrix::from_fn(n + 1, n + 1, |i, j| match (i, j) {
            (0, 0) => 0.0,
            (0, j) => to[j - 1],
            (i, 0) => to[i - 1],
            (i, j) => self.distances[(i - 1, j - 1)],
        })
    }

    /// Sub-set of sites in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<StationSet> {
        StationSet::new(
            indices.iter().map(|&i| self.sites[i].clone()).collect(),
            self.metric,
        )
    }
}

/// `n x T` panel of square-root concentrations with an observed mask.
///
/// Missing entries hold `NaN` until they are imputed.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPanel {
    y: DMatrix<f64>,
    mask: DMatrix<bool>,
    t_index: Vec<i64>,
}

impl ObservationPanel {
    /// `y` is `n x T`; `mask[(i, t)]` is true when the value is observed.
    pub fn new(y: DMatrix<f64>, mask: DMatrix<bool>, t_index: Vec<i64>) -> Result<Self> {
        if y.shape() != mask.shape() {
            return Err(DlmError::Contract(format!(
                "values {:?} and mask {:?} differ in shape",
                y.shape(),
                mask.shape()
            )));
        }
        if t_index.len() != y.ncols() {
            return Err(DlmError::Contract(format!(
                "time index has {} entries for {} columns",
                t_index.len(),
                y.ncols()
            )));
        }
        if y.nrows() == 0 || y.ncols() == 0 {
            return Err(DlmError::Contract(
                "panel must have at least one site and one hour".into(),
            ));
        }
        if t_index.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DlmError::Contract(
                "time index must be strictly increasing".into(),
            ));
        }
        let mut y = y;
        for t in 0..y.ncols() {
            for i in 0..y.nrows() {
                if mask[(i, t)] {
                    if !y[(i, t)].is_finite() {
                        return Err(DlmError::Contract(format!(
                            "observed value at site {i}, column {t} is not finite"
                        )));
                    }
                } else {
                    y[(i, t)] = f64::NAN;
                }
            }
        }
        Ok(ObservationPanel { y, mask, t_index })
    }

    /// Fully observed panel with hours `1..=T`.
    pub fn fully_observed(y: DMatrix<f64>) -> Result<Self> {
        let mask = DMatrix::from_element(y.nrows(), y.ncols(), true);
        let t_index = (1..=y.ncols() as i64).collect();
        ObservationPanel::new(y, mask, t_index)
    }

    pub fn n_sites(&self) -> usize {
        self.y.nrows()
    }

    pub fn n_times(&self) -> usize {
        self.y.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }

    pub fn t_index(&self) -> &[i64] {
        &self.t_index
    }

    pub fn is_observed(&self, site: usize, col: usize) -> bool {
        self.mask[(site, col)]
    }

    pub fn n_missing(&self) -> usize {
        self.mask.iter().filter(|m| !**m).count()
    }

    /// Columns with no observed entry.
    pub fn fully_missing_columns(&self) -> Vec<usize> {
        (0..self.n_times())
            .filter(|&t| (0..self.n_sites()).all(|i| !self.mask[(i, t)]))
            .collect()
    }

    /// Columns `range` as a new panel.
    pub fn slice_columns(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.n_times() || range.is_empty() {
            return Err(DlmError::Contract(format!(
                "column range {range:?} outside panel of {} hours",
                self.n_times()
            )));
        }
        let cols = range.len();
        ObservationPanel::new(
            self.y.columns(range.start, cols).into_owned(),
            self.mask.columns(range.start, cols).into_owned(),
            self.t_index[range].to_vec(),
        )
    }

    /// Rows `sites` as a new panel.
    pub fn select_sites(&self, sites: &[usize]) -> Result<Self> {
        let t = self.n_times();
        ObservationPanel::new(
            DMatrix::from_fn(sites.len(), t, |i, c| self.y[(sites[i], c)]),
            DMatrix::from_fn(sites.len(), t, |i, c| self.mask[(sites[i], c)]),
            self.t_index.clone(),
        )
    }

    /// Observed values with missing entries filled by the site mean of the
    /// observed values (overall mean for sites with none).
    pub fn filled_with_site_means(&self) -> DMatrix<f64> {
        let (n, t) = self.y.shape();
        let observed: Vec<f64> = self.y.iter().copied().filter(|v| v.is_finite()).collect();
        let overall = if observed.is_empty() {
            0.0
        } else {
            observed.iter().sum::<f64>() / observed.len() as f64
        };
        let mut out = self.y.clone();
        for i in 0..n {
            let (sum, count) = (0..t)
                .filter(|&c| self.mask[(i, c)])
                .fold((0.0, 0usize), |(s, k), c| (s + self.y[(i, c)], k + 1));
            let fill = if count > 0 {
                sum / count as f64
            } else {
                overall
            };
            for c in 0..t {
                if !self.mask[(i, c)] {
                    out[(i, c)] = fill;
                }
            }
        }
        out
    }
}

/// The fixed evolution parameters `(tau_y2, tau1_2, lambda1, tau2_2, lambda2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gamma {
    pub tau_y2: f64,
    pub tau1_2: f64,
    pub lambda1: f64,
    pub tau2_2: f64,
    pub lambda2: f64,
}

impl Gamma {
    /// The fixed values used for the ozone application.
    pub fn reference() -> Self {
        Gamma {
            tau_y2: 0.02,
            tau1_2: 0.0002,
            lambda1: 25.0,
            tau2_2: 0.0004,
            lambda2: 25.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("tau_y2", self.tau_y2)?;
        ensure_positive("tau1_2", self.tau1_2)?;
        ensure_positive("lambda1", self.lambda1)?;
        ensure_positive("tau2_2", self.tau2_2)?;
        ensure_positive("lambda2", self.lambda2)?;
        Ok(())
    }

    pub fn tau2(&self, j: usize) -> f64 {
        match j {
            1 => self.tau1_2,
            2 => self.tau2_2,
            _ => panic!("harmonic index must be 1 or 2, got {j}"),
        }
    }

    pub fn lambda(&self, j: usize) -> f64 {
        match j {
            1 => self.lambda1,
            2 => self.lambda2,
            _ => panic!("harmonic index must be 1 or 2, got {j}"),
        }
    }
}

/// Divides the three evolution variances by the span in weeks, keeping the
/// two ranges. Keeps `t * tau^2` of order one over long spans.
pub fn scale_gamma_for_span(gamma: Gamma, t_weeks: u32) -> Gamma {
    let k = f64::from(t_weeks.max(1));
    Gamma {
        tau_y2: gamma.tau_y2 / k,
        tau1_2: gamma.tau1_2 / k,
        tau2_2: gamma.tau2_2 / k,
        ..gamma
    }
}

/// Inverse-gamma prior; `X ~ IG(shape, scale)` iff `1/X ~ Gamma(shape, rate = scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseGamma {
    pub shape: f64,
    pub scale: f64,
}

impl InverseGamma {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        ensure_positive("shape", shape)?;
        ensure_positive("scale", scale)?;
        Ok(InverseGamma { shape, scale })
    }

    /// Log density up to the normalizing constant.
    pub fn ln_kernel(&self, x: f64) -> f64 {
        -(self.shape + 1.0) * x.ln() - self.scale / x
    }

    /// Exact log density.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.shape * self.scale.ln() - statrs::function::gamma::ln_gamma(self.shape)
            + self.ln_kernel(x)
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        statrs::function::gamma::gamma_ur(self.shape, self.scale / x)
    }

    pub fn mean(&self) -> Option<f64> {
        (self.shape > 1.0).then(|| self.scale / (self.shape - 1.0))
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        use rand_distr::Distribution;
        let g = rand_distr::Gamma::new(self.shape, 1.0 / self.scale)
            .expect("validated inverse-gamma parameters");
        1.0 / g.sample(rng)
    }
}

/// Bivariate normal prior on the phase pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePrior {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
}

impl PhasePrior {
    pub fn reference() -> Self {
        PhasePrior {
            mean: Vector2::new(2.5, 9.8),
            cov: Matrix2::new(0.5, 0.0, 0.0, 0.5),
        }
    }
}

/// Phase pair `(a1, a2)` mixing sine into the 24 h and 12 h regressors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub a1: f64,
    pub a2: f64,
}

impl Phase {
    pub fn new(a1: f64, a2: f64) -> Self {
        Phase { a1, a2 }
    }

    pub fn get(&self, j: usize) -> f64 {
        match j {
            1 => self.a1,
            2 => self.a2,
            _ => panic!("harmonic index must be 1 or 2, got {j}"),
        }
    }

    /// `S_1t(a1)` and `S_2t(a2)` at hour `t`.
    pub fn regressors(&self, t: i64) -> (f64, f64) {
        (harmonic(t, 1, self.a1), harmonic(t, 2, self.a2))
    }
}

/// Cosine and sine parts of harmonic `j` at hour `t`.
pub fn harmonic_basis(t: i64, j: usize) -> (f64, f64) {
    // reduce modulo the period first so large t keeps full precision
    let period = 24 / j as i64;
    let k = t.rem_euclid(period) as f64;
    let angle = PI * k * j as f64 / 12.0;
    (angle.cos(), angle.sin())
}

/// `S_jt(a_j) = cos(pi t j / 12) + a_j sin(pi t j / 12)` for `j` in `{1, 2}`.
pub fn harmonic(t: i64, j: usize, a_j: f64) -> f64 {
    assert!(j == 1 || j == 2, "harmonic index must be 1 or 2, got {j}");
    let (c, s) = harmonic_basis(t, j);
    c + a_j * s
}

/// Index layout of a state vector `(beta, alpha1, alpha2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub n: usize,
}

impl StateLayout {
    pub fn new(n: usize) -> Self {
        StateLayout { n }
    }

    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    pub const BETA: usize = 0;

    /// Index of `alpha_j` at site `i`.
    pub fn alpha(&self, j: usize, i: usize) -> usize {
        debug_assert!(i < self.n);
        match j {
            1 => 1 + i,
            2 => 1 + self.n + i,
            _ => panic!("harmonic index must be 1 or 2, got {j}"),
        }
    }

    pub fn alpha_range(&self, j: usize) -> std::ops::Range<usize> {
        let start = self.alpha(j, 0);
        start..start + self.n
    }
}

/// Structured view of a state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub beta: f64,
    pub alpha1: DVector<f64>,
    pub alpha2: DVector<f64>,
}

impl StateVector {
    pub fn from_flat(x: &DVector<f64>) -> Result<Self> {
        if x.len().is_multiple_of(2) || x.is_empty() {
            return Err(DlmError::Contract(format!(
                "state dimension {} is not 2n+1",
                x.len()
            )));
        }
        let n = (x.len() - 1) / 2;
        Ok(StateVector {
            beta: x[0],
            alpha1: x.rows(1, n).into_owned(),
            alpha2: x.rows(1 + n, n).into_owned(),
        })
    }

    pub fn to_flat(&self) -> DVector<f64> {
        let n = self.alpha1.len();
        let mut x = DVector::zeros(2 * n + 1);
        x[0] = self.beta;
        x.rows_mut(1, n).copy_from(&self.alpha1);
        x.rows_mut(1 + n, n).copy_from(&self.alpha2);
        x
    }
}

/// The `n x (2n+1)` observation matrix at hour `t`.
pub fn design_matrix(t: i64, n: usize, a: Phase) -> DMatrix<f64> {
    let (s1, s2) = a.regressors(t);
    let mut f = DMatrix::zeros(n, 2 * n + 1);
    for i in 0..n {
        f[(i, 0)] = 1.0;
        f[(i, 1 + i)] = s1;
        f[(i, 1 + n + i)] = s2;
    }
    f
}

/// `F_t x` without forming `F_t`.
pub fn apply_design(t: i64, n: usize, a: Phase, x: &DVector<f64>) -> DVector<f64> {
    let (s1, s2) = a.regressors(t);
    DVector::from_fn(n, |i, _| x[0] + s1 * x[1 + i] + s2 * x[1 + n + i])
}

/// Entrywise `exp(-V / theta)`.
pub fn exp_correlation(v: &DMatrix<f64>, theta: f64) -> Result<DMatrix<f64>> {
    ensure_positive("theta", theta)?;
    Ok(v.map(|d| (-d / theta).exp()))
}

/// Block-diagonal evolution covariance scale
/// `W = diag(tau_y2, tau1_2 exp(-V/lambda1), tau2_2 exp(-V/lambda2))`.
pub fn state_noise_cov(gamma: &Gamma, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    gamma.validate()?;
    let n = v.nrows();
    let mut w = DMatrix::zeros(2 * n + 1, 2 * n + 1);
    w[(0, 0)] = gamma.tau_y2;
    let b1 = exp_correlation(v, gamma.lambda1)? * gamma.tau1_2;
    let b2 = exp_correlation(v, gamma.lambda2)? * gamma.tau2_2;
    w.view_mut((1, 1), (n, n)).copy_from(&b1);
    w.view_mut((1 + n, 1 + n), (n, n)).copy_from(&b2);
    Ok(w)
}

/// Prior `(m0, C0)` for the initial state; covariance is `sigma2 * C0`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub m0: DVector<f64>,
    pub c0: DMatrix<f64>,
}

impl InitialState {
    /// Site-invariant means and diagonal variances for each block.
    pub fn block_constant(n: usize, means: [f64; 3], variances: [f64; 3]) -> Self {
        let layout = StateLayout::new(n);
        let mut m0 = DVector::zeros(layout.dim());
        let mut c0 = DMatrix::zeros(layout.dim(), layout.dim());
        m0[0] = means[0];
        c0[(0, 0)] = variances[0];
        for j in 1..=2 {
            for k in layout.alpha_range(j) {
                m0[k] = means[j];
                c0[(k, k)] = variances[j];
            }
        }
        InitialState { m0, c0 }
    }

    /// `m0 = (2.85, -0.75, -0.08)` per block and `C0 = diag(1, 0.01, 0.01)`.
    pub fn reference(n: usize) -> Self {
        InitialState::block_constant(n, [2.85, -0.75, -0.08], [1.0, 0.01, 0.01])
    }

    pub fn n_sites(&self) -> usize {
        (self.m0.len().saturating_sub(1)) / 2
    }

    /// Mean of the `alpha_j` block of `m0` and mean of its prior variances.
    pub fn alpha_block_moments(&self, j: usize) -> (f64, f64) {
        let layout = StateLayout::new(self.n_sites());
        let r = layout.alpha_range(j);
        let k = r.len().max(1) as f64;
        let mean = r.clone().map(|i| self.m0[i]).sum::<f64>() / k;
        let var = r.map(|i| self.c0[(i, i)]).sum::<f64>() / k;
        (mean, var)
    }
}

/// Everything the sampler needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub gamma: Gamma,
    pub prior_lambda: InverseGamma,
    pub prior_sigma2: InverseGamma,
    pub prior_a: PhasePrior,
    pub init: InitialState,
    /// Variance of the log-scale random-walk proposal for `lambda`.
    pub mh_tuning: f64,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    /// Store a full trajectory snapshot every `thinning` retained iterations.
    pub thinning: usize,
}

impl ModelConfig {
    /// Reference settings for `n` gauged sites.
    pub fn reference(n: usize) -> Self {
        ModelConfig {
            gamma: Gamma::reference(),
            prior_lambda: InverseGamma {
                shape: 1.0,
                scale: 5.0,
            },
            prior_sigma2: InverseGamma {
                shape: 2.0,
                scale: 0.01,
            },
            prior_a: PhasePrior::reference(),
            init: InitialState::reference(n),
            mh_tuning: 0.02,
            seed: 1,
            iterations: 2000,
            burn_in: 1000,
            thinning: 10,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.gamma.validate()?;
        InverseGamma::new(self.prior_lambda.shape, self.prior_lambda.scale)?;
        InverseGamma::new(self.prior_sigma2.shape, self.prior_sigma2.scale)?;
        ensure_positive("mh_tuning", self.mh_tuning)?;
        let dim = 2 * n + 1;
        if self.init.m0.len() != dim || self.init.c0.shape() != (dim, dim) {
            return Err(DlmError::Configuration(format!(
                "initial state has dimension {} but {n} sites need {dim}",
                self.init.m0.len()
            )));
        }
        let c0 = &self.init.c0;
        if (c0 - c0.transpose()).amax() > 1e-12 * c0.amax().max(1.0)
            || nalgebra::Cholesky::new(c0.clone()).is_none()
        {
            return Err(DlmError::Configuration(
                "C0 must be symmetric positive definite".into(),
            ));
        }
        let pc = self.prior_a.cov;
        if (pc - pc.transpose()).amax() > 1e-12 || nalgebra::Cholesky::new(pc).is_none() {
            return Err(DlmError::Configuration(
                "phase prior covariance must be SPD".into(),
            ));
        }
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(DlmError::Configuration(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thinning == 0 {
            return Err(DlmError::Configuration(
                "thinning must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Range parameter of the observation noise over time: one value for the
/// whole panel, or one value per week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RangeSchedule {
    Constant(f64),
    Weekly(Vec<f64>),
}

impl RangeSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            RangeSchedule::Constant(l) => ensure_positive("lambda", *l).map(|_| ()),
            RangeSchedule::Weekly(ls) => {
                if ls.is_empty() {
                    return Err(DlmError::Configuration(
                        "weekly range schedule is empty".into(),
                    ));
                }
                ls.iter()
                    .try_for_each(|l| ensure_positive("lambda", *l).map(|_| ()))
            }
        }
    }

    /// Range at panel column `col`; weeks beyond the list reuse the last value.
    pub fn at(&self, col: usize) -> f64 {
        match self {
            RangeSchedule::Constant(l) => *l,
            RangeSchedule::Weekly(ls) => ls[(col / HOURS_PER_WEEK).min(ls.len() - 1)],
        }
    }

    /// Distinct values in order of first use.
    pub fn values(&self) -> Vec<f64> {
        match self {
            RangeSchedule::Constant(l) => vec![*l],
            RangeSchedule::Weekly(ls) => ls.clone(),
        }
    }

    /// Index into [`values`](Self::values) for column `col`.
    pub fn slot(&self, col: usize) -> usize {
        match self {
            RangeSchedule::Constant(_) => 0,
            RangeSchedule::Weekly(ls) => (col / HOURS_PER_WEEK).min(ls.len() - 1),
        }
    }

    /// Representative single value (the first week's range).
    pub fn leading(&self) -> f64 {
        self.at(0)
    }
}

/// Correlation matrices `exp(-V/lambda)` for every slot of a schedule.
#[derive(Debug, Clone)]
pub struct ObsCorrelation {
    schedule: RangeSchedule,
    mats: Vec<DMatrix<f64>>,
}

impl ObsCorrelation {
    pub fn new(v: &DMatrix<f64>, schedule: RangeSchedule) -> Result<Self> {
        schedule.validate()?;
        let mats = schedule
            .values()
            .into_iter()
            .map(|l| exp_correlation(v, l))
            .collect::<Result<Vec<_>>>()?;
        Ok(ObsCorrelation { schedule, mats })
    }

    pub fn at(&self, col: usize) -> &DMatrix<f64> {
        &self.mats[self.schedule.slot(col)]
    }

    pub fn slots(&self) -> &[DMatrix<f64>] {
        &self.mats
    }

    pub fn schedule(&self) -> &RangeSchedule {
        &self.schedule
    }

    pub fn slot(&self, col: usize) -> usize {
        self.schedule.slot(col)
    }
}
