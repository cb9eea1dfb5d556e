//! Brute-force oracles shared by the integration and acceptance tests.
//!
//! Everything here works on dense joint covariances and explicit matrix
//! inverses, independently of the recursive code under test.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Conditional of `a | b = value` for `N(mean, cov)` by the textbook formula
/// `mu_a + S_ab S_bb^{-1} (value - mu_b)`, `S_aa - S_ab S_bb^{-1} S_ba`, with
/// `S_bb` inverted explicitly by LU.
pub fn condition_dense(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    a: &[usize],
    b: &[usize],
    value: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let pick =
        |r: &[usize], c: &[usize]| DMatrix::from_fn(r.len(), c.len(), |i, j| cov[(r[i], c[j])]);
    let s_aa = pick(a, a);
    let s_ab = pick(a, b);
    let s_bb_inv = pick(b, b)
        .try_inverse()
        .expect("conditioning block is invertible");
    let mu_a = DVector::from_fn(a.len(), |i, _| mean[a[i]]);
    let mu_b = DVector::from_fn(b.len(), |i, _| mean[b[i]]);
    let gain = &s_ab * s_bb_inv;
    let m = mu_a + &gain * (value - mu_b);
    let c = s_aa - &gain * s_ab.transpose();
    let c = (&c + c.transpose()) * 0.5;
    (m, c)
}

/// Same conditional through the precision matrix of the `(a, b)` marginal:
/// `cov = (P_aa)^{-1}`, `mean = mu_a - (P_aa)^{-1} P_ab (value - mu_b)`.
pub fn condition_by_precision(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    a: &[usize],
    b: &[usize],
    value: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let idx: Vec<usize> = a.iter().chain(b.iter()).copied().collect();
    let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| cov[(idx[i], idx[j])]);
    let prec = sub.try_inverse().expect("joint covariance is invertible");
    let na = a.len();
    let p_aa = prec.view((0, 0), (na, na)).into_owned();
    let p_ab = prec.view((0, na), (na, b.len())).into_owned();
    let p_aa_inv = p_aa.try_inverse().expect("precision block is invertible");
    let mu_a = DVector::from_fn(na, |i, _| mean[a[i]]);
    let mu_b = DVector::from_fn(b.len(), |i, _| mean[b[i]]);
    let m = mu_a - &p_aa_inv * p_ab * (value - mu_b);
    let c = (&p_aa_inv + p_aa_inv.transpose()) * 0.5;
    (m, c)
}

/// Joint mean and covariance of `(x_0, x_1, ..., x_T, y_1, ..., y_T)` for the
/// identity-evolution DLM, built from `x_t = x_0 + sum_{s<=t} omega_s` and
/// `y_t = F_t x_t + nu_t`. Covariances are scales (`sigma2 = 1`).
pub struct DenseDlm {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub dim: usize,
    pub n: usize,
    pub big_t: usize,
}

impl DenseDlm {
    pub fn new(
        m0: &DVector<f64>,
        c0: &DMatrix<f64>,
        w: &DMatrix<f64>,
        f: &[DMatrix<f64>],
        v: &[DMatrix<f64>],
    ) -> Self {
        let dim = m0.len();
        let big_t = f.len();
        let n = f[0].nrows();
        let nx = dim * (big_t + 1);
        let total = nx + n * big_t;
        let mut mean = DVector::zeros(total);
        let mut cov = DMatrix::zeros(total, total);
        // state blocks: Cov(x_s, x_t) = C0 + min(s, t) W
        for s in 0..=big_t {
            mean.rows_mut(s * dim, dim).copy_from(m0);
            for t in 0..=big_t {
                let block = c0 + w * (s.min(t) as f64);
                cov.view_mut((s * dim, t * dim), (dim, dim))
                    .copy_from(&block);
            }
        }
        for t in 1..=big_t {
            let yi = nx + (t - 1) * n;
            let ft = &f[t - 1];
            mean.rows_mut(yi, n).copy_from(&(ft * m0));
            for s in 0..=big_t {
                let cxx = c0 + w * (s.min(t) as f64);
                let cyx = ft * cxx;
                cov.view_mut((yi, s * dim), (n, dim)).copy_from(&cyx);
                cov.view_mut((s * dim, yi), (dim, n))
                    .copy_from(&cyx.transpose());
            }
            for s in 1..=big_t {
                let yj = nx + (s - 1) * n;
                let cxx = c0 + w * (s.min(t) as f64);
                let mut block = ft * cxx * f[s - 1].transpose();
                if s == t {
                    block += &v[t - 1];
                }
                cov.view_mut((yi, yj), (n, n)).copy_from(&block);
            }
        }
        DenseDlm {
            mean,
            cov,
            dim,
            n,
            big_t,
        }
    }

    pub fn x_idx(&self, t: usize) -> Vec<usize> {
        (t * self.dim..(t + 1) * self.dim).collect()
    }

    /// Indices of `y_1, ..., y_upto`.
    pub fn y_idx(&self, upto: usize) -> Vec<usize> {
        let nx = self.dim * (self.big_t + 1);
        (nx..nx + upto * self.n).collect()
    }

    /// Stacked `y_1, ..., y_upto` from an `n x T` matrix.
    pub fn stack(y: &DMatrix<f64>, upto: usize) -> DVector<f64> {
        DVector::from_iterator(
            y.nrows() * upto,
            (0..upto).flat_map(|t| y.column(t).iter().copied().collect::<Vec<_>>()),
        )
    }

    /// Moments of `x_t | y_1..y_upto`.
    pub fn state_given(
        &self,
        t: usize,
        y: &DMatrix<f64>,
        upto: usize,
    ) -> (DVector<f64>, DMatrix<f64>) {
        condition_dense(
            &self.mean,
            &self.cov,
            &self.x_idx(t),
            &self.y_idx(upto),
            &Self::stack(y, upto),
        )
    }

    /// Joint moments of `(x_s, x_t) | y_1..y_T`.
    pub fn pair_given_all(
        &self,
        s: usize,
        t: usize,
        y: &DMatrix<f64>,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let a: Vec<usize> = self.x_idx(s).into_iter().chain(self.x_idx(t)).collect();
        condition_dense(
            &self.mean,
            &self.cov,
            &a,
            &self.y_idx(self.big_t),
            &Self::stack(y, self.big_t),
        )
    }

    /// `log |Cov(y_1..T)|` and the Mahalanobis form of the stacked responses.
    pub fn marginal_terms(&self, y: &DMatrix<f64>) -> (f64, f64) {
        let idx = self.y_idx(self.big_t);
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.cov[(idx[i], idx[j])]);
        let mu = DVector::from_fn(idx.len(), |i, _| self.mean[idx[i]]);
        let r = Self::stack(y, self.big_t) - mu;
        let log_det = sub.clone().lu().determinant().ln();
        let quad = (r.transpose() * sub.try_inverse().unwrap() * &r)[(0, 0)];
        (log_det, quad)
    }
}

/// Random symmetric positive definite matrix `A A' / k + eps I`.
pub fn random_spd<R: Rng>(k: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&a * a.transpose()) * (scale / k as f64) + DMatrix::identity(k, k) * (0.05 * scale)
}

/// The 4 x 4 covariance of `(y01, y11, y02, y12)` in the two-hour polynomial DLM.
pub fn poly_dlm_sigma(sb: f64, sd: f64, se: f64, lambda: f64, d: f64) -> DMatrix<f64> {
    let rho = (-d / lambda).exp();
    let mut s = DMatrix::from_element(4, 4, sb + sd);
    let space = DMatrix::from_row_slice(2, 2, &[se, se * rho, se * rho, se]);
    for i in 0..2 {
        for j in 0..2 {
            s[(i, j)] += space[(i, j)];
            s[(2 + i, 2 + j)] += sd + space[(i, j)];
        }
    }
    s
}

/// `Var(a | b)` from the 4 x 4 covariance.
pub fn poly_conditional_variance(sigma: &DMatrix<f64>, a: usize, b: &[usize]) -> f64 {
    let (_, c) = condition_dense(&DVector::zeros(4), sigma, &[a], b, &DVector::zeros(b.len()));
    c[(0, 0)]
}

/// 2-norm condition number of a symmetric matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let e = m.clone().symmetric_eigen().eigenvalues;
    let max = e.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = e.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    max / min
}
