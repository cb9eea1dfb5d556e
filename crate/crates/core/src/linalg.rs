//! Small dense linear-algebra helpers shared by the filter, the sampler and
//! the interpolator.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{DlmError, Result};

/// Relative jitter added to the diagonal when a factorization fails.
pub const JITTER_SCALE: f64 = 1e-10;

/// Replaces `m` by `(m + m')/2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn mean_diag(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows().max(1);
    m.diagonal().iter().sum::<f64>() / n as f64
}

/// Cholesky factor of a symmetric positive definite matrix.
///
/// On failure the diagonal is inflated once by `1e-10 * mean(diag)` and the
/// factorization retried; a second failure is a numerical breakdown at `step`.
pub fn cholesky_jittered(m: &DMatrix<f64>, step: usize, what: &str) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c);
    }
    let jitter = JITTER_SCALE * mean_diag(m);
    if jitter.is_finite() && jitter > 0.0 {
        let mut inflated = m.clone();
        for i in 0..inflated.nrows() {
            inflated[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(inflated) {
            return Ok(c);
        }
    }
    Err(DlmError::numerical(
        step,
        format!("{what} is not positive definite"),
    ))
}

/// `log |A|` from a Cholesky factor.
pub fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|d| d.ln())
        .sum::<f64>()
}

/// Draws `dim` independent standard normals.
pub fn standard_normals<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

/// Lower-triangular square root of a positive semi-definite covariance.
///
/// Tries Cholesky first. Singular or exactly-zero covariances fall back to a
/// symmetric eigendecomposition with eigenvalues clamped at zero; clearly
/// indefinite input is rejected.
pub fn psd_sqrt(cov: &DMatrix<f64>, step: usize, what: &str) -> Result<DMatrix<f64>> {
    if let Some(c) = Cholesky::new(cov.clone()) {
        return Ok(c.unpack());
    }
    let eig = SymmetricEigen::new(cov.clone());
    let scale = eig
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let tol = 1e-8 * scale.max(f64::MIN_POSITIVE);
    let mut sqrt_vals = DVector::zeros(cov.nrows());
    for (k, &v) in eig.eigenvalues.iter().enumerate() {
        if !v.is_finite() || v < -tol {
            return Err(DlmError::numerical(
                step,
                format!("{what} has negative eigenvalue {v:e}"),
            ));
        }
        sqrt_vals[k] = v.max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals))
}

/// One draw from `N(mean, cov)` where `cov` is positive semi-definite.
///
/// Always consumes exactly `mean.len()` standard normals so that the random
/// stream does not depend on which factorization path was taken.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut R,
    step: usize,
    what: &str,
) -> Result<DVector<f64>> {
    let z = standard_normals(mean.len(), rng);
    let root = psd_sqrt(cov, step, what)?;
    Ok(mean + root * z)
}

/// Solves `A X = B` for symmetric positive definite `A` given its factor.
pub fn spd_solve(chol: &Cholesky<f64, Dyn>, b: &DMatrix<f64>) -> DMatrix<f64> {
    chol.solve(b)
}

/// Sub-matrix with the given rows and columns.
pub fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Sub-vector with the given entries.
pub fn select_vec(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |i, _| v[idx[i]])
}

/// Gaussian conditioning `x_a | x_b = value` for a joint `N(mean, cov)`.
///
/// Returns the conditional mean and covariance of the `a` block. With an
/// empty `b` block the marginal of `a` is returned.
pub fn condition_gaussian(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    a: &[usize],
    b: &[usize],
    value_b: &DVector<f64>,
    step: usize,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let mu_a = select_vec(mean, a);
    let s_aa = select(cov, a, a);
    if b.is_empty() {
        return Ok((mu_a, s_aa));
    }
    let mu_b = select_vec(mean, b);
    let s_ab = select(cov, a, b);
    let s_bb = select(cov, b, b);
    let chol = cholesky_jittered(&s_bb, step, "conditioning block")?;
    let resid = DMatrix::from_column_slice(b.len(), 1, (value_b - mu_b).as_slice());
    let gain_t = chol.solve(&s_ab.transpose()); // S_bb^{-1} S_ba
    let cond_mean = mu_a + (&s_ab * chol.solve(&resid)).column(0);
    let mut cond_cov = s_aa - &s_ab * gain_t;
    symmetrize(&mut cond_cov);
    Ok((cond_mean, cond_cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_covariance_returns_mean_exactly() {
        let mean = DVector::from_vec(vec![1.5, -2.0, 0.25]);
        let cov = DMatrix::zeros(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = sample_mvn(&mean, &cov, &mut rng, 0, "zero").unwrap();
        assert_eq!(x, mean);
    }

    #[test]
    fn indefinite_covariance_is_rejected() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(psd_sqrt(&cov, 7, "bad").unwrap_err().is_numerical());
    }

    #[test]
    fn jitter_rescues_rank_deficient_matrix_once() {
        // rank one plus tiny negative rounding noise
        let v = DVector::from_vec(vec![1.0, 1.0]);
        let m = &v * v.transpose();
        assert!(cholesky_jittered(&m, 0, "rank one").is_ok());
        assert!(cholesky_jittered(&DMatrix::zeros(2, 2), 0, "zero").is_err());
    }

    #[test]
    fn conditioning_matches_bivariate_formula() {
        let mean = DVector::from_vec(vec![1.0, 2.0]);
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let (m, c) =
            condition_gaussian(&mean, &cov, &[0], &[1], &DVector::from_vec(vec![3.0]), 0).unwrap();
        assert!((m[0] - (1.0 + 0.6 * 1.0)).abs() < 1e-14);
        assert!((c[(0, 0)] - (2.0 - 0.36)).abs() < 1e-14);
    }
}
