//! Sample summaries shared by the sampler, the interpolator and the CLI.

use statrs::function::erf::erfc;

/// Type-7 sample quantile (linear interpolation between order statistics).
///
/// `sorted` must be ascending and non-empty; `p` is clamped to `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let p = p.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Type-7 quantile of an unsorted sample.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    quantile_sorted(&sorted_copy(values), p)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Kendall's tau-b with the tie-corrected normal approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KendallTau {
    pub tau: f64,
    /// Two-sided p-value for no association.
    pub p_value: f64,
    pub z: f64,
}

fn tie_groups(v: &[f64]) -> Vec<usize> {
    let s = sorted_copy(v);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let mut j = i + 1;
        while j < s.len() && s[j] == s[i] {
            j += 1;
        }
        if j - i > 1 {
            groups.push(j - i);
        }
        i = j;
    }
    groups
}

pub fn kendall_tau(x: &[f64], y: &[f64]) -> KendallTau {
    assert_eq!(x.len(), y.len(), "kendall_tau needs paired samples");
    let n = x.len();
    let mut s = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = (x[i] - x[j]).partial_cmp(&0.0).map_or(0, |o| o as i64);
            let dy = (y[i] - y[j]).partial_cmp(&0.0).map_or(0, |o| o as i64);
            s += dx * dy;
        }
    }
    let nf = n as f64;
    let n0 = nf * (nf - 1.0) / 2.0;
    let tx = tie_groups(x);
    let ty = tie_groups(y);
    let pairs = |g: &[usize]| g.iter().map(|&t| (t * (t - 1)) as f64 / 2.0).sum::<f64>();
    let (n1, n2) = (pairs(&tx), pairs(&ty));
    let denom = ((n0 - n1) * (n0 - n2)).sqrt();
    let tau = if denom > 0.0 { s as f64 / denom } else { 0.0 };

    let f = |g: &[usize], k: fn(f64) -> f64| g.iter().map(|&t| k(t as f64)).sum::<f64>();
    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let vt = f(&tx, |t| t * (t - 1.0) * (2.0 * t + 5.0));
    let vu = f(&ty, |t| t * (t - 1.0) * (2.0 * t + 5.0));
    let v1 = f(&tx, |t| t * (t - 1.0)) * f(&ty, |t| t * (t - 1.0)) / (2.0 * nf * (nf - 1.0));
    let v2 = f(&tx, |t| t * (t - 1.0) * (t - 2.0)) * f(&ty, |t| t * (t - 1.0) * (t - 2.0))
        / (9.0 * nf * (nf - 1.0) * (nf - 2.0));
    let var = (v0 - vt - vu) / 18.0 + v1 + v2;
    let (z, p_value) = if var > 0.0 {
        let z = s as f64 / var.sqrt();
        (z, (2.0 * (1.0 - normal_cdf(z.abs()))).min(1.0))
    } else {
        (0.0, 1.0)
    };
    KendallTau { tau, p_value, z }
}

/// Two-sided one-sample Kolmogorov-Smirnov statistic and its asymptotic
/// p-value against a continuous CDF.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let s = sorted_copy(sample);
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    // Kolmogorov distribution tail with the small-sample correction of Stephens
    let lam = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lam * lam).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    (d, p.clamp(0.0, 1.0))
}
