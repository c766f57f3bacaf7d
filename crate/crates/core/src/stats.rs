//! Comparison statistics: Kolmogorov–Smirnov distances, jackknife errors,
//! simple summaries.

use crate::error::{Error, Result};

/// Two-sample KS distance between sorted samples.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    ks_distance_below(a, b, f64::INFINITY)
}

/// Two-sample KS distance with the supremum restricted to `t < limit`.
///
/// Both empirical CDFs keep their full sample sizes as denominators, so
/// values at or above `limit` (e.g. censored observations) only count as
/// "not yet reached".
pub fn ks_distance_below(a: &[f64], b: &[f64], limit: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("KS distance needs nonempty samples".into()));
    }
    debug_assert!(a.windows(2).all(|w| w[0] <= w[1]));
    debug_assert!(b.windows(2).all(|w| w[0] <= w[1]));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let t = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        if t >= limit {
            break;
        }
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// One-sample KS distance of a sorted sample against a continuous CDF.
pub fn ks_against_cdf<F: Fn(f64) -> f64>(a: &[f64], cdf: F) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::Domain("KS distance needs a nonempty sample".into()));
    }
    let n = a.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in a.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    Ok(d)
}

/// Asymptotic two-sample KS critical value `c(α) √((n+m)/(nm))`.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Sample mean and its standard error `sd/√n`.
pub fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Jackknife estimate and standard error of `stat` over `samples`.
///
/// Uses delete-one recomputation; `stat` receives the retained samples.
pub fn jackknife<T, F>(samples: &[T], stat: F) -> (f64, f64)
where
    T: Clone,
    F: Fn(&[T]) -> f64,
{
    let n = samples.len();
    let full = stat(samples);
    if n < 2 {
        return (full, f64::NAN);
    }
    let mut buf: Vec<T> = samples[1..].to_vec();
    let mut leave_out = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            // buf currently omits sample i-1; swap it back in place of i
            buf[i - 1] = samples[i - 1].clone();
        }
        leave_out.push(stat(&buf));
    }
    let mean = leave_out.iter().sum::<f64>() / n as f64;
    let var = leave_out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() * (n - 1) as f64
        / n as f64;
    (full, var.sqrt())
}

/// Jackknife standard error of a sample mean of per-sample values; closed
/// form equal to `sd/√n`.
pub fn jackknife_mean(values: &[f64]) -> (f64, f64) {
    mean_and_se(values)
}

/// Unbiased variance with its delete-one jackknife standard error, in
/// linear time.
pub fn jackknife_variance(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    let full = variance(x);
    if n < 3 {
        return (full, f64::NAN);
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    // centred sums keep the leave-one-out updates well conditioned
    let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let loo: Vec<f64> = x
        .iter()
        .map(|v| {
            let d = v - mean;
            // removing v shifts the mean by -d/(n-1)
            (ss - d * d * nf / (nf - 1.0)) / (nf - 2.0)
        })
        .collect();
    let m = loo.iter().sum::<f64>() / nf;
    let var = loo.iter().map(|v| (v - m).powi(2)).sum::<f64>() * (nf - 1.0) / nf;
    (full, var.sqrt())
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Empirical quantile (type 7) of a sorted sample.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ks_identical_and_disjoint() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_distance(&a, &[4.0, 5.0]).unwrap(), 1.0);
        assert!(ks_distance(&[], &a).is_err());
    }

    #[test]
    fn ks_with_ties() {
        assert_eq!(ks_distance(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn ks_restricted_ignores_censored_region() {
        let a = [0.1, 0.2, 5.0, 5.0];
        let b = [0.1, 0.2, 7.0, 9.0];
        assert_eq!(ks_distance_below(&a, &b, 5.0).unwrap(), 0.0);
        assert_eq!(ks_distance(&a, &b).unwrap(), 0.5);
    }

    #[test]
    fn ks_against_uniform_cdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = sorted((0..20_000).map(|_| rng.random::<f64>()).collect());
        let d = ks_against_cdf(&s, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(d < 1.63 / (20_000f64).sqrt());
    }

    #[test]
    fn ks_same_sampler_below_critical_value_mostly() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 10_000;
        let crit = ks_critical(n, n, 0.01);
        assert!((crit - 0.023).abs() < 0.001);
        let reps = 200;
        let mut exceed = 0;
        for _ in 0..reps {
            let a = sorted((0..n).map(|_| rng.random::<f64>()).collect());
            let b = sorted((0..n).map(|_| rng.random::<f64>()).collect());
            if ks_distance(&a, &b).unwrap() > crit {
                exceed += 1;
            }
        }
        // 1% nominal; allow binomial fluctuation
        assert!(exceed <= 6, "{exceed} exceedances of {reps}");
    }

    #[test]
    fn jackknife_of_mean_matches_closed_form() {
        let x = [1.0, 4.0, 2.0, 8.0, 5.0];
        let (est, se) = jackknife(&x, |s| s.iter().sum::<f64>() / s.len() as f64);
        let (m, se2) = mean_and_se(&x);
        assert!((est - m).abs() < 1e-14);
        assert!((se - se2).abs() < 1e-12);
    }

    #[test]
    fn jackknife_variance_matches_recomputation() {
        let x = [1.0, 4.0, 2.0, 8.0, 5.0, -3.0];
        let (v, se) = jackknife_variance(&x);
        let (v2, se2) = jackknife(&x, variance);
        assert!((v - v2).abs() < 1e-12);
        assert!((se - se2).abs() < 1e-12, "{se} vs {se2}");
    }

    #[test]
    fn slope_of_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        assert!((ols_slope(&x, &y) - 3.0).abs() < 1e-14);
    }
}
