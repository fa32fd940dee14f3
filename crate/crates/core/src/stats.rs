//! Statistics helpers: quantiles, moments, Rayleigh fits and the
//! one-sample Kolmogorov-Smirnov test.

use crate::error::{Error, Result};

/// Type-7 quantile (linear interpolation between order statistics) of an
/// already sorted, non-empty slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&q));
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Type-7 quantile of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData {
            what: "quantile",
            need: 1,
            got: 0,
        });
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain("quantile", q, "must lie in [0, 1]"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, q))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn std_dev(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss: f64 = values.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (values.len() as f64 - 1.0)).sqrt()
}

/// CDF of the Rayleigh distribution with scale `sigma`,
/// `1 - exp(-x²/(2σ²))`.
pub fn rayleigh_cdf(x: f64, sigma: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-x * x / (2.0 * sigma * sigma)).exp_m1()
    }
}

/// Maximum-likelihood Rayleigh scale `σ̂ = √(Σx²/2n)`.
pub fn rayleigh_scale_mle(values: &[f64]) -> f64 {
    let mean_sq = values.iter().map(|x| x * x).sum::<f64>() / values.len() as f64;
    (0.5 * mean_sq).sqrt()
}

/// Result of a one-sample Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

impl KsTest {
    /// Whether the null hypothesis survives at significance `alpha`.
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

/// One-sample KS test of `samples` against the continuous CDF `cdf`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsTest> {
    if samples.is_empty() {
        return Err(Error::InsufficientData {
            what: "KS test",
            need: 1,
            got: 0,
        });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max);
    let sqrt_n = n.sqrt();
    let p_value = kolmogorov_survival((sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic);
    Ok(KsTest {
        statistic,
        p_value,
        n: sorted.len(),
    })
}

/// Survival function of the Kolmogorov distribution,
/// `Q(t) = 2 Σ_{k≥1} (-1)^(k-1) exp(-2k²t²)`.
pub fn kolmogorov_survival(t: f64) -> f64 {
    if t < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * t * t).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// `n` points evenly spaced in log between `lo` and `hi` (inclusive).
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (l, h) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        hi
                    } else {
                        (l + (h - l) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn type7_quantile_hand_values() {
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_relative_eq!(quantile(&xs, 0.9).unwrap(), 9.1, max_relative = 1e-15);
        assert_eq!(quantile(&xs, 1.0).unwrap(), 10.0);
        assert_eq!(quantile(&xs, 0.0).unwrap(), 1.0);
        assert_relative_eq!(quantile(&xs, 0.5).unwrap(), 5.5);
        assert_eq!(quantile(&[4.0], 0.3).unwrap(), 4.0);
        assert!(quantile(&[], 0.5).is_err());
        assert!(quantile(&xs, 1.5).is_err());
    }

    #[test]
    fn kolmogorov_critical_values() {
        // Tabulated asymptotic critical values: Q(1.3581) = 0.05, Q(1.6276) = 0.01.
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-4);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn ks_rejects_wrong_scale() {
        // Deterministic Rayleigh(1) quantile grid.
        let n = 2000;
        let xs: Vec<f64> = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                (-2.0 * (1.0 - u).ln()).sqrt()
            })
            .collect();
        assert!(ks_test(&xs, |x| rayleigh_cdf(x, 1.0)).unwrap().passes(0.01));
        assert!(!ks_test(&xs, |x| rayleigh_cdf(x, 1.2)).unwrap().passes(0.01));
    }

    #[test]
    fn rayleigh_mle_on_constant() {
        assert_relative_eq!(rayleigh_scale_mle(&[2.0; 10]), 2.0 / 2f64.sqrt());
    }

    #[test]
    fn log_space_endpoints() {
        let g = log_space(0.1, 10.0, 3);
        assert_eq!(g.len(), 3);
        assert_relative_eq!(g[1], 1.0, max_relative = 1e-15);
        assert_eq!(g[2], 10.0);
    }
}
