//! Small statistical helpers: running moments, standard errors and
//! Kolmogorov–Smirnov distances.

use statrs::distribution::{ContinuousCDF, Normal};

/// Welford accumulator for mean and variance.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Combines two accumulators (order-independent up to rounding).
    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (0 for fewer than two points).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::new();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Mean, unbiased variance and their standard errors of a sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
}

/// The variance SE uses the fourth central moment:
/// `Var(s²) ≈ (m4 - s⁴ (n-3)/(n-1)) / n`.
pub fn summarize(xs: &[f64]) -> Summary {
    let m: Moments = xs.iter().copied().collect();
    let n = xs.len() as f64;
    let var = m.variance();
    let m4 = xs.iter().map(|x| (x - m.mean()).powi(4)).sum::<f64>() / n;
    let var_of_var = if xs.len() > 3 { ((m4 - var * var * (n - 3.0) / (n - 1.0)) / n).max(0.0) } else { f64::NAN };
    Summary { mean: m.mean(), mean_se: m.se(), variance: var, variance_se: var_of_var.sqrt() }
}

/// `sup |F_n - F|` for a sample against a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// KS distance of a sample to the standard normal law.
pub fn ks_normal(xs: &[f64]) -> f64 {
    let z = Normal::standard();
    ks_one_sample(xs, |x| z.cdf(x))
}

/// Two-sample KS statistic; ties are handled by advancing both samples
/// past equal values before comparing the empirical CDFs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value `c(α) sqrt((n+m)/(n m))`.
pub fn ks_critical(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn welford_matches_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let m: Moments = xs.iter().copied().collect();
        let mean = xs.iter().sum::<f64>() / 1000.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 999.0;
        assert_relative_eq!(m.mean(), mean, epsilon = 1e-12);
        assert_relative_eq!(m.variance(), var, epsilon = 1e-10);
        let (l, r) = xs.split_at(313);
        let mut a: Moments = l.iter().copied().collect();
        a.merge(&r.iter().copied().collect());
        assert_relative_eq!(a.variance(), var, epsilon = 1e-10);
    }

    #[test]
    fn ks_values() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert_relative_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[2.5]), 2.0 / 3.0);
        // single point at the median of N(0,1)
        assert_relative_eq!(ks_normal(&[0.0]), 0.5, epsilon = 1e-12);
        assert_relative_eq!(ks_critical(0.01, 10_000, 10_000), 0.02302, epsilon = 1e-4);
    }
}
