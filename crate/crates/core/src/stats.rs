//! Summary statistics and Kolmogorov–Smirnov tests used by the checks.

use serde::Serialize;

/// Primary test level.
pub const LEVEL_PRIMARY: f64 = 0.05;
/// Level used for multiple comparisons (before Bonferroni adjustment).
pub const LEVEL_MULTIPLE: f64 = 0.01;

/// Sample mean with a normal-approximation 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateWithCI {
    pub mean: f64,
    /// `1.96 sd / sqrt(n)`.
    pub half_width_95: f64,
    pub n: usize,
    pub censored_fraction: f64,
}

impl EstimateWithCI {
    /// Exact value with zero width (e.g. trivial cases).
    pub fn exact(value: f64, n: usize) -> Self {
        EstimateWithCI {
            mean: value,
            half_width_95: 0.0,
            n,
            censored_fraction: 0.0,
        }
    }

    /// Estimate from samples, `censored` of which were censored.
    pub fn from_samples(samples: &[f64], censored: usize) -> Self {
        let n = samples.len();
        let (mean, var) = mean_var(samples);
        EstimateWithCI {
            mean,
            half_width_95: 1.96 * (var / n.max(1) as f64).sqrt(),
            n,
            censored_fraction: if n == 0 {
                0.0
            } else {
                censored as f64 / n as f64
            },
        }
    }

    pub fn lo(&self) -> f64 {
        self.mean - self.half_width_95
    }

    pub fn hi(&self) -> f64 {
        self.mean + self.half_width_95
    }

    /// The two 95% intervals intersect.
    pub fn overlaps(&self, other: &EstimateWithCI) -> bool {
        self.lo() <= other.hi() && other.lo() <= self.hi()
    }

    pub fn standard_error(&self) -> f64 {
        self.half_width_95 / 1.96
    }
}

/// Mean and unbiased variance (compensated two-pass).
pub fn mean_var(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let (mut ss, mut comp) = (0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        ss += d * d;
        comp += d;
    }
    (mean, (ss - comp * comp / n as f64) / (n - 1) as f64)
}

/// Asymptotic Kolmogorov critical coefficient `c(a) = sqrt(-ln(a/2) / 2)`.
pub fn ks_coefficient(level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt()
}

/// Level for each of `m` comparisons at family-wise level `level`.
pub fn bonferroni(level: f64, m: usize) -> f64 {
    level / m.max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KSReport {
    pub statistic: f64,
    /// Sample size (effective size `nm/(n+m)` for two samples).
    pub n: usize,
    pub threshold_5pct: f64,
    /// Level the decision is taken at.
    pub level: f64,
    pub threshold: f64,
    pub rejected: bool,
}

impl KSReport {
    fn new(statistic: f64, n: usize, scale: f64, level: f64) -> Self {
        let threshold = ks_coefficient(level) * scale;
        KSReport {
            statistic,
            n,
            threshold_5pct: ks_coefficient(LEVEL_PRIMARY) * scale,
            level,
            threshold,
            rejected: statistic > threshold,
        }
    }
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// One-sample KS statistic `sup |F_n - F|` against a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let s = sorted(samples);
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// One-sample KS test at `level`; `+inf` samples (censored to the right)
/// are allowed.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64, level: f64) -> KSReport {
    let n = samples.len();
    let d = ks_statistic(samples, |x| if x.is_finite() { cdf(x) } else { 1.0 });
    KSReport::new(d, n, 1.0 / (n as f64).sqrt(), level)
}

/// Two-sample KS statistic `sup |F_n - G_m|`.
pub fn ks_two_sample_statistic(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (n, m) = (a.len() as f64, b.len() as f64);
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
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Two-sample KS test at `level`.
pub fn ks_two_sample(a: &[f64], b: &[f64], level: f64) -> KSReport {
    let (n, m) = (a.len() as f64, b.len() as f64);
    let d = ks_two_sample_statistic(a, b);
    let n_eff = n * m / (n + m);
    KSReport::new(d, n_eff.round() as usize, (1.0 / n_eff).sqrt(), level)
}

/// CDF of the sum of `k` independent `Exp(rate)` variables.
pub fn erlang_cdf(k: usize, rate: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let x = rate * t;
    // P(Poisson(x) <= k - 1), summed in log space
    let mut term = -x;
    let mut tail = 0.0;
    for j in 0..k {
        if j > 0 {
            term += x.ln() - (j as f64).ln();
        }
        tail += term.exp();
    }
    (1.0 - tail).clamp(0.0, 1.0)
}
