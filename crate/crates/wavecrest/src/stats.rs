//! Small statistics toolkit used by the ensemble experiments: moments,
//! correlation and regression with jackknife standard errors, and the
//! Kolmogorov-Smirnov and chi-square goodness-of-fit machinery.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_lr;

pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    assert!(xs.len() >= 2);
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// The five power sums a correlation or regression needs.
#[derive(Debug, Clone, Copy)]
struct PairSums {
    n: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl PairSums {
    fn collect(xs: &[f64], ys: &[f64]) -> Self {
        assert_eq!(xs.len(), ys.len());
        let mut s = PairSums { n: 0.0, sx: 0.0, sy: 0.0, sxx: 0.0, syy: 0.0, sxy: 0.0 };
        for (&x, &y) in xs.iter().zip(ys) {
            s.n += 1.0;
            s.sx += x;
            s.sy += y;
            s.sxx += x * x;
            s.syy += y * y;
            s.sxy += x * y;
        }
        s
    }

    fn without(&self, x: f64, y: f64) -> Self {
        PairSums {
            n: self.n - 1.0,
            sx: self.sx - x,
            sy: self.sy - y,
            sxx: self.sxx - x * x,
            syy: self.syy - y * y,
            sxy: self.sxy - x * y,
        }
    }

    fn correlation(&self) -> f64 {
        let cov = self.sxy - self.sx * self.sy / self.n;
        let vx = self.sxx - self.sx * self.sx / self.n;
        let vy = self.syy - self.sy * self.sy / self.n;
        cov / (vx * vy).sqrt()
    }

    fn slope(&self) -> f64 {
        let cov = self.sxy - self.sx * self.sy / self.n;
        let vx = self.sxx - self.sx * self.sx / self.n;
        cov / vx
    }

    fn covariance(&self) -> f64 {
        (self.sxy - self.sx * self.sy / self.n) / (self.n - 1.0)
    }
}

/// Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    PairSums::collect(xs, ys).correlation()
}

/// Least-squares slope of `y` regressed on `x`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    PairSums::collect(xs, ys).slope()
}

/// A point estimate together with its jackknife standard error.
#[derive(Debug, Clone, Copy)]
pub struct JackknifeEstimate {
    pub estimate: f64,
    pub se: f64,
}

fn jackknife<F: Fn(&PairSums) -> f64>(xs: &[f64], ys: &[f64], stat: F) -> JackknifeEstimate {
    let sums = PairSums::collect(xs, ys);
    assert!(sums.n >= 3.0);
    let full = stat(&sums);
    // Leave-one-out replicates come straight from the global power sums,
    // so the whole thing is a single O(n) sweep.
    let n = xs.len();
    let mut loo = Vec::with_capacity(n);
    let mut sum = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let r = stat(&sums.without(x, y));
        loo.push(r);
        sum += r;
    }
    let bar = sum / n as f64;
    let ss: f64 = loo.iter().map(|r| (r - bar) * (r - bar)).sum();
    JackknifeEstimate { estimate: full, se: ((n as f64 - 1.0) / n as f64 * ss).sqrt() }
}

/// Pearson correlation with a leave-one-out jackknife standard error.
pub fn pearson_jackknife(xs: &[f64], ys: &[f64]) -> JackknifeEstimate {
    jackknife(xs, ys, PairSums::correlation)
}

/// Regression slope with a leave-one-out jackknife standard error.
pub fn slope_jackknife(xs: &[f64], ys: &[f64]) -> JackknifeEstimate {
    jackknife(xs, ys, PairSums::slope)
}

/// Sample covariance with a leave-one-out jackknife standard error.
pub fn covariance_jackknife(xs: &[f64], ys: &[f64]) -> JackknifeEstimate {
    jackknife(xs, ys, PairSums::covariance)
}

/// Two-sided Kolmogorov-Smirnov distance of a sample against a reference CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    assert!(!samples.is_empty());
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i as f64 + 1.0) / n - f);
    }
    d
}

/// Asymptotic Kolmogorov tail probability `P(√n·D > x)` via the alternating
/// series `2 Σ_{k≥1} (−1)^{k−1} e^{−2k²x²}`.
pub fn kolmogorov_pvalue(d: f64, n: usize) -> f64 {
    let x = d * (n as f64).sqrt();
    if x < 1e-3 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-2.0 * (k as f64) * (k as f64) * x * x).exp();
        p += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// Chi-square statistic of a sample against equiprobable bins delimited by
/// the given inner edges (so `edges.len() + 1` bins, each of expected share
/// `n / bins`).
pub fn chi_square_statistic(samples: &[f64], edges: &[f64]) -> f64 {
    let bins = edges.len() + 1;
    let mut counts = vec![0usize; bins];
    for &x in samples {
        let idx = edges.partition_point(|&e| e < x);
        counts[idx] += 1;
    }
    let expected = samples.len() as f64 / bins as f64;
    counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum()
}

/// Inner edges splitting a distribution into `bins` equiprobable cells, found
/// by bisecting the CDF on `[lo, hi]`.
pub fn equiprobable_edges<F: Fn(f64) -> f64>(cdf: F, bins: usize, lo: f64, hi: f64) -> Vec<f64> {
    assert!(bins >= 2);
    let mut edges = Vec::with_capacity(bins - 1);
    for k in 1..bins {
        let target = k as f64 / bins as f64;
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if cdf(m) < target {
                a = m;
            } else {
                b = m;
            }
        }
        edges.push(0.5 * (a + b));
    }
    edges
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Chi-square CDF with `dof` degrees of freedom.
pub fn chi_square_cdf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    gamma_lr(dof / 2.0, x / 2.0)
}

/// Upper quantile: the value exceeded with probability `1 − p` under the
/// chi-square law with `dof` degrees of freedom.
pub fn chi_square_critical(dof: f64, p: f64) -> f64 {
    ChiSquared::new(dof).expect("positive dof").inverse_cdf(p)
}

/// Streaming mean and variance with an associative merge, so chunks computed
/// in parallel combine into the same result as a single pass.
#[derive(Debug, Clone, Copy, Default)]
pub struct MomentAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MomentAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MomentAccumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let d = other.mean - self.mean;
        let total = na + nb;
        self.mean += d * nb / total;
        self.m2 += other.m2 + d * d * na * nb / total;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased variance; needs at least two observations.
    pub fn variance(&self) -> f64 {
        assert!(self.n >= 2);
        self.m2 / (self.n as f64 - 1.0)
    }

    /// Standard error of the mean.
    pub fn se_mean(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}
