//! Small statistics helpers shared by the simulation and test layers.

/// Pairwise (cascade) summation. Deterministic for a fixed input order and
/// substantially more accurate than a running sum for long quadrature node
/// lists.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Upper tail `P(X >= k)` of a Poisson(lambda) variable.
pub fn poisson_tail(k: i64, lambda: f64) -> f64 {
    assert!(lambda >= 0.0 && lambda.is_finite());
    if k <= 0 {
        return 1.0;
    }
    // Lower tail summed term by term is stable for the lambdas used here.
    let mut term = (-lambda).exp();
    let mut below = 0.0;
    for j in 0..k {
        below += term;
        term *= lambda / (j + 1) as f64;
    }
    (1.0 - below).clamp(0.0, 1.0)
}

/// Wilson score interval for a binomial proportion, at `z` standard errors.
pub fn wilson_band(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    assert!(trials > 0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Right-tail empirical distribution `x -> P(sample >= x)` with Wilson bands.
#[derive(Debug, Clone)]
pub struct EcdfTail {
    sorted: Vec<i64>,
}

impl EcdfTail {
    pub fn new(mut samples: Vec<i64>) -> Self {
        assert!(!samples.is_empty(), "empty sample set");
        samples.sort_unstable();
        EcdfTail { sorted: samples }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn min(&self) -> i64 {
        self.sorted[0]
    }

    pub fn max(&self) -> i64 {
        *self.sorted.last().unwrap()
    }

    /// Number of samples `>= x`.
    pub fn count_ge(&self, x: i64) -> u64 {
        let idx = self.sorted.partition_point(|&s| s < x);
        (self.sorted.len() - idx) as u64
    }

    /// Empirical `P(sample >= x)`.
    pub fn tail(&self, x: i64) -> f64 {
        self.count_ge(x) as f64 / self.sorted.len() as f64
    }

    /// Wilson band for the tail probability at `x`.
    pub fn tail_band(&self, x: i64, z: f64) -> (f64, f64) {
        wilson_band(self.count_ge(x), self.sorted.len() as u64, z)
    }

    /// True when `p` lies inside the Wilson band at every integer in
    /// `[lo, hi]`, where `p` is evaluated by the caller's reference law.
    /// A small epsilon absorbs rounding at the band edges (p-hat = 1 gives
    /// an upper bound of 1 only up to float arithmetic).
    pub fn tail_matches(&self, lo: i64, hi: i64, z: f64, reference: impl Fn(i64) -> f64) -> bool {
        (lo..=hi).all(|x| {
            let (a, b) = self.tail_band(x, z);
            let p = reference(x);
            p >= a - 1e-12 && p <= b + 1e-12
        })
    }
}

/// Two-sided Kolmogorov–Smirnov statistic between a sample of reals and a
/// reference CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    assert!(!samples.is_empty());
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max((f - (i + 1) as f64 / n).abs());
    }
    d
}

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}
