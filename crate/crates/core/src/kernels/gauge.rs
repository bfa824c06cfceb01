//! Diagonal conjugation factors. Conjugating a kernel by any nonvanishing
//! diagonal leaves every Fredholm determinant unchanged; the asymptotic
//! analysis uses the specific exponential family below, whose ratio between
//! two index points is the printed conjugation constant (up to the lattice
//! scale factor, which cancels in determinants).

use crate::lattice::SpaceLikePoint;

/// `c(p, x) = e^{alpha t} (alpha-1)^n alpha^{-(x+n)}`, held in log-magnitude
/// and sign so ratios never overflow and the `(alpha-1)^n` sign is exact.
#[derive(Debug, Clone, Copy)]
pub struct DiagonalGauge {
    pub alpha: f64,
}

impl DiagonalGauge {
    pub fn new(alpha: f64) -> Self {
        assert!(0.0 < alpha && alpha < 1.0);
        DiagonalGauge { alpha }
    }

    /// (sign, log-magnitude) of `c(p, x)`.
    pub fn log_factor(&self, p: &SpaceLikePoint, x: i64) -> (f64, f64) {
        let n = p.n as i64;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let log_mag = self.alpha * p.t + n as f64 * (1.0 - self.alpha).ln()
            - (x + n) as f64 * self.alpha.ln();
        (sign, log_mag)
    }

    /// The multiplier applied to a kernel entry when conjugating:
    /// `c(p1, x1) / c(p2, x2)`.
    pub fn ratio(&self, p1: &SpaceLikePoint, x1: i64, p2: &SpaceLikePoint, x2: i64) -> f64 {
        let (s1, l1) = self.log_factor(p1, x1);
        let (s2, l2) = self.log_factor(p2, x2);
        s1 * s2 * (l1 - l2).exp()
    }
}
