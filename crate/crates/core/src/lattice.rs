//! Domain types: particle configurations, observation points, and the
//! mapping between the exclusion process and the zero-range process.

use std::cmp::Ordering;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("alpha must lie in (0,1), got {0}")]
    AlphaOutOfRange(f64),
    #[error("need at least one particle")]
    EmptySystem,
    #[error("positions must be strictly decreasing (violated at index {0})")]
    NotExclusive(usize),
    #[error("rates must be positive (violated at index {0})")]
    BadRate(usize),
    #[error("observation points must have nonincreasing n and nondecreasing t (violated at index {0})")]
    NotSpaceLike(usize),
    #[error("points/cutoffs length mismatch: {points} vs {cutoffs}")]
    CutoffMismatch { points: usize, cutoffs: usize },
    #[error("time must be finite and nonnegative, got {0}")]
    BadTime(f64),
    #[error("need at least two particles to read off gaps")]
    TooFewParticles,
}

/// Ordered particle positions with per-particle jump rates and a clock.
///
/// Particle `n` (1-based, as in the formulas) lives at `positions[n-1]`;
/// positions are strictly decreasing so that at most one particle occupies a
/// site. In the two-speed system the first `slow_count` particles carry rate
/// `alpha`, the rest rate 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    positions: Vec<i64>,
    rates: Vec<f64>,
    pub time: f64,
    pub slow_count: usize,
    pub alpha: f64,
}

impl ParticleSystem {
    pub fn new(
        positions: Vec<i64>,
        rates: Vec<f64>,
        time: f64,
        slow_count: usize,
        alpha: f64,
    ) -> Result<Self, LatticeError> {
        if positions.is_empty() {
            return Err(LatticeError::EmptySystem);
        }
        if !(0.0 < alpha && alpha < 1.0) {
            return Err(LatticeError::AlphaOutOfRange(alpha));
        }
        if !(time.is_finite() && time >= 0.0) {
            return Err(LatticeError::BadTime(time));
        }
        assert_eq!(positions.len(), rates.len());
        for i in 1..positions.len() {
            if positions[i] >= positions[i - 1] {
                return Err(LatticeError::NotExclusive(i));
            }
        }
        for (i, &r) in rates.iter().enumerate() {
            if !(r.is_finite() && r > 0.0) {
                return Err(LatticeError::BadRate(i));
            }
        }
        Ok(ParticleSystem { positions, rates, time, slow_count, alpha })
    }

    /// Packed initial condition: `N` particles at `M-1, M-2, ..., M-N`, the
    /// first `min(M, N)` of them slow with rate `alpha`.
    pub fn step(slow_count: usize, alpha: f64, n_particles: usize) -> Result<Self, LatticeError> {
        if n_particles == 0 {
            return Err(LatticeError::EmptySystem);
        }
        if !(0.0 < alpha && alpha < 1.0) {
            return Err(LatticeError::AlphaOutOfRange(alpha));
        }
        let m = slow_count as i64;
        let positions: Vec<i64> = (0..n_particles as i64).map(|i| m - 1 - i).collect();
        let rates: Vec<f64> = (0..n_particles)
            .map(|i| if i < slow_count { alpha } else { 1.0 })
            .collect();
        Ok(ParticleSystem { positions, rates, time: 0.0, slow_count, alpha })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Position of particle `n`, 1-based.
    pub fn position(&self, n: usize) -> i64 {
        self.positions[n - 1]
    }

    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Checks the exclusion invariant; used after mutating operations.
    pub fn check_exclusion(&self) -> Result<(), LatticeError> {
        for i in 1..self.positions.len() {
            if self.positions[i] >= self.positions[i - 1] {
                return Err(LatticeError::NotExclusive(i));
            }
        }
        Ok(())
    }
}

/// Convenience constructor mirroring the operation name used throughout the
/// test suite.
pub fn make_step_system(
    slow_count: usize,
    alpha: f64,
    n_particles: usize,
) -> Result<ParticleSystem, LatticeError> {
    ParticleSystem::step(slow_count, alpha, n_particles)
}

/// An observation point: particle index `n` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceLikePoint {
    pub n: usize,
    pub t: f64,
}

impl SpaceLikePoint {
    pub fn new(n: usize, t: f64) -> Result<Self, LatticeError> {
        if n == 0 {
            return Err(LatticeError::EmptySystem);
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(LatticeError::BadTime(t));
        }
        Ok(SpaceLikePoint { n, t })
    }
}

impl Eq for SpaceLikePoint {}

impl Ord for SpaceLikePoint {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n
            .cmp(&other.n)
            .then_with(|| self.t.total_cmp(&other.t))
    }
}

impl PartialOrd for SpaceLikePoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Observation points ordered space-like: particle indices nonincreasing,
/// times nondecreasing, with one integer cutoff per point.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceLikeSet {
    points: Vec<SpaceLikePoint>,
    cutoffs: Vec<i64>,
}

impl SpaceLikeSet {
    pub fn new(points: Vec<SpaceLikePoint>, cutoffs: Vec<i64>) -> Result<Self, LatticeError> {
        if points.len() != cutoffs.len() {
            return Err(LatticeError::CutoffMismatch {
                points: points.len(),
                cutoffs: cutoffs.len(),
            });
        }
        for i in 1..points.len() {
            if points[i].n > points[i - 1].n || points[i].t < points[i - 1].t {
                return Err(LatticeError::NotSpaceLike(i));
            }
        }
        Ok(SpaceLikeSet { points, cutoffs })
    }

    /// Points only; cutoffs zeroed. Used when recording, where no thresholds
    /// are involved.
    pub fn from_points(points: Vec<SpaceLikePoint>) -> Result<Self, LatticeError> {
        let cutoffs = vec![0; points.len()];
        Self::new(points, cutoffs)
    }

    pub fn points(&self) -> &[SpaceLikePoint] {
        &self.points
    }

    pub fn cutoffs(&self) -> &[i64] {
        &self.cutoffs
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_time(&self) -> f64 {
        self.points.iter().map(|p| p.t).fold(0.0, f64::max)
    }

    pub fn max_particle(&self) -> usize {
        self.points.iter().map(|p| p.n).max().unwrap_or(0)
    }
}

/// Zero-range configuration on sites `1..=L-1` with injection at the
/// right-most site.
///
/// `occupations` is stored from the injection end: `occupations[0]` is site
/// `L-1` (where particles enter at rate `injection_rate`), the last entry is
/// site 1 (whose particles exit the system when they hop). Under the gap
/// mapping `occupations[j-1]` is the gap between exclusion particles `j` and
/// `j+1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZrpConfig {
    pub occupations: Vec<u64>,
    pub l_sites: usize,
    injection_rate_bits: u64,
}

impl ZrpConfig {
    pub fn new(occupations: Vec<u64>, injection_rate: f64) -> Result<Self, LatticeError> {
        if !(0.0 < injection_rate && injection_rate < 1.0) {
            return Err(LatticeError::AlphaOutOfRange(injection_rate));
        }
        let l_sites = occupations.len() + 1;
        Ok(ZrpConfig {
            occupations,
            l_sites,
            injection_rate_bits: injection_rate.to_bits(),
        })
    }

    pub fn injection_rate(&self) -> f64 {
        f64::from_bits(self.injection_rate_bits)
    }

    /// Occupation of lattice site `j` in `1..=L-1`.
    pub fn site(&self, j: usize) -> u64 {
        assert!(j >= 1 && j < self.l_sites);
        self.occupations[self.l_sites - 1 - j]
    }
}

/// Gap mapping, zero-range to exclusion. Produces `L+1` particles: the lead
/// particle sits at the anchor position 0 and carries the injection rate, and
/// the gap between particles `j` and `j+1` equals `occupations[j-1]`; the
/// final gap (behind particle `L`) starts at zero and accumulates exits.
pub fn zrp_to_tasep(z: &ZrpConfig) -> ParticleSystem {
    let alpha = z.injection_rate();
    let mut positions = Vec::with_capacity(z.l_sites + 1);
    let mut x = 0i64;
    positions.push(x);
    for &gap in &z.occupations {
        x -= 1 + gap as i64;
        positions.push(x);
    }
    positions.push(x - 1); // exit accumulator gap starts empty
    let n = positions.len();
    let mut rates = vec![1.0; n];
    rates[0] = alpha;
    ParticleSystem::new(positions, rates, 0.0, 1, alpha)
        .expect("gap construction preserves exclusion")
}

/// Gap reading, exclusion to zero-range: `occupations[j-1]` is the number of
/// empty sites between particles `j` and `j+1`. The inverse of
/// [`zrp_to_tasep`] up to the anchor gauge and the trailing exit gap.
pub fn tasep_to_zrp(p: &ParticleSystem) -> Result<ZrpConfig, LatticeError> {
    if p.len() < 2 {
        return Err(LatticeError::TooFewParticles);
    }
    let occupations: Vec<u64> = p
        .positions()
        .windows(2)
        .map(|w| (w[0] - w[1] - 1) as u64)
        .collect();
    ZrpConfig::new(occupations, p.alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn step_system_matches_two_speed_shape() {
        let s = make_step_system(3, 0.5, 5).unwrap();
        assert_eq!(s.positions(), &[2, 1, 0, -1, -2]);
        assert_eq!(s.rates(), &[0.5, 0.5, 0.5, 1.0, 1.0]);
        assert_eq!(s.time, 0.0);
    }

    #[test]
    fn step_system_no_slow_particles() {
        let s = make_step_system(0, 0.5, 3).unwrap();
        assert_eq!(s.positions(), &[-1, -2, -3]);
        assert_eq!(s.rates(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn step_system_single_particle_takes_slow_rate() {
        let s = make_step_system(2, 0.9, 1).unwrap();
        assert_eq!(s.positions(), &[1]);
        assert_eq!(s.rates(), &[0.9]);
    }

    #[test]
    fn step_system_rejects_bad_domains() {
        assert_eq!(make_step_system(1, 1.0, 3).unwrap_err(), LatticeError::AlphaOutOfRange(1.0));
        assert_eq!(make_step_system(1, 0.0, 3).unwrap_err(), LatticeError::AlphaOutOfRange(0.0));
        assert_eq!(make_step_system(1, 0.5, 0).unwrap_err(), LatticeError::EmptySystem);
    }

    #[test]
    fn exclusion_violation_rejected() {
        let err = ParticleSystem::new(vec![1, 1], vec![1.0, 1.0], 0.0, 0, 0.5).unwrap_err();
        assert_eq!(err, LatticeError::NotExclusive(1));
    }

    #[test]
    fn empty_zrp_maps_to_packed_particles() {
        let z = ZrpConfig::new(vec![0, 0], 0.5).unwrap(); // L = 3
        let p = zrp_to_tasep(&z);
        assert_eq!(p.positions(), &[0, -1, -2, -3]);
        assert_eq!(p.rates(), &[0.5, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn gap_definition_by_hand() {
        let z = ZrpConfig::new(vec![0, 2, 1], 0.5).unwrap(); // L = 4
        let p = zrp_to_tasep(&z);
        assert_eq!(p.positions(), &[0, -1, -4, -6, -7]);
        let back = tasep_to_zrp(&p).unwrap();
        assert_eq!(back.occupations, vec![0, 2, 1, 0]);
    }

    #[test]
    fn packed_particles_give_zero_occupations() {
        let p = make_step_system(0, 0.5, 4).unwrap();
        let z = tasep_to_zrp(&p).unwrap();
        assert_eq!(z.occupations, vec![0, 0, 0]);
    }

    #[test]
    fn gaps_counted_as_empty_sites() {
        let p = ParticleSystem::new(vec![2, 0, -3], vec![1.0, 1.0, 1.0], 0.0, 0, 0.5).unwrap();
        let z = tasep_to_zrp(&p).unwrap();
        assert_eq!(z.occupations, vec![1, 2]);
    }

    #[test]
    fn tasep_to_zrp_needs_two_particles() {
        let p = make_step_system(1, 0.5, 1).unwrap();
        assert_eq!(tasep_to_zrp(&p).unwrap_err(), LatticeError::TooFewParticles);
    }

    #[test]
    fn space_like_ordering_enforced() {
        let pts = vec![
            SpaceLikePoint::new(3, 0.5).unwrap(),
            SpaceLikePoint::new(1, 1.0).unwrap(),
        ];
        assert!(SpaceLikeSet::from_points(pts).is_ok());

        let bad_n = vec![
            SpaceLikePoint::new(1, 0.5).unwrap(),
            SpaceLikePoint::new(2, 1.0).unwrap(),
        ];
        assert!(matches!(
            SpaceLikeSet::from_points(bad_n),
            Err(LatticeError::NotSpaceLike(1))
        ));

        let bad_t = vec![
            SpaceLikePoint::new(3, 1.0).unwrap(),
            SpaceLikePoint::new(2, 0.5).unwrap(),
        ];
        assert!(matches!(
            SpaceLikeSet::from_points(bad_t),
            Err(LatticeError::NotSpaceLike(1))
        ));
    }

    proptest! {
        /// Round trip through the gap mapping: the original occupations come
        /// back with one trailing zero appended for the exit gap.
        #[test]
        fn zrp_round_trip(occs in proptest::collection::vec(0u64..6, 1..10),
                          alpha in 0.05f64..0.95) {
            let z = ZrpConfig::new(occs.clone(), alpha).unwrap();
            let p = zrp_to_tasep(&z);
            let back = tasep_to_zrp(&p).unwrap();
            let mut expect = occs;
            expect.push(0);
            prop_assert_eq!(back.occupations, expect);
            prop_assert_eq!(back.l_sites, z.l_sites + 1);
        }

        #[test]
        fn space_like_violations_always_rejected(
            n0 in 1usize..6, n1 in 1usize..6,
            t0 in 0.0f64..3.0, t1 in 0.0f64..3.0,
        ) {
            let pts = vec![
                SpaceLikePoint::new(n0, t0).unwrap(),
                SpaceLikePoint::new(n1, t1).unwrap(),
            ];
            let ok = n1 <= n0 && t1 >= t0;
            prop_assert_eq!(SpaceLikeSet::from_points(pts).is_ok(), ok);
        }

        #[test]
        fn step_system_always_exclusive(m in 0usize..6, n in 1usize..30, alpha in 0.05f64..0.95) {
            let s = make_step_system(m, alpha, n).unwrap();
            prop_assert!(s.check_exclusion().is_ok());
        }
    }
}
