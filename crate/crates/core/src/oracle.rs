//! Brute-force master-equation integrator for tiny particle counts.
//!
//! The generator is uniformized: `P(t) = sum_k e^{-Lt}(Lt)^k/k! U^k P(0)`
//! with `U = I + Q/L`, which keeps probabilities nonnegative and gives an a
//! priori truncation bound for the Poisson tail. Jumps that would leave the
//! position window feed an absorbing leak state whose mass bounds the
//! truncation error of every reported probability.

use std::collections::HashMap;

use thiserror::Error;

use crate::lattice::{ParticleSystem, SpaceLikeSet};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("window leak {leak:.3e} exceeds the tolerance {tol:.3e} even at width {width}")]
    WindowTooSmall { leak: f64, tol: f64, width: i64 },
    #[error("particle index {0} out of range")]
    BadParticle(usize),
    #[error("state space would hold {0} configurations; refusing (limit {1})")]
    TooLarge(usize, usize),
}

const LEAK_TOL: f64 = 1e-10;
const STATE_LIMIT: usize = 2_000_000;

/// Enumerated configurations of `N` ordered particles inside a window, with
/// the sparse jump structure between them.
pub struct StateSpace {
    /// strictly decreasing tuples; index into `configs` is the state id
    pub configs: Vec<Vec<i64>>,
    index: HashMap<Vec<i64>, usize>,
    /// per state: list of (target state, rate); a jump off the window edge is
    /// recorded as (usize::MAX, rate) and feeds the leak account
    moves: Vec<Vec<(usize, f64)>>,
    total_rate: Vec<f64>,
    pub leak: f64,
}

const LEAK_STATE: usize = usize::MAX;

impl StateSpace {
    /// Builds all configurations reachable from `sys`'s initial positions
    /// inside `[lower, upper]` (componentwise: particle i never goes below
    /// its start, never above `upper - i` by exclusion).
    pub fn build(sys: &ParticleSystem, upper: i64) -> Result<Self, OracleError> {
        let n = sys.len();
        let start = sys.positions().to_vec();
        let rates = sys.rates().to_vec();

        let mut configs: Vec<Vec<i64>> = Vec::new();
        let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
        let mut frontier = vec![start.clone()];
        configs.push(start.clone());
        index.insert(start, 0);
        while let Some(c) = frontier.pop() {
            for i in 0..n {
                let blocked = i > 0 && c[i - 1] - c[i] == 1;
                if blocked {
                    continue;
                }
                let mut next = c.clone();
                next[i] += 1;
                if next[i] > upper {
                    continue; // leaves the window; handled as leak below
                }
                if !index.contains_key(&next) {
                    if configs.len() >= STATE_LIMIT {
                        return Err(OracleError::TooLarge(configs.len(), STATE_LIMIT));
                    }
                    index.insert(next.clone(), configs.len());
                    configs.push(next.clone());
                    frontier.push(next);
                }
            }
        }

        let mut moves = Vec::with_capacity(configs.len());
        let mut total_rate = Vec::with_capacity(configs.len());
        for c in &configs {
            let mut out = Vec::new();
            let mut tot = 0.0;
            for i in 0..n {
                let blocked = i > 0 && c[i - 1] - c[i] == 1;
                if blocked {
                    continue;
                }
                let mut next = c.clone();
                next[i] += 1;
                tot += rates[i];
                if next[i] > upper {
                    out.push((LEAK_STATE, rates[i]));
                } else {
                    out.push((index[&next], rates[i]));
                }
            }
            moves.push(out);
            total_rate.push(tot);
        }
        Ok(StateSpace { configs, index, moves, total_rate, leak: 0.0 })
    }

    pub fn state_of(&self, config: &[i64]) -> Option<usize> {
        self.index.get(config).copied()
    }

    /// One uniformized step `out = (I + Q/L) p`. Mass routed to the leak
    /// state simply disappears from the vector; the caller accounts for it
    /// by mass balance.
    fn uniform_step(&self, p: &[f64], lambda: f64) -> Vec<f64> {
        let mut out = vec![0.0; p.len()];
        for (s, &mass) in p.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            out[s] += mass * (1.0 - self.total_rate[s] / lambda);
            for &(tgt, rate) in &self.moves[s] {
                if tgt != LEAK_STATE {
                    out[tgt] += mass * rate / lambda;
                }
            }
        }
        out
    }

    /// Evolves a (sub)probability vector by time `dt`, adding the mass-balance
    /// deficit plus the Poisson truncation tail to `leak`.
    pub fn evolve(&self, p: &[f64], dt: f64, leak: &mut f64) -> Vec<f64> {
        if dt == 0.0 {
            return p.to_vec();
        }
        let lambda = self
            .total_rate
            .iter()
            .fold(0.0f64, |m, &r| m.max(r))
            .max(1e-12);
        let mu = lambda * dt;
        let mut k_max = (mu + 12.0 * mu.sqrt() + 25.0).ceil() as usize;
        while poisson_upper_tail(k_max, mu) > 1e-16 {
            k_max *= 2;
        }
        let mut weight = (-mu).exp();
        let mut acc: Vec<f64> = p.iter().map(|&x| x * weight).collect();
        let mut v = p.to_vec();
        for k in 1..=k_max {
            v = self.uniform_step(&v, lambda);
            weight *= mu / k as f64;
            for (a, &b) in acc.iter_mut().zip(v.iter()) {
                *a += weight * b;
            }
        }
        let mass_in: f64 = p.iter().sum();
        let mass_out: f64 = acc.iter().sum();
        let tail = poisson_upper_tail(k_max, mu) * mass_in;
        *leak += (mass_in - mass_out).max(0.0) + tail;
        acc
    }
}

fn poisson_upper_tail(k: usize, mu: f64) -> f64 {
    // crude upper bound via Chernoff: P(X > k) <= exp(-mu) (e mu / k)^k for k > mu
    if (k as f64) <= mu {
        return 1.0;
    }
    let kf = k as f64;
    ((-mu) + kf * (1.0 + (mu / kf).ln())).exp()
}

/// Full distribution of the configuration at time `t`, with the reported
/// leak bound. The window upper edge starts near the ballistic reach and
/// doubles until the leak is below `1e-10`.
pub struct MasterSolution {
    pub space: StateSpace,
    pub probabilities: Vec<f64>,
    pub leak: f64,
}

pub fn solve_master(sys: &ParticleSystem, t: f64) -> Result<MasterSolution, OracleError> {
    let lead = sys.position(1);
    let mut reach = (t.ceil() as i64 + 4) * 2 + 4;
    loop {
        let space = StateSpace::build(sys, lead + reach)?;
        let mut p = vec![0.0; space.configs.len()];
        p[space.state_of(sys.positions()).unwrap()] = 1.0;
        let mut leak = 0.0;
        let p = space.evolve(&p, t, &mut leak);
        if leak < LEAK_TOL {
            return Ok(MasterSolution { space, probabilities: p, leak });
        }
        if reach > 4096 {
            return Err(OracleError::WindowTooSmall { leak, tol: LEAK_TOL, width: reach });
        }
        reach *= 2;
    }
}

impl MasterSolution {
    /// `P(x_n >= a)` plus-or-minus the leak bound.
    pub fn marginal_tail(&self, n: usize, a: i64) -> Result<f64, OracleError> {
        if n == 0 || n > self.space.configs[0].len() {
            return Err(OracleError::BadParticle(n));
        }
        let mut total = 0.0;
        for (s, c) in self.space.configs.iter().enumerate() {
            if c[n - 1] >= a {
                total += self.probabilities[s];
            }
        }
        Ok(total.clamp(0.0, 1.0))
    }
}

/// Joint tail `P(all x_{n_k}(t_k) >= a_k)` by evolve-then-mask along the
/// (time-ordered) space-like set.
pub fn joint_tail(sys: &ParticleSystem, sls: &SpaceLikeSet) -> Result<f64, OracleError> {
    let max_t = sls.max_time();
    let lead = sys.position(1);
    let mut reach = (max_t.ceil() as i64 + 4) * 2 + 4;
    'window: loop {
        let space = StateSpace::build(sys, lead + reach)?;
        let mut p = vec![0.0; space.configs.len()];
        p[space.state_of(sys.positions()).unwrap()] = 1.0;
        let mut leak = 0.0;
        let mut t = 0.0;
        for (point, &a) in sls.points().iter().zip(sls.cutoffs()) {
            if point.n > sys.len() {
                return Err(OracleError::BadParticle(point.n));
            }
            p = space.evolve(&p, point.t - t, &mut leak);
            t = point.t;
            if leak >= LEAK_TOL {
                if reach > 4096 {
                    return Err(OracleError::WindowTooSmall { leak, tol: LEAK_TOL, width: reach });
                }
                reach *= 2;
                continue 'window;
            }
            for (s, c) in space.configs.iter().enumerate() {
                if c[point.n - 1] < a {
                    p[s] = 0.0;
                }
            }
        }
        let mass: f64 = p.iter().sum();
        return Ok(mass.clamp(0.0, 1.0));
    }
}

/// Independent semigroup route used by tests: plain Taylor expansion of
/// `e^{tQ}` applied to the initial vector, no uniformization, no leak state
/// (the window must already be comfortably large). Credible only for small
/// `t`; order 12 is exact to O((Nt)^13/13!).
pub fn taylor_semigroup_reference(
    sys: &ParticleSystem,
    t: f64,
    upper: i64,
    order: usize,
) -> Result<(StateSpace, Vec<f64>), OracleError> {
    let space = StateSpace::build(sys, upper)?;
    let dim = space.configs.len();
    let apply_q = |v: &[f64]| {
        let mut out = vec![0.0; dim];
        for s in 0..dim {
            out[s] -= space.total_rate[s] * v[s];
            for &(tgt, rate) in &space.moves[s] {
                if tgt != LEAK_STATE {
                    out[tgt] += rate * v[s];
                }
            }
        }
        out
    };
    let mut p = vec![0.0; dim];
    p[space.state_of(sys.positions()).unwrap()] = 1.0;
    let mut term = p.clone();
    for k in 1..=order {
        term = apply_q(&term);
        for x in term.iter_mut() {
            *x *= t / k as f64;
        }
        for (a, &b) in p.iter_mut().zip(term.iter()) {
            *a += b;
        }
    }
    Ok((space, p))
}
