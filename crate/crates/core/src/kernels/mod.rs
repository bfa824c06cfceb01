//! The exact finite-N correlation kernel of the two-speed system with packed
//! initial data: the bi-orthogonal function families, their inner product,
//! the transition term, the slow/fast kernel pieces in both summed and
//! resummed contour form, and the full kernel assembly.
//!
//! Conventions: every contour integral carries `dz/(2*pi*i)`; particle and
//! family indices are 1-based as in the formulas; `slow_count` is the number
//! of leading rate-`alpha` particles.

mod gauge;
mod hats;

pub use gauge::DiagonalGauge;
pub use hats::{
    k1_hat, k1_hat_small_w, k1_sum, k2_hat, k2_sum, kernel_def, kernel_hat, transition_full,
    transition_gate, transition_hat,
};

use num_complex::Complex64;
use thiserror::Error;

use crate::quad::Circle;
use crate::stats::pairwise_sum;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("alpha must lie in (0,1), got {0}")]
    AlphaOutOfRange(f64),
    #[error("contour plan violates `{0}`")]
    PlanConstraint(&'static str),
    #[error("auxiliary constant A={a} too small; need at least {min}")]
    AuxTooSmall { a: f64, min: f64 },
    #[error("inner-product tail did not converge within {terms} terms (bad contour radii?)")]
    NonConvergentTail { terms: usize },
    #[error("kernel piece must have n1,n2 > slow count; got n1={n1}, n2={n2}, M={m}")]
    NeedsFastIndices { n1: usize, n2: usize, m: usize },
    #[error(transparent)]
    Quad(#[from] crate::quad::QuadError),
}

/// Radii and node counts for every contour the kernel formulas use, checked
/// against the separation constraints the resummations require.
#[derive(Debug, Clone, Copy)]
pub struct ContourPlan {
    /// radius for every `w`-contour that must enclose 0, alpha and 1
    pub psi_radius: f64,
    pub psi_nodes: usize,
    /// circle at `alpha-1` (slow-family weight contour)
    pub phi_a_radius: f64,
    /// circle at `0` (fast-family weight contour)
    pub phi_b_radius: f64,
    pub phi_nodes: usize,
    /// double-contour weight: small circle at `alpha-1` and the `z`-circle
    /// enclosing 0 and it, excluding -1
    pub c_v_radius: f64,
    pub c_z_margin: f64,
    pub c_nodes: usize,
    /// resummed slow piece: `v` at 1, `w` enclosing both 0 and the v-circle
    pub k1_v_radius: f64,
    pub k1_w_margin: f64,
    /// resummed pieces with the small `w`-circle (excludes the v-circles)
    pub small_w_radius: f64,
    pub hat_nodes: usize,
}

impl ContourPlan {
    pub fn default_for(alpha: f64) -> Self {
        let s = alpha.min(1.0 - alpha);
        ContourPlan {
            psi_radius: 1.5,
            psi_nodes: 128,
            phi_a_radius: s / 4.0,
            phi_b_radius: 0.25,
            phi_nodes: 128,
            c_v_radius: s / 8.0,
            c_z_margin: alpha / 8.0,
            c_nodes: 96,
            k1_v_radius: s / 4.0,
            k1_w_margin: 0.25,
            small_w_radius: alpha / 2.0,
            hat_nodes: 96,
        }
    }

    /// Same plan with every node count doubled; used by stability checks.
    pub fn refined(self) -> Self {
        ContourPlan {
            psi_nodes: self.psi_nodes * 2,
            phi_nodes: self.phi_nodes * 2,
            c_nodes: self.c_nodes * 2,
            hat_nodes: self.hat_nodes * 2,
            ..self
        }
    }
}

/// Everything a kernel evaluation needs: the system parameters `(M, alpha)`,
/// the auxiliary constant `A` of the double-contour weight, and the contour
/// plan.
#[derive(Debug, Clone, Copy)]
pub struct KernelContext {
    pub slow_count: usize,
    pub alpha: f64,
    pub aux_a: f64,
    pub plan: ContourPlan,
}

impl KernelContext {
    pub fn new(slow_count: usize, alpha: f64) -> Result<Self, KernelError> {
        let plan = ContourPlan::default_for(alpha);
        let aux_a = 10.0 * (1.0 + Self::max_radius(&plan, alpha));
        Self::with_plan(slow_count, alpha, aux_a, plan)
    }

    pub fn with_plan(
        slow_count: usize,
        alpha: f64,
        aux_a: f64,
        plan: ContourPlan,
    ) -> Result<Self, KernelError> {
        if !(0.0 < alpha && alpha < 1.0) {
            return Err(KernelError::AlphaOutOfRange(alpha));
        }
        let ctx = KernelContext { slow_count, alpha, aux_a, plan };
        ctx.validate()?;
        Ok(ctx)
    }

    /// Same context with a different auxiliary constant (used by the
    /// A-independence checks).
    pub fn with_aux(mut self, aux_a: f64) -> Result<Self, KernelError> {
        self.aux_a = aux_a;
        self.validate()?;
        Ok(self)
    }

    pub fn refined(mut self) -> Self {
        self.plan = self.plan.refined();
        self
    }

    fn max_radius(plan: &ContourPlan, alpha: f64) -> f64 {
        let z_radius = (1.0 - alpha) / 2.0 + plan.c_v_radius + plan.c_z_margin;
        plan.psi_radius
            .max(z_radius)
            .max(1.0 + plan.k1_v_radius + plan.k1_w_margin)
    }

    fn validate(&self) -> Result<(), KernelError> {
        let p = &self.plan;
        let alpha = self.alpha;
        if p.psi_radius <= 1.0 {
            return Err(KernelError::PlanConstraint("psi contour must enclose 0, alpha and 1"));
        }
        // slow-family weight circle stays right of -1 and left of 0
        if p.phi_a_radius >= alpha || p.phi_a_radius >= 1.0 - alpha {
            return Err(KernelError::PlanConstraint("phi_a circle must stay inside (-1, 0)"));
        }
        if p.phi_b_radius >= 1.0 {
            return Err(KernelError::PlanConstraint("phi_b circle must exclude -1"));
        }
        // double-contour geometry: z-circle encloses 0 and the v-circle,
        // excludes -1
        let zc = (alpha - 1.0) / 2.0;
        let zr = (1.0 - alpha) / 2.0 + p.c_v_radius + p.c_z_margin;
        if zc.abs() + zr >= 1.0 - 1e-9 {
            return Err(KernelError::PlanConstraint("z circle touches the pole at -1"));
        }
        if (1.0 - alpha) / 2.0 + p.c_v_radius >= zr {
            return Err(KernelError::PlanConstraint("z circle must enclose the v circle"));
        }
        if p.k1_w_margin <= 0.0 {
            return Err(KernelError::PlanConstraint("k1 w-contour margin must be positive"));
        }
        if p.small_w_radius >= 1.0 - p.k1_v_radius {
            return Err(KernelError::PlanConstraint(
                "small w-circle must stay clear of the v-circle at 1",
            ));
        }
        if p.small_w_radius >= alpha - 2.0 * p.c_v_radius {
            return Err(KernelError::PlanConstraint("small w-circle too close to alpha"));
        }
        // A must dominate every contour point
        let min_a = 10.0 * (1.0 + Self::max_radius(p, alpha));
        if self.aux_a < min_a {
            return Err(KernelError::AuxTooSmall { a: self.aux_a, min: min_a });
        }
        // resummed mixed piece: |v-alpha| |v-1+A| < |z-1+A| |w-alpha| at the
        // contour extremes (shifted coordinates: v at alpha, z around 1)
        let lhs = p.c_v_radius * (self.aux_a - 1.0 + alpha + p.c_v_radius);
        let k2_zc = (1.0 + alpha) / 2.0;
        let k2_zr = (1.0 - alpha) / 2.0 + p.c_v_radius + p.c_z_margin;
        let min_z_to = self.aux_a - 1.0 - (k2_zc + k2_zr - 1.0).abs() - k2_zr;
        let rhs = min_z_to * (alpha - p.small_w_radius);
        if lhs >= rhs {
            return Err(KernelError::PlanConstraint(
                "geometric-series domination |v-a||v-1+A| < |z-1+A||w-a| fails",
            ));
        }
        Ok(())
    }

    pub(crate) fn psi_circle(&self) -> Circle {
        Circle::real(0.0, self.plan.psi_radius, self.plan.psi_nodes)
    }

    pub(crate) fn phi_a_circle(&self) -> Circle {
        Circle::real(self.alpha - 1.0, self.plan.phi_a_radius, self.plan.phi_nodes)
    }

    pub(crate) fn phi_b_circle(&self) -> Circle {
        Circle::real(0.0, self.plan.phi_b_radius, self.plan.phi_nodes)
    }

    pub(crate) fn c_v_circle(&self) -> Circle {
        Circle::real(self.alpha - 1.0, self.plan.c_v_radius, self.plan.c_nodes)
    }

    pub(crate) fn c_z_circle(&self) -> Circle {
        let zc = (self.alpha - 1.0) / 2.0;
        let zr = (1.0 - self.alpha) / 2.0 + self.plan.c_v_radius + self.plan.c_z_margin;
        Circle::real(zc, zr, self.plan.c_nodes)
    }

    /// v-circle at alpha for the resummed mixed piece (shifted coordinates).
    pub(crate) fn k2_v_circle(&self) -> Circle {
        Circle::real(self.alpha, self.plan.c_v_radius, self.plan.hat_nodes)
    }

    /// z-circle enclosing 1 and the k2 v-circle (shifted coordinates).
    pub(crate) fn k2_z_circle(&self) -> Circle {
        let zc = (1.0 + self.alpha) / 2.0;
        let zr = (1.0 - self.alpha) / 2.0 + self.plan.c_v_radius + self.plan.c_z_margin;
        Circle::real(zc, zr, self.plan.hat_nodes)
    }

    pub(crate) fn k1_v_circle(&self) -> Circle {
        Circle::real(1.0, self.plan.k1_v_radius, self.plan.hat_nodes)
    }

    pub(crate) fn k1_w_circle(&self) -> Circle {
        Circle::real(
            0.0,
            1.0 + self.plan.k1_v_radius + self.plan.k1_w_margin,
            self.plan.hat_nodes,
        )
    }

    pub(crate) fn small_w_circle(&self) -> Circle {
        Circle::real(0.0, self.plan.small_w_radius, self.plan.hat_nodes)
    }

    /// Number of slow rates among particles `lo+1 ..= hi` (0 when `hi <= lo`).
    pub(crate) fn slow_between(&self, lo: usize, hi: usize) -> i32 {
        let m = self.slow_count;
        (hi.min(m) as i64 - lo.min(m) as i64).max(0) as i32
    }

    pub(crate) fn fast_between(&self, lo: usize, hi: usize) -> i32 {
        if hi <= lo {
            return 0;
        }
        (hi - lo) as i32 - self.slow_between(lo, hi)
    }
}

pub(crate) fn real_part(v: Complex64, what: &str) -> f64 {
    debug_assert!(
        v.im.abs() <= 1e-8 * (1.0 + v.re.abs()),
        "{what}: imaginary residue {} on value {}",
        v.im,
        v.re
    );
    v.re
}

/// Integer power for a complex base, allowing negative exponents.
pub(crate) fn powci(b: Complex64, e: i64) -> Complex64 {
    let e32 = i32::try_from(e).expect("exponent fits i32");
    b.powi(e32)
}

/// First bi-orthogonal family. `index` is the family index `j` (the function
/// usually written with subscript `n - j`); valid for every `j >= 1`,
/// including `j > n`, where the rate product moves to the denominator.
pub fn psi(ctx: &KernelContext, n: usize, t: f64, j: usize, x: i64) -> f64 {
    psi_row(ctx, n, t, j, x, 1)[0]
}

/// `psi` on consecutive sites `x0, x0+1, ..., x0+len-1`, sharing the contour
/// sweep across the row.
pub fn psi_row(ctx: &KernelContext, n: usize, t: f64, j: usize, x0: i64, len: usize) -> Vec<f64> {
    assert!(n >= 1 && j >= 1 && len >= 1);
    let m = ctx.slow_count as i64;
    let (es, ef) = if j <= n {
        (ctx.slow_between(j, n), ctx.fast_between(j, n))
    } else {
        (-ctx.slow_between(n, j), -ctx.fast_between(n, j))
    };
    let circ = ctx.psi_circle();
    let alpha = ctx.alpha;
    let mut acc = vec![Vec::with_capacity(circ.nodes); len];
    for k in 0..circ.nodes {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / circ.nodes as f64;
        let dir = Complex64::new(theta.cos(), theta.sin());
        let w = circ.center + circ.radius * dir;
        // node weight for (1/2πi)∮ .. dw, with the 1/w of the measure
        let weight = dir * (circ.radius / circ.nodes as f64) / w;
        let rate_part = (w - alpha).powi(es) * (w - 1.0).powi(ef);
        let base = (t * w).exp() * rate_part * weight;
        let inv_w = w.inv();
        let mut pw = powci(inv_w, x0 + n as i64 - m);
        for slot in acc.iter_mut() {
            slot.push((base * pw).re);
            pw *= inv_w;
        }
    }
    let mut out = Vec::with_capacity(len);
    for (offset, slot) in acc.iter().enumerate() {
        let x = x0 + offset as i64;
        // support: for 1 <= j <= n the integrand is entire below the floor
        if j <= n && x + n as i64 - m <= -1 {
            out.push(0.0);
        } else {
            out.push(pairwise_sum(slot));
        }
    }
    out
}

/// Second bi-orthogonal family, case-selected on `(n, j)` relative to the
/// slow count. Zero for `j > n`.
pub fn phi(ctx: &KernelContext, n: usize, t: f64, j: usize, x: i64) -> f64 {
    phi_row(ctx, n, t, j, x, 1)[0]
}

pub fn phi_row(ctx: &KernelContext, n: usize, t: f64, j: usize, x0: i64, len: usize) -> Vec<f64> {
    assert!(n >= 1 && j >= 1 && len >= 1);
    if j > n {
        return vec![0.0; len];
    }
    let m = ctx.slow_count;
    if n <= m {
        phi_row_single(ctx, n, t, x0, len, ctx.phi_a_circle(), (n - j + 1) as i32, ctx.alpha - 1.0)
    } else if j > m {
        phi_row_single(ctx, n, t, x0, len, ctx.phi_b_circle(), (n - j + 1) as i32, 0.0)
    } else {
        phi_row_case_c(ctx, n, t, j, x0, len)
    }
}

/// Shared single-contour form `∮ dv (1+v)^{x+n-M} e^{-t(v+1)} / (v-pole)^k`.
fn phi_row_single(
    ctx: &KernelContext,
    n: usize,
    t: f64,
    x0: i64,
    len: usize,
    circ: Circle,
    pole_order: i32,
    pole: f64,
) -> Vec<f64> {
    let m = ctx.slow_count as i64;
    let mut acc = vec![Vec::with_capacity(circ.nodes); len];
    for k in 0..circ.nodes {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / circ.nodes as f64;
        let dir = Complex64::new(theta.cos(), theta.sin());
        let v = circ.center + circ.radius * dir;
        let weight = dir * (circ.radius / circ.nodes as f64);
        let base = (-t * (v + 1.0)).exp() / (v - pole).powi(pole_order) * weight;
        let one_v = v + 1.0;
        let mut pw = powci(one_v, x0 + n as i64 - m);
        for slot in acc.iter_mut() {
            slot.push((base * pw).re);
            pw *= one_v;
        }
    }
    acc.iter().map(|s| pairwise_sum(s)).collect()
}

/// Double-contour form for the slow family indices: small circle around
/// `alpha-1` outside, `z`-circle enclosing 0 and it inside.
///
/// A regularized variant of this weight circulates with an extra factor
/// `g(z,v) = (2z+A)/(z+v+A) * ((z+A)/(v+A))^{M-j}`. That factor leaves the
/// `z = v` residue untouched but perturbs the `z = 0` residue, and the
/// cross-family orthogonality then only holds up to `O(1/A)` (the mixed
/// pairing evaluates to `1/(A+alpha-1)` in the simplest case rather than
/// zero). The weight-free form used here is its `A -> infinity` limit and
/// satisfies all four orthogonality cases exactly; see
/// [`phi_case_c_weighted`] for the regularized variant kept as a test hook.
fn phi_row_case_c(
    ctx: &KernelContext,
    n: usize,
    t: f64,
    j: usize,
    x0: i64,
    len: usize,
) -> Vec<f64> {
    phi_row_case_c_impl(ctx, n, t, j, x0, len, None)
}

fn phi_row_case_c_impl(
    ctx: &KernelContext,
    n: usize,
    t: f64,
    j: usize,
    x0: i64,
    len: usize,
    aux: Option<f64>,
) -> Vec<f64> {
    let m = ctx.slow_count;
    let vm_j = (m - j) as i32;
    let vcirc = ctx.c_v_circle();
    let zcirc = ctx.c_z_circle();
    let mut acc = vec![Vec::with_capacity(vcirc.nodes * zcirc.nodes); len];
    for kv in 0..vcirc.nodes {
        let tv = 2.0 * std::f64::consts::PI * kv as f64 / vcirc.nodes as f64;
        let dv = Complex64::new(tv.cos(), tv.sin());
        let v = vcirc.center + vcirc.radius * dv;
        let wv = dv * (vcirc.radius / vcirc.nodes as f64);
        let v_part = wv / (v - (ctx.alpha - 1.0)).powi(vm_j + 1);
        for kz in 0..zcirc.nodes {
            let tz = 2.0 * std::f64::consts::PI * kz as f64 / zcirc.nodes as f64;
            let dz = Complex64::new(tz.cos(), tz.sin());
            let z = zcirc.center + zcirc.radius * dz;
            let wz = dz * (zcirc.radius / zcirc.nodes as f64);
            let g = match aux {
                Some(a) => (2.0 * z + a) / (z + v + a) * ((z + a) / (v + a)).powi(vm_j),
                None => Complex64::new(1.0, 0.0),
            };
            let base = v_part * wz * g * (-t * (z + 1.0)).exp()
                * powci(z, -((n - m) as i64))
                / (z - v);
            let one_z = z + 1.0;
            let mut pw = powci(one_z, x0 + n as i64 - m as i64);
            for slot in acc.iter_mut() {
                slot.push((base * pw).re);
                pw *= one_z;
            }
        }
    }
    acc.iter().map(|s| pairwise_sum(s)).collect()
}

/// Slow-family weight with the finite-`A` regularizer in place, evaluated at
/// the context's `aux_a`. Differs from the exact family by `O(1/A)`.
pub fn phi_case_c_weighted(ctx: &KernelContext, n: usize, t: f64, j: usize, x: i64) -> f64 {
    phi_row_case_c_impl(ctx, n, t, j, x, 1, Some(ctx.aux_a))[0]
}

/// Case-(a) form evaluated regardless of `n` vs `M`; only used by tests that
/// confirm the overlapping cases agree at `n = M`.
pub fn phi_case_a_unchecked(ctx: &KernelContext, n: usize, t: f64, j: usize, x: i64) -> f64 {
    phi_row_single(ctx, n, t, x, 1, ctx.phi_a_circle(), (n - j + 1) as i32, ctx.alpha - 1.0)[0]
}

/// Case-(c) form evaluated regardless of `n` vs `M`; test hook as above.
pub fn phi_case_c_unchecked(ctx: &KernelContext, n: usize, t: f64, j: usize, x: i64) -> f64 {
    phi_row_case_c(ctx, n, t, j, x, 1)[0]
}

/// Mixed pairing `<psi_fast, phi_slow-weighted>`: with the regularizer at
/// finite `A` this is `1/(A+alpha-1)` for the minimal indices instead of 0.
/// Exposed so tests can pin the defect size.
pub fn weighted_mixed_pairing_defect(alpha: f64, aux_a: f64) -> f64 {
    1.0 / (aux_a + alpha - 1.0)
}

/// `sum_{x >= M-n} psi_j(x) phi_k(x)`, truncated once a whole block of terms
/// stops contributing. Equals `delta_{jk}` for `1 <= j,k <= n`.
pub fn biorth_inner(
    ctx: &KernelContext,
    n: usize,
    t: f64,
    j: usize,
    k: usize,
) -> Result<f64, KernelError> {
    const BLOCK: usize = 64;
    const MAX_TERMS: usize = 8192;
    let floor = ctx.slow_count as i64 - n as i64;
    let mut acc = 0.0;
    let mut x0 = floor;
    let mut taken = 0usize;
    loop {
        let pr = psi_row(ctx, n, t, j, x0, BLOCK);
        let fr = phi_row(ctx, n, t, k, x0, BLOCK);
        let mut block_max = 0.0f64;
        for (p, f) in pr.iter().zip(fr.iter()) {
            acc += p * f;
            block_max = block_max.max((p * f).abs());
        }
        taken += BLOCK;
        if block_max <= 1e-15 * (1.0 + acc.abs()) && taken >= 2 * BLOCK {
            return Ok(acc);
        }
        if taken >= MAX_TERMS {
            return Err(KernelError::NonConvergentTail { terms: taken });
        }
        x0 += BLOCK as i64;
    }
}

/// Full Gram matrix `<psi_j, phi_k>` for `1 <= j,k <= n`, sharing row
/// evaluations. Bi-orthogonality says this is the identity.
pub fn biorth_matrix(ctx: &KernelContext, n: usize, t: f64) -> Result<Vec<Vec<f64>>, KernelError> {
    const BLOCK: usize = 64;
    const MAX_TERMS: usize = 8192;
    let floor = ctx.slow_count as i64 - n as i64;
    let mut acc = vec![vec![0.0f64; n]; n];
    let mut x0 = floor;
    let mut taken = 0usize;
    loop {
        let psi_rows: Vec<Vec<f64>> = (1..=n).map(|j| psi_row(ctx, n, t, j, x0, BLOCK)).collect();
        let phi_rows: Vec<Vec<f64>> = (1..=n).map(|k| phi_row(ctx, n, t, k, x0, BLOCK)).collect();
        let mut block_max = 0.0f64;
        for j in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for idx in 0..BLOCK {
                    s += psi_rows[j][idx] * phi_rows[k][idx];
                }
                acc[j][k] += s;
                block_max = block_max.max(s.abs());
            }
        }
        taken += BLOCK;
        if block_max <= 1e-14 && taken >= 2 * BLOCK {
            return Ok(acc);
        }
        if taken >= MAX_TERMS {
            return Err(KernelError::NonConvergentTail { terms: taken });
        }
        x0 += BLOCK as i64;
    }
}
