//! Transition term and the slow/fast kernel pieces, in both their summed
//! and resummed (contour) representations, plus the two full-kernel
//! assemblies.
//!
//! The resummation moves the geometric series over family indices into a
//! rational factor. Where the summed piece carries poles at `w = 1` (this
//! happens when `n2 > n1`), the small-`w` resummed piece drops them and the
//! small-contour transition term compensates; the two assemblies agree even
//! though their parts differ.

use num_complex::Complex64;

use super::{phi, powci, psi, real_part, KernelContext, KernelError};
use crate::lattice::SpaceLikePoint;
use crate::quad::Circle;

/// The space-like gate: the transition term enters exactly when `p2`
/// strictly follows `p1` (`n2 >= n1`, `t2 <= t1`, not the same point).
pub fn transition_gate(p1: &SpaceLikePoint, p2: &SpaceLikePoint) -> bool {
    p2.n >= p1.n && p2.t <= p1.t && !(p2.n == p1.n && p2.t == p1.t)
}

fn transition_on(
    ctx: &KernelContext,
    circ: Circle,
    p1: &SpaceLikePoint,
    x1: i64,
    p2: &SpaceLikePoint,
    x2: i64,
) -> Result<f64, KernelError> {
    if !transition_gate(p1, p2) {
        return Ok(0.0);
    }
    let s = ctx.slow_between(p1.n, p2.n);
    let f = ctx.fast_between(p1.n, p2.n);
    let dt = p1.t - p2.t;
    let alpha = ctx.alpha;
    let power = x2 + p2.n as i64 - x1 - p1.n as i64;
    let v = circ.integrate(|w| {
        (dt * w).exp() * powci(w, power) / ((w - alpha).powi(s) * (w - 1.0).powi(f) * w)
    })?;
    Ok(real_part(v, "transition"))
}

/// Transition term over the contour enclosing 0, alpha and 1.
pub fn transition_full(
    ctx: &KernelContext,
    p1: &SpaceLikePoint,
    x1: i64,
    p2: &SpaceLikePoint,
    x2: i64,
) -> Result<f64, KernelError> {
    transition_on(ctx, ctx.psi_circle(), p1, x1, p2, x2)
}

/// Transition term over the small contour around 0 only. For `n2 > n1` this
/// differs from [`transition_full`] by the residue at `w = 1`; the small-`w`
/// resummed slow piece absorbs exactly that difference.
pub fn transition_hat(
    ctx: &KernelContext,
    p1: &SpaceLikePoint,
    x1: i64,
    p2: &SpaceLikePoint,
    x2: i64,
) -> Result<f64, KernelError> {
    transition_on(ctx, ctx.small_w_circle(), p1, x1, p2, x2)
}

/// Residue of the transition integrand at `w = 1`, evaluated on its own
/// small circle. `transition_full = transition_hat + this` whenever the
/// contour gap matters (the slow factor has no pole for `n1 > M`).
pub fn transition_pole_at_one(
    ctx: &KernelContext,
    p1: &SpaceLikePoint,
    x1: i64,
    p2: &SpaceLikePoint,
    x2: i64,
) -> Result<f64, KernelError> {
    if !transition_gate(p1, p2) {
        return Ok(0.0);
    }
    let circ = Circle::real(1.0, (1.0 - ctx.alpha).min(0.3) / 2.0, ctx.plan.hat_nodes);
    transition_on(ctx, circ, p1, x1, p2, x2)
}

/// Fast-index piece as a plain sum over the bi-orthogonal families.
pub fn k1_sum(
    ctx: &KernelContext,
    p1: &SpaceLikePoint,
    x1: i64,
    p2: &SpaceLikePoint,
    x2: i64,
) -> Result<f64, KernelError> {
    let m = ctx.slow_count;
    if p2.n <= m {
        return Ok(0.0);
    }
    if p1.n <= m {
        return Err(KernelError::NeedsFastIndices { n1: p1.n, n2: p2.n, m });
    }
    let mut acc = 0.0;
    for j in (m + 1)..=p2.n {
        acc += psi(ctx, p1.n, p1.t, j, x1) * phi(ctx, p2.n, p2.t, j, x2);
    }
    Ok(acc)
}

fn k1_double(
    ctx: &KernelContext,
    w_circ: Circle,
    p1: &SpaceLikePoint,
    x1: i64,
    p2: &SpaceLikePoint,
    x2: i64,
) -> Result<f64, KernelError> {
    let m = ctx.slow_count;
    if p2.n <= m {
        return Ok(0.0);
    }
    if p1.n <= m {
        return Err(KernelError::NeedsFastIndices { n1: p1.n, n2: p2.n, m });
    }
    let v_circ = ctx.k1_v_circle();
    let e1 = (p1.n - m) as i32;
    let e2 = (p2.n - m) as i32;
    let pw1 = x1 + p1.n as i64 - m as i64 + 1;
    let pw2 = x2 + p2.n as i64 - m as i64;
    let t1 = p1.t;
    let t2 = p2.t;
    let v = crate::quad::integrate_nested(&[v_circ, w_circ], |zs| {
        let (v, w) = (zs[0], zs[1]);
        (t1 * w).exp() * (w - 1.0).powi(e1) * powci(w, -pw1)
            * powci(v, pw2) / ((v - 1.0).powi(e2) * (t2 * v).exp())
            / (w - v)
    })?;
    Ok(real_part(v, "k1_hat"))
}

/// Resummed fast-index piece over the large `w`-contour (the direct
/// geometric-series identity): equals [`k1_sum`] for every argument.
pub fn k1_hat(
    ctx: &KernelContext,
    p1: &SpaceLikePoint,
    x1: i64,
    p2: &SpaceLikePoint,
    x2: i64,
) -> Result<f64, KernelError> {
    k1_double(ctx, ctx.k1_w_circle(), p1, x1, p2, x2)
}

/// Resummed fast-index piece over the small `w`-contour; this is the form
/// entering the hat assembly together with [`transition_hat`].
pub fn k1_hat_small_w(
    ctx: &KernelContext,
    p1: &SpaceLikePoint,
    x1: i64,
    p2: &SpaceLikePoint,
    x2: i64,
) -> Result<f64, KernelError> {
    k1_double(ctx, ctx.small_w_circle(), p1, x1, p2, x2)
}

/// Slow-index piece as a plain sum (at most `M` terms).
pub fn k2_sum(
    ctx: &KernelContext,
    p1: &SpaceLikePoint,
    x1: i64,
    p2: &SpaceLikePoint,
    x2: i64,
) -> Result<f64, KernelError> {
    let m = ctx.slow_count;
    if m == 0 {
        return Ok(0.0);
    }
    if p1.n <= m || p2.n <= m {
        return Err(KernelError::NeedsFastIndices { n1: p1.n, n2: p2.n, m });
    }
    let mut acc = 0.0;
    for j in 1..=m {
        acc += psi(ctx, p1.n, p1.t, j, x1) * phi(ctx, p2.n, p2.t, j, x2);
    }
    Ok(acc)
}

/// Resummed slow-index piece: triple contour in shifted coordinates
/// (`v` around alpha, `z` around 1 and the v-circle, `w` around 0).
///
/// The finite geometric sum over the slow indices closes to
/// `[((w-alpha)/(v-alpha))^M - 1] / (w - v)` after the shift; the `-1` part
/// integrates to zero over `v` (no pole inside the v-circle), leaving the
/// `M`-power term below. The combined expression has only a removable
/// singularity at `w = v`, so the small `w`-circle computes the same value
/// as the one through alpha.
pub fn k2_hat(
    ctx: &KernelContext,
    p1: &SpaceLikePoint,
    x1: i64,
    p2: &SpaceLikePoint,
    x2: i64,
) -> Result<f64, KernelError> {
    let m = ctx.slow_count;
    if m == 0 {
        return Ok(0.0);
    }
    if p1.n <= m || p2.n <= m {
        return Err(KernelError::NeedsFastIndices { n1: p1.n, n2: p2.n, m });
    }
    let alpha = ctx.alpha;
    let mi = m as i32;
    let e1 = (p1.n - m) as i32;
    let e2 = (p2.n - m) as i32;
    let pw1 = x1 + p1.n as i64 - m as i64;
    let pw2 = x2 + p2.n as i64 - m as i64;
    let (t1, t2) = (p1.t, p2.t);
    let v = crate::quad::integrate_nested(
        &[ctx.k2_v_circle(), ctx.k2_z_circle(), ctx.small_w_circle()],
        |zs| {
            let (v, z, w) = (zs[0], zs[1], zs[2]);
            let e_w = (t1 * w).exp() * (w - 1.0).powi(e1) * powci(w, -pw1) / w;
            let e_z = powci(z, pw2) / ((z - 1.0).powi(e2) * (t2 * z).exp());
            let ratio = ((w - alpha) / (v - alpha)).powi(mi);
            e_w * e_z * ratio / ((z - v) * (w - v))
        },
    )?;
    Ok(real_part(v, "k2_hat"))
}

/// Full kernel from the definition: `-transition + sum_k psi_k phi_k`.
/// Valid for every pair of indices.
pub fn kernel_def(
    ctx: &KernelContext,
    p1: &SpaceLikePoint,
    x1: i64,
    p2: &SpaceLikePoint,
    x2: i64,
) -> Result<f64, KernelError> {
    let mut acc = -transition_full(ctx, p1, x1, p2, x2)?;
    for k in 1..=p2.n {
        acc += psi(ctx, p1.n, p1.t, k, x1) * phi(ctx, p2.n, p2.t, k, x2);
    }
    Ok(acc)
}

/// Full kernel from the resummed pieces:
/// `-transition_hat + k1_hat_small_w + k2_hat`. Requires both indices past
/// the slow pack; agrees with [`kernel_def`] wherever defined.
pub fn kernel_hat(
    ctx: &KernelContext,
    p1: &SpaceLikePoint,
    x1: i64,
    p2: &SpaceLikePoint,
    x2: i64,
) -> Result<f64, KernelError> {
    let m = ctx.slow_count;
    if p1.n <= m || p2.n <= m {
        return Err(KernelError::NeedsFastIndices { n1: p1.n, n2: p2.n, m });
    }
    Ok(-transition_hat(ctx, p1, x1, p2, x2)?
        + k1_hat_small_w(ctx, p1, x1, p2, x2)?
        + k2_hat(ctx, p1, x1, p2, x2)?)
}
