//! Hydrodynamic density, limiting mean positions, the rescaled-process
//! centerings, and the scaling constants used by the limit kernels.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HydroError {
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("alpha must lie in (0,1), got {0}")]
    AlphaOutOfRange(f64),
    #[error("speed ratio nu must be positive, got {0}")]
    NonPositiveNu(f64),
    #[error("nt - Mt is negative inside the t^(1/3) branch")]
    NegativeRoot,
    #[error("sigma^2 = {0} is not positive; the sqrt(t) rescaling degenerates here")]
    DegenerateSigma(f64),
    #[error("frame has u = {0}, need u > 0")]
    BadU(f64),
    #[error("frame has a = {0}, need a >= 0")]
    BadA(f64),
    #[error("nu = {nu} is outside the region needed here ({expect})")]
    WrongRegion { nu: f64, expect: &'static str },
    #[error("evaluation point within margin {margin} of a density kink")]
    NearKink { margin: f64 },
}

fn check_alpha(alpha: f64) -> Result<(), HydroError> {
    if 0.0 < alpha && alpha < 1.0 {
        Ok(())
    } else {
        Err(HydroError::AlphaOutOfRange(alpha))
    }
}

/// Region of the `(nu, alpha)` diagram the observation point `n = nu*t`
/// falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `nu < (1-alpha)^2`: sqrt(t) fluctuations driven by the slow pack.
    Slow,
    /// `(1-alpha)^2 < nu < 1`: t^(1/3) fluctuations.
    Kpz,
    /// `nu > 1`: the particle never moves.
    Frozen,
    /// `nu = (1-alpha)^2` exactly.
    TransitionLine,
}

pub fn classify(alpha: f64, nu: f64) -> Result<Region, HydroError> {
    check_alpha(alpha)?;
    if !(nu.is_finite() && nu > 0.0) {
        return Err(HydroError::NonPositiveNu(nu));
    }
    let b = (1.0 - alpha) * (1.0 - alpha);
    Ok(if nu == b {
        Region::TransitionLine
    } else if nu < b {
        Region::Slow
    } else if nu <= 1.0 {
        Region::Kpz
    } else {
        Region::Frozen
    })
}

/// Macroscopic particle density at `(x, t)`: 1 left of the rarefaction fan,
/// `(1 - x/t)/2` inside it, and the plateau `1 - alpha` to its right.
pub fn density(alpha: f64, x: f64, t: f64) -> Result<f64, HydroError> {
    check_alpha(alpha)?;
    if !(t > 0.0) {
        return Err(HydroError::NonPositiveTime(t));
    }
    let xi = x / t;
    Ok(if xi < -1.0 {
        1.0
    } else if xi <= 2.0 * alpha - 1.0 {
        (1.0 - xi) / 2.0
    } else {
        1.0 - alpha
    })
}

/// Limiting mean position per unit time of particle `[nu t]`.
pub fn mean_position_limit(alpha: f64, nu: f64) -> Result<f64, HydroError> {
    let region = classify(alpha, nu)?;
    Ok(match region {
        Region::Slow => alpha - nu / (1.0 - alpha),
        Region::TransitionLine | Region::Kpz => 1.0 - 2.0 * nu.sqrt(),
        Region::Frozen => -nu,
    })
}

/// Finite-time centering of the rescaled process: the deterministic term
/// subtracted from `x_n(t)` before dividing by the fluctuation scale.
pub fn finite_t_center(
    alpha: f64,
    slow_count: usize,
    n: usize,
    t: f64,
    region: Region,
) -> Result<f64, HydroError> {
    check_alpha(alpha)?;
    if !(t > 0.0) {
        return Err(HydroError::NonPositiveTime(t));
    }
    let m = slow_count as f64;
    let nf = n as f64;
    Ok(match region {
        Region::Slow => alpha * t - (nf - m) / (1.0 - alpha),
        Region::Kpz | Region::TransitionLine => {
            let under = nf * t - m * t;
            if under < 0.0 {
                return Err(HydroError::NegativeRoot);
            }
            t - 2.0 * under.sqrt()
        }
        Region::Frozen => m - nf, // initial position; the particle never moves
    })
}

/// Variance parameter of the sqrt(t) branch: `sigma^2(nu) = alpha (1 - nu/(1-alpha)^2)`.
pub fn sigma_slow(alpha: f64, nu: f64) -> f64 {
    alpha * (1.0 - nu / ((1.0 - alpha) * (1.0 - alpha)))
}

/// Rescaled position. Slow region: `(x - center)/(-sigma sqrt(t))`; the
/// negative denominator makes a particle lagging the center map to a
/// positive value. Growth region: `(x - center)/(-t^{1/3})`. Frozen: 0.
pub fn rescale(
    position: i64,
    alpha: f64,
    slow_count: usize,
    n: usize,
    t: f64,
) -> Result<f64, HydroError> {
    let nu = n as f64 / t;
    let region = classify(alpha, nu)?;
    let center = finite_t_center(alpha, slow_count, n, t, region)?;
    match region {
        Region::Slow => {
            let s2 = sigma_slow(alpha, nu);
            if s2 <= 0.0 {
                return Err(HydroError::DegenerateSigma(s2));
            }
            Ok((position as f64 - center) / (-(s2.sqrt()) * t.sqrt()))
        }
        Region::Kpz | Region::TransitionLine => {
            Ok((position as f64 - center) / (-t.powf(1.0 / 3.0)))
        }
        Region::Frozen => Ok(0.0),
    }
}

/// Scaling frame: the observation point is parameterized by `theta` through
/// a profile function `pi` supplied as value and first two derivatives, so
/// that `t = (pi+theta) T` and `n = (pi-theta) T + M`. All derived constants
/// of the steep-descent analysis live here.
#[derive(Debug, Clone, Copy)]
pub struct ScalingFrame {
    pub theta: f64,
    pub pi: f64,
    pub pi1: f64,
    pub pi2: f64,
    pub alpha: f64,
    pub slow_count: usize,
    /// `u = pi + theta` (time direction).
    pub u: f64,
    /// `a = pi - theta` (particle direction).
    pub a: f64,
    /// `nu = a/u`.
    pub nu: f64,
    pub region: Region,
    /// `sigma^2 = alpha u - alpha a/(1-alpha)^2` (meaningful in the slow region).
    pub sigma_sq: f64,
    /// `w* = 1 - sqrt(nu)` (saddle of the cubic branch).
    pub w_star: f64,
    /// `kappa0 = u / (w* (1 - w*))`.
    pub kappa0: f64,
    /// `kappa1 = ((1+pi')/w* - (pi'-1)/(w*(1-w*)^2)) / 2`.
    pub kappa1: f64,
    /// Horizontal scale `S_h = kappa1^{-1} kappa0^{2/3}`; infinite when
    /// kappa1 vanishes (which happens on the transition line).
    pub s_h: f64,
    /// Vertical scale `S_v = w* kappa0^{1/3}`.
    pub s_v: f64,
}

impl ScalingFrame {
    pub fn sigma(&self) -> f64 {
        self.sigma_sq.max(0.0).sqrt()
    }

    /// Process time of the stationary-eigenvalue limit, `tau = -ln(sigma)`.
    pub fn dbm_time(&self) -> f64 {
        -self.sigma().ln()
    }
}

/// Builds a [`ScalingFrame`]. The profile enters only through
/// `(pi, pi', pi'')` at the evaluation point.
pub fn make_scaling_frame(
    theta: f64,
    pi: f64,
    pi1: f64,
    pi2: f64,
    alpha: f64,
    slow_count: usize,
) -> Result<ScalingFrame, HydroError> {
    check_alpha(alpha)?;
    let u = pi + theta;
    let a = pi - theta;
    if !(u > 0.0) {
        return Err(HydroError::BadU(u));
    }
    if a < 0.0 {
        return Err(HydroError::BadA(a));
    }
    let nu = a / u;
    let region = if a == 0.0 { Region::Slow } else { classify(alpha, nu)? };
    let one_m = 1.0 - alpha;
    let sigma_sq = alpha * u - alpha * a / (one_m * one_m);
    if region == Region::Slow && sigma_sq <= 0.0 {
        return Err(HydroError::DegenerateSigma(sigma_sq));
    }
    if matches!(region, Region::Kpz | Region::TransitionLine) && nu >= 1.0 {
        return Err(HydroError::WrongRegion { nu, expect: "nu < 1 for the t^(1/3) branch" });
    }
    let w_star = 1.0 - nu.sqrt();
    let kappa0 = u / (w_star * (1.0 - w_star));
    let kappa1 = 0.5 * ((1.0 + pi1) / w_star - (pi1 - 1.0) / (w_star * (1.0 - w_star).powi(2)));
    let s_h = kappa0.powf(2.0 / 3.0) / kappa1;
    let s_v = w_star * kappa0.powf(1.0 / 3.0);
    Ok(ScalingFrame {
        theta,
        pi,
        pi1,
        pi2,
        alpha,
        slow_count,
        u,
        a,
        nu,
        region,
        sigma_sq,
        w_star,
        kappa0,
        kappa1,
        s_h,
        s_v,
    })
}

/// Frame for a bare observation point `(n, t)`: `T = t`, `u = 1`,
/// `a = (n - M)/t`.
pub fn frame_for_point(
    alpha: f64,
    slow_count: usize,
    n: usize,
    t: f64,
) -> Result<ScalingFrame, HydroError> {
    if !(t > 0.0) {
        return Err(HydroError::NonPositiveTime(t));
    }
    let a = (n as f64 - slow_count as f64) / t;
    // u = pi + theta = 1, a = pi - theta
    let pi = (1.0 + a) / 2.0;
    let theta = (1.0 - a) / 2.0;
    make_scaling_frame(theta, pi, 0.0, 0.0, alpha, slow_count)
}

/// Central-difference residual of the conservation law
/// `d_tau rho + d_xi (rho (1 - rho)) = 0` evaluated on the closed-form
/// profile. Zero on the constant pieces, `O(h^2)` inside the fan.
pub fn burgers_residual(alpha: f64, xi: f64, tau: f64, h: f64) -> Result<f64, HydroError> {
    check_alpha(alpha)?;
    if !(tau > 0.0) {
        return Err(HydroError::NonPositiveTime(tau));
    }
    assert!(h > 0.0);
    // stay clear of the two kinks (xi = -tau and xi = (2 alpha - 1) tau) by
    // a few stencil widths
    let margin = 4.0 * h * (1.0 + 1.0 / tau);
    for kink in [-tau, (2.0 * alpha - 1.0) * tau] {
        if (xi - kink).abs() < margin {
            return Err(HydroError::NearKink { margin });
        }
    }
    let rho = |x: f64, t: f64| density(alpha, x, t).unwrap();
    let flux = |x: f64, t: f64| {
        let r = rho(x, t);
        r * (1.0 - r)
    };
    let dt = (rho(xi, tau + h) - rho(xi, tau - h)) / (2.0 * h);
    let dx = (flux(xi + h, tau) - flux(xi - h, tau)) / (2.0 * h);
    Ok(dt + dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_branches() {
        assert_eq!(density(0.5, -2.0, 1.0).unwrap(), 1.0);
        assert_eq!(density(0.5, 0.0, 1.0).unwrap(), 0.5);
        let just_right = density(0.3, (2.0 * 0.3 - 1.0) + 1e-9, 1.0).unwrap();
        assert!((just_right - 0.7).abs() < 1e-9);
    }

    #[test]
    fn density_continuous_at_kinks() {
        for &alpha in &[0.3, 0.5, 0.8] {
            for t in [0.5, 1.0, 7.0] {
                let left_kink = -t;
                let right_kink = (2.0 * alpha - 1.0) * t;
                for kink in [left_kink, right_kink] {
                    let a = density(alpha, kink - 1e-9, t).unwrap();
                    let b = density(alpha, kink + 1e-9, t).unwrap();
                    assert!((a - b).abs() < 1e-8, "jump at kink {kink} for alpha {alpha}");
                }
            }
        }
    }

    #[test]
    fn density_rejects_bad_time() {
        assert!(density(0.5, 0.0, 0.0).is_err());
        assert!(density(0.5, 0.0, -1.0).is_err());
    }

    #[test]
    fn mean_limit_branches_and_continuity() {
        assert!((mean_position_limit(0.5, 0.1).unwrap() - 0.3).abs() < 1e-15);
        for &alpha in &[0.3f64, 0.5, 0.8] {
            let b = (1.0 - alpha) * (1.0 - alpha);
            let slow = alpha - b / (1.0 - alpha);
            let kpz = 1.0 - 2.0 * b.sqrt();
            assert!((slow - kpz).abs() < 1e-14);
            assert!((mean_position_limit(alpha, b).unwrap() - (2.0 * alpha - 1.0)).abs() < 1e-14);
        }
        assert!((mean_position_limit(0.5, 1.0).unwrap() - (-1.0)).abs() < 1e-15);
        assert!((mean_position_limit(0.5, 1.0 + 1e-12).unwrap() + 1.0).abs() < 1e-9);
        assert!(mean_position_limit(0.5, 0.0).is_err());
    }

    #[test]
    fn hole_counting_identity_reproduces_slow_mean() {
        // (alpha t - mean) (1 - alpha) = n - M, checked as an exact identity
        // and against quadrature of the density profile
        let alpha = 0.4;
        let t = 1.0;
        for &nu in &[0.05, 0.1, 0.2, 0.3] {
            assert!(nu < (1.0 - alpha) * (1.0 - alpha));
            let mean = mean_position_limit(alpha, nu).unwrap();
            assert!(((alpha * t - mean) * (1.0 - alpha) - nu).abs() < 1e-14);
            // quadrature of u(x,t) from mean to alpha t
            let pts = crate::quad::gauss_legendre_on(mean, alpha * t, 64);
            let area: f64 = pts
                .iter()
                .map(|&(x, w)| w * density(alpha, x, t).unwrap())
                .sum();
            assert!((area - nu).abs() < 1e-12);
        }
    }

    #[test]
    fn centers_agree_near_transition_for_large_t() {
        // slow- and growth-branch centerings differ by O(1) at nu=(1-alpha)^2
        let alpha = 0.5;
        let t = 1.0e4;
        let nu = (1.0 - alpha) * (1.0 - alpha);
        let n = (nu * t) as usize;
        let slow = finite_t_center(alpha, 0, n, t, Region::Slow).unwrap();
        let kpz = finite_t_center(alpha, 0, n, t, Region::Kpz).unwrap();
        assert!((slow - kpz).abs() < 0.1 * t.powf(1.0 / 3.0), "|{slow} - {kpz}| too big");
    }

    #[test]
    fn kpz_center_m0() {
        let t = 100.0;
        let n = 49;
        let c = finite_t_center(0.5, 0, n, t, Region::Kpz).unwrap();
        assert!((c - (t - 2.0 * (n as f64 * t).sqrt())).abs() < 1e-12);
    }

    #[test]
    fn slow_center_lead_particle_moves_at_alpha() {
        let c = finite_t_center(0.5, 3, 3, 10.0, Region::Slow).unwrap();
        assert!((c - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rescale_signs_and_degeneracy() {
        let alpha = 0.5;
        let t = 100.0;
        let n = 5; // nu = 0.05, slow region
        let center = finite_t_center(alpha, 1, n, t, Region::Slow).unwrap();
        let behind = rescale(center as i64 - 10, alpha, 1, n, t).unwrap();
        assert!(behind > 0.0, "lagging particle must rescale positive");
        let at_center = rescale(center.round() as i64, alpha, 1, n, t).unwrap();
        assert!(at_center.abs() < 0.2);
        // sigma^2(nu -> 0) = alpha
        assert!((sigma_slow(alpha, 0.0) - alpha).abs() < 1e-15);
        // frozen region rescales to 0
        assert_eq!(rescale(-100, alpha, 1, 300, 100.0).unwrap(), 0.0);
    }

    #[test]
    fn frame_transition_line_puts_saddle_at_alpha() {
        // alpha = 1/2 keeps nu = 1/4 exact in floats, so the boundary
        // classification is not at the mercy of rounding
        let alpha = 0.5;
        let nu = 0.25;
        // pick u = 1: pi + theta = 1, (pi - theta)/(pi + theta) = nu
        let pi = (1.0 + nu) / 2.0;
        let theta = (1.0 - nu) / 2.0;
        let f = make_scaling_frame(theta, pi, 1.0, 0.0, alpha, 2).unwrap();
        assert_eq!(f.region, Region::TransitionLine);
        assert!((f.w_star - alpha).abs() < 1e-14);
        // generic alpha lands next to the line, still in a sane region
        let g = make_scaling_frame(0.32, 0.68, 1.0, 0.0, 0.4, 2).unwrap();
        assert!(matches!(g.region, Region::TransitionLine | Region::Slow | Region::Kpz));
        assert!((g.w_star - 0.4).abs() < 1e-9);
    }

    #[test]
    fn frame_linear_profile() {
        let c = 1.5;
        let theta = 0.8;
        let f = make_scaling_frame(theta, c * theta, c, 0.0, 0.5, 0).unwrap();
        assert!((f.u - (c + 1.0) * theta).abs() < 1e-15);
        assert!((f.a - (c - 1.0) * theta).abs() < 1e-15);
        assert_eq!(f.pi2, 0.0);
    }

    #[test]
    fn kappas_positive_on_kpz_grid() {
        for &alpha in &[0.3, 0.5, 0.8] {
            let lo = (1.0 - alpha) * (1.0 - alpha);
            for i in 1..10 {
                let nu = lo + (1.0 - lo) * i as f64 / 10.5;
                for &pi1 in &[-0.9, 0.0, 0.9] {
                    let pi = (1.0 + nu) / 2.0;
                    let theta = (1.0 - nu) / 2.0;
                    let f = make_scaling_frame(theta, pi, pi1, 0.0, alpha, 1).unwrap();
                    assert!(f.kappa0 > 0.0 && f.kappa1 > 0.0, "kappas at nu={nu} pi1={pi1}");
                    assert!(f.s_h > 0.0 && f.s_v > 0.0);
                }
            }
        }
    }

    #[test]
    fn scales_degenerate_exactly_on_the_boundaries() {
        let alpha = 0.5;
        let b = (1.0 - alpha) * (1.0 - alpha);
        // sigma vanishes on the slow/growth boundary
        let f = frame_for_point(alpha, 0, (b * 1e6) as usize, 1e6).unwrap();
        assert!(f.sigma_sq.abs() < 1e-9 * f.u.max(1.0) + 1e-6);
        // S_v collapses at the frozen boundary nu -> 1
        let g = frame_for_point(alpha, 0, 999_999, 1e6).unwrap();
        assert!(g.s_v < 0.02, "S_v = {}", g.s_v);
    }

    #[test]
    fn burgers_residual_zero_on_constants_small_in_fan() {
        let alpha = 0.5;
        // constant piece
        let r = burgers_residual(alpha, -1.7, 1.0, 1e-3).unwrap();
        assert_eq!(r, 0.0);
        // fan interior
        let r = burgers_residual(alpha, -0.4, 1.0, 1e-3).unwrap();
        assert!(r.abs() < 1e-5, "residual {r}");
        // near-kink evaluation refused
        assert!(matches!(
            burgers_residual(alpha, -1.0, 1.0, 1e-3),
            Err(HydroError::NearKink { .. })
        ));
    }

    #[test]
    fn burgers_residual_second_order() {
        let alpha = 0.45;
        for &xi in &[-0.6, -0.3, -0.05] {
            let tau = 1.3;
            let r1 = burgers_residual(alpha, xi, tau, 2e-3).unwrap().abs();
            let r2 = burgers_residual(alpha, xi, tau, 1e-3).unwrap().abs();
            if r1 > 1e-12 {
                assert!(r1 / r2 > 3.9, "convergence ratio {} at xi={xi}", r1 / r2);
            }
        }
    }
}
