//! The refracted fundamental solution of the modified Helmholtz operator in
//! the two-layered medium, its gradient, and the field kernel for points
//! below the interface.
//!
//! Everything is computed in *scaled* form so no intermediate quantity
//! carries the factor `exp(-tau * l)`: the plain value would underflow long
//! before tau reaches the regime where the asymptotics are interesting.
//! Conventions, for a source point `z~' = (z', 0)` on the interface and an
//! observation point `x` with `x3 < 0`:
//!
//! * `E(x, z')` is the transmitted field in the lower layer;
//!   `kernel_hat` returns `E^ = 4 pi gamma_minus r exp(tau r / sqrt(gamma_minus)) E`
//!   with `r = |x - z~'|`, so that `E^ -> E0(theta)` as `tau -> inf`.
//! * `kernel_gradient_hat` returns
//!   `G^ = -(sqrt(gamma_minus)/tau) 4 pi gamma_minus r exp(tau r / sqrt(gamma_minus)) grad_x E`,
//!   so that `G^ -> E0(theta) (x - z~') / r`.
//! * `phi_hat` returns the analogously scaled field kernel
//!   `Phi^ = 8 pi gamma_plus gamma_minus sqrt(det H) exp(tau l(x,y)) Phi`,
//!   which tends to `E0 / (r_minus r_plus)` at the refraction point of the
//!   minimizing broken ray.

use crate::error::{Error, Result};
use crate::geometry::{snell_point, LayeredMedium, Point3, SnellSolution};
use crate::quad::{integrate_1d, integrate_2d};
use num_complex::Complex64;

/// Transmission coefficient for a plane wave incident from below with
/// horizontal slowness `rho`.
pub fn transmission_r_minus(rho: f64, medium: &LayeredMedium) -> f64 {
    let gp = medium.gamma_plus;
    let gm = medium.gamma_minus;
    let sp = (1.0 / gp + rho * rho).sqrt();
    let sm = (1.0 / gm + rho * rho).sqrt();
    4.0 * gp * gm * sp * sm / (gp * sp + gm * sm)
}

/// The same coefficient in the rescaled slowness variable,
/// `R(rho) = R_minus(rho / sqrt(gamma_minus))`.
pub fn transmission_rescaled(rho: f64, medium: &LayeredMedium) -> f64 {
    let a0 = medium.a0();
    let sg = medium.gamma_minus.sqrt();
    let sa = (a0 * a0 + rho * rho).sqrt();
    let s1 = (1.0 + rho * rho).sqrt();
    4.0 * sg * sa * s1 / (sa + a0 * a0 * s1)
}

/// Steepest-descent contour for the first slowness component at incidence
/// angle `theta`: `zeta1(rho) = i sqrt(1+rho^2) sin(theta) + rho cos(theta)`.
pub fn contour_zeta1(rho: f64, theta: f64) -> Complex64 {
    let s1 = (1.0 + rho * rho).sqrt();
    Complex64::new(rho * theta.cos(), s1 * theta.sin())
}

/// `sqrt(1 + zeta1(rho)^2)` on the contour, in closed form:
/// `sqrt(1+rho^2) cos(theta) + i rho sin(theta)`. The closed form never
/// touches the branch cut, unlike a naive complex square root.
pub fn sqrt_one_plus_zeta1_sq(rho: f64, theta: f64) -> Complex64 {
    let s1 = (1.0 + rho * rho).sqrt();
    Complex64::new(s1 * theta.cos(), rho * theta.sin())
}

/// Analytic continuation of the rescaled transmission coefficient onto the
/// contour: `Q0 = R(sqrt(zeta1^2 + zeta2^2 + zeta1^2 zeta2^2))` with
/// `zeta2 = sigma2` real, evaluated through the composition
/// `P = sqrt((a0^2-1)/(1+sigma2^2) + 1 + zeta1^2)`,
/// `Q0 = 4 sqrt(gamma_minus) sqrt(1+sigma2^2) w P / (P + a0^2 w)`,
/// where `w = sqrt(1+zeta1^2)` from the closed form above.
pub fn q0_on_contour(rho: f64, sigma2: f64, theta: f64, medium: &LayeredMedium) -> Complex64 {
    let a0 = medium.a0();
    let sg = medium.gamma_minus.sqrt();
    let w = sqrt_one_plus_zeta1_sq(rho, theta);
    let s2 = (1.0 + sigma2 * sigma2).sqrt();
    let p = (Complex64::new((a0 * a0 - 1.0) / (s2 * s2), 0.0) + w * w).sqrt();
    4.0 * sg * s2 * w * p / (p + a0 * a0 * w)
}

/// Leading amplitude of the transmitted field at incidence angle `theta`
/// (the stationary value `Q0` at `sigma = 0`):
/// `E0 = 4 sqrt(gamma_minus) cos(theta) sqrt(a0^2 - sin^2 theta)
///       / (sqrt(a0^2 - sin^2 theta) + a0^2 cos(theta))`.
pub fn kernel_leading_amplitude(theta: f64, medium: &LayeredMedium) -> f64 {
    let a0 = medium.a0();
    let c = theta.cos();
    let s = theta.sin();
    let q = (a0 * a0 - s * s).sqrt();
    4.0 * medium.gamma_minus.sqrt() * c * q / (q + a0 * a0 * c)
}

/// Observation geometry relative to an interface point.
struct RayFrame {
    r: f64,
    theta: f64,
    /// unit vector from z~' toward x
    u: Point3,
    /// in-plane unit vector perpendicular to u (horizontal-ish direction)
    p: Point3,
}

fn ray_frame(x: &Point3, z_prime: [f64; 2]) -> Result<RayFrame> {
    if x.x3 >= 0.0 {
        return Err(Error::Precondition(format!(
            "kernel is defined for x3 < 0, got x3 = {}",
            x.x3
        )));
    }
    let h1 = x.x1 - z_prime[0];
    let h2 = x.x2 - z_prime[1];
    let hh = (h1 * h1 + h2 * h2).sqrt();
    let r = (hh * hh + x.x3 * x.x3).sqrt();
    let sin_t = hh / r;
    let cos_t = -x.x3 / r;
    let eh = if hh > 0.0 {
        Point3::new(h1 / hh, h2 / hh, 0.0)
    } else {
        Point3::new(1.0, 0.0, 0.0)
    };
    // u = sin(theta) eh - cos(theta) e3 points from the interface point to x;
    // p = cos(theta) eh + sin(theta) e3 completes the in-plane frame.
    let u = Point3::new(eh.x1 * sin_t, eh.x2 * sin_t, x.x3 / r);
    let p = Point3::new(eh.x1 * cos_t, eh.x2 * cos_t, sin_t);
    Ok(RayFrame {
        r,
        theta: sin_t.atan2(cos_t),
        u,
        p,
    })
}

/// Truncation radius for the sigma integrals: outside `|sigma| >= 3/4` the
/// exponent obeys `f(sigma) - 1 >= 1/8 + |sigma|/6`, so the tail beyond
/// `sigma_max` is below `exp(-s (1/8 + sigma_max/6))` relative to the peak.
fn sigma_cutoff(s: f64, target: f64) -> f64 {
    (6.0 * (target / s - 0.125)).max(1.0)
}

const SIGMA_TOL: f64 = 1e-9;
const SIGMA_SPLITS: usize = 20_000;

/// Effort knobs for the sigma quadratures: quadrature tolerance and the
/// `e^-target` relative tail left outside the truncation radius. The
/// defaults resolve the kernel essentially to round-off; checks with a
/// coarser goal can spend proportionally less.
#[derive(Debug, Clone, Copy)]
pub struct SigmaOpts {
    pub tol: f64,
    pub decay_target: f64,
}

impl Default for SigmaOpts {
    fn default() -> Self {
        Self {
            tol: SIGMA_TOL,
            decay_target: 38.0, // e^-38 ~ 3e-17
        }
    }
}

/// Scaled transmitted kernel `E^` by direct quadrature of the
/// steepest-descent representation. Exact up to quadrature error at any
/// `tau > 0`; agrees with `kernel_leading_amplitude` to `O(1/(tau r))`.
pub fn kernel_hat(x: &Point3, z_prime: [f64; 2], medium: &LayeredMedium, tau: f64) -> Result<f64> {
    kernel_hat_opts(x, z_prime, medium, tau, &SigmaOpts::default())
}

/// `kernel_hat` with explicit effort knobs.
pub fn kernel_hat_opts(
    x: &Point3,
    z_prime: [f64; 2],
    medium: &LayeredMedium,
    tau: f64,
    opts: &SigmaOpts,
) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Precondition(format!("tau must be positive, got {tau}")));
    }
    let frame = ray_frame(x, z_prime)?;
    let s = tau / medium.gamma_minus.sqrt() * frame.r;
    let smax = sigma_cutoff(s, opts.decay_target);
    let theta = frame.theta;
    // Re of the integrand is even in each variable; integrate one quadrant.
    let integral = integrate_2d(
        |s1, s2| {
            let f = (1.0 + s1 * s1).sqrt() * (1.0 + s2 * s2).sqrt();
            let q0 = q0_on_contour(s1, s2, theta, medium);
            (-s * (f - 1.0)).exp() * q0.re / (1.0 + s1 * s1).sqrt()
        },
        0.0,
        smax,
        0.0,
        smax,
        opts.tol / s.max(1.0),
        SIGMA_SPLITS,
    )?;
    Ok(s / (2.0 * std::f64::consts::PI) * 4.0 * integral)
}

/// Scaled kernel gradient `G^` by quadrature. In the ray frame with
/// `u = (x - z~')/r` and in-plane normal `p`, the integrand is
/// `[u - i sigma1 p / sqrt(1+sigma1^2)] Q~0`, `Q~0 = sqrt(1+sigma2^2) Q0`.
pub fn kernel_gradient_hat(
    x: &Point3,
    z_prime: [f64; 2],
    medium: &LayeredMedium,
    tau: f64,
) -> Result<Point3> {
    kernel_gradient_hat_opts(x, z_prime, medium, tau, &SigmaOpts::default())
}

/// `kernel_gradient_hat` with explicit effort knobs.
pub fn kernel_gradient_hat_opts(
    x: &Point3,
    z_prime: [f64; 2],
    medium: &LayeredMedium,
    tau: f64,
    opts: &SigmaOpts,
) -> Result<Point3> {
    if !(tau > 0.0) {
        return Err(Error::Precondition(format!("tau must be positive, got {tau}")));
    }
    let frame = ray_frame(x, z_prime)?;
    let s = tau / medium.gamma_minus.sqrt() * frame.r;
    let smax = sigma_cutoff(s, opts.decay_target);
    let theta = frame.theta;
    let tol = opts.tol / s.max(1.0);
    let part = |which: usize| -> Result<f64> {
        integrate_2d(
            |s1: f64, s2: f64| {
                let f = (1.0 + s1 * s1).sqrt() * (1.0 + s2 * s2).sqrt();
                let q0t = (1.0 + s2 * s2).sqrt() * q0_on_contour(s1, s2, theta, medium);
                let val = if which == 0 {
                    q0t.re
                } else {
                    // Re(-i sigma1 Q~0 / sqrt(1+sigma1^2)); also even in sigma1
                    s1 * q0t.im / (1.0 + s1 * s1).sqrt()
                };
                (-s * (f - 1.0)).exp() * val
            },
            0.0,
            smax,
            0.0,
            smax,
            tol,
            SIGMA_SPLITS,
        )
    };
    let cu = s / (2.0 * std::f64::consts::PI) * 4.0 * part(0)?;
    let cp = s / (2.0 * std::f64::consts::PI) * 4.0 * part(1)?;
    Ok(frame.u.scale(cu).add(&frame.p.scale(cp)))
}

/// Leading-order scaled gradient: `E0(theta) (x - z~')/r`.
pub fn kernel_gradient_leading(x: &Point3, z_prime: [f64; 2], medium: &LayeredMedium) -> Result<Point3> {
    let frame = ray_frame(x, z_prime)?;
    Ok(frame.u.scale(kernel_leading_amplitude(frame.theta, medium)))
}

/// Unscaled kernel value as (log magnitude, amplitude): `E = exp(log_scale) * amp`.
/// Keeping the pair avoids underflow at large tau.
pub fn kernel_log_value(
    x: &Point3,
    z_prime: [f64; 2],
    medium: &LayeredMedium,
    tau: f64,
) -> Result<(f64, f64)> {
    let frame = ray_frame(x, z_prime)?;
    let e_hat = kernel_hat(x, z_prime, medium, tau)?;
    let log_scale = -tau * frame.r / medium.gamma_minus.sqrt();
    Ok((
        log_scale,
        e_hat / (4.0 * std::f64::consts::PI * medium.gamma_minus * frame.r),
    ))
}

/// How the transmitted kernel is evaluated inside the field-kernel
/// integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelEval {
    /// stationary-phase amplitude `E0` at each interface point (cheap,
    /// `O(1/tau)` accurate)
    Leading,
    /// full sigma quadrature at each interface point (exact up to
    /// quadrature error)
    Quadrature,
}

/// Scaled field kernel for `x` below and `y` above the interface.
#[derive(Debug, Clone)]
pub struct PhiHat {
    /// `Phi^ = 8 pi gamma_plus gamma_minus sqrt(det H) exp(tau l) Phi`.
    pub value: f64,
    /// Scaled gradient: `grad Phi = -(tau/sqrt(gamma_minus))
    /// exp(-tau l) / (8 pi gamma_plus gamma_minus sqrt(det H)) * grad_hat`.
    pub grad_hat: Point3,
    /// Optical distance l(x, y) of the minimizing broken ray.
    pub l: f64,
    /// Hessian determinant of the travel time at the refraction point.
    pub det_h: f64,
    /// The Snell solution the scaling is anchored to.
    pub snell: SnellSolution,
}

impl PhiHat {
    /// log |Phi| reconstructed from the scaled pieces.
    pub fn log_abs_value(&self, tau: f64, medium: &LayeredMedium) -> f64 {
        -tau * self.l + (self.value.abs()).ln()
            - (8.0 * std::f64::consts::PI * medium.gamma_plus * medium.gamma_minus * self.det_h.sqrt())
                .ln()
    }

    /// log |grad Phi| magnitude.
    pub fn log_abs_gradient(&self, tau: f64, medium: &LayeredMedium) -> f64 {
        -tau * self.l + (self.grad_hat.norm()).ln() + (tau / medium.gamma_minus.sqrt()).ln()
            - (8.0 * std::f64::consts::PI * medium.gamma_plus * medium.gamma_minus * self.det_h.sqrt())
                .ln()
    }
}

/// Closed-form stationary-point evaluation of `Phi^` (and its gradient):
/// value `E0(theta_minus) / (r_minus r_plus)`, gradient that value times the
/// unit vector from the refraction point to `x`.
pub fn phi_hat_leading(x: &Point3, y: &Point3, medium: &LayeredMedium) -> Result<PhiHat> {
    let snell = snell_point(x, y, medium)?;
    let rm = x.dist_to_interface_point(snell.z_prime);
    let rp = y.dist_to_interface_point(snell.z_prime);
    let e0 = kernel_leading_amplitude(snell.theta_minus, medium);
    let value = e0 / (rm * rp);
    let frame = ray_frame(x, snell.z_prime)?;
    Ok(PhiHat {
        value,
        grad_hat: frame.u.scale(value),
        l: snell.l_value,
        det_h: snell.det_h,
        snell,
    })
}

/// `Phi^` by Laplace quadrature over interface points around the refraction
/// point. The window radius is chosen so the discarded tail of
/// `exp(-tau (l_{x,y}(z') - l))` is below `e^-40` relative to the peak.
pub fn phi_hat_quadrature(
    x: &Point3,
    y: &Point3,
    medium: &LayeredMedium,
    tau: f64,
    kernel: KernelEval,
) -> Result<PhiHat> {
    phi_hat_quadrature_opts(
        x,
        y,
        medium,
        tau,
        kernel,
        &SigmaOpts::default(),
        1e-8 / tau.max(1.0),
    )
}

/// `phi_hat_quadrature` with explicit effort knobs for the per-point sigma
/// quadratures and the interface-window quadrature. The transmitted-kernel
/// value and gradient are computed once per interface point and memoized
/// across the four component integrals.
pub fn phi_hat_quadrature_opts(
    x: &Point3,
    y: &Point3,
    medium: &LayeredMedium,
    tau: f64,
    kernel: KernelEval,
    sigma_opts: &SigmaOpts,
    window_tol: f64,
) -> Result<PhiHat> {
    if !(tau > 0.0) {
        return Err(Error::Precondition(format!("tau must be positive, got {tau}")));
    }
    let snell = snell_point(x, y, medium)?;
    let l0 = snell.l_value;
    let z0 = snell.z_prime;
    let lam_min = snell.eig_tangent.min(snell.eig_perp);
    let window = (80.0 / (tau * lam_min)).sqrt();
    let sp = medium.slow_plus();
    let sm = medium.slow_minus();

    let mut cache: std::collections::HashMap<(u64, u64), (f64, Point3)> =
        std::collections::HashMap::new();
    let mut eval_e = |zp: [f64; 2], frame: &RayFrame| -> Result<(f64, Point3)> {
        match kernel {
            KernelEval::Leading => {
                let e0 = kernel_leading_amplitude(frame.theta, medium);
                Ok((e0, frame.u.scale(e0)))
            }
            KernelEval::Quadrature => {
                let key = (zp[0].to_bits(), zp[1].to_bits());
                if let Some(hit) = cache.get(&key) {
                    return Ok(*hit);
                }
                let pair = (
                    kernel_hat_opts(x, zp, medium, tau, sigma_opts)?,
                    kernel_gradient_hat_opts(x, zp, medium, tau, sigma_opts)?,
                );
                cache.insert(key, pair);
                Ok(pair)
            }
        }
    };

    let mut worker_err: Option<Error> = None;
    let mut compute = |component: usize| -> Result<f64> {
        integrate_2d(
            |z1, z2| {
                let zp = [z0[0] + z1, z0[1] + z2];
                let frame = match ray_frame(x, zp) {
                    Ok(f) => f,
                    Err(e) => {
                        worker_err.get_or_insert(e);
                        return f64::NAN;
                    }
                };
                let rm = frame.r;
                let rp = y.dist_to_interface_point(zp);
                let l_here = rm * sm + rp * sp;
                let weight = (-tau * (l_here - l0)).exp() / (rm * rp);
                let (e_hat, g_hat) = match eval_e(zp, &frame) {
                    Ok(v) => v,
                    Err(e) => {
                        worker_err.get_or_insert(e);
                        return f64::NAN;
                    }
                };
                let val = match component {
                    0 => e_hat,
                    1 => g_hat.x1,
                    2 => g_hat.x2,
                    _ => g_hat.x3,
                };
                weight * val
            },
            -window,
            window,
            -window,
            window,
            window_tol,
            SIGMA_SPLITS,
        )
    };

    let scale = tau * snell.det_h.sqrt() / (2.0 * std::f64::consts::PI);
    let value = scale * compute(0)?;
    let g1 = scale * compute(1)?;
    let g2 = scale * compute(2)?;
    let g3 = scale * compute(3)?;
    if let Some(e) = worker_err {
        return Err(e);
    }
    Ok(PhiHat {
        value,
        grad_hat: Point3::new(g1, g2, g3),
        l: l0,
        det_h: snell.det_h,
        snell,
    })
}

/// Leading-order Laplace evaluation of `integral exp(-tau g(z')) a(z') dz'`
/// over the plane, given the minimum data of `g`. Returns the scaled value
/// `exp(tau g_min) I ~ 2 pi a(z_min) / (tau sqrt(det H))`.
pub fn laplace_peak_2d(a_at_min: f64, det_h: f64, tau: f64) -> Result<f64> {
    if !(det_h > 0.0) || !(tau > 0.0) {
        return Err(Error::Precondition(format!(
            "laplace_peak_2d needs det_h > 0 and tau > 0, got {det_h}, {tau}"
        )));
    }
    Ok(2.0 * std::f64::consts::PI * a_at_min / (tau * det_h.sqrt()))
}

/// Equal-speed reference for degeneration tests: with
/// `gamma_plus = gamma_minus = gamma` the field kernel collapses to the
/// free-space kernel `exp(-tau |x-y|/sqrt(gamma)) / (4 pi gamma |x-y|)`,
/// whose scaled counterpart is `2 gamma sqrt(det H) / |x-y|`.
pub fn phi_hat_free_space_reference(x: &Point3, y: &Point3, medium: &LayeredMedium) -> Result<f64> {
    let snell = snell_point(x, y, medium)?;
    Ok(2.0 * medium.gamma_minus * snell.det_h.sqrt() / x.dist(y))
}

/// 1-D steepest-descent cross-check used by oracle tests: integrates the
/// sigma2 variable only, for integrands independent of sigma1.
pub fn laplace_1d_reference<F: FnMut(f64) -> f64>(f: F, s: f64, smax: f64) -> Result<f64> {
    integrate_1d(f, -smax, smax, 1e-12 / s.max(1.0), SIGMA_SPLITS)
}
