//! The enclosure indicator: truncated Laplace transforms of recorded wave
//! data, the tau sweep that exposes the decay rate `-2 l(D, B)`, sign
//! classification of the obstacle contrast, and the sharp-threshold scan in
//! the truncation time.
//!
//! All large-exponent arithmetic is carried out as (sign, log magnitude)
//! pairs: at `tau = 80` the indicator is of order `exp(-tau * 2l) ~ 1e-117`
//! and the scaled quantity `exp(tau T) I` of order `exp(+tau (T - 2l))`,
//! neither of which survives in plain f64 across the whole sweep.

use crate::error::{Error, Result};
use crate::fit::weighted_linear_fit;
use crate::geometry::ContrastClass;
use serde::{Deserialize, Serialize};

/// Quadrature rule for `int exp(-tau t) u(t) dt` on uniform samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LaplaceRule {
    /// Product integration: the exponential weight is integrated exactly
    /// against the piecewise-linear interpolant of the samples. Remains
    /// accurate for any `tau * dt`.
    ProductLinear,
    /// Plain trapezoid on the weighted samples. Only admissible while
    /// `tau * dt <= 0.1`; rejected otherwise.
    Trapezoid,
}

/// A signed magnitude in log scale: the value is `sign * exp(log_abs)`,
/// with `sign = 0` encoding an exact zero.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LogVal {
    pub sign: f64,
    pub log_abs: f64,
}

impl LogVal {
    pub fn zero() -> Self {
        Self {
            sign: 0.0,
            log_abs: f64::NEG_INFINITY,
        }
    }

    pub fn from_value(v: f64) -> Self {
        if v == 0.0 {
            Self::zero()
        } else {
            Self {
                sign: v.signum(),
                log_abs: v.abs().ln(),
            }
        }
    }

    pub fn value(&self) -> f64 {
        self.sign * self.log_abs.exp()
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0.0
    }

    /// Signed sum in log space.
    pub fn add(&self, other: &LogVal) -> LogVal {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let m = self.log_abs.max(other.log_abs);
        let s = self.sign * (self.log_abs - m).exp() + other.sign * (other.log_abs - m).exp();
        if s == 0.0 {
            LogVal::zero()
        } else {
            LogVal {
                sign: s.signum(),
                log_abs: m + s.abs().ln(),
            }
        }
    }

    /// Multiply by `exp(log_factor)`.
    pub fn scale_log(&self, log_factor: f64) -> LogVal {
        if self.is_zero() {
            *self
        } else {
            LogVal {
                sign: self.sign,
                log_abs: self.log_abs + log_factor,
            }
        }
    }

    pub fn neg(&self) -> LogVal {
        LogVal {
            sign: -self.sign,
            log_abs: self.log_abs,
        }
    }
}

/// Per-interval product-integration weights for the exponential kernel:
/// `int_0^dt exp(-tau s) [(1 - s/dt) a + (s/dt) b] ds = wa * a + wb * b`.
fn product_weights(tau: f64, dt: f64) -> (f64, f64) {
    let alpha = tau * dt;
    if alpha < 1e-4 {
        // series to avoid cancellation at tiny alpha
        let wa = dt * (0.5 - alpha / 3.0 + alpha * alpha / 8.0);
        let wb = dt * (0.5 - alpha / 6.0 + alpha * alpha / 24.0);
        (wa, wb)
    } else {
        let e = (-alpha).exp();
        let wa = dt * (alpha - 1.0 + e) / (alpha * alpha);
        let wb = dt * (1.0 - e - alpha * e) / (alpha * alpha);
        (wa, wb)
    }
}

/// `int_{t0}^{t1} exp(-tau t) u(t) dt` over uniformly sampled `u`
/// (sample m at t = m dt), with the window given by sample indices
/// `[n0, n1]`. Plain value; underflows for large `tau * t0` — use
/// [`laplace_window_log`] in that regime.
pub fn laplace_time_transform(
    samples: &[f64],
    dt: f64,
    tau: f64,
    rule: LaplaceRule,
) -> Result<f64> {
    match rule {
        LaplaceRule::ProductLinear => {
            let lv = laplace_window_log(samples, dt, tau, 0, samples.len() - 1)?;
            Ok(lv.value())
        }
        LaplaceRule::Trapezoid => {
            if tau * dt > 0.1 {
                return Err(Error::Precondition(format!(
                    "trapezoid rule requires tau * dt <= 0.1, got {}",
                    tau * dt
                )));
            }
            if samples.len() < 2 {
                return Err(Error::Precondition("need at least two samples".into()));
            }
            let mut s = 0.0;
            for (m, &u) in samples.iter().enumerate() {
                let w = if m == 0 || m == samples.len() - 1 {
                    0.5
                } else {
                    1.0
                };
                s += w * (-tau * m as f64 * dt).exp() * u;
            }
            Ok(s * dt)
        }
    }
}

/// Product-rule transform over the sample window `[n0, n1]` as a `LogVal`.
/// The accumulation is anchored at the first nonzero sample, so an exactly
/// zero prefix (the causal silence of a difference record) costs nothing
/// and contributes nothing, and the result stays representable at any tau.
pub fn laplace_window_log(
    samples: &[f64],
    dt: f64,
    tau: f64,
    n0: usize,
    n1: usize,
) -> Result<LogVal> {
    if !(tau > 0.0) || !(dt > 0.0) {
        return Err(Error::Precondition(format!(
            "need tau > 0 and dt > 0, got {tau}, {dt}"
        )));
    }
    if n1 <= n0 || n1 >= samples.len() {
        return Err(Error::Precondition(format!(
            "bad sample window [{n0}, {n1}] for {} samples",
            samples.len()
        )));
    }
    // first interval with a nonzero endpoint
    let first = match (n0..n1).find(|&m| samples[m] != 0.0 || samples[m + 1] != 0.0) {
        Some(m) => m,
        None => return Ok(LogVal::zero()),
    };
    let t_ref = first as f64 * dt;
    let (wa, wb) = product_weights(tau, dt);
    let mut acc = 0.0f64;
    for m in first..n1 {
        // weight relative to the anchor; underflows harmlessly deep in the tail
        let w = (-tau * ((m - first) as f64) * dt).exp();
        if w == 0.0 {
            break;
        }
        acc += w * (wa * samples[m] + wb * samples[m + 1]);
    }
    if acc == 0.0 {
        return Ok(LogVal::zero());
    }
    Ok(LogVal {
        sign: acc.signum(),
        log_abs: acc.abs().ln() - tau * t_ref,
    })
}

/// One row of the indicator sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndicatorRow {
    pub tau: f64,
    /// the indicator `I_f(tau, T)` as a signed log value
    pub value: LogVal,
}

/// The indicator as a function of tau at fixed truncation time `T`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndicatorCurve {
    /// truncation time of the primary window
    pub t_window: f64,
    pub rows: Vec<IndicatorRow>,
}

/// Indicator from recorded data:
/// `I_f(tau, T) = int_0^T e^{-tau t} (u - u0) dt  -  int_T^{T_ext} e^{-tau t} u0 dt`
/// applied to the weighted receiver functionals. `diff` is the difference
/// record (obstacle minus background) and `bg_ext` the background record
/// extended past `T` to approximate the infinite-time transform of the
/// incident field.
pub fn indicator_value(
    diff: &[f64],
    bg_ext: &[f64],
    dt: f64,
    t_window: f64,
    tau: f64,
) -> Result<LogVal> {
    let n_t = (t_window / dt).round() as usize;
    if n_t < 2 || n_t >= diff.len() {
        return Err(Error::Precondition(format!(
            "window T = {t_window} (sample {n_t}) outside the difference record of {} samples",
            diff.len()
        )));
    }
    if n_t + 1 >= bg_ext.len() {
        return Err(Error::Precondition(format!(
            "background record ({} samples) does not extend past T = {t_window}",
            bg_ext.len()
        )));
    }
    let term1 = laplace_window_log(diff, dt, tau, 0, n_t)?;
    let term2 = laplace_window_log(bg_ext, dt, tau, n_t, bg_ext.len() - 1)?;
    Ok(term1.add(&term2.neg()))
}

/// Sweep the indicator over a tau grid at fixed `T`.
pub fn tau_sweep(
    diff: &[f64],
    bg_ext: &[f64],
    dt: f64,
    t_window: f64,
    taus: &[f64],
) -> Result<IndicatorCurve> {
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        rows.push(IndicatorRow {
            tau,
            value: indicator_value(diff, bg_ext, dt, t_window, tau)?,
        });
    }
    Ok(IndicatorCurve {
        t_window,
        rows,
    })
}

/// Geometric tau grid.
pub fn tau_grid(tau_min: f64, tau_max: f64, n: usize) -> Vec<f64> {
    let q = (tau_max / tau_min).powf(1.0 / (n as f64 - 1.0));
    (0..n).map(|i| tau_min * q.powi(i as i32)).collect()
}

/// Decay-rate estimate extracted from an indicator sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceEstimate {
    /// fitted slope of `log |I_f|` versus tau
    pub slope: f64,
    /// `l(D, B)` estimate: `-slope / 2`
    pub l_db_est: f64,
    /// rms residual of the fit
    pub residual: f64,
    /// sign of the indicator on the fitted rows (contrast class)
    pub sign_class: ContrastClass,
}

/// Weighted linear fit of `log |I_f|` against tau over the upper half of
/// the tau grid (weights proportional to tau, rows at exact zero excluded).
/// The asymptotics `(1/tau) log |I_f| -> -2 l(D, B)` make the slope
/// `-2 l(D, B)` up to an `O(log tau / tau)` prefactor bias.
pub fn estimate_distance(curve: &IndicatorCurve) -> Result<DistanceEstimate> {
    let usable: Vec<&IndicatorRow> = curve.rows.iter().filter(|r| !r.value.is_zero()).collect();
    if usable.len() < 3 {
        return Err(Error::Numerical(
            "too few nonzero indicator values for a decay fit".into(),
        ));
    }
    let start = usable.len() / 2;
    let upper = &usable[start..];
    let x: Vec<f64> = upper.iter().map(|r| r.tau).collect();
    let y: Vec<f64> = upper.iter().map(|r| r.value.log_abs).collect();
    let w: Vec<f64> = upper.iter().map(|r| r.tau).collect();
    let (_, slope, residual) = weighted_linear_fit(&x, &y, &w)?;

    let pos = upper.iter().filter(|r| r.value.sign > 0.0).count();
    let neg = upper.len() - pos;
    let sign_class = if pos == upper.len() {
        ContrastClass::A1
    } else if neg == upper.len() {
        ContrastClass::A2
    } else {
        ContrastClass::Undetermined
    };
    Ok(DistanceEstimate {
        slope,
        l_db_est: -slope / 2.0,
        residual,
        sign_class,
    })
}

/// One cell of the threshold scan over (tau, T).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub tau: f64,
    pub t_window: f64,
    /// `exp(tau T) I_f(tau, T)` as a signed log value
    pub scaled: LogVal,
}

/// Scan `exp(tau T) I_f(tau, T)` over a (tau, T) grid. For `T` below the
/// travel-time threshold `2 l(D, B)` the scaled indicator tends to zero
/// with tau; above it, to `+inf` under (A1) and `-inf` under (A2).
pub fn threshold_scan(
    diff: &[f64],
    bg_ext: &[f64],
    dt: f64,
    t_values: &[f64],
    taus: &[f64],
) -> Result<Vec<ThresholdRow>> {
    let mut out = Vec::with_capacity(t_values.len() * taus.len());
    for &t_window in t_values {
        for &tau in taus {
            let v = indicator_value(diff, bg_ext, dt, t_window, tau)?;
            out.push(ThresholdRow {
                tau,
                t_window,
                scaled: v.scale_log(tau * t_window),
            });
        }
    }
    Ok(out)
}

/// Laplace transform of each probe series of a run: the discrete background
/// field `v` (or difference field) at the probe cells.
pub fn field_transform_at_probes(
    probe_series: &[Vec<f64>],
    dt: f64,
    tau: f64,
) -> Result<Vec<LogVal>> {
    probe_series
        .iter()
        .map(|s| laplace_window_log(s, dt, tau, 0, s.len() - 1))
        .collect()
}
