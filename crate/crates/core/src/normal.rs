//! Standard normal density, distribution function and its inverse.
//!
//! `cdf` is built on `libm::erfc`, which keeps relative accuracy deep into
//! the lower tail. Below `x = -20` the log-cdf switches to the Laplace
//! continued fraction for the Mills ratio so that `ln Φ` stays finite long
//! after `Φ` itself underflows.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// `ln(√(2π))`
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Where `log_cdf` hands over from `ln(erfc)` to the Mills-ratio expansion.
const MILLS_SWITCH: f64 = -20.0;

/// Below this tail probability `inv_cdf` iterates on `ln Φ` instead of `Φ`.
const LOG_DOMAIN_SWITCH: f64 = 1e-100;

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Φ(x)`, computed without cancellation.
pub fn ccdf(x: f64) -> f64 {
    cdf(-x)
}

/// Mills ratio `(1 - Φ(t)) / ρ(t)` for `t > 0` by backward evaluation of
/// the continued fraction `1/(t + 1/(t + 2/(t + 3/(t + ...))))`.
fn mills_ratio(t: f64) -> f64 {
    debug_assert!(t > 0.0);
    let depth = if t > 10.0 { 40 } else { 200 };
    let mut v = t;
    for k in (1..=depth).rev() {
        v = t + k as f64 / v;
    }
    1.0 / v
}

/// `ln((1 - Φ(t)) / ρ(t))` for `t >= 0`.
pub fn log_mills_ratio(t: f64) -> f64 {
    if t >= -MILLS_SWITCH {
        mills_ratio(t).ln()
    } else {
        log_ccdf(t) - log_pdf(t)
    }
}

/// `ln Φ(x)`, finite for every finite `x`.
pub fn log_cdf(x: f64) -> f64 {
    if x <= MILLS_SWITCH {
        log_pdf(x) + mills_ratio(-x).ln()
    } else if x > 0.0 {
        (-ccdf(x)).ln_1p()
    } else {
        cdf(x).ln()
    }
}

/// `ln(1 - Φ(x))`.
pub fn log_ccdf(x: f64) -> f64 {
    log_cdf(-x)
}

/// Lower-tail quantile `x <= 0` with `Φ(x) = q`, `0 < q <= 0.5`.
fn lower_quantile(q: f64) -> f64 {
    // Abramowitz & Stegun 26.2.23 (|error| < 4.5e-4) as the starting point.
    let t = (-2.0 * q.ln()).sqrt();
    let num = 2.515_517 + t * (0.802_853 + t * 0.010_328);
    let den = 1.0 + t * (1.432_788 + t * (0.189_269 + t * 0.001_308));
    let mut x = -(t - num / den);

    if q < LOG_DOMAIN_SWITCH {
        // Newton on ln Φ(x) - ln q; ρ itself may underflow here.
        let target = q.ln();
        for _ in 0..50 {
            let lc = log_cdf(x);
            let slope = (log_pdf(x) - lc).exp();
            let step = (lc - target) / slope;
            x -= step;
            if step.abs() <= 1e-15 * x.abs() {
                break;
            }
        }
        return x;
    }

    // Halley on Φ(x) - q.
    for _ in 0..8 {
        let e = (cdf(x) - q) / pdf(x);
        let step = e / (1.0 + 0.5 * x * e);
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Inverse of `cdf`. Returns `None` outside the open unit interval.
pub fn inv_cdf(p: f64) -> Option<f64> {
    if !(p > 0.0 && p < 1.0) {
        return None;
    }
    if p == 0.5 {
        return Some(0.0);
    }
    Some(if p < 0.5 {
        lower_quantile(p)
    } else {
        -lower_quantile(1.0 - p)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetry_at_origin() {
        assert_eq!(cdf(0.0), 0.5);
        assert_eq!(inv_cdf(0.5), Some(0.0));
    }

    #[test]
    fn log_cdf_is_continuous_across_the_mills_switch() {
        let x = MILLS_SWITCH;
        let mills = log_pdf(x) + mills_ratio(-x).ln();
        let direct = cdf(x).ln();
        assert!((mills - direct).abs() < 1e-12 * direct.abs(), "{mills} vs {direct}");
        // Deep tail where Φ underflows.
        let deep = log_cdf(-60.0);
        assert!(deep.is_finite() && deep < -1800.0);
    }

    #[test]
    fn mills_ratio_matches_erfc_where_both_are_accurate() {
        for &t in &[5.0, 8.0, 12.0, 20.0] {
            let direct = ccdf(t) / pdf(t);
            let cf = mills_ratio(t);
            assert!((direct - cf).abs() / cf < 1e-13, "t={t}: {direct} vs {cf}");
        }
    }

    #[test]
    fn quantiles_round_trip() {
        for &p in &[1e-300, 1e-120, 1e-20, 1e-8, 0.01, 0.3, 0.5, 0.77, 0.999_999] {
            let x = inv_cdf(p).unwrap();
            let back = if p < 1e-100 {
                (log_cdf(x) - p.ln()).abs()
            } else {
                ((cdf(x) - p) / p).abs()
            };
            assert!(back < 1e-12, "p={p}: x={x}, err={back}");
        }
    }

    #[test]
    fn rejects_closed_endpoints() {
        assert_eq!(inv_cdf(0.0), None);
        assert_eq!(inv_cdf(1.0), None);
        assert_eq!(inv_cdf(f64::NAN), None);
    }
}
