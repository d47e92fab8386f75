//! Preintegration: integrate `f = max(φ, 0)` against `ρ` in `x₁` first,
//! using that `φ` is increasing in `x₁`, so the positive part starts at a
//! single kink `x₁*(x_rest)`.

use thiserror::Error;

use crate::lattice::{self, GeneratingVector, LatticeError, ShiftedRuleRun};
use crate::normal;
use crate::quadrature::Rule;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PreintError {
    #[error("φ is not increasing in x₁ near x₁ = {at} (x_rest = {x_rest:?})")]
    MonotonicityViolated { x_rest: Vec<f64>, at: f64 },
    #[error("kink search did not converge after {iterations} iterations (|φ| = {residual:e}, x_rest = {x_rest:?})")]
    NoConvergence { x_rest: Vec<f64>, iterations: usize, residual: f64 },
    #[error("non-finite integrand value at x₁ = {x1} (x_rest = {x_rest:?})")]
    NonFiniteSample { x_rest: Vec<f64>, x1: f64 },
    #[error("expected {expected} remaining coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid preintegration settings: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonotoneCertificate {
    /// Monotonicity was established when the integrand was built.
    Asserted,
    /// Check `∂φ/∂x₁ > 0` at this many stratified points per evaluation.
    Probed(usize),
}

pub const DEFAULT_PROBES: usize = 64;

/// `φ` on `ℝ^d` together with its `x₁` derivative.
pub trait KinkIntegrand: Sync {
    fn dim(&self) -> usize;
    fn phi(&self, x: &[f64]) -> f64;
    fn dphi_dx1(&self, x: &[f64]) -> f64;

    fn certificate(&self) -> MonotoneCertificate {
        MonotoneCertificate::Probed(DEFAULT_PROBES)
    }

    /// `x₁ ↦ (φ, ∂φ/∂x₁)` with the other coordinates fixed. Implementors
    /// can override this to precompute whatever does not depend on `x₁`.
    fn line<'a>(&'a self, x_rest: &[f64]) -> Box<dyn Fn(f64) -> (f64, f64) + 'a> {
        let mut x = Vec::with_capacity(x_rest.len() + 1);
        x.push(0.0);
        x.extend_from_slice(x_rest);
        Box::new(move |x1| {
            let mut x = x.clone();
            x[0] = x1;
            (self.phi(&x), self.dphi_dx1(&x))
        })
    }
}

impl<K: KinkIntegrand + ?Sized> KinkIntegrand for &K {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn phi(&self, x: &[f64]) -> f64 {
        (**self).phi(x)
    }
    fn dphi_dx1(&self, x: &[f64]) -> f64 {
        (**self).dphi_dx1(x)
    }
    fn certificate(&self) -> MonotoneCertificate {
        (**self).certificate()
    }
    fn line<'a>(&'a self, x_rest: &[f64]) -> Box<dyn Fn(f64) -> (f64, f64) + 'a> {
        (**self).line(x_rest)
    }
}

/// A [`KinkIntegrand`] from two closures.
pub struct FnKink<P, D> {
    pub d: usize,
    pub phi: P,
    pub dphi: D,
    pub certificate: MonotoneCertificate,
}

impl<P, D> FnKink<P, D>
where
    P: Fn(&[f64]) -> f64 + Sync,
    D: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(d: usize, phi: P, dphi: D) -> Self {
        Self { d, phi, dphi, certificate: MonotoneCertificate::Probed(DEFAULT_PROBES) }
    }
}

impl<P, D> KinkIntegrand for FnKink<P, D>
where
    P: Fn(&[f64]) -> f64 + Sync,
    D: Fn(&[f64]) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.d
    }
    fn phi(&self, x: &[f64]) -> f64 {
        (self.phi)(x)
    }
    fn dphi_dx1(&self, x: &[f64]) -> f64 {
        (self.dphi)(x)
    }
    fn certificate(&self) -> MonotoneCertificate {
        self.certificate
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KinkLocation {
    Root(f64),
    AllPositive,
    AllNegative,
}

pub const INITIAL_BRACKET: f64 = 8.0;
pub const BRACKET_CAP: f64 = 40.0;
pub const MAX_ITERATIONS: usize = 200;
pub const DEFAULT_INNER_ORDER: usize = 64;
pub const DEFAULT_ROOT_TOL: f64 = 1e-12;
/// Distance past `max(x₁*, 0)` where the inner integral is truncated;
/// `ρ(13) < 1e-36`.
pub const INNER_TAIL: f64 = 13.0;
/// Widest Gauss–Legendre panel of the inner rule.
pub const PANEL_WIDTH: f64 = 16.0;

fn bracket_and_solve(
    g: &dyn Fn(f64) -> (f64, f64),
    x_rest: &[f64],
    root_tol: f64,
) -> Result<KinkLocation, PreintError> {
    let nonfinite = |x1: f64| PreintError::NonFiniteSample { x_rest: x_rest.to_vec(), x1 };
    let violated = |at: f64| PreintError::MonotonicityViolated { x_rest: x_rest.to_vec(), at };
    let eval = |x1: f64| {
        let v = g(x1);
        if v.0.is_finite() && v.1.is_finite() {
            Ok(v)
        } else {
            Err(nonfinite(x1))
        }
    };

    let (mut lo, mut hi) = (-INITIAL_BRACKET, INITIAL_BRACKET);
    let (mut flo, mut fhi) = (eval(lo)?.0, eval(hi)?.0);
    loop {
        if flo > fhi {
            return Err(violated(0.5 * (lo + hi)));
        }
        if flo <= 0.0 && fhi >= 0.0 {
            break;
        }
        if flo > 0.0 {
            hi = lo;
            fhi = flo;
            lo *= 2.0;
            flo = eval(lo)?.0;
        } else {
            lo = hi;
            flo = fhi;
            hi *= 2.0;
            fhi = eval(hi)?.0;
        }
        // no sign change anywhere inside ±BRACKET_CAP
        if lo.abs() > BRACKET_CAP && hi.abs() > BRACKET_CAP && !(flo <= 0.0 && fhi >= 0.0) && flo <= fhi {
            return Ok(if flo > 0.0 { KinkLocation::AllPositive } else { KinkLocation::AllNegative });
        }
    }
    if flo == 0.0 {
        return Ok(KinkLocation::Root(lo));
    }
    if fhi == 0.0 {
        return Ok(KinkLocation::Root(hi));
    }

    // safeguarded Newton, bracket [lo, hi] with φ(lo) < 0 < φ(hi)
    let mut x = 0.5 * (lo + hi);
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let (f, df) = eval(x)?;
        residual = f.abs();
        if residual <= root_tol {
            return Ok(KinkLocation::Root(x));
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            // no representable point gets closer
            return Ok(KinkLocation::Root(x));
        }
        let newton = x - f / df;
        x = if df > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    Err(PreintError::NoConvergence { x_rest: x_rest.to_vec(), iterations: MAX_ITERATIONS, residual })
}

fn probe(
    g: &dyn Fn(f64) -> (f64, f64),
    x_rest: &[f64],
    lo: f64,
    hi: f64,
    k: usize,
) -> Result<(), PreintError> {
    let h = (hi - lo) / k as f64;
    for i in 0..k {
        let x1 = lo + (i as f64 + 0.5) * h;
        if g(x1).1.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(PreintError::MonotonicityViolated { x_rest: x_rest.to_vec(), at: x1 });
        }
    }
    Ok(())
}

/// Locate the kink of `φ(·, x_rest)`.
pub fn find_kink<K: KinkIntegrand + ?Sized>(
    integrand: &K,
    x_rest: &[f64],
    root_tol: f64,
) -> Result<KinkLocation, PreintError> {
    if x_rest.len() + 1 != integrand.dim() {
        return Err(PreintError::DimensionMismatch { expected: integrand.dim() - 1, got: x_rest.len() });
    }
    let g = integrand.line(x_rest);
    bracket_and_solve(&*g, x_rest, root_tol)
}

/// `P₁f(x_rest) = ∫ max(φ(x₁, x_rest), 0) ρ(x₁) dx₁` with `ρ` standard normal.
#[derive(Debug, Clone)]
pub struct PreintegratedFunction<K> {
    pub integrand: K,
    pub inner_order: usize,
    pub root_tol: f64,
}

impl<K: KinkIntegrand> PreintegratedFunction<K> {
    pub fn new(integrand: K) -> Self {
        Self { integrand, inner_order: DEFAULT_INNER_ORDER, root_tol: DEFAULT_ROOT_TOL }
    }

    pub fn with_inner_order(mut self, n: usize) -> Self {
        self.inner_order = n;
        self
    }

    pub fn with_root_tol(mut self, tol: f64) -> Self {
        self.root_tol = tol;
        self
    }

    /// Dimension of `P₁f`, one less than that of `φ`.
    pub fn dim(&self) -> usize {
        self.integrand.dim() - 1
    }

    fn validate(&self) -> Result<(), PreintError> {
        if self.integrand.dim() == 0 {
            return Err(PreintError::InvalidConfig("φ needs at least one variable".into()));
        }
        if self.inner_order == 0 {
            return Err(PreintError::InvalidConfig("inner order must be positive".into()));
        }
        if !(self.root_tol > 0.0) {
            return Err(PreintError::InvalidConfig(format!("root tolerance must be positive, got {}", self.root_tol)));
        }
        Ok(())
    }

    pub fn eval(&self, x_rest: &[f64]) -> Result<f64, PreintError> {
        self.validate()?;
        if x_rest.len() != self.dim() {
            return Err(PreintError::DimensionMismatch { expected: self.dim(), got: x_rest.len() });
        }
        let g = self.integrand.line(x_rest);
        let (a, b) = match bracket_and_solve(&*g, x_rest, self.root_tol)? {
            KinkLocation::AllNegative => return Ok(0.0),
            KinkLocation::AllPositive => (-INNER_TAIL, INNER_TAIL),
            KinkLocation::Root(r) => (r, r.max(0.0) + INNER_TAIL),
        };
        if let MonotoneCertificate::Probed(k) = self.integrand.certificate() {
            probe(&*g, x_rest, a, b, k.max(1))?;
        }
        let gl = Rule::gauss_legendre(self.inner_order);
        let panels = ((b - a) / PANEL_WIDTH).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        let mut sum = 0.0;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            let mut panel = 0.0;
            for (&t, &w) in gl.nodes.iter().zip(&gl.weights) {
                let x1 = mid + 0.5 * h * t;
                let v = g(x1).0.max(0.0) * normal::pdf(x1);
                if !v.is_finite() {
                    return Err(PreintError::NonFiniteSample { x_rest: x_rest.to_vec(), x1 });
                }
                panel += w * v;
            }
            sum += 0.5 * h * panel;
        }
        Ok(sum)
    }
}

/// `P₁f` as a fallible function of `d − 1` variables.
pub fn preintegrated_integrand<K: KinkIntegrand>(
    pf: &PreintegratedFunction<K>,
) -> impl Fn(&[f64]) -> Result<f64, PreintError> + Sync + '_ {
    move |x_rest| pf.eval(x_rest)
}

/// Randomly shifted lattice estimate of `∫ P₁f ρ` over the remaining
/// coordinates. With `d = 1` there is nothing left to sample and the
/// scalar `P₁f()` is returned with zero error.
pub fn qmc_preintegrated<K: KinkIntegrand>(
    pf: &PreintegratedFunction<K>,
    vector: &GeneratingVector,
    m: usize,
    seed: u64,
) -> Result<ShiftedRuleRun, PreintError> {
    if pf.dim() == 0 {
        let v = pf.eval(&[])?;
        return Ok(ShiftedRuleRun {
            vector: None,
            n: 1,
            m: 1,
            seed,
            estimates: vec![v],
            mean: v,
            rms_error: 0.0,
        });
    }
    if vector.dim() != pf.dim() {
        return Err(PreintError::DimensionMismatch { expected: pf.dim(), got: vector.dim() });
    }
    lattice::try_qmc_estimate(preintegrated_integrand(pf), vector, m, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{tensor_integrate, Domain, QuadratureKind, QuadratureSpec};

    fn linear2() -> FnKink<impl Fn(&[f64]) -> f64 + Sync, impl Fn(&[f64]) -> f64 + Sync> {
        FnKink::new(2, |x: &[f64]| x[0] + x[1], |_: &[f64]| 1.0)
    }

    #[test]
    fn kink_examples() {
        let shifted = FnKink::new(1, |x: &[f64]| x[0] - 2.5, |_: &[f64]| 1.0);
        match find_kink(&shifted, &[], 1e-12).unwrap() {
            KinkLocation::Root(r) => assert!((r - 2.5).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        let exp = FnKink::new(1, |x: &[f64]| x[0].exp() - 3.0, |x: &[f64]| x[0].exp());
        match find_kink(&exp, &[], 1e-12).unwrap() {
            KinkLocation::Root(r) => assert!((r - 3f64.ln()).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        let positive = FnKink::new(1, |x: &[f64]| x[0].exp() + 1.0, |x: &[f64]| x[0].exp());
        assert_eq!(find_kink(&positive, &[], 1e-12).unwrap(), KinkLocation::AllPositive);
        let negative = FnKink::new(1, |_: &[f64]| -1.0, |_: &[f64]| 0.0);
        assert_eq!(find_kink(&negative, &[], 1e-12).unwrap(), KinkLocation::AllNegative);
        // root far out, found by bracket doubling
        let far = FnKink::new(1, |x: &[f64]| x[0] - 30.0, |_: &[f64]| 1.0);
        assert!(matches!(find_kink(&far, &[], 1e-12).unwrap(), KinkLocation::Root(r) if (r - 30.0).abs() < 1e-12));
    }

    #[test]
    fn decreasing_phi_is_rejected() {
        let dec = FnKink::new(1, |x: &[f64]| 1.0 - x[0], |_: &[f64]| -1.0);
        assert!(matches!(find_kink(&dec, &[], 1e-12), Err(PreintError::MonotonicityViolated { .. })));
        // increasing at the bracket ends but not in between: caught by probing
        let wiggle = FnKink::new(1, |x: &[f64]| x[0] + 3.0 * x[0].sin(), |x: &[f64]| 1.0 + 3.0 * x[0].cos());
        let pf = PreintegratedFunction::new(wiggle);
        assert!(matches!(pf.eval(&[]), Err(PreintError::MonotonicityViolated { .. })));
    }

    #[test]
    fn closed_form_linear_case() {
        let pf = PreintegratedFunction::new(linear2());
        for x2 in [-6.0, -2.0, -0.3, 0.0, 0.7, 3.0, 7.5] {
            let exact = normal::pdf(x2) + x2 * normal::cdf(x2);
            let v = pf.eval(&[x2]).unwrap();
            assert!((v - exact).abs() <= 1e-10, "x2={x2}: {v} vs {exact}");
        }
        let none = PreintegratedFunction::new(FnKink::new(2, |_: &[f64]| -1.0, |_: &[f64]| 0.0));
        assert_eq!(none.eval(&[0.4]).unwrap(), 0.0);
        let all = PreintegratedFunction::new(FnKink::new(1, |x: &[f64]| x[0] + 100.0, |_: &[f64]| 1.0));
        assert!((all.eval(&[]).unwrap() - 100.0).abs() < 1e-10);
    }

    #[test]
    fn qmc_of_preintegrated_linear_case() {
        let pf = PreintegratedFunction::new(linear2());
        let v = lattice::korobov_search(1 << 10, 1).unwrap();
        let run = qmc_preintegrated(&pf, &v, 16, 7).unwrap();
        let exact = 1.0 / std::f64::consts::PI.sqrt();
        assert!((run.mean - exact).abs() <= 3.0 * run.rms_error, "{} ± {}", run.mean, run.rms_error);

        let none = PreintegratedFunction::new(FnKink::new(2, |_: &[f64]| -1.0, |_: &[f64]| 0.0));
        let zero = qmc_preintegrated(&none, &v, 4, 1).unwrap();
        assert_eq!((zero.mean, zero.rms_error), (0.0, 0.0));

        // d = 1: E[max(Z, 0)] = ρ(0)
        let scalar = PreintegratedFunction::new(FnKink::new(1, |x: &[f64]| x[0], |_: &[f64]| 1.0));
        let run = qmc_preintegrated(&scalar, &v, 16, 0).unwrap();
        assert_eq!(run.estimates.len(), 1);
        assert!((run.mean - normal::pdf(0.0)).abs() < 1e-12);
    }

    #[test]
    fn inner_order_is_converged() {
        let phi = |x: &[f64]| (0.3 * x[0] + 0.1 * x[1]).exp() + 0.2 * x[0] - 1.1;
        let dphi = |x: &[f64]| 0.3 * (0.3 * x[0] + 0.1 * x[1]).exp() + 0.2;
        let a = PreintegratedFunction::new(FnKink::new(2, phi, dphi));
        let b = PreintegratedFunction::new(FnKink::new(2, phi, dphi)).with_inner_order(128);
        for x2 in [-3.0, 0.0, 2.0] {
            assert!((a.eval(&[x2]).unwrap() - b.eval(&[x2]).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn fubini_at_d3() {
        let phi = |x: &[f64]| (0.4 * x[0] + 0.2 * x[1]).exp() - 1.0 + 0.3 * x[2];
        let dphi = |x: &[f64]| 0.4 * (0.4 * x[0] + 0.2 * x[1]).exp();
        let pf = PreintegratedFunction::new(FnKink::new(3, phi, dphi));
        let gh = QuadratureSpec::new(QuadratureKind::GaussHermite(40), Domain::RealLine);
        let outer = tensor_integrate(&[gh, gh], |x| pf.eval(x).unwrap() * normal::pdf(x[0]) * normal::pdf(x[1])).unwrap();
        // independent route: x₂ integrated first by adaptive quadrature
        // without locating the kink, then (x₁, x₃) by Gauss–Hermite
        let adaptive = QuadratureSpec::new(
            QuadratureKind::GaussKronrod { abs_tol: 1e-13, rel_tol: 1e-11, max_intervals: 2000 },
            Domain::Interval(-12.0, 12.0),
        );
        let full = tensor_integrate(&[gh, gh, adaptive], |x| {
            phi(&[x[0], x[2], x[1]]).max(0.0) * normal::pdf(x[0]) * normal::pdf(x[1]) * normal::pdf(x[2])
        })
        .unwrap();
        assert!((outer - full).abs() <= 1e-6 * full.abs(), "{outer} vs {full}");
    }

    #[test]
    fn kink_shadow_is_smoothed() {
        // x₂ = 0 is where the kink of max(x₁ + x₂, 0) sits at x₁ = 0
        let pf = PreintegratedFunction::new(linear2());
        let slope = |x: f64, h: f64| (pf.eval(&[x + h]).unwrap() - pf.eval(&[x - h]).unwrap()) / (2.0 * h);
        let coarse = slope(0.0, 1e-2);
        let fine = slope(0.0, 1e-3);
        assert!((coarse - 0.5).abs() < 1e-4 && (fine - 0.5).abs() < 1e-6);
        // second differences stay bounded as well: P₁f'' = ρ
        let h = 1e-3;
        let second = (pf.eval(&[h]).unwrap() - 2.0 * pf.eval(&[0.0]).unwrap() + pf.eval(&[-h]).unwrap()) / (h * h);
        assert!((second - normal::pdf(0.0)).abs() < 1e-3);
    }
}
