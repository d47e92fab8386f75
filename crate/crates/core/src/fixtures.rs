//! Test functions with analytic mixed partials.

use rand::Rng;

use crate::norms::{MixedPartials, NormError, SmoothTestFunction};
use crate::subset::Subset;

/// `f(x) = p(x) ∏_j exp(-x_j² / β_j)` with `p` a polynomial.
///
/// Every such function lies in both `H` and `W` for all supported weight
/// pairs as long as `β_j` is large enough for the `ψ` tails; random
/// instances use `β_j ∈ [8, 16]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyGaussian {
    /// `(exponents, coefficient)` per monomial.
    pub monomials: Vec<(Vec<u32>, f64)>,
    pub beta: Vec<f64>,
}

impl PolyGaussian {
    pub fn new(monomials: Vec<(Vec<u32>, f64)>, beta: Vec<f64>) -> Self {
        debug_assert!(monomials.iter().all(|(e, _)| e.len() == beta.len()));
        Self { monomials, beta }
    }

    /// Random total degree in `0..=3`, coefficients uniform in `[-1, 1]`,
    /// `β_j` uniform in `[8, 16]`.
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let degree = rng.random_range(0..=3u32);
        let beta = (0..d).map(|_| rng.random_range(8.0..16.0)).collect();
        let monomials = exponents_up_to(d, degree)
            .into_iter()
            .map(|e| (e, rng.random_range(-1.0..1.0)))
            .collect();
        Self { monomials, beta }
    }
}

fn exponents_up_to(d: usize, degree: u32) -> Vec<Vec<u32>> {
    if d == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for k in 0..=degree {
        for mut rest in exponents_up_to(d - 1, degree - k) {
            rest.insert(0, k);
            out.push(rest);
        }
    }
    out
}

impl MixedPartials for PolyGaussian {
    fn dim(&self) -> usize {
        self.beta.len()
    }

    fn partial(&self, u: Subset, x: &[f64]) -> f64 {
        let gauss: f64 = x.iter().zip(&self.beta).map(|(x, b)| (-x * x / b).exp()).product();
        let mut sum = 0.0;
        for (exps, c) in &self.monomials {
            let mut term = *c;
            for (j, (&k, &xj)) in exps.iter().zip(x).enumerate() {
                let p = xj.powi(k as i32);
                term *= if u.contains(j) {
                    // d/dx [x^k e^{-x²/β}] / e^{-x²/β}
                    let lower = if k == 0 { 0.0 } else { k as f64 * xj.powi(k as i32 - 1) };
                    lower - 2.0 * xj * p / self.beta[j]
                } else {
                    p
                };
            }
            sum += term;
        }
        sum * gauss
    }
}

/// `f = 1/√ρ` for the standard normal `ρ`: `f² ρ ≡ 1`, so `f ∉ L²_ρ`, while
/// `f′ = x f / 2` is square integrable against `ψ = exp(-3x²/4)`.
pub fn inverse_sqrt_density() -> Result<SmoothTestFunction, NormError> {
    let scale = (2.0 * std::f64::consts::PI).powf(0.25);
    SmoothTestFunction::one_dim(
        move |x| scale * (x * x / 4.0).exp(),
        move |x| 0.5 * x * scale * (x * x / 4.0).exp(),
    )
}
