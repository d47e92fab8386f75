//! Weight-function pairs `(ρ, ψ)`, their distribution functions, and the
//! integrability conditions that govern the ANOVA space.
//!
//! The weak condition asks for `∫_{-∞}^c Φ²/ψ` and `∫_c^∞ (1-Φ)²/ψ` to be
//! finite; the strong condition drops the squares. Under the strong
//! condition the constant `C(ρ, ψ) = ∫ Φ(1-Φ)/ψ` is finite and controls the
//! norm equivalence.
//!
//! All tail integrands are evaluated as `exp(ln Φ + ... - ln ψ)` so that
//! huge `1/ψ` and tiny `Φ` never meet as `∞ · 0`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::normal;
use crate::quadrature::{self, QuadratureError, Rule};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeightError {
    #[error("invalid weight parameter: {0}")]
    InvalidParameter(String),
    #[error("probability {0} is outside (0, 1)")]
    DomainError(f64),
    #[error("condition classification inconclusive up to R = 80")]
    ClassificationInconclusive { diagnostics: Vec<GrowthSample> },
    #[error("C(ρ, ψ) diverges: partial integral {partial:e} still growing at R = {radius}")]
    DivergenceDetected { radius: f64, partial: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoFamily {
    /// Standard normal density.
    GaussianStd,
    /// Standard logistic density `e^{-x} / (1 + e^{-x})²`.
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsiFamily {
    /// `ψ(x) = exp(-x² / (2α))`.
    GaussianDecay { alpha: f64 },
    /// `ψ(x) = exp(-α |x|)`.
    ExpDecay { alpha: f64 },
    /// `ψ(x) = c`.
    Constant { c: f64 },
}

/// The five integrands that appear in the conditions and the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TailIntegrand {
    /// `Φ² / ψ`
    WeakLeft,
    /// `(1 - Φ)² / ψ`
    WeakRight,
    /// `Φ / ψ`
    StrongLeft,
    /// `(1 - Φ) / ψ`
    StrongRight,
    /// `Φ (1 - Φ) / ψ`
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightPair {
    pub rho: RhoFamily,
    pub psi: PsiFamily,
    pub tolerance: f64,
}

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Half-width of the truncated rules used where no Gauss family fits.
pub const TRUNCATION: f64 = 40.0;

/// Radii used by the numeric divergence classifier.
pub const CLASSIFIER_RADII: [f64; 4] = [10.0, 20.0, 40.0, 80.0];

/// A doubling of the truncation radius that grows the partial integral by
/// more than this factor counts as divergence.
pub const GROWTH_RATIO: f64 = 1.5;

/// Last-doubling relative increment below which the classifier calls a
/// truncated integral convergent.
const CONVERGED_INCREMENT: f64 = 1e-8;

/// One row of the truncation-growth diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthSample {
    pub radius: f64,
    /// `∫_{-R}^0 Φ²/ψ + ∫_0^R (1-Φ)²/ψ`
    pub weak_partial: f64,
    /// `∫_{-R}^0 Φ/ψ + ∫_0^R (1-Φ)/ψ`
    pub strong_partial: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassificationMethod {
    Analytic,
    Numeric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub weak_holds: bool,
    pub strong_holds: bool,
    pub c_constant: Option<f64>,
    pub method: ClassificationMethod,
    pub diagnostics: Vec<GrowthSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Growth {
    Converges,
    Diverges,
    Unclear,
}

impl WeightPair {
    pub fn new(rho: RhoFamily, psi: PsiFamily) -> Result<Self, WeightError> {
        let param = match psi {
            PsiFamily::GaussianDecay { alpha } | PsiFamily::ExpDecay { alpha } => alpha,
            PsiFamily::Constant { c } => c,
        };
        if !(param.is_finite() && param > 0.0) {
            return Err(WeightError::InvalidParameter(format!(
                "ψ parameter must be positive and finite, got {param}"
            )));
        }
        Ok(Self {
            rho,
            psi,
            tolerance: DEFAULT_TOLERANCE,
        })
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn gaussian(alpha: f64) -> Result<Self, WeightError> {
        Self::new(RhoFamily::GaussianStd, PsiFamily::GaussianDecay { alpha })
    }

    pub fn density(&self, x: f64) -> f64 {
        match self.rho {
            RhoFamily::GaussianStd => normal::pdf(x),
            RhoFamily::Logistic => {
                let e = (-x.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        match self.rho {
            RhoFamily::GaussianStd => -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln(),
            RhoFamily::Logistic => -x.abs() - 2.0 * softplus(-x.abs()),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.rho {
            RhoFamily::GaussianStd => normal::cdf(x),
            RhoFamily::Logistic => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// `1 - Φ(x)` without cancellation.
    pub fn ccdf(&self, x: f64) -> f64 {
        match self.rho {
            // both families are symmetric
            RhoFamily::GaussianStd | RhoFamily::Logistic => self.cdf(-x),
        }
    }

    pub fn log_cdf(&self, x: f64) -> f64 {
        match self.rho {
            RhoFamily::GaussianStd => normal::log_cdf(x),
            RhoFamily::Logistic => -softplus(-x),
        }
    }

    pub fn log_ccdf(&self, x: f64) -> f64 {
        self.log_cdf(-x)
    }

    pub fn inv_cdf(&self, p: f64) -> Result<f64, WeightError> {
        match self.rho {
            RhoFamily::GaussianStd => normal::inv_cdf(p).ok_or(WeightError::DomainError(p)),
            RhoFamily::Logistic => {
                if p > 0.0 && p < 1.0 {
                    Ok(p.ln() - (-p).ln_1p())
                } else {
                    Err(WeightError::DomainError(p))
                }
            }
        }
    }

    pub fn psi(&self, x: f64) -> f64 {
        self.log_psi(x).exp()
    }

    pub fn log_psi(&self, x: f64) -> f64 {
        match self.psi {
            PsiFamily::GaussianDecay { alpha } => -x * x / (2.0 * alpha),
            PsiFamily::ExpDecay { alpha } => -alpha * x.abs(),
            PsiFamily::Constant { c } => c.ln(),
        }
    }

    pub fn integrand(&self, kind: TailIntegrand, x: f64) -> f64 {
        self.log_integrand(kind, x).exp()
    }

    /// Natural log of [`Self::integrand`].
    ///
    /// Every factor is split as `q x² + r`; the quadratic parts of a Gaussian
    /// tail and a Gaussian `ψ` are combined before multiplying by `x²`, so
    /// the exponents cancel exactly instead of leaving rounding noise of
    /// size `x² ε`.
    pub fn log_integrand(&self, kind: TailIntegrand, x: f64) -> f64 {
        let (lo_k, hi_k) = match kind {
            TailIntegrand::WeakLeft => (2.0, 0.0),
            TailIntegrand::WeakRight => (0.0, 2.0),
            TailIntegrand::StrongLeft => (1.0, 0.0),
            TailIntegrand::StrongRight => (0.0, 1.0),
            TailIntegrand::Product => (1.0, 1.0),
        };
        let (q_lo, r_lo) = self.split_log_cdf(x);
        let (q_hi, r_hi) = self.split_log_cdf(-x);
        let (q_psi, r_psi) = match self.psi {
            PsiFamily::GaussianDecay { alpha } => (-0.5 / alpha, 0.0),
            _ => (0.0, self.log_psi(x)),
        };
        let mut r = -r_psi;
        if lo_k > 0.0 {
            r += lo_k * r_lo;
        }
        if hi_k > 0.0 {
            r += hi_k * r_hi;
        }
        (lo_k * q_lo + hi_k * q_hi - q_psi) * (x * x) + r
    }

    /// `ln Φ(x) = q x² + r`.
    fn split_log_cdf(&self, x: f64) -> (f64, f64) {
        match self.rho {
            RhoFamily::GaussianStd if x < 0.0 => {
                (-0.5, -0.918_938_533_204_672_8 + normal::log_mills_ratio(-x))
            }
            _ => (0.0, self.log_cdf(x)),
        }
    }

    /// Closed-form classification, available for every family pair.
    fn analytic_conditions(&self) -> (bool, bool) {
        match (self.rho, self.psi) {
            (RhoFamily::GaussianStd, PsiFamily::GaussianDecay { alpha }) => (alpha >= 0.5, alpha > 1.0),
            (RhoFamily::GaussianStd, PsiFamily::ExpDecay { .. } | PsiFamily::Constant { .. }) => {
                (true, true)
            }
            // Φ ~ e^{-|t|} in the tails.
            (RhoFamily::Logistic, PsiFamily::ExpDecay { alpha }) => (alpha < 2.0, alpha < 1.0),
            (RhoFamily::Logistic, PsiFamily::Constant { .. }) => (true, true),
            (RhoFamily::Logistic, PsiFamily::GaussianDecay { .. }) => (false, false),
        }
    }

    /// `∫_{-R}^0 left + ∫_0^R right`, composite Gauss–Legendre on unit panels.
    fn truncated(&self, left: TailIntegrand, right: TailIntegrand, radius: f64) -> f64 {
        let panels = radius.ceil() as usize;
        let lower = Rule::composite_legendre(-radius, 0.0, panels, 16);
        let upper = Rule::composite_legendre(0.0, radius, panels, 16);
        lower.integrate(|x| self.integrand(left, x)) + upper.integrate(|x| self.integrand(right, x))
    }

    pub fn growth_profile(&self) -> Vec<GrowthSample> {
        CLASSIFIER_RADII
            .iter()
            .map(|&radius| GrowthSample {
                radius,
                weak_partial: self.truncated(TailIntegrand::WeakLeft, TailIntegrand::WeakRight, radius),
                strong_partial: self.truncated(TailIntegrand::StrongLeft, TailIntegrand::StrongRight, radius),
            })
            .collect()
    }

    /// Classify both conditions from the analytic rules, attach the numeric
    /// growth profile, and compute `C` when the strong condition holds.
    pub fn check_conditions(&self) -> Result<ConditionReport, WeightError> {
        let (weak_holds, strong_holds) = self.analytic_conditions();
        let c_constant = if strong_holds { Some(self.compute_c()?) } else { None };
        Ok(ConditionReport {
            weak_holds,
            strong_holds,
            c_constant,
            method: ClassificationMethod::Analytic,
            diagnostics: self.growth_profile(),
        })
    }

    /// Classify from truncated integrals alone.
    ///
    /// A condition is declared violated when a partial integral is
    /// non-finite or grows by more than [`GROWTH_RATIO`] over the last
    /// doubling `R = 40 → 80`, and satisfied when that doubling changes it
    /// by less than 1e-8 relative. Anything in between is reported as
    /// [`WeightError::ClassificationInconclusive`].
    pub fn classify_numerically(&self) -> Result<ConditionReport, WeightError> {
        let diagnostics = self.growth_profile();
        let weak = growth_of(diagnostics.iter().map(|s| s.weak_partial));
        let strong = growth_of(diagnostics.iter().map(|s| s.strong_partial));

        let (weak_holds, strong_holds) = match (weak, strong) {
            (_, Growth::Converges) => (true, true),
            (Growth::Converges, Growth::Diverges) => (true, false),
            (Growth::Diverges, _) => (false, false),
            _ => return Err(WeightError::ClassificationInconclusive { diagnostics }),
        };
        let c_constant = if strong_holds { Some(self.compute_c()?) } else { None };
        Ok(ConditionReport {
            weak_holds,
            strong_holds,
            c_constant,
            method: ClassificationMethod::Numeric,
            diagnostics,
        })
    }

    /// `C(ρ, ψ) = ∫ Φ(1-Φ)/ψ` over a symmetric domain doubled until the
    /// newest shell adds less than `tolerance` relative.
    pub fn compute_c(&self) -> Result<f64, WeightError> {
        const START: f64 = 8.0;
        const MAX_RADIUS: f64 = 8192.0;
        let g = |x: f64| self.integrand(TailIntegrand::Product, x);
        let piece = |a: f64, b: f64| quadrature::gauss_kronrod(g, a, b, 1e-15, 1e-12, 2000);

        let mut radius = START;
        let mut total = match piece(-radius, radius) {
            Ok(v) => v,
            Err(QuadratureError::NonFiniteSample { .. }) => {
                return Err(WeightError::DivergenceDetected {
                    radius,
                    partial: f64::INFINITY,
                })
            }
            Err(e) => return Err(e.into()),
        };
        while radius < MAX_RADIUS {
            let next = 2.0 * radius;
            let shell = match (piece(-next, -radius), piece(radius, next)) {
                (Ok(a), Ok(b)) => a + b,
                (Err(QuadratureError::NonFiniteSample { .. }), _)
                | (_, Err(QuadratureError::NonFiniteSample { .. })) => {
                    return Err(WeightError::DivergenceDetected {
                        radius: next,
                        partial: f64::INFINITY,
                    })
                }
                (Err(e), _) | (_, Err(e)) => return Err(e.into()),
            };
            total += shell;
            radius = next;
            if shell <= self.tolerance * total {
                return Ok(total);
            }
        }
        Err(WeightError::DivergenceDetected {
            radius,
            partial: total,
        })
    }

    /// `∫ ρ` by quadrature; used to validate the density.
    pub fn density_mass(&self) -> Result<f64, WeightError> {
        Ok(quadrature::gauss_kronrod_lower(|x| self.density(x), 0.0, 1e-14, 1e-14, 500)?
            + quadrature::gauss_kronrod_upper(|x| self.density(x), 0.0, 1e-14, 1e-14, 500)?)
    }

    /// Quadrature rule for `∫ g ρ` over the real line.
    ///
    /// Gaussian `ρ` gets an `n`-point Gauss–Hermite rule; logistic `ρ` a
    /// composite Gauss–Legendre rule on `[-40, 40]` with `max(n/4, 6)` nodes
    /// per unit-2 panel.
    pub fn rho_rule(&self, n: usize) -> Rule {
        match self.rho {
            RhoFamily::GaussianStd => Rule::standard_normal(n),
            RhoFamily::Logistic => {
                Rule::composite_legendre(-TRUNCATION, TRUNCATION, 40, (n / 4).max(6))
                    .with_weight_fn(|x| self.density(x))
            }
        }
    }

    /// Quadrature rule for `∫ g ψ` over the real line.
    ///
    /// For constant `ψ` the integrand must decay on its own; the rule is a
    /// composite Gauss–Legendre rule on `[-40, 40]` as for logistic `ρ`.
    pub fn psi_rule(&self, n: usize) -> Rule {
        match self.psi {
            PsiFamily::GaussianDecay { alpha } => Rule::gaussian_weight(n, alpha),
            PsiFamily::ExpDecay { alpha } => Rule::two_sided_exponential(n, alpha),
            PsiFamily::Constant { c } => {
                Rule::composite_legendre(-TRUNCATION, TRUNCATION, 40, (n / 4).max(6)).scale_weights(c)
            }
        }
    }
}

fn growth_of(partials: impl Iterator<Item = f64>) -> Growth {
    let values: Vec<f64> = partials.collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Growth::Diverges;
    }
    let n = values.len();
    let (prev, last) = (values[n - 2], values[n - 1]);
    if last > GROWTH_RATIO * prev {
        Growth::Diverges
    } else if (last - prev).abs() <= CONVERGED_INCREMENT * last.abs() {
        Growth::Converges
    } else {
        Growth::Unclear
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl fmt::Display for RhoFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhoFamily::GaussianStd => write!(f, "gaussian"),
            RhoFamily::Logistic => write!(f, "logistic"),
        }
    }
}

impl fmt::Display for PsiFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsiFamily::GaussianDecay { alpha } => write!(f, "gaussian_decay:alpha={alpha}"),
            PsiFamily::ExpDecay { alpha } => write!(f, "exp_decay:alpha={alpha}"),
            PsiFamily::Constant { c } => write!(f, "constant:c={c}"),
        }
    }
}

impl FromStr for RhoFamily {
    type Err = WeightError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "gaussian" | "gaussian_std" | "normal" => Ok(RhoFamily::GaussianStd),
            "logistic" => Ok(RhoFamily::Logistic),
            other => Err(WeightError::InvalidParameter(format!("unknown rho family `{other}`"))),
        }
    }
}

impl FromStr for PsiFamily {
    type Err = WeightError;

    /// `gaussian_decay:alpha=4`, `exp_decay:alpha=0.5`, `constant:c=1` or `constant`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let value = |key: &str| -> Result<Option<f64>, WeightError> {
            if args.is_empty() {
                return Ok(None);
            }
            let (k, v) = args
                .split_once('=')
                .ok_or_else(|| WeightError::InvalidParameter(format!("expected key=value in `{s}`")))?;
            if k.trim() != key {
                return Err(WeightError::InvalidParameter(format!(
                    "`{name}` takes `{key}`, got `{}`",
                    k.trim()
                )));
            }
            v.trim()
                .parse::<f64>()
                .map(Some)
                .map_err(|_| WeightError::InvalidParameter(format!("bad number in `{s}`")))
        };
        let required = |key: &str| {
            value(key)?.ok_or_else(|| WeightError::InvalidParameter(format!("`{name}` needs `{key}=`")))
        };
        match name {
            "gaussian_decay" => Ok(PsiFamily::GaussianDecay { alpha: required("alpha")? }),
            "exp_decay" => Ok(PsiFamily::ExpDecay { alpha: required("alpha")? }),
            "constant" => Ok(PsiFamily::Constant { c: value("c")?.unwrap_or(1.0) }),
            other => Err(WeightError::InvalidParameter(format!("unknown psi family `{other}`"))),
        }
    }
}
