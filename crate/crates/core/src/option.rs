//! Arithmetic and geometric average Asian call options under Black–Scholes,
//! written as `f(x) = max(φ(x), 0)` with `x` standard normal in `ℝ^d`.
//!
//! With grid times `t_ℓ = ℓT/d` and a factorization `A Aᵀ = Σ`,
//! `Σ_ij = min(t_i, t_j)`, the path is `S_ℓ = S0 exp((r - σ²/2) t_ℓ + σ (A x)_ℓ)`
//! and `φ(x) = mean_ℓ S_ℓ - K` (arithmetic or geometric mean).

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::lattice::{self, GeneratingVector, LatticeError};
use crate::linalg::{self, LinalgError, Matrix};
use crate::normal;
use crate::preint::{self, KinkIntegrand, MonotoneCertificate, PreintError, PreintegratedFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptionError {
    #[error("invalid option spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("factorization does not reproduce the covariance (max deviation {0:e})")]
    FactorizationMismatch(f64),
    #[error(transparent)]
    Preint(#[from] PreintError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    Arithmetic,
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factorization {
    Standard,
    BrownianBridge,
    Pca,
}

impl FromStr for Averaging {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "arith" | "arithmetic" => Ok(Self::Arithmetic),
            "geom" | "geometric" => Ok(Self::Geometric),
            _ => Err(format!("unknown averaging `{s}` (expected arith or geom)")),
        }
    }
}

impl fmt::Display for Averaging {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Arithmetic => "arith",
            Self::Geometric => "geom",
        })
    }
}

impl FromStr for Factorization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "std" | "standard" | "cholesky" => Ok(Self::Standard),
            "bb" | "bridge" => Ok(Self::BrownianBridge),
            "pca" => Ok(Self::Pca),
            _ => Err(format!("unknown factorization `{s}` (expected std, bb or pca)")),
        }
    }
}

impl fmt::Display for Factorization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Standard => "std",
            Self::BrownianBridge => "bb",
            Self::Pca => "pca",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsianOptionSpec {
    pub s0: f64,
    pub strike: f64,
    pub r: f64,
    pub sigma: f64,
    pub t_final: f64,
    pub d: usize,
    pub averaging: Averaging,
    pub factorization: Factorization,
}

impl Default for AsianOptionSpec {
    /// `S0 = K = 100`, `r = 0.05`, `σ = 0.2`, `T = 1`, eight monitoring
    /// dates, arithmetic averaging, Brownian bridge.
    fn default() -> Self {
        Self {
            s0: 100.0,
            strike: 100.0,
            r: 0.05,
            sigma: 0.2,
            t_final: 1.0,
            d: 8,
            averaging: Averaging::Arithmetic,
            factorization: Factorization::BrownianBridge,
        }
    }
}

impl AsianOptionSpec {
    /// Checks `s0, sigma, t_final > 0`, `strike ≥ 0` and `d ≥ 1`. A zero
    /// strike is allowed for the forward-average identity.
    pub fn validate(&self) -> Result<(), OptionError> {
        let positive = [("s0", self.s0), ("sigma", self.sigma), ("t_final", self.t_final)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(OptionError::InvalidSpec(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.strike >= 0.0 && self.strike.is_finite()) {
            return Err(OptionError::InvalidSpec(format!("strike must be non-negative, got {}", self.strike)));
        }
        if !self.r.is_finite() {
            return Err(OptionError::InvalidSpec("r must be finite".into()));
        }
        if self.d == 0 {
            return Err(OptionError::InvalidSpec("d must be at least 1".into()));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        (1..=self.d).map(|l| l as f64 * self.t_final / self.d as f64).collect()
    }

    pub fn discount(&self) -> f64 {
        (-self.r * self.t_final).exp()
    }
}

/// `Σ_ij = min(t_i, t_j)`.
pub fn covariance(spec: &AsianOptionSpec) -> Matrix {
    let t = spec.times();
    t.iter().map(|&ti| t.iter().map(|&tj| ti.min(tj)).collect()).collect()
}

/// Brownian bridge construction: input 1 sets `W_T`, later inputs fill
/// midpoints of the largest remaining gaps, left to right. For `d` not a
/// power of two the midpoint of an even gap rounds towards the left.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeOrder {
    /// Grid index (0-based) set by each input.
    pub bridge_index: Vec<usize>,
    pub left_index: Vec<usize>,
    pub right_index: Vec<usize>,
    pub left_weight: Vec<f64>,
    pub right_weight: Vec<f64>,
    pub std_dev: Vec<f64>,
}

impl BridgeOrder {
    pub fn new(times: &[f64]) -> Self {
        let d = times.len();
        let mut map = vec![0usize; d];
        let mut o = BridgeOrder {
            bridge_index: vec![0; d],
            left_index: vec![0; d],
            right_index: vec![0; d],
            left_weight: vec![0.0; d],
            right_weight: vec![0.0; d],
            std_dev: vec![0.0; d],
        };
        if d == 0 {
            return o;
        }
        map[d - 1] = 1;
        o.bridge_index[0] = d - 1;
        o.std_dev[0] = times[d - 1].sqrt();
        let mut j = 0;
        for i in 1..d {
            while map[j] != 0 {
                j += 1;
            }
            let mut k = j;
            while map[k] == 0 {
                k += 1;
            }
            let l = j + ((k - 1 - j) >> 1);
            map[l] = i + 1;
            o.bridge_index[i] = l;
            o.left_index[i] = j;
            o.right_index[i] = k;
            let t_left = if j == 0 { 0.0 } else { times[j - 1] };
            let span = times[k] - t_left;
            o.left_weight[i] = (times[k] - times[l]) / span;
            o.right_weight[i] = (times[l] - t_left) / span;
            o.std_dev[i] = ((times[l] - t_left) * (times[k] - times[l]) / span).sqrt();
            j = k + 1;
            if j >= d {
                j = 0;
            }
        }
        o
    }

    /// Brownian path at the grid times from standard normal inputs.
    pub fn transform(&self, z: &[f64]) -> Vec<f64> {
        let d = z.len();
        let mut w = vec![0.0; d];
        if d == 0 {
            return w;
        }
        w[d - 1] = self.std_dev[0] * z[0];
        for i in 1..d {
            let (j, k, l) = (self.left_index[i], self.right_index[i], self.bridge_index[i]);
            let left = if j == 0 { 0.0 } else { self.left_weight[i] * w[j - 1] };
            w[l] = left + self.right_weight[i] * w[k] + self.std_dev[i] * z[i];
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathFactorization {
    pub method: Factorization,
    pub a_matrix: Matrix,
    /// PCA only: eigenvalues of `Σ` in descending order.
    pub eigenvalues: Option<Vec<f64>>,
}

pub const FACTORIZATION_TOL: f64 = 1e-10;

pub fn factorize(spec: &AsianOptionSpec) -> Result<PathFactorization, OptionError> {
    spec.validate()?;
    let sigma = covariance(spec);
    let d = spec.d;
    let (a, eigenvalues) = match spec.factorization {
        Factorization::Standard => (linalg::cholesky(&sigma)?, None),
        Factorization::BrownianBridge => {
            let order = BridgeOrder::new(&spec.times());
            let mut a = linalg::zeros(d);
            for c in 0..d {
                let mut e = vec![0.0; d];
                e[c] = 1.0;
                for (row, w) in a.iter_mut().zip(order.transform(&e)) {
                    row[c] = w;
                }
            }
            (a, None)
        }
        Factorization::Pca => {
            let (values, mut vectors) = linalg::symmetric_eigen(&sigma)?;
            for c in 0..d {
                let sum: f64 = vectors.iter().map(|row| row[c]).sum();
                let sign = if sum < 0.0 { -1.0 } else { 1.0 };
                let scale = sign * values[c].max(0.0).sqrt();
                for row in vectors.iter_mut() {
                    row[c] *= scale;
                }
            }
            (vectors, Some(values))
        }
    };
    let dev = linalg::max_abs_diff(&linalg::outer_self(&a), &sigma);
    if dev > FACTORIZATION_TOL {
        return Err(OptionError::FactorizationMismatch(dev));
    }
    Ok(PathFactorization { method: spec.factorization, a_matrix: a, eigenvalues })
}

/// Largest exponent passed to `exp`; keeps `φ` finite far in the tails.
const MAX_EXPONENT: f64 = 700.0;

/// `φ` for a spec and factorization, with `x ↦ max(φ(x), 0)` as the payoff.
#[derive(Debug, Clone)]
pub struct AsianPayoff {
    pub spec: AsianOptionSpec,
    pub factorization: PathFactorization,
    /// `ln S0 + (r - σ²/2) t_ℓ`
    log_drift: Vec<f64>,
    certificate: MonotoneCertificate,
}

impl AsianPayoff {
    pub fn new(spec: &AsianOptionSpec) -> Result<Self, OptionError> {
        let factorization = factorize(spec)?;
        let log_drift = spec
            .times()
            .iter()
            .map(|t| spec.s0.ln() + (spec.r - 0.5 * spec.sigma * spec.sigma) * t)
            .collect();
        // ∂φ/∂x₁ = (σ/d) Σ A_ℓ1 S_ℓ (arithmetic) is positive when the first
        // column is non-negative and not all zero; otherwise probe.
        let col1: Vec<f64> = factorization.a_matrix.iter().map(|row| row[0]).collect();
        let certificate = if col1.iter().all(|&a| a >= 0.0) && col1.iter().any(|&a| a > 0.0) {
            MonotoneCertificate::Asserted
        } else {
            MonotoneCertificate::Probed(preint::DEFAULT_PROBES)
        };
        Ok(Self { spec: *spec, factorization, log_drift, certificate })
    }

    pub fn first_column(&self) -> Vec<f64> {
        self.factorization.a_matrix.iter().map(|row| row[0]).collect()
    }

    /// Log path values `ln S_ℓ`.
    fn log_path(&self, x: &[f64]) -> impl Iterator<Item = f64> + '_ {
        let sigma = self.spec.sigma;
        let a = &self.factorization.a_matrix;
        let x = x.to_vec();
        self.log_drift
            .iter()
            .zip(a)
            .map(move |(m, row)| m + sigma * row.iter().zip(&x).map(|(a, x)| a * x).sum::<f64>())
    }

    pub fn phi_value(&self, x: &[f64]) -> f64 {
        let d = self.spec.d as f64;
        match self.spec.averaging {
            Averaging::Arithmetic => self.log_path(x).map(|e| e.min(MAX_EXPONENT).exp()).sum::<f64>() / d - self.spec.strike,
            Averaging::Geometric => (self.log_path(x).sum::<f64>() / d).min(MAX_EXPONENT).exp() - self.spec.strike,
        }
    }

    pub fn payoff(&self, x: &[f64]) -> f64 {
        self.phi_value(x).max(0.0)
    }

    /// `(φ, ∂φ/∂x₁)` as functions of `x₁` given the exponent offsets
    /// `b_ℓ = ln S_ℓ` at `x₁ = 0`.
    fn line_from_offsets(&self, b: Vec<f64>) -> impl Fn(f64) -> (f64, f64) + '_ {
        let sigma = self.spec.sigma;
        let strike = self.spec.strike;
        let d = self.spec.d as f64;
        let slope: Vec<f64> = self.factorization.a_matrix.iter().map(|row| sigma * row[0]).collect();
        let geometric = self.spec.averaging == Averaging::Geometric;
        let b_mean = b.iter().sum::<f64>() / d;
        let slope_mean = slope.iter().sum::<f64>() / d;
        move |x1| {
            if geometric {
                let g = (b_mean + slope_mean * x1).min(MAX_EXPONENT).exp();
                (g - strike, g * slope_mean)
            } else {
                let mut value = 0.0;
                let mut deriv = 0.0;
                for (bl, sl) in b.iter().zip(&slope) {
                    let s = (bl + sl * x1).min(MAX_EXPONENT).exp();
                    value += s;
                    deriv += sl * s;
                }
                (value / d - strike, deriv / d)
            }
        }
    }
}

impl KinkIntegrand for AsianPayoff {
    fn dim(&self) -> usize {
        self.spec.d
    }

    fn phi(&self, x: &[f64]) -> f64 {
        self.phi_value(x)
    }

    fn dphi_dx1(&self, x: &[f64]) -> f64 {
        let mut x0 = x.to_vec();
        let x1 = x0[0];
        x0[0] = 0.0;
        let b = self.log_path(&x0).collect();
        (self.line_from_offsets(b))(x1).1
    }

    fn certificate(&self) -> MonotoneCertificate {
        self.certificate
    }

    fn line<'a>(&'a self, x_rest: &[f64]) -> Box<dyn Fn(f64) -> (f64, f64) + 'a> {
        let mut x = Vec::with_capacity(x_rest.len() + 1);
        x.push(0.0);
        x.extend_from_slice(x_rest);
        let b = self.log_path(&x).collect();
        Box::new(self.line_from_offsets(b))
    }
}

/// Closed-form price of the geometric average Asian call: the geometric
/// mean is lognormal with
/// `μ = ln S0 + (r - σ²/2) T (d+1)/(2d)` and
/// `s² = σ² T (d+1)(2d+1)/(6d²)`.
pub fn geometric_closed_form(spec: &AsianOptionSpec) -> Result<f64, OptionError> {
    spec.validate()?;
    let d = spec.d as f64;
    let t = spec.t_final;
    let mu = spec.s0.ln() + (spec.r - 0.5 * spec.sigma.powi(2)) * t * (d + 1.0) / (2.0 * d);
    let s = (spec.sigma.powi(2) * t * (d + 1.0) * (2.0 * d + 1.0) / (6.0 * d * d)).sqrt();
    let forward = (mu + 0.5 * s * s).exp();
    if spec.strike == 0.0 {
        return Ok(spec.discount() * forward);
    }
    let d2 = (mu - spec.strike.ln()) / s;
    let d1 = d2 + s;
    Ok(spec.discount() * (forward * normal::cdf(d1) - spec.strike * normal::cdf(d2)))
}

/// `e^{-rT} (1/d) Σ_ℓ S0 e^{r t_ℓ}`: the arithmetic price at zero strike.
pub fn zero_strike_price(spec: &AsianOptionSpec) -> f64 {
    let d = spec.d as f64;
    spec.discount() * spec.times().iter().map(|t| spec.s0 * (spec.r * t).exp()).sum::<f64>() / d
}

/// How the generating vector of a lattice run is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorChoice {
    /// [`lattice::default_vector`]: the shipped vector, or a Korobov search
    /// where it does not apply.
    Default,
    /// [`lattice::korobov_search`] for the required `N` and dimension.
    Search,
    Korobov(u64),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleConfig {
    pub n: u64,
    pub m: usize,
    pub seed: u64,
    pub vector: VectorChoice,
    pub inner_order: usize,
    pub root_tol: f64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            n: 1 << 13,
            m: 16,
            seed: 0,
            vector: VectorChoice::Default,
            inner_order: preint::DEFAULT_INNER_ORDER,
            root_tol: preint::DEFAULT_ROOT_TOL,
        }
    }
}

impl RuleConfig {
    pub fn generating_vector(&self, dim: usize) -> Result<GeneratingVector, LatticeError> {
        match &self.vector {
            VectorChoice::Default => lattice::default_vector(self.n, dim),
            VectorChoice::Search => lattice::korobov_search(self.n, dim),
            VectorChoice::Korobov(a) => lattice::korobov_vector(*a, self.n, dim),
            VectorChoice::File(path) => {
                // an embedded vector serves every N dividing its own
                lattice::load_vector(path)?.truncate(dim)?.reduce_to(self.n)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceReport {
    pub price: f64,
    pub rms_error: f64,
    pub n: u64,
    pub m: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PricingMethod {
    /// Plain Monte Carlo on the payoff in `d` dimensions.
    Mc,
    /// Shifted lattice on the payoff in `d` dimensions.
    Qmc,
    /// Shifted lattice on the preintegrated payoff in `d - 1` dimensions.
    QmcPreint,
}

impl FromStr for PricingMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mc" => Ok(Self::Mc),
            "qmc" => Ok(Self::Qmc),
            "qmc-preint" => Ok(Self::QmcPreint),
            _ => Err(format!("unknown method `{s}` (expected mc, qmc or qmc-preint)")),
        }
    }
}

impl fmt::Display for PricingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mc => "mc",
            Self::Qmc => "qmc",
            Self::QmcPreint => "qmc-preint",
        })
    }
}

pub fn price(spec: &AsianOptionSpec, method: PricingMethod, cfg: &RuleConfig) -> Result<PriceReport, OptionError> {
    let payoff = AsianPayoff::new(spec)?;
    let run = match method {
        PricingMethod::Mc => lattice::mc_estimate(|x| payoff.payoff(x), spec.d, cfg.n, cfg.m, cfg.seed)?,
        PricingMethod::Qmc => {
            let v = cfg.generating_vector(spec.d)?;
            lattice::qmc_estimate(|x| payoff.payoff(x), &v, cfg.m, cfg.seed)?
        }
        PricingMethod::QmcPreint => {
            let pf = PreintegratedFunction::new(&payoff)
                .with_inner_order(cfg.inner_order)
                .with_root_tol(cfg.root_tol);
            let v = if spec.d > 1 {
                cfg.generating_vector(spec.d - 1)?
            } else {
                // unused: nothing is left to sample
                GeneratingVector::new(Vec::new(), cfg.n.max(1), lattice::VectorSource::Given)?
            };
            preint::qmc_preintegrated(&pf, &v, cfg.m, cfg.seed)?
        }
    };
    let disc = spec.discount();
    Ok(PriceReport { price: disc * run.mean, rms_error: disc * run.rms_error, n: cfg.n, m: run.m })
}

pub fn price_qmc_preint(spec: &AsianOptionSpec, cfg: &RuleConfig) -> Result<PriceReport, OptionError> {
    price(spec, PricingMethod::QmcPreint, cfg)
}

pub const REFERENCE_N: u64 = 1 << 16;
pub const REFERENCE_M: usize = 32;
pub const REFERENCE_SEED: u64 = 271_828;

pub fn reference_config() -> RuleConfig {
    RuleConfig { n: REFERENCE_N, m: REFERENCE_M, seed: REFERENCE_SEED, ..RuleConfig::default() }
}

/// Stored high-effort arithmetic prices, one CSV row per spec.
const REFERENCE_FIXTURE: &str = include_str!("../data/reference_prices.csv");

fn spec_key(spec: &AsianOptionSpec) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        spec.s0, spec.strike, spec.r, spec.sigma, spec.t_final, spec.d, spec.averaging, spec.factorization
    )
}

/// Fixture row for `spec`, if one was stored.
pub fn stored_reference(spec: &AsianOptionSpec) -> Option<PriceReport> {
    let key = spec_key(spec);
    REFERENCE_FIXTURE
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("s0"))
        .find_map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 12 || fields[..8].join(",") != key {
                return None;
            }
            Some(PriceReport {
                price: fields[8].parse().ok()?,
                rms_error: fields[9].parse().ok()?,
                n: fields[10].parse().ok()?,
                m: fields[11].parse().ok()?,
            })
        })
}

/// One fixture row for [`stored_reference`].
pub fn reference_row(spec: &AsianOptionSpec, report: &PriceReport) -> String {
    format!("{},{:.15e},{:.6e},{},{}", spec_key(spec), report.price, report.rms_error, report.n, report.m)
}

pub const REFERENCE_HEADER: &str = "s0,strike,r,sigma,t_final,d,avg,fact,price,rms_error,n,m";

/// Geometric: the closed form with zero error. Arithmetic: the stored
/// fixture when present, otherwise a fresh high-effort run
/// (`N = 2^16`, `m = 32`, fixed seed).
pub fn price_reference(spec: &AsianOptionSpec) -> Result<PriceReport, OptionError> {
    match spec.averaging {
        Averaging::Geometric => Ok(PriceReport { price: geometric_closed_form(spec)?, rms_error: 0.0, n: 0, m: 0 }),
        Averaging::Arithmetic => match stored_reference(spec) {
            Some(r) => Ok(r),
            None => price_qmc_preint(spec, &reference_config()),
        },
    }
}
