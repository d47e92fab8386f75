//! The one-dimensional kernels `η` and the `d`-dimensional reproducing
//! kernel `K_d = Σ_u γ_u ∏_{j∈u} η_j`, plus the norm-equivalence constants.
//!
//! For a pair `(ρ, ψ)` satisfying the weak condition,
//!
//! ```text
//! η(x, y) = A(min) + B(max) - M(min, max)
//! A(x) = ∫_{-∞}^x Φ²/ψ,  B(x) = ∫_x^∞ (1-Φ)²/ψ,  M(a, b) = ∫_a^b Φ(1-Φ)/ψ.
//! ```
//!
//! The antiderivatives are tabulated at the nodes of a uniform grid. A value
//! off the grid is the nearest node value plus an 8-point Gauss–Legendre
//! integral over at most half a cell, which keeps full relative accuracy
//! even where `1/ψ` grows like `e^{x²}`.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::quadrature::{self, Rule};
use crate::subset::{Subset, MAX_SUBSET_DIM};
use crate::weights::{RhoFamily, TailIntegrand, WeightError, WeightPair};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("coordinate {coordinate} violates the {condition} condition")]
    ConditionViolated { coordinate: usize, condition: &'static str },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("∂η(x, y)/∂x is undefined at the kink x = y = {0}")]
    AtKink(f64),
    #[error("no weight given for subset {0}")]
    MissingWeight(Subset),
    #[error("weights must be positive and finite: {0}")]
    InvalidWeight(String),
    #[error("explicit weights need d <= {MAX_SUBSET_DIM}, got {0}")]
    DimensionTooLarge(usize),
    #[error("∫η(y,y)ρ(y)dy: tail did not settle before |y| = {0}")]
    DiagonalTail(f64),
    #[error(transparent)]
    Weight(#[from] WeightError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightRepr {
    /// `γ_u = ∏_{j∈u} γ_j`.
    Product(Vec<f64>),
    /// One value per subset; `∅` falls back to `gamma_empty`.
    Explicit(BTreeMap<Subset, f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightParams {
    pub d: usize,
    pub repr: WeightRepr,
    pub gamma_empty: f64,
}

impl WeightParams {
    pub fn product(gammas: Vec<f64>) -> Result<Self, KernelError> {
        if let Some(g) = gammas.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(KernelError::InvalidWeight(format!("γ_j = {g}")));
        }
        Ok(Self {
            d: gammas.len(),
            repr: WeightRepr::Product(gammas),
            gamma_empty: 1.0,
        })
    }

    pub fn explicit(d: usize, map: BTreeMap<Subset, f64>) -> Result<Self, KernelError> {
        if d > MAX_SUBSET_DIM {
            return Err(KernelError::DimensionTooLarge(d));
        }
        for (u, g) in &map {
            if !u.is_subset_of(Subset::full(d)) {
                return Err(KernelError::InvalidWeight(format!("subset {u} outside dimension {d}")));
            }
            if !(g.is_finite() && *g > 0.0) {
                return Err(KernelError::InvalidWeight(format!("γ_{u} = {g}")));
            }
        }
        let gamma_empty = map.get(&Subset::EMPTY).copied().unwrap_or(1.0);
        Ok(Self {
            d,
            repr: WeightRepr::Explicit(map),
            gamma_empty,
        })
    }

    /// The same weights written out subset by subset.
    pub fn to_explicit(&self) -> Result<Self, KernelError> {
        if self.d > MAX_SUBSET_DIM {
            return Err(KernelError::DimensionTooLarge(self.d));
        }
        let map = Subset::all(self.d)
            .map(|u| self.gamma(u).map(|g| (u, g)))
            .collect::<Result<_, _>>()?;
        Self::explicit(self.d, map)
    }

    pub fn gamma(&self, u: Subset) -> Result<f64, KernelError> {
        if u.is_empty() {
            return Ok(self.gamma_empty);
        }
        match &self.repr {
            WeightRepr::Product(g) => Ok(u.indices().map(|j| g[j]).product()),
            WeightRepr::Explicit(map) => map.get(&u).copied().ok_or(KernelError::MissingWeight(u)),
        }
    }
}

/// Tabulated antiderivatives of the tail integrands for one weight pair.
#[derive(Debug)]
pub struct Antiderivatives {
    pair: WeightPair,
    lo: f64,
    h: f64,
    gl: Arc<Rule>,
    /// `A` at the grid nodes.
    weak_left: Vec<f64>,
    /// `B` at the grid nodes.
    weak_right: Vec<f64>,
    /// `G(x) = ∫_0^x Φ(1-Φ)/ψ` at the grid nodes.
    product: Vec<f64>,
    strong: Option<StrongTables>,
}

#[derive(Debug)]
struct StrongTables {
    left: Vec<f64>,
    right: Vec<f64>,
    c: f64,
}

#[derive(Debug, Clone, Copy)]
enum Anchor {
    /// Accumulated from `-∞`.
    Lower,
    /// Accumulated from `+∞`, so the value decreases in `x`.
    Upper,
    /// Accumulated from zero.
    Origin,
}

const CELLS_PER_UNIT: usize = 16;
/// Farthest point the diagonal integral's tail panels may reach.
pub const DIAGONAL_TAIL_CAP: f64 = 2000.0;
const CELL_NODES: usize = 16;

impl Antiderivatives {
    /// Build the weak tables, and the strong ones when `c` is given.
    pub fn new(pair: WeightPair, c: Option<f64>) -> Self {
        let half_width = match pair.rho {
            RhoFamily::GaussianStd => 12.0,
            RhoFamily::Logistic => 40.0,
        };
        let cells = (2.0 * half_width) as usize * CELLS_PER_UNIT;
        let mut table = Self {
            pair,
            lo: -half_width,
            h: 1.0 / CELLS_PER_UNIT as f64,
            gl: Rule::gauss_legendre(8),
            weak_left: Vec::new(),
            weak_right: Vec::new(),
            product: Vec::new(),
            strong: None,
        };
        table.weak_left = table.accumulate(TailIntegrand::WeakLeft, Anchor::Lower, cells);
        table.weak_right = table.accumulate(TailIntegrand::WeakRight, Anchor::Upper, cells);
        table.product = table.accumulate(TailIntegrand::Product, Anchor::Origin, cells);
        table.strong = c.map(|c| StrongTables {
            left: table.accumulate(TailIntegrand::StrongLeft, Anchor::Lower, cells),
            right: table.accumulate(TailIntegrand::StrongRight, Anchor::Upper, cells),
            c,
        });
        table
    }

    pub fn pair(&self) -> &WeightPair {
        &self.pair
    }

    /// Half-width of the tabulated range; integrals against `ρ` or `ψ` are
    /// truncated here.
    pub fn span(&self) -> f64 {
        -self.lo
    }

    /// Rule on `[-span, span]` with a panel break at `y`.
    pub fn split_rule(&self, y: f64) -> Rule {
        Rule::split_composite(self.lo, -self.lo, y, 1.0, 16)
    }

    fn hi(&self) -> f64 {
        self.lo + self.h * (self.weak_left.len() - 1) as f64
    }

    fn node(&self, k: usize) -> f64 {
        self.lo + self.h * k as f64
    }

    fn f(&self, kind: TailIntegrand, x: f64) -> f64 {
        self.pair.integrand(kind, x)
    }

    fn accumulate(&self, kind: TailIntegrand, anchor: Anchor, cells: usize) -> Vec<f64> {
        let cell_rule = Rule::gauss_legendre(CELL_NODES);
        let cell = |k: usize| {
            let (a, b) = (self.node(k), self.node(k + 1));
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            half * cell_rule.integrate(|t| self.f(kind, mid + half * t))
        };
        let mut v = vec![0.0; cells + 1];
        match anchor {
            Anchor::Lower => {
                v[0] = self.tail_lower(kind, self.lo);
                for k in 0..cells {
                    v[k + 1] = v[k] + cell(k);
                }
            }
            Anchor::Upper => {
                v[cells] = self.tail_upper(kind, self.node(cells));
                for k in (0..cells).rev() {
                    v[k] = v[k + 1] + cell(k);
                }
            }
            Anchor::Origin => {
                let zero = cells / 2;
                for k in zero..cells {
                    v[k + 1] = v[k] + cell(k);
                }
                for k in (0..zero).rev() {
                    v[k] = v[k + 1] - cell(k);
                }
            }
        }
        v
    }

    /// `∫_a^b f` by 8-point Gauss–Legendre; `a > b` gives a negative value.
    fn piece(&self, kind: TailIntegrand, a: f64, b: f64) -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        half * self.gl.integrate(|t| self.f(kind, mid + half * t))
    }

    fn adaptive(&self, kind: TailIntegrand, a: f64, b: f64) -> f64 {
        quadrature::gauss_kronrod(|x| self.f(kind, x), a, b, 0.0, 1e-13, 4000).unwrap_or(f64::NAN)
    }

    fn tail_lower(&self, kind: TailIntegrand, x: f64) -> f64 {
        quadrature::gauss_kronrod_lower(|t| self.f(kind, t), x, 0.0, 1e-13, 4000).unwrap_or(f64::NAN)
    }

    fn tail_upper(&self, kind: TailIntegrand, x: f64) -> f64 {
        quadrature::gauss_kronrod_upper(|t| self.f(kind, t), x, 0.0, 1e-13, 4000).unwrap_or(f64::NAN)
    }

    fn eval(&self, table: &[f64], kind: TailIntegrand, anchor: Anchor, x: f64) -> f64 {
        let (lo, hi) = (self.lo, self.hi());
        let last = table.len() - 1;
        if x < lo {
            return match anchor {
                Anchor::Lower => self.tail_lower(kind, x),
                Anchor::Upper => table[0] + self.adaptive(kind, x, lo),
                Anchor::Origin => table[0] - self.adaptive(kind, x, lo),
            };
        }
        if x > hi {
            return match anchor {
                Anchor::Lower | Anchor::Origin => table[last] + self.adaptive(kind, hi, x),
                Anchor::Upper => self.tail_upper(kind, x),
            };
        }
        let k = (((x - lo) / self.h).round() as usize).min(last);
        let xk = self.node(k);
        if x == xk {
            return table[k];
        }
        let step = self.piece(kind, xk, x);
        match anchor {
            Anchor::Lower | Anchor::Origin => table[k] + step,
            Anchor::Upper => table[k] - step,
        }
    }

    /// `A(x) = ∫_{-∞}^x Φ²/ψ`
    pub fn weak_left(&self, x: f64) -> f64 {
        self.eval(&self.weak_left, TailIntegrand::WeakLeft, Anchor::Lower, x)
    }

    /// `B(x) = ∫_x^∞ (1-Φ)²/ψ`
    pub fn weak_right(&self, x: f64) -> f64 {
        self.eval(&self.weak_right, TailIntegrand::WeakRight, Anchor::Upper, x)
    }

    /// `∫_a^b Φ(1-Φ)/ψ`
    pub fn product_between(&self, a: f64, b: f64) -> f64 {
        let g = |x| self.eval(&self.product, TailIntegrand::Product, Anchor::Origin, x);
        if (b - a).abs() <= self.h {
            // short spans: integrate directly instead of differencing
            return self.piece(TailIntegrand::Product, a, b);
        }
        g(b) - g(a)
    }

    /// `Ã(x) = ∫_{-∞}^x Φ/ψ`, available under the strong condition.
    pub fn strong_left(&self, x: f64) -> Option<f64> {
        let s = self.strong.as_ref()?;
        Some(self.eval(&s.left, TailIntegrand::StrongLeft, Anchor::Lower, x))
    }

    /// `B̃(x) = ∫_x^∞ (1-Φ)/ψ`, available under the strong condition.
    pub fn strong_right(&self, x: f64) -> Option<f64> {
        let s = self.strong.as_ref()?;
        Some(self.eval(&s.right, TailIntegrand::StrongRight, Anchor::Upper, x))
    }

    pub fn c_constant(&self) -> Option<f64> {
        self.strong.as_ref().map(|s| s.c)
    }

    pub fn eta(&self, x: f64, y: f64) -> f64 {
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        self.weak_left(a) + self.weak_right(b) - self.product_between(a, b)
    }

    /// Every available algebraic form of `η(x, y)`.
    ///
    /// The max- and min-anchored forms integrate `Φ/ψ` and `(1-Φ)/ψ`
    /// between the points by adaptive quadrature, independently of the
    /// `Φ(1-Φ)/ψ` table.
    pub fn eta_forms(&self, x: f64, y: f64) -> EtaForms {
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        let between = |kind| {
            if a == b {
                0.0
            } else {
                self.adaptive(kind, a, b)
            }
        };
        EtaForms {
            standard: self.eta(x, y),
            max_anchored: self.weak_left(b) + self.weak_right(b) - between(TailIntegrand::StrongLeft),
            min_anchored: self.weak_left(a) + self.weak_right(a) - between(TailIntegrand::StrongRight),
            strong: self
                .strong
                .as_ref()
                .map(|s| self.eval(&s.left, TailIntegrand::StrongLeft, Anchor::Lower, a)
                    + self.eval(&s.right, TailIntegrand::StrongRight, Anchor::Upper, b)
                    - s.c),
        }
    }

    /// `∂η(x, y)/∂x` away from the kink.
    pub fn eta_dx(&self, x: f64, y: f64) -> Result<f64, KernelError> {
        if x < y {
            Ok(self.pair.cdf(x) / self.pair.psi(x))
        } else if x > y {
            Ok(-self.pair.ccdf(x) / self.pair.psi(x))
        } else {
            Err(KernelError::AtKink(x))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaForms {
    pub standard: f64,
    pub max_anchored: f64,
    pub min_anchored: f64,
    pub strong: Option<f64>,
}

/// Kernel tables for each coordinate together with the weights.
#[derive(Debug)]
pub struct KernelContext {
    pairs: Vec<WeightPair>,
    weights: WeightParams,
    strong: Vec<bool>,
    tables: Vec<Option<Arc<Antiderivatives>>>,
}

impl KernelContext {
    pub fn new(pairs: Vec<WeightPair>, weights: WeightParams) -> Result<Self, KernelError> {
        if pairs.len() != weights.d {
            return Err(KernelError::DimensionMismatch {
                expected: weights.d,
                got: pairs.len(),
            });
        }
        let mut strong = Vec::with_capacity(pairs.len());
        let mut tables: Vec<Option<Arc<Antiderivatives>>> = Vec::with_capacity(pairs.len());
        for (j, pair) in pairs.iter().enumerate() {
            if let Some(i) = pairs[..j].iter().position(|p| p == pair) {
                strong.push(strong[i]);
                tables.push(tables[i].clone());
                continue;
            }
            let report = pair.check_conditions()?;
            strong.push(report.strong_holds);
            tables.push(
                report
                    .weak_holds
                    .then(|| Arc::new(Antiderivatives::new(*pair, report.c_constant))),
            );
        }
        Ok(Self {
            pairs,
            weights,
            strong,
            tables,
        })
    }

    /// One coordinate, `K(x, y) = 1 + γ η(x, y)`.
    pub fn one_dim(pair: WeightPair, gamma: f64) -> Result<Self, KernelError> {
        Self::new(vec![pair], WeightParams::product(vec![gamma])?)
    }

    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[WeightPair] {
        &self.pairs
    }

    pub fn weights(&self) -> &WeightParams {
        &self.weights
    }

    pub fn table(&self, j: usize) -> Result<&Antiderivatives, KernelError> {
        self.tables
            .get(j)
            .ok_or(KernelError::DimensionMismatch {
                expected: self.dim(),
                got: j + 1,
            })?
            .as_deref()
            .ok_or(KernelError::ConditionViolated {
                coordinate: j,
                condition: "weak",
            })
    }

    pub fn eta(&self, j: usize, x: f64, y: f64) -> Result<f64, KernelError> {
        Ok(self.table(j)?.eta(x, y))
    }

    pub fn eta_dx(&self, j: usize, x: f64, y: f64) -> Result<f64, KernelError> {
        self.table(j)?.eta_dx(x, y)
    }

    /// `∫ η_j(x, y) ρ_j(x) dx`, integrated piecewise on either side of `y`.
    pub fn eta_rho_integral(&self, j: usize, y: f64) -> Result<f64, KernelError> {
        let t = self.table(j)?;
        Ok(t.split_rule(y).integrate(|x| t.eta(x, y) * t.pair().density(x)))
    }

    /// `∫ (∂η_j(x, y)/∂x)² ψ_j(x) dx`.
    pub fn eta_dx_energy(&self, j: usize, y: f64) -> Result<f64, KernelError> {
        let t = self.table(j)?;
        let rule = t.split_rule(y);
        let mut sum = 0.0;
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let d = t.eta_dx(x, y)?;
            sum += w * d * d * t.pair().psi(x);
        }
        Ok(sum)
    }

    /// `∫ η_j(y, y) ρ_j(y) dy`.
    pub fn diagonal_integral(&self, j: usize) -> Result<f64, KernelError> {
        let t = self.table(j)?;
        let span = t.span();
        let g = |y: f64| t.eta(y, y) * t.pair().density(y);
        let mut total = Rule::composite_legendre(-span, span, (2.0 * span) as usize, 16).integrate(g);
        // near the strong threshold η(y,y)ρ(y) decays slowly (e^{-0.045y²}
        // for α = 1.1), so panels continue outward until they stop mattering
        let gl = Rule::gauss_legendre(16);
        for sign in [-1.0, 1.0] {
            let (mut a, mut width) = (span, 1.0);
            loop {
                let (mid, half) = (a + 0.5 * width, 0.5 * width);
                let piece = half * gl.integrate(|u| g(sign * (mid + half * u)));
                if !piece.is_finite() || a > DIAGONAL_TAIL_CAP {
                    return Err(KernelError::DiagonalTail(sign * a));
                }
                total += piece;
                if piece.abs() <= 1e-16 * total.abs() {
                    break;
                }
                a += width;
                width = (2.0 * width).min(8.0);
            }
        }
        Ok(total)
    }

    /// `∫ K_d(x, y) ρ(x) dx` over the full tensor grid of split rules.
    pub fn kernel_rho_integral(&self, y: &[f64]) -> Result<f64, KernelError> {
        if y.len() != self.dim() {
            return Err(KernelError::DimensionMismatch {
                expected: self.dim(),
                got: y.len(),
            });
        }
        let rules: Vec<Rule> = (0..self.dim())
            .map(|j| {
                let t = self.table(j)?;
                Ok(t.split_rule(y[j]).with_weight_fn(|x| t.pair().density(x)))
            })
            .collect::<Result<_, KernelError>>()?;
        // η_j(x, y_j) depends on one coordinate: tabulate it per node
        let eta_at: Vec<Vec<f64>> = rules
            .iter()
            .enumerate()
            .map(|(j, r)| r.nodes.iter().map(|&x| self.eta(j, x, y[j])).collect())
            .collect::<Result<_, KernelError>>()?;
        let mut idx = vec![0usize; self.dim()];
        let mut etas = vec![0.0; self.dim()];
        let mut sum = 0.0;
        loop {
            let mut w = 1.0;
            for (j, r) in rules.iter().enumerate() {
                etas[j] = eta_at[j][idx[j]];
                w *= r.weights[idx[j]];
            }
            let k = match &self.weights.repr {
                WeightRepr::Product(g) => etas.iter().zip(g).map(|(e, g)| 1.0 + g * e).product(),
                WeightRepr::Explicit(_) => self.subset_sum(&etas)?,
            };
            sum += w * k;
            let mut j = 0;
            loop {
                if j == idx.len() {
                    return Ok(sum);
                }
                idx[j] += 1;
                if idx[j] < rules[j].len() {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
    }

    /// `C(ρ_j, ψ_j)` for every coordinate; fails unless all are strong.
    pub fn c_constants(&self) -> Result<Vec<f64>, KernelError> {
        (0..self.dim())
            .map(|j| {
                self.tables[j]
                    .as_ref()
                    .and_then(|t| t.c_constant())
                    .filter(|_| self.strong[j])
                    .ok_or(KernelError::ConditionViolated {
                        coordinate: j,
                        condition: "strong",
                    })
            })
            .collect()
    }

    fn etas(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>, KernelError> {
        for v in [x, y] {
            if v.len() != self.dim() {
                return Err(KernelError::DimensionMismatch {
                    expected: self.dim(),
                    got: v.len(),
                });
            }
        }
        (0..self.dim()).map(|j| self.eta(j, x[j], y[j])).collect()
    }

    pub fn kernel_d(&self, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
        let etas = self.etas(x, y)?;
        match &self.weights.repr {
            WeightRepr::Product(g) => Ok(etas.iter().zip(g).map(|(e, g)| 1.0 + g * e).product()),
            WeightRepr::Explicit(_) => self.subset_sum(&etas),
        }
    }

    /// `Σ_u γ_u ∏_{j∈u} η_j` written out over all `2^d` subsets.
    pub fn kernel_subset_sum(&self, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
        let etas = self.etas(x, y)?;
        self.subset_sum(&etas)
    }

    fn subset_sum(&self, etas: &[f64]) -> Result<f64, KernelError> {
        let d = etas.len();
        if d > MAX_SUBSET_DIM {
            return Err(KernelError::DimensionTooLarge(d));
        }
        Subset::all(d).try_fold(0.0, |acc, u| {
            Ok(acc + self.weights.gamma(u)? * u.indices().map(|j| etas[j]).product::<f64>())
        })
    }

    /// The norm-equivalence constant for this context's pairs and weights.
    pub fn embed_constant(&self) -> Result<f64, KernelError> {
        embed_constant_d(&self.weights, &self.c_constants()?)
    }
}

pub fn embed_constant_1d(gamma: f64, c: f64) -> f64 {
    1.0 + gamma * c
}

fn check_constants(weights: &WeightParams, c: &[f64]) -> Result<(), KernelError> {
    if c.len() != weights.d {
        return Err(KernelError::DimensionMismatch {
            expected: weights.d,
            got: c.len(),
        });
    }
    if let Some(j) = c.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(KernelError::ConditionViolated {
            coordinate: j,
            condition: "strong",
        });
    }
    Ok(())
}

/// `max_v Σ_{w⊆v} (γ_v / γ_{v∖w}) ∏_{j∈w} C_j`.
///
/// Product weights use `∏ (1 + γ_j C_j)`. Explicit weights use a subset
/// zeta transform: `F(v) = Σ_{s⊆v} γ_s^{-1} ∏_{j∈v∖s} C_j`, then
/// `max_v γ_v F(v)`, in `O(d 2^d)`.
pub fn embed_constant_d(weights: &WeightParams, c: &[f64]) -> Result<f64, KernelError> {
    check_constants(weights, c)?;
    match &weights.repr {
        WeightRepr::Product(g) => Ok(g.iter().zip(c).map(|(g, c)| 1.0 + g * c).product()),
        WeightRepr::Explicit(_) => {
            let d = weights.d;
            if d > MAX_SUBSET_DIM {
                return Err(KernelError::DimensionTooLarge(d));
            }
            let gammas: Vec<f64> = Subset::all(d).map(|u| weights.gamma(u)).collect::<Result<_, _>>()?;
            let mut f: Vec<f64> = gammas.iter().map(|g| 1.0 / g).collect();
            for (j, &cj) in c.iter().enumerate() {
                let bit = 1usize << j;
                for v in 0..f.len() {
                    if v & bit != 0 {
                        f[v] += cj * f[v ^ bit];
                    }
                }
            }
            Ok(gammas.iter().zip(&f).map(|(g, f)| g * f).fold(1.0, f64::max))
        }
    }
}

/// The same maximum by direct double enumeration over `v` and `w ⊆ v`.
pub fn embed_constant_exhaustive(weights: &WeightParams, c: &[f64]) -> Result<f64, KernelError> {
    check_constants(weights, c)?;
    if weights.d > MAX_SUBSET_DIM {
        return Err(KernelError::DimensionTooLarge(weights.d));
    }
    let mut best = f64::NEG_INFINITY;
    for v in Subset::all(weights.d) {
        let gv = weights.gamma(v)?;
        let mut sum = 0.0;
        for w in v.subsets() {
            sum += gv / weights.gamma(v.minus(w))? * w.indices().map(|j| c[j]).product::<f64>();
        }
        best = best.max(sum);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::PsiFamily;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use std::f64::consts::PI;

    fn gauss(alpha: f64) -> WeightPair {
        WeightPair::gaussian(alpha).unwrap()
    }

    fn table(pair: WeightPair) -> Antiderivatives {
        let c = pair.check_conditions().unwrap().c_constant;
        Antiderivatives::new(pair, c)
    }

    fn pairs() -> Vec<WeightPair> {
        vec![
            gauss(4.0),
            gauss(2.0 / 3.0),
            WeightPair::new(RhoFamily::GaussianStd, PsiFamily::Constant { c: 1.0 }).unwrap(),
            WeightPair::new(RhoFamily::Logistic, PsiFamily::Constant { c: 1.0 }).unwrap(),
            WeightPair::new(RhoFamily::Logistic, PsiFamily::ExpDecay { alpha: 0.5 }).unwrap(),
        ]
    }

    #[test]
    fn tables_match_direct_quadrature() {
        for pair in pairs() {
            let t = table(pair);
            for x in [-11.3, -4.0, -0.77, 0.0, 0.4, 3.21, 9.9, 14.0, -15.0] {
                let f = |kind| move |s: f64| pair.integrand(kind, s);
                let a = quadrature::gauss_kronrod_lower(f(TailIntegrand::WeakLeft), x, 0.0, 1e-13, 4000).unwrap();
                let b = quadrature::gauss_kronrod_upper(f(TailIntegrand::WeakRight), x, 0.0, 1e-13, 4000).unwrap();
                assert!((t.weak_left(x) - a).abs() <= 1e-9 * a.abs().max(1e-300), "{pair:?} A({x})");
                assert!((t.weak_right(x) - b).abs() <= 1e-9 * b.abs().max(1e-300), "{pair:?} B({x})");
                let m = quadrature::gauss_kronrod(f(TailIntegrand::Product), -1.0, x, 0.0, 1e-13, 4000).unwrap();
                let tm = t.product_between(-1.0, x);
                assert!((tm - m).abs() <= 1e-9 * m.abs().max(1.0), "{pair:?} M(-1,{x})");
            }
        }
    }

    #[test]
    fn tables_are_monotone() {
        for pair in pairs() {
            let t = table(pair);
            let xs: Vec<f64> = (0..400).map(|i| -13.0 + i as f64 * 0.065).collect();
            for w in xs.windows(2) {
                assert!(t.weak_left(w[0]) <= t.weak_left(w[1]));
                assert!(t.weak_right(w[0]) >= t.weak_right(w[1]));
            }
        }
    }

    #[test]
    fn eta_forms_agree() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for pair in pairs() {
            let t = table(pair);
            for _ in 0..40 {
                let x = rng.random_range(-4.0..4.0);
                let y = rng.random_range(-4.0..4.0);
                let e = t.eta_forms(x, y);
                let scale = e.standard.abs().max(1.0);
                assert!((e.standard - e.max_anchored).abs() <= 1e-9 * scale, "{pair:?} {e:?}");
                assert!((e.standard - e.min_anchored).abs() <= 1e-9 * scale, "{pair:?} {e:?}");
                if let Some(s) = e.strong {
                    assert!((e.standard - s).abs() <= 1e-9 * scale, "{pair:?} {e:?}");
                }
                assert_eq!(t.eta(x, y), t.eta(y, x));
                let bound = t.eta(x, x).min(t.eta(y, y));
                assert!(e.standard <= bound + 1e-12 * scale);
                assert!(t.eta(y, y) >= 0.0);
            }
        }
    }

    #[test]
    fn eta_dx_examples() {
        let t = table(WeightPair::new(RhoFamily::GaussianStd, PsiFamily::Constant { c: 1.0 }).unwrap());
        let oracle = 0.158_655_253_931_457_05;
        assert!((t.eta_dx(-1.0, 0.0).unwrap() - oracle).abs() < 1e-12);
        assert!((t.eta_dx(1.0, 0.0).unwrap() + oracle).abs() < 1e-12);
        assert_eq!(t.eta_dx(0.5, 0.5), Err(KernelError::AtKink(0.5)));
    }

    #[test]
    fn eta_derivative_matches_finite_differences() {
        let t = table(gauss(4.0));
        let h = 1e-5;
        for (x, y) in [(-1.0, 0.5), (2.0, -0.3), (0.1, 3.0)] {
            let fd = (t.eta(x + h, y) - t.eta(x - h, y)) / (2.0 * h);
            assert!((fd - t.eta_dx(x, y).unwrap()).abs() < 1e-7);
        }
    }

    #[test]
    fn weak_failure_is_reported() {
        let ctx = KernelContext::one_dim(gauss(0.4), 1.0).unwrap();
        assert_eq!(
            ctx.eta(0, 0.0, 1.0),
            Err(KernelError::ConditionViolated {
                coordinate: 0,
                condition: "weak"
            })
        );
        let weak_only = KernelContext::one_dim(gauss(0.9), 1.0).unwrap();
        assert!(weak_only.eta(0, 0.0, 1.0).is_ok());
        assert!(matches!(weak_only.embed_constant(), Err(KernelError::ConditionViolated { .. })));
    }

    #[test]
    fn one_dim_kernel_is_one_plus_eta() {
        let ctx = KernelContext::one_dim(gauss(4.0), 1.0).unwrap();
        let k = ctx.kernel_d(&[0.3], &[-1.2]).unwrap();
        assert!((k - 1.0 - ctx.eta(0, 0.3, -1.2).unwrap()).abs() < 1e-15);
        let tiny = KernelContext::one_dim(gauss(4.0), 1e-14).unwrap();
        assert!((tiny.kernel_d(&[0.3], &[-1.2]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            ctx.kernel_d(&[0.0, 1.0], &[0.0]),
            Err(KernelError::DimensionMismatch { expected: 1, got: 2 })
        );
    }

    #[test]
    fn product_fast_path_equals_subset_sum() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for d in [1usize, 3, 6, 10] {
            let gammas: Vec<f64> = (0..d).map(|j| 1.0 / (1 + j) as f64).collect();
            let ctx = KernelContext::new(vec![gauss(4.0); d], WeightParams::product(gammas).unwrap()).unwrap();
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let fast = ctx.kernel_d(&x, &y).unwrap();
            let slow = ctx.kernel_subset_sum(&x, &y).unwrap();
            assert!((fast - slow).abs() <= 1e-12 * fast.abs(), "d={d}: {fast} vs {slow}");
            assert!((fast - ctx.kernel_d(&y, &x).unwrap()).abs() <= 1e-15 * fast.abs());
        }
    }

    #[test]
    fn embed_constant_examples() {
        assert_eq!(embed_constant_1d(0.5, 1.0), 1.5);
        assert_eq!(embed_constant_1d(0.0, 7.0), 1.0);
        let gini = 1.0 / PI.sqrt();
        assert!((embed_constant_1d(1.0, gini) - 1.564_189_583_547_756).abs() < 1e-12);

        let w = WeightParams::product(vec![1.0, 1.0]).unwrap();
        assert_eq!(embed_constant_d(&w, &[1.0, 1.0]).unwrap(), 4.0);

        // Vanishing weights with γ_{12} = ε² leave only the empty-set term.
        let eps = 1e-12;
        let map = [(Subset(1), eps), (Subset(2), eps), (Subset(3), eps * eps)].into_iter().collect();
        let w = WeightParams::explicit(2, map).unwrap();
        assert!((embed_constant_d(&w, &[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-9);
        // With γ_{12} = ε as well, γ_{12}/γ_{2} = 1 keeps two ratio terms alive.
        let map = [(Subset(1), eps), (Subset(2), eps), (Subset(3), eps)].into_iter().collect();
        let w = WeightParams::explicit(2, map).unwrap();
        assert!((embed_constant_d(&w, &[1.0, 1.0]).unwrap() - 3.0).abs() < 1e-9);

        let w = WeightParams::product(vec![0.5, 0.25, 0.125]).unwrap();
        let c = [gini; 3];
        let direct = embed_constant_d(&w, &c).unwrap();
        let brute = embed_constant_exhaustive(&w.to_explicit().unwrap(), &c).unwrap();
        let closed: f64 = [0.5, 0.25, 0.125].iter().map(|g| 1.0 + g * gini).product();
        assert!((direct - closed).abs() < 1e-15);
        assert!((brute - closed).abs() < 1e-12);

        assert!(matches!(
            embed_constant_d(&w, &[1.0, f64::INFINITY, 1.0]),
            Err(KernelError::ConditionViolated { coordinate: 1, .. })
        ));
    }

    #[test]
    fn zeta_transform_matches_enumeration() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for d in 1..=8usize {
            let map = Subset::all(d).map(|u| (u, rng.random_range(0.05..2.0))).collect();
            let w = WeightParams::explicit(d, map).unwrap();
            let c: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.5)).collect();
            let fast = embed_constant_d(&w, &c).unwrap();
            let slow = embed_constant_exhaustive(&w, &c).unwrap();
            assert!((fast - slow).abs() <= 1e-12 * slow, "d={d}");
            assert!(fast >= 1.0);
        }
        for d in 1..=10usize {
            let g: Vec<f64> = (0..d).map(|_| rng.random_range(0.01..1.0)).collect();
            let c: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
            let product = WeightParams::product(g).unwrap();
            let fast = embed_constant_d(&product, &c).unwrap();
            let general = embed_constant_d(&product.to_explicit().unwrap(), &c).unwrap();
            assert!((fast - general).abs() <= 1e-12 * fast, "d={d}");
        }
    }

    #[test]
    fn explicit_weights_need_every_subset() {
        let map = [(Subset(1), 0.5)].into_iter().collect();
        let w = WeightParams::explicit(2, map).unwrap();
        let ctx = KernelContext::new(vec![gauss(4.0); 2], w).unwrap();
        assert_eq!(ctx.kernel_d(&[0.0, 0.0], &[1.0, 1.0]), Err(KernelError::MissingWeight(Subset(2))));
        assert!(WeightParams::explicit(21, BTreeMap::new()).is_err());
        assert!(WeightParams::product(vec![1.0, -0.5]).is_err());
    }

    #[test]
    fn one_dimensional_identities() {
        for pair in [
            gauss(4.0),
            gauss(2.0),
            WeightPair::new(RhoFamily::GaussianStd, PsiFamily::Constant { c: 1.0 }).unwrap(),
            WeightPair::new(RhoFamily::Logistic, PsiFamily::Constant { c: 1.0 }).unwrap(),
        ] {
            let ctx = KernelContext::one_dim(pair, 1.0).unwrap();
            for y in [-2.0, 0.0, 3.0] {
                let zero = ctx.eta_rho_integral(0, y).unwrap();
                assert!(zero.abs() < 1e-8, "{pair:?} y={y}: {zero}");
                let energy = ctx.eta_dx_energy(0, y).unwrap();
                let diag = ctx.eta(0, y, y).unwrap();
                assert!((energy - diag).abs() < 1e-8 * diag.max(1.0), "{pair:?} y={y}");
                let k = ctx.kernel_rho_integral(&[y]).unwrap();
                assert!((k - 1.0).abs() < 1e-7);
            }
            let c = ctx.c_constants().unwrap()[0];
            assert!((ctx.diagonal_integral(0).unwrap() - c).abs() < 1e-8, "{pair:?}");
        }
    }

    #[test]
    fn diagonal_integral_near_the_strong_threshold() {
        for pair in [
            gauss(1.1),
            WeightPair::new(RhoFamily::Logistic, PsiFamily::ExpDecay { alpha: 0.9 }).unwrap(),
        ] {
            let c = pair.compute_c().unwrap();
            let ctx = KernelContext::one_dim(pair, 1.0).unwrap();
            assert!((ctx.diagonal_integral(0).unwrap() - c).abs() < 1e-8 * c, "{pair:?}");
        }
    }

    #[test]
    fn kernel_integrates_to_one_in_two_dimensions() {
        let w = WeightParams::product(vec![1.0, 0.5]).unwrap();
        let ctx = KernelContext::new(vec![gauss(4.0), gauss(2.0)], w).unwrap();
        for y in [[0.3, -1.0], [2.0, 1.5]] {
            let k = ctx.kernel_rho_integral(&y).unwrap();
            assert!((k - 1.0).abs() < 1e-7, "{k}");
        }
    }
}
