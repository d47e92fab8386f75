//! One-dimensional and small tensor-product quadrature.
//!
//! Gauss rules come from the Golub–Welsch eigenproblem for the Jacobi
//! matrix of the weight, solved with implicit-shift QL, then polished by a
//! Newton step on the orthonormal three-term recurrence. Weights are taken
//! from the Christoffel function `1 / Σ p_k(x)²`, which keeps full relative
//! accuracy even for the tiny outer Hermite weights.
//!
//! Adaptive integration uses a 7/15-point Gauss–Kronrod pair with global
//! bisection of the worst interval; a classic adaptive Simpson rule is kept
//! for the `AdaptiveSimpson` spec kind.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("adaptive quadrature did not reach tolerance {tol:e} (estimated error {estimate:e})")]
    MaxDepthExceeded { tol: f64, estimate: f64 },
    #[error("integrand returned a non-finite value at x = {x}")]
    NonFiniteSample { x: f64 },
    #[error("tensor quadrature supports at most 4 dimensions, got {0}")]
    DimensionTooLarge(usize),
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
    #[error("tridiagonal eigen-solve failed to converge")]
    EigenSolveFailure,
}

/// Nodes and weights approximating `∫ g(x) w(x) dx ≈ Σ wᵢ g(xᵢ)` for some
/// weight `w` that is implied by how the rule was built.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }

    /// Physicists' Gauss–Hermite rule, weight `exp(-x²)`.
    pub fn gauss_hermite(n: usize) -> Arc<Rule> {
        cached(Family::Hermite, n)
    }

    /// Gauss–Legendre rule on `[-1, 1]`.
    pub fn gauss_legendre(n: usize) -> Arc<Rule> {
        cached(Family::Legendre, n)
    }

    /// Gauss–Laguerre rule on `[0, ∞)`, weight `exp(-x)`.
    pub fn gauss_laguerre(n: usize) -> Arc<Rule> {
        cached(Family::Laguerre, n)
    }

    /// Rule for `∫ g(x) ρ(x) dx` with `ρ` the standard normal density.
    pub fn standard_normal(n: usize) -> Rule {
        Self::gaussian_weight(n, 1.0).scale_weights(1.0 / (2.0 * PI).sqrt())
    }

    /// Rule for `∫ g(x) exp(-x² / (2v)) dx`.
    pub fn gaussian_weight(n: usize, variance: f64) -> Rule {
        let gh = Self::gauss_hermite(n);
        let s = (2.0 * variance).sqrt();
        Rule {
            nodes: gh.nodes.iter().map(|t| s * t).collect(),
            weights: gh.weights.iter().map(|w| s * w).collect(),
        }
    }

    /// Rule for `∫ g(x) exp(-rate |x|) dx`: two mirrored Gauss–Laguerre rules.
    pub fn two_sided_exponential(n: usize, rate: f64) -> Rule {
        let gl = Self::gauss_laguerre(n);
        let mut nodes = Vec::with_capacity(2 * n);
        let mut weights = Vec::with_capacity(2 * n);
        for (&t, &w) in gl.nodes.iter().zip(&gl.weights).rev() {
            nodes.push(-t / rate);
            weights.push(w / rate);
        }
        for (&t, &w) in gl.nodes.iter().zip(&gl.weights) {
            nodes.push(t / rate);
            weights.push(w / rate);
        }
        Rule { nodes, weights }
    }

    /// Composite Gauss–Legendre rule for `∫_a^b g(x) dx`.
    pub fn composite_legendre(a: f64, b: f64, panels: usize, n: usize) -> Rule {
        let gl = Self::gauss_legendre(n);
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * n);
        let mut weights = Vec::with_capacity(panels * n);
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let mid = lo + 0.5 * h;
            for (&t, &w) in gl.nodes.iter().zip(&gl.weights) {
                nodes.push(mid + 0.5 * h * t);
                weights.push(0.5 * h * w);
            }
        }
        Rule { nodes, weights }
    }

    /// Composite Gauss–Legendre rule on `[lo, hi]` with a panel boundary at
    /// `at`, so integrands with a kink at `at` are integrated piecewise
    /// smoothly. Panels are at most `panel_width` wide.
    pub fn split_composite(lo: f64, hi: f64, at: f64, panel_width: f64, n: usize) -> Rule {
        let at = at.clamp(lo, hi);
        let panels = |a: f64, b: f64| ((b - a) / panel_width).ceil() as usize;
        let mut rule = Rule { nodes: Vec::new(), weights: Vec::new() };
        if at > lo {
            rule = rule.join(&Self::composite_legendre(lo, at, panels(lo, at), n));
        }
        if hi > at {
            rule = rule.join(&Self::composite_legendre(at, hi, panels(at, hi), n));
        }
        rule
    }

    /// Multiply every weight by `w(xᵢ)`, turning a rule for `∫ g` into a
    /// rule for `∫ g w`.
    pub fn with_weight_fn<W: Fn(f64) -> f64>(mut self, w: W) -> Rule {
        for (x, wt) in self.nodes.iter().zip(self.weights.iter_mut()) {
            *wt *= w(*x);
        }
        self
    }

    pub fn scale_weights(mut self, factor: f64) -> Rule {
        self.weights.iter_mut().for_each(|w| *w *= factor);
        self
    }

    /// Concatenate two rules (integrals over adjacent pieces).
    pub fn join(mut self, other: &Rule) -> Rule {
        self.nodes.extend_from_slice(&other.nodes);
        self.weights.extend_from_slice(&other.weights);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Family {
    Hermite,
    Legendre,
    Laguerre,
}

impl Family {
    /// Total mass of the weight.
    fn mu0(self) -> f64 {
        match self {
            Family::Hermite => PI.sqrt(),
            Family::Legendre => 2.0,
            Family::Laguerre => 1.0,
        }
    }

    /// Diagonal `a_k` of the Jacobi matrix.
    fn diag(self, k: usize) -> f64 {
        match self {
            Family::Hermite | Family::Legendre => 0.0,
            Family::Laguerre => (2 * k + 1) as f64,
        }
    }

    /// Off-diagonal `b_k`, coupling `p_{k-1}` and `p_k` (`k >= 1`).
    fn off(self, k: usize) -> f64 {
        let k = k as f64;
        match self {
            Family::Hermite => (0.5 * k).sqrt(),
            Family::Legendre => k / (4.0 * k * k - 1.0).sqrt(),
            Family::Laguerre => k,
        }
    }
}

fn cached(family: Family, n: usize) -> Arc<Rule> {
    static CACHE: OnceLock<Mutex<HashMap<(Family, usize), Arc<Rule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&(family, n)) {
        return rule.clone();
    }
    let rule = Arc::new(golub_welsch(family, n).expect("Jacobi matrices of classical weights are well conditioned"));
    cache.lock().unwrap().insert((family, n), rule.clone());
    rule
}

fn golub_welsch(family: Family, n: usize) -> Result<Rule, QuadratureError> {
    assert!(n >= 1, "a Gauss rule needs at least one node");
    let mut diag: Vec<f64> = (0..n).map(|k| family.diag(k)).collect();
    let mut off: Vec<f64> = (1..n).map(|k| family.off(k)).collect();
    off.push(0.0);
    let mut first = vec![0.0; n];
    first[0] = 1.0;
    tridiagonal_ql(&mut diag, &mut off, &mut first)?;

    let mut pairs: Vec<(f64, f64)> = diag
        .into_iter()
        .zip(first)
        .map(|(x, z)| (x, family.mu0() * z * z))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (x0, _) in pairs {
        let x = polish_node(family, n, x0);
        nodes.push(x);
        weights.push(christoffel(family, n, x));
    }
    if matches!(family, Family::Hermite | Family::Legendre) {
        symmetrize(&mut nodes, &mut weights);
    }
    Ok(Rule { nodes, weights })
}

/// Orthonormal `p_n(x)` and its derivative by the three-term recurrence.
fn orthonormal_top(family: Family, n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 0.0;
    let mut p = 1.0 / family.mu0().sqrt();
    let mut dp_prev = 0.0;
    let mut dp = 0.0;
    for k in 0..n {
        let b_next = family.off(k + 1);
        let b_k = if k == 0 { 0.0 } else { family.off(k) };
        let a_k = family.diag(k);
        let p_next = ((x - a_k) * p - b_k * p_prev) / b_next;
        let dp_next = (p + (x - a_k) * dp - b_k * dp_prev) / b_next;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
    }
    (p, dp)
}

fn polish_node(family: Family, n: usize, mut x: f64) -> f64 {
    for _ in 0..3 {
        let (p, dp) = orthonormal_top(family, n, x);
        if dp == 0.0 || !dp.is_finite() {
            break;
        }
        let step = p / dp;
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

fn christoffel(family: Family, n: usize, x: f64) -> f64 {
    let mut p_prev = 0.0;
    let mut p = 1.0 / family.mu0().sqrt();
    let mut sum = p * p;
    for k in 0..n - 1 {
        let b_next = family.off(k + 1);
        let b_k = if k == 0 { 0.0 } else { family.off(k) };
        let p_next = ((x - family.diag(k)) * p - b_k * p_prev) / b_next;
        p_prev = p;
        p = p_next;
        sum += p * p;
    }
    1.0 / sum
}

fn symmetrize(nodes: &mut [f64], weights: &mut [f64]) {
    let n = nodes.len();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
}

/// Implicit-shift QL on a symmetric tridiagonal matrix.
///
/// `diag` is overwritten by the eigenvalues. `off[i]` couples rows `i` and
/// `i + 1` (last entry ignored). `first` starts as `e₀` and ends holding the
/// first component of every normalized eigenvector.
pub(crate) fn tridiagonal_ql(
    diag: &mut [f64],
    off: &mut [f64],
    first: &mut [f64],
) -> Result<(), QuadratureError> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }
    off[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(QuadratureError::EigenSolveFailure);
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                let z = first[i + 1];
                first[i + 1] = s * first[i] + c * z;
                first[i] = c * first[i] - s * z;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Adaptive rules

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

/// Weights of the embedded 7-point Gauss rule at Kronrod nodes 1, 3, 5, 7.
const GAUSS7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64), QuadratureError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let sample = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadratureError::NonFiniteSample { x })
        }
    };
    let fc = sample(center)?;
    let mut kronrod = fc * KRONROD_WEIGHTS[7];
    let mut gauss = fc * GAUSS7_WEIGHTS[3];
    for i in 0..7 {
        let dx = half * KRONROD_NODES[i];
        let pair = sample(center - dx)? + sample(center + dx)?;
        kronrod += KRONROD_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += GAUSS7_WEIGHTS[i / 2] * pair;
        }
    }
    Ok((kronrod * half, ((kronrod - gauss) * half).abs()))
}

/// Globally adaptive Gauss–Kronrod on a finite interval.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<f64, QuadratureError> {
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return gauss_kronrod(f, b, a, abs_tol, rel_tol, max_intervals).map(|v| -v);
    }
    let (v, e) = gk15(&f, a, b)?;
    let mut pieces = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    loop {
        let tol = abs_tol.max(rel_tol * total.abs());
        let rounding = 50.0 * f64::EPSILON * pieces.iter().map(|p| p.2.abs()).sum::<f64>();
        if err <= tol || err <= rounding {
            return Ok(total);
        }
        if pieces.len() >= max_intervals {
            return Err(QuadratureError::MaxDepthExceeded { tol, estimate: err });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, v0, e0) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval can no longer be split in floating point.
            return Err(QuadratureError::MaxDepthExceeded { tol, estimate: err });
        }
        let (v1, e1) = gk15(&f, lo, mid)?;
        let (v2, e2) = gk15(&f, mid, hi)?;
        total += v1 + v2 - v0;
        err += e1 + e2 - e0;
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
        // Re-sum occasionally so cancellation in the running totals does not drift.
        if pieces.len() % 64 == 0 {
            total = pieces.iter().map(|p| p.2).sum();
            err = pieces.iter().map(|p| p.3).sum();
        }
    }
}

/// Gauss–Kronrod on `[a, ∞)` through `x = a + t / (1 - t)`.
pub fn gauss_kronrod_upper<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<f64, QuadratureError> {
    gauss_kronrod(
        |t| {
            let s = 1.0 - t;
            f(a + t / s) / (s * s)
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
        max_intervals,
    )
}

/// Gauss–Kronrod on `(-∞, b]` through `x = b - t / (1 - t)`.
pub fn gauss_kronrod_lower<F: Fn(f64) -> f64>(
    f: F,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<f64, QuadratureError> {
    gauss_kronrod_upper(|x| f(2.0 * b - x), b, abs_tol, rel_tol, max_intervals)
}

/// Classic recursive adaptive Simpson with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> Result<f64, QuadratureError> {
    fn sample<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64, QuadratureError> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadratureError::NonFiniteSample { x })
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64, QuadratureError> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = sample(f, lm)?;
        let frm = sample(f, rm)?;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        // The second test stops refinement once the difference is at rounding level.
        if delta.abs() <= 15.0 * tol || delta.abs() <= 64.0 * f64::EPSILON * (left.abs() + right.abs()) {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(QuadratureError::MaxDepthExceeded {
                tol,
                estimate: delta.abs() / 15.0,
            });
        }
        Ok(step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
    }

    let fa = sample(&f, a)?;
    let fb = sample(&f, b)?;
    let m = 0.5 * (a + b);
    let fm = sample(&f, m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(&f, a, b, fa, fm, fb, whole, tol, max_depth)
}

// ---------------------------------------------------------------------------
// Spec-driven entry points

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadratureKind {
    /// Gauss–Hermite with `n` nodes. On the real line it integrates
    /// `g = ρ · polynomial` exactly, `ρ` the standard normal density.
    GaussHermite(usize),
    GaussLegendre(usize),
    AdaptiveSimpson { tol: f64, max_depth: u32 },
    GaussKronrod { abs_tol: f64, rel_tol: f64, max_intervals: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    RealLine,
    Interval(f64, f64),
    SemiInfinite(f64, Direction),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub kind: QuadratureKind,
    pub domain: Domain,
}

impl QuadratureSpec {
    pub fn new(kind: QuadratureKind, domain: Domain) -> Self {
        Self { kind, domain }
    }

    /// Adaptive Gauss–Kronrod at the constants-grade tolerance (1e-10).
    pub fn adaptive(domain: Domain) -> Self {
        Self::new(
            QuadratureKind::GaussKronrod {
                abs_tol: 1e-10,
                rel_tol: 1e-12,
                max_intervals: 4000,
            },
            domain,
        )
    }
}

fn finite_or_err(v: f64, x: f64) -> Result<f64, QuadratureError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(QuadratureError::NonFiniteSample { x })
    }
}

fn gauss_sum<F: Fn(f64) -> f64>(rule: &Rule, g: F) -> Result<f64, QuadratureError> {
    let mut acc = 0.0;
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        acc += w * finite_or_err(g(x), x)?;
    }
    Ok(acc)
}

/// `∫ g` over the spec's domain.
///
/// Semi-infinite domains use `x = a ± t/(1-t)` on `t ∈ [0, 1)`; the real line
/// uses `x = t/(1-t²)` for Legendre and a split at zero for the adaptive
/// kinds. Adaptive Simpson samples the closed endpoint `t = 1`, where the
/// mapped integrand is taken to be zero.
pub fn integrate<F: Fn(f64) -> f64>(spec: &QuadratureSpec, g: F) -> Result<f64, QuadratureError> {
    integrate_dyn(spec, &g)
}

fn integrate_dyn(spec: &QuadratureSpec, g: &dyn Fn(f64) -> f64) -> Result<f64, QuadratureError> {
    match (spec.kind, spec.domain) {
        (QuadratureKind::GaussHermite(n), Domain::RealLine) => {
            let rule = Rule::standard_normal(n);
            gauss_sum(&rule, |x| g(x) / crate::normal::pdf(x))
        }
        (QuadratureKind::GaussHermite(_), _) => Err(QuadratureError::InvalidSpec(
            "Gauss-Hermite is only defined on the real line".into(),
        )),
        (QuadratureKind::GaussLegendre(n), Domain::Interval(a, b)) => {
            gauss_sum(&Rule::composite_legendre(a, b, 1, n), g)
        }
        (QuadratureKind::GaussLegendre(n), Domain::SemiInfinite(a, dir)) => {
            let sign = if dir == Direction::Up { 1.0 } else { -1.0 };
            let rule = Rule::composite_legendre(0.0, 1.0, 1, n);
            gauss_sum(&rule, |t| {
                let s = 1.0 - t;
                g(a + sign * t / s) / (s * s)
            })
        }
        (QuadratureKind::GaussLegendre(n), Domain::RealLine) => {
            let rule = Rule::composite_legendre(-1.0, 1.0, 1, n);
            gauss_sum(&rule, |t| {
                let s = 1.0 - t * t;
                g(t / s) * (1.0 + t * t) / (s * s)
            })
        }
        (QuadratureKind::AdaptiveSimpson { tol, max_depth }, domain) => match domain {
            Domain::Interval(a, b) => adaptive_simpson(g, a, b, tol, max_depth),
            Domain::SemiInfinite(a, dir) => {
                let sign = if dir == Direction::Up { 1.0 } else { -1.0 };
                adaptive_simpson(
                    |t| {
                        if t >= 1.0 {
                            return 0.0;
                        }
                        let s = 1.0 - t;
                        g(a + sign * t / s) / (s * s)
                    },
                    0.0,
                    1.0,
                    tol,
                    max_depth,
                )
            }
            Domain::RealLine => {
                let half = QuadratureSpec::new(spec.kind, Domain::SemiInfinite(0.0, Direction::Up));
                let lower = QuadratureSpec::new(spec.kind, Domain::SemiInfinite(0.0, Direction::Down));
                Ok(integrate_dyn(&half, g)? + integrate_dyn(&lower, g)?)
            }
        },
        (
            QuadratureKind::GaussKronrod {
                abs_tol,
                rel_tol,
                max_intervals,
            },
            domain,
        ) => match domain {
            Domain::Interval(a, b) => gauss_kronrod(g, a, b, abs_tol, rel_tol, max_intervals),
            Domain::SemiInfinite(a, Direction::Up) => {
                gauss_kronrod_upper(g, a, abs_tol, rel_tol, max_intervals)
            }
            Domain::SemiInfinite(b, Direction::Down) => {
                gauss_kronrod_lower(g, b, abs_tol, rel_tol, max_intervals)
            }
            Domain::RealLine => Ok(gauss_kronrod_lower(g, 0.0, abs_tol, rel_tol, max_intervals)?
                + gauss_kronrod_upper(g, 0.0, abs_tol, rel_tol, max_intervals)?),
        },
    }
}

/// Full tensor-product integral of `g` over `k = specs.len() <= 4` coordinates,
/// nesting the one-dimensional rules (outermost coordinate first).
pub fn tensor_integrate<G: Fn(&[f64]) -> f64>(
    specs: &[QuadratureSpec],
    g: G,
) -> Result<f64, QuadratureError> {
    if specs.len() > 4 {
        return Err(QuadratureError::DimensionTooLarge(specs.len()));
    }
    if specs.is_empty() {
        return Ok(g(&[]));
    }
    let failure = RefCell::new(None);
    let result = nest(specs, &g, &mut Vec::with_capacity(specs.len()), &failure);
    match failure.into_inner() {
        Some(e) => Err(e),
        None => result,
    }
}

fn nest<G: Fn(&[f64]) -> f64>(
    specs: &[QuadratureSpec],
    g: &G,
    prefix: &mut Vec<f64>,
    failure: &RefCell<Option<QuadratureError>>,
) -> Result<f64, QuadratureError> {
    let (head, rest) = specs.split_first().expect("non-empty");
    let prefix_cell = RefCell::new(std::mem::take(prefix));
    let out = integrate(head, |x| {
        let mut p = prefix_cell.borrow_mut();
        p.push(x);
        let v = if rest.is_empty() {
            g(&p)
        } else {
            let mut inner = std::mem::take(&mut *p);
            let r = nest(rest, g, &mut inner, failure);
            *p = inner;
            match r {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            }
        };
        p.pop();
        v
    });
    *prefix = prefix_cell.into_inner();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal;

    fn hermite_moment(k: u32) -> f64 {
        // ∫ x^k e^{-x²} dx = Γ((k+1)/2) for even k, zero for odd k.
        if k % 2 == 1 {
            return 0.0;
        }
        let mut v = PI.sqrt();
        let mut j = 1;
        while j < k {
            v *= j as f64 / 2.0;
            j += 2;
        }
        v
    }

    #[test]
    fn hermite_weights_sum_to_sqrt_pi_and_nodes_are_symmetric() {
        for n in [1, 4, 8, 16, 40, 100] {
            let r = Rule::gauss_hermite(n);
            let s: f64 = r.weights.iter().sum();
            assert!((s - PI.sqrt()).abs() < 1e-12, "n={n}: {s}");
            for i in 0..n {
                assert_eq!(r.nodes[i], -r.nodes[n - 1 - i]);
            }
        }
    }

    #[test]
    fn four_point_hermite_matches_tabulated_values() {
        let r = Rule::gauss_hermite(4);
        let x = [-1.650_680_123_885_784_6, -0.524_647_623_275_290_3];
        let w = [0.081_312_835_447_245_18, 0.804_914_090_005_512_8];
        for i in 0..2 {
            assert!((r.nodes[i] - x[i]).abs() < 1e-14);
            assert!((r.weights[i] - w[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn hermite_is_exact_up_to_degree_2n_minus_1() {
        for n in [4usize, 8, 16] {
            let r = Rule::gauss_hermite(n);
            for k in 0..(2 * n as u32) {
                let q = r.integrate(|x| x.powi(k as i32));
                let exact = hermite_moment(k);
                // odd moments cancel, so scale by the next even moment
                let scale = hermite_moment(k + k % 2).max(1.0);
                assert!(
                    (q - exact).abs() <= 1e-12 * scale,
                    "n={n} k={k}: {q} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn legendre_and_laguerre_moments() {
        let gl = Rule::gauss_legendre(10);
        for k in 0..20 {
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((gl.integrate(|x| x.powi(k)) - exact).abs() < 1e-14);
        }
        let lag = Rule::gauss_laguerre(12);
        let mut fact = 1.0;
        for k in 0..24 {
            if k > 0 {
                fact *= k as f64;
            }
            let q = lag.integrate(|x| x.powi(k));
            assert!((q - fact).abs() <= 1e-11 * fact, "k={k}: {q} vs {fact}");
        }
    }

    #[test]
    fn kronrod_pair_degrees() {
        // K15 is exact through degree 22, the embedded G7 through degree 13.
        for k in 0..=22 {
            let (v, _) = gk15(&|x: f64| x.powi(k), -1.0, 1.0).unwrap();
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((v - exact).abs() < 1e-14, "k={k}");
        }
        let (_, err) = gk15(&|x: f64| x.powi(12), -1.0, 1.0).unwrap();
        assert!(err < 1e-14);
    }

    #[test]
    fn spec_examples() {
        let normal_mass = integrate(
            &QuadratureSpec::new(QuadratureKind::GaussHermite(20), Domain::RealLine),
            normal::pdf,
        )
        .unwrap();
        assert!((normal_mass - 1.0).abs() < 1e-12);

        let second = integrate(
            &QuadratureSpec::adaptive(Domain::RealLine),
            |x| x * x * normal::pdf(x),
        )
        .unwrap();
        assert!((second - 1.0).abs() < 1e-10);

        let tol = 1e-10;
        let pi = integrate(
            &QuadratureSpec::new(
                QuadratureKind::AdaptiveSimpson { tol, max_depth: 40 },
                Domain::Interval(0.0, 1.0),
            ),
            |x| 4.0 / (1.0 + x * x),
        )
        .unwrap();
        assert!((pi - PI).abs() < tol);
    }

    #[test]
    fn semi_infinite_maps() {
        // ∫_1^∞ 2 x^{-3} dx = 1 and ∫_{-∞}^0 e^{x} dx = 1.
        for kind in [
            QuadratureKind::GaussLegendre(64),
            QuadratureKind::AdaptiveSimpson { tol: 1e-11, max_depth: 40 },
            QuadratureKind::GaussKronrod { abs_tol: 1e-13, rel_tol: 0.0, max_intervals: 500 },
        ] {
            let up = integrate(
                &QuadratureSpec::new(kind, Domain::SemiInfinite(1.0, Direction::Up)),
                |x| 2.0 / (x * x * x),
            )
            .unwrap();
            assert!((up - 1.0).abs() < 1e-9, "{kind:?}: {up}");
            let down = integrate(
                &QuadratureSpec::new(kind, Domain::SemiInfinite(0.0, Direction::Down)),
                f64::exp,
            )
            .unwrap();
            assert!((down - 1.0).abs() < 1e-9, "{kind:?}: {down}");
        }
    }

    #[test]
    fn tensor_examples() {
        let gh = QuadratureSpec::new(QuadratureKind::GaussHermite(24), Domain::RealLine);
        let dens = |x: &[f64]| x.iter().map(|&t| normal::pdf(t)).product::<f64>();
        let one = tensor_integrate(&[gh, gh], dens).unwrap();
        assert!((one - 1.0).abs() < 1e-10);
        let odd = tensor_integrate(&[gh, gh], |x| x[0] * x[1] * dens(x)).unwrap();
        assert!(odd.abs() < 1e-10);
        let var = tensor_integrate(&[gh, gh], |x| (x[0] * x[0] + x[1] * x[1]) * dens(x)).unwrap();
        assert!((var - 2.0).abs() < 1e-9);

        let adapt = QuadratureSpec::adaptive(Domain::Interval(0.0, 1.0));
        let v = tensor_integrate(&[adapt, adapt, adapt], |x| x[0] * x[1] * x[2]).unwrap();
        assert!((v - 0.125).abs() < 1e-12);

        let err = tensor_integrate(&[gh; 5], |_| 1.0).unwrap_err();
        assert_eq!(err, QuadratureError::DimensionTooLarge(5));
    }

    #[test]
    fn doubling_gauss_order_does_not_increase_error() {
        let fixtures: [(fn(f64) -> f64, f64); 3] = [
            (|x| (x.cos()) * normal::pdf(x), (-0.5f64).exp()),
            (|x| x.powi(4) * normal::pdf(x), 3.0),
            (|x| (-x * x / 8.0).exp() * normal::pdf(x), (0.8f64).sqrt()),
        ];
        for (g, exact) in fixtures {
            let mut last = f64::INFINITY;
            for n in [4, 8, 16, 32, 64] {
                let q = integrate(
                    &QuadratureSpec::new(QuadratureKind::GaussHermite(n), Domain::RealLine),
                    g,
                )
                .unwrap();
                let err = (q - exact).abs();
                assert!(err <= last.max(1e-14), "n={n}: {err} > {last}");
                last = err;
            }
        }
    }

    #[test]
    fn non_finite_samples_are_reported() {
        let err = integrate(&QuadratureSpec::adaptive(Domain::Interval(-1.0, 1.0)), |x| {
            if x == 0.0 {
                f64::NAN
            } else {
                1.0
            }
        })
        .unwrap_err();
        assert!(matches!(err, QuadratureError::NonFiniteSample { .. }));
    }

    #[test]
    fn simpson_reports_exhausted_depth() {
        let err = adaptive_simpson(|x: f64| x.abs().sqrt().recip().min(1e12), -1.0, 1.0, 1e-14, 6)
            .unwrap_err();
        assert!(matches!(err, QuadratureError::MaxDepthExceeded { .. }));
    }
}
