//! The `H` and `W` norms on tensor Gauss grids, the equivalence audit, and
//! a direct check of the reproducing property.
//!
//! ```text
//! ‖f‖²_H = Σ_u γ_u⁻¹ ∫ |∂^u f|² ψ_u ρ_{-u}
//! ‖f‖²_W = Σ_u γ_u⁻¹ ∫ (∫ ∂^u f ρ_{-u} dx_{-u})² ψ_u dx_u
//! ```
//!
//! Squares are accumulated as `(v √w)²` so that a partial that grows
//! faster than its weight decays never overflows before the weight is
//! applied.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::kernel::{KernelContext, KernelError, WeightParams};
use crate::quadrature::Rule;
use crate::subset::Subset;
use crate::weights::{PsiFamily, TRUNCATION};

/// Largest dimension handled by the tensor-grid norms.
pub const MAX_NORM_DIM: usize = 4;

/// Radii of the truncation-growth profile.
pub const PROFILE_RADII: [f64; 4] = [5.0, 10.0, 20.0, 40.0];

/// Relative slack in the `‖f‖_W ≤ ‖f‖_H ≤ bound ‖f‖_W` checks.
pub const SANDWICH_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NormError {
    #[error("tensor quadrature supports d <= {max}, got {0}", max = MAX_NORM_DIM)]
    DimensionTooLarge(usize),
    #[error("non-finite value of ∂^{subset} f at {x:?}")]
    NonFiniteSample { subset: Subset, x: Vec<f64> },
    #[error("∂^{subset} f does not vanish at |x_{coordinate}| = {radius}; the ψ-weighted integral diverges")]
    Divergent { subset: Subset, coordinate: usize, radius: f64 },
    #[error("∂^{subset} f disagrees with a finite difference in x_{coordinate}: {analytic} vs {numeric}")]
    InconsistentDerivative {
        subset: Subset,
        coordinate: usize,
        analytic: f64,
        numeric: f64,
    },
    #[error("expected {expected} partial derivatives, got {got}")]
    WrongPartialCount { expected: usize, got: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// A function on `ℝ^d` together with all its first-order mixed partials.
pub trait MixedPartials: Sync {
    fn dim(&self) -> usize;

    /// `∂^u f(x)`; `u = ∅` is `f` itself.
    fn partial(&self, u: Subset, x: &[f64]) -> f64;

    fn value(&self, x: &[f64]) -> f64 {
        self.partial(Subset::EMPTY, x)
    }

    /// Coordinates `f` depends on. Partials involving other coordinates
    /// are zero and are skipped.
    fn support(&self) -> Subset {
        Subset::full(self.dim())
    }
}

pub type Partial = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Caller-supplied `f` and `∂^u f` for every `u`, indexed by subset bits.
pub struct SmoothTestFunction {
    d: usize,
    partials: Vec<Partial>,
}

impl std::fmt::Debug for SmoothTestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothTestFunction").field("d", &self.d).finish_non_exhaustive()
    }
}

impl SmoothTestFunction {
    /// `partials[u.bits()]` must be `∂^u f`. The partials are checked
    /// against central differences at fixed probe points.
    pub fn new(d: usize, partials: Vec<Partial>) -> Result<Self, NormError> {
        if d > MAX_NORM_DIM {
            return Err(NormError::DimensionTooLarge(d));
        }
        if partials.len() != 1 << d {
            return Err(NormError::WrongPartialCount {
                expected: 1 << d,
                got: partials.len(),
            });
        }
        let f = Self { d, partials };
        check_mixed_partials(&f, &probe_points(d))?;
        Ok(f)
    }

    pub fn one_dim(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self, NormError> {
        Self::new(1, vec![Box::new(move |x| f(x[0])), Box::new(move |x| df(x[0]))])
    }

    pub fn constant(d: usize, c: f64) -> Result<Self, NormError> {
        let partials = (0..1usize << d)
            .map(|u| -> Partial { if u == 0 { Box::new(move |_| c) } else { Box::new(|_| 0.0) } })
            .collect();
        Self::new(d, partials)
    }
}

impl MixedPartials for SmoothTestFunction {
    fn dim(&self) -> usize {
        self.d
    }

    fn partial(&self, u: Subset, x: &[f64]) -> f64 {
        (self.partials[u.bits() as usize])(x)
    }
}

/// Fixed probe points used by the finite-difference consistency check.
pub fn probe_points(d: usize) -> Vec<Vec<f64>> {
    (0..5)
        .map(|k| {
            (0..d)
                .map(|j| {
                    let sign = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * (0.37 * (k + 1) as f64 + 0.11 * j as f64)
                })
                .collect()
        })
        .collect()
}

/// Check every `∂^u f` against a central difference of `∂^{u∖j} f` in
/// each `j ∈ u`, to 1e-5 relative.
pub fn check_mixed_partials<F: MixedPartials + ?Sized>(f: &F, points: &[Vec<f64>]) -> Result<(), NormError> {
    for x in points {
        for u in Subset::all(f.dim()).skip(1) {
            for j in u.indices() {
                let lower = u.without(j);
                let h = 1e-5 * x[j].abs().max(1.0);
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let numeric = (f.partial(lower, &xp) - f.partial(lower, &xm)) / (2.0 * h);
                let analytic = f.partial(u, x);
                let scale = analytic.abs().max(1e-4 * f.partial(lower, x).abs()).max(1e-12);
                if (numeric - analytic).abs() > 1e-5 * scale {
                    return Err(NormError::InconsistentDerivative {
                        subset: u,
                        coordinate: j,
                        analytic,
                        numeric,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Node counts of the per-coordinate rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormConfig {
    pub rho_nodes: usize,
    pub psi_nodes: usize,
}

impl Default for NormConfig {
    fn default() -> Self {
        Self {
            rho_nodes: 32,
            psi_nodes: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetTerm {
    /// `γ_u⁻¹ ∫ |∂^u f|² ψ_u ρ_{-u}`
    pub h: f64,
    /// `γ_u⁻¹ ∫ (∫ ∂^u f ρ_{-u})² ψ_u`
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormReport {
    pub w_norm_sq: f64,
    pub h_norm_sq: f64,
    pub terms: BTreeMap<Subset, SubsetTerm>,
    /// `‖f‖²_W ≤ ‖f‖²_H` within [`SANDWICH_SLACK`].
    pub sandwich_ok: bool,
}

/// Per-coordinate tensor factors, each a list of `(node, weight)`.
pub(crate) struct Tensor<'a> {
    coords: Vec<usize>,
    rules: Vec<&'a Rule>,
}

impl<'a> Tensor<'a> {
    pub(crate) fn new(coords: Vec<usize>, rules: Vec<&'a Rule>) -> Self {
        Self { coords, rules }
    }

    /// Visit every grid point: writes the coordinates into `x` and passes
    /// the product weight.
    pub(crate) fn for_each(&self, x: &mut [f64], mut g: impl FnMut(&[f64], f64)) {
        let k = self.coords.len();
        let mut idx = vec![0usize; k];
        loop {
            let mut w = 1.0;
            for i in 0..k {
                x[self.coords[i]] = self.rules[i].nodes[idx[i]];
                w *= self.rules[i].weights[idx[i]];
            }
            g(x, w);
            let mut i = 0;
            loop {
                if i == k {
                    return;
                }
                idx[i] += 1;
                if idx[i] < self.rules[i].len() {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
        }
    }

    /// All grid points as `(coordinates, weight)`.
    pub(crate) fn points(&self) -> Vec<(Vec<f64>, f64)> {
        let mut out = Vec::new();
        let mut scratch = vec![0.0; self.coords.iter().max().map_or(0, |m| m + 1)];
        self.for_each(&mut scratch, |x, w| {
            out.push((self.coords.iter().map(|&j| x[j]).collect(), w));
        });
        out
    }
}

/// Complement of `u` within `within`, as a sorted index list.
fn others(u: Subset, within: Subset) -> Vec<usize> {
    within.minus(u).indices().collect()
}

pub(crate) fn coordinate_rules(ctx: &KernelContext, cfg: &NormConfig) -> (Vec<Rule>, Vec<Rule>) {
    let rho = ctx.pairs().iter().map(|p| p.rho_rule(cfg.rho_nodes)).collect();
    let psi = ctx.pairs().iter().map(|p| p.psi_rule(cfg.psi_nodes)).collect();
    (rho, psi)
}

/// `∫ ∂^u f ρ_{-u}` and `∫ |∂^u f|² ρ_{-u}` at each point of the `ψ_u`
/// grid, with the outer weights. Inner coordinates outside `f`'s support
/// are not integrated (their rules integrate constants exactly).
fn subset_rows<F: MixedPartials + ?Sized>(
    f: &F,
    u: Subset,
    rho: &[Rule],
    psi: &[Rule],
) -> Result<Vec<(f64, f64, f64)>, NormError> {
    let d = f.dim();
    let outer = Tensor::new(u.indices().collect(), u.indices().map(|j| &psi[j]).collect());
    let inner_coords = others(u, f.support());
    let inner = Tensor::new(inner_coords.clone(), inner_coords.iter().map(|&j| &rho[j]).collect());
    outer
        .points()
        .into_par_iter()
        .map(|(xu, w_outer)| {
            let mut x = vec![0.0; d];
            for (i, j) in u.indices().enumerate() {
                x[j] = xu[i];
            }
            let mut mean = 0.0;
            let mut energy = 0.0;
            let mut bad = None;
            inner.for_each(&mut x, |x, w| {
                let v = f.partial(u, x);
                if !v.is_finite() && bad.is_none() {
                    bad = Some(x.to_vec());
                }
                mean += w * v;
                let s = v * (w * w_outer).sqrt();
                energy += s * s;
            });
            match bad {
                Some(x) => Err(NormError::NonFiniteSample { subset: u, x }),
                None => {
                    let s = mean * w_outer.sqrt();
                    Ok((w_outer, s * s, energy))
                }
            }
        })
        .collect()
}

fn norms_with_rules<F: MixedPartials + ?Sized>(
    f: &F,
    weights: &WeightParams,
    rho: &[Rule],
    psi: &[Rule],
) -> Result<NormReport, NormError> {
    let d = f.dim();
    if d > MAX_NORM_DIM {
        return Err(NormError::DimensionTooLarge(d));
    }
    if weights.d != d {
        return Err(KernelError::DimensionMismatch {
            expected: weights.d,
            got: d,
        }
        .into());
    }
    let mut terms = BTreeMap::new();
    for u in Subset::all(d) {
        if !u.is_subset_of(f.support()) {
            terms.insert(u, SubsetTerm { h: 0.0, w: 0.0 });
            continue;
        }
        let gamma = weights.gamma(u)?;
        let rows = subset_rows(f, u, rho, psi)?;
        let w: f64 = rows.iter().map(|r| r.1).sum();
        let h: f64 = rows.iter().map(|r| r.2).sum();
        terms.insert(u, SubsetTerm { h: h / gamma, w: w / gamma });
    }
    let w_norm_sq = terms.values().map(|t| t.w).sum::<f64>();
    let h_norm_sq = terms.values().map(|t| t.h).sum::<f64>();
    Ok(NormReport {
        w_norm_sq,
        h_norm_sq,
        terms,
        sandwich_ok: w_norm_sq <= h_norm_sq * (1.0 + SANDWICH_SLACK),
    })
}

/// Reject functions whose `ψ`-weighted partials do not decay inside the
/// truncated rule used for constant `ψ`.
fn check_constant_psi_tails<F: MixedPartials + ?Sized>(
    f: &F,
    ctx: &KernelContext,
    report: &NormReport,
) -> Result<(), NormError> {
    for (j, pair) in ctx.pairs().iter().enumerate() {
        let PsiFamily::Constant { c } = pair.psi else { continue };
        for u in Subset::all(f.dim()).filter(|u| u.contains(j) && u.is_subset_of(f.support())) {
            for edge in [-TRUNCATION, TRUNCATION] {
                let mut x = vec![0.0; f.dim()];
                x[j] = edge;
                let v = f.partial(u, &x);
                let tail = v * v * c * TRUNCATION;
                if !(tail <= 1e-10 * report.h_norm_sq.max(1.0)) {
                    return Err(NormError::Divergent {
                        subset: u,
                        coordinate: j,
                        radius: TRUNCATION,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Both norms with their per-subset terms.
pub fn norms<F: MixedPartials + ?Sized>(f: &F, ctx: &KernelContext, cfg: &NormConfig) -> Result<NormReport, NormError> {
    check_dims(f, ctx)?;
    let (rho, psi) = coordinate_rules(ctx, cfg);
    let report = norms_with_rules(f, ctx.weights(), &rho, &psi)?;
    check_constant_psi_tails(f, ctx, &report)?;
    Ok(report)
}

pub fn norm_w<F: MixedPartials + ?Sized>(f: &F, ctx: &KernelContext, cfg: &NormConfig) -> Result<f64, NormError> {
    Ok(norms(f, ctx, cfg)?.w_norm_sq)
}

pub fn norm_h<F: MixedPartials + ?Sized>(f: &F, ctx: &KernelContext, cfg: &NormConfig) -> Result<f64, NormError> {
    Ok(norms(f, ctx, cfg)?.h_norm_sq)
}

fn check_dims<F: MixedPartials + ?Sized>(f: &F, ctx: &KernelContext) -> Result<(), NormError> {
    if f.dim() > MAX_NORM_DIM {
        return Err(NormError::DimensionTooLarge(f.dim()));
    }
    if f.dim() != ctx.dim() {
        return Err(KernelError::DimensionMismatch {
            expected: ctx.dim(),
            got: f.dim(),
        }
        .into());
    }
    Ok(())
}

/// Both norms with every integral truncated to `[-R, R]^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNorms {
    pub radius: f64,
    pub w_norm_sq: f64,
    pub h_norm_sq: f64,
    /// `∫_{[-R,R]^d} f² ρ`, the `u = ∅` part of the H norm.
    pub l2_rho_sq: f64,
}

pub fn truncated_norms<F: MixedPartials + ?Sized>(
    f: &F,
    ctx: &KernelContext,
    radius: f64,
) -> Result<TruncatedNorms, NormError> {
    check_dims(f, ctx)?;
    let panels = (2.0 * radius).ceil() as usize;
    let base = Rule::composite_legendre(-radius, radius, panels, 16);
    let rho: Vec<Rule> = ctx.pairs().iter().map(|p| base.clone().with_weight_fn(|x| p.density(x))).collect();
    let psi: Vec<Rule> = ctx.pairs().iter().map(|p| base.clone().with_weight_fn(|x| p.psi(x))).collect();
    let report = norms_with_rules(f, ctx.weights(), &rho, &psi)?;
    // f²ρ is formed as (f √w)² with √w taken from log ρ: at R = 40 both f²
    // and ρ leave the f64 range while their product stays O(1)
    let root: Vec<Rule> = ctx
        .pairs()
        .iter()
        .map(|p| Rule {
            nodes: base.nodes.clone(),
            weights: base.nodes.iter().zip(&base.weights).map(|(&x, &w)| (0.5 * (w.ln() + p.log_density(x))).exp()).collect(),
        })
        .collect();
    let coords: Vec<usize> = f.support().indices().collect();
    let tensor = Tensor::new(coords.clone(), coords.iter().map(|&j| &root[j]).collect());
    let mut x = vec![0.0; f.dim()];
    let mut l2 = 0.0;
    let mut bad = None;
    tensor.for_each(&mut x, |x, w| {
        let s = f.value(x) * w;
        if !s.is_finite() && bad.is_none() {
            bad = Some(x.to_vec());
        }
        l2 += s * s;
    });
    if let Some(x) = bad {
        return Err(NormError::NonFiniteSample { subset: Subset::EMPTY, x });
    }
    let gamma = ctx.weights().gamma(Subset::EMPTY)?;
    Ok(TruncatedNorms {
        radius,
        w_norm_sq: report.w_norm_sq,
        h_norm_sq: report.h_norm_sq - report.terms[&Subset::EMPTY].h + l2 / gamma,
        l2_rho_sq: l2,
    })
}

/// Truncated norms at each of [`PROFILE_RADII`].
pub fn divergence_profile<F: MixedPartials + ?Sized>(
    f: &F,
    ctx: &KernelContext,
) -> Result<Vec<TruncatedNorms>, NormError> {
    PROFILE_RADII.iter().map(|&r| truncated_norms(f, ctx, r)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditResult {
    pub w_norm_sq: f64,
    pub h_norm_sq: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    /// `‖f‖²_H / ‖f‖²_W`
    pub ratio: f64,
    pub bound: f64,
}

/// Check `‖f‖²_W ≤ ‖f‖²_H ≤ bound · ‖f‖²_W` with `bound` the embedding
/// constant of the context.
pub fn audit_equivalence<F: MixedPartials + ?Sized>(
    f: &F,
    ctx: &KernelContext,
    cfg: &NormConfig,
) -> Result<AuditResult, NormError> {
    let bound = ctx.embed_constant()?;
    let r = norms(f, ctx, cfg)?;
    Ok(AuditResult {
        w_norm_sq: r.w_norm_sq,
        h_norm_sq: r.h_norm_sq,
        lower_ok: r.w_norm_sq <= r.h_norm_sq * (1.0 + SANDWICH_SLACK),
        upper_ok: r.h_norm_sq <= bound * r.w_norm_sq * (1.0 + SANDWICH_SLACK),
        ratio: r.h_norm_sq / r.w_norm_sq,
        bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReproducingCheck {
    pub value: f64,
    pub inner_product: f64,
    /// `|f(y) - ⟨f, K(·, y)⟩_W| / max(|f(y)|, 1)`
    pub residual: f64,
}

/// Largest dimension for [`reproducing_check`].
pub const MAX_REPRODUCING_DIM: usize = 3;

/// Half-width and panel size of the split `ψ` rules in [`reproducing_check`].
const REPRODUCING_HALF_WIDTH: f64 = 24.0;
const REPRODUCING_PANEL: f64 = 1.5;

/// `⟨f, K_d(·, y)⟩_W` by quadrature, compared with `f(y)`.
///
/// For each `u` the outer `ψ_u` integral uses rules split at `y_j`, where
/// `∂η_j` jumps. The `ρ`-average of `∂^u K` over the inactive
/// coordinates is assembled from the one-dimensional integrals
/// `∫ η_j(x, y_j) ρ_j(x) dx`, each evaluated numerically.
pub fn reproducing_check<F: MixedPartials + ?Sized>(
    f: &F,
    ctx: &KernelContext,
    y: &[f64],
    cfg: &NormConfig,
) -> Result<ReproducingCheck, NormError> {
    let d = f.dim();
    check_dims(f, ctx)?;
    if d > MAX_REPRODUCING_DIM {
        return Err(NormError::DimensionTooLarge(d));
    }
    if y.len() != d {
        return Err(KernelError::DimensionMismatch { expected: d, got: y.len() }.into());
    }
    let (rho, _) = coordinate_rules(ctx, cfg);
    let eta_means: Vec<f64> = (0..d).map(|j| ctx.eta_rho_integral(j, y[j])).collect::<Result<_, _>>()?;
    let split: Vec<Rule> = (0..d)
        .map(|j| {
            let half = REPRODUCING_HALF_WIDTH.max(y[j].abs() + 8.0);
            Rule::split_composite(-half, half, y[j], REPRODUCING_PANEL, 16)
        })
        .collect();

    let weights = ctx.weights();
    let mut total = 0.0;
    for u in Subset::all(d) {
        if !u.is_subset_of(f.support()) {
            continue;
        }
        // ρ-average of ∂^u K over x_{-u}: Σ_{v ⊇ u} γ_v ∏_{j∈u} ∂η_j ∏_{j∈v∖u} ∫η_j ρ_j.
        let mut avg_coeff = 0.0;
        for v in Subset::full(d).minus(u).subsets() {
            let v = v.union(u);
            let mean: f64 = v.minus(u).indices().map(|j| eta_means[j]).product();
            avg_coeff += weights.gamma(v)? * mean;
        }
        let gamma_u = weights.gamma(u)?;
        let outer = Tensor::new(u.indices().collect(), u.indices().map(|j| &split[j]).collect());
        let inner_coords = others(u, f.support());
        let inner = Tensor::new(inner_coords.clone(), inner_coords.iter().map(|&j| &rho[j]).collect());
        let rows: Vec<Result<f64, NormError>> = outer
            .points()
            .into_par_iter()
            .map(|(xu, w_outer)| {
                let mut x = vec![0.0; d];
                let mut kernel_part = avg_coeff;
                for (i, j) in u.indices().enumerate() {
                    x[j] = xu[i];
                    let pair = &ctx.pairs()[j];
                    kernel_part *= ctx.eta_dx(j, xu[i], y[j])? * pair.psi(xu[i]);
                }
                let mut mean = 0.0;
                inner.for_each(&mut x, |x, w| mean += w * f.partial(u, x));
                let v = w_outer * mean * kernel_part;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(NormError::NonFiniteSample { subset: u, x })
                }
            })
            .collect();
        let mut sum = 0.0;
        for r in rows {
            sum += r?;
        }
        total += sum / gamma_u;
    }
    let value = f.value(y);
    Ok(ReproducingCheck {
        value,
        inner_product: total,
        residual: (value - total).abs() / value.abs().max(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal;
    use crate::weights::{RhoFamily, WeightPair};
    use std::f64::consts::PI;

    fn ctx1(alpha: f64, gamma: f64) -> KernelContext {
        KernelContext::one_dim(WeightPair::gaussian(alpha).unwrap(), gamma).unwrap()
    }

    #[test]
    fn constant_function_has_unit_norms() {
        let f = SmoothTestFunction::constant(2, 1.0).unwrap();
        let w = WeightParams::product(vec![0.3, 2.0]).unwrap();
        let ctx = KernelContext::new(vec![WeightPair::gaussian(4.0).unwrap(); 2], w).unwrap();
        let r = norms(&f, &ctx, &NormConfig::default()).unwrap();
        assert!((r.w_norm_sq - 1.0).abs() < 1e-13);
        assert!((r.h_norm_sq - 1.0).abs() < 1e-13);
        let a = audit_equivalence(&f, &ctx, &NormConfig::default()).unwrap();
        assert!((a.ratio - 1.0).abs() < 1e-13 && a.lower_ok && a.upper_ok);
    }

    #[test]
    fn linear_function_in_one_dimension() {
        let f = SmoothTestFunction::one_dim(|x| x, |_| 1.0).unwrap();
        for (alpha, gamma) in [(4.0, 1.0), (2.0, 0.5)] {
            let ctx = ctx1(alpha, gamma);
            let r = norms(&f, &ctx, &NormConfig::default()).unwrap();
            let psi_mass = (2.0 * PI * alpha).sqrt();
            assert!((r.w_norm_sq - psi_mass / gamma).abs() < 1e-12);
            assert!((r.h_norm_sq - (1.0 + psi_mass / gamma)).abs() < 1e-12);
        }
        let a = audit_equivalence(&f, &ctx1(4.0, 1.0), &NormConfig::default()).unwrap();
        let s = (8.0 * PI).sqrt();
        assert!((a.ratio - (1.0 + s) / s).abs() < 1e-12);
        let c = WeightPair::gaussian(4.0).unwrap().compute_c().unwrap();
        assert!((a.bound - (1.0 + c)).abs() < 1e-14);
        assert!(a.lower_ok && a.upper_ok);
    }

    #[test]
    fn constant_psi_flags_a_non_decaying_derivative() {
        let f = SmoothTestFunction::one_dim(|x| x, |_| 1.0).unwrap();
        let pair = WeightPair::new(RhoFamily::GaussianStd, PsiFamily::Constant { c: 1.0 }).unwrap();
        let ctx = KernelContext::one_dim(pair, 1.0).unwrap();
        assert!(matches!(
            norms(&f, &ctx, &NormConfig::default()),
            Err(NormError::Divergent { coordinate: 0, .. })
        ));
    }

    #[test]
    fn product_of_coordinates_keeps_only_the_full_term() {
        let partials: Vec<Partial> = vec![
            Box::new(|x| x[0] * x[1]),
            Box::new(|x| x[1]),
            Box::new(|x| x[0]),
            Box::new(|_| 1.0),
        ];
        let f = SmoothTestFunction::new(2, partials).unwrap();
        let w = WeightParams::product(vec![0.5, 0.25]).unwrap();
        let ctx = KernelContext::new(
            vec![WeightPair::gaussian(4.0).unwrap(), WeightPair::gaussian(1.5).unwrap()],
            w,
        )
        .unwrap();
        let r = norms(&f, &ctx, &NormConfig::default()).unwrap();
        let expected = (2.0 * PI * 4.0).sqrt() * (2.0 * PI * 1.5).sqrt() / 0.125;
        assert!((r.w_norm_sq - expected).abs() < 1e-10 * expected);
        for (u, t) in &r.terms {
            if *u != Subset::full(2) {
                assert!(t.w.abs() < 1e-20, "{u}: {t:?}");
            }
        }
    }

    #[test]
    fn inconsistent_partials_are_rejected() {
        let bad = SmoothTestFunction::one_dim(|x| x * x, |x| x);
        assert!(matches!(bad, Err(NormError::InconsistentDerivative { .. })));
        let wrong = SmoothTestFunction::new(2, vec![Box::new(|_| 0.0)]);
        assert!(matches!(wrong, Err(NormError::WrongPartialCount { expected: 4, got: 1 })));
        assert!(matches!(
            SmoothTestFunction::constant(5, 1.0),
            Err(NormError::DimensionTooLarge(5))
        ));
    }

    #[test]
    fn reproducing_constant_and_cdf() {
        let ctx = ctx1(4.0, 1.0);
        let one = SmoothTestFunction::constant(1, 1.0).unwrap();
        let r = reproducing_check(&one, &ctx, &[0.7], &NormConfig::default()).unwrap();
        assert!(r.residual < 1e-8, "{r:?}");
        let cdf = SmoothTestFunction::one_dim(normal::cdf, normal::pdf).unwrap();
        for y in [-1.0, 0.0, 2.0] {
            let r = reproducing_check(&cdf, &ctx, &[y], &NormConfig::default()).unwrap();
            assert!(r.residual <= 1e-6, "y={y}: {r:?}");
        }
    }

    #[test]
    fn reproducing_in_two_dimensions() {
        let partials: Vec<Partial> = vec![
            Box::new(|x| x[0].sin() * (-x[1] * x[1] / 8.0).exp()),
            Box::new(|x| x[0].cos() * (-x[1] * x[1] / 8.0).exp()),
            Box::new(|x| -x[0].sin() * x[1] / 4.0 * (-x[1] * x[1] / 8.0).exp()),
            Box::new(|x| -x[0].cos() * x[1] / 4.0 * (-x[1] * x[1] / 8.0).exp()),
        ];
        let f = SmoothTestFunction::new(2, partials).unwrap();
        let w = WeightParams::product(vec![1.0, 0.5]).unwrap();
        let ctx = KernelContext::new(vec![WeightPair::gaussian(4.0).unwrap(); 2], w).unwrap();
        for y in [[0.4, -1.1], [-2.0, 0.3], [1.3, 2.2]] {
            let r = reproducing_check(&f, &ctx, &y, &NormConfig::default()).unwrap();
            assert!(r.residual <= 1e-5, "y={y:?}: {r:?}");
        }
    }
}
