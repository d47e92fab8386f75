//! The ANOVA decomposition `f = Σ_u f_u` with
//! `f_u(x_u) = Σ_{v⊆u} (-1)^{|u|-|v|} ∫ f ρ_{D∖v} dx_{D∖v}`,
//! and checks of its reconstruction, annihilation and orthogonality
//! properties in the `W` inner product.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::kernel::KernelContext;
use crate::norms::{self, MixedPartials, NormConfig, NormError, Tensor, MAX_NORM_DIM};
use crate::quadrature::Rule;
use crate::subset::Subset;

/// Node counts for the ANOVA integrals and the projections built on them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnovaConfig {
    /// Nodes of the `ρ` rules inside each `f_u`.
    pub term_nodes: usize,
    /// Rules of the outer `W` inner products.
    pub norm: NormConfig,
}

impl Default for AnovaConfig {
    fn default() -> Self {
        Self {
            term_nodes: 24,
            norm: NormConfig {
                rho_nodes: 20,
                psi_nodes: 20,
            },
        }
    }
}

/// One ANOVA term `f_u`, evaluated by tensor quadrature on demand.
pub struct AnovaTerm<'a, F: MixedPartials + ?Sized> {
    f: &'a F,
    u: Subset,
    rho: Vec<Rule>,
}

impl<'a, F: MixedPartials + ?Sized> AnovaTerm<'a, F> {
    pub fn subset(&self) -> Subset {
        self.u
    }

    /// `∫ ∂^w f ρ_{D∖v} dx_{D∖v}` at `x` (only `x_v` is read).
    fn average(&self, w: Subset, v: Subset, x: &[f64]) -> f64 {
        let coords: Vec<usize> = self.f.support().minus(v).indices().collect();
        let rules = coords.iter().map(|&j| &self.rho[j]).collect();
        let mut y = x.to_vec();
        let mut sum = 0.0;
        Tensor::new(coords, rules).for_each(&mut y, |y, wt| sum += wt * self.f.partial(w, y));
        sum
    }
}

impl<F: MixedPartials + ?Sized> MixedPartials for AnovaTerm<'_, F> {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    /// `∂^w f_u = Σ_{w⊆v⊆u} (-1)^{|u|-|v|} ∫ ∂^w f ρ_{D∖v}` for `w ⊆ u`,
    /// zero otherwise.
    fn partial(&self, w: Subset, x: &[f64]) -> f64 {
        if !w.is_subset_of(self.u) {
            return 0.0;
        }
        self.u
            .minus(w)
            .subsets()
            .map(|s| {
                let v = s.union(w);
                let sign = if (self.u.len() - v.len()) % 2 == 0 { 1.0 } else { -1.0 };
                sign * self.average(w, v, x)
            })
            .sum()
    }

    fn support(&self) -> Subset {
        self.u
    }
}

pub fn anova_term<'a, F: MixedPartials + ?Sized>(
    f: &'a F,
    ctx: &KernelContext,
    u: Subset,
    cfg: &AnovaConfig,
) -> Result<AnovaTerm<'a, F>, NormError> {
    if f.dim() > MAX_NORM_DIM {
        return Err(NormError::DimensionTooLarge(f.dim()));
    }
    if f.dim() != ctx.dim() {
        return Err(crate::kernel::KernelError::DimensionMismatch {
            expected: ctx.dim(),
            got: f.dim(),
        }
        .into());
    }
    Ok(AnovaTerm {
        f,
        u,
        rho: ctx.pairs().iter().map(|p| p.rho_rule(cfg.term_nodes)).collect(),
    })
}

/// Every term `f_u`, `u ⊆ D`.
pub fn decompose<'a, F: MixedPartials + ?Sized>(
    f: &'a F,
    ctx: &KernelContext,
    cfg: &AnovaConfig,
) -> Result<Vec<AnovaTerm<'a, F>>, NormError> {
    Subset::all(f.dim()).map(|u| anova_term(f, ctx, u, cfg)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnovaAudit {
    /// `max |Σ_u f_u(x) - f(x)|` over the probe points.
    pub reconstruction_error: f64,
    /// `max |∫ f_u ρ_j dx_j|` over `j ∈ u ≠ ∅` and the probe points.
    pub annihilation_error: f64,
    /// `max_{u≠v} |⟨f_u, f_v⟩_W|`.
    pub orthogonality_error: f64,
    /// `|Σ_u ‖f_u‖²_W - ‖f‖²_W| / ‖f‖²_W`.
    pub parseval_error: f64,
    pub term_norms: BTreeMap<Subset, f64>,
    pub total_norm_sq: f64,
}

/// `∫ ∂^w g ρ_{-w}` on the `ψ_w` grid of the norm rules.
fn projection<G: MixedPartials + ?Sized>(g: &G, w: Subset, rho: &[Rule], psi: &[Rule]) -> Vec<f64> {
    let d = g.dim();
    let outer = Tensor::new(w.indices().collect(), w.indices().map(|j| &psi[j]).collect());
    let inner_coords: Vec<usize> = g.support().minus(w).indices().collect();
    let inner = Tensor::new(inner_coords.clone(), inner_coords.iter().map(|&j| &rho[j]).collect());
    let inner_points = inner.points();
    outer
        .points()
        .iter()
        .map(|(xw, _)| {
            let mut base = vec![0.0; d];
            for (i, j) in w.indices().enumerate() {
                base[j] = xw[i];
            }
            let values: Vec<f64> = inner_points
                .par_iter()
                .map(|(xi, wt)| {
                    let mut x = base.clone();
                    for (k, &j) in inner_coords.iter().enumerate() {
                        x[j] = xi[k];
                    }
                    wt * g.partial(w, &x)
                })
                .collect();
            values.iter().sum()
        })
        .collect()
}

/// Reconstruction, annihilation, orthogonality and Parseval checks at
/// `d <= 3`, with `points` used for the pointwise ones.
pub fn anova_audit<F: MixedPartials + ?Sized>(
    f: &F,
    ctx: &KernelContext,
    cfg: &AnovaConfig,
    points: &[Vec<f64>],
) -> Result<AnovaAudit, NormError> {
    let d = f.dim();
    if d > 3 {
        return Err(NormError::DimensionTooLarge(d));
    }
    let terms = decompose(f, ctx, cfg)?;

    let mut reconstruction_error: f64 = 0.0;
    let mut annihilation_error: f64 = 0.0;
    let check_rules: Vec<Rule> = ctx.pairs().iter().map(|p| p.rho_rule(cfg.term_nodes + 8)).collect();
    for x in points {
        let sum: f64 = terms.iter().map(|t| t.value(x)).sum();
        reconstruction_error = reconstruction_error.max((sum - f.value(x)).abs());
        for t in &terms {
            for j in t.subset().indices() {
                let integral = check_rules[j].integrate(|s| {
                    let mut y = x.clone();
                    y[j] = s;
                    t.value(&y)
                });
                annihilation_error = annihilation_error.max(integral.abs());
            }
        }
    }

    let rho: Vec<Rule> = ctx.pairs().iter().map(|p| p.rho_rule(cfg.norm.rho_nodes)).collect();
    let psi: Vec<Rule> = ctx.pairs().iter().map(|p| p.psi_rule(cfg.norm.psi_nodes)).collect();
    let weights = ctx.weights();
    // proj[u][w] for w ⊆ u; other projections vanish identically.
    let mut proj: BTreeMap<(Subset, Subset), Vec<f64>> = BTreeMap::new();
    for t in &terms {
        for w in t.subset().subsets() {
            proj.insert((t.subset(), w), projection(t, w, &rho, &psi));
        }
    }
    let outer_weights: BTreeMap<Subset, Vec<f64>> = Subset::all(d)
        .map(|w| {
            let outer = Tensor::new(w.indices().collect(), w.indices().map(|j| &psi[j]).collect());
            (w, outer.points().into_iter().map(|p| p.1).collect())
        })
        .collect();
    let inner = |u: Subset, v: Subset| -> Result<f64, NormError> {
        let mut total = 0.0;
        for w in u.union(v).subsets().filter(|w| w.is_subset_of(u) && w.is_subset_of(v)) {
            let (a, b) = (&proj[&(u, w)], &proj[&(v, w)]);
            let s: f64 = outer_weights[&w].iter().zip(a).zip(b).map(|((wt, a), b)| wt * a * b).sum();
            total += s / weights.gamma(w)?;
        }
        Ok(total)
    };

    let mut term_norms = BTreeMap::new();
    let mut orthogonality_error: f64 = 0.0;
    for u in Subset::all(d) {
        term_norms.insert(u, inner(u, u)?);
        for v in Subset::all(d).filter(|v| v.bits() > u.bits()) {
            orthogonality_error = orthogonality_error.max(inner(u, v)?.abs());
        }
    }
    let total_norm_sq = norms::norms(f, ctx, &cfg.norm)?.w_norm_sq;
    let parts: f64 = term_norms.values().sum();
    Ok(AnovaAudit {
        reconstruction_error,
        annihilation_error,
        orthogonality_error,
        parseval_error: (parts - total_norm_sq).abs() / total_norm_sq,
        term_norms,
        total_norm_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::PolyGaussian;
    use crate::kernel::WeightParams;
    use crate::norms::{Partial, SmoothTestFunction};
    use crate::weights::WeightPair;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn ctx(d: usize) -> KernelContext {
        let gammas = (0..d).map(|j| 1.0 / (j + 1) as f64).collect();
        KernelContext::new(vec![WeightPair::gaussian(4.0).unwrap(); d], WeightParams::product(gammas).unwrap()).unwrap()
    }

    #[test]
    fn product_of_coordinates() {
        let partials: Vec<Partial> = vec![
            Box::new(|x| x[0] * x[1]),
            Box::new(|x| x[1]),
            Box::new(|x| x[0]),
            Box::new(|_| 1.0),
        ];
        let f = SmoothTestFunction::new(2, partials).unwrap();
        let ctx = ctx(2);
        let cfg = AnovaConfig::default();
        let x = [0.7, -1.3];
        for u in Subset::all(2) {
            let t = anova_term(&f, &ctx, u, &cfg).unwrap();
            let expected = if u == Subset::full(2) { x[0] * x[1] } else { 0.0 };
            assert!((t.value(&x) - expected).abs() < 1e-13, "{u}");
        }
    }

    #[test]
    fn constant_and_square() {
        let c = SmoothTestFunction::constant(2, 2.5).unwrap();
        let ctx = ctx(2);
        let cfg = AnovaConfig::default();
        let x = [0.4, 1.9];
        for u in Subset::all(2) {
            let v = anova_term(&c, &ctx, u, &cfg).unwrap().value(&x);
            assert!((v - if u.is_empty() { 2.5 } else { 0.0 }).abs() < 1e-13);
        }
        let partials: Vec<Partial> = vec![
            Box::new(|x| x[0] * x[0]),
            Box::new(|x| 2.0 * x[0]),
            Box::new(|_| 0.0),
            Box::new(|_| 0.0),
        ];
        let sq = SmoothTestFunction::new(2, partials).unwrap();
        let expected = [1.0, x[0] * x[0] - 1.0, 0.0, 0.0];
        for u in Subset::all(2) {
            let v = anova_term(&sq, &ctx, u, &cfg).unwrap().value(&x);
            assert!((v - expected[u.bits() as usize]).abs() < 1e-12, "{u}: {v}");
        }
    }

    #[test]
    fn random_fixture_decomposes_orthogonally() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for d in 1..=2 {
            let f = PolyGaussian::random(d, &mut rng);
            let ctx = ctx(d);
            let points = norms::probe_points(d);
            let a = anova_audit(&f, &ctx, &AnovaConfig::default(), &points).unwrap();
            assert!(a.reconstruction_error < 1e-10, "{a:?}");
            assert!(a.annihilation_error < 1e-10, "{a:?}");
            assert!(a.orthogonality_error < 1e-9, "{a:?}");
            assert!(a.parseval_error < 1e-9, "{a:?}");
        }
    }
}
