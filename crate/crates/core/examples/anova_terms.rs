//! ANOVA decomposition of a two-dimensional function: each term, its W norm,
//! and the reconstruction at a point.

use anova_qmc::anova::{anova_audit, decompose, AnovaConfig};
use anova_qmc::fixtures::PolyGaussian;
use anova_qmc::kernel::{KernelContext, WeightParams};
use anova_qmc::norms::MixedPartials;
use anova_qmc::weights::WeightPair;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pair = WeightPair::gaussian(4.0)?;
    let ctx = KernelContext::new(vec![pair; 2], WeightParams::product(vec![1.0, 0.5])?)?;
    let f = PolyGaussian::random(2, &mut ChaCha20Rng::seed_from_u64(7));
    let cfg = AnovaConfig::default();
    let x = [0.7, -0.3];
    let terms = decompose(&f, &ctx, &cfg)?;
    for t in &terms {
        println!("f_{} (x) = {:+.12}", t.subset(), t.value(&x));
    }
    let sum: f64 = terms.iter().map(|t| t.value(&x)).sum();
    println!("sum     = {sum:+.12}\nf(x)    = {:+.12}", f.value(&x));
    let audit = anova_audit(&f, &ctx, &cfg, &[x.to_vec()])?;
    for (u, n) in &audit.term_norms {
        println!("|f_{u}|_W^2 = {n:.10}");
    }
    println!(
        "total {:.10}, orthogonality {:.1e}, parseval {:.1e}",
        audit.total_norm_sq, audit.orthogonality_error, audit.parseval_error
    );
    Ok(())
}
