//! ‖f‖²_W ≤ ‖f‖²_H ≤ B ‖f‖²_W for random smooth functions in three
//! dimensions, and the reproducing property of the kernel.

use anova_qmc::fixtures::PolyGaussian;
use anova_qmc::kernel::{KernelContext, WeightParams};
use anova_qmc::norms::{audit_equivalence, reproducing_check, NormConfig};
use anova_qmc::weights::WeightPair;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pair = WeightPair::gaussian(4.0)?;
    let ctx = KernelContext::new(vec![pair; 3], WeightParams::product(vec![1.0, 0.5, 0.25])?)?;
    let cfg = NormConfig::default();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    println!("bound B = {:.6}", ctx.embed_constant()?);
    for id in 0..5 {
        let f = PolyGaussian::random(3, &mut rng);
        let a = audit_equivalence(&f, &ctx, &cfg)?;
        println!(
            "f{id}: |f|_W^2 = {:>10.5}  |f|_H^2 = {:>10.5}  ratio {:.4}  ok={}",
            a.w_norm_sq,
            a.h_norm_sq,
            a.ratio,
            a.lower_ok && a.upper_ok
        );
    }
    let f = PolyGaussian::random(3, &mut rng);
    let r = reproducing_check(&f, &ctx, &[0.4, -1.1, 2.0], &cfg)?;
    println!("f(y) = {:.12}, <f, K(.,y)>_W = {:.12}", r.value, r.inner_product);
    Ok(())
}
