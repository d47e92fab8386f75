//! f = 1/√ρ with ψ = exp(-3x²/4): the W norm settles as the domain grows
//! while the truncated L²_ρ norm is exactly 2R, so f lies in W but not in H.

use anova_qmc::fixtures::inverse_sqrt_density;
use anova_qmc::kernel::{KernelContext, WeightParams};
use anova_qmc::norms::divergence_profile;
use anova_qmc::weights::WeightPair;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pair = WeightPair::gaussian(2.0 / 3.0)?;
    let ctx = KernelContext::new(vec![pair], WeightParams::product(vec![1.0])?)?;
    let f = inverse_sqrt_density()?;
    println!("{:>4} {:>16} {:>16} {:>16}", "R", "|f|_W^2", "|f|_L2rho^2", "|f|_H^2");
    for t in divergence_profile(&f, &ctx)? {
        println!("{:>4} {:>16.12} {:>16.10} {:>16.10}", t.radius, t.w_norm_sq, t.l2_rho_sq, t.h_norm_sq);
    }
    Ok(())
}
