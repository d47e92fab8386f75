//! The one-dimensional kernel η: zero ρ-mean in each argument, derivative
//! energy equal to the diagonal, and ∫η(x,x)ρ(x)dx = C.

use anova_qmc::kernel::{KernelContext, WeightParams};
use anova_qmc::weights::WeightPair;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pair = WeightPair::gaussian(4.0)?;
    let ctx = KernelContext::new(vec![pair; 2], WeightParams::product(vec![1.0, 0.5])?)?;
    println!("{:>6} {:>12} {:>14} {:>14}", "y", "∫η(·,y)ρ", "∫(∂η)²ψ", "η(y,y)");
    for y in [-3.0, -1.0, 0.0, 0.5, 2.5] {
        println!(
            "{y:>6} {:>12.2e} {:>14.10} {:>14.10}",
            ctx.eta_rho_integral(0, y)?,
            ctx.eta_dx_energy(0, y)?,
            ctx.eta(0, y, y)?
        );
    }
    let c = ctx.c_constants()?;
    println!("C = {:.12}, ∫η(x,x)ρ = {:.12}", c[0], ctx.diagonal_integral(0)?);
    println!("∫K(x,y)ρ(x)dx at y=(0.3,-1.2): {:.12}", ctx.kernel_rho_integral(&[0.3, -1.2])?);
    println!("embedding constant ∏(1+γ_j C) = {:.12}", ctx.embed_constant()?);
    Ok(())
}
