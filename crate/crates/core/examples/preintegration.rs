//! Preintegration of max(x₁ + x₂, 0): integrating out x₁ at the kink gives
//! the smooth function ρ(x₂) + x₂Φ(x₂), whose mean is 1/√π.

use anova_qmc::lattice::korobov_search;
use anova_qmc::normal;
use anova_qmc::preint::{find_kink, qmc_preintegrated, FnKink, PreintegratedFunction};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let phi = FnKink::new(2, |x: &[f64]| x[0] + x[1], |_: &[f64]| 1.0);
    println!("kink at x2 = 0.75: {:?}", find_kink(&phi, &[0.75], 1e-12)?);
    let pf = PreintegratedFunction::new(phi);
    for x2 in [-2.0, 0.0, 1.5] {
        let exact = normal::pdf(x2) + x2 * normal::cdf(x2);
        println!("P1 f({x2:+}) = {:.14}  closed form {exact:.14}", pf.eval(&[x2])?);
    }
    let z = korobov_search(1 << 10, 1)?;
    let run = qmc_preintegrated(&pf, &z, 16, 0)?;
    println!(
        "integral {:.12} ± {:.1e}, 1/sqrt(pi) = {:.12}",
        run.mean,
        run.rms_error,
        1.0 / std::f64::consts::PI.sqrt()
    );
    Ok(())
}
