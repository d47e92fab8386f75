//! Randomly shifted lattice rule against Monte Carlo on a smooth integrand
//! over ℝ⁶ with the normal density: E[∏(1 + x_j/j²)·exp(-x_j²/(2j²))].

use anova_qmc::lattice::{default_vector, mc_estimate, qmc_estimate, LatticeError};

fn main() -> Result<(), LatticeError> {
    let d = 6;
    let f = |x: &[f64]| {
        x.iter()
            .enumerate()
            .map(|(j, &v)| {
                let s = ((j + 1) * (j + 1)) as f64;
                (1.0 + v / s) * (-v * v / (2.0 * s)).exp()
            })
            .product::<f64>()
    };
    let exact: f64 = (1..=d).map(|j| { let s = (j * j) as f64; (s / (s + 1.0)).sqrt() }).product();
    println!("exact {exact:.12}");
    for k in [10, 12, 14] {
        let n = 1u64 << k;
        let z = default_vector(n, d)?;
        let q = qmc_estimate(f, &z, 16, 0)?;
        let m = mc_estimate(f, d, n, 16, 0)?;
        println!(
            "N=2^{k}: lattice {:.12} ± {:.1e}   mc {:.12} ± {:.1e}",
            q.mean, q.rms_error, m.mean, m.rms_error
        );
    }
    Ok(())
}
