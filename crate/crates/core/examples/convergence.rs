//! RMS error against N for Monte Carlo and lattice + preintegration on the
//! arithmetic Asian call, with least-squares rates (smallest N left out).

use anova_qmc::cli::fit_rate;
use anova_qmc::option::{price, AsianOptionSpec, PricingMethod, RuleConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = AsianOptionSpec::default();
    let ns: Vec<u64> = (7..=13).map(|k| 1u64 << k).collect();
    for method in [PricingMethod::Mc, PricingMethod::QmcPreint] {
        let mut rms = Vec::new();
        for &n in &ns {
            let r = price(&spec, method, &RuleConfig { n, ..RuleConfig::default() })?;
            println!("{method:>10} N={n:>5}: {:.8} ± {:.2e}", r.price, r.rms_error);
            rms.push(r.rms_error);
        }
        let rate = fit_rate(&ns, &rms)?;
        println!("{method:>10} slope {:.3} ± {:.3}\n", rate.slope, rate.stderr);
    }
    Ok(())
}
