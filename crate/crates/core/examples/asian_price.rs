//! Price the arithmetic and geometric Asian calls with all three path
//! constructions and all three estimators.

use anova_qmc::option::{
    geometric_closed_form, price, price_reference, AsianOptionSpec, Averaging, Factorization, PricingMethod,
    RuleConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RuleConfig::default();
    let geometric = AsianOptionSpec { averaging: Averaging::Geometric, ..AsianOptionSpec::default() };
    println!("geometric closed form {:.10}", geometric_closed_form(&geometric)?);
    println!("arithmetic reference  {:.10}", price_reference(&AsianOptionSpec::default())?.price);
    for fact in [Factorization::Standard, Factorization::BrownianBridge, Factorization::Pca] {
        for method in [PricingMethod::Mc, PricingMethod::Qmc, PricingMethod::QmcPreint] {
            let spec = AsianOptionSpec { factorization: fact, ..AsianOptionSpec::default() };
            let r = price(&spec, method, &cfg)?;
            println!("{fact:>4} {method:>10}: {:.6} ± {:.1e}", r.price, r.rms_error);
        }
    }
    Ok(())
}
