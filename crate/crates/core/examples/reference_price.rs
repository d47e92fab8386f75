//! Regenerates the stored arithmetic reference price:
//! `cargo run --release --example reference_price > data/reference_prices.csv`

use anova_qmc::option::{price_qmc_preint, reference_config, reference_row, AsianOptionSpec, REFERENCE_HEADER};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = reference_config();
    println!(
        "# discounted arithmetic Asian call prices, shifted lattice + preintegration, N={}, m={}, seed {}",
        cfg.n, cfg.m, cfg.seed
    );
    println!("{REFERENCE_HEADER}");
    let spec = AsianOptionSpec::default();
    let report = price_qmc_preint(&spec, &cfg)?;
    println!("{}", reference_row(&spec, &report));
    Ok(())
}
