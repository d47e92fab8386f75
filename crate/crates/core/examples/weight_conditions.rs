//! Classify Gaussian-decay weights ψ(x) = exp(-x²/(2α)) against the standard
//! normal density: the weak condition needs α ≥ 1/2, the strong one α > 1.

use anova_qmc::weights::{WeightError, WeightPair};

fn main() -> Result<(), WeightError> {
    println!("{:>6} {:>6} {:>7} {:>12}  numeric", "alpha", "weak", "strong", "C");
    for alpha in [0.4, 0.5, 0.9, 1.0, 1.1, 2.0, 4.0] {
        let pair = WeightPair::gaussian(alpha)?;
        let report = pair.check_conditions()?;
        let numeric = match pair.classify_numerically() {
            Ok(r) => format!("weak={} strong={}", r.weak_holds, r.strong_holds),
            Err(WeightError::ClassificationInconclusive { .. }) => "inconclusive".to_string(),
            Err(e) => return Err(e),
        };
        let c = report.c_constant.map_or("-".to_string(), |c| format!("{c:.10}"));
        println!("{alpha:>6} {:>6} {:>7} {c:>12}  {numeric}", report.weak_holds, report.strong_holds);
    }
    Ok(())
}
