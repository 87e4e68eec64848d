//! Runs the discrete frequency cascade next to the continuous growth bound.
use freqlab::growth::{continuous_growth_bound, discrete_cascade, Forcing};
use freqlab::modulus::Modulus;

fn main() -> freqlab::Result<()> {
    for (m, n0) in [(Modulus::linear(), 2.0), (Modulus::log_power(1.0)?, 10.0), (Modulus::power(0.3)?, 50.0)] {
        let g = Forcing::phi(&m);
        let trace = discrete_cascade(&m, n0, &g, 1.0, 1e-6)?;
        let bound = continuous_growth_bound(&m, n0, &g, 1.0, 0.0)?;
        println!(
            "{:<16} N0 = {n0:<5} steps {:>8}  sup N = {:<12.4} {:?}  continuous bound {:?}",
            m.label(),
            trace.steps.len(),
            trace.sup(),
            trace.verdict,
            bound
        );
    }
    Ok(())
}
