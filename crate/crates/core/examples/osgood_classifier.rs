//! Classifies a few moduli of continuity by the Osgood condition and checks
//! the growth hypotheses on ψ and φ.
use freqlab::modulus::{check_phi_integrable, check_submultiplicative_psi, classify_osgood, Modulus, DEFAULT_DEPTH};

fn main() -> freqlab::Result<()> {
    let moduli = [Modulus::linear(), Modulus::log_power(1.0)?, Modulus::log_power(2.0)?, Modulus::power(0.5)?];
    for m in &moduli {
        let c = classify_osgood(m, DEFAULT_DEPTH)?;
        let psi = check_submultiplicative_psi(m, 3.0, 64)?;
        let phi = check_phi_integrable(m);
        println!(
            "{:<16} verdict {:?} (numeric {:?})  psi submult. C=3: {}  int phi: {:.4} ({})",
            m.label(),
            c.verdict,
            c.numeric,
            psi.holds,
            phi.value_or_bound,
            if phi.finite { "finite" } else { "lower bound" }
        );
    }
    Ok(())
}
