//! Frequency profile of a solution for a Lipschitz field, with the
//! almost-monotonicity constant and the H-derivative identity.
use freqlab::frequency::{almgren_frequency, doubling_index, geometric_radii, verify_almost_monotonicity, verify_h_identity};
use freqlab::{Arity, BoundaryData, FieldConfig, PolarGrid, Problem, SolveOptions};

fn main() -> freqlab::Result<()> {
    // |A − I| ≤ 0.1 and |∇A| ≤ 0.2.
    let (m, delta) = (0.2, 0.1);
    let f = FieldConfig::new(Arity::Anisotropic, "lipschitz_sine", &[("delta", delta), ("k", 2.0)], 0).build()?;
    let g = PolarGrid::new(128, 128, 1.0)?;
    let u = Problem::new(&f, &g, SolveOptions::default())?.solve_data(&BoundaryData::random(4, 7))?;
    let profile = almgren_frequency(&u, &f, &geometric_radii(0.1, 0.8, 8))?;
    print!("{}", profile.to_csv());
    let mono = verify_almost_monotonicity(&profile, m, delta);
    let ident = verify_h_identity(&u, &f, &geometric_radii(0.2, 0.8, 8), m, delta)?;
    println!("fitted C = {:.4}, violations {:?}", mono.fitted_c, mono.violations);
    println!("sup |e(r)|/(M + delta/r) = {:.4}", ident.sup_normalized.unwrap_or(f64::NAN));
    println!("doubling index at r = 0.8: {:.4}", doubling_index(&u, 0.8)?);
    Ok(())
}
