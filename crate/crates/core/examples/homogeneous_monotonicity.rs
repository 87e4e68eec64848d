//! For a 0-homogeneous isotropic coefficient the scalar-weighted frequency is
//! nondecreasing; this measures the largest discrete decrease on two grids.
use freqlab::frequency::{ring_radii, two_scale_frequency, verify_homogeneous_monotonicity, MONOTONICITY_TOLERANCE};
use freqlab::{Arity, BoundaryData, FieldConfig, PolarGrid, Problem, SolveOptions};

fn main() -> freqlab::Result<()> {
    let a = FieldConfig::new(Arity::Isotropic, "angular_sine", &[("amplitude", 0.4)], 0).build()?;
    for n in [64, 128] {
        let g = PolarGrid::new(n, 2 * n, 1.0)?;
        let u = Problem::new(&a, &g, SolveOptions::default())?.solve_data(&BoundaryData::random(4, 3))?;
        let rep = verify_homogeneous_monotonicity(&u, &a, &ring_radii(&u, 0.1, 0.9), MONOTONICITY_TOLERANCE)?;
        println!(
            "grid {}x{}: monotone {} (max decrease {:.2e}), h identity residual {:.2e}, two-scale N(0.8, 0.2) = {:.4}",
            g.n_r,
            g.n_theta,
            rep.monotone,
            rep.max_violation,
            rep.h_identity_residual,
            two_scale_frequency(&u, &a, 0.8, 0.2)?
        );
    }
    Ok(())
}
