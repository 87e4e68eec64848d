//! Solves the Dirichlet problem on the unit disk: a convergence check against
//! r^k cos(kθ) for the Laplacian, then a random smooth anisotropic field.
use freqlab::{Arity, BoundaryData, CoefficientField, FieldConfig, PolarGrid, Problem, SolveOptions};

fn main() -> freqlab::Result<()> {
    let id = CoefficientField::identity(2);
    let mut last = f64::NAN;
    for n in [32, 64, 128] {
        let g = PolarGrid::new(n, n, 1.0)?;
        let u = Problem::new(&id, &g, SolveOptions::default())?.solve_data(&BoundaryData::harmonic(3))?;
        let mut err = 0.0f64;
        for i in 0..g.n_r {
            for j in 0..g.n_theta {
                err = err.max((u.ring(i)[j] - g.radius(i).powi(3) * (3.0 * g.theta(j)).cos()).abs());
            }
        }
        println!("N = {n:<4} max error {err:.3e}  ratio {:.2}  PCG iterations {}", last / err, u.stats.iterations);
        last = err;
    }

    let f = FieldConfig::new(Arity::Anisotropic, "random_smooth", &[], 7).build()?;
    let g = PolarGrid::new(96, 96, 1.0)?;
    let u = Problem::new(&f, &g, SolveOptions::default())?.solve_data(&BoundaryData::random(4, 1))?;
    for r in [0.25, 0.5, 0.75] {
        println!(
            "r = {r}: D(r) = {:.5} (flux) {:.5} (volume)  H(r) = {:.5}",
            u.dirichlet_energy(r)?,
            u.volume_energy(r)?,
            u.own_boundary_mass(r)?
        );
    }
    Ok(())
}
