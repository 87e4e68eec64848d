//! Dirichlet problems −div(A∇u) + V u = 0 in B_r, u = g on ∂B_r, on a log-polar grid.

pub mod assembly;
pub mod grid;
pub mod pcg;

use std::sync::{Arc, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use assembly::{EnergyForm, NodeSamples, Potential, Scheme};
pub use grid::PolarGrid;
pub use pcg::{PcgStats, Preconditioner};

use crate::coefficients::{CoefficientField, Point};
use crate::error::{domain, Error, Result};
use crate::io::{GridFile, GridLayout};

/// A single Fourier mode c·cos(mθ) + d·sin(mθ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierMode {
    pub degree: u32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

fn one() -> f64 {
    1.0
}

/// Dirichlet data g(θ) on the outer circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum BoundaryData {
    Constant { value: f64 },
    /// amplitude·cos(kθ − phase), the trace of amplitude·Re(e^{−i·phase}(x₁+ix₂)^k)/r^k.
    Harmonic {
        degree: u32,
        #[serde(default)]
        phase: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Modes { modes: Vec<FourierMode> },
    /// Standard normal coefficients on degrees 1..=max_degree (and 0 when asked).
    Random {
        max_degree: u32,
        seed: u64,
        #[serde(default)]
        include_constant: bool,
    },
}

impl BoundaryData {
    pub fn harmonic(degree: u32) -> Self {
        BoundaryData::Harmonic { degree, phase: 0.0, amplitude: 1.0 }
    }

    pub fn random(max_degree: u32, seed: u64) -> Self {
        BoundaryData::Random { max_degree, seed, include_constant: false }
    }

    /// The data as a list of Fourier modes.
    pub fn modes(&self) -> Vec<FourierMode> {
        match self {
            BoundaryData::Constant { value } => vec![FourierMode { degree: 0, cos: *value, sin: 0.0 }],
            BoundaryData::Harmonic { degree, phase, amplitude } => vec![FourierMode {
                degree: *degree,
                cos: amplitude * phase.cos(),
                sin: amplitude * phase.sin(),
            }],
            BoundaryData::Modes { modes } => modes.clone(),
            BoundaryData::Random { max_degree, seed, include_constant } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut out = Vec::new();
                for m in 0..=*max_degree {
                    let c: f64 = StandardNormal.sample(&mut rng);
                    let d: f64 = StandardNormal.sample(&mut rng);
                    if m > 0 || *include_constant {
                        out.push(FourierMode { degree: m, cos: c, sin: if m == 0 { 0.0 } else { d } });
                    }
                }
                out
            }
        }
    }

    pub fn value(&self, theta: f64) -> f64 {
        self.modes().iter().map(|m| m.cos * (m.degree as f64 * theta).cos() + m.sin * (m.degree as f64 * theta).sin()).sum()
    }

    /// Samples at the N_θ grid angles.
    pub fn sample(&self, n_theta: usize) -> Vec<f64> {
        let modes = self.modes();
        (0..n_theta)
            .map(|j| {
                let t = 2.0 * std::f64::consts::PI * j as f64 / n_theta as f64;
                modes.iter().map(|m| m.cos * (m.degree as f64 * t).cos() + m.sin * (m.degree as f64 * t).sin()).sum()
            })
            .collect()
    }

    /// The harmonic extension into B_r (the exact solution for A = I).
    pub fn harmonic_extension(&self, x: &Point, r: f64) -> f64 {
        let rho = (x[0] * x[0] + x[1] * x[1]).sqrt() / r;
        let t = x[1].atan2(x[0]);
        self.modes()
            .iter()
            .map(|m| {
                let k = m.degree as f64;
                rho.powi(m.degree as i32) * (m.cos * (k * t).cos() + m.sin * (k * t).sin())
            })
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub scheme: Scheme,
    pub preconditioner: Preconditioner,
    /// Relative residual target for PCG.
    pub tolerance: f64,
    /// Defaults to max(1000, 50·√n).
    pub max_iterations: Option<usize>,
    pub potential: Option<Potential>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            scheme: Scheme::Auto,
            preconditioner: Preconditioner::Separable,
            tolerance: 1e-10,
            max_iterations: None,
            potential: None,
        }
    }
}

/// Field, grid and operator assembled once; `solve` then takes any boundary data.
pub struct Problem {
    pub field: CoefficientField,
    pub samples: Arc<NodeSamples>,
    pub form: Arc<EnergyForm>,
    pub options: SolveOptions,
    matrix: assembly::Csr,
    pre: Box<dyn pcg::Precondition + Send + Sync>,
}

impl Problem {
    pub fn new(field: &CoefficientField, grid: &PolarGrid, options: SolveOptions) -> Result<Problem> {
        let samples = Arc::new(NodeSamples::sample(field, grid, options.potential.as_ref())?);
        let form = Arc::new(EnergyForm::build(&samples, options.scheme)?);
        let matrix = assembly::assemble_matrix(&form);
        let pre: Box<dyn pcg::Precondition + Send + Sync> = match options.preconditioner {
            Preconditioner::Separable => Box::new(pcg::Separable::new(&form)),
            Preconditioner::Jacobi => Box::new(pcg::Jacobi::new(&matrix)),
        };
        Ok(Problem { field: field.clone(), samples, form, options, matrix, pre })
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.form.grid
    }

    pub fn solve_data(&self, g: &BoundaryData) -> Result<DiscreteSolution> {
        self.solve(&g.sample(self.grid().n_theta))
    }

    /// Solves with outer-ring values `boundary` (one per grid angle).
    pub fn solve(&self, boundary: &[f64]) -> Result<DiscreteSolution> {
        let grid = self.grid();
        if boundary.len() != grid.n_theta {
            return domain(format!("expected {} boundary values, got {}", grid.n_theta, boundary.len()));
        }
        if boundary.iter().any(|v| !v.is_finite()) {
            return domain("boundary data must be finite");
        }
        let key = self.cache_key(boundary);
        if let Some((values, stats)) = key.as_deref().and_then(|k| cache_load(k, grid)) {
            return Ok(self.wrap(values, stats));
        }
        let n = self.matrix.n;
        let rhs = assembly::assemble_rhs(&self.form, boundary);
        let mut x = vec![0.0; n];
        let cap = self.options.max_iterations.unwrap_or_else(|| 1000.max((50.0 * (n as f64).sqrt()) as usize));
        let stats = pcg::pcg(&self.matrix, &rhs, &mut x, self.pre.as_ref(), self.options.tolerance, cap)?;
        x.extend_from_slice(boundary);
        if let Some(k) = key {
            cache_store(&k, grid, &x, &stats);
        }
        Ok(self.wrap(x, stats))
    }

    /// Wraps externally computed node values (centre first) as a solution of this problem's
    /// grid and field, so the energy and mass functionals of the field apply to them.
    pub fn solution_from_values(&self, values: Vec<f64>) -> Result<DiscreteSolution> {
        if values.len() != self.grid().node_count() {
            return domain(format!("expected {} node values, got {}", self.grid().node_count(), values.len()));
        }
        Ok(self.wrap(values, PcgStats { iterations: 0, relative_residual: 0.0 }))
    }

    fn wrap(&self, values: Vec<f64>, stats: PcgStats) -> DiscreteSolution {
        DiscreteSolution {
            grid: self.grid().clone(),
            values,
            field: self.field.clone(),
            samples: self.samples.clone(),
            form: self.form.clone(),
            stats,
            identity_form: Arc::new(OnceLock::new()),
        }
    }

    fn cache_key(&self, boundary: &[f64]) -> Option<String> {
        std::env::var_os("FREQLAB_CACHE")?;
        if self.options.potential.is_some() {
            return None;
        }
        let cfg = self.field.config.as_ref()?;
        let material = serde_json::json!({
            "field": cfg,
            "grid": self.grid(),
            "scheme": self.form.scheme,
            "tolerance": self.options.tolerance,
            "boundary": boundary.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        });
        Some(hex(&Sha256::digest(material.to_string().as_bytes())))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn cache_path(key: &str) -> Option<std::path::PathBuf> {
    std::env::var_os("FREQLAB_CACHE").map(|d| std::path::PathBuf::from(d).join(format!("{key}.fqlgrid")))
}

fn cache_load(key: &str, grid: &PolarGrid) -> Option<(Vec<f64>, PcgStats)> {
    let file = GridFile::read(&cache_path(key)?).ok()?;
    if file.shape != [grid.n_r, grid.n_theta] || file.extra.len() != 3 {
        return None;
    }
    let mut values = vec![file.extra[0]];
    values.extend_from_slice(&file.data);
    Some((values, PcgStats { iterations: file.extra[1] as usize, relative_residual: file.extra[2] }))
}

// A failed cache write only costs a recomputation later.
fn cache_store(key: &str, grid: &PolarGrid, values: &[f64], stats: &PcgStats) {
    if let Some(path) = cache_path(key) {
        let mut file = DiscreteSolution::grid_file(grid, values);
        file.extra.extend([stats.iterations as f64, stats.relative_residual]);
        let _ = file.write(&path);
    }
}

/// Solves −div(A∇u) = 0 in B_r with u = g on ∂B_r on a grid of B_r.
pub fn solve_dirichlet(field: &CoefficientField, r: f64, g: &BoundaryData, grid: &PolarGrid) -> Result<DiscreteSolution> {
    solve_dirichlet_with(field, r, g, grid, SolveOptions::default())
}

pub fn solve_dirichlet_with(
    field: &CoefficientField,
    r: f64,
    g: &BoundaryData,
    grid: &PolarGrid,
    options: SolveOptions,
) -> Result<DiscreteSolution> {
    if (grid.r_out - r).abs() > 1e-12 * r {
        return domain(format!("grid radius {} does not match the ball radius {r}", grid.r_out));
    }
    Problem::new(field, grid, options)?.solve_data(g)
}

/// Values and first derivatives of u on a circle |x| = r at the grid angles.
#[derive(Debug, Clone, PartialEq)]
pub struct RingSample {
    pub radius: f64,
    /// Position in ring-index units.
    pub index: f64,
    pub values: Vec<f64>,
    /// r·∂_r u.
    pub ds: Vec<f64>,
    /// ∂_θ u.
    pub dtheta: Vec<f64>,
    /// False when r is a grid ring.
    pub interpolated: bool,
}

/// A discrete solution with the grid and coefficient it was computed on.
#[derive(Clone)]
pub struct DiscreteSolution {
    pub grid: PolarGrid,
    /// Node values by id: centre first, then ring-major.
    pub values: Vec<f64>,
    pub field: CoefficientField,
    pub samples: Arc<NodeSamples>,
    pub form: Arc<EnergyForm>,
    pub stats: PcgStats,
    identity_form: Arc<OnceLock<EnergyForm>>,
}

impl std::fmt::Debug for DiscreteSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteSolution")
            .field("grid", &self.grid)
            .field("field", &self.field.label)
            .field("stats", &self.stats)
            .finish()
    }
}

fn periodic_derivative(v: &[f64], k: f64) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|j| {
            let at = |o: isize| v[((j as isize + o).rem_euclid(n as isize)) as usize];
            (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * k)
        })
        .collect()
}

impl DiscreteSolution {
    pub fn center(&self) -> f64 {
        self.values[0]
    }

    pub fn ring(&self, i: usize) -> &[f64] {
        let nt = self.grid.n_theta;
        &self.values[1 + i * nt..1 + (i + 1) * nt]
    }

    pub fn boundary_values(&self) -> &[f64] {
        self.ring(self.grid.n_r - 1)
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        if !self.grid.contains_radius(r) {
            return domain(format!("radius {r} outside the resolved range [{:.4e}, {}]", self.grid.r_in(), self.grid.r_out));
        }
        Ok(())
    }

    /// u, r∂_r u and ∂_θ u on |x| = r, using a seven-point stencil in log r.
    pub fn ring_at(&self, r: f64) -> Result<RingSample> {
        self.check_radius(r)?;
        let g = &self.grid;
        let x = g.fractional_index(r).clamp(0.0, (g.n_r - 1) as f64);
        let (start, wv, wd) = grid::radial_stencil(g, x);
        let nt = g.n_theta;
        let mut values = vec![0.0; nt];
        let mut ds = vec![0.0; nt];
        for (k, (a, b)) in wv.iter().zip(&wd).enumerate() {
            let ring = self.ring(start + k);
            for j in 0..nt {
                values[j] += a * ring[j];
                ds[j] += b * ring[j];
            }
        }
        let dtheta = periodic_derivative(&values, g.dtheta());
        Ok(RingSample { radius: r, index: x, values, ds, dtheta, interpolated: g.ring_index(r).is_none() })
    }

    /// Rotated coefficient (B_ss, B_sθ, B_θθ) of the solution's own field at the grid
    /// angles on |x| = r.
    pub fn rotated_coefficient(&self, r: f64) -> Vec<(f64, f64, f64)> {
        let g = &self.grid;
        match g.ring_index(r) {
            Some(i) => (0..g.n_theta).map(|j| self.samples.rotated(i, j)).collect(),
            None => (0..g.n_theta)
                .map(|j| {
                    let t = g.theta(j);
                    let m = self.field.value(&[r * t.cos(), r * t.sin(), 0.0]);
                    assembly::rotate(&[m[0][0], m[0][1], m[1][0], m[1][1]], t)
                })
                .collect(),
        }
    }

    /// D(r) = ∫_{∂B_r} u⟨A∇u, ν⟩ dσ, which equals the energy ∫_{B_r} ⟨A∇u,∇u⟩ + V u².
    pub fn dirichlet_energy(&self, r: f64) -> Result<f64> {
        let ring = self.ring_at(r)?;
        let b = self.rotated_coefficient(r);
        let k = self.grid.dtheta();
        Ok((0..self.grid.n_theta).map(|j| k * ring.values[j] * (b[j].0 * ring.ds[j] + b[j].1 * ring.dtheta[j])).sum())
    }

    /// Energy inside B_r from the discrete edge form, interpolated in log r between rings.
    pub fn volume_energy(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        let cum = self.form.cumulative_energy(&self.values);
        Ok(interpolate_profile(&self.grid, &cum, r))
    }

    /// ∫_{B_r} |∇u|², from the identity-weighted edge form.
    pub fn gradient_energy(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        let form = self.identity_form.get_or_init(|| {
            let id = CoefficientField::constant(2, 1.0);
            let s = NodeSamples::sample(&id, &self.grid, None).expect("unit field samples");
            EnergyForm::build(&s, Scheme::FivePoint).expect("unit field form")
        });
        let cum = form.cumulative_energy(&self.values);
        Ok(interpolate_profile(&self.grid, &cum, r))
    }

    /// H(r) = ∫_{∂B_r} μ u² dσ with μ = ⟨A ν, ν⟩ of the field f.
    pub fn boundary_mass(&self, f: &CoefficientField, r: f64) -> Result<f64> {
        let ring = self.ring_at(r)?;
        let g = &self.grid;
        let k = g.dtheta();
        let mut total = 0.0;
        for j in 0..g.n_theta {
            let t = g.theta(j);
            let m = f.try_value(&[r * t.cos(), r * t.sin(), 0.0])?;
            let mu = assembly::rotate(&[m[0][0], m[0][1], m[1][0], m[1][1]], t).0;
            total += k * r * mu * ring.values[j].powi(2);
        }
        Ok(total)
    }

    /// H(r) with μ taken from the solution's own field.
    pub fn own_boundary_mass(&self, r: f64) -> Result<f64> {
        let ring = self.ring_at(r)?;
        let b = self.rotated_coefficient(r);
        let k = self.grid.dtheta();
        Ok((0..self.grid.n_theta).map(|j| k * r * b[j].0 * ring.values[j].powi(2)).sum())
    }

    /// h(r) = r^{1−n} ∫_{∂B_r} a u² dσ for a scalar weight a.
    pub fn boundary_mass_scalar(&self, a: &dyn Fn(&Point) -> f64, r: f64) -> Result<f64> {
        let ring = self.ring_at(r)?;
        let g = &self.grid;
        let k = g.dtheta();
        Ok((0..g.n_theta)
            .map(|j| {
                let t = g.theta(j);
                k * a(&[r * t.cos(), r * t.sin(), 0.0]) * ring.values[j].powi(2)
            })
            .sum())
    }

    /// Mean of u² over ∂B_r.
    pub fn sphere_mean_sq(&self, r: f64) -> Result<f64> {
        let ring = self.ring_at(r)?;
        Ok(ring.values.iter().map(|v| v * v).sum::<f64>() / ring.values.len() as f64)
    }

    /// ∫_{B_r} u² dx: exponential interpolation in log r between rings (exact for
    /// homogeneous u), plus the inner disk.
    pub fn ball_l2(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        let g = &self.grid;
        let k = g.dtheta();
        let q = |v: &[f64]| k * v.iter().map(|x| x * x).sum::<f64>();
        let f = |i: usize| (2.0 * g.radius(i).ln()).exp() * q(self.ring(i));
        let r0 = g.r_in();
        let mut total = std::f64::consts::PI * r0 * r0 * 0.5 * (self.center().powi(2) + q(self.ring(0)) / (2.0 * std::f64::consts::PI));
        let x = g.fractional_index(r).clamp(0.0, (g.n_r - 1) as f64);
        let m = x.floor() as usize;
        for i in 0..m {
            total += segment(g.log_step, f(i), f(i + 1));
        }
        let frac = x - m as f64;
        if frac > 1e-12 {
            let top = self.ring_at(r)?;
            total += segment(frac * g.log_step, f(m), r * r * q(&top.values));
        }
        Ok(total)
    }

    /// Mean of u² over B_r.
    pub fn ball_mean_sq(&self, r: f64) -> Result<f64> {
        Ok(self.ball_l2(r)? / (std::f64::consts::PI * r * r))
    }

    /// Interpolated value at a point of the grid's disk.
    pub fn sample(&self, x: &Point) -> Result<f64> {
        let g = &self.grid;
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if r > g.r_out * (1.0 + 1e-12) {
            return domain(format!("point at radius {r} outside the grid"));
        }
        let theta = x[1].atan2(x[0]).rem_euclid(2.0 * std::f64::consts::PI);
        let on_ring = |vals: &[f64]| -> f64 {
            let pos = theta / g.dtheta();
            let j0 = pos.floor() as isize;
            let z: Vec<f64> = (-1..=2).map(|o| (j0 + o) as f64).collect();
            let w = grid::fornberg_weights(pos, &z, 0);
            (0..4).map(|k| w[0][k] * vals[((j0 - 1 + k as isize).rem_euclid(g.n_theta as isize)) as usize]).sum()
        };
        if r < g.r_in() {
            let ring0 = on_ring(self.ring(0));
            return Ok(self.center() + (r / g.r_in()) * (ring0 - self.center()));
        }
        Ok(on_ring(&self.ring_at(r)?.values))
    }

    /// Node values resampled onto another grid of a (smaller or equal) disk.
    pub fn values_on(&self, other: &PolarGrid) -> Result<Vec<f64>> {
        if other.r_out > self.grid.r_out * (1.0 + 1e-12) {
            return domain("target grid extends beyond the solution's disk");
        }
        let mut out = vec![self.center()];
        let aligned = other.n_theta == self.grid.n_theta;
        for i in 0..other.n_r {
            let r = other.radius(i);
            if aligned && r >= self.grid.r_in() * (1.0 - 1e-12) {
                out.extend(self.ring_at(r.max(self.grid.r_in()))?.values);
            } else {
                for j in 0..other.n_theta {
                    out.push(self.sample(&other.point(i, j))?);
                }
            }
        }
        Ok(out)
    }

    pub(crate) fn grid_file(grid: &PolarGrid, values: &[f64]) -> GridFile {
        GridFile {
            dim: 2,
            layout: GridLayout::Polar,
            components: 1,
            shape: vec![grid.n_r, grid.n_theta],
            bbox: vec![[grid.r_in(), grid.r_out], [0.0, 2.0 * std::f64::consts::PI]],
            extra: vec![values[0]],
            data: values[1..].to_vec(),
        }
    }

    /// Node values as a polar grid file (centre value in the extra block).
    pub fn to_grid_file(&self) -> GridFile {
        Self::grid_file(&self.grid, &self.values)
    }

    /// Replaces the values (used for derived functions such as u/v on the same grid).
    pub fn with_values(&self, values: Vec<f64>) -> Result<DiscreteSolution> {
        if values.len() != self.values.len() {
            return Err(Error::Domain("value count does not match the grid".into()));
        }
        let mut s = self.clone();
        s.values = values;
        Ok(s)
    }
}

// ∫ over a step of length h of the exponential through (0, a) and (h, b).
fn segment(h: f64, a: f64, b: f64) -> f64 {
    if a > 0.0 && b > 0.0 && (a - b).abs() > 1e-12 * a.max(b) {
        h * (b - a) / (b / a).ln()
    } else {
        0.5 * h * (a + b)
    }
}

/// Interpolates a per-ring profile at r, log-linearly when both neighbours are positive.
pub(crate) fn interpolate_profile(grid: &PolarGrid, profile: &[f64], r: f64) -> f64 {
    let x = grid.fractional_index(r).clamp(0.0, (grid.n_r - 1) as f64);
    let m = (x.floor() as usize).min(grid.n_r - 2);
    let f = x - m as f64;
    let (a, b) = (profile[m], profile[m + 1]);
    if f == 0.0 {
        a
    } else if a > 0.0 && b > 0.0 {
        (a.ln() * (1.0 - f) + b.ln() * f).exp()
    } else {
        a * (1.0 - f) + b * f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_data_is_reproduced() {
        let f = CoefficientField::identity(2);
        let grid = PolarGrid::new(64, 64, 1.0).unwrap();
        let g = BoundaryData::harmonic(2);
        let u = solve_dirichlet(&f, 1.0, &g, &grid).unwrap();
        let ring = u.ring_at(0.5).unwrap();
        let exact: Vec<f64> = (0..64).map(|j| g.harmonic_extension(&[0.5 * grid.theta(j).cos(), 0.5 * grid.theta(j).sin(), 0.0], 1.0)).collect();
        let err = ring.values.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 2e-3, "max error {err}");
    }

    #[test]
    fn jacobi_and_separable_agree() {
        let f = CoefficientField::isotropic(2, "bumpy", |x| 1.0 + 0.3 * (3.0 * x[0]).sin() * x[1]);
        let grid = PolarGrid::new(24, 24, 1.0).unwrap();
        let g = BoundaryData::random(3, 7);
        let a = Problem::new(&f, &grid, SolveOptions::default()).unwrap().solve_data(&g).unwrap();
        let opts = SolveOptions { preconditioner: Preconditioner::Jacobi, ..Default::default() };
        let b = Problem::new(&f, &grid, opts).unwrap().solve_data(&g).unwrap();
        let diff = a.values.iter().zip(&b.values).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-7, "diff {diff}");
        assert!(a.stats.iterations < b.stats.iterations);
    }

    #[test]
    fn boundary_data_json_roundtrip() {
        let g = BoundaryData::random(4, 9);
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<BoundaryData>(&s).unwrap(), g);
    }
}
