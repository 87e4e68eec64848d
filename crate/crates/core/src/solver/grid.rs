use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Log-polar grid of B_{r_out}: rings r_i = r_out·e^{-(N_r−1−i)h}, i = 0..N_r, and N_θ
/// equispaced angles. The default spacing is conformal (h = 2π/N_θ), so cells are
/// squares in (log r, θ). The disk r < r_0·e^{-h/2} is a single core cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarGrid {
    pub dim: usize,
    pub n_r: usize,
    pub n_theta: usize,
    pub r_out: f64,
    pub log_step: f64,
}

/// Fewest rings accepted; derivative stencils need seven.
pub const MIN_RINGS: usize = 8;

impl PolarGrid {
    /// Conformal grid with h = 2π/N_θ.
    pub fn new(n_r: usize, n_theta: usize, r_out: f64) -> Result<Self> {
        Self::with_log_step(n_r, n_theta, r_out, 2.0 * std::f64::consts::PI / n_theta as f64)
    }

    pub fn with_log_step(n_r: usize, n_theta: usize, r_out: f64, log_step: f64) -> Result<Self> {
        if n_r < MIN_RINGS || n_theta < 8 {
            return domain(format!("grid needs at least {MIN_RINGS} rings and 8 angles, got {n_r}x{n_theta}"));
        }
        if !(r_out > 0.0 && log_step > 0.0) {
            return domain("grid needs r_out > 0 and a positive log step");
        }
        Ok(PolarGrid { dim: 2, n_r, n_theta, r_out, log_step })
    }

    /// Geometric grid spanning [r_in, r_out].
    pub fn geometric(n_r: usize, n_theta: usize, r_in: f64, r_out: f64) -> Result<Self> {
        if !(r_in > 0.0 && r_in < r_out) {
            return domain("geometric grid needs 0 < r_in < r_out");
        }
        Self::with_log_step(n_r, n_theta, r_out, (r_out / r_in).ln() / (n_r - 1) as f64)
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.r_out * (-((self.n_r - 1 - i) as f64) * self.log_step).exp()
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.n_r).map(|i| self.radius(i)).collect()
    }

    pub fn r_in(&self) -> f64 {
        self.radius(0)
    }

    pub fn core_radius(&self) -> f64 {
        self.r_in() * (-0.5 * self.log_step).exp()
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n_theta as f64
    }

    pub fn theta(&self, j: usize) -> f64 {
        self.dtheta() * j as f64
    }

    /// Angular quadrature weights; they sum to 2π.
    pub fn angular_weights(&self) -> Vec<f64> {
        vec![self.dtheta(); self.n_theta]
    }

    /// Position of radius r in ring-index units.
    pub fn fractional_index(&self, r: f64) -> f64 {
        (self.n_r - 1) as f64 + (r / self.r_out).ln() / self.log_step
    }

    /// The ring index when r is a grid radius (relative tolerance 1e-9).
    pub fn ring_index(&self, r: f64) -> Option<usize> {
        let x = self.fractional_index(r);
        let i = x.round();
        ((x - i).abs() < 1e-9 / self.log_step && i >= 0.0 && i <= (self.n_r - 1) as f64).then_some(i as usize)
    }

    pub fn nearest_ring(&self, r: f64) -> usize {
        self.fractional_index(r).round().clamp(0.0, (self.n_r - 1) as f64) as usize
    }

    pub fn contains_radius(&self, r: f64) -> bool {
        r >= self.r_in() * (1.0 - 1e-12) && r <= self.r_out * (1.0 + 1e-12)
    }

    /// Radial layers between ρ and r.
    pub fn layers_between(&self, rho: f64, r: f64) -> f64 {
        (r / rho).ln() / self.log_step
    }

    /// Largest frequency N for which the annulus (r(1−1/N), r) holds `layers` layers.
    pub fn max_resolved_frequency(&self, layers: f64) -> f64 {
        1.0 / (1.0 - (-layers * self.log_step).exp())
    }

    /// Grid of B_r sharing this grid's spacing; identical nodes when r is a ring.
    pub fn restricted(&self, r: f64) -> Result<PolarGrid> {
        if !self.contains_radius(r) {
            return domain(format!("radius {r} outside the grid [{}, {}]", self.r_in(), self.r_out));
        }
        let n = match self.ring_index(r) {
            Some(i) => i + 1,
            None => (self.fractional_index(r).round() as usize) + 1,
        };
        PolarGrid::with_log_step(n.max(MIN_RINGS), self.n_theta, r, self.log_step)
    }

    /// Doubled resolution: h → h/2, N_θ → 2N_θ, N_r → 2N_r − 1, so every ring persists.
    pub fn refined(&self) -> PolarGrid {
        PolarGrid {
            dim: self.dim,
            n_r: 2 * self.n_r - 1,
            n_theta: 2 * self.n_theta,
            r_out: self.r_out,
            log_step: 0.5 * self.log_step,
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.n_r * self.n_theta
    }

    /// Node id of ring i, angle j (id 0 is the centre).
    pub fn node(&self, i: usize, j: usize) -> usize {
        1 + i * self.n_theta + (j % self.n_theta)
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 3] {
        let (r, t) = (self.radius(i), self.theta(j));
        [r * t.cos(), r * t.sin(), 0.0]
    }
}

/// Finite-difference weights for derivatives 0..=m at `x` on nodes `z` (Fornberg).
pub fn fornberg_weights(x: f64, z: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = z.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = z[0] - x;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = z[i] - x;
        for j in 0..i {
            let c3 = z[i] - z[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Stencil width for radial interpolation and differentiation.
pub const STENCIL: usize = 7;

/// Window start and (value, d/ds) weights for fractional ring position x, with d/ds
/// taken per unit log-radius.
pub fn radial_stencil(grid: &PolarGrid, x: f64) -> (usize, Vec<f64>, Vec<f64>) {
    let half = (STENCIL / 2) as f64;
    let start = (x.round() - half).clamp(0.0, (grid.n_r - STENCIL) as f64) as usize;
    let z: Vec<f64> = (0..STENCIL).map(|k| (start + k) as f64).collect();
    let w = fornberg_weights(x, &z, 1);
    let d: Vec<f64> = w[1].iter().map(|v| v / grid.log_step).collect();
    let mut v = w[0].clone();
    // Exact delta at grid rings.
    if (x - x.round()).abs() < 1e-12 {
        v.iter_mut().enumerate().for_each(|(k, wk)| *wk = if start + k == x.round() as usize { 1.0 } else { 0.0 });
    }
    (start, v, d)
}
