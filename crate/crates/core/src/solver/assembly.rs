//! Node sampling and the edge form of the discrete energy.
//!
//! Both schemes write the energy as Σ w_e (u_p − u_q)² + Σ c_p u_p² over the log-polar
//! grid, so the matrix is a weighted graph Laplacian plus a nonnegative diagonal. Each
//! edge records the radial band it lives in, which lets the energy inside B_{r_m} be
//! read off without reassembly.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::PolarGrid;
use crate::coefficients::{eigen_extremes, CoefficientField, Point};
use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Five-point for isotropic fields, corner scheme otherwise.
    #[default]
    Auto,
    /// Harmonic-mean five-point stencil; isotropic fields only.
    FivePoint,
    /// Cell-corner gradients with arithmetic averaging of A; handles the cross term.
    Corner,
}

/// A zeroth-order term V ≥ 0 in −div(A∇u) + V u = 0.
#[derive(Clone)]
pub struct Potential {
    pub label: String,
    f: Arc<dyn Fn(&Point) -> f64 + Send + Sync>,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Potential({})", self.label)
    }
}

impl Potential {
    pub fn new(label: impl Into<String>, f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        Potential { label: label.into(), f: Arc::new(f) }
    }

    pub fn constant(v: f64) -> Self {
        Potential::new(format!("const({v})"), move |_| v)
    }

    pub fn eval(&self, x: &Point) -> f64 {
        (self.f)(x)
    }
}

/// 2×2 coefficient values [a11, a12, a21, a22].
pub type Mat2 = [f64; 4];

/// Coefficient samples at every node of a grid.
#[derive(Debug, Clone)]
pub struct NodeSamples {
    pub grid: PolarGrid,
    pub isotropic: bool,
    /// Ring-major samples, N_r·N_θ entries.
    pub nodes: Vec<Mat2>,
    /// Samples at (r_0/2, θ_j) for the core edges.
    pub core: Vec<Mat2>,
    pub center: Mat2,
    /// V at node ids (centre first), when a potential is present.
    pub potential: Option<Vec<f64>>,
}

fn to_mat2(m: &crate::coefficients::Mat) -> Mat2 {
    [m[0][0], m[0][1], m[1][0], m[1][1]]
}

/// Rotated entries (B_ss, B_sθ, B_θθ) at angle θ; B_sθ uses the symmetric part.
pub fn rotate(a: &Mat2, theta: f64) -> (f64, f64, f64) {
    let (c, s) = (theta.cos(), theta.sin());
    let nu = [c, s];
    let tau = [-s, c];
    let q = |x: &[f64; 2], y: &[f64; 2]| x[0] * (a[0] * y[0] + a[1] * y[1]) + x[1] * (a[2] * y[0] + a[3] * y[1]);
    (q(&nu, &nu), 0.5 * (q(&nu, &tau) + q(&tau, &nu)), q(&tau, &tau))
}

impl NodeSamples {
    pub fn sample(field: &CoefficientField, grid: &PolarGrid, potential: Option<&Potential>) -> Result<NodeSamples> {
        if field.dim != 2 || grid.dim != 2 {
            return Err(Error::Unsupported("the disk solver is two-dimensional".into()));
        }
        if grid.r_out > field.domain_radius * (1.0 + 1e-12) {
            return domain(format!(
                "grid radius {} exceeds the field domain B_{}",
                grid.r_out, field.domain_radius
            ));
        }
        let nt = grid.n_theta;
        let nodes: Vec<Mat2> = (0..grid.n_r * nt)
            .into_par_iter()
            .with_min_len(256)
            .map(|id| to_mat2(&field.value(&grid.point(id / nt, id % nt))))
            .collect();
        let r_half = 0.5 * grid.r_in();
        let core: Vec<Mat2> = (0..nt)
            .map(|j| {
                let t = grid.theta(j);
                to_mat2(&field.value(&[r_half * t.cos(), r_half * t.sin(), 0.0]))
            })
            .collect();
        let center = to_mat2(&field.value(&[0.0; 3]));
        for (k, m) in nodes.iter().chain(&core).chain(std::iter::once(&center)).enumerate() {
            let full = [[m[0], m[1], 0.0], [m[2], m[3], 0.0], [0.0, 0.0, 1.0]];
            let (lo, _) = eigen_extremes(&full, 2);
            if !(lo > 0.0) || !m.iter().all(|v| v.is_finite()) {
                return domain(format!("ellipticity violated at assembly node {k} (min eigenvalue {lo:.3e})"));
            }
        }
        let potential = match potential {
            None => None,
            Some(p) => {
                let mut v = Vec::with_capacity(grid.node_count());
                v.push(p.eval(&[0.0; 3]));
                v.extend((0..grid.n_r * nt).map(|id| p.eval(&grid.point(id / nt, id % nt))));
                if v.iter().any(|x| !(*x >= 0.0)) {
                    return domain(format!("potential '{}' must be nonnegative", p.label));
                }
                Some(v)
            }
        };
        Ok(NodeSamples { grid: grid.clone(), isotropic: field.is_isotropic(), nodes, core, center, potential })
    }

    pub fn at(&self, i: usize, j: usize) -> &Mat2 {
        &self.nodes[i * self.grid.n_theta + j % self.grid.n_theta]
    }

    /// (B_ss, B_sθ, B_θθ) at node (i, j).
    pub fn rotated(&self, i: usize, j: usize) -> (f64, f64, f64) {
        rotate(self.at(i, j), self.grid.theta(j))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub p: u32,
    pub q: u32,
    pub w: f64,
    /// Radial band: −1 for the core cell, i for the band between rings i and i+1.
    pub band: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Radial(usize),
    Angular(usize),
    Core,
    Diagonal,
}

/// The discrete energy of one field on one grid.
#[derive(Debug, Clone)]
pub struct EnergyForm {
    pub grid: PolarGrid,
    pub scheme: Scheme,
    pub edges: Vec<Edge>,
    /// Reaction weight c_p per node id (zero without a potential).
    pub reaction: Vec<f64>,
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

impl EnergyForm {
    pub fn build(samples: &NodeSamples, scheme: Scheme) -> Result<EnergyForm> {
        let scheme = match scheme {
            Scheme::Auto if samples.isotropic => Scheme::FivePoint,
            Scheme::Auto => Scheme::Corner,
            Scheme::FivePoint if !samples.isotropic => {
                return Err(Error::Unsupported("the five-point scheme needs an isotropic field".into()))
            }
            s => s,
        };
        let g = &samples.grid;
        let (nr, nt, h) = (g.n_r, g.n_theta, g.log_step);
        let k = g.dtheta();
        let mut edges = Vec::with_capacity(nt * (4 * nr + 1));
        let mut push = |p: usize, q: usize, w: f64, band: i32| {
            if w != 0.0 {
                edges.push(Edge { p: p as u32, q: q as u32, w, band });
            }
        };
        // Core: flux through r = ρ_c with the gradient taken along the ray to the node.
        let shrink = (-0.5 * h).exp();
        for j in 0..nt {
            let mu = rotate(&samples.core[j], g.theta(j)).0;
            push(0, g.node(0, j), k * mu * shrink, -1);
        }
        match scheme {
            Scheme::FivePoint => {
                let a = |i: usize, j: usize| samples.at(i, j)[0];
                for i in 0..nr {
                    for j in 0..nt {
                        if i + 1 < nr {
                            push(g.node(i, j), g.node(i + 1, j), (k / h) * harmonic(a(i, j), a(i + 1, j)), i as i32);
                        }
                        // θ-edge split into the half-bands below and above ring i.
                        let w = 0.5 * (h / k) * harmonic(a(i, j), a(i, j + 1));
                        push(g.node(i, j), g.node(i, j + 1), w, i as i32 - 1);
                        if i + 1 < nr {
                            push(g.node(i, j), g.node(i, j + 1), w, i as i32);
                        }
                    }
                }
            }
            Scheme::Corner => {
                for i in 0..nr - 1 {
                    for j in 0..nt {
                        let (na, nb, nc, nd) = (g.node(i, j), g.node(i + 1, j), g.node(i, j + 1), g.node(i + 1, j + 1));
                        let mut m = [0.0; 4];
                        for s in [samples.at(i, j), samples.at(i + 1, j), samples.at(i, j + 1), samples.at(i + 1, j + 1)] {
                            for c in 0..4 {
                                m[c] += 0.25 * s[c];
                            }
                        }
                        let (bss, bst, btt) = rotate(&m, g.theta(j) + 0.5 * k);
                        let band = i as i32;
                        push(na, nb, 0.5 * (k / h) * bss, band);
                        push(nc, nd, 0.5 * (k / h) * bss, band);
                        push(na, nc, 0.5 * (h / k) * btt, band);
                        push(nb, nd, 0.5 * (h / k) * btt, band);
                        push(na, nd, 0.5 * bst, band);
                        push(nb, nc, -0.5 * bst, band);
                    }
                }
                // Lower half-band of ring 0.
                for j in 0..nt {
                    let m0 = samples.at(0, j);
                    let m1 = samples.at(0, j + 1);
                    let avg = [0.5 * (m0[0] + m1[0]), 0.5 * (m0[1] + m1[1]), 0.5 * (m0[2] + m1[2]), 0.5 * (m0[3] + m1[3])];
                    let btt = rotate(&avg, g.theta(j) + 0.5 * k).2;
                    push(g.node(0, j), g.node(0, j + 1), 0.5 * (h / k) * btt, -1);
                }
            }
            Scheme::Auto => unreachable!(),
        }
        let mut reaction = vec![0.0; g.node_count()];
        if let Some(v) = &samples.potential {
            let rc = g.core_radius();
            reaction[0] = v[0] * std::f64::consts::PI * rc * rc;
            for i in 0..nr {
                let area = k * (2.0 * g.radius(i).ln()).exp() * h.sinh();
                for j in 0..nt {
                    let id = g.node(i, j);
                    reaction[id] = v[id] * area;
                }
            }
        }
        Ok(EnergyForm { grid: g.clone(), scheme, edges, reaction })
    }

    pub fn classify(&self, e: &Edge) -> EdgeKind {
        let nt = self.grid.n_theta;
        if e.p == 0 {
            return EdgeKind::Core;
        }
        let (p, q) = (e.p as usize - 1, e.q as usize - 1);
        let (ip, jp, iq, jq) = (p / nt, p % nt, q / nt, q % nt);
        if ip == iq {
            EdgeKind::Angular(ip)
        } else if jp == jq {
            EdgeKind::Radial(ip.min(iq))
        } else {
            EdgeKind::Diagonal
        }
    }

    /// Total energy (gradient plus reaction) of node values u (centre first).
    pub fn energy(&self, u: &[f64]) -> f64 {
        let grad: f64 = self.edges.iter().map(|e| e.w * (u[e.p as usize] - u[e.q as usize]).powi(2)).sum();
        grad + self.reaction.iter().zip(u).map(|(c, v)| c * v * v).sum::<f64>()
    }

    /// Gradient energy inside B_{r_m} for every ring m (bands strictly below m).
    pub fn cumulative_energy(&self, u: &[f64]) -> Vec<f64> {
        let nr = self.grid.n_r;
        let mut per_band = vec![0.0; nr + 1];
        for e in &self.edges {
            per_band[(e.band + 1) as usize] += e.w * (u[e.p as usize] - u[e.q as usize]).powi(2);
        }
        let mut out = Vec::with_capacity(nr);
        let mut acc = 0.0;
        for m in 0..nr {
            acc += per_band[m];
            out.push(acc);
        }
        out
    }
}

/// Compressed sparse rows.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        y.par_chunks_mut(4096).enumerate().for_each(|(c, chunk)| {
            let base = c * 4096;
            for (k, yi) in chunk.iter_mut().enumerate() {
                let r = base + k;
                let mut acc = 0.0;
                for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.vals[idx] * x[self.cols[idx] as usize];
                }
                *yi = acc;
            }
        });
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .find(|&i| self.cols[i] as usize == r)
                    .map(|i| self.vals[i])
                    .unwrap_or(0.0)
            })
            .collect()
    }
}

/// Number of interior unknowns: the centre and rings 0..N_r−1 (node ids below this).
pub fn unknown_count(g: &PolarGrid) -> usize {
    g.node_count() - g.n_theta
}

/// Matrix over the interior unknowns with the outer ring eliminated.
pub fn assemble_matrix(form: &EnergyForm) -> Csr {
    let n = unknown_count(&form.grid);
    let mut trip: Vec<(u32, u32, f64)> = Vec::with_capacity(4 * form.edges.len() + n);
    for (id, c) in form.reaction.iter().enumerate().take(n) {
        trip.push((id as u32, id as u32, *c));
    }
    for e in &form.edges {
        match ((e.p as usize) < n, (e.q as usize) < n) {
            (true, true) => {
                trip.push((e.p, e.p, e.w));
                trip.push((e.q, e.q, e.w));
                trip.push((e.p, e.q, -e.w));
                trip.push((e.q, e.p, -e.w));
            }
            (true, false) => trip.push((e.p, e.p, e.w)),
            (false, true) => trip.push((e.q, e.q, e.w)),
            (false, false) => {}
        }
    }
    trip.sort_unstable_by_key(|t| (t.0, t.1));
    let mut row_ptr = vec![0usize; n + 1];
    let mut cols = Vec::with_capacity(trip.len() / 2);
    let mut vals: Vec<f64> = Vec::with_capacity(trip.len() / 2);
    let mut last: Option<(u32, u32)> = None;
    for (r, c, v) in trip {
        if last == Some((r, c)) {
            *vals.last_mut().unwrap() += v;
        } else {
            cols.push(c);
            vals.push(v);
            row_ptr[r as usize + 1] += 1;
            last = Some((r, c));
        }
    }
    for r in 0..n {
        row_ptr[r + 1] += row_ptr[r];
    }
    Csr { n, row_ptr, cols, vals }
}

/// Right-hand side produced by outer-ring values `boundary` (length N_θ).
pub fn assemble_rhs(form: &EnergyForm, boundary: &[f64]) -> Vec<f64> {
    let n = unknown_count(&form.grid);
    let mut rhs = vec![0.0; n];
    for e in &form.edges {
        let (p, q) = (e.p as usize, e.q as usize);
        if p < n && q >= n {
            rhs[p] += e.w * boundary[q - n];
        } else if q < n && p >= n {
            rhs[q] += e.w * boundary[p - n];
        }
    }
    rhs
}
