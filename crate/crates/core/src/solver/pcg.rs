//! Preconditioned conjugate gradients.
//!
//! The default preconditioner inverts the ring-averaged operator exactly: averaging the
//! edge weights over each ring makes the operator diagonal in the angular Fourier basis,
//! leaving one tridiagonal system in the radial index per mode.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::assembly::{Csr, EdgeKind, EnergyForm};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    #[default]
    Separable,
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Chunked dot product; the chunk partition is fixed so sums are reproducible.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.chunks(1024).zip(b.chunks(1024)).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>()).sum()
}

pub trait Precondition {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct Jacobi(Vec<f64>);

impl Jacobi {
    pub fn new(a: &Csr) -> Self {
        Jacobi(a.diagonal().iter().map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 }).collect())
    }
}

impl Precondition for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.0) {
            *zi = ri * di;
        }
    }
}

/// Exact inverse of the ring-averaged operator.
pub struct Separable {
    n_rings: usize,
    nt: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    // Per mode m, the Thomas factors of the radial chain: sub[i], modified diag inverse, sup.
    lower: Vec<f64>,
    upper: Vec<f64>,
    diag: Vec<Vec<f64>>,
    // Mode 0 additionally carries the centre node in front of ring 0.
    center_diag: f64,
    center_up: f64,
    center_low: f64,
}

impl Separable {
    pub fn new(form: &EnergyForm) -> Self {
        let g = &form.grid;
        let (nr, nt) = (g.n_r, g.n_theta);
        let n_rings = nr - 1;
        let mut s = vec![0.0; nr];
        let mut t = vec![0.0; nr];
        let mut core = 0.0;
        for e in &form.edges {
            match form.classify(e) {
                EdgeKind::Radial(i) => s[i] += e.w,
                EdgeKind::Angular(i) => t[i] += e.w,
                EdgeKind::Core => core += e.w,
                EdgeKind::Diagonal => {}
            }
        }
        let ntf = nt as f64;
        s.iter_mut().for_each(|v| *v /= ntf);
        t.iter_mut().for_each(|v| *v /= ntf);
        let c = core / ntf;
        let react: Vec<f64> = (0..n_rings).map(|i| (0..nt).map(|j| form.reaction[g.node(i, j)]).sum::<f64>() / ntf).collect();
        let mut diag = Vec::with_capacity(nt);
        for m in 0..nt {
            let lam = 2.0 - 2.0 * (2.0 * std::f64::consts::PI * m as f64 / ntf).cos();
            let d: Vec<f64> = (0..n_rings)
                .map(|i| {
                    let below = if i == 0 { c } else { s[i - 1] };
                    below + s[i] + t[i] * lam + react[i]
                })
                .collect();
            diag.push(d);
        }
        // Thomas elimination: store modified diagonals (inverted) per mode.
        let upper: Vec<f64> = (0..n_rings).map(|i| -s[i]).collect();
        let lower = upper.clone();
        let center_diag = ntf * c + form.reaction[0];
        let mut fact = Vec::with_capacity(nt);
        for (m, d) in diag.into_iter().enumerate() {
            let mut dm = d;
            if m == 0 {
                // Centre row: (N c + R_c) u_c − c û_0; ring-0 row has −N c u_c.
                dm[0] -= (ntf * c) * c / center_diag;
            }
            for i in 1..n_rings {
                dm[i] -= lower[i - 1] * upper[i - 1] / dm[i - 1];
            }
            fact.push(dm);
        }
        let mut planner = FftPlanner::new();
        Separable {
            n_rings,
            nt,
            fwd: planner.plan_fft_forward(nt),
            inv: planner.plan_fft_inverse(nt),
            lower,
            upper,
            diag: fact,
            center_diag,
            center_up: -c,
            center_low: -ntf * c,
        }
    }
}

impl Precondition for Separable {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let (nr, nt) = (self.n_rings, self.nt);
        let mut buf: Vec<Complex64> = r[1..].iter().map(|v| Complex64::new(*v, 0.0)).collect();
        for ring in buf.chunks_mut(nt) {
            self.fwd.process(ring);
        }
        // Mode 0 right-hand side of the centre row.
        let rc = r[0];
        let mut zc = 0.0;
        for m in 0..nt {
            let d = &self.diag[m];
            // Forward sweep.
            let mut y = vec![Complex64::new(0.0, 0.0); nr];
            let mut first = buf[m];
            if m == 0 {
                first -= Complex64::new(self.center_low * rc / self.center_diag, 0.0);
            }
            y[0] = first;
            for i in 1..nr {
                y[i] = buf[i * nt + m] - y[i - 1] * (self.lower[i - 1] / d[i - 1]);
            }
            // Back substitution.
            let mut x = y[nr - 1] / d[nr - 1];
            buf[(nr - 1) * nt + m] = x;
            for i in (0..nr - 1).rev() {
                x = (y[i] - x * self.upper[i]) / d[i];
                buf[i * nt + m] = x;
            }
            if m == 0 {
                zc = (rc - self.center_up * buf[0].re) / self.center_diag;
            }
        }
        for ring in buf.chunks_mut(nt) {
            self.inv.process(ring);
        }
        z[0] = zc;
        let scale = 1.0 / nt as f64;
        for (zi, b) in z[1..].iter_mut().zip(&buf) {
            *zi = b.re * scale;
        }
    }
}

/// Solves A x = b from the initial guess in `x`.
pub fn pcg(a: &Csr, b: &[f64], x: &mut [f64], pre: &dyn Precondition, tol: f64, max_iter: usize) -> Result<PcgStats> {
    let n = a.n;
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(PcgStats { iterations: 0, relative_residual: 0.0 });
    }
    let mut ax = vec![0.0; n];
    a.mul(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = dot(&r, &r).sqrt() / bnorm;
    for it in 0..max_iter {
        if res <= tol {
            return Ok(PcgStats { iterations: it, relative_residual: res });
        }
        a.mul(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotConverged { iterations: it, residual: res });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = dot(&r, &r).sqrt() / bnorm;
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if res <= tol {
        Ok(PcgStats { iterations: max_iter, relative_residual: res })
    } else {
        Err(Error::NotConverged { iterations: max_iter, residual: res })
    }
}
