//! Elliptic coefficient fields on the unit ball: evaluation, the geometric
//! quantities μ and β, mollification, 0-homogeneous projection and
//! empirical regularity.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::io::GridFile;
use crate::modulus::{least_squares_slope, Modulus};

/// A point of R^n stored in three slots; unused trailing slots are 0.
pub type Point = [f64; 3];
/// A symmetric matrix stored in a 3×3 array; only the leading n×n block is meaningful.
pub type Mat = [[f64; 3]; 3];

pub fn norm(x: &Point) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

pub fn scaled_identity(dim: usize, a: f64) -> Mat {
    let mut m = [[0.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate().take(dim) {
        row[i] = a;
    }
    m
}

pub fn mat_vec(m: &Mat, x: &Point) -> Point {
    let mut y = [0.0; 3];
    for i in 0..3 {
        y[i] = m[i][0] * x[0] + m[i][1] * x[1] + m[i][2] * x[2];
    }
    y
}

pub fn quad_form(m: &Mat, x: &Point) -> f64 {
    let y = mat_vec(m, x);
    y[0] * x[0] + y[1] * x[1] + y[2] * x[2]
}

/// Smallest and largest eigenvalue of the leading dim×dim block.
pub fn eigen_extremes(m: &Mat, dim: usize) -> (f64, f64) {
    match dim {
        1 => (m[0][0], m[0][0]),
        2 => {
            let mean = 0.5 * (m[0][0] + m[1][1]);
            let rad = (0.25 * (m[0][0] - m[1][1]).powi(2) + m[0][1] * m[0][1]).sqrt();
            (mean - rad, mean + rad)
        }
        _ => {
            // Closed-form eigenvalues of a symmetric 3×3 matrix.
            let p1 = m[0][1].powi(2) + m[0][2].powi(2) + m[1][2].powi(2);
            let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
            if p1 == 0.0 {
                let d = [m[0][0], m[1][1], m[2][2]];
                return (d.iter().cloned().fold(f64::INFINITY, f64::min), d.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            }
            let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
            let p = (p2 / 6.0).sqrt();
            let mut b = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    b[i][j] = (m[i][j] - if i == j { q } else { 0.0 }) / p;
                }
            }
            let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
                + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
            let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
            let e1 = q + 2.0 * p * phi.cos();
            let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
            (e3, e1)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arity {
    Isotropic,
    Anisotropic,
}

/// Hölder regularity: |a(x) − a(y)| ≤ C_h |x − y|^α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Holder {
    pub alpha: f64,
    pub c_h: f64,
}

/// Metadata attached to a mollified field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifyInfo {
    pub eps: f64,
    /// ω(ε): bound on sup |f_ε − f| when a modulus is declared.
    pub sup_distance_bound: Option<f64>,
    /// C_η·ω(ε)/ε with C_η = ∫|∇η|.
    pub gradient_bound: Option<f64>,
}

#[derive(Clone)]
enum Eval {
    Scalar(Arc<dyn Fn(&Point) -> f64 + Send + Sync>),
    Matrix(Arc<dyn Fn(&Point) -> Mat + Send + Sync>),
}

/// An elliptic coefficient field on a ball of radius `domain_radius`.
#[derive(Clone)]
pub struct CoefficientField {
    pub dim: usize,
    pub ellipticity: f64,
    pub declared_modulus: Option<Modulus>,
    pub holder: Option<Holder>,
    pub domain_radius: f64,
    pub mollification: Option<MollifyInfo>,
    pub label: String,
    /// The recipe this field was built from, when it came from a config.
    pub config: Option<FieldConfig>,
    eval: Eval,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("label", &self.label)
            .field("arity", &self.arity())
            .field("dim", &self.dim)
            .field("ellipticity", &self.ellipticity)
            .finish()
    }
}

impl CoefficientField {
    pub fn isotropic(dim: usize, label: impl Into<String>, f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        CoefficientField {
            dim,
            ellipticity: 1.0,
            declared_modulus: None,
            holder: None,
            domain_radius: 1.0,
            mollification: None,
            label: label.into(),
            config: None,
            eval: Eval::Scalar(Arc::new(f)),
        }
        .with_sampled_ellipticity()
    }

    pub fn anisotropic(dim: usize, label: impl Into<String>, f: impl Fn(&Point) -> Mat + Send + Sync + 'static) -> Self {
        CoefficientField {
            dim,
            ellipticity: 1.0,
            declared_modulus: None,
            holder: None,
            domain_radius: 1.0,
            mollification: None,
            label: label.into(),
            config: None,
            eval: Eval::Matrix(Arc::new(f)),
        }
        .with_sampled_ellipticity()
    }

    pub fn identity(dim: usize) -> Self {
        let mut f = Self::anisotropic(dim, "identity", move |_| scaled_identity(dim, 1.0));
        f.declared_modulus = Some(Modulus::linear());
        if dim == 2 {
            f.config = Some(FieldConfig::identity());
        }
        f
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut f = Self::isotropic(dim, format!("const({c})"), move |_| c);
        f.declared_modulus = Some(Modulus::linear());
        f
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut m = [[0.0; 3]; 3];
        for i in 0..dim {
            m[i][i] = diag[i];
        }
        Self::anisotropic(dim, format!("diag{diag:?}"), move |_| m)
    }

    pub fn arity(&self) -> Arity {
        match self.eval {
            Eval::Scalar(_) => Arity::Isotropic,
            Eval::Matrix(_) => Arity::Anisotropic,
        }
    }

    pub fn is_isotropic(&self) -> bool {
        self.arity() == Arity::Isotropic
    }

    /// Same evaluator, or built from equal recipes (builds are deterministic).
    pub fn same_as(&self, other: &CoefficientField) -> bool {
        let shared = match (&self.eval, &other.eval) {
            (Eval::Scalar(a), Eval::Scalar(b)) => Arc::ptr_eq(a, b),
            (Eval::Matrix(a), Eval::Matrix(b)) => Arc::ptr_eq(a, b),
            _ => false,
        };
        shared || (self.dim == other.dim && self.config.is_some() && self.config == other.config)
    }

    pub fn with_modulus(mut self, m: Modulus) -> Self {
        self.declared_modulus = Some(m);
        self
    }

    pub fn with_holder(mut self, alpha: f64, c_h: f64) -> Self {
        self.holder = Some(Holder { alpha, c_h });
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Matrix value; isotropic fields return a(x)·I.
    pub fn value(&self, x: &Point) -> Mat {
        match &self.eval {
            Eval::Scalar(f) => scaled_identity(self.dim, f(x)),
            Eval::Matrix(f) => f(x),
        }
    }

    /// Scalar value a(x); for anisotropic fields the mean eigenvalue tr(A)/n.
    pub fn scalar(&self, x: &Point) -> f64 {
        match &self.eval {
            Eval::Scalar(f) => f(x),
            Eval::Matrix(f) => {
                let m = f(x);
                (0..self.dim).map(|i| m[i][i]).sum::<f64>() / self.dim as f64
            }
        }
    }

    /// Value with a check that x lies in the field's domain.
    pub fn try_value(&self, x: &Point) -> Result<Mat> {
        if norm(x) > self.domain_radius * (1.0 + 1e-12) {
            return domain(format!("point at |x| = {:.6} outside the field domain B_{:.6}", norm(x), self.domain_radius));
        }
        Ok(self.value(x))
    }

    /// Estimates λ from a deterministic verification sample of B_R.
    fn with_sampled_ellipticity(mut self) -> Self {
        let (lo, hi) = self.ellipticity_range(2048);
        self.ellipticity = lo.min(1.0 / hi).min(1.0);
        self
    }

    /// (min eigenvalue, max eigenvalue) over a verification sample.
    pub fn ellipticity_range(&self, samples: usize) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(0xE11);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..samples {
            let x = if i == 0 { [0.0; 3] } else { random_in_ball(&mut rng, self.dim, self.domain_radius.min(1.0)) };
            let (a, b) = eigen_extremes(&self.value(&x), self.dim);
            lo = lo.min(a);
            hi = hi.max(b);
        }
        (lo, hi)
    }

    /// Maximal asymmetry |A − Aᵀ| over a verification sample.
    pub fn asymmetry(&self, samples: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5E7);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let x = random_in_ball(&mut rng, self.dim, self.domain_radius.min(1.0));
            let m = self.value(&x);
            for i in 0..self.dim {
                for j in 0..self.dim {
                    worst = worst.max((m[i][j] - m[j][i]).abs());
                }
            }
        }
        worst
    }

    /// Checks λ|ξ|² ≤ ⟨Aξ,ξ⟩ and |Aξ| ≤ λ^{-1}|ξ| on a verification sample.
    pub fn verify_ellipticity(&self, lambda: f64) -> Result<()> {
        let (lo, hi) = self.ellipticity_range(4096);
        if lo < lambda || hi > 1.0 / lambda {
            return domain(format!(
                "field '{}' leaves the ellipticity range [{lambda}, {}]: eigenvalues in [{lo:.4}, {hi:.4}]",
                self.label,
                1.0 / lambda
            ));
        }
        if self.asymmetry(256) > 1e-12 {
            return domain(format!("field '{}' is not symmetric", self.label));
        }
        Ok(())
    }

    /// Rescales so that the value at the origin is the identity
    /// (a/a(0), or P·A·P with P = A(0)^{-1/2} in two dimensions).
    pub fn normalized(&self) -> Result<CoefficientField> {
        let origin = [0.0; 3];
        let label = format!("{}|normalized", self.label);
        let mut out = match &self.eval {
            Eval::Scalar(f) => {
                let a0 = f(&origin);
                let f = f.clone();
                CoefficientField::isotropic(self.dim, label, move |x| f(x) / a0)
            }
            Eval::Matrix(f) => {
                if self.dim != 2 {
                    return Err(Error::Unsupported("anisotropic normalization is implemented for n = 2".into()));
                }
                let p = inverse_sqrt_2x2(&f(&origin));
                let f = f.clone();
                CoefficientField::anisotropic(2, label, move |x| {
                    let a = f(x);
                    let mut out = [[0.0; 3]; 3];
                    for i in 0..2 {
                        for j in 0..2 {
                            let mut s = 0.0;
                            for k in 0..2 {
                                for l in 0..2 {
                                    s += p[i][k] * a[k][l] * p[l][j];
                                }
                            }
                            out[i][j] = s;
                        }
                    }
                    out
                })
            }
        };
        out.declared_modulus = self.declared_modulus.clone();
        out.holder = self.holder;
        out.domain_radius = self.domain_radius;
        Ok(out)
    }

    /// Samples the field on an m×m Cartesian grid over [-1,1]² (one value for isotropic
    /// fields, the triple (a11, a12, a22) otherwise).
    pub fn to_grid(&self, m: usize) -> Result<GridFile> {
        if self.dim != 2 {
            return Err(Error::Unsupported("grid export is implemented for n = 2".into()));
        }
        let comps = if self.is_isotropic() { 1 } else { 3 };
        let mut data = Vec::with_capacity(m * m * comps);
        for i in 0..m {
            let y = -1.0 + 2.0 * i as f64 / (m - 1) as f64;
            for j in 0..m {
                let x = -1.0 + 2.0 * j as f64 / (m - 1) as f64;
                let p = [x, y, 0.0];
                if self.is_isotropic() {
                    data.push(self.scalar(&p));
                } else {
                    let a = self.value(&p);
                    data.extend_from_slice(&[a[0][0], a[0][1], a[1][1]]);
                }
            }
        }
        Ok(GridFile::cartesian(vec![m, m], vec![[-1.0, 1.0], [-1.0, 1.0]], comps, data))
    }

    /// Bilinear interpolant of a Cartesian grid produced by [`CoefficientField::to_grid`].
    pub fn from_grid(grid: &GridFile) -> Result<CoefficientField> {
        if grid.layout != crate::io::GridLayout::Cartesian || grid.shape.len() != 2 {
            return domain("sampled fields must be two-dimensional Cartesian grids");
        }
        let (ny, nx) = (grid.shape[0], grid.shape[1]);
        let comps = grid.components;
        let bbox = grid.bbox.clone();
        let data = Arc::new(grid.data.clone());
        let lookup = move |p: &Point, c: usize| -> f64 {
            let fx = ((p[0] - bbox[1][0]) / (bbox[1][1] - bbox[1][0]) * (nx - 1) as f64).clamp(0.0, (nx - 1) as f64);
            let fy = ((p[1] - bbox[0][0]) / (bbox[0][1] - bbox[0][0]) * (ny - 1) as f64).clamp(0.0, (ny - 1) as f64);
            let (i0, j0) = ((fy.floor() as usize).min(ny - 2), (fx.floor() as usize).min(nx - 2));
            let (ty, tx) = (fy - i0 as f64, fx - j0 as f64);
            let at = |i: usize, j: usize| data[(i * nx + j) * comps + c];
            (1.0 - ty) * ((1.0 - tx) * at(i0, j0) + tx * at(i0, j0 + 1)) + ty * ((1.0 - tx) * at(i0 + 1, j0) + tx * at(i0 + 1, j0 + 1))
        };
        Ok(match comps {
            1 => CoefficientField::isotropic(2, "sampled", move |p| lookup(p, 0)),
            3 => CoefficientField::anisotropic(2, "sampled", move |p| {
                let (a, b, c) = (lookup(p, 0), lookup(p, 1), lookup(p, 2));
                [[a, b, 0.0], [b, c, 0.0], [0.0, 0.0, 0.0]]
            }),
            _ => return domain(format!("unsupported component count {comps}")),
        })
    }
}

fn inverse_sqrt_2x2(a: &Mat) -> [[f64; 2]; 2] {
    // A = Q diag(l1,l2) Qᵀ, P = Q diag(l^{-1/2}) Qᵀ.
    let (l1, l2) = eigen_extremes(a, 2);
    let theta = 0.5 * (2.0 * a[0][1]).atan2(a[0][0] - a[1][1]);
    let (c, s) = (theta.cos(), theta.sin());
    // Column (c, s) is the eigenvector of the larger eigenvalue l2.
    let (d_big, d_small) = (1.0 / l2.sqrt(), 1.0 / l1.sqrt());
    [
        [c * c * d_big + s * s * d_small, c * s * (d_big - d_small)],
        [c * s * (d_big - d_small), s * s * d_big + c * c * d_small],
    ]
}

pub(crate) fn random_in_ball(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Point {
    loop {
        let mut p = [0.0; 3];
        for v in p.iter_mut().take(dim) {
            *v = rng.random_range(-1.0..1.0);
        }
        if norm(&p) < 1.0 {
            for v in p.iter_mut() {
                *v *= radius;
            }
            return p;
        }
    }
}

fn random_direction(rng: &mut ChaCha8Rng, dim: usize) -> Point {
    loop {
        let mut p = [0.0; 3];
        for v in p.iter_mut().take(dim) {
            *v = StandardNormal.sample(rng);
        }
        let n = norm(&p);
        if n > 1e-8 {
            return [p[0] / n, p[1] / n, p[2] / n];
        }
    }
}

/// μ(x) = ⟨A(x)x/|x|, x/|x|⟩.
pub fn mu_factor(f: &CoefficientField, x: &Point) -> Result<f64> {
    let r = norm(x);
    if r == 0.0 {
        return domain("mu_factor is undefined at x = 0");
    }
    if f.is_isotropic() {
        return Ok(f.scalar(x));
    }
    let nu = [x[0] / r, x[1] / r, x[2] / r];
    Ok(quad_form(&f.value(x), &nu))
}

/// β(x) = A(x)x/μ(x); satisfies ⟨β(x), x/|x|⟩ = |x|.
pub fn beta_vector(f: &CoefficientField, x: &Point) -> Result<Point> {
    let mu = mu_factor(f, x)?;
    let ax = mat_vec(&f.value(x), x);
    Ok([ax[0] / mu, ax[1] / mu, ax[2] / mu])
}

// ---------------------------------------------------------------------------
// Mollification

/// The standard bump η(y) = exp(−1/(1−|y|²)) on B_1, discretised by a tensor midpoint
/// rule with 64^n cells and normalised to unit discrete mass.
pub struct Mollifier {
    pub dim: usize,
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    /// ∇η(y_q)·cell volume, normalised consistently with `weights`.
    pub gradient_weights: Vec<Point>,
    /// ∫|∇η|.
    pub gradient_integral: f64,
}

pub const MOLLIFIER_SAMPLES: usize = 64;

impl Mollifier {
    fn build(dim: usize) -> Mollifier {
        let m = MOLLIFIER_SAMPLES;
        let h = 2.0 / m as f64;
        let cell = h.powi(dim as i32);
        let mut nodes = Vec::new();
        let mut raw = Vec::new();
        let mut raw_grad = Vec::new();
        let count = m.pow(dim as u32);
        for idx in 0..count {
            let mut y = [0.0; 3];
            let mut rest = idx;
            for v in y.iter_mut().take(dim) {
                *v = -1.0 + h * ((rest % m) as f64 + 0.5);
                rest /= m;
            }
            let r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
            if r2 >= 1.0 {
                continue;
            }
            let e = (-1.0 / (1.0 - r2)).exp();
            // ∇η = η · (−2y/(1−|y|²)²)
            let gfac = -2.0 * e / (1.0 - r2).powi(2);
            nodes.push(y);
            raw.push(e * cell);
            raw_grad.push([gfac * y[0] * cell, gfac * y[1] * cell, gfac * y[2] * cell]);
        }
        let mass: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / mass).collect();
        let gradient_weights: Vec<Point> = raw_grad.iter().map(|g| [g[0] / mass, g[1] / mass, g[2] / mass]).collect();
        let gradient_integral = gradient_weights.iter().map(norm).sum();
        Mollifier { dim, nodes, weights, gradient_weights, gradient_integral }
    }

    /// Shared instance per dimension (built once).
    pub fn standard(dim: usize) -> &'static Mollifier {
        static M2: OnceLock<Mollifier> = OnceLock::new();
        static M3: OnceLock<Mollifier> = OnceLock::new();
        match dim {
            3 => M3.get_or_init(|| Mollifier::build(3)),
            _ => M2.get_or_init(|| Mollifier::build(2)),
        }
    }

    pub fn apply_scalar(&self, f: &(dyn Fn(&Point) -> f64 + Send + Sync), x: &Point, eps: f64) -> f64 {
        let mut acc = 0.0;
        for (y, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(&[x[0] - eps * y[0], x[1] - eps * y[1], x[2] - eps * y[2]]);
        }
        acc
    }

    pub fn apply_matrix(&self, f: &(dyn Fn(&Point) -> Mat + Send + Sync), x: &Point, eps: f64) -> Mat {
        let mut acc = [[0.0; 3]; 3];
        for (y, w) in self.nodes.iter().zip(&self.weights) {
            let v = f(&[x[0] - eps * y[0], x[1] - eps * y[1], x[2] - eps * y[2]]);
            for i in 0..3 {
                for j in 0..3 {
                    acc[i][j] += w * v[i][j];
                }
            }
        }
        acc
    }

    /// ∇(f_ε)(x) = ε^{-1} ∫ ∇η(y) f(x − εy) dy.
    pub fn gradient_scalar(&self, f: &(dyn Fn(&Point) -> f64 + Send + Sync), x: &Point, eps: f64) -> Point {
        let mut g = [0.0; 3];
        for (y, w) in self.nodes.iter().zip(&self.gradient_weights) {
            let v = f(&[x[0] - eps * y[0], x[1] - eps * y[1], x[2] - eps * y[2]]);
            for k in 0..3 {
                g[k] += w[k] * v;
            }
        }
        [g[0] / eps, g[1] / eps, g[2] / eps]
    }
}

/// f_ε = f * η_ε, defined on B_{R−ε}.
pub fn mollify(f: &CoefficientField, eps: f64) -> Result<CoefficientField> {
    if !(eps > 0.0 && eps < 1.0) {
        return domain(format!("mollify needs eps in (0,1), got {eps}"));
    }
    if eps >= f.domain_radius {
        return domain("mollification scale exceeds the field domain");
    }
    let k = Mollifier::standard(f.dim);
    let label = format!("{}*eta[{eps:.4}]", f.label);
    let eval = match &f.eval {
        Eval::Scalar(g) => {
            let g = g.clone();
            Eval::Scalar(Arc::new(move |x: &Point| k.apply_scalar(g.as_ref(), x, eps)))
        }
        Eval::Matrix(g) => {
            let g = g.clone();
            Eval::Matrix(Arc::new(move |x: &Point| k.apply_matrix(g.as_ref(), x, eps)))
        }
    };
    let omega = f.declared_modulus.as_ref().map(|m| m.omega(eps));
    Ok(CoefficientField {
        dim: f.dim,
        ellipticity: f.ellipticity,
        declared_modulus: f.declared_modulus.clone(),
        holder: f.holder,
        domain_radius: f.domain_radius - eps,
        mollification: Some(MollifyInfo {
            eps,
            sup_distance_bound: omega,
            gradient_bound: omega.map(|w| k.gradient_integral * w / eps),
        }),
        label,
        config: None,
        eval,
    })
}

/// Gradient of the mollification of a scalar field.
pub fn mollified_gradient(f: &CoefficientField, eps: f64, x: &Point) -> Result<Point> {
    match &f.eval {
        Eval::Scalar(g) => Ok(Mollifier::standard(f.dim).gradient_scalar(g.as_ref(), x, eps)),
        Eval::Matrix(_) => Err(Error::Unsupported("mollified_gradient is defined for scalar fields".into())),
    }
}

// ---------------------------------------------------------------------------
// 0-homogeneous projection

/// ā(x) = a(r·x/|x|), frozen along rays from the origin.
#[derive(Clone, Debug)]
pub struct HomogeneousField {
    pub field: CoefficientField,
    pub anchor_radius: f64,
}

impl HomogeneousField {
    pub fn value(&self, x: &Point) -> f64 {
        self.field.scalar(x)
    }
}

pub fn homogeneous_projection(f: &CoefficientField, r: f64) -> Result<HomogeneousField> {
    let g = match &f.eval {
        Eval::Scalar(g) => g.clone(),
        Eval::Matrix(_) => {
            return Err(Error::Unsupported("homogeneous projection is defined for isotropic fields only".into()))
        }
    };
    if !(r > 0.0) || r > f.domain_radius * (1.0 + 1e-12) {
        return domain(format!("homogeneous projection radius {r} outside (0, {}]", f.domain_radius));
    }
    let dim = f.dim;
    // At the origin the angular mean stands in for the (undefined) ray value.
    let g0 = g.clone();
    let origin_value = (0..64)
        .map(|j| {
            let t = 2.0 * std::f64::consts::PI * j as f64 / 64.0;
            g0(&[r * t.cos(), r * t.sin(), 0.0])
        })
        .sum::<f64>()
        / 64.0;
    let mut field = CoefficientField::isotropic(dim, format!("{}|H0[{r:.4}]", f.label), move |x: &Point| {
        let n = norm(x);
        if n == 0.0 {
            origin_value
        } else {
            let s = r / n;
            g(&[x[0] * s, x[1] * s, x[2] * s])
        }
    });
    field.domain_radius = f64::INFINITY;
    field.ellipticity = f.ellipticity;
    Ok(HomogeneousField { field, anchor_radius: r })
}

// ---------------------------------------------------------------------------
// Empirical regularity

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalModulus {
    /// Dyadic separations d_j = 2^{-j}.
    pub scales: Vec<f64>,
    /// Largest componentwise oscillation observed at each scale.
    pub oscillation: Vec<f64>,
    /// Fitted exponent; `None` when the field is constant.
    pub alpha: Option<f64>,
    pub c_h: f64,
    /// Least concave majorant of the samples, as a modulus.
    pub tabulated: Option<Modulus>,
}

/// Samples point pairs at separations 2^{-1}, …, 2^{-levels} and fits osc ≈ C_h·d^α
/// over the scales in [fit_lo, fit_hi].
pub fn empirical_modulus_with(
    f: &CoefficientField,
    sample_count: usize,
    levels: usize,
    fit_range: (f64, f64),
) -> Result<EmpiricalModulus> {
    if sample_count < 100 {
        return domain(format!("empirical_modulus needs sample_count >= 100, got {sample_count}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xD1AD);
    let radius = f.domain_radius.min(1.0);
    // Common random numbers: the same base points and directions at every scale.
    let base: Vec<(Point, Point)> = (0..sample_count)
        .map(|_| (random_in_ball(&mut rng, f.dim, 1.0), random_direction(&mut rng, f.dim)))
        .collect();
    let mut scales = Vec::new();
    let mut oscillation = Vec::new();
    for j in 1..=levels {
        let d = 0.5f64.powi(j as i32);
        let inner = radius - d;
        let mut osc: f64 = 0.0;
        for (x0, e) in &base {
            let x = [x0[0] * inner, x0[1] * inner, x0[2] * inner];
            let y = [x[0] + d * e[0], x[1] + d * e[1], x[2] + d * e[2]];
            let (a, b) = (f.value(&x), f.value(&y));
            for i in 0..f.dim {
                for k in i..f.dim {
                    osc = osc.max((a[i][k] - b[i][k]).abs());
                }
            }
        }
        scales.push(d);
        oscillation.push(osc);
    }
    let floor = 1e-13;
    let fit: Vec<(f64, f64)> = scales
        .iter()
        .zip(&oscillation)
        .filter(|(d, o)| **d >= fit_range.0 && **d <= fit_range.1 && **o > floor)
        .map(|(d, o)| (d.ln(), o.ln()))
        .collect();
    if oscillation.iter().all(|o| *o <= floor) {
        return Ok(EmpiricalModulus { scales, oscillation, alpha: None, c_h: 0.0, tabulated: None });
    }
    let (alpha, c_h) = if fit.len() >= 2 {
        let xs: Vec<f64> = fit.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = fit.iter().map(|p| p.1).collect();
        let slope = least_squares_slope(&xs, &ys);
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        (Some(slope), (my - slope * mx).exp())
    } else {
        (None, oscillation.iter().cloned().fold(0.0, f64::max))
    };
    let tabulated = concave_majorant(&scales, &oscillation);
    Ok(EmpiricalModulus { scales, oscillation, alpha, c_h, tabulated })
}

pub fn empirical_modulus(f: &CoefficientField, sample_count: usize) -> Result<EmpiricalModulus> {
    empirical_modulus_with(f, sample_count, 10, (1.0 / 128.0, 0.5))
}

fn concave_majorant(scales: &[f64], osc: &[f64]) -> Option<Modulus> {
    let mut pts: Vec<(f64, f64)> = scales.iter().cloned().zip(osc.iter().cloned()).filter(|p| p.1 > 0.0).collect();
    if pts.is_empty() {
        return None;
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // Running max makes the data nondecreasing; the upper hull through the origin makes it concave.
    let mut run = 0.0f64;
    for p in pts.iter_mut() {
        run = run.max(p.1);
        p.1 = run;
    }
    let mut hull: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    for p in pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let samples: Vec<[f64; 2]> = hull.into_iter().skip(1).map(|p| [p.0, p.1]).collect();
    Modulus::tabulated(samples).ok()
}

// ---------------------------------------------------------------------------
// Generators

/// Default number of dyadic octaves in the Hölder generator.
pub const HOLDER_OCTAVES: usize = 4;

/// Random trigonometric series a(x) = 1 + amplitude·(S(x) − S(0))/Σ|c|, where each dyadic
/// shell 2^j ≤ |k| < 2^{j+1} contributes `directions` random wave vectors weighted by
/// |k|^{-α−n/2}·sqrt(shell lattice count / directions), reproducing a k^{-α−n/2} spectrum.
pub fn generate_holder(alpha: f64, amplitude: f64, seed: u64, n: usize) -> Result<CoefficientField> {
    generate_holder_with(alpha, amplitude, seed, n, HOLDER_OCTAVES, 6)
}

pub fn generate_holder_with(
    alpha: f64,
    amplitude: f64,
    seed: u64,
    n: usize,
    octaves: usize,
    directions: usize,
) -> Result<CoefficientField> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("generate_holder needs alpha in (0,1), got {alpha}"));
    }
    if !(n == 2 || n == 3) {
        return domain(format!("generate_holder needs n in {{2,3}}, got {n}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms: Vec<(Point, f64, f64)> = Vec::new();
    for j in 0..octaves {
        let lo = 2f64.powi(j as i32);
        let shell = match n {
            2 => std::f64::consts::PI * 3.0 * lo * lo,
            _ => 4.0 / 3.0 * std::f64::consts::PI * 7.0 * lo * lo * lo,
        };
        for _ in 0..directions {
            let kmag = rng.random_range(lo..2.0 * lo);
            let dir = random_direction(&mut rng, n);
            let xi: f64 = StandardNormal.sample(&mut rng);
            let phase = rng.random_range(0.0..2.0 * std::f64::consts::PI);
            let c = kmag.powf(-alpha - n as f64 / 2.0) * (shell / directions as f64).sqrt() * xi;
            let k = [2.0 * std::f64::consts::PI * kmag * dir[0], 2.0 * std::f64::consts::PI * kmag * dir[1], 2.0 * std::f64::consts::PI * kmag * dir[2]];
            terms.push((k, c, phase));
        }
    }
    let total: f64 = terms.iter().map(|t| t.1.abs()).sum();
    let s0: f64 = terms.iter().map(|(_, c, ph)| c * ph.cos()).sum();
    let scale = if total > 0.0 { amplitude / total } else { 0.0 };
    let terms = Arc::new(terms);
    let field = CoefficientField::isotropic(n, format!("holder(alpha={alpha},amp={amplitude},seed={seed})"), move |x| {
        let s: f64 = terms.iter().map(|(k, c, ph)| c * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + ph).cos()).sum();
        1.0 + scale * (s - s0)
    });
    let (lo, hi) = field.ellipticity_range(4096);
    if lo < 0.5 || hi > 2.0 {
        return Err(Error::Generation(format!(
            "Hölder field (alpha={alpha}, amplitude={amplitude}, seed={seed}) leaves [1/2, 2]: range [{lo:.3}, {hi:.3}]"
        )));
    }
    let c_h = if amplitude == 0.0 {
        0.0
    } else {
        empirical_modulus_with(&field, 400, 8, (2f64.powi(-(octaves as i32)), 0.5))?.c_h
    };
    Ok(field.with_holder(alpha, c_h).with_modulus(Modulus::power(alpha)?))
}

/// Smooth random anisotropic field I + amplitude·S(x) with S symmetric, |S| ≤ 1 entrywise
/// and S(0) = 0.
pub fn random_smooth_anisotropic(amplitude: f64, modes: usize, seed: u64) -> CoefficientField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries: Vec<Vec<(Point, f64, f64)>> = Vec::new();
    for _ in 0..3 {
        let mut t = Vec::new();
        for _ in 0..modes {
            let kmag = rng.random_range(0.5..3.0);
            let dir = random_direction(&mut rng, 2);
            let c: f64 = rng.random_range(-1.0..1.0);
            let ph = rng.random_range(0.0..2.0 * std::f64::consts::PI);
            t.push(([kmag * dir[0], kmag * dir[1], 0.0], c, ph));
        }
        let norm1: f64 = t.iter().map(|x| x.1.abs()).sum::<f64>().max(1e-12);
        for x in t.iter_mut() {
            x.1 /= 2.0 * norm1;
        }
        entries.push(t);
    }
    let entries = Arc::new(entries);
    let eval = move |x: &Point, e: usize| -> f64 {
        entries[e].iter().map(|(k, c, ph)| c * ((k[0] * x[0] + k[1] * x[1] + ph).cos() - ph.cos())).sum()
    };
    CoefficientField::anisotropic(2, format!("random_smooth(amp={amplitude},seed={seed})"), move |x| {
        let (a, b, c) = (eval(x, 0), eval(x, 1), eval(x, 2));
        [[1.0 + amplitude * a, amplitude * b, 0.0], [amplitude * b, 1.0 + amplitude * c, 0.0], [0.0, 0.0, 0.0]]
    })
    .with_modulus(Modulus::linear())
}

/// sin²(π(|x|−r)/(1−r)) on r < |x| < 1, zero elsewhere.
pub fn annular_bump(x: &Point, r_inner: f64) -> f64 {
    let rho = norm(x);
    if rho <= r_inner || rho >= 1.0 {
        0.0
    } else {
        (std::f64::consts::PI * (rho - r_inner) / (1.0 - r_inner)).sin().powi(2)
    }
}

/// A + ε·bump(|x|)·S with S = [[0.8, 0.6], [0.6, −0.8]] (isotropic fields get a + ε·bump).
pub fn perturb_annulus(base: &CoefficientField, eps: f64, r_inner: f64) -> CoefficientField {
    let b = base.clone();
    let label = format!("{}+{eps}*bump[{r_inner}]", base.label);
    let mut out = if base.is_isotropic() {
        CoefficientField::isotropic(base.dim, label, move |x| b.scalar(x) + eps * annular_bump(x, r_inner))
    } else {
        CoefficientField::anisotropic(base.dim, label, move |x| {
            let mut a = b.value(x);
            let w = eps * annular_bump(x, r_inner);
            a[0][0] += 0.8 * w;
            a[0][1] += 0.6 * w;
            a[1][0] += 0.6 * w;
            a[1][1] -= 0.8 * w;
            a
        })
    };
    out.declared_modulus = base.declared_modulus.clone();
    out
}

// ---------------------------------------------------------------------------
// Config records

/// Serialisable field recipe `{arity, kind, params, seed}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub arity: Arity,
    pub kind: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
    /// Rescale so the value at the origin is the identity.
    #[serde(default)]
    pub normalize: bool,
}

impl FieldConfig {
    pub fn new(arity: Arity, kind: &str, params: &[(&str, f64)], seed: u64) -> Self {
        FieldConfig {
            arity,
            kind: kind.into(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            seed,
            normalize: false,
        }
    }

    pub fn identity() -> Self {
        Self::new(Arity::Anisotropic, "identity", &[], 0)
    }

    pub fn build(&self) -> Result<CoefficientField> {
        let mut f = build_field(self)?;
        if self.normalize {
            f = f.normalized()?;
        }
        f.config = Some(self.clone());
        Ok(f)
    }
}

struct Params<'a> {
    kind: &'a str,
    map: &'a BTreeMap<String, f64>,
    used: std::cell::RefCell<Vec<&'static str>>,
}

impl<'a> Params<'a> {
    fn get(&self, key: &'static str, default: Option<f64>) -> Result<f64> {
        self.used.borrow_mut().push(key);
        match (self.map.get(key), default) {
            (Some(v), _) => Ok(*v),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(Error::Config(format!("field kind '{}' requires params.{key}", self.kind))),
        }
    }

    fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        for k in self.map.keys() {
            if !used.iter().any(|u| u == k) {
                return Err(Error::Config(format!("unknown key params.{k} for field kind '{}'", self.kind)));
            }
        }
        Ok(())
    }
}

const ROTATION_S: [[f64; 2]; 2] = [[0.8, 0.6], [0.6, -0.8]];

fn build_field(cfg: &FieldConfig) -> Result<CoefficientField> {
    let p = Params { kind: &cfg.kind, map: &cfg.params, used: Default::default() };
    let dim = p.get("n", Some(2.0))? as usize;
    if !(dim == 2 || dim == 3) {
        return Err(Error::Config(format!("params.n must be 2 or 3, got {dim}")));
    }
    let iso = cfg.arity == Arity::Isotropic;
    let field = match (cfg.kind.as_str(), iso) {
        ("identity", false) => CoefficientField::identity(dim),
        ("constant", true) => CoefficientField::constant(dim, p.get("value", Some(1.0))?),
        ("diagonal", false) => {
            let d: Vec<f64> = ["d1", "d2", "d3"][..dim].iter().map(|k| p.get(k, Some(1.0))).collect::<Result<_>>()?;
            CoefficientField::diagonal(&d).with_modulus(Modulus::linear())
        }
        ("affine", true) => {
            let (b, g1, g2, g3) = (p.get("base", Some(1.0))?, p.get("g1", Some(0.0))?, p.get("g2", Some(0.0))?, p.get("g3", Some(0.0))?);
            let c_h = (g1 * g1 + g2 * g2 + g3 * g3).sqrt();
            CoefficientField::isotropic(dim, format!("affine({b},{g1},{g2},{g3})"), move |x| b + g1 * x[0] + g2 * x[1] + g3 * x[2])
                .with_modulus(Modulus::linear())
                .with_holder(1.0, c_h)
        }
        ("radial", true) => {
            let (b, s) = (p.get("base", Some(1.0))?, p.get("slope", None)?);
            CoefficientField::isotropic(dim, format!("radial({b},{s})"), move |x| b + s * norm(x))
                .with_modulus(Modulus::linear())
                .with_holder(1.0, s.abs())
        }
        ("angular_sine", true) => {
            let (b, a, k, ph) = (p.get("base", Some(1.0))?, p.get("amplitude", None)?, p.get("freq", Some(1.0))?, p.get("phase", Some(0.0))?);
            // 0-homogeneous; the origin takes the angular mean.
            CoefficientField::isotropic(dim, format!("angular_sine({b},{a},{k})"), move |x| {
                if x[0] == 0.0 && x[1] == 0.0 {
                    b
                } else {
                    b + a * (k * x[1].atan2(x[0]) + ph).sin()
                }
            })
        }
        ("holder", true) => {
            let (alpha, amp) = (p.get("alpha", None)?, p.get("amplitude", None)?);
            let oct = p.get("octaves", Some(HOLDER_OCTAVES as f64))? as usize;
            let dirs = p.get("directions", Some(6.0))? as usize;
            generate_holder_with(alpha, amp, cfg.seed, dim, oct, dirs)?
        }
        ("radial_bump", true) => {
            let (b, eps, r) = (p.get("base", Some(1.0))?, p.get("eps", None)?, p.get("r_inner", None)?);
            CoefficientField::isotropic(dim, format!("radial_bump({b},{eps},{r})"), move |x| b + eps * annular_bump(x, r))
                .with_modulus(Modulus::linear())
        }
        ("lipschitz_sine", false) => {
            let (delta, k) = (p.get("delta", Some(0.1))?, p.get("k", Some(2.0))?);
            CoefficientField::anisotropic(2, format!("lipschitz_sine({delta},{k})"), move |x| {
                let (s1, s2) = ((k * x[0]).sin(), (k * x[1]).sin());
                [[1.0 + delta * 0.8 * s1, delta * 0.6 * s2, 0.0], [delta * 0.6 * s2, 1.0 - delta * 0.8 * s1, 0.0], [0.0; 3]]
            })
            .with_modulus(Modulus::linear())
            .with_holder(1.0, delta * k)
        }
        ("log_lipschitz", false) => {
            let (amp, pw) = (p.get("amplitude", Some(0.1))?, p.get("p", Some(1.0))?);
            let c = [p.get("c1", Some(0.3))?, p.get("c2", Some(0.2))?, 0.0];
            let m = Modulus::log_power(pw)?;
            let w0 = m.omega(norm(&c));
            let mm = m.clone();
            CoefficientField::anisotropic(2, format!("log_lipschitz(amp={amp},p={pw})"), move |x| {
                let w = amp * (mm.omega(norm(&[x[0] - c[0], x[1] - c[1], 0.0])) - w0);
                rotated_perturbation(w)
            })
            .with_modulus(m)
        }
        ("holder_aniso", false) => {
            let (alpha, amp) = (p.get("alpha", None)?, p.get("amplitude", Some(0.1))?);
            let c = [p.get("c1", Some(0.3))?, p.get("c2", Some(0.2))?, 0.0];
            let m = Modulus::power(alpha)?;
            let w0 = m.omega(norm(&c));
            let mm = m.clone();
            CoefficientField::anisotropic(2, format!("holder_aniso(alpha={alpha},amp={amp})"), move |x| {
                let w = amp * (mm.omega(norm(&[x[0] - c[0], x[1] - c[1], 0.0])) - w0);
                rotated_perturbation(w)
            })
            .with_modulus(m)
            .with_holder(alpha, amp)
        }
        ("random_smooth", false) => {
            random_smooth_anisotropic(p.get("amplitude", Some(0.2))?, p.get("modes", Some(6.0))? as usize, cfg.seed)
        }
        (kind, _) => {
            return Err(Error::Config(format!("unknown field kind '{kind}' for arity {:?}", cfg.arity)));
        }
    };
    p.finish()?;
    if dim != 2 && !iso && cfg.kind != "identity" && cfg.kind != "diagonal" {
        return Err(Error::Config(format!("field kind '{}' is two-dimensional", cfg.kind)));
    }
    let (lo, hi) = field.ellipticity_range(2048);
    if lo <= 0.0 || !hi.is_finite() {
        return Err(Error::Config(format!("field '{}' is not elliptic: eigenvalues in [{lo:.4}, {hi:.4}]", field.label)));
    }
    Ok(field)
}

fn rotated_perturbation(w: f64) -> Mat {
    [
        [1.0 + w * ROTATION_S[0][0], w * ROTATION_S[0][1], 0.0],
        [w * ROTATION_S[1][0], 1.0 + w * ROTATION_S[1][1], 0.0],
        [0.0; 3],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_sqrt_normalizes() {
        let a = [[2.0, 0.3, 0.0], [0.3, 1.0, 0.0], [0.0; 3]];
        let p = inverse_sqrt_2x2(&a);
        // P A P = I
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        out[i][j] += p[i][k] * a[k][l] * p[l][j];
                    }
                }
            }
        }
        assert!((out[0][0] - 1.0).abs() < 1e-12 && (out[1][1] - 1.0).abs() < 1e-12 && out[0][1].abs() < 1e-12);
    }

    #[test]
    fn eigen_3x3_matches_diagonal() {
        let m = [[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]];
        assert_eq!(eigen_extremes(&m, 3), (1.0, 3.0));
        let m = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 5.0]];
        let (lo, hi) = eigen_extremes(&m, 3);
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 5.0).abs() < 1e-12);
    }
}
