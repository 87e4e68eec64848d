//! Almgren frequency, the two-scale frequency, doubling indices, vanishing order, and
//! checks of the monotonicity statements and the H-derivative identity.

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientField, Point};
use crate::error::{domain, Error, Result};
use crate::io::csv_table;
use crate::modulus::least_squares_slope;
use crate::solver::{DiscreteSolution, EnergyForm, NodeSamples, Scheme};
use crate::svg::Plot;

/// Relative floor below which H is treated as zero.
pub const VANISHING_FLOOR: f64 = 1e-14;
/// Slopes of log N above −this count as nonnegative.
pub const SLOPE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// μ = ⟨Aν,ν⟩.
    MuWeighted,
    /// A scalar weight ā (label recorded).
    ScalarWeighted(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyProfile {
    /// Radii in decreasing order.
    pub radii: Vec<f64>,
    pub d: Vec<f64>,
    pub h: Vec<f64>,
    pub n: Vec<f64>,
    pub weight_kind: WeightKind,
}

impl FrequencyProfile {
    pub fn to_csv(&self) -> String {
        let rows: Vec<Vec<f64>> = (0..self.radii.len()).map(|i| vec![self.radii[i], self.d[i], self.h[i], self.n[i]]).collect();
        csv_table(&["r", "D", "H", "N"], &rows)
    }

    pub fn plot(&self, title: &str) -> String {
        let pts = self.radii.iter().zip(&self.n).map(|(r, n)| (*r, *n)).collect();
        let mut p = Plot::new(title, "r", "N(r)").with_series("N", pts);
        p.log_x = true;
        p.render()
    }

    /// max_i N_i.
    pub fn sup(&self) -> f64 {
        self.n.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn sorted_radii(radii: &[f64]) -> Vec<f64> {
    let mut r = radii.to_vec();
    r.sort_by(|a, b| b.partial_cmp(a).unwrap());
    r.dedup();
    r
}

fn grid_mean_sq(u: &DiscreteSolution) -> f64 {
    u.values.iter().map(|v| v * v).sum::<f64>() / u.values.len() as f64
}

fn check_mass(u: &DiscreteSolution, h: f64, r: f64, scale: f64) -> Result<()> {
    if !(h > VANISHING_FLOOR * grid_mean_sq(u) * scale) {
        return Err(Error::VanishingBoundary { radius: r });
    }
    Ok(())
}

/// Energies D(r) = ∫_{B_r}⟨A∇u,∇u⟩ for the field f. When f is the field u solves,
/// the boundary-flux form is used; otherwise the volume form of f on u's grid.
fn energies(u: &DiscreteSolution, f: &CoefficientField, radii: &[f64]) -> Result<Vec<f64>> {
    if f.same_as(&u.field) {
        return radii.iter().map(|&r| u.dirichlet_energy(r)).collect();
    }
    let samples = NodeSamples::sample(f, &u.grid, None)?;
    let form = EnergyForm::build(&samples, Scheme::Auto)?;
    let cum = form.cumulative_energy(&u.values);
    radii
        .iter()
        .map(|&r| {
            if !u.grid.contains_radius(r) {
                return domain(format!("radius {r} outside the grid"));
            }
            Ok(crate::solver::interpolate_profile(&u.grid, &cum, r))
        })
        .collect()
}

/// N(r) = r·D(r)/H(r) with the μ-weighted boundary mass of f.
pub fn almgren_frequency(u: &DiscreteSolution, f: &CoefficientField, radii: &[f64]) -> Result<FrequencyProfile> {
    let radii = sorted_radii(radii);
    let d = energies(u, f, &radii)?;
    let mut h = Vec::with_capacity(radii.len());
    for &r in &radii {
        let m = if f.same_as(&u.field) { u.own_boundary_mass(r)? } else { u.boundary_mass(f, r)? };
        check_mass(u, m, r, 2.0 * std::f64::consts::PI * r)?;
        h.push(m);
    }
    let n = radii.iter().zip(d.iter().zip(&h)).map(|(r, (d, h))| r * d / h).collect();
    Ok(FrequencyProfile { radii, d, h, n, weight_kind: WeightKind::MuWeighted })
}

/// N with H = ∫_{∂B_r} ā u² dσ for a scalar weight ā; D from the field f.
pub fn scalar_weighted_frequency(
    u: &DiscreteSolution,
    f: &CoefficientField,
    a_bar: &CoefficientField,
    radii: &[f64],
) -> Result<FrequencyProfile> {
    let radii = sorted_radii(radii);
    let d = energies(u, f, &radii)?;
    let mut h = Vec::with_capacity(radii.len());
    for &r in &radii {
        let m = r * u.boundary_mass_scalar(&|x: &Point| a_bar.scalar(x), r)?;
        check_mass(u, m, r, 2.0 * std::f64::consts::PI * r)?;
        h.push(m);
    }
    let n = radii.iter().zip(d.iter().zip(&h)).map(|(r, (d, h))| r * d / h).collect();
    Ok(FrequencyProfile { radii, d, h, n, weight_kind: WeightKind::ScalarWeighted(a_bar.label.clone()) })
}

/// Ñ(r, ρ) = log(h(r)/h(ρ)) / (2 log(r/ρ)) with h(t) = t^{1−n}∫_{∂B_t} ā u².
pub fn two_scale_frequency(u: &DiscreteSolution, a_bar: &CoefficientField, r: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < r) {
        return domain(format!("two_scale_frequency needs 0 < rho < r, got rho = {rho}, r = {r}"));
    }
    let a = |x: &Point| a_bar.scalar(x);
    let hr = u.boundary_mass_scalar(&a, r)?;
    let hp = u.boundary_mass_scalar(&a, rho)?;
    check_mass(u, hp, rho, 2.0 * std::f64::consts::PI)?;
    check_mass(u, hr, r, 2.0 * std::f64::consts::PI)?;
    Ok((hr / hp).ln() / (2.0 * (r / rho).ln()))
}

/// log₂ of the ratio of the mean of u² over ∂B_r to that over ∂B_{r/2}.
pub fn doubling_index(u: &DiscreteSolution, r: f64) -> Result<f64> {
    let outer = u.sphere_mean_sq(r)?;
    let inner = u.sphere_mean_sq(0.5 * r)?;
    check_mass(u, inner, 0.5 * r, 1.0)?;
    check_mass(u, outer, r, 1.0)?;
    Ok((outer / inner).log2())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishingOrderFit {
    pub order: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub radii: Vec<f64>,
    pub means: Vec<f64>,
}

/// Fits mean_{B_r} u² ≈ c·r^{2N̂}.
pub fn vanishing_order(u: &DiscreteSolution, radii: &[f64]) -> Result<VanishingOrderFit> {
    let radii = sorted_radii(radii);
    if radii.len() < 5 {
        return domain("vanishing_order needs at least 5 radii");
    }
    if radii[0] / radii[radii.len() - 1] < 4.0 * (1.0 - 1e-12) {
        return domain("vanishing_order radii must span at least two octaves");
    }
    let means: Vec<f64> = radii.iter().map(|&r| u.ball_mean_sq(r)).collect::<Result<_>>()?;
    let floor = VANISHING_FLOOR * grid_mean_sq(u);
    if means.iter().all(|m| *m <= floor) || means.iter().any(|m| *m <= 0.0) {
        return Err(Error::Indeterminate("u² is below the noise floor on the fit radii".into()));
    }
    let x: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let y: Vec<f64> = means.iter().map(|m| m.ln()).collect();
    let slope = least_squares_slope(&x, &y);
    let xm = x.iter().sum::<f64>() / x.len() as f64;
    let ym = y.iter().sum::<f64>() / y.len() as f64;
    let residual = (x.iter().zip(&y).map(|(a, b)| (b - ym - slope * (a - xm)).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
    Ok(VanishingOrderFit { order: 0.5 * slope, residual, radii, means })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeSample {
    pub r: f64,
    /// d/dr log N.
    pub slope: f64,
    /// max(0, −slope)/(M + δ/r), zero when the slope clears −SLOPE_TOLERANCE.
    pub needed_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlmostMonotonicityReport {
    pub fitted_c: f64,
    pub samples: Vec<SlopeSample>,
    /// Radii whose needed constant exceeds ten times the median.
    pub violations: Vec<f64>,
}

/// d/dr log N by centred differences in log r (one-sided at the ends).
pub fn log_slopes(profile: &FrequencyProfile) -> Vec<(f64, f64)> {
    let k = profile.radii.len();
    let s: Vec<f64> = profile.radii.iter().map(|r| r.ln()).collect();
    let l: Vec<f64> = profile.n.iter().map(|n| n.max(f64::MIN_POSITIVE).ln()).collect();
    (0..k)
        .filter(|_| k >= 2)
        .map(|i| {
            let (a, b) = if i == 0 { (0, 1) } else if i == k - 1 { (k - 2, k - 1) } else { (i - 1, i + 1) };
            (profile.radii[i], (l[a] - l[b]) / (s[a] - s[b]) / profile.radii[i])
        })
        .collect()
}

/// Smallest C with d/dr log N ≥ −C(M + δ/r) on every sample.
pub fn verify_almost_monotonicity(profile: &FrequencyProfile, m: f64, delta: f64) -> AlmostMonotonicityReport {
    let samples: Vec<SlopeSample> = log_slopes(profile)
        .into_iter()
        .map(|(r, slope)| {
            let deficit = -slope;
            let scale = m + delta / r;
            let needed_c = if deficit <= SLOPE_TOLERANCE {
                0.0
            } else if scale > 0.0 {
                deficit / scale
            } else {
                f64::INFINITY
            };
            SlopeSample { r, slope, needed_c }
        })
        .collect();
    let fitted_c = samples.iter().map(|s| s.needed_c).fold(0.0, f64::max);
    let mut cs: Vec<f64> = samples.iter().map(|s| s.needed_c).collect();
    cs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if cs.is_empty() { 0.0 } else { cs[cs.len() / 2] };
    let violations = if median > 0.0 {
        samples.iter().filter(|s| s.needed_c > 10.0 * median).map(|s| s.r).collect()
    } else {
        Vec::new()
    };
    AlmostMonotonicityReport { fitted_c, samples, violations }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HIdentityReport {
    pub radii: Vec<f64>,
    /// e(r) = d/dr log(r^{1−n}H) − 2N/r.
    pub e: Vec<f64>,
    /// |e(r)|/(M + δ/r); empty when M = δ = 0.
    pub normalized: Vec<f64>,
    pub sup_abs: f64,
    pub sup_normalized: Option<f64>,
}

/// d/dr log(r^{−1}H(r)) by the five-point formula in log r with the grid's log step.
fn log_h_derivative(u: &DiscreteSolution, r: f64, weight: &dyn Fn(f64) -> Result<f64>) -> Result<f64> {
    let step = u.grid.log_step;
    let mut vals = [0.0; 4];
    for (k, o) in [-2.0, -1.0, 1.0, 2.0].iter().enumerate() {
        let t = r * (o * step).exp();
        vals[k] = (weight(t)? / t).ln();
    }
    let d_ds = (vals[0] - 8.0 * vals[1] + 8.0 * vals[2] - vals[3]) / (12.0 * step);
    Ok(d_ds / r)
}

/// Checks d/dr log(r^{1−n}H) = 2N/r + e(r) and reports e.
pub fn verify_h_identity(u: &DiscreteSolution, f: &CoefficientField, radii: &[f64], m: f64, delta: f64) -> Result<HIdentityReport> {
    let profile = almgren_frequency(u, f, radii)?;
    let own = f.same_as(&u.field);
    let weight = |t: f64| if own { u.own_boundary_mass(t) } else { u.boundary_mass(f, t) };
    let mut e = Vec::with_capacity(profile.radii.len());
    for (i, &r) in profile.radii.iter().enumerate() {
        e.push(log_h_derivative(u, r, &weight)? - 2.0 * profile.n[i] / r);
    }
    let normalized: Vec<f64> = if m + delta > 0.0 {
        profile.radii.iter().zip(&e).map(|(r, e)| e.abs() / (m + delta / r)).collect()
    } else {
        Vec::new()
    };
    Ok(HIdentityReport {
        sup_abs: e.iter().map(|v| v.abs()).fold(0.0, f64::max),
        sup_normalized: (!normalized.is_empty()).then(|| normalized.iter().cloned().fold(0.0, f64::max)),
        radii: profile.radii,
        e,
        normalized,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousMonotonicityReport {
    pub profile: FrequencyProfile,
    /// Largest decrease N(r_i) − N(r_{i+1}) between consecutive increasing radii.
    pub max_violation: f64,
    pub tolerance: f64,
    pub monotone: bool,
    /// sup |d/dr log h − 2N/r|.
    pub h_identity_residual: f64,
}

/// Default ε_h for the monotonicity check.
pub const MONOTONICITY_TOLERANCE: f64 = 5e-3;

/// Checks that N_u^ā is nondecreasing for a 0-homogeneous isotropic ā.
pub fn verify_homogeneous_monotonicity(
    u: &DiscreteSolution,
    a_bar: &CoefficientField,
    radii: &[f64],
    tolerance: f64,
) -> Result<HomogeneousMonotonicityReport> {
    if !a_bar.is_isotropic() {
        return Err(Error::Unsupported("homogeneous monotonicity is stated for isotropic fields".into()));
    }
    let profile = scalar_weighted_frequency(u, a_bar, a_bar, radii)?;
    // Radii are stored decreasing, so a violation is N_{i+1} > N_i.
    let max_violation = profile.n.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let weight = |t: f64| Ok(t * u.boundary_mass_scalar(&|x: &Point| a_bar.scalar(x), t)?);
    let mut resid: f64 = 0.0;
    for (i, &r) in profile.radii.iter().enumerate() {
        resid = resid.max((log_h_derivative(u, r, &weight)? - 2.0 * profile.n[i] / r).abs());
    }
    Ok(HomogeneousMonotonicityReport {
        monotone: max_violation <= tolerance,
        max_violation,
        tolerance,
        h_identity_residual: resid,
        profile,
    })
}

/// Geometric radii from r_hi down to r_lo (inclusive).
pub fn geometric_radii(r_lo: f64, r_hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| r_hi * (r_lo / r_hi).powf(i as f64 / (count.max(2) - 1) as f64)).collect()
}

/// Grid rings within [r_lo, r_hi], decreasing.
pub fn ring_radii(u: &DiscreteSolution, r_lo: f64, r_hi: f64) -> Vec<f64> {
    let mut out: Vec<f64> = u.grid.radii().into_iter().filter(|r| *r >= r_lo * (1.0 - 1e-12) && *r <= r_hi * (1.0 + 1e-12)).collect();
    out.reverse();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_dirichlet, BoundaryData, PolarGrid};

    #[test]
    fn linear_function_has_frequency_one() {
        let f = CoefficientField::identity(2);
        let grid = PolarGrid::new(64, 64, 1.0).unwrap();
        let u = solve_dirichlet(&f, 1.0, &BoundaryData::harmonic(1), &grid).unwrap();
        let p = almgren_frequency(&u, &f, &[0.3, 0.5, 0.7]).unwrap();
        for n in &p.n {
            assert!((n - 1.0).abs() < 5e-3, "{n}");
        }
        assert!((doubling_index(&u, 0.8).unwrap() - 2.0).abs() < 1e-2);
    }

    #[test]
    fn constant_has_frequency_zero() {
        let f = CoefficientField::identity(2);
        let grid = PolarGrid::new(32, 32, 1.0).unwrap();
        let u = solve_dirichlet(&f, 1.0, &BoundaryData::Constant { value: 2.0 }, &grid).unwrap();
        let p = almgren_frequency(&u, &f, &[0.5]).unwrap();
        assert!(p.n[0].abs() < 1e-8);
        let one = CoefficientField::constant(2, 1.0);
        assert!(two_scale_frequency(&u, &one, 0.8, 0.4).unwrap().abs() < 1e-8);
    }
}
