//! Moduli of continuity, the transforms φ(s) = ω(s)/s and ψ(s) = φ(1/s),
//! the Osgood classifier and the structural checks used by the growth machinery.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quad;

/// Number of dyadic levels used by the divergence tests.
pub const DEFAULT_DEPTH: usize = 40;
/// Summability tolerance on the tail of a dyadic series.
pub const SUMMABILITY_TOL: f64 = 1e-8;

/// Parametric description of a modulus; serialises as `{kind, params}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModulusKind {
    Linear,
    Power { alpha: f64 },
    LogPower { p: f64 },
    Tabulated { samples: Vec<[f64; 2]> },
}

/// A concave, nondecreasing gauge ω with ω(0) = 0.
///
/// `LogPower(p)` is t·log(1/t)^p on (0, t_cut] with t_cut = e^{-p}; the slope vanishes
/// at t_cut, so the matching linear extension is the constant ω(t_cut).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModulusKind", into = "ModulusKind")]
pub struct Modulus {
    kind: ModulusKind,
    // Log-log interpolation exponents for Tabulated, one per segment.
    slopes: Vec<f64>,
}

impl TryFrom<ModulusKind> for Modulus {
    type Error = Error;
    fn try_from(kind: ModulusKind) -> Result<Self> {
        Modulus::new(kind)
    }
}

impl From<Modulus> for ModulusKind {
    fn from(m: Modulus) -> Self {
        m.kind
    }
}

impl Modulus {
    pub fn new(kind: ModulusKind) -> Result<Self> {
        match &kind {
            ModulusKind::Linear => {}
            ModulusKind::Power { alpha } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return domain(format!("power modulus needs alpha in (0,1), got {alpha}"));
                }
            }
            ModulusKind::LogPower { p } => {
                if !(*p > 0.0 && p.is_finite()) {
                    return domain(format!("log-power modulus needs p > 0, got {p}"));
                }
            }
            ModulusKind::Tabulated { samples } => return Self::tabulated(samples.clone()),
        }
        Ok(Modulus { kind, slopes: Vec::new() })
    }

    pub fn linear() -> Self {
        Modulus { kind: ModulusKind::Linear, slopes: Vec::new() }
    }

    pub fn power(alpha: f64) -> Result<Self> {
        Self::new(ModulusKind::Power { alpha })
    }

    pub fn log_power(p: f64) -> Result<Self> {
        Self::new(ModulusKind::LogPower { p })
    }

    /// Samples (t, ω(t)) with 0 < t_1 < … ≤ 1, ω ≥ 0 nondecreasing and concave
    /// (slopes of consecutive chords, starting from the origin, nonincreasing).
    pub fn tabulated(samples: Vec<[f64; 2]>) -> Result<Self> {
        if samples.is_empty() {
            return domain("tabulated modulus needs at least one sample");
        }
        let mut prev = [0.0, 0.0];
        let mut prev_slope = f64::INFINITY;
        for s in &samples {
            let [t, w] = *s;
            if !(t > prev[0] && t <= 1.0 + 1e-12) || !w.is_finite() {
                return domain(format!("tabulated sample t={t} must increase within (0,1]"));
            }
            if w < prev[1] {
                return domain(format!("tabulated modulus decreases at t={t}"));
            }
            let slope = (w - prev[1]) / (t - prev[0]);
            if slope > prev_slope * (1.0 + 1e-9) + 1e-12 {
                return domain(format!("tabulated modulus is not concave at t={t}"));
            }
            prev_slope = slope;
            prev = *s;
        }
        let slopes = samples
            .windows(2)
            .map(|p| {
                let [t0, w0] = p[0];
                let [t1, w1] = p[1];
                if w0 > 0.0 && w1 > 0.0 {
                    (w1 / w0).ln() / (t1 / t0).ln()
                } else {
                    f64::NAN
                }
            })
            .collect();
        Ok(Modulus { kind: ModulusKind::Tabulated { samples }, slopes })
    }

    pub fn kind(&self) -> &ModulusKind {
        &self.kind
    }

    /// The domain cut of the log family, if any.
    pub fn t_cut(&self) -> Option<f64> {
        match self.kind {
            ModulusKind::LogPower { p } => Some((-p).exp()),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            ModulusKind::Linear => "t".into(),
            ModulusKind::Power { alpha } => format!("t^{alpha}"),
            ModulusKind::LogPower { p } => format!("t*log(1/t)^{p}"),
            ModulusKind::Tabulated { samples } => format!("tabulated[{}]", samples.len()),
        }
    }

    /// ω(t) for t ≥ 0; beyond 1 the natural extension of each kind is used.
    pub fn omega(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            ModulusKind::Linear => t,
            ModulusKind::Power { alpha } => t.powf(*alpha),
            ModulusKind::LogPower { p } => {
                let cut = (-p).exp();
                if t < cut {
                    t * (-t.ln()).powf(*p)
                } else {
                    cut * p.powf(*p)
                }
            }
            ModulusKind::Tabulated { samples } => self.tabulated_eval(samples, t),
        }
    }

    fn tabulated_eval(&self, samples: &[[f64; 2]], t: f64) -> f64 {
        let first = samples[0];
        let last = samples[samples.len() - 1];
        if t >= last[0] {
            return last[1];
        }
        if t <= first[0] {
            let q = self.slopes.first().copied().filter(|q| q.is_finite()).unwrap_or(1.0);
            return first[1] * (t / first[0]).powf(q);
        }
        let i = samples.partition_point(|s| s[0] <= t) - 1;
        let [t0, w0] = samples[i];
        let [t1, w1] = samples[i + 1];
        let q = self.slopes[i];
        if q.is_finite() {
            w0 * (t / t0).powf(q)
        } else {
            w0 + (w1 - w0) * (t - t0) / (t1 - t0)
        }
    }

    /// φ(s) = ω(s)/s, nonincreasing.
    pub fn phi(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return domain(format!("phi needs s > 0, got {s}"));
        }
        Ok(self.phi_unchecked(s))
    }

    /// ψ(s) = φ(1/s), nondecreasing.
    pub fn psi(&self, s: f64) -> Result<f64> {
        if !(s >= 1.0) {
            return domain(format!("psi needs s >= 1, got {s}"));
        }
        Ok(self.phi_unchecked(1.0 / s))
    }

    pub(crate) fn phi_unchecked(&self, s: f64) -> f64 {
        match self.kind {
            ModulusKind::Linear => 1.0,
            ModulusKind::Power { alpha } => s.powf(alpha - 1.0),
            _ => self.omega(s) / s,
        }
    }

    pub(crate) fn psi_unchecked(&self, s: f64) -> f64 {
        self.phi_unchecked(1.0 / s)
    }

    /// Analytic Osgood answer for the parametric kinds.
    pub fn analytic_osgood(&self) -> Option<OsgoodVerdict> {
        match self.kind {
            ModulusKind::Linear => Some(OsgoodVerdict::Osgood),
            ModulusKind::Power { .. } => Some(OsgoodVerdict::NonOsgood),
            ModulusKind::LogPower { p } => Some(if p <= 1.0 {
                OsgoodVerdict::Osgood
            } else {
                OsgoodVerdict::NonOsgood
            }),
            ModulusKind::Tabulated { .. } => None,
        }
    }
}

pub fn eval_phi(m: &Modulus, s: f64) -> Result<f64> {
    m.phi(s)
}

pub fn eval_psi(m: &Modulus, s: f64) -> Result<f64> {
    m.psi(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OsgoodVerdict {
    Osgood,
    NonOsgood,
    Inconclusive,
}

/// Behaviour of a dyadic series Σ Δ_k of positive increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesBehaviour {
    Divergent,
    Convergent,
    Undecided,
}

/// Diagnostics of a dyadic increment series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDiagnostics {
    pub behaviour: SeriesBehaviour,
    /// Cumulative partial sums.
    pub partial: Vec<f64>,
    /// Fitted power-law decay exponent q of Δ_k ~ k^{-q} over the tail.
    pub fitted_exponent: Option<f64>,
    /// Ratio Δ_{k+1}/Δ_k at the deepest level.
    pub tail_ratio: f64,
    /// Estimated remainder beyond the deepest level (infinite if divergent).
    pub tail_estimate: f64,
}

/// Classifies Σ Δ_k by (i) increments bounded below, (ii) geometric ratio test,
/// (iii) power-law exponent of the tail, (iv) remainder below the summability tolerance.
pub fn analyse_series(increments: &[f64]) -> SeriesDiagnostics {
    let mut partial = Vec::with_capacity(increments.len());
    let mut acc = 0.0;
    for d in increments {
        acc += d;
        partial.push(acc);
    }
    let n = increments.len();
    let tail = &increments[n / 2..];
    let ratios: Vec<f64> = tail
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { f64::NAN })
        .collect();
    let tail_ratio = ratios.last().copied().unwrap_or(f64::NAN);
    let last = increments[n - 1];
    let total = acc.abs().max(f64::MIN_POSITIVE);

    let ks: Vec<f64> = (n / 2..n).map(|k| ((k + 1) as f64).ln()).collect();
    let logs: Vec<f64> = tail.iter().map(|d| d.max(f64::MIN_POSITIVE).ln()).collect();
    let fitted_exponent = if tail.iter().all(|d| *d > 0.0) {
        Some(-least_squares_slope(&ks, &logs))
    } else {
        None
    };

    let bounded_below = ratios.iter().all(|r| r.is_finite() && *r >= 1.0 - 1e-3);
    let r_first = ratios.first().copied().unwrap_or(f64::NAN);
    // Geometric decay keeps 1 − r_k away from 0; power laws have 1 − r_k ~ q/k.
    let geometric = ratios.iter().all(|r| r.is_finite() && *r < 1.0 - 1e-3)
        && (1.0 - tail_ratio) > 0.8 * (1.0 - r_first);

    let (behaviour, tail_estimate) = if bounded_below {
        (SeriesBehaviour::Divergent, f64::INFINITY)
    } else if last == 0.0 {
        (SeriesBehaviour::Convergent, 0.0)
    } else if geometric {
        (SeriesBehaviour::Convergent, last * tail_ratio / (1.0 - tail_ratio))
    } else {
        match fitted_exponent {
            Some(q) if q > 1.25 => {
                // Σ_{k>n} k^{-q} ≈ n·Δ_n/(q−1)
                (SeriesBehaviour::Convergent, last * n as f64 / (q - 1.0))
            }
            Some(q) if q <= 1.1 => (SeriesBehaviour::Divergent, f64::INFINITY),
            _ => {
                let est = if tail_ratio < 1.0 { last * tail_ratio / (1.0 - tail_ratio) } else { f64::INFINITY };
                if est < SUMMABILITY_TOL * total {
                    (SeriesBehaviour::Convergent, est)
                } else {
                    (SeriesBehaviour::Undecided, est)
                }
            }
        }
    };
    SeriesDiagnostics { behaviour, partial, fitted_exponent, tail_ratio, tail_estimate }
}

pub(crate) fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Osgood classification with both answers kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsgoodReport {
    pub verdict: OsgoodVerdict,
    pub analytic: Option<OsgoodVerdict>,
    pub numeric: OsgoodVerdict,
    /// I_k = ∫_{2^{-k}}^1 dt/ω(t), k = 1..=depth.
    pub partial_integrals: Vec<f64>,
    pub fitted_exponent: Option<f64>,
    pub tail_ratio: f64,
    pub modulus: ModulusKind,
    pub t_cut: Option<f64>,
}

pub fn classify_osgood(m: &Modulus, depth: usize) -> Result<OsgoodReport> {
    if depth < 4 {
        return domain(format!("classify_osgood needs depth >= 4, got {depth}"));
    }
    if let ModulusKind::Tabulated { samples } = &m.kind {
        if samples.iter().any(|s| s[1] <= 0.0) {
            return domain("tabulated modulus vanishes on an interval");
        }
    }
    let f = |t: f64| 1.0 / m.omega(t);
    let increments = quad::dyadic_increments(&f, 1.0, depth, 1e-12);
    let diag = analyse_series(&increments);
    let numeric = match diag.behaviour {
        SeriesBehaviour::Divergent => OsgoodVerdict::Osgood,
        SeriesBehaviour::Convergent => OsgoodVerdict::NonOsgood,
        SeriesBehaviour::Undecided => OsgoodVerdict::Inconclusive,
    };
    let analytic = m.analytic_osgood();
    Ok(OsgoodReport {
        verdict: analytic.unwrap_or(numeric),
        analytic,
        numeric,
        partial_integrals: diag.partial,
        fitted_exponent: diag.fitted_exponent,
        tail_ratio: diag.tail_ratio,
        modulus: m.kind.clone(),
        t_cut: m.t_cut(),
    })
}

/// Result of a sampled inequality check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub holds: bool,
    pub worst_ratio: f64,
    pub worst_at: [f64; 2],
    pub constant: f64,
    pub samples: usize,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Checks ψ(xy) ≤ C_M·ψ(x)ψ(y) on a log grid of [1, 1e6]².
pub fn check_submultiplicative_psi(m: &Modulus, c_m: f64, sample_count: usize) -> Result<CheckReport> {
    check_submultiplicative_psi_on(m, c_m, sample_count, 1.0, 1e6)
}

/// As [`check_submultiplicative_psi`] on [lo, hi]².
pub fn check_submultiplicative_psi_on(
    m: &Modulus,
    c_m: f64,
    sample_count: usize,
    lo: f64,
    hi: f64,
) -> Result<CheckReport> {
    if sample_count < 16 {
        return domain(format!("sample_count must be >= 16, got {sample_count}"));
    }
    if !(lo >= 1.0 && hi > lo) {
        return domain("psi check needs 1 <= lo < hi");
    }
    let grid = log_grid(lo, hi, sample_count);
    let mut worst = (0.0f64, [lo, lo]);
    for &x in &grid {
        for &y in &grid {
            let ratio = m.psi_unchecked(x * y) / (m.psi_unchecked(x) * m.psi_unchecked(y));
            if ratio > worst.0 {
                worst = (ratio, [x, y]);
            }
        }
    }
    Ok(CheckReport {
        holds: worst.0 <= c_m,
        worst_ratio: worst.0,
        worst_at: worst.1,
        constant: c_m,
        samples: grid.len() * grid.len(),
    })
}

/// Checks φ(st) ≤ C·φ(s)φ(t) for 0 < s, t ≤ 1/C on a log grid reaching down to 1e-12.
pub fn check_phi_submultiplicative(m: &Modulus, c: f64) -> Result<CheckReport> {
    if !(c > 1.0) {
        return domain(format!("phi check needs C > 1, got {c}"));
    }
    check_phi_submultiplicative_on(m, c, 64, 1.0 / c)
}

/// As [`check_phi_submultiplicative`] on (0, hi]².
pub fn check_phi_submultiplicative_on(m: &Modulus, c: f64, sample_count: usize, hi: f64) -> Result<CheckReport> {
    if sample_count < 16 {
        return domain(format!("sample_count must be >= 16, got {sample_count}"));
    }
    let grid = log_grid(1e-12, hi, sample_count);
    let mut worst = (0.0f64, [hi, hi]);
    for &s in &grid {
        for &t in &grid {
            let ratio = m.phi_unchecked(s * t) / (m.phi_unchecked(s) * m.phi_unchecked(t));
            if ratio > worst.0 {
                worst = (ratio, [s, t]);
            }
        }
    }
    Ok(CheckReport {
        holds: worst.0 <= c,
        worst_ratio: worst.0,
        worst_at: worst.1,
        constant: c,
        samples: grid.len() * grid.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityReport {
    pub finite: bool,
    /// Limit estimate when finite, otherwise the deepest partial integral.
    pub value_or_bound: f64,
    pub behaviour: SeriesBehaviour,
    pub partial_integrals: Vec<f64>,
}

/// ∫_0^1 φ(s) ds via dyadic shells toward 0.
pub fn check_phi_integrable(m: &Modulus) -> IntegrabilityReport {
    let f = |s: f64| m.phi_unchecked(s);
    let increments = quad::dyadic_increments(&f, 1.0, DEFAULT_DEPTH, 1e-12);
    let diag = analyse_series(&increments);
    let partial_sum = *diag.partial.last().unwrap();
    let finite = diag.behaviour == SeriesBehaviour::Convergent;
    IntegrabilityReport {
        finite,
        value_or_bound: if finite { partial_sum + diag.tail_estimate } else { partial_sum },
        behaviour: diag.behaviour,
        partial_integrals: diag.partial,
    }
}

/// Exponent triple (β, τ, η) with τ(2−β)+η < 1 and βτ > 1/2 + 2η.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentTriple {
    pub beta: f64,
    pub tau: f64,
    pub eta: f64,
}

impl ExponentTriple {
    pub fn is_valid(&self) -> bool {
        self.tau * (2.0 - self.beta) + self.eta < 1.0 && self.beta * self.tau > 0.5 + 2.0 * self.eta
    }
}

pub fn select_exponents(alpha: f64) -> Result<ExponentTriple> {
    if !(alpha > 2.0 / 3.0 && alpha < 1.0) {
        return domain(format!("select_exponents needs alpha in (2/3, 1), got {alpha}"));
    }
    let beta = ((2.0 / 3.0 + alpha) / 2.0).min(alpha * (1.0 - 1e-12));
    let upper = beta / (2.0 - beta);
    let tau = 0.5 * (0.5 + upper) / beta;
    let slack_first = 1.0 - tau * (2.0 - beta);
    let slack_second = beta * tau - 0.5;
    let eta = slack_first.min(slack_second) / 4.0;
    let triple = ExponentTriple { beta, tau, eta };
    if !triple.is_valid() || eta <= 0.0 {
        return domain(format!("no feasible exponent triple for alpha = {alpha}"));
    }
    Ok(triple)
}
