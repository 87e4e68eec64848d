//! The h-transform, the continuous growth bound obtained by inverting h, and the
//! discrete frequency cascade t_{k+1} = t_k(1 − 1/N_k).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::modulus::{self, Modulus, SeriesBehaviour};
use crate::quad;

/// Values above this are treated as f = ∞.
pub const OVERFLOW_GUARD: f64 = 1e12;
/// Default cap on cascade iterations.
pub const DEFAULT_STEP_CAP: usize = 10_000_000;

/// h(t) = ∫_1^t ds/(s·ψ(s)), computed as ∫_0^{log t} du/ψ(e^u).
pub fn h_transform(m: &Modulus, t: f64) -> Result<f64> {
    if !(t >= 1.0) {
        return domain(format!("h_transform needs t >= 1, got {t}"));
    }
    Ok(h_unchecked(m, t))
}

fn h_unchecked(m: &Modulus, t: f64) -> f64 {
    let f = |u: f64| 1.0 / m.psi_unchecked(u.exp());
    quad::adaptive(&f, 0.0, t.ln(), 1e-14, 1e-12).value
}

/// lim_{t→∞} h(t), which equals the Osgood integral ∫_0^1 dt/ω(t); `None` when divergent.
pub fn h_limit(m: &Modulus) -> Option<f64> {
    let f = |t: f64| 1.0 / m.omega(t);
    let inc = quad::dyadic_increments(&f, 1.0, modulus::DEFAULT_DEPTH, 1e-12);
    let diag = modulus::analyse_series(&inc);
    match diag.behaviour {
        SeriesBehaviour::Convergent => Some(diag.partial.last().unwrap() + diag.tail_estimate),
        _ => None,
    }
}

/// A nonnegative forcing term g on (0, 1] with an integrability certificate.
#[derive(Clone)]
pub struct Forcing {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub integrable: bool,
    pub label: String,
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Forcing").field("label", &self.label).field("integrable", &self.integrable).finish()
    }
}

impl Forcing {
    pub fn new(label: impl Into<String>, integrable: bool, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Forcing { f: Arc::new(f), integrable, label: label.into() }
    }

    pub fn constant(c: f64) -> Self {
        Forcing::new(format!("const({c})"), true, move |_| c)
    }

    /// g = φ, integrable exactly when the Dini integral of ω is finite.
    pub fn phi(m: &Modulus) -> Self {
        let integrable = modulus::check_phi_integrable(m).finite;
        let m = m.clone();
        Forcing::new(format!("phi[{}]", m.label()), integrable, move |s| m.phi_unchecked(s))
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    /// ∫_t^1 g, refining dyadically toward 0 when t = 0.
    pub fn integral_from(&self, t: f64) -> f64 {
        let f = |s: f64| self.eval(s);
        if t > 0.0 {
            // Split at dyadic points so endpoint singularities stay resolved.
            let mut total = 0.0;
            let mut hi = 1.0;
            while hi > t {
                let lo = (0.5 * hi).max(t);
                total += quad::adaptive(&f, lo, hi, 1e-15, 1e-12).value;
                hi = lo;
            }
            total
        } else {
            let inc = quad::dyadic_increments(&f, 1.0, 60, 1e-12);
            inc.iter().sum()
        }
    }

    /// Largest g(s)/g(γs) over a log grid of (t_floor, 1] and γ ∈ {0.5, 0.75, 0.9}.
    pub fn doubling_constant(&self, t_floor: f64) -> f64 {
        let mut worst: f64 = 0.0;
        let (a, b) = (t_floor.max(1e-300).ln(), 0.0f64);
        for i in 0..=200 {
            let s = (a + (b - a) * i as f64 / 200.0).exp();
            for gamma in [0.5, 0.75, 0.9] {
                let num = self.eval(s);
                let den = self.eval(gamma * s);
                let r = if den > 0.0 {
                    num / den
                } else if num > 0.0 {
                    f64::INFINITY
                } else {
                    1.0
                };
                worst = worst.max(r);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GrowthBound {
    Finite(f64),
    /// h(f1) + C1∫g exceeds the attainable range of h.
    BlowupDetected { required: f64, available: f64 },
}

impl GrowthBound {
    pub fn value(&self) -> Option<f64> {
        match self {
            GrowthBound::Finite(b) => Some(*b),
            GrowthBound::BlowupDetected { .. } => None,
        }
    }
}

/// Solves h(B) = h(f1) + C1·∫_t^1 g for B by bisection on log B over [f1, guard].
/// For f1 < 1 the start is raised to 1, which only weakens the bound.
pub fn continuous_growth_bound(m: &Modulus, f1: f64, g: &Forcing, c1: f64, t: f64) -> Result<GrowthBound> {
    if !(f1 > 0.0) {
        return domain(format!("continuous_growth_bound needs f1 > 0, got {f1}"));
    }
    if !(c1 > 0.0) {
        return domain(format!("continuous_growth_bound needs C1 > 0, got {c1}"));
    }
    if !(0.0..=1.0).contains(&t) {
        return domain(format!("continuous_growth_bound needs t in [0,1], got {t}"));
    }
    let start = f1.max(1.0);
    let target = h_unchecked(m, start) + c1 * g.integral_from(t);
    growth_bound_from_target(m, start, target)
}

fn growth_bound_from_target(m: &Modulus, start: f64, target: f64) -> Result<GrowthBound> {
    if let Some(limit) = h_limit(m) {
        if target >= limit {
            return Ok(GrowthBound::BlowupDetected { required: target, available: limit });
        }
    }
    let h_max = h_unchecked(m, OVERFLOW_GUARD);
    if target > h_max {
        return Ok(GrowthBound::BlowupDetected { required: target, available: h_max });
    }
    let (mut lo, mut hi) = (start.ln(), OVERFLOW_GUARD.ln());
    while hi - lo > 1e-9 * hi.abs().max(1.0) * 0.5 {
        let mid = 0.5 * (lo + hi);
        if h_unchecked(m, mid.exp()) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(GrowthBound::Finite((0.5 * (lo + hi)).exp()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceVerdict {
    BoundedOnCompacts,
    BoundedGlobally,
    BlowupDetected,
}

/// A run of the discrete cascade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthTrace {
    /// (t_k, N_k) pairs.
    pub steps: Vec<(f64, f64)>,
    pub verdict: TraceVerdict,
    /// max_k N_k.
    pub bound: f64,
    pub reached_floor: bool,
    pub step_capped: bool,
    pub doubling_constant: f64,
}

impl GrowthTrace {
    pub fn sup(&self) -> f64 {
        self.bound
    }
}

/// Iterates t_{k+1} = t_k(1 − 1/N_k), N_{k+1} = N_k + C1·t_k·ψ(N_k)·g(t_k).
pub fn discrete_cascade(m: &Modulus, n0: f64, g: &Forcing, c1: f64, t_floor: f64) -> Result<GrowthTrace> {
    discrete_cascade_capped(m, n0, g, c1, t_floor, DEFAULT_STEP_CAP)
}

pub fn discrete_cascade_capped(
    m: &Modulus,
    n0: f64,
    g: &Forcing,
    c1: f64,
    t_floor: f64,
    step_cap: usize,
) -> Result<GrowthTrace> {
    if !(n0 > 1.0) {
        return domain(format!("discrete_cascade needs N0 > 1, got {n0}"));
    }
    if !(t_floor > 0.0 && t_floor < 1.0) {
        return domain(format!("discrete_cascade needs t_floor in (0,1), got {t_floor}"));
    }
    if !(c1 >= 0.0) {
        return domain("discrete_cascade needs C1 >= 0");
    }
    let mut steps = vec![(1.0, n0)];
    let (mut t, mut n) = (1.0f64, n0);
    let mut blowup = false;
    while t > t_floor && steps.len() <= step_cap {
        let t_next = t * (1.0 - 1.0 / n);
        let n_next = n + c1 * t * m.psi_unchecked(n) * g.eval(t);
        t = t_next;
        n = n_next;
        if !(n <= OVERFLOW_GUARD) {
            blowup = true;
            steps.push((t, n));
            break;
        }
        steps.push((t, n));
    }
    let reached_floor = t <= t_floor;
    let bound = steps.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let verdict = if blowup {
        TraceVerdict::BlowupDetected
    } else if reached_floor && g.integrable && stabilised(&steps, t_floor) {
        TraceVerdict::BoundedGlobally
    } else {
        TraceVerdict::BoundedOnCompacts
    };
    Ok(GrowthTrace {
        step_capped: !reached_floor && !blowup,
        reached_floor,
        verdict,
        bound,
        doubling_constant: g.doubling_constant(t_floor),
        steps,
    })
}

// The last decade in t changes the sup by less than 1%.
fn stabilised(steps: &[(f64, f64)], t_floor: f64) -> bool {
    let last = steps.last().unwrap().1;
    let i = steps.partition_point(|s| s.0 > 10.0 * t_floor);
    let earlier = steps[i.min(steps.len() - 1)].1;
    last - earlier <= 0.01 * last
}

/// Smallest C with −h'(t) ≤ C·h·ψ(h)·g(t) at the midpoints of the piecewise-linear
/// interpolant of a trace (h being that interpolant).
pub fn fit_trace_constant(trace: &GrowthTrace, m: &Modulus, g: &Forcing) -> f64 {
    let mut c: f64 = 0.0;
    for w in trace.steps.windows(2) {
        let (t0, n0) = w[0];
        let (t1, n1) = w[1];
        if t1 >= t0 {
            continue;
        }
        let slope = (n1 - n0) / (t1 - t0);
        let tm = 0.5 * (t0 + t1);
        let hm = 0.5 * (n0 + n1);
        let denom = hm * m.psi_unchecked(hm.max(1.0)) * g.eval(tm);
        let need = -slope;
        if need > 0.0 {
            c = c.max(if denom > 0.0 { need / denom } else { f64::INFINITY });
        }
    }
    c
}

impl GrowthTrace {
    /// CSV with columns t, N.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "N"]).unwrap();
        for (t, n) in &self.steps {
            w.write_record([crate::io::fmt_f64(*t), crate::io::fmt_f64(*n)]).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    /// JSON summary with verdict and bound.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "verdict": self.verdict,
            "bound": self.bound,
            "steps": self.steps.len(),
            "reached_floor": self.reached_floor,
            "step_capped": self.step_capped,
            "doubling_constant": self.doubling_constant,
        })
    }
}
