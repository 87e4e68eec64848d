//! Scenario harness: every estimate is rearranged to expose a slack or the smallest
//! constant that makes it hold, measured at resolution N and again at 2N.

mod scenarios;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::coefficients::{CoefficientField, FieldConfig};
use crate::error::{Error, Result};
use crate::growth::GrowthTrace;
use crate::modulus::{Modulus, ModulusKind};
use crate::solver::{BoundaryData, PolarGrid};

pub use scenarios::{key_approx_excess, key_approx_exponent, key_approx_points, measure, DOUBLING_ALLOWANCE, FREQUENCY_RESOLUTION};

pub const SCHEMA_VERSION: u32 = 1;
/// A fitted constant is stable when it moves by less than this fraction under refinement.
pub const STABILITY_TOLERANCE: f64 = 0.25;
/// Constants below this magnitude at both resolutions count as zero.
pub const CONSTANT_FLOOR: f64 = 1e-6;
/// Default tolerance on normalised slacks.
pub const SLACK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Dichot,
    ApproxV,
    FreqCascade,
    EpsApprox,
    #[serde(rename = "tildeN")]
    TildeN,
    ThinAnnulus,
    KeyApprox,
    Dichot3,
    IsoCascade,
    Schroedinger,
    Stability,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 11] = [
        ScenarioKind::Dichot,
        ScenarioKind::ApproxV,
        ScenarioKind::FreqCascade,
        ScenarioKind::EpsApprox,
        ScenarioKind::TildeN,
        ScenarioKind::ThinAnnulus,
        ScenarioKind::KeyApprox,
        ScenarioKind::Dichot3,
        ScenarioKind::IsoCascade,
        ScenarioKind::Schroedinger,
        ScenarioKind::Stability,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Dichot => "dichot",
            ScenarioKind::ApproxV => "approx_v",
            ScenarioKind::FreqCascade => "freq_cascade",
            ScenarioKind::EpsApprox => "eps_approx",
            ScenarioKind::TildeN => "tildeN",
            ScenarioKind::ThinAnnulus => "thin_annulus",
            ScenarioKind::KeyApprox => "key_approx",
            ScenarioKind::Dichot3 => "dichot3",
            ScenarioKind::IsoCascade => "iso_cascade",
            ScenarioKind::Schroedinger => "schroedinger",
            ScenarioKind::Stability => "stability",
        }
    }

    pub fn from_name(name: &str) -> Option<ScenarioKind> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Scenarios stated for isotropic (scalar) coefficients.
    pub fn is_isotropic(&self) -> bool {
        matches!(
            self,
            ScenarioKind::EpsApprox
                | ScenarioKind::TildeN
                | ScenarioKind::ThinAnnulus
                | ScenarioKind::KeyApprox
                | ScenarioKind::Dichot3
                | ScenarioKind::IsoCascade
                | ScenarioKind::Schroedinger
        )
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Thresholds and exponents of the standing hypotheses; the estimates never infer them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Constants {
    pub n0: f64,
    pub c1: f64,
    /// The A of the annulus r(1 − A log N / N).
    pub a_log: f64,
    /// Decay exponent of the annulus-energy premise.
    pub p: f64,
    pub gamma: f64,
    pub eps: f64,
    pub delta: f64,
    /// Constant in ψ(xy) ≤ C_M ψ(x)ψ(y).
    pub c_m: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants { n0: 2.0, c1: 1.0, a_log: 1.0, p: 4.0, gamma: 0.5, eps: 0.05, delta: 0.0, c_m: 3.0 }
    }
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}
fn default_resolution() -> [usize; 2] {
    [64, 64]
}
fn default_radius() -> f64 {
    0.5
}
fn default_floor() -> f64 {
    0.05
}

/// One scenario run, as read from a JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub id: String,
    pub scenario: ScenarioKind,
    pub field: FieldConfig,
    /// A_1 for the stability suite; defaults to an annular perturbation of `field`.
    #[serde(default)]
    pub second_field: Option<FieldConfig>,
    /// Overrides the field's declared modulus.
    #[serde(default)]
    pub modulus: Option<ModulusKind>,
    pub boundary: BoundaryData,
    /// Coarse resolution [N_r, N_θ]; every run is repeated on the refined grid.
    #[serde(default = "default_resolution")]
    pub resolution: [usize; 2],
    /// Working radius r (snapped to the nearest coarse ring).
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Smallest radius a descending schedule visits.
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default)]
    pub constants: Constants,
    /// Constant potential V for the Schrödinger reduction.
    #[serde(default)]
    pub potential: Option<f64>,
    /// When set, reseeds the field generators and random boundary data.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ScenarioConfig {
    pub fn new(id: &str, scenario: ScenarioKind, field: FieldConfig, boundary: BoundaryData) -> Self {
        ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            id: id.into(),
            scenario,
            field,
            second_field: None,
            modulus: None,
            boundary,
            resolution: default_resolution(),
            radius: default_radius(),
            floor: default_floor(),
            constants: Constants::default(),
            potential: None,
            seed: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {} column {}: {e}", e.line(), e.column())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Hard errors for malformed configs; soft issues come back as warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} unsupported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        let c = &self.constants;
        if !(c.gamma > 0.0 && c.gamma < 1.0) {
            return bad(format!("constants.gamma must lie in (0,1), got {}", c.gamma));
        }
        if !(c.p >= 4.0) {
            return bad(format!("constants.p must be at least 4, got {}", c.p));
        }
        if !(c.n0 > 1.0 && c.c1 > 0.0 && c.a_log > 0.0 && c.c_m >= 1.0) {
            return bad("constants need n0 > 1, c1 > 0, a_log > 0, c_m >= 1".into());
        }
        if !(c.eps >= 0.0 && c.delta >= 0.0) {
            return bad("constants.eps and constants.delta must be nonnegative".into());
        }
        let [nr, nt] = self.resolution;
        if nr < 8 || nt < 8 || nt % 2 != 0 {
            return bad(format!("resolution [{nr}, {nt}] needs N_r >= 8 and even N_θ >= 8"));
        }
        if !(self.radius > 0.0 && self.radius < 1.0) {
            return bad(format!("radius must lie in (0,1), got {}", self.radius));
        }
        if !(self.floor > 0.0 && self.floor < self.radius) {
            return bad(format!("floor must lie in (0, radius), got {}", self.floor));
        }
        if let Some(v) = self.potential {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("potential must be finite and nonnegative, got {v}"));
            }
        }
        if self.scenario.is_isotropic() && self.field.arity != crate::coefficients::Arity::Isotropic {
            return bad(format!("scenario {} needs an isotropic field", self.scenario));
        }
        let mut warnings = Vec::new();
        if c.eps > 0.25 {
            warnings.push(format!("constants.eps = {} is outside the small-perturbation regime (<= 0.25)", c.eps));
        }
        if c.delta > 0.25 {
            warnings.push(format!("constants.delta = {} is outside the small-perturbation regime (<= 0.25)", c.delta));
        }
        if self.scenario == ScenarioKind::ApproxV && c.eps >= self.radius / 2.0 {
            warnings.push(format!("constants.eps = {} is not below r/2 = {}", c.eps, self.radius / 2.0));
        }
        Ok(warnings)
    }

    /// The field with seeds and modulus overrides applied.
    pub fn build_field(&self) -> Result<CoefficientField> {
        let mut fc = self.field.clone();
        if let Some(s) = self.seed {
            fc.seed = s;
        }
        let mut f = fc.build()?;
        if let Some(k) = &self.modulus {
            f = f.with_modulus(Modulus::new(k.clone())?);
        }
        Ok(f)
    }

    pub fn build_second_field(&self) -> Result<Option<CoefficientField>> {
        self.second_field
            .as_ref()
            .map(|fc| {
                let mut fc = fc.clone();
                if let Some(s) = self.seed {
                    fc.seed = s.wrapping_add(1);
                }
                fc.build()
            })
            .transpose()
    }

    pub fn boundary_data(&self) -> BoundaryData {
        match (&self.boundary, self.seed) {
            (BoundaryData::Random { max_degree, include_constant, .. }, Some(s)) => BoundaryData::Random {
                max_degree: *max_degree,
                seed: s.wrapping_add(2),
                include_constant: *include_constant,
            },
            (b, _) => b.clone(),
        }
    }

    pub fn coarse_grid(&self) -> Result<PolarGrid> {
        PolarGrid::new(self.resolution[0], self.resolution[1], 1.0)
    }

    /// The working radius snapped to a coarse ring (which every refinement keeps).
    pub fn snapped_radius(&self) -> Result<f64> {
        let g = self.coarse_grid()?;
        Ok(g.radius(g.nearest_ring(self.radius)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginKind {
    /// Normalised slack of an inequality; holds when value ≥ −tolerance.
    Slack,
    /// Smallest constant making the inequality hold at this radius.
    RequiredConstant,
}

/// One inequality evaluated at one resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginSample {
    pub label: String,
    pub kind: MarginKind,
    pub r: f64,
    /// The scenario's secondary parameter (s, t, κ, k …), NaN when unused.
    pub param: f64,
    pub value: f64,
    pub tolerance: f64,
}

impl MarginSample {
    pub fn slack(label: impl Into<String>, r: f64, param: f64, value: f64) -> Self {
        MarginSample { label: label.into(), kind: MarginKind::Slack, r, param, value, tolerance: SLACK_TOLERANCE }
    }

    pub fn required(label: impl Into<String>, r: f64, param: f64, value: f64) -> Self {
        MarginSample { label: label.into(), kind: MarginKind::RequiredConstant, r, param, value, tolerance: 0.0 }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn violated(&self) -> bool {
        self.kind == MarginKind::Slack && !(self.value >= -self.tolerance)
    }
}

/// A margin paired with its value on the refined grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub label: String,
    pub kind: MarginKind,
    pub r: f64,
    pub param: f64,
    pub value: f64,
    pub fine_value: f64,
    pub delta: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedConstant {
    pub name: String,
    pub value: f64,
    pub fine_value: f64,
    pub relative_change: f64,
    pub stable: bool,
}

impl FittedConstant {
    pub fn pair(name: &str, value: f64, fine_value: f64, floor: f64) -> Self {
        let scale = value.abs().max(fine_value.abs());
        let diff = (fine_value - value).abs();
        let relative_change = if scale > 0.0 { diff / scale } else { 0.0 };
        let stable = (value.is_infinite() && fine_value == value)
            || diff <= floor
            || relative_change < STABILITY_TOLERANCE;
        FittedConstant { name: name.into(), value, fine_value, relative_change, stable }
    }
}

/// Exactly one per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "detail", rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    MarginalViolations(Vec<String>),
    Inconsistent(Vec<String>),
    /// The frequency is below N_0, so the first alternative holds.
    AlternativeOne(String),
    /// A premise of the estimate (e.g. a γ-good window) is not met; nothing to test.
    Branch(String),
    HypothesisUnmet(Vec<String>),
    /// A numerically checked premise could not be verified at this resolution.
    Skipped(String),
    /// Consistent down to `deepest_scale`, where the resolution floor stopped the run.
    Partial { deepest_scale: f64 },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Consistent => "consistent",
            Verdict::MarginalViolations(_) => "marginal_violations",
            Verdict::Inconsistent(_) => "inconsistent",
            Verdict::AlternativeOne(_) => "alternative_one",
            Verdict::Branch(_) => "branch",
            Verdict::HypothesisUnmet(_) => "hypothesis_unmet",
            Verdict::Skipped(_) => "skipped",
            Verdict::Partial { .. } => "partial",
        }
    }

    /// Consistent or a branch outcome; what the exit code counts as success.
    pub fn is_success(&self) -> bool {
        !matches!(self, Verdict::MarginalViolations(_) | Verdict::Inconsistent(_))
    }
}

/// What a scenario run produced at a single resolution.
#[derive(Debug, Clone, Default)]
pub struct Measurement {
    pub margins: Vec<MarginSample>,
    /// (name, value, absolute floor below which changes count as noise).
    pub constants: Vec<(String, f64, f64)>,
    pub diagnostics: BTreeMap<String, Value>,
    pub trace: Option<GrowthTrace>,
    /// Set when a branch ends the run before any estimate is tested.
    pub branch: Option<Verdict>,
    /// Deepest radius reached when a resolution floor cut a schedule short.
    pub partial: Option<f64>,
    /// Radii chosen at the coarse resolution and reused on the refined grid.
    pub schedule: Vec<f64>,
}

impl Measurement {
    pub(crate) fn diag(&mut self, key: &str, value: impl Serialize) {
        self.diagnostics.insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub(crate) fn constant(&mut self, name: &str, value: f64) {
        self.constants.push((name.into(), value, CONSTANT_FLOOR));
    }

    pub(crate) fn constant_with_floor(&mut self, name: &str, value: f64, floor: f64) {
        self.constants.push((name.into(), value, floor.max(CONSTANT_FLOOR)));
    }

    pub(crate) fn branch(verdict: Verdict) -> Self {
        Measurement { branch: Some(verdict), ..Default::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: String,
    pub scenario: ScenarioKind,
    /// [[N_r, N_θ] coarse, [N_r, N_θ] fine].
    pub resolutions: [[usize; 2]; 2],
    pub radius: f64,
    pub margins: Vec<Margin>,
    pub constants: Vec<FittedConstant>,
    pub verdict: Verdict,
    pub diagnostics: BTreeMap<String, Value>,
    pub fine_diagnostics: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
    pub trace: Option<GrowthTrace>,
}

impl ExperimentReport {
    /// CSV with one row per margin.
    pub fn margins_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .margins
            .iter()
            .map(|m| {
                vec![
                    self.id.clone(),
                    m.label.clone(),
                    serde_json::to_value(m.kind).unwrap().as_str().unwrap_or("").to_string(),
                    crate::io::fmt_f64(m.r),
                    crate::io::fmt_f64(m.param),
                    crate::io::fmt_f64(m.value),
                    crate::io::fmt_f64(m.fine_value),
                    crate::io::fmt_f64(m.delta),
                    crate::io::fmt_f64(m.tolerance),
                ]
            })
            .collect();
        crate::io::csv_records(&["id", "label", "kind", "r", "param", "value", "fine_value", "delta", "tolerance"], &rows)
    }

    /// Margin values against their index, coarse and fine.
    pub fn margins_svg(&self) -> String {
        let coarse: Vec<(f64, f64)> = self.margins.iter().enumerate().map(|(i, m)| (i as f64, m.value)).collect();
        let fine: Vec<(f64, f64)> = self.margins.iter().enumerate().map(|(i, m)| (i as f64, m.fine_value)).collect();
        crate::svg::Plot::new(&format!("{} ({})", self.id, self.scenario), "margin index", "value")
            .with_series("coarse", coarse)
            .with_series("fine", fine)
            .render()
    }
}

/// Combines the coarse and fine measurements into a report with a single verdict.
pub fn combine(cfg: &ScenarioConfig, coarse: Measurement, fine: Measurement, warnings: Vec<String>) -> Result<ExperimentReport> {
    let g = cfg.coarse_grid()?;
    let gf = g.refined();
    let mut report = ExperimentReport {
        id: cfg.id.clone(),
        scenario: cfg.scenario,
        resolutions: [[g.n_r, g.n_theta], [gf.n_r, gf.n_theta]],
        radius: cfg.snapped_radius()?,
        margins: Vec::new(),
        constants: Vec::new(),
        verdict: Verdict::Consistent,
        diagnostics: coarse.diagnostics.clone(),
        fine_diagnostics: fine.diagnostics.clone(),
        warnings,
        trace: coarse.trace.clone(),
    };
    match (&coarse.branch, &fine.branch) {
        (Some(b), Some(_)) => {
            report.verdict = b.clone();
            return Ok(report);
        }
        (Some(_), None) | (None, Some(_)) => {
            report.verdict = Verdict::MarginalViolations(vec!["branch decision changes under refinement".into()]);
            return Ok(report);
        }
        (None, None) => {}
    }
    let mut coarse_bad = Vec::new();
    let mut fine_bad = Vec::new();
    for m in &coarse.margins {
        let f = fine.margins.iter().find(|x| x.label == m.label);
        let fine_value = f.map_or(f64::NAN, |x| x.value);
        if m.violated() {
            coarse_bad.push(format!("{} = {:.4e} at coarse resolution", m.label, m.value));
        }
        if let Some(f) = f {
            if f.violated() {
                fine_bad.push(format!("{} = {:.4e}", f.label, f.value));
            }
        } else {
            coarse_bad.push(format!("{}: no refined counterpart", m.label));
        }
        report.margins.push(Margin {
            label: m.label.clone(),
            kind: m.kind,
            r: m.r,
            param: m.param,
            value: m.value,
            fine_value,
            delta: fine_value - m.value,
            tolerance: m.tolerance,
        });
    }
    for (name, v, floor) in &coarse.constants {
        let fv = fine.constants.iter().find(|c| &c.0 == name).map_or(f64::NAN, |c| c.1);
        let c = FittedConstant::pair(name, *v, fv, *floor);
        if !c.stable {
            coarse_bad.push(format!("constant {name} moves {:.1}% under refinement", 100.0 * c.relative_change));
        }
        report.constants.push(c);
    }
    report.verdict = if !fine_bad.is_empty() {
        Verdict::Inconsistent(fine_bad)
    } else if !coarse_bad.is_empty() {
        Verdict::MarginalViolations(coarse_bad)
    } else if let Some(d) = coarse.partial.or(fine.partial) {
        Verdict::Partial { deepest_scale: d }
    } else {
        Verdict::Consistent
    };
    Ok(report)
}

/// Runs a scenario at its coarse resolution and on the refined grid.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ExperimentReport> {
    let warnings = cfg.validate()?;
    let g = cfg.coarse_grid()?;
    let coarse = measure(cfg, &g, None)?;
    let fine = measure(cfg, &g.refined(), Some(&coarse))?;
    combine(cfg, coarse, fine, warnings)
}

/// The scenarios exercised by `freqlab experiment` without a config.
pub fn default_sweep() -> Vec<ScenarioConfig> {
    use crate::coefficients::Arity::{Anisotropic, Isotropic};
    use ScenarioKind::*;
    let fc = |arity, kind: &str, params: &[(&str, f64)], seed| FieldConfig::new(arity, kind, params, seed);
    let holder = |alpha: f64, seed| fc(Isotropic, "holder", &[("alpha", alpha), ("amplitude", 0.05)], seed);
    let log_lip = fc(Anisotropic, "log_lipschitz", &[("amplitude", 0.1)], 0);
    let mut out = Vec::new();
    let mut push = |id: &str, kind, field, boundary, tweak: &dyn Fn(&mut ScenarioConfig)| {
        let mut c = ScenarioConfig::new(id, kind, field, boundary);
        tweak(&mut c);
        out.push(c);
    };
    push("dichot_identity", Dichot, FieldConfig::identity(), BoundaryData::harmonic(3), &|_| {});
    push("dichot_loglip", Dichot, log_lip.clone(), BoundaryData::harmonic(5), &|c| c.radius = 0.6);
    push("dichot_low", Dichot, FieldConfig::identity(), BoundaryData::harmonic(1), &|c| c.constants.n0 = 2.0);
    push("approx_v_loglip", ApproxV, log_lip.clone(), BoundaryData::random(4, 7), &|c| c.radius = 0.6);
    push(
        "approx_v_holder",
        ApproxV,
        fc(Anisotropic, "holder_aniso", &[("alpha", 0.7), ("amplitude", 0.1)], 0),
        BoundaryData::random(3, 11),
        &|c| c.radius = 0.6,
    );
    push("freq_cascade_loglip", FreqCascade, log_lip.clone(), BoundaryData::random(3, 5), &|c| {
        c.radius = 0.8;
        c.floor = 0.02;
    });
    push("freq_cascade_identity", FreqCascade, FieldConfig::identity(), BoundaryData::harmonic(3), &|c| {
        c.radius = 0.8;
        c.floor = 0.02;
        c.modulus = Some(ModulusKind::LogPower { p: 1.0 });
    });
    push(
        "freq_cascade_nonosgood",
        FreqCascade,
        fc(Anisotropic, "holder_aniso", &[("alpha", 0.7), ("amplitude", 0.1)], 0),
        BoundaryData::harmonic(2),
        &|c| c.radius = 0.8,
    );
    push("eps_approx_affine", EpsApprox, fc(Isotropic, "affine", &[("g1", 0.05)], 0), BoundaryData::harmonic(4), &|_| {});
    push("eps_approx_holder", EpsApprox, holder(0.75, 3), BoundaryData::random(4, 3), &|_| {});
    push("tildeN_holder", TildeN, holder(0.75, 4), BoundaryData::harmonic(3), &|_| {});
    push("thin_annulus_identity", ThinAnnulus, fc(Isotropic, "constant", &[], 0), BoundaryData::harmonic(8), &|c| {
        c.radius = 0.8;
    });
    push("thin_annulus_holder", ThinAnnulus, holder(0.8, 5), BoundaryData::harmonic(8), &|c| c.radius = 0.8);
    push("key_approx_constant", KeyApprox, fc(Isotropic, "affine", &[], 0), BoundaryData::harmonic(20), &|c| {
        c.radius = 0.8;
        c.resolution = [128, 256];
        c.constants.a_log = 5.0;
    });
    push("key_approx_holder", KeyApprox, holder(0.75, 6), BoundaryData::harmonic(20), &|c| {
        c.radius = 0.8;
        c.resolution = [128, 256];
        c.constants.a_log = 5.0;
    });
    push("dichot3_holder", Dichot3, holder(0.75, 7), BoundaryData::harmonic(2), &|c| {
        c.radius = 0.15;
        c.constants.n0 = 1.5;
    });
    push("dichot3_constant", Dichot3, fc(Isotropic, "affine", &[], 0), BoundaryData::harmonic(2), &|c| {
        c.radius = 0.2;
        c.constants.n0 = 1.5;
    });
    push("dichot3_low", Dichot3, holder(0.75, 7), BoundaryData::harmonic(1), &|c| c.radius = 0.1);
    push("iso_cascade_holder", IsoCascade, holder(0.75, 8), BoundaryData::random(4, 8), &|c| c.radius = 0.8);
    push("schroedinger_free", Schroedinger, fc(Isotropic, "constant", &[], 0), BoundaryData::harmonic(3), &|c| {
        c.radius = 0.2;
        c.potential = Some(0.0);
    });
    push("schroedinger_unit", Schroedinger, fc(Isotropic, "constant", &[], 0), BoundaryData::harmonic(3), &|c| {
        c.radius = 0.2;
        c.potential = Some(1.0);
    });
    push("stability_equal", Stability, log_lip.clone(), BoundaryData::random(3, 9), &|c| {
        c.second_field = Some(c.field.clone());
    });
    push("stability_bump", Stability, log_lip, BoundaryData::harmonic(6), &|c| {
        c.radius = 0.5;
        c.constants.eps = 0.05;
    });
    out
}

/// Outcome of one entry of a sweep.
#[derive(Debug, Clone)]
pub enum SweepEntry {
    Report(Box<ExperimentReport>),
    Failed { id: String, scenario: ScenarioKind, error: Error },
}

impl SweepEntry {
    pub fn id(&self) -> &str {
        match self {
            SweepEntry::Report(r) => &r.id,
            SweepEntry::Failed { id, .. } => id,
        }
    }
}

/// Runs configs on a pool of `jobs` threads; results come back in input order.
pub fn run_sweep(configs: &[ScenarioConfig], jobs: usize) -> Result<Vec<SweepEntry>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(|| {
        configs
            .par_iter()
            .map(|c| match run_scenario(c) {
                Ok(r) => SweepEntry::Report(Box::new(r)),
                Err(error) => SweepEntry::Failed { id: c.id.clone(), scenario: c.scenario, error },
            })
            .collect()
    }))
}

/// Per-scenario verdicts and fitted constants, grouped by scenario kind.
pub fn sweep_summary(entries: &[SweepEntry]) -> Value {
    let mut rows = Vec::new();
    let mut by_kind: BTreeMap<String, Vec<Value>> = BTreeMap::new();
    for e in entries {
        match e {
            SweepEntry::Report(r) => {
                let consts: BTreeMap<&str, f64> = r.constants.iter().map(|c| (c.name.as_str(), c.fine_value)).collect();
                rows.push(serde_json::json!({
                    "id": r.id,
                    "scenario": r.scenario,
                    "verdict": r.verdict.name(),
                    "detail": r.verdict,
                    "success": r.verdict.is_success(),
                }));
                by_kind.entry(r.scenario.to_string()).or_default().push(serde_json::json!({ "id": r.id, "constants": consts }));
            }
            SweepEntry::Failed { id, scenario, error } => rows.push(serde_json::json!({
                "id": id,
                "scenario": scenario,
                "verdict": "error",
                "error": error.to_string(),
                "success": false,
            })),
        }
    }
    let flagged: Vec<&str> = entries
        .iter()
        .filter(|e| match e {
            SweepEntry::Report(r) => !matches!(r.verdict, Verdict::Consistent),
            SweepEntry::Failed { .. } => true,
        })
        .map(|e| e.id())
        .collect();
    serde_json::json!({ "scenarios": rows, "fitted_constants": by_kind, "flagged": flagged })
}
