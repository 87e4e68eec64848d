use freqlab::coefficients::{Arity, FieldConfig};
use freqlab::experiments::{
    default_sweep, run_scenario, run_sweep, sweep_summary, ExperimentReport, FittedConstant, ScenarioConfig, ScenarioKind,
    SweepEntry, Verdict,
};
use freqlab::solver::BoundaryData;

fn scenario(id: &str) -> ScenarioConfig {
    default_sweep().into_iter().find(|c| c.id == id).unwrap_or_else(|| panic!("no scenario {id}"))
}

fn close(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a == b || (a - b).abs() <= 1e-6 * a.abs().max(b.abs()) + 1e-12
}

#[test]
fn identity_regressions() {
    let r = run_scenario(&scenario("dichot_identity")).unwrap();
    assert_eq!(r.verdict, Verdict::Consistent);
    assert!(r.margins.iter().all(|m| m.value.is_finite() && m.fine_value.is_finite()));
    assert!(r.constants.iter().all(|c| c.stable));
    assert_eq!(r.resolutions, [[64, 64], [127, 128]]);

    let t = run_scenario(&scenario("thin_annulus_identity")).unwrap();
    assert_eq!(t.verdict, Verdict::Consistent);

    let s = run_scenario(&scenario("schroedinger_free")).unwrap();
    assert_eq!(s.verdict, Verdict::Consistent);
}

#[test]
fn branch_outcomes() {
    let low = run_scenario(&scenario("dichot_low")).unwrap();
    assert!(matches!(low.verdict, Verdict::AlternativeOne(_)), "{:?}", low.verdict);
    assert!(low.verdict.is_success() && low.margins.is_empty());
    let non = run_scenario(&scenario("freq_cascade_nonosgood")).unwrap();
    assert!(matches!(non.verdict, Verdict::HypothesisUnmet(_)), "{:?}", non.verdict);
}

#[test]
fn margins_and_constants_ignore_data_scale() {
    for id in ["dichot_identity", "eps_approx_affine", "tildeN_holder", "thin_annulus_holder", "dichot3_holder", "stability_bump"] {
        let base = scenario(id);
        let mut scaled = base.clone();
        let BoundaryData::Harmonic { degree, phase, .. } = base.boundary else { panic!("{id} needs harmonic data") };
        scaled.boundary = BoundaryData::Harmonic { degree, phase, amplitude: -7.5 };
        let (a, b): (ExperimentReport, ExperimentReport) = (run_scenario(&base).unwrap(), run_scenario(&scaled).unwrap());
        assert_eq!(a.verdict, b.verdict, "{id}");
        for (x, y) in a.margins.iter().zip(&b.margins) {
            assert!(close(x.value, y.value) && close(x.fine_value, y.fine_value), "{id} {}: {} vs {}", x.label, x.value, y.value);
        }
        for (x, y) in a.constants.iter().zip(&b.constants) {
            assert!(close(x.value, y.value), "{id} {}: {} vs {}", x.name, x.value, y.value);
        }
    }
}

#[test]
fn config_validation() {
    let base = scenario("dichot_identity");
    let err = |tweak: &dyn Fn(&mut ScenarioConfig)| {
        let mut c = base.clone();
        tweak(&mut c);
        c.validate().unwrap_err().to_string()
    };
    assert!(err(&|c| c.constants.gamma = 1.0).contains("gamma"));
    assert!(err(&|c| c.constants.p = 3.0).contains("constants.p"));
    assert!(err(&|c| c.resolution = [64, 63]).contains("resolution"));
    assert!(err(&|c| c.radius = 1.0).contains("radius"));
    assert!(err(&|c| c.floor = 0.6).contains("floor"));
    assert!(err(&|c| c.potential = Some(-1.0)).contains("potential"));
    assert!(err(&|c| c.schema_version = 2).contains("schema_version"));
    assert!(err(&|c| c.scenario = ScenarioKind::TildeN).contains("isotropic"));

    let mut loose = base.clone();
    loose.constants.eps = 0.3;
    let warnings = loose.validate().unwrap();
    assert_eq!(warnings.len(), 1);
    assert!(warnings[0].contains("constants.eps"));
}

#[test]
fn config_json_is_strict() {
    let text = serde_json::to_string(&scenario("dichot_identity")).unwrap();
    let back = ScenarioConfig::from_json(&text).unwrap();
    assert_eq!(back, scenario("dichot_identity"));
    let extra = text.replacen('{', r#"{"bogus":1,"#, 1);
    assert!(ScenarioConfig::from_json(&extra).unwrap_err().to_string().contains("bogus"));
    let minimal = r#"{"id":"m","scenario":"tildeN","field":{"arity":"isotropic","kind":"constant"},
        "boundary":{"kind":"harmonic","params":{"degree":2}}}"#;
    let m = ScenarioConfig::from_json(minimal).unwrap();
    assert_eq!((m.resolution, m.radius, m.floor), ([64, 64], 0.5, 0.05));
}

#[test]
fn fitted_constant_pairs() {
    let c = FittedConstant::pair("C", 1.0, 1.1, 1e-6);
    assert!(c.stable && (c.relative_change - 0.1 / 1.1).abs() < 1e-12);
    assert!(!FittedConstant::pair("C", 1.0, 2.0, 1e-6).stable);
    assert!(FittedConstant::pair("C", 1e-9, 3e-9, 1e-6).stable);
    let zero = FittedConstant::pair("C", 0.0, 0.0, 1e-6);
    assert!(zero.stable && zero.relative_change == 0.0);
    assert!(FittedConstant::pair("C", f64::INFINITY, f64::INFINITY, 1e-6).stable);
    assert!(!FittedConstant::pair("C", 1.0, f64::NAN, 1e-6).stable);
}

#[test]
fn verdict_names_and_success() {
    let all = [
        (Verdict::Consistent, true),
        (Verdict::MarginalViolations(vec![]), false),
        (Verdict::Inconsistent(vec![]), false),
        (Verdict::AlternativeOne(String::new()), true),
        (Verdict::Branch(String::new()), true),
        (Verdict::HypothesisUnmet(vec![]), true),
        (Verdict::Skipped(String::new()), true),
        (Verdict::Partial { deepest_scale: 0.1 }, true),
    ];
    let mut names: Vec<&str> = all.iter().map(|(v, _)| v.name()).collect();
    for (v, ok) in &all {
        assert_eq!(v.is_success(), *ok, "{}", v.name());
    }
    names.sort();
    names.dedup();
    assert_eq!(names.len(), all.len());
}

#[test]
fn sweep_preserves_order_and_reports_failures() {
    let mut configs: Vec<ScenarioConfig> =
        ["thin_annulus_identity", "dichot_low", "dichot3_constant"].iter().map(|id| scenario(id)).collect();
    let mut broken = scenario("thin_annulus_identity");
    broken.id = "broken".into();
    broken.field = FieldConfig::new(Arity::Isotropic, "nosuch", &[], 0);
    configs.insert(1, broken);
    let one = run_sweep(&configs, 1).unwrap();
    let two = run_sweep(&configs, 2).unwrap();
    let ids: Vec<&str> = one.iter().map(|e| e.id()).collect();
    assert_eq!(ids, ["thin_annulus_identity", "broken", "dichot_low", "dichot3_constant"]);
    assert!(matches!(one[1], SweepEntry::Failed { .. }));
    for (a, b) in one.iter().zip(&two) {
        if let (SweepEntry::Report(a), SweepEntry::Report(b)) = (a, b) {
            assert_eq!(serde_json::to_string(a).unwrap(), serde_json::to_string(b).unwrap());
        }
    }
    let summary = sweep_summary(&one).to_string();
    assert!(summary.contains("\"broken\"") && summary.contains("unknown field kind"));
}

#[test]
fn default_sweep_is_valid_and_unique() {
    let sweep = default_sweep();
    let mut ids: Vec<&str> = sweep.iter().map(|c| c.id.as_str()).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), sweep.len());
    for kind in ScenarioKind::ALL {
        assert!(sweep.iter().any(|c| c.scenario == kind), "{kind} missing");
        assert_eq!(ScenarioKind::from_name(kind.name()), Some(kind));
    }
    assert!(sweep.iter().all(|c| c.validate().is_ok()));
}
