use approx::assert_relative_eq;
use freqlab::coefficients::{Arity, CoefficientField, FieldConfig};
use freqlab::error::Error;
use freqlab::frequency::{
    almgren_frequency, doubling_index, geometric_radii, ring_radii, two_scale_frequency, verify_almost_monotonicity,
    verify_h_identity, verify_homogeneous_monotonicity, vanishing_order, MONOTONICITY_TOLERANCE,
};
use freqlab::solver::{BoundaryData, DiscreteSolution, FourierMode, PolarGrid, Problem, SolveOptions};
use proptest::prelude::*;

fn solve(f: &CoefficientField, g: &BoundaryData, grid: &PolarGrid) -> DiscreteSolution {
    Problem::new(f, grid, SolveOptions::default()).unwrap().solve_data(g).unwrap()
}

fn harmonic(k: u32) -> DiscreteSolution {
    solve(&CoefficientField::identity(2), &BoundaryData::harmonic(k), &PolarGrid::new(128, 128, 1.0).unwrap())
}

fn lipschitz() -> CoefficientField {
    // M = 0.2, δ = 0.1.
    FieldConfig::new(Arity::Anisotropic, "lipschitz_sine", &[("delta", 0.1), ("k", 2.0)], 0).build().unwrap()
}

#[test]
fn homogeneous_harmonics_have_constant_frequency() {
    let id = CoefficientField::identity(2);
    for k in 1..=3u32 {
        let u = harmonic(k);
        let p = almgren_frequency(&u, &id, &geometric_radii(0.1, 0.9, 9)).unwrap();
        assert!(p.radii.windows(2).all(|w| w[0] > w[1]));
        for i in 0..p.radii.len() {
            assert_relative_eq!(p.n[i], k as f64, max_relative = 1e-2);
            assert_relative_eq!(p.n[i], p.radii[i] * p.d[i] / p.h[i], max_relative = 1e-14);
        }
        assert_relative_eq!(doubling_index(&u, 0.8).unwrap(), 2.0 * k as f64, max_relative = 1e-2);
        assert_relative_eq!(two_scale_frequency(&u, &id, 0.8, 0.4).unwrap(), k as f64, max_relative = 1e-2);
    }
    let one = solve(&id, &BoundaryData::Constant { value: 1.0 }, &PolarGrid::new(64, 64, 1.0).unwrap());
    assert!(almgren_frequency(&one, &id, &[0.3, 0.6]).unwrap().n.iter().all(|n| n.abs() < 1e-9));
    assert!(doubling_index(&one, 0.6).unwrap().abs() < 1e-9);
    let wavy = FieldConfig::new(Arity::Isotropic, "angular_sine", &[("amplitude", 0.4)], 0).build().unwrap();
    assert!(two_scale_frequency(&one, &wavy, 0.6, 0.3).unwrap().abs() < 1e-9);
    assert!(two_scale_frequency(&one, &wavy, 0.3, 0.6).is_err());
}

#[test]
fn frequency_errors_on_zero_solution() {
    let id = CoefficientField::identity(2);
    let zero = solve(&id, &BoundaryData::Constant { value: 0.0 }, &PolarGrid::new(32, 32, 1.0).unwrap());
    assert!(matches!(almgren_frequency(&zero, &id, &[0.5]), Err(Error::VanishingBoundary { .. })));
}

#[test]
fn frequency_converges_under_refinement() {
    let id = CoefficientField::identity(2);
    let err = |n: usize| {
        let u = solve(&id, &BoundaryData::harmonic(3), &PolarGrid::new(n, n, 1.0).unwrap());
        (almgren_frequency(&u, &id, &[0.5]).unwrap().n[0] - 3.0).abs()
    };
    assert!(err(128) < err(64) / 2.0);
}

#[test]
fn vanishing_order_examples() {
    let radii = geometric_radii(0.1, 0.8, 7);
    assert_relative_eq!(vanishing_order(&harmonic(1), &radii).unwrap().order, 1.0, epsilon = 0.02);
    let id = CoefficientField::identity(2);
    let g = PolarGrid::new(128, 128, 1.0).unwrap();
    let c = solve(&id, &BoundaryData::Constant { value: 3.0 }, &g);
    assert!(vanishing_order(&c, &radii).unwrap().order.abs() < 1e-9);
    let mixed = BoundaryData::Modes {
        modes: vec![FourierMode { degree: 2, cos: 1.0, sin: 0.0 }, FourierMode { degree: 5, cos: 1e-6, sin: 0.0 }],
    };
    assert_relative_eq!(vanishing_order(&solve(&id, &mixed, &g), &radii).unwrap().order, 2.0, epsilon = 0.02);
    assert!(vanishing_order(&c, &[0.8, 0.7, 0.6, 0.5, 0.4]).is_err());
    assert!(vanishing_order(&c, &[0.8, 0.4, 0.2]).is_err());
}

#[test]
fn almgren_monotonicity_for_the_laplacian() {
    let id = CoefficientField::identity(2);
    let u = solve(&id, &BoundaryData::random(5, 4), &PolarGrid::new(128, 128, 1.0).unwrap());
    let p = almgren_frequency(&u, &id, &ring_radii(&u, 0.1, 0.9)).unwrap();
    let rep = verify_almost_monotonicity(&p, 0.0, 0.0);
    assert_eq!(rep.fitted_c, 0.0);
    assert!(rep.samples.iter().all(|s| s.slope >= -1e-6));
    let x1 = almgren_frequency(&harmonic(1), &id, &geometric_radii(0.1, 0.9, 9)).unwrap();
    assert!(verify_almost_monotonicity(&x1, 0.0, 0.0).violations.is_empty());
}

#[test]
fn lipschitz_monotonicity_constant_is_stable() {
    let f = lipschitz();
    let data = BoundaryData::random(4, 7);
    let radii = geometric_radii(0.1, 0.9, 17);
    let fitted = |g: PolarGrid| {
        let u = solve(&f, &data, &g);
        verify_almost_monotonicity(&almgren_frequency(&u, &f, &radii).unwrap(), 0.2, 0.1).fitted_c
    };
    let coarse = fitted(PolarGrid::new(64, 64, 1.0).unwrap());
    let fine = fitted(PolarGrid::new(64, 64, 1.0).unwrap().refined());
    assert!(coarse.is_finite() && fine.is_finite());
    assert!((coarse - fine).abs() <= 0.1 * fine.max(1e-3), "{coarse} vs {fine}");
}

#[test]
fn h_identity_examples() {
    let id = CoefficientField::identity(2);
    let radii = geometric_radii(0.2, 0.8, 9);
    let e1 = verify_h_identity(&harmonic(1), &id, &radii, 0.0, 0.0).unwrap().sup_abs;
    assert!(e1 < 1e-6, "{e1}");
    let r = verify_h_identity(&harmonic(2), &id, &radii, 0.0, 0.0).unwrap();
    assert!(r.sup_normalized.is_none() && r.sup_abs < 1e-6, "{}", r.sup_abs);

    let f = lipschitz();
    let data = BoundaryData::random(4, 7);
    let sup = |g: PolarGrid| verify_h_identity(&solve(&f, &data, &g), &f, &radii, 0.2, 0.1).unwrap().sup_normalized.unwrap();
    let (coarse, fine) = (sup(PolarGrid::new(64, 64, 1.0).unwrap()), sup(PolarGrid::new(64, 64, 1.0).unwrap().refined()));
    assert!(coarse < 1.0 && (coarse - fine).abs() <= 0.1 * fine, "{coarse} vs {fine}");
}

#[test]
fn homogeneous_monotonicity_and_two_scale_average() {
    let a = FieldConfig::new(Arity::Isotropic, "angular_sine", &[("amplitude", 0.4)], 0).build().unwrap();
    let g = PolarGrid::new(128, 256, 1.0).unwrap();
    let u = solve(&a, &BoundaryData::random(4, 3), &g);
    let radii = ring_radii(&u, 0.1, 0.9);
    let rep = verify_homogeneous_monotonicity(&u, &a, &radii, MONOTONICITY_TOLERANCE).unwrap();
    assert!(rep.monotone && rep.h_identity_residual < 1e-3, "{rep:?}");

    // Ñ(r, ρ) is the dt/t average of N over [ρ, r]: trapezoid rule in log t over the rings.
    let p = &rep.profile;
    let (r, rho) = (p.radii[0], p.radii[p.radii.len() - 1]);
    let integral: f64 = (0..p.radii.len() - 1).map(|i| 0.5 * (p.n[i] + p.n[i + 1]) * (p.radii[i] / p.radii[i + 1]).ln()).sum();
    let tilde = two_scale_frequency(&u, &a, r, rho).unwrap();
    assert_relative_eq!(tilde, integral / (r / rho).ln(), max_relative = 1e-3);

    assert!(verify_homogeneous_monotonicity(&u, &lipschitz(), &radii, MONOTONICITY_TOLERANCE).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn frequency_is_scale_invariant(scale in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3], seed in 0u64..100) {
        let f = FieldConfig::new(Arity::Anisotropic, "random_smooth", &[], seed).build().unwrap();
        let g = PolarGrid::new(32, 32, 1.0).unwrap();
        let u = solve(&f, &BoundaryData::random(3, seed), &g);
        let v = u.with_values(u.values.iter().map(|x| scale * x).collect()).unwrap();
        let radii = [0.3, 0.5, 0.7];
        let (pu, pv) = (almgren_frequency(&u, &f, &radii).unwrap(), almgren_frequency(&v, &f, &radii).unwrap());
        for (a, b) in pu.n.iter().zip(&pv.n) {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
}
