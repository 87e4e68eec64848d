use approx::assert_relative_eq;
use freqlab::coefficients::{
    beta_vector, empirical_modulus, generate_holder, homogeneous_projection, mollified_gradient, mollify, mu_factor, Arity,
    CoefficientField, FieldConfig, Mollifier, Point,
};
use freqlab::modulus::Modulus;
use proptest::prelude::*;

fn p(x: f64, y: f64) -> Point {
    [x, y, 0.0]
}

#[test]
fn mu_factor_examples() {
    let id = CoefficientField::identity(2);
    assert_relative_eq!(mu_factor(&id, &p(0.3, -0.7)).unwrap(), 1.0, epsilon = 1e-15);
    let d = CoefficientField::diagonal(&[2.0, 1.0]);
    assert_relative_eq!(mu_factor(&d, &p(0.3, 0.0)).unwrap(), 2.0, epsilon = 1e-15);
    assert_relative_eq!(mu_factor(&d, &p(0.2, 0.2)).unwrap(), 1.5, epsilon = 1e-15);
    assert!(mu_factor(&d, &p(0.0, 0.0)).is_err());
}

#[test]
fn beta_vector_examples() {
    let x = p(0.3, -0.2);
    let b = beta_vector(&CoefficientField::identity(2), &x).unwrap();
    assert_relative_eq!(b[0], x[0], epsilon = 1e-15);
    assert_relative_eq!(b[1], x[1], epsilon = 1e-15);
    let d = CoefficientField::diagonal(&[2.0, 1.0]);
    let b = beta_vector(&d, &p(0.3, 0.0)).unwrap();
    assert_relative_eq!(b[0], 0.3, epsilon = 1e-15);
    assert_relative_eq!(b[1], 0.0, epsilon = 1e-15);
    let b = beta_vector(&d, &p(0.1, 0.1)).unwrap();
    assert_relative_eq!(b[0], 0.1 * 2.0 / 1.5, epsilon = 1e-15);
    assert_relative_eq!(b[1], 0.1 / 1.5, epsilon = 1e-15);
}

#[test]
fn mollify_preserves_constants_and_affine_fields() {
    let c = CoefficientField::constant(2, 1.7);
    let ce = mollify(&c, 0.1).unwrap();
    assert_relative_eq!(ce.scalar(&p(0.2, 0.4)), 1.7, epsilon = 1e-12);
    let a = FieldConfig::new(Arity::Isotropic, "affine", &[("g1", 1.0)], 0).build().unwrap();
    let ae = mollify(&a, 0.1).unwrap();
    for x in [p(0.0, 0.0), p(0.5, -0.3), p(-0.8, 0.1)] {
        assert_relative_eq!(ae.scalar(&x), a.scalar(&x), epsilon = 1e-12);
    }
    assert!(mollify(&a, 0.0).is_err());
}

#[test]
fn mollify_respects_modulus_bounds() {
    // a = 1 + 0.3·|x₁|^{1/2} has modulus 0.3·t^{1/2} ≤ ω(t) = t^{1/2}.
    let f = CoefficientField::isotropic(2, "root", |x| 1.0 + 0.3 * x[0].abs().sqrt()).with_modulus(Modulus::power(0.5).unwrap());
    for eps in [0.2, 0.05, 0.01] {
        let fe = mollify(&f, eps).unwrap();
        let info = fe.mollification.unwrap();
        let (sup_bound, grad_bound) = (info.sup_distance_bound.unwrap(), info.gradient_bound.unwrap());
        assert_relative_eq!(sup_bound, eps.sqrt(), epsilon = 1e-14);
        for i in 0..40 {
            let t = i as f64 / 40.0 * std::f64::consts::TAU;
            let x = p((1.0 - eps) * 0.9 * t.cos(), 0.5 * t.sin());
            assert!((fe.scalar(&x) - f.scalar(&x)).abs() <= 0.3 * sup_bound);
            let g = mollified_gradient(&f, eps, &x).unwrap();
            assert!(g[0].hypot(g[1]) <= 0.3 * grad_bound, "eps {eps}: |grad| {} vs {}", g[0].hypot(g[1]), 0.3 * grad_bound);
        }
    }
    assert!(Mollifier::standard(2).gradient_integral > 0.0);
}

#[test]
fn homogeneous_projection_examples() {
    let s = FieldConfig::new(Arity::Isotropic, "angular_sine", &[("amplitude", 0.3)], 0).build().unwrap();
    let h = homogeneous_projection(&s, 0.7).unwrap();
    for x in [p(0.1, 0.2), p(-0.5, 0.3), p(0.0, -0.9)] {
        assert_relative_eq!(h.value(&x), s.scalar(&x), epsilon = 1e-14);
    }
    let radial = FieldConfig::new(Arity::Isotropic, "radial", &[("slope", 1.0)], 0).build().unwrap();
    let h = homogeneous_projection(&radial, 0.5).unwrap();
    for x in [p(0.0, 0.0), p(0.01, 0.0), p(0.3, -0.6)] {
        assert_relative_eq!(h.value(&x), 1.5, epsilon = 1e-14);
    }
    assert!(homogeneous_projection(&CoefficientField::identity(2), 0.5).is_err());
}

#[test]
fn empirical_modulus_examples() {
    let c = empirical_modulus(&CoefficientField::constant(2, 2.0), 400).unwrap();
    assert!(c.alpha.is_none() && c.c_h == 0.0 && c.oscillation.iter().all(|o| *o == 0.0));
    let a = FieldConfig::new(Arity::Isotropic, "affine", &[("g1", 0.2)], 0).build().unwrap();
    let e = empirical_modulus(&a, 400).unwrap();
    assert_relative_eq!(e.alpha.unwrap(), 1.0, epsilon = 1e-6);
    assert_relative_eq!(e.c_h, 0.2, max_relative = 1e-3);
    assert!(empirical_modulus(&a, 50).is_err());
}

#[test]
fn holder_generator_examples() {
    let flat = generate_holder(0.9, 0.0, 3, 2).unwrap();
    for x in [p(0.0, 0.0), p(0.4, -0.2)] {
        assert_eq!(flat.scalar(&x), 1.0);
    }
    let f = generate_holder(0.7, 0.1, 1, 2).unwrap();
    assert_relative_eq!(f.scalar(&p(0.0, 0.0)), 1.0, epsilon = 1e-12);
    let alpha = empirical_modulus(&f, 400).unwrap().alpha.unwrap();
    assert!((alpha - 0.7).abs() <= 0.05, "empirical alpha {alpha}");
    assert!(generate_holder(0.7, 10.0, 1, 2).is_err());
    // Deterministic per seed.
    let g = generate_holder(0.7, 0.1, 1, 2).unwrap();
    assert_eq!(f.scalar(&p(0.31, 0.17)), g.scalar(&p(0.31, 0.17)));
}

#[test]
fn field_config_errors_are_reported() {
    let bad = |kind: &str, params: &[(&str, f64)]| FieldConfig::new(Arity::Isotropic, kind, params, 0).build().unwrap_err().to_string();
    assert!(bad("nosuch", &[]).contains("unknown field kind"));
    assert!(bad("affine", &[("slope", 1.0)]).contains("unknown key"));
    assert!(bad("radial", &[]).contains("requires params.slope"));
    assert!(bad("constant", &[("value", -1.0)]).contains("not elliptic"));
}

/// Symmetric 2×2 perturbation R·diag(e1, e2)·Rᵀ with operator norm max|e_i|.
fn perturbed(angle: f64, e1: f64, e2: f64) -> [[f64; 3]; 3] {
    let (c, s) = (angle.cos(), angle.sin());
    let a = 1.0 + e1 * c * c + e2 * s * s;
    let b = (e1 - e2) * c * s;
    let d = 1.0 + e1 * s * s + e2 * c * c;
    [[a, b, 0.0], [b, d, 0.0], [0.0; 3]]
}

proptest! {
    #[test]
    fn beta_has_unit_normal_component(angle in 0.0f64..6.3, e1 in -0.4f64..0.4, e2 in -0.4f64..0.4,
                                      r in 1e-3f64..1.0, t in 0.0f64..6.3) {
        let m = perturbed(angle, e1, e2);
        let f = CoefficientField::anisotropic(2, "const", move |_| m);
        let x = p(r * t.cos(), r * t.sin());
        let b = beta_vector(&f, &x).unwrap();
        prop_assert!(((b[0] * x[0] + b[1] * x[1]) / r - r).abs() <= 1e-12);
        // |A − I| ≤ δ gives |β − x| ≤ 2δ|x|/(1 − δ).
        let delta = e1.abs().max(e2.abs());
        let dev = (b[0] - x[0]).hypot(b[1] - x[1]);
        prop_assert!(dev <= 2.0 * delta * r / (1.0 - delta) + 1e-14);
    }

    #[test]
    fn mu_stays_in_the_ellipticity_band(seed in 0u64..1000, r in 0.01f64..0.99, t in 0.0f64..6.3) {
        let f = FieldConfig::new(Arity::Anisotropic, "random_smooth", &[], seed).build().unwrap();
        let lambda = f.ellipticity;
        let mu = mu_factor(&f, &p(r * t.cos(), r * t.sin())).unwrap();
        prop_assert!(mu >= lambda * (1.0 - 1e-12) && mu <= (1.0 + 1e-12) / lambda, "mu {} lambda {}", mu, lambda);
    }

    #[test]
    fn homogeneous_projection_is_idempotent(amp in 0.0f64..0.4, freq in 1.0f64..4.0, r0 in 0.1f64..1.0, r1 in 0.1f64..1.0,
                                            x in -0.9f64..0.9, y in -0.9f64..0.9) {
        let f = FieldConfig::new(Arity::Isotropic, "holder", &[("alpha", 0.8), ("amplitude", amp * 0.2)], (freq * 100.0) as u64)
            .build().unwrap();
        let once = homogeneous_projection(&f, r0).unwrap();
        let twice = homogeneous_projection(&once.field, r1).unwrap();
        let q = p(x, y);
        prop_assume!(x.hypot(y) > 1e-6);
        prop_assert!((once.value(&q) - twice.value(&q)).abs() <= 1e-12);
    }
}
