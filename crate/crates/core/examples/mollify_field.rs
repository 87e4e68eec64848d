//! Mollifies a Hölder field and compares the observed distance and gradient
//! with the bounds implied by its modulus.
use freqlab::coefficients::{generate_holder, mollified_gradient, mollify, empirical_modulus};

fn main() -> freqlab::Result<()> {
    let f = generate_holder(0.7, 0.1, 1, 2)?;
    let fit = empirical_modulus(&f, 400)?;
    println!("target alpha 0.7, empirical alpha {:.3}, C_h {:.3}", fit.alpha.unwrap_or(f64::NAN), fit.c_h);
    for eps in [0.2, 0.1, 0.05] {
        let fe = mollify(&f, eps)?;
        let (mut dist, mut grad) = (0.0f64, 0.0f64);
        for i in 0..32 {
            for j in 0..32 {
                let x = [0.8 * (i as f64 / 31.0 - 0.5), 0.8 * (j as f64 / 31.0 - 0.5), 0.0];
                dist = dist.max((fe.scalar(&x) - f.scalar(&x)).abs());
                let g = mollified_gradient(&f, eps, &x)?;
                grad = grad.max(g[0].hypot(g[1]));
            }
        }
        let info = fe.mollification.expect("mollified");
        println!(
            "eps {eps:<5} sup|a_eps - a| {dist:.4} (bound {:.4})  sup|grad a_eps| {grad:.3} (bound {:.3})",
            info.sup_distance_bound.unwrap_or(f64::NAN),
            info.gradient_bound.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
