//! Adaptive Gauss–Kronrod quadrature (7/15 pair) and dyadic partial integrals.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// One Kronrod panel: (K15 estimate, |K15 − G7|).
pub fn kronrod15<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive integration on [a, b]; bisects the panel with the largest error
/// until the summed error is below max(abs_tol, rel_tol·|I|).
pub fn adaptive<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> QuadResult {
    const MAX_PANELS: usize = 4000;
    if a == b {
        return QuadResult { value: 0.0, error: 0.0, evaluations: 0, converged: true };
    }
    let (v, e) = kronrod15(f, a, b);
    let mut panels = vec![(a, b, v, e)];
    let mut evaluations = 15;
    loop {
        let value: f64 = panels.iter().map(|p| p.2).sum();
        let error: f64 = panels.iter().map(|p| p.3).sum();
        let tol = abs_tol.max(rel_tol * value.abs());
        if error <= tol || !value.is_finite() {
            return QuadResult { value, error, evaluations, converged: value.is_finite() };
        }
        if panels.len() >= MAX_PANELS {
            return QuadResult { value, error, evaluations, converged: false };
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (pa, pb, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (pa + pb);
        if mid <= pa || mid >= pb {
            // Panel cannot be split further at double precision.
            let value: f64 = panels.iter().map(|p| p.2).sum::<f64>() + kronrod15(f, pa, pb).0;
            return QuadResult { value, error, evaluations, converged: false };
        }
        let (v1, e1) = kronrod15(f, pa, mid);
        let (v2, e2) = kronrod15(f, mid, pb);
        evaluations += 30;
        panels.push((pa, mid, v1, e1));
        panels.push((mid, pb, v2, e2));
    }
}

/// Integrals over the dyadic shells [b·2^{-k-1}, b·2^{-k}] for k = 0..levels.
pub fn dyadic_increments<F: Fn(f64) -> f64 + ?Sized>(f: &F, b: f64, levels: usize, rel_tol: f64) -> Vec<f64> {
    (0..levels)
        .map(|k| {
            let hi = b * 0.5f64.powi(k as i32);
            adaptive(f, 0.5 * hi, hi, 0.0, rel_tol).value
        })
        .collect()
}
