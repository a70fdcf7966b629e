//! Globally adaptive Gauss–Kronrod quadrature (15-point rule).

use crate::error::{Error, Result};

// Nodes and weights of the 7-15 Gauss–Kronrod pair (QUADPACK qk15).
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
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

fn qk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut result_gauss = 0.0;
    let mut result_kronrod = WGK[7] * f(c);
    for j in 0..7 {
        let x = h * XGK[j];
        let fsum = f(c - x) + f(c + x);
        result_kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            result_gauss += WG[j / 2] * fsum;
        }
    }
    result_gauss += WG[3] * f(c);
    let value = result_kronrod * h;
    let err = ((result_kronrod - result_gauss) * h).abs();
    (value, err)
}

/// Integrate `f` over `[a, b]` to the requested tolerances by bisecting
/// the interval with the largest local error estimate.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain("quad: bounds must be finite".into()));
    }
    if a == b {
        return Ok(0.0);
    }
    const MAX_SEGMENTS: usize = 4000;
    let mut segments: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = qk15(&f, a, b);
    segments.push((a, b, v, e));
    loop {
        let total: f64 = segments.iter().map(|s| s.2).sum();
        let err: f64 = segments.iter().map(|s| s.3).sum();
        if !total.is_finite() {
            return Err(Error::Domain("quad: integrand produced non-finite values".into()));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        if segments.len() >= MAX_SEGMENTS {
            return Err(Error::NoConvergence(format!(
                "quad: error estimate {err:e} above tolerance after {MAX_SEGMENTS} segments"
            )));
        }
        let (idx, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (sa, sb, _, _) = segments.swap_remove(idx);
        let mid = 0.5 * (sa + sb);
        if mid <= sa || mid >= sb {
            return Err(Error::NoConvergence(
                "quad: interval underflow before reaching tolerance".into(),
            ));
        }
        let (v1, e1) = qk15(&f, sa, mid);
        let (v2, e2) = qk15(&f, mid, sb);
        segments.push((sa, mid, v1, e1));
        segments.push((mid, sb, v2, e2));
    }
}
