//! Parameter studies of the limit constant's zero locus.
//!
//! The two-parameter family studied here is
//!
//! ```text
//! x^2 y' + y = f2 x^2 + p (x^3/(1-x) + 3 x y^2 + x y^3),
//! ```
//!
//! i.e. `a0 = 0`, `f = f2 x^2 + p x^3/(1-x)`, and the bivariate part
//! `3 p x y^2 + p x y^3`.  For each `(f2, p)` the limit constant `S` of
//! the normalised critical series is computed at truncation order `K`;
//! its zero set has a fold in `p`, with the `f2`-derivative of `S`
//! positive on the lower branch and vanishing at the fold.

use rayon::prelude::*;

use crate::center::{estimate_s_infty, fmt17};
use crate::error::{Error, Result};
use crate::gamma::log_gamma;
use crate::nonlinearity::{CoefficientProvider, HTerm, NonlinearitySpec};

/// Default truncation order for `S`; increments beyond it are at the
/// rounding floor for this family.
pub const DEFAULT_K: usize = 100;

/// Build the two-parameter family member at `(f2, p)`.
pub fn family_spec(f2: f64, p: f64) -> Result<NonlinearitySpec> {
    // f2 x^2 + p x^3/(1-x) = (f2 x^2 + (p - f2) x^3) / (1 - x).
    let f = CoefficientProvider::rational(vec![0.0, 0.0, f2, p - f2], vec![1.0, -1.0])?;
    NonlinearitySpec::new(
        0.0,
        0.0,
        1.0,
        1.0,
        10.0 + f2.abs() + p.abs(),
        f,
        vec![
            HTerm { k: 1, l: 2, v: 3.0 * p },
            HTerm { k: 1, l: 3, v: p },
        ],
    )
}

/// One evaluated point of a scan.
#[derive(Debug, Clone, Copy)]
pub struct LocusPoint {
    pub p: f64,
    pub f2: f64,
    pub s: f64,
    /// Last increment of the normalised sum at order `K`.
    pub residual: f64,
}

/// Limit-constant estimate for one family member.
pub fn family_s(f2: f64, p: f64, k: usize) -> Result<LocusPoint> {
    let spec = family_spec(f2, p)?;
    let est = estimate_s_infty(&spec, k, 1e-12)?;
    Ok(LocusPoint {
        p,
        f2,
        s: est.value,
        residual: est.residual,
    })
}

/// Evaluate `S` over the product grid `f2_grid x p_grid` (parallel, but
/// output order is deterministic: `p` outer, `f2` inner).
pub fn sinfty_scan(f2_grid: &[f64], p_grid: &[f64], k: usize) -> Result<Vec<LocusPoint>> {
    let jobs: Vec<(f64, f64)> = p_grid
        .iter()
        .flat_map(|&p| f2_grid.iter().map(move |&f2| (f2, p)))
        .collect();
    jobs.par_iter()
        .map(|&(f2, p)| family_s(f2, p, k))
        .collect()
}

pub fn scan_to_csv(points: &[LocusPoint]) -> String {
    let mut out = String::from("p,f2,S,residual\n");
    for pt in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt17(pt.p),
            fmt17(pt.f2),
            fmt17(pt.s),
            fmt17(pt.residual)
        ));
    }
    out
}

/// Bisect `S(f2) = 0` at fixed `p` inside `[lo, hi]`.
///
/// A 21-point pre-grid locates a sign change (the endpoint signs alone
/// are not trusted); bisection then runs to `|hi - lo| <= tol`.
pub fn zero_bisect(p: f64, lo: f64, hi: f64, tol: f64, k: usize) -> Result<f64> {
    if !(hi > lo) {
        return Err(Error::Bracket(format!("zero_bisect: bad bracket [{lo}, {hi}]")));
    }
    let sval = |f2: f64| -> Result<f64> { Ok(family_s(f2, p, k)?.s) };
    const PRE: usize = 21;
    let mut prev_x = lo;
    let mut prev_s = sval(lo)?;
    let mut bracket = None;
    for i in 1..PRE {
        let x = lo + (hi - lo) * i as f64 / (PRE - 1) as f64;
        let s = sval(x)?;
        if prev_s == 0.0 {
            return Ok(prev_x);
        }
        if prev_s * s <= 0.0 {
            bracket = Some((prev_x, x, prev_s));
            break;
        }
        prev_x = x;
        prev_s = s;
    }
    let (mut a, mut b, sa) = bracket.ok_or_else(|| {
        Error::Bracket(format!(
            "zero_bisect: no sign change of S on [{lo}, {hi}] at p = {p}"
        ))
    })?;
    let mut sa = sa;
    while b - a > tol {
        let mid = 0.5 * (a + b);
        let sm = sval(mid)?;
        if sa * sm <= 0.0 {
            b = mid;
        } else {
            a = mid;
            sa = sm;
        }
    }
    Ok(0.5 * (a + b))
}

/// Fold of the zero locus in the `(p, f2)` plane.
#[derive(Debug, Clone, Copy)]
pub struct FoldResult {
    pub p: f64,
    pub f2: f64,
    /// `S` at the reported fold point (should be ~0).
    pub s: f64,
    /// `f2`-derivative of `S` at the fold (should be ~0).
    pub ds_df2: f64,
    /// `p`-derivative of `S` at the fold.
    pub ds_dp: f64,
}

/// Maximum of `S(f2, p)` over `f2 in [f2_lo, f2_hi]`: coarse grid, then
/// golden-section refinement around the best grid point.
fn max_over_f2(p: f64, f2_lo: f64, f2_hi: f64, k: usize) -> Result<(f64, f64)> {
    const GRID: usize = 41;
    let sval = |f2: f64| -> Result<f64> { Ok(family_s(f2, p, k)?.s) };
    let mut best_i = 0;
    let mut best_s = f64::NEG_INFINITY;
    let xs: Vec<f64> = (0..GRID)
        .map(|i| f2_lo + (f2_hi - f2_lo) * i as f64 / (GRID - 1) as f64)
        .collect();
    for (i, &x) in xs.iter().enumerate() {
        let s = sval(x)?;
        if s > best_s {
            best_s = s;
            best_i = i;
        }
    }
    let mut a = xs[best_i.saturating_sub(1)];
    let mut b = xs[(best_i + 1).min(GRID - 1)];
    // Golden-section search for the maximum.
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut s1 = sval(x1)?;
    let mut s2 = sval(x2)?;
    while b - a > 1e-6 {
        if s1 < s2 {
            a = x1;
            x1 = x2;
            s1 = s2;
            x2 = a + phi * (b - a);
            s2 = sval(x2)?;
        } else {
            b = x2;
            x2 = x1;
            s2 = s1;
            x1 = b - phi * (b - a);
            s1 = sval(x1)?;
        }
    }
    let xm = 0.5 * (a + b);
    Ok((xm, sval(xm)?))
}

/// Locate the fold: the value of `p` where the maximum of `S` over `f2`
/// crosses zero (two zeros of `S(., p)` merging and disappearing).
///
/// Preconditions: the maximum is positive at `p_lo` and negative at
/// `p_hi`; otherwise a bracket error is returned.
pub fn fold_find(
    p_lo: f64,
    p_hi: f64,
    f2_lo: f64,
    f2_hi: f64,
    p_tol: f64,
    k: usize,
) -> Result<FoldResult> {
    let (_, s_lo) = max_over_f2(p_lo, f2_lo, f2_hi, k)?;
    let (_, s_hi) = max_over_f2(p_hi, f2_lo, f2_hi, k)?;
    if !(s_lo > 0.0 && s_hi < 0.0) {
        return Err(Error::Bracket(format!(
            "fold_find: max S over f2 is {s_lo:+e} at p = {p_lo} and {s_hi:+e} at p = {p_hi}; \
             need a sign change from + to -"
        )));
    }
    let mut a = p_lo;
    let mut b = p_hi;
    let mut fold_f2 = f64::NAN;
    let mut fold_s = f64::NAN;
    while b - a > p_tol {
        let mid = 0.5 * (a + b);
        let (f2m, sm) = max_over_f2(mid, f2_lo, f2_hi, k)?;
        if sm > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        fold_f2 = f2m;
        fold_s = sm;
    }
    let p_star = 0.5 * (a + b);
    let spec = family_spec(fold_f2, p_star)?;
    let ds_df2 = ds_df2(&spec, k, 1e-6)?;
    let h = 1e-5;
    let ds_dp = (family_s(fold_f2, p_star + h, k)?.s - family_s(fold_f2, p_star - h, k)?.s)
        / (2.0 * h);
    Ok(FoldResult {
        p: p_star,
        f2: fold_f2,
        s: fold_s,
        ds_df2,
        ds_dp,
    })
}

/// Central finite-difference sensitivity of the limit constant to the
/// quadratic coefficient of `f`.
pub fn ds_df2(spec: &NonlinearitySpec, k: usize, h: f64) -> Result<f64> {
    let plus = estimate_s_infty(&spec.with_f2_shift(h), k, 1e-12)?.value;
    let minus = estimate_s_infty(&spec.with_f2_shift(-h), k, 1e-12)?.value;
    Ok((plus - minus) / (2.0 * h))
}

/// First-order prediction for that sensitivity when the bivariate part
/// is switched off: `1 / Gamma(2 + a0)`.
pub fn ds_df2_linear_prediction(a0: f64) -> Result<f64> {
    Ok((-log_gamma(2.0 + a0)?).exp())
}
