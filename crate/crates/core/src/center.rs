//! Invariant-graph coefficients at the critical parameter value.
//!
//! The graph `y = sum_{k>=2} m_k x^k` of the center manifold satisfies
//!
//! ```text
//! x^2 y' + y (1 + a0 x) = g(x, y),
//! ```
//!
//! which gives the recursion `m_k + (k - 1 + a0) m_{k-1} = G_k`, where
//! `G_k` is the `k`-th coefficient of `g(x, y(x))` and depends only on
//! `m_2, ..., m_{k-3}`.  The coefficients are factorially divergent, so
//! the recursion is carried in the normalised variables
//!
//! ```text
//! S_k = sum_{j=2}^{k} (-1)^j G_j / Gamma(j + a0),
//! m_k = (-1)^k Gamma(k + a0) S_k.
//! ```
//!
//! `S_k` converges geometrically; its limit is the constant whose sign
//! controls the flapping behaviour of the unfolded weak manifold.

use crate::error::{Error, Result};
use crate::gamma::{log_gamma, SignedLogValue};
use crate::nonlinearity::{critical_term, NonlinearitySpec};
use crate::series::{PowerTable, TruncatedSeries};

/// Output of [`center_coeffs`].
#[derive(Debug, Clone)]
pub struct CenterManifoldData {
    a0: f64,
    /// `m_k` for `k = 2..=k_max` (f64 materialisation).
    m: Vec<f64>,
    /// `S_k` for `k = 2..=k_max`.
    s: Vec<f64>,
    /// `G_k` for `k = 2..=k_max`.
    g: Vec<f64>,
    k_max: usize,
}

impl CenterManifoldData {
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn m(&self, k: usize) -> f64 {
        assert!((2..=self.k_max).contains(&k));
        self.m[k - 2]
    }

    pub fn s(&self, k: usize) -> f64 {
        assert!((2..=self.k_max).contains(&k));
        self.s[k - 2]
    }

    pub fn g_coeff(&self, k: usize) -> f64 {
        assert!((2..=self.k_max).contains(&k));
        self.g[k - 2]
    }

    /// `m_k` in signed-log form: `(-1)^k Gamma(k + a0) S_k`, assembled in
    /// log space, so it stays meaningful past the `f64` overflow point.
    pub fn m_signed(&self, k: usize) -> SignedLogValue {
        let s = self.s(k);
        let lg = log_gamma(k as f64 + self.a0).expect("k + a0 > 0");
        let parity = if k % 2 == 0 { 1 } else { -1 };
        SignedLogValue::from_value(s)
            .mul(&SignedLogValue::new(lg, parity))
    }

    pub fn series(&self) -> TruncatedSeries {
        TruncatedSeries::new(2, self.m.clone()).expect("non-empty")
    }

    /// One CSV row per coefficient:
    /// `k,m,m_log_abs,m_sign,S,increment`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,m,m_log_abs,m_sign,S,increment\n");
        for k in 2..=self.k_max {
            let ms = self.m_signed(k);
            let inc = if k == 2 {
                self.s(k)
            } else {
                self.s(k) - self.s(k - 1)
            };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                k,
                fmt17(self.m(k)),
                fmt17(ms.log_abs()),
                ms.sign(),
                fmt17(self.s(k)),
                fmt17(inc)
            ));
        }
        out
    }
}

/// 17-significant-digit decimal form (round-trips f64 exactly).
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Run the graph recursion through order `k_max`.
///
/// The nonlinear feedback needs the materialised `m_k`, which overflow
/// `f64` once `k + a0` passes the gamma overflow point; such orders are
/// rejected when the bivariate part is active.
pub fn center_coeffs(spec: &NonlinearitySpec, k_max: usize) -> Result<CenterManifoldData> {
    if k_max < 2 {
        return Err(Error::Domain("center_coeffs: k_max must be >= 2".into()));
    }
    if spec.mu() != 0.0 && k_max as f64 + spec.a0() > 170.0 {
        return Err(Error::Domain(format!(
            "center_coeffs: order {k_max} materialises coefficients past the \
             f64 range needed by the nonlinear feedback (k + a0 > 170)"
        )));
    }
    let a0 = spec.a0();
    let mut table = PowerTable::new();
    let mut m = Vec::with_capacity(k_max - 1);
    let mut s_vals = Vec::with_capacity(k_max - 1);
    let mut g_vals = Vec::with_capacity(k_max - 1);
    // Kahan-compensated running sum for S.
    let mut s = 0.0f64;
    let mut comp = 0.0f64;
    for k in 2..=k_max {
        let gk = critical_term(spec, &mut table, k)?;
        let lg = log_gamma(k as f64 + a0)?;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * gk * (-lg).exp();
        // Kahan step.
        let yk = term - comp;
        let tk = s + yk;
        comp = (tk - s) - yk;
        s = tk;
        let mk = sign * lg.exp() * s;
        table.push(mk);
        m.push(mk);
        s_vals.push(s);
        g_vals.push(gk);
    }
    Ok(CenterManifoldData {
        a0,
        m,
        s: s_vals,
        g: g_vals,
        k_max,
    })
}

/// Result of [`estimate_s_infty`].
#[derive(Debug, Clone, Copy)]
pub struct SInftyEstimate {
    pub value: f64,
    pub k_used: usize,
    /// Last increment `|S_k - S_{k-1}|`.
    pub residual: f64,
    pub converged: bool,
}

/// Estimate the limit of `S_k` by running the recursion to `k_max` and
/// reporting the last increment as the residual.
pub fn estimate_s_infty(
    spec: &NonlinearitySpec,
    k_max: usize,
    tol: f64,
) -> Result<SInftyEstimate> {
    let data = center_coeffs(spec, k_max)?;
    let residual = (data.s(k_max) - data.s(k_max - 1)).abs();
    Ok(SInftyEstimate {
        value: data.s(k_max),
        k_used: k_max,
        residual,
        converged: residual <= tol,
    })
}

/// Closed-form normalised sums for a purely `y`-independent nonlinearity:
/// `S_k = sum_{j=2}^{k} (-1)^j f_j / Gamma(j + a0)`, with
/// `m_k = (-1)^k Gamma(k + a0) S_k`.  Independent oracle for the
/// recursion when the bivariate part is switched off.
pub fn linear_case_s(f: &[(usize, f64)], a0: f64, k_max: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(k_max - 1);
    let mut s = 0.0;
    for k in 2..=k_max {
        let fk: f64 = f.iter().filter(|(j, _)| *j == k).map(|(_, v)| v).sum();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s += sign * fk * (-log_gamma(k as f64 + a0)?).exp();
        out.push(s);
    }
    Ok(out)
}

/// Weighted supremum norm `sup_k |y_k| / Gamma(k + a0)` of a series,
/// computed in log space so factorial-size coefficients are fine.
pub fn gevrey_norm(y: &TruncatedSeries, a0: f64) -> Result<f64> {
    let mut best = 0.0f64;
    for k in y.first_index()..=y.order() {
        let c = y.coeff(k)?;
        if c == 0.0 {
            continue;
        }
        let r = (c.abs().ln() - log_gamma(k as f64 + a0)?).exp();
        best = best.max(r);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{CoefficientProvider, HTerm};

    fn spec_linear(f: &[(usize, f64)], a0: f64) -> NonlinearitySpec {
        NonlinearitySpec::new(
            a0,
            0.0,
            0.0,
            1.0,
            10.0,
            CoefficientProvider::explicit(f.iter().copied()),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn euler_series_exact() {
        // g = x^2, a0 = 0: m_k = (-1)^k (k-1)!.
        let data = center_coeffs(&spec_linear(&[(2, 1.0)], 0.0), 12).unwrap();
        let mut fact = 1.0f64; // (k-1)! built incrementally
        for k in 2..=12 {
            fact *= (k - 1) as f64;
            let want = if k % 2 == 0 { fact } else { -fact };
            let got = data.m(k);
            assert!(
                ((got - want) / want).abs() <= 1e-13,
                "k = {k}: {got} vs {want}"
            );
            // And S_k = 1 for every k.
            assert!((data.s(k) - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn cubic_linear_example() {
        // f = x^2 + x^3 with a0 = 1: S_2 = 1/2, S_3 = 1/2 - 1/6 = 1/3,
        // m_3 = -Gamma(4)/3 = -2.
        let data = center_coeffs(&spec_linear(&[(2, 1.0), (3, 1.0)], 1.0), 5).unwrap();
        assert!((data.s(2) - 0.5).abs() <= 1e-14);
        assert!((data.s(3) - 1.0 / 3.0).abs() <= 1e-14);
        assert!((data.m(3) + 2.0).abs() <= 1e-13);
    }

    #[test]
    fn recursion_matches_linear_closed_form() {
        let f = [(2, 0.7), (3, -1.1), (5, 0.3), (9, 2.0)];
        for a0 in [-1.5, 0.0, 2.0] {
            let data = center_coeffs(&spec_linear(&f, a0), 60).unwrap();
            let oracle = linear_case_s(&f, a0, 60).unwrap();
            for k in 2..=60 {
                let got = data.s(k);
                let want = oracle[k - 2];
                assert!(
                    (got - want).abs() <= 1e-13 * want.abs().max(1.0),
                    "a0 = {a0}, k = {k}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn recursion_residual_vanishes_with_nonlinearity() {
        // Independent check of the full nonlinear recursion: the computed
        // series must satisfy m_k + (k - 1 + a0) m_{k-1} = G_k where G is
        // re-derived from the batch composition operator.
        let spec = NonlinearitySpec::new(
            0.5,
            0.0,
            1.0,
            1.0,
            5.0,
            CoefficientProvider::explicit([(2, 1.0), (3, 0.4)]),
            vec![
                HTerm { k: 1, l: 2, v: 3.0 },
                HTerm { k: 1, l: 3, v: 1.0 },
            ],
        )
        .unwrap();
        let k_max = 40;
        let data = center_coeffs(&spec, k_max).unwrap();
        let series = data.series();
        let g = crate::nonlinearity::compose_critical(&spec, &series, k_max).unwrap();
        for k in 3..=k_max {
            let lhs = data.m(k) + (k as f64 - 1.0 + spec.a0()) * data.m(k - 1);
            let rhs = g.coeff(k).unwrap();
            let scale = data.m(k).abs().max(1.0);
            assert!(
                (lhs - rhs).abs() <= 1e-11 * scale,
                "k = {k}: residual {}",
                lhs - rhs
            );
        }
        // m_2 = G_2 (the recursion seed, since m_1 = 0).
        assert!((data.m(2) - g.coeff(2).unwrap()).abs() <= 1e-14);
    }

    #[test]
    fn s_infty_estimate_converges_geometrically() {
        // For f supported on finitely many indices and mu = 0, S_k is
        // eventually constant.
        let spec = spec_linear(&[(2, 1.0), (3, -0.5)], 0.0);
        let est = estimate_s_infty(&spec, 40, 1e-12).unwrap();
        assert!(est.converged);
        assert!(est.residual == 0.0);
        // S_infty = f_2 / Gamma(2) - f_3 / Gamma(3) = 1 + 0.25.
        assert!((est.value - 1.25).abs() <= 1e-14);
    }

    #[test]
    fn m_signed_survives_f64_overflow() {
        // Linear case can run far past the overflow point of Gamma.
        let spec = spec_linear(&[(2, 1.0)], 0.0);
        let data = center_coeffs(&spec, 400).unwrap();
        let m400 = data.m_signed(400);
        // log |m_400| = log Gamma(400) since S = 1.
        let want = log_gamma(400.0).unwrap();
        assert!((m400.log_abs() - want).abs() <= 1e-12 * want);
        assert_eq!(m400.sign(), 1);
        assert!(data.m(400).is_infinite()); // f64 view saturates
    }

    #[test]
    fn gevrey_norm_of_euler_series() {
        // |m_k| / Gamma(k) = 1 for the Euler series.
        let data = center_coeffs(&spec_linear(&[(2, 1.0)], 0.0), 30).unwrap();
        let n = gevrey_norm(&data.series(), 0.0).unwrap();
        assert!((n - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn csv_shape_and_determinism() {
        let spec = spec_linear(&[(2, 1.0)], 0.0);
        let a = center_coeffs(&spec, 10).unwrap().to_csv();
        let b = center_coeffs(&spec, 10).unwrap().to_csv();
        assert_eq!(a, b);
        assert!(a.starts_with("k,m,m_log_abs,m_sign,S,increment\n"));
        assert_eq!(a.lines().count(), 10); // header + k = 2..=10
    }
}
