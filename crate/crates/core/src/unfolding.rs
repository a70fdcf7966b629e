//! The unfolded (near-resonant) weak-manifold machinery.
//!
//! In the rescaled variables the weak-manifold graph coefficients obey
//!
//! ```text
//! (1 - eps k) m_k + eps (k - 1 + a) m_{k-1} = eps G_k,    m_1 = 0,
//! ```
//!
//! where `G_k` is the rescaled composed nonlinearity.  The weights
//!
//! ```text
//! w_k = Gamma(1/eps - k) Gamma(k + a) / (eps Gamma(1/eps))
//! ```
//!
//! satisfy `(1 - eps k) w_k = eps (k - 1 + a) w_{k-1}` and normalise the
//! recursion: `m_k = (-1)^k w_k S_k` with
//! `S_k = sum_{j=2}^k (-1)^j eps G_j / (w_j (1 - eps j))`.
//!
//! Writing `1/eps = N + alpha` with `N` integer and `alpha` in `(0, 1)`,
//! the first weight sign change happens at `k = N + 1`, and for `k > N`
//! the reflection form
//!
//! ```text
//! w_k = (-1)^{k-N} Gamma(alpha) Gamma(1-alpha) / (eps Gamma(1/eps))
//!       * Gamma(k + a) / Gamma(k + 1 - 1/eps)
//! ```
//!
//! stays pole-free.  The tail series built from those reflected weights
//! is the tracking series `V` (and its `x^{N+1}`-and-up part `U`), which
//! this module evaluates both by certified summation and by quadrature.

use crate::error::{Error, Result};
use crate::gamma::{log_gamma, SignedLogValue};
use crate::nonlinearity::{scaled_term, NonlinearitySpec};
use crate::quad;
use crate::series::PowerTable;

/// Parameters within this distance of an exact resonance (`1/eps`
/// integer) are rejected.
pub const RESONANCE_GUARD: f64 = 1e-8;

/// A validated near-resonant parameter value.
#[derive(Debug, Clone, Copy)]
pub struct UnfoldingContext {
    eps: f64,
    inv_eps: f64,
    /// Integer part of `1/eps`.
    n: usize,
    /// Fractional part of `1/eps`, in `(0, 1)` away from the guard band.
    alpha: f64,
    /// Eigenvalue-ratio coefficient at this parameter.
    a_eps: f64,
}

impl UnfoldingContext {
    /// Build from `eps`, rejecting resonances and `eps` outside `(0, 1/2)`.
    pub fn from_eps(eps: f64, a_eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::Domain(format!(
                "unfolding: eps = {eps} outside (0, 1/2)"
            )));
        }
        let inv_eps = 1.0 / eps;
        let nearest = inv_eps.round();
        if (inv_eps - nearest).abs() <= RESONANCE_GUARD {
            return Err(Error::Resonance {
                inv_eps,
                nearest: nearest as i64,
                guard: RESONANCE_GUARD,
            });
        }
        let n = inv_eps.floor();
        Ok(Self {
            eps,
            inv_eps,
            n: n as usize,
            alpha: inv_eps - n,
            a_eps,
        })
    }

    /// Build from the resonance index and offset: `1/eps = n + alpha`.
    pub fn from_parts(n: usize, alpha: f64, a_eps: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("unfolding: n = {n} must be >= 2")));
        }
        if !(alpha > RESONANCE_GUARD && alpha < 1.0 - RESONANCE_GUARD) {
            return Err(Error::Resonance {
                inv_eps: n as f64 + alpha,
                nearest: if alpha < 0.5 { n as i64 } else { n as i64 + 1 },
                guard: RESONANCE_GUARD,
            });
        }
        let inv_eps = n as f64 + alpha;
        Ok(Self {
            eps: 1.0 / inv_eps,
            inv_eps,
            n,
            alpha,
            a_eps,
        })
    }

    pub fn from_eps_spec(eps: f64, spec: &NonlinearitySpec) -> Result<Self> {
        Self::from_eps(eps, spec.a_eps(eps))
    }

    pub fn from_parts_spec(n: usize, alpha: f64, spec: &NonlinearitySpec) -> Result<Self> {
        let eps = 1.0 / (n as f64 + alpha);
        Self::from_parts(n, alpha, spec.a_eps(eps))
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn inv_eps(&self) -> f64 {
        self.inv_eps
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn a_eps(&self) -> f64 {
        self.a_eps
    }

    /// `log(eps Gamma(1/eps))`, the shared denominator of the weights.
    fn log_eps_gamma_inv_eps(&self) -> f64 {
        self.eps.ln() + log_gamma(self.inv_eps).expect("1/eps > 0")
    }
}

/// The weight `w_k` in signed-log form (`k >= 2`).
///
/// Uses the direct gamma form below the resonance index and the
/// reflected form above it, so no gamma pole is ever touched.
pub fn wbar(ctx: &UnfoldingContext, k: usize) -> Result<SignedLogValue> {
    if k < 2 {
        return Err(Error::Domain(format!("wbar: k = {k} must be >= 2")));
    }
    let kf = k as f64;
    if kf + ctx.a_eps <= 0.0 {
        return Err(Error::Domain(format!(
            "wbar: k + a = {} must be positive",
            kf + ctx.a_eps
        )));
    }
    let denom = ctx.log_eps_gamma_inv_eps();
    if k <= ctx.n {
        let log = log_gamma(ctx.inv_eps - kf)? + log_gamma(kf + ctx.a_eps)? - denom;
        Ok(SignedLogValue::new(log, 1))
    } else {
        let log = log_gamma(ctx.alpha)? + log_gamma(1.0 - ctx.alpha)?
            + log_gamma(kf + ctx.a_eps)?
            - log_gamma(kf + 1.0 - ctx.inv_eps)?
            - denom;
        let sign = if (k - ctx.n) % 2 == 0 { 1 } else { -1 };
        Ok(SignedLogValue::new(log, sign))
    }
}

/// Output of [`weak_manifold_coeffs`].
#[derive(Debug, Clone)]
pub struct WeakManifoldExpansion {
    ctx: UnfoldingContext,
    /// `m_k` for `k = 2..=k_max` (rescaled variables).
    m: Vec<f64>,
    /// `S_k` for `k = 2..=k_max`.
    s: Vec<f64>,
    /// `G_k` for `k = 2..=k_max`.
    g: Vec<f64>,
    k_max: usize,
    /// Set when `k_max` crosses the resonance index, where the
    /// `1/(1 - eps k)` divisor is small and coefficients grow like
    /// `1/alpha` (or `1/(1-alpha)`).
    small_divisor_warning: bool,
}

impl WeakManifoldExpansion {
    pub fn ctx(&self) -> &UnfoldingContext {
        &self.ctx
    }

    pub fn k_max(&self) -> usize {
        self.k_max
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

    pub fn small_divisor_warning(&self) -> bool {
        self.small_divisor_warning
    }

    /// Graph value `sum m_k x^k` (rescaled variables), plus the size of
    /// the last retained term as a crude tail indicator.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let mut acc = 0.0;
        for k in (2..=self.k_max).rev() {
            acc = acc * x + self.m(k);
        }
        acc *= x * x;
        (acc, (self.m(self.k_max) * x.powi(self.k_max as i32)).abs())
    }

    /// CSV rows `k,m,S,w_log_abs,w_sign,G`.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::from("k,m,S,w_log_abs,w_sign,G\n");
        for k in 2..=self.k_max {
            let w = wbar(&self.ctx, k)?;
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                k,
                crate::center::fmt17(self.m(k)),
                crate::center::fmt17(self.s(k)),
                crate::center::fmt17(w.log_abs()),
                w.sign(),
                crate::center::fmt17(self.g_coeff(k))
            ));
        }
        Ok(out)
    }
}

/// Run the rescaled weak-manifold recursion through order `k_max`.
pub fn weak_manifold_coeffs(
    spec: &NonlinearitySpec,
    ctx: &UnfoldingContext,
    k_max: usize,
) -> Result<WeakManifoldExpansion> {
    if k_max < 2 {
        return Err(Error::Domain(
            "weak_manifold_coeffs: k_max must be >= 2".into(),
        ));
    }
    let eps = ctx.eps;
    let a = ctx.a_eps;
    let mut table = PowerTable::new();
    let mut m = Vec::with_capacity(k_max - 1);
    let mut s_vals = Vec::with_capacity(k_max - 1);
    let mut g_vals = Vec::with_capacity(k_max - 1);
    let mut s = 0.0f64;
    let mut comp = 0.0f64;
    let mut prev_m = 0.0f64; // m_1 = 0
    for k in 2..=k_max {
        let gk = scaled_term(spec, eps, &mut table, k)?;
        let kf = k as f64;
        let mk = (eps * gk - eps * (kf - 1.0 + a) * prev_m) / (1.0 - eps * kf);
        // Normalised running sum (Kahan-compensated).
        let w = wbar(ctx, k)?;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * eps * gk / (w.value() * (1.0 - eps * kf));
        let yk = term - comp;
        let tk = s + yk;
        comp = (tk - s) - yk;
        s = tk;
        table.push(mk);
        m.push(mk);
        s_vals.push(s);
        g_vals.push(gk);
        prev_m = mk;
    }
    Ok(WeakManifoldExpansion {
        ctx: *ctx,
        m,
        s: s_vals,
        g: g_vals,
        k_max,
        small_divisor_warning: k_max >= ctx.n,
    })
}

/// `S_N`: the normalised sum taken exactly to the resonance index.  As
/// the resonance sharpens this converges to the critical-parameter limit
/// constant.
pub fn sbar_at_resonance_edge(spec: &NonlinearitySpec, ctx: &UnfoldingContext) -> Result<f64> {
    let exp = weak_manifold_coeffs(spec, ctx, ctx.n)?;
    Ok(exp.s(ctx.n))
}

// ---------------------------------------------------------------------
// Tail-series evaluators.
// ---------------------------------------------------------------------

/// Certified summation of `sum_{k=start}^infty Gamma(k+a)/Gamma(k+1-1/eps) x^k`
/// for `start >= n` and `|x| < 1`, carried in a shifted log scale.
///
/// The term ratio `(k+a)/(k+1-1/eps) |x|` decreases monotonically to
/// `|x|`; once it drops below the certification threshold `q < 1` the
/// remaining tail is dominated by a geometric series and the summation
/// stops when that bound is below the tolerance.
fn gamma_tail_sum(ctx: &UnfoldingContext, start: usize, x: f64, rel_tol: f64) -> Result<f64> {
    debug_assert!(start >= ctx.n);
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.abs() >= 1.0 {
        return Err(Error::Domain(format!(
            "tail series diverges for |x| >= 1, got x = {x}"
        )));
    }
    let q = if x.abs() < 0.875 {
        0.875
    } else {
        0.5 * (1.0 + x.abs())
    };
    let sf = start as f64;
    let log_t0 =
        log_gamma(sf + ctx.a_eps)? - log_gamma(sf + 1.0 - ctx.inv_eps)? + sf * x.abs().ln();
    let sign0 = if x > 0.0 || start % 2 == 0 { 1.0 } else { -1.0 };
    // Work with u_k = t_k / |t_start|.
    let mut u = sign0;
    let mut sum = u;
    let mut k = start;
    // The certification threshold is reached for
    // k + 1 - 1/eps >= (k + a) |x| / q, i.e. after O(1/(1 - |x|/q)) terms.
    const MAX_TERMS: usize = 100_000_000;
    loop {
        let kf = k as f64;
        let ratio = (kf + ctx.a_eps) / (kf + 1.0 - ctx.inv_eps);
        u *= ratio * x;
        sum += u;
        k += 1;
        if k - start > MAX_TERMS {
            return Err(Error::NoConvergence(
                "tail series: term budget exhausted before certification".into(),
            ));
        }
        let r = ratio * x.abs();
        if r <= q {
            let tail_bound = u.abs() * r / (1.0 - r);
            if tail_bound <= rel_tol * sum.abs().max(1e-300) {
                break;
            }
        }
    }
    Ok((log_t0.exp()) * sum)
}

/// Shared prefactor `Gamma(alpha) Gamma(1-alpha) / (eps Gamma(1/eps))` in
/// log form.
fn tracking_prefactor_log(ctx: &UnfoldingContext) -> Result<f64> {
    Ok(log_gamma(ctx.alpha)? + log_gamma(1.0 - ctx.alpha)? - ctx.log_eps_gamma_inv_eps())
}

/// The tracking series
/// `V(x) = pref * sum_{k=N}^infty Gamma(k+a)/Gamma(k+1-1/eps) x^k`,
/// evaluated for `|x| <= 3/4` with certified tail control.
pub fn eval_vbar(ctx: &UnfoldingContext, x: f64, rel_tol: f64) -> Result<f64> {
    if x.abs() > 0.75 {
        return Err(Error::Domain(format!(
            "eval_vbar: |x| = {} outside the certified domain [0, 3/4]",
            x.abs()
        )));
    }
    let pref = tracking_prefactor_log(ctx)?;
    let tail = gamma_tail_sum(ctx, ctx.n, x, rel_tol)?;
    Ok(pref.exp() * tail)
}

/// The part of the tracking series starting one order above the
/// resonance index: `U = V - w_N x^N`.
pub fn eval_ubar(ctx: &UnfoldingContext, x: f64, rel_tol: f64) -> Result<f64> {
    if x.abs() > 0.75 {
        return Err(Error::Domain(format!(
            "eval_ubar: |x| = {} outside the certified domain [0, 3/4]",
            x.abs()
        )));
    }
    let pref = tracking_prefactor_log(ctx)?;
    let tail = gamma_tail_sum(ctx, ctx.n + 1, x, rel_tol)?;
    Ok(pref.exp() * tail)
}

/// Series form of the resolvent-type operator applied to the monomial
/// `x^{N+1}`:
/// `T(x) = Gamma(1-alpha)/Gamma(N+1+a) * sum_{k=N+1}^infty Gamma(k+a)/Gamma(k+1-1/eps) x^k`.
pub fn t_monomial_series(ctx: &UnfoldingContext, x: f64, rel_tol: f64) -> Result<f64> {
    if x.abs() >= 1.0 {
        return Err(Error::Domain(format!(
            "t_monomial_series: |x| = {} must be < 1",
            x.abs()
        )));
    }
    let pref = log_gamma(1.0 - ctx.alpha)? - log_gamma(ctx.n as f64 + 1.0 + ctx.a_eps)?;
    let tail = gamma_tail_sum(ctx, ctx.n + 1, x, rel_tol)?;
    Ok(pref.exp() * tail)
}

/// Quadrature form of the same operator value:
///
/// ```text
/// T(x) = x^{N+1} (1-x)^{-(1/eps + a)}
///        * int_0^1 (1 - x t)^{1/eps + a - 1} t^{-alpha} dt,
/// ```
///
/// after substituting `v = x t` in the defining integral.  The endpoint
/// singularity `t^{-alpha}` is removed exactly by `t = s^{1/(1-alpha)}`.
pub fn t_monomial_quadrature(ctx: &UnfoldingContext, x: f64, rel_tol: f64) -> Result<f64> {
    if x >= 1.0 || x <= -1.0 {
        return Err(Error::Domain(format!(
            "t_monomial_quadrature: x = {x} must be in (-1, 1)"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let p = ctx.inv_eps + ctx.a_eps - 1.0;
    let om_alpha = 1.0 - ctx.alpha;
    // int_0^1 (1 - x s^{1/(1-alpha)})^p ds / (1-alpha)
    let integral = quad::integrate(
        |s| {
            if s <= 0.0 {
                1.0
            } else {
                (1.0 - x * s.powf(1.0 / om_alpha)).powf(p)
            }
        },
        0.0,
        1.0,
        rel_tol,
        1e-300,
    )? / om_alpha;
    let log_pref = (ctx.n as f64 + 1.0) * x.abs().ln() - (p + 1.0) * (1.0 - x).ln();
    let sign = if x > 0.0 || (ctx.n + 1) % 2 == 0 {
        1.0
    } else {
        -1.0
    };
    Ok(sign * log_pref.exp() * integral)
}

/// Closed-to-leading-order asymptotic form of the tracking series at
/// `x = eps * x2`:
///
/// ```text
/// V ~ Gamma(alpha) N^{a + 1 - alpha} (eps x2)^N
///     * (1 + x2/(1-alpha) * [1 + x2 int_0^1 e^{(1-v) x2} v^{1-alpha} dv]).
/// ```
pub fn eval_vbar_asymptotic(ctx: &UnfoldingContext, x2: f64, quad_rel_tol: f64) -> Result<f64> {
    let alpha = ctx.alpha;
    let nf = ctx.n as f64;
    let inner = quad::integrate(
        |v| ((1.0 - v) * x2).exp() * v.powf(1.0 - alpha),
        0.0,
        1.0,
        quad_rel_tol,
        1e-300,
    )?;
    let bracket = 1.0 + x2 / (1.0 - alpha) * (1.0 + x2 * inner);
    let lead = log_gamma(alpha)?.exp() * nf.powf(ctx.a_eps + 1.0 - alpha);
    Ok(lead * (ctx.eps * x2).powi(ctx.n as i32) * bracket)
}

/// Log-convexity diagnostic of the weights below the resonance index.
///
/// Returns `(q, p, max_violation)` for the line `q (k-2) + p` through
/// `log w_2` and `log w_{N-1}`; log-convexity of the weights makes the
/// chord an upper bound, so the violation should be zero up to rounding.
pub fn weight_majorant_diag(ctx: &UnfoldingContext) -> Result<(f64, f64, f64)> {
    if ctx.n < 5 {
        return Err(Error::Domain(format!(
            "weight_majorant_diag: resonance index {} too small (need >= 5)",
            ctx.n
        )));
    }
    let logw = |k: usize| -> Result<f64> { Ok(wbar(ctx, k)?.log_abs()) };
    let p = logw(2)?;
    let q = (logw(ctx.n - 1)? - p) / (ctx.n as f64 - 3.0);
    let mut max_violation = f64::NEG_INFINITY;
    for k in 2..=(ctx.n - 1) {
        let v = logw(k)? - (q * (k as f64 - 2.0) + p);
        max_violation = max_violation.max(v);
    }
    Ok((q, p, max_violation))
}
