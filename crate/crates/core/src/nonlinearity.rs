//! Description of the analytic nonlinearity entering the normal form
//!
//! ```text
//! x' = (x - eps) x
//! y' = -y (1 + a x) + g(x, y),     g(x, y) = f(x) + mu h(x, y)
//! ```
//!
//! with `f(x) = sum_{k>=2} f_k x^k` and
//! `h(x, y) = sum_{k>=2} h_{k,1} x^k y + sum_{k>=1, l>=2} h_{k,l} x^k y^l`.
//!
//! Structural requirements checked at construction:
//! * `a > -2` (the node's weak eigenvalue ratio stays sub-resonant at
//!   the critical parameter),
//! * the `y`-linear part of `h` vanishes at the critical parameter
//!   (`h_{k,1}` must have no constant-in-eps term),
//! * `mu >= 0`, `rho > 0`, `bound > 0`.
//!
//! Coefficient-size checks against the declared analyticity data
//! (`|f_k| <= bound * rho^{-k}`, `|h_{k,l}| <= rho^{-k-l}`) are advisory:
//! violations are reported as warnings, not errors.

use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{PowerTable, TruncatedSeries};

/// Univariate coefficient provider for `f`.
#[derive(Debug)]
pub enum CoefficientProvider {
    /// Finitely many explicit coefficients, zero elsewhere.
    Explicit(BTreeMap<usize, f64>),
    /// Taylor coefficients of `num(x) / den(x)`, expanded on demand by
    /// long division and memoised.  `den[0]` must be nonzero.
    Rational {
        num: Vec<f64>,
        den: Vec<f64>,
        cache: Mutex<Vec<f64>>,
    },
}

impl Clone for CoefficientProvider {
    fn clone(&self) -> Self {
        match self {
            Self::Explicit(m) => Self::Explicit(m.clone()),
            Self::Rational { num, den, cache } => Self::Rational {
                num: num.clone(),
                den: den.clone(),
                cache: Mutex::new(cache.lock().unwrap().clone()),
            },
        }
    }
}

impl CoefficientProvider {
    pub fn explicit(items: impl IntoIterator<Item = (usize, f64)>) -> Self {
        Self::Explicit(items.into_iter().collect())
    }

    pub fn rational(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if den.first().copied().unwrap_or(0.0) == 0.0 {
            return Err(Error::Parse(
                "rational provider: denominator must have nonzero constant term".into(),
            ));
        }
        Ok(Self::Rational {
            num,
            den,
            cache: Mutex::new(Vec::new()),
        })
    }

    pub fn coeff(&self, k: usize) -> f64 {
        match self {
            Self::Explicit(m) => m.get(&k).copied().unwrap_or(0.0),
            Self::Rational { num, den, cache } => {
                let mut c = cache.lock().unwrap();
                if c.len() <= k {
                    expand_rational_into(num, den, k, &mut c);
                }
                c[k]
            }
        }
    }
}

/// Extend `out` with Taylor coefficients of `num/den` through index `n`.
fn expand_rational_into(num: &[f64], den: &[f64], n: usize, out: &mut Vec<f64>) {
    let d0 = den[0];
    for k in out.len()..=n {
        let mut s = num.get(k).copied().unwrap_or(0.0);
        for j in 1..=k.min(den.len() - 1) {
            s -= den[j] * out[k - j];
        }
        out.push(s / d0);
    }
}

/// Taylor coefficients of `num(x)/den(x)` through order `n`.
pub fn expand_rational(num: &[f64], den: &[f64], n: usize) -> Result<Vec<f64>> {
    if den.first().copied().unwrap_or(0.0) == 0.0 {
        return Err(Error::Parse(
            "expand_rational: denominator must have nonzero constant term".into(),
        ));
    }
    let mut out = Vec::with_capacity(n + 1);
    expand_rational_into(num, den, n, &mut out);
    Ok(out)
}

/// One explicit term of the bivariate part `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HTerm {
    pub k: usize,
    pub l: usize,
    pub v: f64,
}

/// A validated system description.
#[derive(Debug, Clone)]
pub struct NonlinearitySpec {
    a0: f64,
    /// Slope of the affine-in-eps eigenvalue coefficient: `a(eps) = a0 + a1 eps`.
    a1: f64,
    mu: f64,
    rho: f64,
    bound: f64,
    f: CoefficientProvider,
    /// Additive shift of the `k = 2` coefficient of `f` (used by the
    /// locus scans, which vary that coefficient continuously).
    f2_shift: f64,
    h: Vec<HTerm>,
    warnings: Vec<String>,
}

impl NonlinearitySpec {
    pub fn new(
        a0: f64,
        a1: f64,
        mu: f64,
        rho: f64,
        bound: f64,
        f: CoefficientProvider,
        h: Vec<HTerm>,
    ) -> Result<Self> {
        if !(a0 > -2.0) {
            return Err(Error::Hypothesis(format!(
                "a0 = {a0} violates the node hypothesis a0 > -2"
            )));
        }
        if !(mu >= 0.0) {
            return Err(Error::Hypothesis(format!("mu = {mu} must be >= 0")));
        }
        if !(rho > 0.0) {
            return Err(Error::Hypothesis(format!("rho = {rho} must be > 0")));
        }
        if !(bound > 0.0) {
            return Err(Error::Hypothesis(format!("bound = {bound} must be > 0")));
        }
        for t in &h {
            if t.l == 0 {
                return Err(Error::Parse(format!(
                    "h term ({}, {}) has y-degree 0; h starts at y^1",
                    t.k, t.l
                )));
            }
            if t.l == 1 && t.k < 2 {
                return Err(Error::Parse(format!(
                    "h term ({}, 1): the y-linear part starts at x^2",
                    t.k
                )));
            }
            if t.l >= 2 && t.k < 1 {
                return Err(Error::Parse(format!(
                    "h term (0, {}): terms of y-degree >= 2 start at x^1",
                    t.l
                )));
            }
            if t.l == 1 && t.v != 0.0 {
                return Err(Error::Hypothesis(format!(
                    "h term ({}, 1) = {} is nonzero: the y-linear part of h \
                     must vanish at the critical parameter",
                    t.k, t.v
                )));
            }
        }
        let mut warnings = Vec::new();
        // Advisory analyticity-bound checks on the explicitly known part.
        match &f {
            CoefficientProvider::Explicit(m) => {
                for (&k, &v) in m {
                    if v.abs() > bound * rho.powi(-(k as i32)) * (1.0 + 1e-12) {
                        warnings.push(format!(
                            "|f_{k}| = {} exceeds bound * rho^-{k} = {}",
                            v.abs(),
                            bound * rho.powi(-(k as i32))
                        ));
                    }
                }
            }
            CoefficientProvider::Rational { .. } => {}
        }
        for t in &h {
            let cap = rho.powi(-((t.k + t.l) as i32));
            if t.v.abs() > cap * (1.0 + 1e-12) {
                warnings.push(format!(
                    "|h_({},{})| = {} exceeds rho^-(k+l) = {cap}",
                    t.k,
                    t.l,
                    t.v.abs()
                ));
            }
        }
        Ok(Self {
            a0,
            a1,
            mu,
            rho,
            bound,
            f,
            f2_shift: 0.0,
            h,
            warnings,
        })
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    /// Eigenvalue-ratio coefficient at parameter `eps`.
    pub fn a_eps(&self, eps: f64) -> f64 {
        self.a0 + self.a1 * eps
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn f_coeff(&self, k: usize) -> f64 {
        let base = self.f.coeff(k);
        if k == 2 {
            base + self.f2_shift
        } else {
            base
        }
    }

    pub fn h_terms(&self) -> &[HTerm] {
        &self.h
    }

    pub fn h_coeff(&self, k: usize, l: usize) -> f64 {
        self.h
            .iter()
            .filter(|t| t.k == k && t.l == l)
            .map(|t| t.v)
            .sum()
    }

    /// Highest y-degree present in `h` (1 if empty, so loops stay trivial).
    pub fn h_max_l(&self) -> usize {
        self.h.iter().map(|t| t.l).max().unwrap_or(1)
    }

    /// Copy of this system with the `x^2` coefficient of `f` shifted.
    pub fn with_f2_shift(&self, delta: f64) -> Self {
        let mut s = self.clone();
        s.f2_shift += delta;
        s
    }

    pub fn f2_shift(&self) -> f64 {
        self.f2_shift
    }
}

// ---------------------------------------------------------------------
// Composition of the nonlinearity with a candidate manifold series.
// ---------------------------------------------------------------------

/// Coefficients of `g(x, y(x))` at the critical parameter, truncated at
/// order `n` (indices 2..=n).
///
/// The `k`-th output only involves `y_2, ..., y_{k-3}`: the bivariate
/// part contributes through `h_{k-j, l} (y^l)_j` with `l >= 2`,
/// `2l <= j <= k-1`, and `(y^l)_j` reads the base through `j - 2(l-1)`.
pub fn compose_critical(
    spec: &NonlinearitySpec,
    y: &TruncatedSeries,
    n: usize,
) -> Result<TruncatedSeries> {
    if y.first_index() < 2 {
        return Err(Error::Domain(
            "compose: candidate series must start at index >= 2".into(),
        ));
    }
    if n >= 5 && y.order() + 3 < n {
        return Err(Error::Truncation(format!(
            "compose: order {n} needs y through {}, have {}",
            n - 3,
            y.order()
        )));
    }
    let mut table = PowerTable::new();
    for k in 2..=y.order() {
        table.push(y.coeff(k)?);
    }
    let mut out = Vec::with_capacity(n - 1);
    for k in 2..=n {
        out.push(critical_term(spec, &mut table, k)?);
    }
    TruncatedSeries::new(2, out)
}

/// Single coefficient of `g(x, y(x))` at index `k`, reading powers of the
/// partially built series from `table`.
pub(crate) fn critical_term(
    spec: &NonlinearitySpec,
    table: &mut PowerTable,
    k: usize,
) -> Result<f64> {
    let mut s = spec.f_coeff(k);
    if k >= 5 && spec.mu != 0.0 {
        let lmax = ((k - 1) / 2).min(spec.h_max_l());
        let mut acc = 0.0;
        for l in 2..=lmax {
            for j in (2 * l)..=(k - 1) {
                let hv = spec.h_coeff(k - j, l);
                if hv != 0.0 {
                    acc += hv * table.power_coeff(l, j)?;
                }
            }
        }
        s += spec.mu * acc;
    }
    Ok(s)
}

/// Coefficients of the rescaled nonlinearity composed with a candidate
/// series in the rescaled variable, truncated at order `n`.
///
/// In the rescaled variables the `k`-th coefficient is
/// `f_k eps^{k-2}` for `k = 2, 3` and, for `k >= 4`,
/// `f_k eps^{k-2} + mu [ sum_j h_{k-j,1} eps^{k-j-1} y_j
///                      + sum_{l>=2} sum_j h_{k-j,l} eps^{k-j+l-2} (y^l)_j ]`.
pub fn compose_scaled(
    spec: &NonlinearitySpec,
    eps: f64,
    y: &TruncatedSeries,
    n: usize,
) -> Result<TruncatedSeries> {
    if y.first_index() < 2 {
        return Err(Error::Domain(
            "compose: candidate series must start at index >= 2".into(),
        ));
    }
    if n >= 4 && y.order() + 2 < n {
        return Err(Error::Truncation(format!(
            "compose: order {n} needs y through {}, have {}",
            n - 2,
            y.order()
        )));
    }
    let mut table = PowerTable::new();
    for k in 2..=y.order() {
        table.push(y.coeff(k)?);
    }
    let mut out = Vec::with_capacity(n - 1);
    for k in 2..=n {
        out.push(scaled_term(spec, eps, &mut table, k)?);
    }
    TruncatedSeries::new(2, out)
}

/// Single rescaled coefficient at index `k` (see [`compose_scaled`]).
pub(crate) fn scaled_term(
    spec: &NonlinearitySpec,
    eps: f64,
    table: &mut PowerTable,
    k: usize,
) -> Result<f64> {
    let mut s = spec.f_coeff(k) * eps.powi(k as i32 - 2);
    if k >= 4 && spec.mu != 0.0 {
        let mut acc = 0.0;
        // y-linear part of h: vanishes at eps = 0 by hypothesis, and the
        // provider here is eps-independent, so it is identically zero;
        // the loop is kept for clarity of the truncation structure.
        for j in 2..=(k - 2) {
            let hv = spec.h_coeff(k - j, 1);
            if hv != 0.0 {
                acc += hv * eps.powi((k - j - 1) as i32) * table.base_coeff(j);
            }
        }
        let lmax = ((k - 1) / 2).min(spec.h_max_l());
        for l in 2..=lmax {
            for j in (2 * l)..=(k - 1) {
                let hv = spec.h_coeff(k - j, l);
                if hv != 0.0 {
                    acc += hv * eps.powi((k - j + l - 2) as i32) * table.power_coeff(l, j)?;
                }
            }
        }
        s += spec.mu * acc;
    }
    Ok(s)
}

// ---------------------------------------------------------------------
// Serialisation.
// ---------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct SpecFile {
    a0: f64,
    #[serde(default)]
    a1: f64,
    mu: f64,
    rho: f64,
    #[serde(rename = "B")]
    bound: f64,
    f: FProviderFile,
    #[serde(default)]
    h: Vec<HTerm>,
}

#[derive(Debug, Serialize, Deserialize)]
enum FProviderFile {
    #[serde(rename = "explicit")]
    Explicit(Vec<KV>),
    #[serde(rename = "rational")]
    Rational { num: Vec<f64>, den: Vec<f64> },
}

#[derive(Debug, Serialize, Deserialize)]
struct KV {
    k: usize,
    v: f64,
}

/// Parse a system description from its JSON representation.
pub fn load_spec(json: &str) -> Result<NonlinearitySpec> {
    let file: SpecFile =
        serde_json::from_str(json).map_err(|e| Error::Parse(format!("system description: {e}")))?;
    let f = match file.f {
        FProviderFile::Explicit(items) => {
            for kv in &items {
                if kv.k < 2 {
                    return Err(Error::Parse(format!(
                        "f coefficient at k = {} (f starts at x^2)",
                        kv.k
                    )));
                }
            }
            CoefficientProvider::explicit(items.into_iter().map(|kv| (kv.k, kv.v)))
        }
        FProviderFile::Rational { num, den } => {
            let p = CoefficientProvider::rational(num, den)?;
            for k in 0..2 {
                if p.coeff(k) != 0.0 {
                    return Err(Error::Parse(format!(
                        "rational f has nonzero coefficient at x^{k} (f starts at x^2)"
                    )));
                }
            }
            p
        }
    };
    NonlinearitySpec::new(file.a0, file.a1, file.mu, file.rho, file.bound, f, file.h)
}

/// Serialise a system description to JSON (inverse of [`load_spec`] up to
/// formatting; the `f2` shift is folded into the stored coefficients for
/// explicit providers and is an error for rational ones).
pub fn save_spec(spec: &NonlinearitySpec) -> Result<String> {
    let f = match &spec.f {
        CoefficientProvider::Explicit(m) => {
            let mut m = m.clone();
            if spec.f2_shift != 0.0 {
                *m.entry(2).or_insert(0.0) += spec.f2_shift;
            }
            FProviderFile::Explicit(m.into_iter().map(|(k, v)| KV { k, v }).collect())
        }
        CoefficientProvider::Rational { num, den, .. } => {
            if spec.f2_shift != 0.0 {
                return Err(Error::Domain(
                    "save_spec: cannot serialise a shifted rational provider".into(),
                ));
            }
            FProviderFile::Rational {
                num: num.clone(),
                den: den.clone(),
            }
        }
    };
    let file = SpecFile {
        a0: spec.a0,
        a1: spec.a1,
        mu: spec.mu,
        rho: spec.rho,
        bound: spec.bound,
        f,
        h: spec.h.clone(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euler_spec() -> NonlinearitySpec {
        NonlinearitySpec::new(
            0.0,
            0.0,
            0.0,
            1.0,
            1.0,
            CoefficientProvider::explicit([(2, 1.0)]),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn rational_expansion_geometric() {
        // x^3 / (1 - x) = x^3 + x^4 + x^5 + ...
        let c = expand_rational(&[0.0, 0.0, 0.0, 1.0], &[1.0, -1.0], 10).unwrap();
        assert_eq!(&c[..3], &[0.0, 0.0, 0.0]);
        for k in 3..=10 {
            assert_eq!(c[k], 1.0, "k = {k}");
        }
    }

    #[test]
    fn rational_expansion_long_division() {
        // (1 + x) / (1 - x - x^2): c_k = c_{k-1} + c_{k-2} (Lucas-like).
        let c = expand_rational(&[1.0, 1.0], &[1.0, -1.0, -1.0], 8).unwrap();
        assert_eq!(&c[..5], &[1.0, 2.0, 3.0, 5.0, 8.0]);
    }

    #[test]
    fn provider_memoisation_is_consistent() {
        let p = CoefficientProvider::rational(vec![0.0, 0.0, 0.0, 1.0], vec![1.0, -1.0]).unwrap();
        // Query out of order; the cache must refill consistently.
        assert_eq!(p.coeff(7), 1.0);
        assert_eq!(p.coeff(3), 1.0);
        assert_eq!(p.coeff(12), 1.0);
        assert_eq!(p.coeff(0), 0.0);
    }

    #[test]
    fn hypothesis_violations_are_fatal() {
        let r = NonlinearitySpec::new(
            -2.0,
            0.0,
            0.0,
            1.0,
            1.0,
            CoefficientProvider::explicit([]),
            vec![],
        );
        assert!(matches!(r, Err(Error::Hypothesis(_))));

        let r = NonlinearitySpec::new(
            0.0,
            0.0,
            1.0,
            1.0,
            1.0,
            CoefficientProvider::explicit([]),
            vec![HTerm { k: 3, l: 1, v: 0.5 }],
        );
        assert!(matches!(r, Err(Error::Hypothesis(_))));
    }

    #[test]
    fn bound_violations_are_warnings_only() {
        let s = NonlinearitySpec::new(
            0.0,
            0.0,
            1.0,
            0.5,
            1.0,
            CoefficientProvider::explicit([(2, 100.0)]),
            vec![HTerm { k: 1, l: 2, v: 99.0 }],
        )
        .unwrap();
        assert_eq!(s.warnings().len(), 2);
    }

    #[test]
    fn compose_critical_quadratic_example() {
        // g = x^2 + mu x y^2 applied to y = x^2: h-part contributes
        // mu x * x^4 = mu x^5 starting at k = 5.
        let spec = NonlinearitySpec::new(
            0.0,
            0.0,
            2.0,
            1.0,
            1.0,
            CoefficientProvider::explicit([(2, 1.0)]),
            vec![HTerm { k: 1, l: 2, v: 1.0 }],
        )
        .unwrap();
        let y = TruncatedSeries::new(2, vec![1.0, 0.0, 0.0]).unwrap(); // y = x^2, order 4
        let g = compose_critical(&spec, &y, 7).unwrap();
        assert_eq!(g.coeff(2).unwrap(), 1.0);
        assert_eq!(g.coeff(3).unwrap(), 0.0);
        assert_eq!(g.coeff(4).unwrap(), 0.0);
        assert_eq!(g.coeff(5).unwrap(), 2.0); // mu * h_{1,2} * (y^2)_4
        assert_eq!(g.coeff(6).unwrap(), 0.0);
        assert_eq!(g.coeff(7).unwrap(), 0.0);
    }

    #[test]
    fn compose_scaled_eps_powers() {
        // Pure f: the k-th rescaled coefficient is f_k eps^{k-2}.
        let spec = NonlinearitySpec::new(
            0.0,
            0.0,
            0.0,
            1.0,
            2.0,
            CoefficientProvider::explicit([(2, 1.5), (3, -2.0), (5, 0.25)]),
            vec![],
        )
        .unwrap();
        let eps = 0.125;
        let y = TruncatedSeries::zero(2, 6);
        let g = compose_scaled(&spec, eps, &y, 6).unwrap();
        assert_eq!(g.coeff(2).unwrap(), 1.5);
        assert_eq!(g.coeff(3).unwrap(), -2.0 * eps);
        assert_eq!(g.coeff(4).unwrap(), 0.0);
        assert_eq!(g.coeff(5).unwrap(), 0.25 * eps.powi(3));
    }

    #[test]
    fn compose_scaled_h_part_eps_powers() {
        // h = x y^2: the rescaled contribution at index k is
        // mu * eps^{k-j+l-2} (y^l)_j summed over j = k-1, l = 2.
        let spec = NonlinearitySpec::new(
            0.0,
            0.0,
            1.0,
            1.0,
            1.0,
            CoefficientProvider::explicit([]),
            vec![HTerm { k: 1, l: 2, v: 1.0 }],
        )
        .unwrap();
        let eps = 0.25;
        // y = x^2 + x^3: (y^2) = x^4 + 2 x^5 + x^6.
        let y = TruncatedSeries::new(2, vec![1.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let g = compose_scaled(&spec, eps, &y, 7).unwrap();
        // Every contribution here has k - j = 1, l = 2, so the eps power
        // (k - j) + l - 2 is 1 throughout.
        assert_eq!(g.coeff(4).unwrap(), 0.0);
        assert_eq!(g.coeff(5).unwrap(), eps * 1.0);
        assert_eq!(g.coeff(6).unwrap(), eps * 2.0);
        assert_eq!(g.coeff(7).unwrap(), eps * 1.0);
    }

    #[test]
    fn load_save_roundtrip_explicit() {
        let json = r#"{
            "a0": 0.5, "mu": 1.0, "rho": 0.8, "B": 2.0,
            "f": {"explicit": [{"k": 2, "v": 1.0}, {"k": 4, "v": -0.5}]},
            "h": [{"k": 1, "l": 2, "v": 0.75}]
        }"#;
        let spec = load_spec(json).unwrap();
        assert_eq!(spec.a0(), 0.5);
        assert_eq!(spec.f_coeff(2), 1.0);
        assert_eq!(spec.f_coeff(3), 0.0);
        assert_eq!(spec.f_coeff(4), -0.5);
        assert_eq!(spec.h_coeff(1, 2), 0.75);

        let again = load_spec(&save_spec(&spec).unwrap()).unwrap();
        for k in 0..=100 {
            assert_eq!(spec.f_coeff(k), again.f_coeff(k), "f_{k}");
        }
        assert_eq!(spec.h_terms(), again.h_terms());
    }

    #[test]
    fn load_save_roundtrip_rational() {
        let json = r#"{
            "a0": 0.0, "mu": 0.0, "rho": 1.0, "B": 5.0,
            "f": {"rational": {"num": [0.0, 0.0, 0.0, 2.0], "den": [1.0, -1.0]}}
        }"#;
        let spec = load_spec(json).unwrap();
        let again = load_spec(&save_spec(&spec).unwrap()).unwrap();
        for k in 0..=100 {
            assert_eq!(spec.f_coeff(k), again.f_coeff(k), "f_{k}");
        }
    }

    #[test]
    fn load_rejects_bad_leading_coefficients() {
        // f must start at x^2.
        let json = r#"{
            "a0": 0.0, "mu": 0.0, "rho": 1.0, "B": 1.0,
            "f": {"rational": {"num": [0.0, 1.0], "den": [1.0, -1.0]}}
        }"#;
        assert!(matches!(load_spec(json), Err(Error::Parse(_))));
    }

    #[test]
    fn f2_shift_applies_only_to_quadratic_coefficient() {
        let spec = euler_spec().with_f2_shift(0.25);
        assert_eq!(spec.f_coeff(2), 1.25);
        assert_eq!(spec.f_coeff(3), 0.0);
    }
}
