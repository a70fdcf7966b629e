//! Truncated power series with explicit truncation-order bookkeeping.
//!
//! A [`TruncatedSeries`] stores the coefficients of `sum_{k=f}^{n} c_k x^k`
//! together with the truncation order `n`.  Every operation tracks the
//! order up to which the result is exact and refuses to fabricate
//! coefficients beyond it.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries {
    first_index: usize,
    /// Coefficients for indices `first_index ..= order`.
    coeffs: Vec<f64>,
    order: usize,
}

impl TruncatedSeries {
    /// Build from the coefficients of `x^first_index, ..., x^order`.
    pub fn new(first_index: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Domain("series: empty coefficient vector".into()));
        }
        let order = first_index + coeffs.len() - 1;
        Ok(Self {
            first_index,
            coeffs,
            order,
        })
    }

    /// The zero series, exact through `order`.
    pub fn zero(first_index: usize, order: usize) -> Self {
        let len = order.saturating_sub(first_index) + 1;
        Self {
            first_index,
            coeffs: vec![0.0; len],
            order,
        }
    }

    pub fn first_index(&self) -> usize {
        self.first_index
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Coefficient of `x^k`; zero below `first_index`, an error past the
    /// truncation order (those coefficients are unknown, not zero).
    pub fn coeff(&self, k: usize) -> Result<f64> {
        if k > self.order {
            return Err(Error::Truncation(format!(
                "coefficient {k} requested past truncation order {}",
                self.order
            )));
        }
        if k < self.first_index {
            Ok(0.0)
        } else {
            Ok(self.coeffs[k - self.first_index])
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Horner evaluation of the stored polynomial part at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc * x.powi(self.first_index as i32)
    }
}

/// Cauchy product of `a` and `b`, truncated at order `n`.
///
/// The product coefficient at index `k` is exact iff every split
/// `k = i + j` with `i >= a.first`, `j >= b.first` is available, i.e.
/// for `k <= min(a.order + b.first, b.order + a.first)`.
pub fn cauchy_product(
    a: &TruncatedSeries,
    b: &TruncatedSeries,
    n: usize,
) -> Result<TruncatedSeries> {
    let achievable = (a.order + b.first_index).min(b.order + a.first_index);
    if n > achievable {
        return Err(Error::Truncation(format!(
            "cauchy_product: order {n} requested, inputs only support {achievable}"
        )));
    }
    let first = a.first_index + b.first_index;
    let mut out = vec![0.0; n.saturating_sub(first) + 1];
    for (ia, &ca) in a.coeffs.iter().enumerate() {
        if ca == 0.0 {
            continue;
        }
        let ka = a.first_index + ia;
        if ka + b.first_index > n {
            break;
        }
        for (ib, &cb) in b.coeffs.iter().enumerate() {
            let k = ka + b.first_index + ib;
            if k > n {
                break;
            }
            out[k - first] += ca * cb;
        }
    }
    Ok(TruncatedSeries {
        first_index: first,
        coeffs: out,
        order: n,
    })
}

/// `y^l` truncated at order `n`, for a series with `first_index >= 2`.
///
/// The result starts at index `2l`, and its coefficient at index `k`
/// depends only on `y_2, ..., y_{k - 2(l-1)}`; the input must therefore
/// be exact through `n - 2(l-1)`.
pub fn series_power(y: &TruncatedSeries, l: usize, n: usize) -> Result<TruncatedSeries> {
    if l == 0 {
        return Err(Error::Domain("series_power: l must be >= 1".into()));
    }
    if y.first_index < 2 {
        return Err(Error::Domain(
            "series_power: input must start at index >= 2".into(),
        ));
    }
    if n < 2 * l {
        return Err(Error::Domain(format!(
            "series_power: order {n} below leading index {}",
            2 * l
        )));
    }
    if y.order + 2 * (l - 1) < n {
        return Err(Error::Truncation(format!(
            "series_power: order {n} needs input through {}, have {}",
            n - 2 * (l - 1),
            y.order
        )));
    }
    let mut acc = clip(y, n);
    for _ in 1..l {
        acc = cauchy_product(&acc, &clip(y, n), n.min(acc.order + y.first_index))?;
    }
    // Intermediate truncation can leave the order below n even though all
    // coefficients through n are exact (they are: dropped terms sit at
    // indices > n - 2(l - j) and cannot feed back down).  Pad with the
    // exactness guarantee established above.
    if acc.order < n {
        let mut coeffs = acc.coeffs;
        coeffs.resize(n - acc.first_index + 1, 0.0);
        acc = TruncatedSeries {
            first_index: acc.first_index,
            coeffs,
            order: n,
        };
    }
    Ok(acc)
}

fn clip(y: &TruncatedSeries, n: usize) -> TruncatedSeries {
    if y.order <= n {
        y.clone()
    } else {
        let keep = n - y.first_index + 1;
        TruncatedSeries {
            first_index: y.first_index,
            coeffs: y.coeffs[..keep].to_vec(),
            order: n,
        }
    }
}

/// Incrementally maintained table of powers `y^l` used by the manifold
/// recursions, where `y` itself is produced one coefficient at a time.
///
/// Invariant: after `push(y_k)` followed by `extend_to(j)`, the entry
/// `power(l, i)` for `i <= j` is exact provided `i - 2(l-1) <= k`.
#[derive(Debug)]
pub struct PowerTable {
    /// `y` coefficients, index 0 holds `y_2`.
    base: Vec<f64>,
    /// `powers[l-2][i]` is the coefficient of `x^{i}` in `y^l`, stored
    /// from index `2l`.
    powers: Vec<Vec<f64>>,
}

impl PowerTable {
    pub fn new() -> Self {
        Self {
            base: Vec::new(),
            powers: Vec::new(),
        }
    }

    /// Append the next base coefficient (`y_2` first).
    pub fn push(&mut self, yk: f64) {
        self.base.push(yk);
    }

    pub fn base_coeff(&self, k: usize) -> f64 {
        if k < 2 || k >= 2 + self.base.len() {
            0.0
        } else {
            self.base[k - 2]
        }
    }

    fn highest_base_index(&self) -> usize {
        1 + self.base.len()
    }

    /// Coefficient of `x^j` in `y^l` (`l >= 2`), computing and caching any
    /// missing entries.  Requires the base to be known through
    /// `j - 2(l-1)`.
    pub fn power_coeff(&mut self, l: usize, j: usize) -> Result<f64> {
        debug_assert!(l >= 2);
        if j < 2 * l {
            return Ok(0.0);
        }
        if j.saturating_sub(2 * (l - 1)) > self.highest_base_index() {
            return Err(Error::Truncation(format!(
                "power table: (y^{l})_{j} needs base through {}, have {}",
                j - 2 * (l - 1),
                self.highest_base_index()
            )));
        }
        while self.powers.len() < l - 1 {
            self.powers.push(Vec::new());
        }
        // Fill lower powers first, then this one, up to index j.
        for ll in 2..=l {
            let lead = 2 * ll;
            let have = lead + self.powers[ll - 2].len();
            for idx in have..=j {
                if idx < lead {
                    continue;
                }
                // (y^ll)_idx = sum_i y_i (y^{ll-1})_{idx-i}
                let mut s = 0.0;
                let hi = idx - 2 * (ll - 1);
                for i in 2..=hi {
                    let yi = self.base_coeff(i);
                    if yi == 0.0 {
                        continue;
                    }
                    let rest = if ll == 2 {
                        self.base_coeff(idx - i)
                    } else {
                        let v = &self.powers[ll - 3];
                        let rlead = 2 * (ll - 1);
                        if idx - i < rlead || idx - i - rlead >= v.len() {
                            0.0
                        } else {
                            v[idx - i - rlead]
                        }
                    };
                    s += yi * rest;
                }
                self.powers[ll - 2].push(s);
            }
        }
        let lead = 2 * l;
        Ok(self.powers[l - 2][j - lead])
    }
}

impl Default for PowerTable {
    fn default() -> Self {
        Self::new()
    }
}
