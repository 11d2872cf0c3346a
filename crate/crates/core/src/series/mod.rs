//! Truncated series over a pluggable basis.
//!
//! A [`TruncatedSeries`] stores coefficients `c[i]` of basis functions `ψᵢ(t)`.
//! Two families are supported, both closed under multiplication with the
//! index-additive rule `ψᵢ·ψⱼ = ψᵢ₊ⱼ`:
//!
//! * [`Basis::Power`]: `ψᵢ(t) = tⁱ`, differentiation shifts `i → i−1` with factor `i`.
//! * [`Basis::Exponential`]: `ψᵢ(t) = e^(−i·rate·t)`, differentiation is diagonal
//!   with factor `−i·rate`.
//!
//! Every other piece of calculus in the crate reduces to the operations here.

mod poly;

pub use poly::{state_names, MultiPoly};

use std::fmt;

use crate::error::{Error, Result};

/// Relative tolerance used when comparing coefficient vectors.
pub const COEFF_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Basis {
    Power,
    Exponential { rate: f64 },
}

impl Basis {
    pub fn exponential() -> Self {
        Basis::Exponential { rate: 1.0 }
    }

    /// Value of `ψᵢ(t)`.
    pub fn psi(&self, i: usize, t: f64) -> f64 {
        match *self {
            Basis::Power => t.powi(i as i32),
            Basis::Exponential { rate } => (-(i as f64) * rate * t).exp(),
        }
    }

    /// Value of the `d`-th derivative of `ψᵢ` at `t`.
    pub fn psi_derivative(&self, i: usize, d: usize, t: f64) -> f64 {
        match *self {
            Basis::Power => {
                if d > i {
                    return 0.0;
                }
                let falling: f64 = ((i - d + 1)..=i).map(|k| k as f64).product();
                falling * t.powi((i - d) as i32)
            }
            Basis::Exponential { rate } => {
                let lam = -(i as f64) * rate;
                lam.powi(d as i32) * (lam * t).exp()
            }
        }
    }

    fn same_family(&self, other: &Basis) -> bool {
        match (self, other) {
            (Basis::Power, Basis::Power) => true,
            (Basis::Exponential { rate: a }, Basis::Exponential { rate: b }) => a == b,
            _ => false,
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Power => write!(f, "power"),
            Basis::Exponential { rate } => write!(f, "exponential(rate={rate})"),
        }
    }
}

/// Coefficient vector over a [`Basis`]; index `i` holds the coefficient of `ψᵢ`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSeries {
    basis: Basis,
    coeffs: Vec<f64>,
}

impl TruncatedSeries {
    pub fn new(basis: Basis, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Dimension("series needs at least one coefficient".into()));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("series coefficient {i}"),
                at: f64::NAN,
            });
        }
        Ok(TruncatedSeries { basis, coeffs })
    }

    pub fn zero(basis: Basis, order: usize) -> Self {
        TruncatedSeries {
            basis,
            coeffs: vec![0.0; order + 1],
        }
    }

    pub fn constant(basis: Basis, value: f64, order: usize) -> Self {
        let mut s = Self::zero(basis, order);
        s.coeffs[0] = value;
        s
    }

    /// Unit coefficient at index `i`, zero elsewhere.
    pub fn unit(basis: Basis, i: usize, order: usize) -> Self {
        let mut s = Self::zero(basis, order.max(i));
        s.coeffs[i] = 1.0;
        s
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Zero-pads or truncates to the given order.
    pub fn with_order(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(order + 1, 0.0);
        TruncatedSeries {
            basis: self.basis,
            coeffs,
        }
    }

    pub fn check_basis(&self, other: &TruncatedSeries) -> Result<()> {
        if self.basis.same_family(&other.basis) {
            Ok(())
        } else {
            Err(Error::BasisMismatch(
                self.basis.to_string(),
                other.basis.to_string(),
            ))
        }
    }

    /// Coefficient-wise comparison with tolerance `COEFF_TOL` scaled by the
    /// largest coefficient of either operand.
    pub fn approx_eq(&self, other: &TruncatedSeries) -> bool {
        self.approx_eq_tol(other, COEFF_TOL)
    }

    pub fn approx_eq_tol(&self, other: &TruncatedSeries, rel: f64) -> bool {
        if !self.basis.same_family(&other.basis) {
            return false;
        }
        let scale = self.max_abs().max(other.max_abs()).max(1.0);
        let n = self.coeffs.len().max(other.coeffs.len());
        (0..n).all(|i| (self.coeff(i) - other.coeff(i)).abs() <= rel * scale)
    }

    /// Re-expands a power series about `t0`: returns `q` with `q(s) = p(s + t0)`.
    pub fn shifted(&self, t0: f64) -> Result<Self> {
        if self.basis != Basis::Power {
            return Err(Error::Unsupported(
                "re-centering is only defined for the power basis".into(),
            ));
        }
        let mut c = self.coeffs.clone();
        let n = c.len();
        // repeated synthetic division by (t - t0)
        for k in 0..n {
            for j in (k..n - 1).rev() {
                c[j] += t0 * c[j + 1];
            }
        }
        TruncatedSeries::new(Basis::Power, c)
    }
}

impl fmt::Display for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let psi = |i: usize| match self.basis {
            Basis::Power => format!("t^{i}"),
            Basis::Exponential { .. } => format!("e^(-{i}t)"),
        };
        write!(f, "{}", self.coeffs[0])?;
        for (i, c) in self.coeffs.iter().enumerate().skip(1) {
            write!(f, " + {}·{}", c, psi(i))?;
        }
        Ok(())
    }
}

/// Weighted sum `Σ wₖ·sₖ`; shorter inputs are zero-padded to the longest.
pub fn linear_comb(terms: &[(f64, &TruncatedSeries)]) -> Result<TruncatedSeries> {
    let first = terms
        .first()
        .ok_or_else(|| Error::Dimension("empty linear combination".into()))?
        .1;
    let order = terms.iter().map(|(_, s)| s.order()).max().unwrap_or(0);
    let mut out = vec![0.0; order + 1];
    for (w, s) in terms {
        first.check_basis(s)?;
        for (o, c) in out.iter_mut().zip(&s.coeffs) {
            *o += w * c;
        }
    }
    Ok(TruncatedSeries {
        basis: first.basis,
        coeffs: out,
    })
}

/// `a + b` (convenience over [`linear_comb`]).
pub fn add(a: &TruncatedSeries, b: &TruncatedSeries) -> Result<TruncatedSeries> {
    linear_comb(&[(1.0, a), (1.0, b)])
}

/// `a − b`.
pub fn sub(a: &TruncatedSeries, b: &TruncatedSeries) -> Result<TruncatedSeries> {
    linear_comb(&[(1.0, a), (-1.0, b)])
}

/// Applies the basis differentiation operator. The order is preserved; for
/// the power basis the top coefficient becomes zero.
pub fn diff(s: &TruncatedSeries) -> TruncatedSeries {
    let n = s.coeffs.len();
    let coeffs = match s.basis {
        Basis::Power => (0..n)
            .map(|i| {
                if i + 1 < n {
                    (i + 1) as f64 * s.coeffs[i + 1]
                } else {
                    0.0
                }
            })
            .collect(),
        Basis::Exponential { rate } => s
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| -(i as f64) * rate * c)
            .collect(),
    };
    TruncatedSeries {
        basis: s.basis,
        coeffs,
    }
}

/// Repeated differentiation.
pub fn diff_n(s: &TruncatedSeries, times: usize) -> TruncatedSeries {
    (0..times).fold(s.clone(), |acc, _| diff(&acc))
}

/// Cauchy product on indices, keeping indices `0..=trunc`.
pub fn mul(a: &TruncatedSeries, b: &TruncatedSeries, trunc: usize) -> Result<TruncatedSeries> {
    a.check_basis(b)?;
    let mut out = vec![0.0; trunc + 1];
    for (i, &ai) in a.coeffs.iter().enumerate().take(trunc + 1) {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.coeffs.iter().enumerate().take(trunc + 1 - i) {
            out[i + j] += ai * bj;
        }
    }
    Ok(TruncatedSeries {
        basis: a.basis,
        coeffs: out,
    })
}

/// `Σ cᵢ·ψᵢ(t)`; Horner form in `t` (power) or in `e^(−rate·t)` (exponential).
pub fn eval(s: &TruncatedSeries, t: f64) -> f64 {
    let z = match s.basis {
        Basis::Power => t,
        Basis::Exponential { rate } => (-rate * t).exp(),
    };
    s.coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c)
}

/// Scalar multiple.
pub fn scale(s: &TruncatedSeries, w: f64) -> TruncatedSeries {
    TruncatedSeries {
        basis: s.basis,
        coeffs: s.coeffs.iter().map(|c| w * c).collect(),
    }
}

/// Coefficient-wise absolute value.
pub(crate) fn abs(s: &TruncatedSeries) -> TruncatedSeries {
    TruncatedSeries {
        basis: s.basis,
        coeffs: s.coeffs.iter().map(|c| c.abs()).collect(),
    }
}

/// Differentiation with absolute factors; majorizes `diff` coefficient-wise.
pub(crate) fn abs_diff(s: &TruncatedSeries) -> TruncatedSeries {
    abs(&diff(&abs(s)))
}
