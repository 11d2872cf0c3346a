//! Successive state elimination and the residual series.
//!
//! Given output and input series, the observer form yields every state by
//! differentiation: `x₁ = y`, `xᵢ₊₁ = ẋᵢ − gᵢ(x₁..xᵢ)·u`. The unused last row
//! becomes the residual `ẋₙ − F(x) − gₙ(x)·u`, which vanishes identically
//! exactly when `(y, u)` is a trajectory of the system. The input-output
//! equation is never formed symbolically; the residual stands in for it.

use crate::error::{Error, Result};
use crate::linalg::{AffineMap, Matrix};
use crate::model::ObserverForm;
use crate::series::{self, abs, abs_diff, Basis, TruncatedSeries};

#[derive(Clone, Debug)]
pub struct StateParameterization {
    pub states: Vec<TruncatedSeries>,
    pub residual: TruncatedSeries,
    /// Truncation index shared by every series above.
    pub trunc: usize,
}

impl StateParameterization {
    /// Highest residual index unaffected by truncation. Each power-basis
    /// differentiation consumes one index of head-room.
    pub fn exact_order(&self) -> usize {
        match self.residual.basis() {
            Basis::Power => self.trunc.saturating_sub(self.states.len()),
            Basis::Exponential { .. } => self.trunc,
        }
    }

    /// State values at time `t`.
    pub fn states_at(&self, t: f64) -> Vec<f64> {
        self.states.iter().map(|s| series::eval(s, t)).collect()
    }
}

/// Default truncation `max(N, N′) + n`.
pub fn working_order(sys: &ObserverForm, n_out: usize, n_in: usize) -> usize {
    n_out.max(n_in) + sys.n()
}

pub fn eliminate_states(
    sys: &ObserverForm,
    y: &TruncatedSeries,
    u: &TruncatedSeries,
    trunc: usize,
) -> Result<StateParameterization> {
    y.check_basis(u)?;
    if trunc < y.order().max(u.order()) {
        return Err(Error::Dimension(format!(
            "truncation {trunc} below series orders ({}, {})",
            y.order(),
            u.order()
        )));
    }
    let n = sys.n();
    let u = u.with_order(trunc);
    let mut states = vec![TruncatedSeries::zero(y.basis(), trunc); n];
    states[0] = y.with_order(trunc);
    for i in 0..n - 1 {
        let gu = series::mul(&sys.g()[i].on_series(&states, trunc)?, &u, trunc)?;
        states[i + 1] = series::sub(&series::diff(&states[i]), &gu)?;
    }
    let gu = series::mul(&sys.g()[n - 1].on_series(&states, trunc)?, &u, trunc)?;
    let f = sys.f().on_series(&states, trunc)?;
    let residual = series::linear_comb(&[
        (1.0, &series::diff(&states[n - 1])),
        (-1.0, &f),
        (-1.0, &gu),
    ])?;
    Ok(StateParameterization {
        states,
        residual,
        trunc,
    })
}

/// Coefficient-wise upper bound on the magnitude of every term that enters
/// the residual, computed with absolute values throughout. Used to scale
/// residual tolerances.
pub fn residual_scale(
    sys: &ObserverForm,
    y: &TruncatedSeries,
    u: &TruncatedSeries,
    trunc: usize,
) -> Result<TruncatedSeries> {
    let n = sys.n();
    let u = abs(&u.with_order(trunc));
    let mut states = vec![TruncatedSeries::zero(y.basis(), trunc); n];
    states[0] = abs(&y.with_order(trunc));
    for i in 0..n - 1 {
        let g = sys.g()[i].abs_coeffs().on_series(&states, trunc)?;
        let gu = series::mul(&g, &u, trunc)?;
        states[i + 1] = series::add(&abs_diff(&states[i]), &gu)?;
    }
    let g = sys.g()[n - 1].abs_coeffs().on_series(&states, trunc)?;
    let gu = series::mul(&g, &u, trunc)?;
    let f = sys.f().abs_coeffs().on_series(&states, trunc)?;
    series::linear_comb(&[(1.0, &abs_diff(&states[n - 1])), (1.0, &f), (1.0, &gu)])
}

/// `residual = M_α·α + M_β·β + c` for a linear system.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineResidualMap {
    pub m_alpha: Matrix,
    pub m_beta: Matrix,
    pub c: Vec<f64>,
    pub trunc: usize,
}

impl AffineResidualMap {
    pub fn apply(&self, alpha: &[f64], beta: &[f64]) -> Vec<f64> {
        let a = self.m_alpha.mul_vec(alpha);
        let b = self.m_beta.mul_vec(beta);
        a.iter()
            .zip(&b)
            .zip(&self.c)
            .map(|((a, b), c)| a + b + c)
            .collect()
    }
}

/// Builds the affine residual map by probing [`eliminate_states`] with the
/// zero vector and unit coefficient vectors.
pub fn io_residual_probe(
    sys: &ObserverForm,
    basis: Basis,
    n_out: usize,
    n_in: usize,
) -> Result<AffineResidualMap> {
    if !sys.is_linear() {
        return Err(Error::NotLinear(format!(
            "`{}`: probing the residual needs an affine dependence on (α, β)",
            sys.name
        )));
    }
    let trunc = working_order(sys, n_out, n_in);
    let na = n_out + 1;
    let map = AffineMap::probe(na + n_in + 1, |p| {
        let y = TruncatedSeries::new(basis, p[..na].to_vec())?;
        let u = TruncatedSeries::new(basis, p[na..].to_vec())?;
        Ok(eliminate_states(sys, &y, &u, trunc)?.residual.into_coeffs())
    })?;
    let alpha_cols: Vec<usize> = (0..na).collect();
    let beta_cols: Vec<usize> = (na..na + n_in + 1).collect();
    Ok(AffineResidualMap {
        m_alpha: map.linear.select_columns(&alpha_cols),
        m_beta: map.linear.select_columns(&beta_cols),
        c: map.offset,
        trunc,
    })
}
