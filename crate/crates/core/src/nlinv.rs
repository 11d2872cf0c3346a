//! Approximate inverse models for polynomial-nonlinear systems.
//!
//! The input series is found by matching Taylor coefficients of the residual
//! at `t₀`: coefficient `i` of the (re-centered) residual series is an
//! equation, solved for the lowest-index input coefficient that enters it.
//! Damped Newton on the stacked equations is the fallback.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};
use crate::model::{Frame, InitialCondition, ObserverForm};
use crate::param::{eliminate_states, residual_scale, working_order};
use crate::series::{Basis, TruncatedSeries};

#[derive(Clone, Debug, PartialEq)]
pub struct NonlinearSolveConfig {
    pub n_in: usize,
    pub max_newton_iter: usize,
    /// Residual tolerance relative to the majorant of each coefficient.
    pub newton_tol: f64,
    /// Smallest admissible multiplier of an unknown, relative to the majorant.
    pub pivot_tol: f64,
    /// Truncation index; defaults to `max(N, N′) + n`.
    pub trunc: Option<usize>,
}

impl NonlinearSolveConfig {
    pub fn new(n_in: usize) -> Self {
        NonlinearSolveConfig {
            n_in,
            max_newton_iter: 50,
            newton_tol: 1e-12,
            pivot_tol: 1e-10,
            trunc: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_in < 1 {
            return Err(Error::Dimension("input order must be at least 1".into()));
        }
        if !(self.newton_tol > 0.0 && self.pivot_tol > 0.0) {
            return Err(Error::Dimension("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    Sequential,
    Newton { iterations: usize },
}

#[derive(Clone, Debug)]
pub struct NonlinearInverse {
    /// Output coefficients in powers of `t`.
    pub alpha: Vec<f64>,
    /// Input coefficients in powers of `t`.
    pub beta: Vec<f64>,
    pub t0: f64,
    /// Number of leading residual Taylor coefficients that were matched.
    pub matched: usize,
    /// `degrees[i][k]`: degree of `βₖ` in residual Taylor equation `i`.
    pub degrees: Vec<Vec<u32>>,
    /// Residual Taylor coefficients at `t₀`, up to the highest exact index.
    pub residual: Vec<f64>,
    /// Majorant of each residual coefficient.
    pub scale: Vec<f64>,
    /// Euclidean norm of the unmatched residual coefficients.
    pub tail_norm: f64,
    pub method: SolveMethod,
}

impl NonlinearInverse {
    pub fn output(&self) -> TruncatedSeries {
        TruncatedSeries::new(Basis::Power, self.alpha.clone()).expect("finite coefficients")
    }

    pub fn input(&self) -> TruncatedSeries {
        TruncatedSeries::new(Basis::Power, self.beta.clone()).expect("finite coefficients")
    }

    /// Largest `|rᵢ| / scaleᵢ` over the matched coefficients.
    pub fn matched_error(&self) -> f64 {
        (0..self.matched)
            .map(|i| self.residual[i].abs() / self.scale[i].max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

/// Power series centered at `t₀ = 0`.
fn series(c: &[f64]) -> Result<TruncatedSeries> {
    TruncatedSeries::new(Basis::Power, c.to_vec())
}

fn states_at_zero(sys: &ObserverForm, alpha: &[f64], beta: &[f64], trunc: usize) -> Result<Vec<f64>> {
    Ok(eliminate_states(sys, &series(alpha)?, &series(beta)?, trunc)?.states_at(0.0))
}

fn residual_coeffs(sys: &ObserverForm, alpha: &[f64], beta: &[f64], trunc: usize) -> Result<Vec<f64>> {
    let r = eliminate_states(sys, &series(alpha)?, &series(beta)?, trunc)?.residual;
    if r.coeffs().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "residual coefficient".into(),
            at: 0.0,
        });
    }
    Ok(r.into_coeffs())
}

fn default_trunc(sys: &ObserverForm, n_out: usize, cfg: &NonlinearSolveConfig) -> usize {
    cfg.trunc.unwrap_or_else(|| working_order(sys, n_out, cfg.n_in))
}

/// Which coefficient the initial value of each state fixes: `α` for states
/// reached before the input first enters, `β` after.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum IcTarget {
    Alpha(usize),
    Beta(usize),
}

fn ic_targets(sys: &ObserverForm) -> Vec<IcTarget> {
    let first = sys.g().iter().position(|g| !g.is_zero()).unwrap_or(sys.n());
    (0..sys.n())
        .map(|i| if i <= first { IcTarget::Alpha(i) } else { IcTarget::Beta(i - 1 - first) })
        .collect()
}

/// Enforces the initial values at `t₀ = 0` (coefficients centered at `t₀`).
///
/// Returns the adjusted `α` and the `β` fixed along the way.
pub fn fix_initial_conditions(
    sys: &ObserverForm,
    alpha: &[f64],
    ic: &InitialCondition,
    n_in: usize,
    pivot_tol: f64,
) -> Result<(Vec<f64>, BTreeMap<usize, f64>)> {
    if ic.frame != Frame::Observer {
        return Err(Error::Unsupported(
            "nonlinear inversion takes initial values in observer coordinates".into(),
        ));
    }
    if ic.t0 != 0.0 {
        return Err(Error::Unsupported(
            "initial conditions must be re-centered to t0 = 0 first".into(),
        ));
    }
    if ic.x0.len() != sys.n() {
        return Err(Error::Dimension(format!(
            "expected {} initial values, got {}",
            sys.n(),
            ic.x0.len()
        )));
    }
    let n = sys.n();
    let mut alpha = alpha.to_vec();
    let mut beta = vec![0.0; n_in + 1];
    let mut fixed = BTreeMap::new();
    let trunc = alpha.len().max(beta.len()) + n;
    for (i, target) in ic_targets(sys).into_iter().enumerate() {
        let slot = match target {
            IcTarget::Alpha(k) if k < alpha.len() => (true, k),
            IcTarget::Beta(k) if k < beta.len() => (false, k),
            _ => {
                return Err(Error::Dimension(format!(
                    "series too short to meet the initial value of x{}",
                    i + 1
                )))
            }
        };
        let sigma = 1.0 + alpha.iter().chain(&beta).fold(0.0f64, |m, v| m.max(v.abs()));
        let mut eval = |s: f64| -> Result<f64> {
            let (a, b) = (&mut alpha, &mut beta);
            if slot.0 {
                a[slot.1] = s;
            } else {
                b[slot.1] = s;
            }
            Ok(states_at_zero(sys, a, b, trunc)?[i] - ic.x0[i])
        };
        let label = if slot.0 { format!("a{}", slot.1) } else { format!("b{}", slot.1) };
        let v0 = eval(0.0)?;
        let v1 = eval(sigma)?;
        let v2 = eval(2.0 * sigma)?;
        let size = v0.abs().max(v1.abs()).max(v2.abs()).max(ic.x0[i].abs()).max(1.0);
        if (v1 - v0).abs() <= pivot_tol * size && (v2 - v0).abs() <= pivot_tol * size {
            return Err(Error::SingularIc(format!(
                "x{}(0) does not depend on {label} (multiplier {:e})",
                i + 1,
                (v1 - v0) / sigma
            )));
        }
        let s = if (v2 - 2.0 * v1 + v0).abs() <= 1e-12 * size {
            -v0 * sigma / (v1 - v0)
        } else {
            scalar_root(&mut eval, 50, 1e-14 * size)?
        };
        eval(s)?;
        if !slot.0 {
            fixed.insert(slot.1, s);
        }
    }
    Ok((alpha, fixed))
}

/// Root of a scalar function by Newton steps safeguarded with bisection on
/// a bracket grown outward from 0; the root nearest 0 is preferred.
fn scalar_root<F>(f: &mut F, max_iter: usize, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let f0 = f(0.0)?;
    if f0 == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi, mut flo) = (f64::NAN, f64::NAN, f0);
    let mut prev = 0.0;
    let mut fprev = (f0, f0);
    for k in 0..120 {
        let a = 2f64.powi(k - 20);
        let (fp, fm) = (f(a)?, f(-a)?);
        if fp.signum() != fprev.0.signum() {
            (lo, hi, flo) = (prev, a, fprev.0);
            break;
        }
        if fm.signum() != fprev.1.signum() {
            (lo, hi, flo) = (-prev, -a, fprev.1);
            break;
        }
        prev = a;
        fprev = (fp, fm);
    }
    if lo.is_nan() {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: f0.abs(),
        });
    }
    let mut x = 0.5 * (lo + hi);
    for it in 0..max_iter.max(200) {
        let fx = f(x)?;
        if fx.abs() <= tol {
            return Ok(x);
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
        }
        let h = 1e-7 * (1.0 + x.abs());
        let d = (f(x + h)? - fx) / h;
        let newton = x - fx / d;
        let (a, b) = if lo < hi { (lo, hi) } else { (hi, lo) };
        x = if d != 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo).abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300) && it > 0 {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: f(x)?.abs(),
    })
}

/// Solves leading residual Taylor coefficients one at a time for the input
/// coefficients not in `beta_fixed`. Coefficients are centered at `t₀ = 0`.
pub fn sequential_eliminate(
    sys: &ObserverForm,
    alpha: &[f64],
    beta_fixed: &BTreeMap<usize, f64>,
    cfg: &NonlinearSolveConfig,
) -> Result<NonlinearInverse> {
    cfg.validate()?;
    let trunc = default_trunc(sys, alpha.len() - 1, cfg);
    let nb = cfg.n_in + 1;
    let mut beta = vec![0.0; nb];
    for (&k, &v) in beta_fixed {
        if k >= nb {
            return Err(Error::Dimension(format!("fixed input coefficient {k} beyond order {}", cfg.n_in)));
        }
        beta[k] = v;
    }
    let mut unsolved: Vec<usize> = (0..nb).filter(|k| !beta_fixed.contains_key(k)).collect();
    let n_unknown = unsolved.len();
    let max_eq = trunc.saturating_sub(sys.n());
    let mut stalled = None;
    let mut eq = 0;
    while !unsolved.is_empty() && eq <= max_eq {
        let eval = |k: usize, s: f64, beta: &mut Vec<f64>| -> Result<f64> {
            let old = beta[k];
            beta[k] = s;
            let r = residual_coeffs(sys, alpha, beta, trunc)?[eq];
            beta[k] = old;
            Ok(r)
        };
        let scale = residual_scale(sys, &series(alpha)?, &series(&beta)?, trunc)?.coeff(eq);
        // probe at the magnitude of what is already known, so the effect of
        // an unknown is not lost against large earlier coefficients
        let sigma = 1.0 + beta.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        let mut chosen = None;
        for &k in &unsolved {
            let r0 = eval(k, 0.0, &mut beta)?;
            let r1 = eval(k, sigma, &mut beta)?;
            let rm = eval(k, -sigma, &mut beta)?;
            let size = r0.abs().max(r1.abs()).max(rm.abs()).max(scale);
            if (r1 - r0).abs() > cfg.pivot_tol * size || (rm - r0).abs() > cfg.pivot_tol * size {
                chosen = Some((k, r0, r1, rm, size));
                break;
            }
        }
        let Some((k, r0, r1, rm, size)) = chosen else {
            eq += 1;
            continue;
        };
        let curvature = r1 - 2.0 * r0 + rm;
        let mult = (r1 - r0) / sigma;
        let value = if curvature.abs() <= 1e-12 * size {
            if (mult * sigma).abs() <= cfg.pivot_tol * size {
                stalled = Some(Error::SequentialStall {
                    equation: eq,
                    reason: format!("multiplier of b{k} vanishes"),
                });
                break;
            }
            // secant corrections at the scale of the root
            let mut x = -r0 / mult;
            for _ in 0..3 {
                let rx = eval(k, x, &mut beta)?;
                if rx == 0.0 || x == 0.0 {
                    break;
                }
                let slope = (rx - r0) / x;
                if slope == 0.0 {
                    break;
                }
                x -= rx / slope;
            }
            x
        } else {
            let mut f = |s: f64| {
                let mut b = beta.clone();
                eval(k, s, &mut b)
            };
            match scalar_root(&mut f, cfg.max_newton_iter, cfg.newton_tol * size) {
                Ok(v) => v,
                Err(e) => {
                    stalled = Some(e);
                    break;
                }
            }
        };
        beta[k] = value;
        unsolved.retain(|&j| j != k);
        eq += 1;
    }
    if stalled.is_none() && unsolved.is_empty() {
        let out = finish(sys, alpha, &beta, n_unknown, trunc, SolveMethod::Sequential, cfg)?;
        if out.matched_error() <= cfg.newton_tol {
            return Ok(out);
        }
    }
    // fall back to the stacked system, seeded with what was found
    newton_refine(sys, alpha, &beta, beta_fixed, cfg).map_err(|e| stalled.unwrap_or(e))
}

/// Damped Newton on residual Taylor coefficients `0..R−1` over the
/// `R` input coefficients not in `beta_fixed`.
pub fn newton_refine(
    sys: &ObserverForm,
    alpha: &[f64],
    beta_init: &[f64],
    beta_fixed: &BTreeMap<usize, f64>,
    cfg: &NonlinearSolveConfig,
) -> Result<NonlinearInverse> {
    cfg.validate()?;
    let nb = cfg.n_in + 1;
    if beta_init.len() != nb {
        return Err(Error::Dimension(format!(
            "initial input coefficients: expected {nb}, got {}",
            beta_init.len()
        )));
    }
    let trunc = default_trunc(sys, alpha.len() - 1, cfg);
    let mut beta = beta_init.to_vec();
    for (&k, &v) in beta_fixed {
        beta[k] = v;
    }
    let unknowns: Vec<usize> = (0..nb).filter(|k| !beta_fixed.contains_key(k)).collect();
    let r = unknowns.len();
    if r > trunc.saturating_sub(sys.n()) + 1 {
        return Err(Error::Dimension(format!(
            "{r} unknowns but only {} exact residual coefficients",
            trunc.saturating_sub(sys.n()) + 1
        )));
    }
    let eqs = |beta: &[f64]| -> Result<Vec<f64>> {
        Ok(residual_coeffs(sys, alpha, beta, trunc)?[..r].to_vec())
    };
    let scaled_norm = |res: &[f64], scale: &[f64]| -> f64 {
        res.iter()
            .zip(scale)
            .map(|(v, s)| v.abs() / s.max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    };
    let mut res = eqs(&beta)?;
    for iter in 0..=cfg.max_newton_iter {
        let scale = residual_scale(sys, &series(alpha)?, &series(&beta)?, trunc)?.into_coeffs();
        let err = scaled_norm(&res, &scale);
        if err <= cfg.newton_tol {
            return finish(sys, alpha, &beta, r, trunc, SolveMethod::Newton { iterations: iter }, cfg);
        }
        if iter == cfg.max_newton_iter {
            return Err(Error::NoConvergence {
                iterations: iter,
                residual: err,
            });
        }
        let mut jac = Matrix::zeros(r, r);
        for (j, &k) in unknowns.iter().enumerate() {
            let h = 1e-7 * (1.0 + beta[k].abs());
            let mut b = beta.clone();
            b[k] += h;
            let rp = eqs(&b)?;
            for i in 0..r {
                jac[(i, j)] = (rp[i] - res[i]) / h;
            }
        }
        let neg: Vec<f64> = res.iter().map(|v| -v).collect();
        let step = Lu::equilibrated(&jac)
            .map_err(|_| Error::NoConvergence {
                iterations: iter,
                residual: err,
            })?
            .solve(&neg);
        let norm2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        let mut lambda = 1.0;
        loop {
            let mut b = beta.clone();
            for (j, &k) in unknowns.iter().enumerate() {
                b[k] += lambda * step[j];
            }
            if let Ok(rn) = eqs(&b) {
                if norm2(&rn) < norm2(&res) || lambda < 1e-3 {
                    beta = b;
                    res = rn;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-3 {
                return Err(Error::NoConvergence {
                    iterations: iter,
                    residual: err,
                });
            }
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// Deterministic perturbation of `c` away from special values.
fn generic_point(c: &[f64], salt: usize) -> Vec<f64> {
    const GOLDEN: f64 = 0.618_033_988_749_895;
    c.iter()
        .enumerate()
        .map(|(j, v)| v + 0.1 * (1.0 + v.abs()) * (0.5 + ((j + salt + 1) as f64 * GOLDEN).fract()))
        .collect()
}

/// Degree of `βₖ` in residual coefficient `eq`, read from finite
/// differences along `βₖ` at the solution.
fn degree_in(sys: &ObserverForm, alpha: &[f64], beta: &[f64], trunc: usize, eq: usize, k: usize) -> Result<u32> {
    const MAX: usize = 6;
    // a long step lets the highest power dominate lower-order terms
    let h = 1e3 * (1.0 + beta[k].abs());
    let mut vals = Vec::with_capacity(MAX + 1);
    let mut b = beta.to_vec();
    // rounding follows the size of the terms, not of their (cancelling) sum
    let mut size = f64::MIN_POSITIVE;
    for j in 0..=MAX {
        b[k] = beta[k] + j as f64 * h;
        vals.push(residual_coeffs(sys, alpha, &b, trunc)?[eq]);
        size += residual_scale(sys, &series(alpha)?, &series(&b)?, trunc)?.coeff(eq);
    }
    let mut deg = 0;
    let mut diff = vals;
    for d in 1..=MAX {
        diff = diff.windows(2).map(|w| w[1] - w[0]).collect();
        let bound = 1e-12 * size * 2f64.powi(d as i32);
        if diff.iter().any(|v| v.abs() > bound) {
            deg = d as u32;
        }
    }
    Ok(deg)
}

fn finish(
    sys: &ObserverForm,
    alpha: &[f64],
    beta: &[f64],
    matched: usize,
    trunc: usize,
    method: SolveMethod,
    cfg: &NonlinearSolveConfig,
) -> Result<NonlinearInverse> {
    let exact = trunc.saturating_sub(sys.n());
    let residual = residual_coeffs(sys, alpha, beta, trunc)?[..=exact].to_vec();
    let scale = residual_scale(sys, &series(alpha)?, &series(beta)?, trunc)?.coeffs()[..=exact].to_vec();
    let tail_norm = residual[matched.min(residual.len())..].iter().map(|v| v * v).sum::<f64>().sqrt();
    // degrees are read at a generic point: at the solution itself special
    // values (a rest-to-rest output has α₁ = 0) can cancel terms
    let (ga, gb) = (generic_point(alpha, 0), generic_point(beta, alpha.len()));
    let mut degrees = Vec::with_capacity(matched);
    for eq in 0..matched {
        degrees.push(
            (0..=cfg.n_in)
                .map(|k| degree_in(sys, &ga, &gb, trunc, eq, k))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(NonlinearInverse {
        alpha: alpha.to_vec(),
        beta: beta.to_vec(),
        t0: 0.0,
        matched,
        degrees,
        residual,
        scale,
        tail_norm,
        method,
    })
}

/// Full nonlinear inversion for `y(t) = Σ αᵢ tⁱ` with initial values at
/// `ic.t0`: re-centers at `t₀`, fixes initial conditions, eliminates
/// sequentially, and maps the result back to powers of `t`.
pub fn solve_nonlinear_inverse(
    sys: &ObserverForm,
    alpha: &[f64],
    ic: &InitialCondition,
    cfg: &NonlinearSolveConfig,
) -> Result<NonlinearInverse> {
    cfg.validate()?;
    if alpha.is_empty() {
        return Err(Error::Dimension("empty output series".into()));
    }
    let t0 = ic.t0;
    let centered = series(alpha)?.shifted(t0)?;
    let ic0 = InitialCondition {
        t0: 0.0,
        ..ic.clone()
    };
    let (alpha_c, fixed) = fix_initial_conditions(sys, centered.coeffs(), &ic0, cfg.n_in, cfg.pivot_tol)?;
    let mut inv = sequential_eliminate(sys, &alpha_c, &fixed, cfg)?;
    if t0 != 0.0 {
        inv.alpha = series(&inv.alpha)?.shifted(-t0)?.into_coeffs();
        inv.beta = series(&inv.beta)?.shifted(-t0)?.into_coeffs();
        inv.t0 = t0;
    }
    Ok(inv)
}
