//! Output coefficients from boundary conditions, and equilibria for
//! setting up initial states.

use crate::error::{Error, Result};
use crate::linalg::{echelon, Lu, Matrix};
use crate::model::ObserverForm;
use crate::series::Basis;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryCondition {
    pub t: f64,
    /// Derivative order.
    pub order: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySpec {
    pub t0: f64,
    pub tf: f64,
    pub conditions: Vec<BoundaryCondition>,
}

impl BoundarySpec {
    /// Value and first derivative prescribed at both ends.
    pub fn rest_to_rest(t0: f64, tf: f64, y0: f64, yf: f64) -> Self {
        let c = |t, order, value| BoundaryCondition { t, order, value };
        BoundarySpec {
            t0,
            tf,
            conditions: vec![c(t0, 0, y0), c(t0, 1, 0.0), c(tf, 0, yf), c(tf, 1, 0.0)],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Interpolant {
    pub alpha: Vec<f64>,
    /// Indices left undetermined by the conditions; set to 0 in `alpha`.
    pub free: Vec<usize>,
}

/// Solves `d-th derivative of Σ αᵢψᵢ at t = value` for every condition.
pub fn interpolate(spec: &BoundarySpec, basis: Basis, n: usize) -> Result<Interpolant> {
    let m = spec.conditions.len();
    if m > n + 1 {
        return Err(Error::Dimension(format!(
            "{m} conditions exceed the {} coefficients of an order-{n} series",
            n + 1
        )));
    }
    let (lo, hi) = (spec.t0.min(spec.tf), spec.t0.max(spec.tf));
    for c in &spec.conditions {
        if !(c.t >= lo && c.t <= hi) || !c.value.is_finite() {
            return Err(Error::Dimension(format!(
                "condition at t = {} outside [{}, {}] or not finite",
                c.t, spec.t0, spec.tf
            )));
        }
    }
    let rows: Vec<Vec<f64>> = spec
        .conditions
        .iter()
        .map(|c| (0..=n).map(|i| basis.psi_derivative(i, c.order, c.t)).collect())
        .collect();
    let a = Matrix::from_rows(&rows);
    let mut alpha = vec![0.0; n + 1];
    if m == 0 {
        return Ok(Interpolant {
            alpha,
            free: (0..=n).collect(),
        });
    }
    let pivots: Vec<usize> = echelon(&a).pivots.iter().map(|p| p.1).collect();
    if pivots.len() < m {
        return Err(Error::RankDeficient {
            rank: pivots.len(),
            size: m,
            certificate: "boundary conditions are linearly dependent".into(),
        });
    }
    let b: Vec<f64> = spec.conditions.iter().map(|c| c.value).collect();
    let sol = Lu::equilibrated(&a.select_columns(&pivots))?.solve(&b);
    for (&i, v) in pivots.iter().zip(sol) {
        alpha[i] = v;
    }
    Ok(Interpolant {
        alpha,
        free: (0..=n).filter(|i| !pivots.contains(i)).collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState {
    pub x: Vec<f64>,
    pub u: f64,
    /// Further equilibria at the same output found by a seed scan.
    pub other_roots: Vec<(Vec<f64>, f64)>,
}

/// Newton seed: states and input.
#[derive(Clone, Debug, PartialEq)]
pub struct Seed {
    pub x: Vec<f64>,
    pub u: f64,
}

const STEADY_TOL: f64 = 1e-12;

/// Solves `ẋ = 0` with `x₁ = y_ss` for `(x₂..xₙ, u)`. The default seed is
/// `x = y_ss·(1,…,1)`, `u = 0`.
pub fn steady_state(sys: &ObserverForm, y_ss: f64, seed: Option<&Seed>) -> Result<SteadyState> {
    let n = sys.n();
    let explicit = seed.is_some();
    let seed = match seed {
        Some(s) if s.x.len() != n => {
            return Err(Error::Dimension(format!("seed needs {n} states, got {}", s.x.len())))
        }
        Some(s) => s.clone(),
        None => Seed {
            x: vec![y_ss; n],
            u: 0.0,
        },
    };
    let same = |a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)| {
        a.0.iter().chain([&a.1]).zip(b.0.iter().chain([&b.1])).all(|(p, q)| (p - q).abs() <= 1e-6 * p.abs().max(q.abs()).max(1.0))
    };
    let mut roots: Vec<(Vec<f64>, f64)> = Vec::new();
    for s in scan_seeds(n, y_ss) {
        if let Ok(root) = newton_equilibrium(sys, y_ss, &s) {
            if !roots.iter().any(|r| same(r, &root)) {
                roots.push(root);
            }
        }
    }
    let found = match newton_equilibrium(sys, y_ss, &seed) {
        Ok(root) => root,
        // from the default seed only: fall back to the scanned root nearest to it
        Err(e) if explicit || roots.is_empty() => return Err(e),
        Err(_) => {
            let dist = |r: &(Vec<f64>, f64)| {
                r.0.iter().zip(&seed.x).map(|(a, b)| (a - b).powi(2)).sum::<f64>() + (r.1 - seed.u).powi(2)
            };
            roots
                .iter()
                .min_by(|a, b| dist(a).total_cmp(&dist(b)))
                .cloned()
                .expect("nonempty")
        }
    };
    let mut other_roots: Vec<(Vec<f64>, f64)> = roots.into_iter().filter(|r| !same(r, &found)).collect();
    let (x, u) = found;
    other_roots.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(SteadyState { x, u, other_roots })
}

fn scan_seeds(n: usize, y_ss: f64) -> Vec<Seed> {
    if n > 3 {
        return Vec::new();
    }
    let mag = y_ss.abs().max(1.0);
    let grid = [-1000.0, -100.0, -10.0, -1.0, 0.0, 1.0, 10.0, 100.0, 1000.0];
    let mut seeds = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        // idx[0] drives u, idx[1..] the free states
        let mut x = vec![y_ss; n];
        for j in 1..n {
            x[j] = grid[idx[j]] * mag;
        }
        seeds.push(Seed { x, u: grid[idx[0]] * mag });
        let mut k = 0;
        while k < n {
            idx[k] += 1;
            if idx[k] < grid.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == n {
            return seeds;
        }
    }
}

fn newton_equilibrium(sys: &ObserverForm, y_ss: f64, seed: &Seed) -> Result<(Vec<f64>, f64)> {
    let n = sys.n();
    let mut x = seed.x.clone();
    x[0] = y_ss;
    let mut u = seed.u;
    let partials: Vec<Vec<_>> = (0..n)
        .map(|i| (0..n).map(|j| sys.g()[i].partial(j)).collect())
        .collect();
    let f_partials: Vec<_> = (0..n).map(|j| sys.f().partial(j)).collect();
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let scale = |x: &[f64], u: f64| norm(x).max(u.abs()).max(1.0);
    let mut r = sys.dynamics(&x, u);
    for it in 0..100 {
        if r.iter().any(|v| !v.is_finite()) {
            break;
        }
        if norm(&r) <= STEADY_TOL * scale(&x, u) {
            return Ok((x, u));
        }
        // unknowns: x₂..xₙ, u
        let mut jac = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 1..n {
                let drift = if i + 1 < n {
                    if j == i + 1 { 1.0 } else { 0.0 }
                } else {
                    f_partials[j].eval(&x)
                };
                jac[(i, j - 1)] = drift + partials[i][j].eval(&x) * u;
            }
            jac[(i, n - 1)] = sys.g()[i].eval(&x);
        }
        let Ok(lu) = Lu::equilibrated(&jac) else { break };
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = lu.solve(&neg);
        let mut lambda = 1.0;
        loop {
            let mut xn = x.clone();
            for j in 1..n {
                xn[j] += lambda * step[j - 1];
            }
            let un = u + lambda * step[n - 1];
            let rn = sys.dynamics(&xn, un);
            if norm(&rn) < norm(&r) || lambda < 1e-4 || it == 0 && lambda < 1e-2 {
                x = xn;
                u = un;
                r = rn;
                break;
            }
            lambda *= 0.5;
        }
    }
    Err(Error::NoConvergence {
        iterations: 100,
        residual: norm(&r),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{parse_system, LinearForm};
    use crate::series::{diff_n, eval, TruncatedSeries};

    #[test]
    fn setpoint_change_interpolant() {
        let spec = BoundarySpec::rest_to_rest(0.0, 1.0, 0.9, 1.1);
        let it = interpolate(&spec, Basis::Power, 3).unwrap();
        let want = [0.9, 0.0, 0.6, -0.4];
        for (a, w) in it.alpha.iter().zip(want) {
            assert!((a - w).abs() < 1e-12, "{:?}", it.alpha);
        }
        assert!(it.free.is_empty());
        let s = TruncatedSeries::new(Basis::Power, it.alpha).unwrap();
        for c in &spec.conditions {
            assert!((eval(&diff_n(&s, c.order), c.t) - c.value).abs() < 1e-12);
        }
    }

    #[test]
    fn trivial_interpolants() {
        let one = BoundarySpec {
            t0: 0.0,
            tf: 1.0,
            conditions: vec![BoundaryCondition { t: 0.0, order: 0, value: 2.5 }],
        };
        assert_eq!(interpolate(&one, Basis::Power, 0).unwrap().alpha, vec![2.5]);
        let zero = BoundarySpec::rest_to_rest(0.0, 1.0, 0.0, 0.0);
        assert!(interpolate(&zero, Basis::Power, 3).unwrap().alpha.iter().all(|a| *a == 0.0));
    }

    #[test]
    fn underdetermined_and_dependent() {
        let mut spec = BoundarySpec::rest_to_rest(0.0, 2.0, 1.0, 3.0);
        let it = interpolate(&spec, Basis::Power, 5).unwrap();
        assert_eq!(it.free, vec![4, 5]);
        spec.conditions.push(spec.conditions[0]);
        assert!(matches!(
            interpolate(&spec, Basis::Power, 5),
            Err(Error::RankDeficient { .. })
        ));
        spec.conditions[4].t = 3.0;
        assert!(interpolate(&spec, Basis::Power, 5).is_err());
    }

    #[test]
    fn exponential_interpolant() {
        let spec = BoundarySpec::rest_to_rest(0.0, 1.0, 0.0, 1.0);
        let it = interpolate(&spec, Basis::exponential(), 3).unwrap();
        let s = TruncatedSeries::new(Basis::exponential(), it.alpha).unwrap();
        for c in &spec.conditions {
            assert!((eval(&diff_n(&s, c.order), c.t) - c.value).abs() < 1e-9);
        }
    }

    #[test]
    fn van_de_vusse_equilibria() {
        let sys = parse_system(fixtures::VAN_DE_VUSSE).unwrap();
        for y in [0.9, 1.1] {
            let ss = steady_state(&sys, y, Some(&Seed { x: vec![y, 250.0], u: 290.0 })).unwrap();
            let dx = sys.dynamics(&ss.x, ss.u);
            assert!(dx.iter().all(|v| v.abs() <= 1e-10), "{dx:?}");
            // reactant balance in physical form: k1·cA − k2·y − u·y = 0
            let ca = (ss.x[1] + 100.0 * y) / 50.0;
            assert!((50.0 * ca - 100.0 * y - ss.u * y).abs() < 1e-9);
            assert_eq!(ss.other_roots.len(), 1, "{:?}", ss.other_roots);
        }
        let hi = steady_state(&sys, 0.9, Some(&Seed { x: vec![0.9, 250.0], u: 290.0 })).unwrap();
        assert!((hi.u - 293.551).abs() < 1e-3, "{}", hi.u);
    }

    #[test]
    fn linear_equilibrium_closed_form() {
        let lf = LinearForm {
            g: vec![0.5, -1.0, 2.0],
            q: vec![-1.0, 0.3, -0.7],
        };
        let sys = lf.to_observer_form("lin").unwrap();
        let y = 1.7;
        let ss = steady_state(&sys, y, None).unwrap();
        // xᵢ₊₁ = −gᵢ·u, and qᵀx + gₙ·u = 0 with x₁ = y
        let coef_u = -lf.q[1] * lf.g[0] - lf.q[2] * lf.g[1] + lf.g[2];
        let u = -lf.q[0] * y / coef_u;
        assert!((ss.u - u).abs() < 1e-10, "{} {u}", ss.u);
        assert!((ss.x[1] + lf.g[0] * u).abs() < 1e-10);
        assert!((ss.x[2] + lf.g[1] * u).abs() < 1e-10);
        assert!(ss.other_roots.is_empty());
    }

    #[test]
    fn origin_equilibrium() {
        let sys = parse_system(fixtures::VAN_DE_VUSSE).unwrap();
        let ss = steady_state(&sys, 0.0, None).unwrap();
        assert!(ss.x.iter().all(|v| v.abs() < 1e-12) && ss.u.abs() < 1e-12, "{ss:?}");
    }
}
