//! Exact inverse models for linear systems.
//!
//! Residual coefficients and initial conditions are both affine in `(α, β)`.
//! Stacking them gives a linear system whose unknowns are every `β` plus as
//! many `α` as needed to make it square; the remaining `α` stay free and the
//! solution is returned as affine maps over `[free α…, x0…]`.

use crate::error::{Error, Result};
use crate::fmt::sig;
use crate::linalg::{echelon, left_null_vector, AffineMap, Lu, Matrix, PIVOT_TOL};
use crate::model::{Frame, InitialCondition, ObserverForm};
use crate::param::{eliminate_states, io_residual_probe, AffineResidualMap};
use crate::series::{self, Basis, TruncatedSeries};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientRole {
    Free,
    SolvedFromResidual,
    SolvedFromIc,
}

/// How the solver picks which `α` stay free.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum RoleSelection {
    /// All `β`, then the lowest-index `α` that give a regular system.
    #[default]
    Auto,
    /// These `α` indices are free; every other coefficient is solved for.
    FreeAlpha(Vec<usize>),
}

#[derive(Clone, Debug)]
pub struct InverseModel {
    pub basis: Basis,
    pub n_out: usize,
    pub n_in: usize,
    pub alpha_roles: Vec<CoefficientRole>,
    pub beta_roles: Vec<CoefficientRole>,
    /// Indices of the free `α`, in parameter order.
    pub free_alpha: Vec<usize>,
    /// Full `α` as a function of `[free α…, x0…]`.
    pub alpha_map: AffineMap,
    /// Full `β` as a function of `[free α…, x0…]`.
    pub beta_map: AffineMap,
    /// Coefficients of each state series as a function of `[free α…, x0…]`.
    pub state_maps: Vec<AffineMap>,
    pub ic: InitialCondition,
    pub ic_names: Vec<String>,
    pub trunc: usize,
}

impl InverseModel {
    pub fn n_free(&self) -> usize {
        self.free_alpha.len()
    }

    /// Names of the entries of the parameter vector.
    pub fn param_names(&self) -> Vec<String> {
        self.free_alpha
            .iter()
            .map(|i| format!("a{i}"))
            .chain(self.ic_names.iter().map(|s| format!("{s}(0)")))
            .collect()
    }

    fn params(&self, free_alpha: &[f64], x0: &[f64]) -> Result<Vec<f64>> {
        if free_alpha.len() != self.n_free() || x0.len() != self.ic.x0.len() {
            return Err(Error::Dimension(format!(
                "expected {} free coefficients and {} initial values, got {} and {}",
                self.n_free(),
                self.ic.x0.len(),
                free_alpha.len(),
                x0.len()
            )));
        }
        Ok(free_alpha.iter().chain(x0).copied().collect())
    }

    pub fn alpha(&self, free_alpha: &[f64]) -> Result<Vec<f64>> {
        Ok(self.alpha_map.apply(&self.params(free_alpha, &self.ic.x0)?))
    }

    pub fn beta(&self, free_alpha: &[f64]) -> Result<Vec<f64>> {
        Ok(self.beta_map.apply(&self.params(free_alpha, &self.ic.x0)?))
    }

    /// Concrete state and input series for the stored initial condition.
    pub fn instantiate(&self, free_alpha: &[f64]) -> Result<(Vec<TruncatedSeries>, TruncatedSeries)> {
        self.instantiate_with(free_alpha, &self.ic.x0)
    }

    /// As [`instantiate`](Self::instantiate) with different initial values.
    pub fn instantiate_with(
        &self,
        free_alpha: &[f64],
        x0: &[f64],
    ) -> Result<(Vec<TruncatedSeries>, TruncatedSeries)> {
        let p = self.params(free_alpha, x0)?;
        let states = self
            .state_maps
            .iter()
            .map(|m| TruncatedSeries::new(self.basis, m.apply(&p)))
            .collect::<Result<Vec<_>>>()?;
        let u = TruncatedSeries::new(self.basis, self.beta_map.apply(&p))?;
        Ok((states, u))
    }

    pub fn output(&self, free_alpha: &[f64]) -> Result<TruncatedSeries> {
        TruncatedSeries::new(self.basis, self.alpha(free_alpha)?)
    }
}

/// Stacked affine constraints over `(α, β)`: kept residual rows, then the
/// initial-condition rows. `rows·(α, β) + offset = rhs`.
#[derive(Clone)]
struct Constraints {
    rows: Matrix,
    offset: Vec<f64>,
    n_residual: usize,
    /// Initial-value index behind each non-residual row.
    ic_index: Vec<usize>,
}

impl Constraints {
    fn rhs(&self, x0: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.n_residual];
        r.extend(self.ic_index.iter().map(|&i| x0[i]));
        r
    }

    /// Whether `rows·p + offset = rhs` has a solution.
    fn consistent(&self, x0: &[f64]) -> bool {
        let b: Vec<f64> = self.rhs(x0).iter().zip(&self.offset).map(|(r, o)| r - o).collect();
        let mut cols: Vec<Vec<f64>> = (0..self.rows.ncols()).map(|j| self.rows.column(j)).collect();
        cols.push(b);
        Matrix::from_columns(self.rows.nrows(), &cols).rank() == self.rows.rank()
    }

    /// Keeps a maximal independent subset of rows, earliest rows first.
    fn independent(&self) -> Constraints {
        let keep: Vec<usize> = echelon(&self.rows.transpose()).pivots.iter().map(|p| p.1).collect();
        Constraints {
            rows: self.rows.select_rows(&keep),
            offset: keep.iter().map(|&i| self.offset[i]).collect(),
            n_residual: keep.iter().filter(|&&i| i < self.n_residual).count(),
            ic_index: keep
                .iter()
                .filter(|&&i| i >= self.n_residual)
                .map(|&i| self.ic_index[i - self.n_residual])
                .collect(),
        }
    }
}

fn ic_values(
    sys: &ObserverForm,
    basis: Basis,
    trunc: usize,
    ic: &InitialCondition,
    alpha: &[f64],
    beta: &[f64],
) -> Result<Vec<f64>> {
    let y = TruncatedSeries::new(basis, alpha.to_vec())?;
    let u = TruncatedSeries::new(basis, beta.to_vec())?;
    let sp = eliminate_states(sys, &y, &u, trunc)?;
    let x = sp.states_at(ic.t0);
    match ic.frame {
        Frame::Observer => Ok(x),
        Frame::Physical => {
            let coords = sys.coordinates.as_ref().ok_or_else(|| {
                Error::Schema("physical initial values need a [coordinates] section".into())
            })?;
            Ok(coords.eval(&x, series::eval(&u, ic.t0)))
        }
    }
}

fn ic_names(sys: &ObserverForm, ic: &InitialCondition) -> Vec<String> {
    match (ic.frame, &sys.coordinates) {
        (Frame::Physical, Some(c)) => c.names.clone(),
        _ => (1..=sys.n()).map(|i| format!("x{i}")).collect(),
    }
}

fn check_ic(sys: &ObserverForm, ic: &InitialCondition) -> Result<()> {
    let want = match (ic.frame, &sys.coordinates) {
        (Frame::Physical, Some(c)) => {
            if c.map.iter().any(|p| p.as_affine().is_none()) {
                return Err(Error::NotLinear(
                    "coordinate map must be affine for a linear inverse".into(),
                ));
            }
            c.names.len()
        }
        _ => sys.n(),
    };
    if ic.x0.len() != want {
        return Err(Error::Dimension(format!(
            "expected {want} initial values, got {}",
            ic.x0.len()
        )));
    }
    if !ic.t0.is_finite() || ic.x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "initial condition".into(),
            at: ic.t0,
        });
    }
    Ok(())
}

fn constraints(
    sys: &ObserverForm,
    map: &AffineResidualMap,
    basis: Basis,
    ic: &InitialCondition,
) -> Result<Constraints> {
    let na = map.m_alpha.ncols();
    let nb = map.m_beta.ncols();
    let full = Matrix::from_columns(
        map.c.len(),
        &(0..na)
            .map(|j| map.m_alpha.column(j))
            .chain((0..nb).map(|j| map.m_beta.column(j)))
            .collect::<Vec<_>>(),
    );
    let scale = full.max_abs().max(map.c.iter().fold(0.0, |m, v| m.max(v.abs())));
    let kept: Vec<usize> = (0..full.nrows())
        .filter(|&i| {
            full.row(i).iter().any(|v| v.abs() > PIVOT_TOL * scale) || map.c[i].abs() > PIVOT_TOL * scale
        })
        .collect();
    let ic_map = AffineMap::probe(na + nb, |p| {
        ic_values(sys, basis, map.trunc, ic, &p[..na], &p[na..])
    })?;
    let mut rows: Vec<Vec<f64>> = kept.iter().map(|&i| full.row(i).to_vec()).collect();
    let mut offset: Vec<f64> = kept.iter().map(|&i| map.c[i]).collect();
    for i in 0..ic_map.output_dim() {
        rows.push(ic_map.linear.row(i).to_vec());
        offset.push(ic_map.offset[i]);
    }
    Ok(Constraints {
        rows: Matrix::from_rows(&rows),
        offset,
        n_residual: kept.len(),
        ic_index: (0..ic_map.output_dim()).collect(),
    })
}

/// Lexicographic `k`-subsets of `0..n`.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::new(), &mut out);
    }
    out
}

fn certificate(c: &Constraints, names: &[String], rank: usize) -> String {
    let Some(w) = left_null_vector(&c.rows) else {
        return format!("no choice of free output coefficients gives a regular system (rank {rank})");
    };
    let ic_w = &w[c.n_residual..];
    let wmax = ic_w.iter().fold(0.0f64, |m, v| if v.abs() > m.abs() { *v } else { m });
    let wall = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if wmax.abs() <= 1e-9 * wall {
        return "the residual equations are inconsistent".into();
    }
    let mut lhs = Vec::new();
    for (i, v) in ic_w.iter().enumerate() {
        let v = v / wmax;
        if v.abs() <= 1e-9 {
            continue;
        }
        let term = if (v - 1.0).abs() <= 1e-12 {
            format!("{}(0)", names[i])
        } else {
            format!("{}*{}(0)", sig(v, 6), names[i])
        };
        lhs.push(term);
    }
    // w·(rows·p + offset) = w·rhs, and w·rows = 0
    let rhs: f64 = w.iter().zip(&c.offset).map(|(a, b)| a * b).sum::<f64>() / wmax;
    let rhs = if rhs.abs() <= 1e-12 * wall { 0.0 } else { rhs };
    format!("initial values restricted to {} = {}", lhs.join(" + "), sig(rhs, 6))
}

/// Solves the exact linear inverse problem for output order `n_out` and
/// input order `n_in`.
///
/// When the constraints are singular but consistent for the given initial
/// values (e.g. an uncontrollable mode started at rest), redundant rows are
/// dropped and one more output coefficient stays free.
pub fn solve_linear_inverse(
    sys: &ObserverForm,
    basis: Basis,
    n_out: usize,
    n_in: usize,
    ic: &InitialCondition,
    roles: &RoleSelection,
) -> Result<InverseModel> {
    check_ic(sys, ic)?;
    let map = io_residual_probe(sys, basis, n_out, n_in)?;
    let c = constraints(sys, &map, basis, ic)?;
    let names = ic_names(sys, ic);
    let ctx = Ctx { sys, basis, n_out, n_in, ic, trunc: map.trunc, names: &names };
    if let Some(m) = select(&ctx, &c, roles)? {
        return Ok(m);
    }
    let rank = c.rows.rank();
    if rank < c.rows.nrows() && c.consistent(&ic.x0) {
        if let Some(m) = select(&ctx, &c.independent(), roles)? {
            return Ok(m);
        }
    }
    Err(Error::RankDeficient {
        rank,
        size: c.rows.nrows(),
        certificate: certificate(&c, &names, rank),
    })
}

struct Ctx<'a> {
    sys: &'a ObserverForm,
    basis: Basis,
    n_out: usize,
    n_in: usize,
    ic: &'a InitialCondition,
    trunc: usize,
    names: &'a [String],
}

fn select(ctx: &Ctx, c: &Constraints, roles: &RoleSelection) -> Result<Option<InverseModel>> {
    let na = ctx.n_out + 1;
    let nb = ctx.n_in + 1;
    let n_rows = c.rows.nrows();
    let n_x0 = ctx.ic.x0.len();
    if n_rows < nb || n_rows - nb > na {
        return Err(Error::Dimension(format!(
            "{n_rows} constraints cannot be matched by {nb} input and {na} output coefficients"
        )));
    }
    let k = n_rows - nb;
    let candidates = match roles {
        RoleSelection::Auto => combinations(na, k),
        RoleSelection::FreeAlpha(free) => {
            if free.iter().any(|&i| i >= na) {
                return Err(Error::Dimension(format!("free α index out of range 0..{na}")));
            }
            let solved: Vec<usize> = (0..na).filter(|i| !free.contains(i)).collect();
            if solved.len() != k {
                return Err(Error::Dimension(format!(
                    "{} free α leave {} unknowns for {n_rows} equations",
                    free.len(),
                    solved.len() + nb
                )));
            }
            vec![solved]
        }
    };
    for solved_alpha in candidates {
        let unknowns: Vec<usize> = (na..na + nb).chain(solved_alpha.iter().copied()).collect();
        let a = c.rows.select_columns(&unknowns);
        let Ok(lu) = Lu::equilibrated(&a) else { continue };
        let free: Vec<usize> = (0..na).filter(|i| !solved_alpha.contains(i)).collect();
        let np = free.len() + n_x0;
        // rows·p + offset = rhs with rhs = [0…, x0]
        let mut rhs_lin = Matrix::zeros(n_rows, np);
        let af = c.rows.select_columns(&free);
        for i in 0..n_rows {
            for j in 0..free.len() {
                rhs_lin[(i, j)] = -af[(i, j)];
            }
        }
        for (r, &j) in c.ic_index.iter().enumerate() {
            rhs_lin[(c.n_residual + r, free.len() + j)] = 1.0;
        }
        let neg_offset: Vec<f64> = c.offset.iter().map(|v| -v).collect();
        let sol_lin = lu.solve_matrix(&rhs_lin);
        let sol_off = lu.solve(&neg_offset);

        let mut alpha_lin = Matrix::zeros(na, np);
        let mut alpha_off = vec![0.0; na];
        let mut beta_lin = Matrix::zeros(nb, np);
        let mut beta_off = vec![0.0; nb];
        for (j, &i) in free.iter().enumerate() {
            alpha_lin[(i, j)] = 1.0;
        }
        for (r, &col) in unknowns.iter().enumerate() {
            let (lin, off, idx) = if col >= na {
                (&mut beta_lin, &mut beta_off, col - na)
            } else {
                (&mut alpha_lin, &mut alpha_off, col)
            };
            for j in 0..np {
                lin[(idx, j)] = sol_lin[(r, j)];
            }
            off[idx] = sol_off[r];
        }
        let alpha_map = AffineMap {
            linear: alpha_lin,
            offset: alpha_off,
        };
        let beta_map = AffineMap {
            linear: beta_lin,
            offset: beta_off,
        };

        // greedy role split on the residual rows
        let res_rows: Vec<usize> = (0..c.n_residual).collect();
        let piv = echelon(&a.select_rows(&res_rows)).pivots;
        let mut alpha_roles = vec![CoefficientRole::Free; na];
        let mut beta_roles = vec![CoefficientRole::SolvedFromIc; nb];
        for &i in &solved_alpha {
            alpha_roles[i] = CoefficientRole::SolvedFromIc;
        }
        for &(_, col) in &piv {
            match unknowns[col] {
                u if u >= na => beta_roles[u - na] = CoefficientRole::SolvedFromResidual,
                u => alpha_roles[u] = CoefficientRole::SolvedFromResidual,
            }
        }

        let state_maps = state_maps(ctx.sys, ctx.basis, ctx.trunc, &alpha_map, &beta_map)?;
        return Ok(Some(InverseModel {
            basis: ctx.basis,
            n_out: ctx.n_out,
            n_in: ctx.n_in,
            alpha_roles,
            beta_roles,
            free_alpha: free,
            alpha_map,
            beta_map,
            state_maps,
            ic: ctx.ic.clone(),
            ic_names: ctx.names.to_vec(),
            trunc: ctx.trunc,
        }));
    }
    Ok(None)
}

fn state_maps(
    sys: &ObserverForm,
    basis: Basis,
    trunc: usize,
    alpha_map: &AffineMap,
    beta_map: &AffineMap,
) -> Result<Vec<AffineMap>> {
    let n = sys.n();
    let all = AffineMap::probe(alpha_map.input_dim(), |p| {
        let y = TruncatedSeries::new(basis, alpha_map.apply(p))?;
        let u = TruncatedSeries::new(basis, beta_map.apply(p))?;
        let sp = eliminate_states(sys, &y, &u, trunc)?;
        Ok(sp.states.into_iter().flat_map(|s| s.into_coeffs()).collect())
    })?;
    let len = trunc + 1;
    Ok((0..n)
        .map(|i| {
            let rows: Vec<usize> = (i * len..(i + 1) * len).collect();
            AffineMap {
                linear: all.linear.select_rows(&rows),
                offset: rows.iter().map(|&r| all.offset[r]).collect(),
            }
        })
        .collect())
}

/// `β` solved from the residual alone, before initial conditions are
/// applied. `solved[k]` is the `β` index whose value is row `k` of `map`,
/// an affine function of `[α…, unsolved β…]`.
#[derive(Clone, Debug)]
pub struct ResidualBetaMap {
    pub solved: Vec<usize>,
    pub unsolved: Vec<usize>,
    pub map: AffineMap,
}

pub fn residual_beta_map(map: &AffineResidualMap) -> Result<ResidualBetaMap> {
    let na = map.m_alpha.ncols();
    let nb = map.m_beta.ncols();
    let rows = map.c.len();
    // columns ordered β…, α…, offset so pivots land on β first
    let mut cols: Vec<Vec<f64>> = (0..nb).map(|j| map.m_beta.column(j)).collect();
    cols.extend((0..na).map(|j| map.m_alpha.column(j)));
    cols.push(map.c.clone());
    let e = echelon(&Matrix::from_columns(rows, &cols));
    let solved: Vec<usize> = e.pivots.iter().map(|p| p.1).filter(|&c| c < nb).collect();
    if e.pivots.iter().any(|p| p.1 >= nb) {
        return Err(Error::RankDeficient {
            rank: e.pivots.len(),
            size: rows,
            certificate: "residual constrains the output coefficients directly".into(),
        });
    }
    let unsolved: Vec<usize> = (0..nb).filter(|j| !solved.contains(j)).collect();
    let np = na + unsolved.len();
    let mut lin = Matrix::zeros(solved.len(), np);
    let mut off = vec![0.0; solved.len()];
    for (k, &(r, _)) in e.pivots.iter().enumerate() {
        for a in 0..na {
            lin[(k, a)] = -e.reduced[(r, nb + a)];
        }
        for (j, &b) in unsolved.iter().enumerate() {
            lin[(k, na + j)] = -e.reduced[(r, b)];
        }
        off[k] = -e.reduced[(r, nb + na)];
    }
    Ok(ResidualBetaMap {
        solved,
        unsolved,
        map: AffineMap {
            linear: lin,
            offset: off,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::BUCK;
    use crate::model::{parse_system, LinearForm};

    fn uncontrollable() -> ObserverForm {
        LinearForm {
            g: vec![1.0, 0.0],
            q: vec![0.0, -2.0],
        }
        .to_observer_form("uncontrollable")
        .unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn buck_residual_beta_map() {
        let sys = parse_system(BUCK).unwrap();
        let map = io_residual_probe(&sys, Basis::Power, 3, 3).unwrap();
        let rb = residual_beta_map(&map).unwrap();
        assert_eq!(rb.solved, vec![0, 1, 2, 3]);
        // β₂ from the t² residual row: 0.018α₃ = 575β₂ (β₃ = 0)
        let l = &rb.map.linear;
        assert!(close(l[(2, 3)], 0.018 / 575.0, 1e-15));
        assert!(close(l[(0, 1)], 0.006 / 575.0, 1e-15));
        assert!(l.row(3).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn uncontrollable_exponential() {
        let sys = uncontrollable();
        let ic = InitialCondition::observer(0.0, vec![0.7, -1.3]);
        let m = solve_linear_inverse(&sys, Basis::exponential(), 3, 3, &ic, &RoleSelection::Auto).unwrap();
        assert_eq!(m.free_alpha, vec![1, 2, 3]);
        use CoefficientRole::*;
        assert_eq!(m.beta_roles, vec![SolvedFromResidual, SolvedFromResidual, SolvedFromIc, SolvedFromResidual]);
        assert_eq!(m.alpha_roles, vec![SolvedFromIc, Free, Free, Free]);
        let (a1, a2, a3) = (0.4, -0.25, 1.5);
        let b = m.beta(&[a1, a2, a3]).unwrap();
        let a = m.alpha(&[a1, a2, a3]).unwrap();
        assert!(close(b[0], 0.0, 1e-12));
        assert!(close(b[1], -a1, 1e-12));
        assert!(close(b[2], 1.3 - 2.0 * a2, 1e-12));
        assert!(close(b[3], -3.0 * a3, 1e-12));
        assert!(close(a[0], 0.7 - a1 - a2 - a3, 1e-12));
        // x₂(t) = x₂(0)·e^{−2t}
        let (x, _) = m.instantiate(&[a1, a2, a3]).unwrap();
        let mut want = vec![0.0; x[1].order() + 1];
        want[2] = -1.3;
        assert!(x[1].approx_eq(&TruncatedSeries::new(Basis::exponential(), want).unwrap()));
    }

    #[test]
    fn uncontrollable_power_is_rank_deficient() {
        let ic = InitialCondition::observer(0.0, vec![0.0, 1.0]);
        let err = solve_linear_inverse(&uncontrollable(), Basis::Power, 3, 3, &ic, &RoleSelection::Auto)
            .unwrap_err();
        match err {
            Error::RankDeficient { certificate, .. } => {
                assert!(certificate.contains("x2(0) = 0"), "{certificate}")
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn uncontrollable_power_at_rest() {
        // with x₂(0) = 0 the restricting row is redundant and one more α is free
        let ic = InitialCondition::observer(0.0, vec![0.5, 0.0]);
        let m = solve_linear_inverse(&uncontrollable(), Basis::Power, 3, 3, &ic, &RoleSelection::Auto)
            .unwrap();
        assert_eq!(m.free_alpha, vec![1, 2, 3]);
        let (x, u) = m.instantiate(&[0.3, -0.1, 0.2]).unwrap();
        assert!(x[1].max_abs() < 1e-12);
        // u = ẏ
        let y = m.output(&[0.3, -0.1, 0.2]).unwrap();
        assert!(u.approx_eq(&series::diff(&y)));
    }

    #[test]
    fn buck_zero_equilibrium() {
        let sys = parse_system(BUCK).unwrap();
        let ic = InitialCondition::physical(0.0, vec![0.0, 0.0]);
        let m = solve_linear_inverse(&sys, Basis::Power, 3, 3, &ic, &RoleSelection::Auto).unwrap();
        assert_eq!(m.free_alpha, vec![2, 3]);
        let (x, u) = m.instantiate(&[0.0, 0.0]).unwrap();
        assert!(u.max_abs() < 1e-15);
        assert!(x.iter().all(|s| s.max_abs() < 1e-15));
    }

    #[test]
    fn buck_physical_ics_hold() {
        let sys = parse_system(BUCK).unwrap();
        let ic = InitialCondition::physical(0.0, vec![3.0, -0.2]);
        let m = solve_linear_inverse(&sys, Basis::Power, 3, 3, &ic, &RoleSelection::Auto).unwrap();
        let (x, u) = m.instantiate(&[0.5, -0.2]).unwrap();
        let x0: Vec<f64> = x.iter().map(|s| series::eval(s, 0.0)).collect();
        let z = sys.coordinates.as_ref().unwrap().eval(&x0, series::eval(&u, 0.0));
        assert!(close(z[0], 3.0, 1e-9) && close(z[1], -0.2, 1e-9), "{z:?}");
    }

    #[test]
    fn explicit_free_alpha() {
        let sys = uncontrollable();
        let ic = InitialCondition::observer(0.0, vec![0.7, -1.3]);
        let m = solve_linear_inverse(
            &sys,
            Basis::exponential(),
            3,
            3,
            &ic,
            &RoleSelection::FreeAlpha(vec![0, 1, 2]),
        )
        .unwrap();
        let a = m.alpha(&[0.1, 0.2, 0.3]).unwrap();
        assert!(close(a[3], 0.7 - 0.1 - 0.2 - 0.3, 1e-12));
        assert!(solve_linear_inverse(&sys, Basis::exponential(), 3, 3, &ic, &RoleSelection::FreeAlpha(vec![0]))
            .is_err());
    }

    #[test]
    fn combinations_are_lexicographic() {
        assert_eq!(
            combinations(4, 2),
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
    }
}
