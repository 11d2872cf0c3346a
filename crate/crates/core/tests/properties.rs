mod common;

use proptest::prelude::*;
use seriesinv::lininv::{solve_linear_inverse, RoleSelection};
use seriesinv::model::{parse_system, InitialCondition, LinearForm, ObserverForm};
use seriesinv::nlinv::{solve_nonlinear_inverse, NonlinearSolveConfig};
use seriesinv::param::{eliminate_states, io_residual_probe, residual_scale};
use seriesinv::series::{self, state_names, Basis, MultiPoly, TruncatedSeries};
use seriesinv::traj::{interpolate, steady_state, BoundaryCondition, BoundarySpec};
use seriesinv::verify::{error_metric, integrate_forward, Method, SimResult};

use common::{model_residual, scaled_residual};

fn basis() -> impl Strategy<Value = Basis> {
    prop_oneof![Just(Basis::Power), (0.5..2.0f64).prop_map(|rate| Basis::Exponential { rate })]
}

fn coeffs(max_order: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 1..=max_order + 1)
}

fn nonzero() -> impl Strategy<Value = f64> {
    (0.2..2.0f64, any::<bool>()).prop_map(|(v, neg)| if neg { -v } else { v })
}

/// Linear system whose input enters from state `r + 1` on.
fn linear_system() -> impl Strategy<Value = ObserverForm> {
    (1usize..=4)
        .prop_flat_map(|n| (Just(n), 0..n, prop::collection::vec(nonzero(), n), prop::collection::vec(-2.0..2.0f64, n)))
        .prop_map(|(_, r, mut g, q)| {
            g.iter_mut().take(r).for_each(|v| *v = 0.0);
            LinearForm { g, q }.to_observer_form("random").unwrap()
        })
}

/// Linear system with the given real, negative characteristic roots.
fn stable_system(roots: &[f64], g: Vec<f64>) -> ObserverForm {
    // Π (s − rₖ) = sⁿ + c_{n−1}sⁿ⁻¹ + … + c₀, and the last state obeys
    // y⁽ⁿ⁾ = Σ qᵢ y⁽ⁱ⁻¹⁾ + …, so qᵢ = −c_{i−1}
    let mut c = vec![1.0];
    for &r in roots {
        let mut next = vec![0.0; c.len() + 1];
        for (k, &ck) in c.iter().enumerate() {
            next[k + 1] += ck;
            next[k] -= r * ck;
        }
        c = next;
    }
    let q = c[..roots.len()].iter().map(|v| -v).collect();
    LinearForm { g, q }.to_observer_form("stable").unwrap()
}

fn series_of(basis: Basis, c: &[f64]) -> TruncatedSeries {
    TruncatedSeries::new(basis, c.to_vec()).unwrap()
}

/// `dᵏ/dtᵏ Σ cᵢψᵢ` at `t`, straight from the basis functions.
fn derivative_at(basis: Basis, c: &[f64], k: usize, t: f64) -> f64 {
    c.iter().enumerate().map(|(i, ci)| ci * basis.psi_derivative(i, k, t)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn product_rule(basis in basis(), a in coeffs(5), b in coeffs(5)) {
        let (a, b) = (series_of(basis, &a), series_of(basis, &b));
        let trunc = 10;
        let lhs = series::diff(&series::mul(&a, &b, trunc).unwrap());
        let rhs = series::linear_comb(&[
            (1.0, &series::mul(&series::diff(&a), &b, trunc).unwrap()),
            (1.0, &series::mul(&a, &series::diff(&b), trunc).unwrap()),
        ]).unwrap();
        let valid = trunc - a.order().max(b.order());
        for i in 0..=valid.min(lhs.order()).min(rhs.order()) {
            prop_assert!((lhs.coeff(i) - rhs.coeff(i)).abs() <= 1e-12, "index {i}");
        }
    }

    #[test]
    fn evaluation_is_multiplicative(basis in basis(), a in coeffs(4), b in coeffs(4), t in 0.0..1.5f64) {
        let (a, b) = (series_of(basis, &a), series_of(basis, &b));
        let ab = series::mul(&a, &b, a.order() + b.order()).unwrap();
        let direct = series::eval(&a, t) * series::eval(&b, t);
        prop_assert!((series::eval(&ab, t) - direct).abs() <= 1e-9);
    }

    #[test]
    fn derivative_matches_central_difference(basis in basis(), c in coeffs(6), t in 0.1..1.0f64) {
        let s = series_of(basis, &c);
        let h = 1e-5;
        let fd = (series::eval(&s, t + h) - series::eval(&s, t - h)) / (2.0 * h);
        prop_assert!((fd - series::eval(&series::diff(&s), t)).abs() <= 1e-7);
    }

    #[test]
    fn diff_and_linear_polynomials_are_linear(basis in basis(), a in prop::collection::vec(-1.0..1.0f64, 5), b in prop::collection::vec(-1.0..1.0f64, 5), w in -2.0..2.0f64, k in -2.0..2.0f64) {
        let (a, b) = (series_of(basis, &a), series_of(basis, &b));
        let comb = series::linear_comb(&[(1.0, &a), (w, &b)]).unwrap();
        let lhs = series::diff(&comb);
        let rhs = series::linear_comb(&[(1.0, &series::diff(&a)), (w, &series::diff(&b))]).unwrap();
        for (l, r) in lhs.coeffs().iter().zip(rhs.coeffs()) {
            prop_assert!((l - r).abs() <= 1e-12);
        }
        let vars = state_names(1);
        let p = MultiPoly::linear(&vars, 0, k);
        let on = |s: &TruncatedSeries| p.on_series(std::slice::from_ref(s), 4).unwrap();
        let lhs = on(&comb);
        let rhs = series::linear_comb(&[(1.0, &on(&a)), (w, &on(&b))]).unwrap();
        for (l, r) in lhs.coeffs().iter().zip(rhs.coeffs()) {
            prop_assert!((l - r).abs() <= 1e-12);
        }
    }

    #[test]
    fn shifting_moves_the_time_origin(c in coeffs(6), t0 in -1.0..1.0f64, tau in -1.0..1.0f64) {
        let s = series_of(Basis::Power, &c);
        let moved = s.shifted(t0).unwrap();
        prop_assert!((series::eval(&moved, tau) - series::eval(&s, t0 + tau)).abs() <= 1e-10);
    }

    #[test]
    fn residual_map_is_faithful(sys in linear_system(), basis in basis(), a in prop::collection::vec(-1.0..1.0f64, 4), b in prop::collection::vec(-1.0..1.0f64, 4)) {
        let map = io_residual_probe(&sys, basis, 3, 3).unwrap();
        let direct = eliminate_states(&sys, &series_of(basis, &a), &series_of(basis, &b), map.trunc).unwrap().residual;
        let scale = residual_scale(&sys, &series_of(basis, &a), &series_of(basis, &b), map.trunc).unwrap();
        for (i, (m, d)) in map.apply(&a, &b).iter().zip(direct.coeffs()).enumerate() {
            prop_assert!((m - d).abs() <= 1e-9 * scale.coeff(i).max(1.0), "coefficient {i}");
        }
        prop_assert_eq!(map, io_residual_probe(&sys, basis, 3, 3).unwrap());
    }

    #[test]
    fn residual_matches_input_output_equation(sys in linear_system(), basis in basis(), a in prop::collection::vec(-1.0..1.0f64, 4), b in prop::collection::vec(-1.0..1.0f64, 4), ts in prop::collection::vec(0.0..1.0f64, 20)) {
        let lin = sys.as_linear().unwrap();
        let n = lin.n();
        let trunc = 3 + n;
        let r = eliminate_states(&sys, &series_of(basis, &a), &series_of(basis, &b), trunc).unwrap().residual;
        for t in ts {
            let y = |k| derivative_at(basis, &a, k, t);
            let u = |k| derivative_at(basis, &b, k, t);
            // xᵢ = y⁽ⁱ⁻¹⁾ − Σ_{j<i} gⱼ u⁽ⁱ⁻¹⁻ʲ⁾ (1-based)
            let x = |i: usize| y(i - 1) - (1..i).map(|j| lin.g[j - 1] * u(i - 1 - j)).sum::<f64>();
            let dxn = y(n) - (1..n).map(|j| lin.g[j - 1] * u(n - j)).sum::<f64>();
            let want = dxn - (1..=n).map(|i| lin.q[i - 1] * x(i)).sum::<f64>() - lin.g[n - 1] * u(0);
            prop_assert!((series::eval(&r, t) - want).abs() <= 1e-9 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn linear_roundtrip_keeps_the_residual(sys in linear_system(), a in prop::collection::vec(-1.0..1.0f64, 4), b in prop::collection::vec(-1.0..1.0f64, 4)) {
        let again = sys.as_linear().unwrap().to_observer_form("again").unwrap();
        let (y, u) = (series_of(Basis::Power, &a), series_of(Basis::Power, &b));
        let r1 = eliminate_states(&sys, &y, &u, 8).unwrap().residual;
        let r2 = eliminate_states(&again, &y, &u, 8).unwrap().residual;
        for (p, q) in r1.coeffs().iter().zip(r2.coeffs()) {
            prop_assert!((p - q).abs() <= 1e-12);
        }
    }

    #[test]
    fn linear_inverse_is_exact_and_meets_initial_values(sys in linear_system(), basis in basis(), extra in 1usize..3, x0 in prop::collection::vec(-1.0..1.0f64, 4), free in prop::collection::vec(-1.0..1.0f64, 8)) {
        let n = sys.n();
        let n_out = n + extra;
        let ic = InitialCondition::observer(0.0, x0[..n].to_vec());
        let m = solve_linear_inverse(&sys, basis, n_out, n_out, &ic, &RoleSelection::Auto).unwrap();
        let free = &free[..m.n_free()];
        prop_assert!(model_residual(&sys, &m, free) <= 1e-8);
        let (states, _) = m.instantiate(free).unwrap();
        for (s, want) in states.iter().zip(&ic.x0) {
            prop_assert!((series::eval(s, 0.0) - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
    }

    #[test]
    fn linear_inverse_is_affine(sys in linear_system(), x0 in prop::collection::vec(-1.0..1.0f64, 4), a in prop::collection::vec(-1.0..1.0f64, 8), b in prop::collection::vec(-1.0..1.0f64, 8)) {
        let n = sys.n();
        let ic = InitialCondition::observer(0.0, x0[..n].to_vec());
        let m = solve_linear_inverse(&sys, Basis::Power, n + 2, n + 2, &ic, &RoleSelection::Auto).unwrap();
        let k = m.n_free();
        let (a, b) = (&a[..k], &b[..k]);
        let sum: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
        let zero = vec![0.0; k];
        let (xa, ua) = m.instantiate(a).unwrap();
        let (xb, ub) = m.instantiate(b).unwrap();
        let (x0s, u0) = m.instantiate(&zero).unwrap();
        let (xs, us) = m.instantiate(&sum).unwrap();
        let check = |p: &TruncatedSeries, q: &TruncatedSeries, z: &TruncatedSeries, s: &TruncatedSeries| {
            p.coeffs().iter().zip(q.coeffs()).zip(z.coeffs()).zip(s.coeffs())
                .all(|(((p, q), z), s)| (p + q - z - s).abs() <= 1e-10 * (1.0 + s.abs()))
        };
        prop_assert!(check(&ua, &ub, &u0, &us));
        for i in 0..n {
            prop_assert!(check(&xa[i], &xb[i], &x0s[i], &xs[i]));
        }
    }

    #[test]
    fn nonlinear_path_agrees_with_linear_inverse(sys in linear_system(), extra in 1usize..3, x0 in prop::collection::vec(-1.0..1.0f64, 4), free in prop::collection::vec(-1.0..1.0f64, 8)) {
        let n = sys.n();
        let n_out = n + extra;
        let ic = InitialCondition::observer(0.0, x0[..n].to_vec());
        let m = solve_linear_inverse(&sys, Basis::Power, n_out, n_out, &ic, &RoleSelection::Auto).unwrap();
        let free = &free[..m.n_free()];
        let alpha = m.alpha(free).unwrap();
        let beta = m.beta(free).unwrap();
        let inv = solve_nonlinear_inverse(&sys, &alpha, &ic, &NonlinearSolveConfig::new(n_out)).unwrap();
        let size = beta.iter().fold(1.0f64, |s, b| s.max(b.abs()));
        for (p, q) in inv.beta.iter().zip(&beta) {
            prop_assert!((p - q).abs() <= 1e-8 * size, "{:?} vs {:?}", inv.beta, beta);
        }
    }

    #[test]
    fn metric_triangle_bound(ys in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 2..50)) {
        let times: Vec<f64> = (0..ys.len()).map(|k| k as f64 * 0.1).collect();
        let sim = |a: Vec<f64>, b: Vec<f64>| SimResult {
            times: times.clone(),
            states: vec![a.clone()],
            u: vec![0.0; a.len()],
            y_sim: a,
            y_ref: b,
            method: Method::Euler,
            h: 0.1,
        };
        let a: Vec<f64> = ys.iter().map(|v| v.0).collect();
        let b: Vec<f64> = ys.iter().map(|v| v.1).collect();
        let c: Vec<f64> = ys.iter().map(|v| v.2).collect();
        let ac = error_metric(&sim(a.clone(), c.clone())).e;
        let ab = error_metric(&sim(a, b.clone())).e;
        let bc = error_metric(&sim(b, c)).e;
        prop_assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn interpolant_meets_conditions(y0 in -2.0..2.0f64, yf in -2.0..2.0f64, v0 in -1.0..1.0f64, tf in 0.5..3.0f64) {
        let spec = BoundarySpec {
            t0: 0.0,
            tf,
            conditions: vec![
                BoundaryCondition { t: 0.0, order: 0, value: y0 },
                BoundaryCondition { t: 0.0, order: 1, value: v0 },
                BoundaryCondition { t: tf, order: 0, value: yf },
                BoundaryCondition { t: tf, order: 1, value: 0.0 },
            ],
        };
        let it = interpolate(&spec, Basis::Power, 3).unwrap();
        for c in &spec.conditions {
            let got = derivative_at(Basis::Power, &it.alpha, c.order, c.t);
            prop_assert!((got - c.value).abs() <= 1e-9 * c.value.abs().max(1.0));
        }
    }

    #[test]
    fn system_files_roundtrip(sys in linear_system(), extra in prop::collection::vec((0u32..3, 0u32..3, -3.0..3.0f64), 0..4)) {
        let text = sys.to_toml();
        prop_assert_eq!(&parse_system(&text).unwrap(), &sys);
        // a polynomial F over the first two states
        if sys.n() >= 2 {
            let vars = state_names(sys.n());
            let terms = extra.iter().map(|&(p, q, c)| {
                let mut e = vec![0; sys.n()];
                e[0] = p;
                e[1] = q;
                (e, c)
            });
            let f = MultiPoly::from_terms(&vars, terms).unwrap();
            let poly = ObserverForm::new("poly", sys.g().to_vec(), f).unwrap();
            prop_assert_eq!(parse_system(&poly.to_toml()).unwrap(), poly);
        }
    }
}

fn van_de_vusse() -> ObserverForm {
    parse_system(include_str!("../../../scenarios/vanvusse/vanvusse.system.toml")).unwrap()
}

#[test]
fn no_equilibrium_above_the_peak() {
    let r = steady_state(&van_de_vusse(), 1.4, None);
    assert!(matches!(r, Err(seriesinv::Error::NoConvergence { .. })), "{r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulation_reproduces_the_output(roots in prop::collection::vec(-2.0..-0.2f64, 1..=3), g in prop::collection::vec(nonzero(), 3), x0 in prop::collection::vec(-1.0..1.0f64, 3), free in prop::collection::vec(-1.0..1.0f64, 6)) {
        let n = roots.len();
        let sys = stable_system(&roots, g[..n].to_vec());
        let ic = InitialCondition::observer(0.0, x0[..n].to_vec());
        let m = solve_linear_inverse(&sys, Basis::Power, n + 2, n + 2, &ic, &RoleSelection::Auto).unwrap();
        let free = &free[..m.n_free()];
        let (_, u) = m.instantiate(free).unwrap();
        let y = m.output(free).unwrap();
        let res = integrate_forward(&sys, &u, Some(&y), &ic, 1.0, 1e-4, Method::Rk4).unwrap();
        let size = res.y_ref.iter().fold(1e-3f64, |s, v| s.max(v.abs()));
        let end = res.y_sim.len() - 1;
        prop_assert!((res.y_sim[end] - res.y_ref[end]).abs() <= 1e-5 * size);
    }

    // equilibrium outputs of the reactor peak near 1.266
    #[test]
    fn equilibria_are_constant_solutions(y in 0.3..1.25f64) {
        let sys = van_de_vusse();
        let ss = steady_state(&sys, y, None).unwrap();
        let ys = TruncatedSeries::constant(Basis::Power, y, 0);
        let us = TruncatedSeries::constant(Basis::Power, ss.u, 0);
        prop_assert!(scaled_residual(&sys, &ys, &us, 4) <= 1e-9);
        let p = eliminate_states(&sys, &ys, &us, 4).unwrap();
        for (s, x) in p.states.iter().zip(&ss.x) {
            prop_assert!((s.coeff(0) - x).abs() <= 1e-9 * x.abs().max(1.0));
            prop_assert!(s.coeffs()[1..].iter().all(|c| c.abs() <= 1e-12));
        }
    }
}
