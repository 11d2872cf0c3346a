#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seriesinv::cli::Scenario;
use seriesinv::lininv::InverseModel;
use seriesinv::model::{LinearForm, ObserverForm};
use seriesinv::param::{eliminate_states, residual_scale};
use seriesinv::series::{Basis, TruncatedSeries};

pub fn scenario_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(rel)
}

pub fn scenario(rel: &str) -> Scenario {
    Scenario::load(&scenario_path(rel)).expect("bundled scenario loads")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Value in `±[lo, hi]`.
pub fn signed(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    let v = rng.random_range(lo..hi);
    if rng.random_bool(0.5) { v } else { -v }
}

/// Linear system with `n` states; the input enters first at state `r + 1`
/// and in every state after it.
pub fn random_linear(rng: &mut impl Rng, n: usize, r: usize) -> ObserverForm {
    let g = (0..n).map(|i| if i < r { 0.0 } else { signed(rng, 0.2, 2.0) }).collect();
    let q = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    LinearForm { g, q }.to_observer_form("random").unwrap()
}

/// Largest residual coefficient relative to its majorant.
pub fn scaled_residual(sys: &ObserverForm, y: &TruncatedSeries, u: &TruncatedSeries, trunc: usize) -> f64 {
    let r = eliminate_states(sys, y, u, trunc).unwrap().residual;
    let s = residual_scale(sys, y, u, trunc).unwrap();
    r.coeffs()
        .iter()
        .zip(s.coeffs())
        .map(|(r, s)| r.abs() / s.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Scaled residual of an instantiated linear inverse model.
pub fn model_residual(sys: &ObserverForm, m: &InverseModel, free: &[f64]) -> f64 {
    let (_, u) = m.instantiate(free).unwrap();
    scaled_residual(sys, &m.output(free).unwrap(), &u, m.trunc)
}

pub fn random_basis(rng: &mut impl Rng) -> Basis {
    if rng.random_bool(0.5) {
        Basis::Power
    } else {
        Basis::Exponential {
            rate: rng.random_range(0.5..2.0),
        }
    }
}
