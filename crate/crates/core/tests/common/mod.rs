#![allow(dead_code)]

use std::collections::BTreeMap;

use lagloop_core::loops::{c64, project_to_grade, LoopMatrix, Mat3, Weight, WienerNorm};
use lagloop_core::potentials::{DelaunaySpec, PerturbedPotential};
use rand::Rng;

pub fn unit(i: usize, j: usize) -> Mat3 {
    let mut m = Mat3::zeros();
    m[(i, j)] = c64(1.0, 0.0);
    m
}

/// `λ⁻¹(E₁₃ + E₃₂)` projected to the λ⁻¹ grade, with Wiener norm `scale`.
pub fn minus_one_perturbation(scale: f64) -> LoopMatrix {
    let x = LoopMatrix::monomial(-1, project_to_grade(&(unit(0, 2) + unit(2, 1)), 5));
    let norm = x.wiener_norm(&Weight::default());
    x.scale(c64(scale / norm, 0.0))
}

/// Clifford data plus one perturbation at order `N + 1 = 4`.
pub fn perturbed_clifford(scale: f64, radius: f64) -> PerturbedPotential {
    perturbed_clifford_at(spec_bound(&DelaunaySpec::clifford()) + 1, scale, radius)
}

pub fn perturbed_clifford_at(order: usize, scale: f64, radius: f64) -> PerturbedPotential {
    let spec = DelaunaySpec::clifford();
    PerturbedPotential::new(spec, BTreeMap::from([(order, minus_one_perturbation(scale))]), radius).unwrap()
}

/// `a = i/2`, `b = 1/√2`: `β = 1` and `−iD(1)` has spectrum `{1, 0, −1}`.
pub fn balanced_spec() -> DelaunaySpec {
    DelaunaySpec::new(0.5, c64(0.5f64.sqrt(), 0.0)).unwrap()
}

pub fn perturbed_balanced(scale: f64, radius: f64) -> PerturbedPotential {
    let spec = balanced_spec();
    let n = spec_bound(&spec);
    PerturbedPotential::new(spec, BTreeMap::from([(n, minus_one_perturbation(scale))]), radius).unwrap()
}

pub fn spec_bound(spec: &DelaunaySpec) -> usize {
    lagloop_core::potentials::resonance_bound(spec)
}

pub fn random_mat<R: Rng>(rng: &mut R) -> Mat3 {
    Mat3::from_fn(|_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// Twisted, traceless loop supported in `[lo, hi]` with `‖X‖_ω = norm` for the default weight.
pub fn random_twisted<R: Rng>(rng: &mut R, lo: i32, hi: i32, norm: f64) -> LoopMatrix {
    let x = LoopMatrix::from_terms((lo..=hi).map(|n| (n, project_to_grade(&random_mat(rng), n as i64))));
    let current = x.wiener_norm(&Weight::default());
    x.scale(c64(norm / current, 0.0))
}
