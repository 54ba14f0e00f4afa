mod common;

use lagloop_core::export::write_csv;
use lagloop_core::loops::{c64, to_grid, CircleGrid, GridLoop, LoopMatrix};
use lagloop_core::ode::{integrate_ode, integrate_ode_grid, OdeOptions};
use lagloop_core::pipeline::{
    build_frames, closing_scalar, delaunay_reference_frame, extract_geometry, monodromy, AnnulusGrid, PipelineOptions,
};
use lagloop_core::potentials::{delaunay_matrix, ConstantPotential, DelaunaySpec, PerturbedPotential};
use lagloop_core::zap::zap_solve;

#[test]
fn clifford_frames_on_annulus_are_unitary() {
    let pot = PerturbedPotential::delaunay(DelaunaySpec::clifford());
    let zgrid = AnnulusGrid::new(0.1, 1.0, 6, 8).unwrap();
    let field = build_frames(&pot, &zgrid, &CircleGrid::default(), PipelineOptions::default()).unwrap();
    assert!(field.unitary_defect() < 1e-8);
    assert!(field.det_defect() < 1e-10);
}

#[test]
fn double_turn_gives_squared_monodromy() {
    let grid = CircleGrid::new(128).unwrap();
    let sol = zap_solve(&common::perturbed_clifford(0.01, 2.0), 24, &grid).unwrap();
    let z0 = c64(0.5, 0.2);
    let opts = OdeOptions::default();
    let once = monodromy(&sol, z0, 1, &opts).unwrap();
    let twice = monodromy(&sol, z0, 2, &opts).unwrap();
    assert!(twice.chi.max_abs_diff(&once.chi.mul(&once.chi)) < 1e-7);
    assert!(once.unitary_defect < 1e-8);
    assert!(once.is_closed && !once.cubic_root_flag);
}

#[test]
fn cubic_roots_are_flagged() {
    let w = num_complex::Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let c = closing_scalar(&(lagloop_core::loops::Mat3::identity() * w), 1e-8).unwrap();
    assert!((c - w).norm() < 1e-15);
}

#[test]
fn zero_perturbation_gives_pure_exponential() {
    let grid = CircleGrid::new(64).unwrap();
    let spec = DelaunaySpec::new(0.7, c64(0.3, 0.5)).unwrap();
    let sol = zap_solve(&PerturbedPotential::delaunay(spec), 12, &grid).unwrap();
    let z = c64(0.3, -0.4);
    let h = sol.evaluate_h(z).unwrap();
    let e = to_grid(&delaunay_matrix(&spec).scale(c64(0.0, -1.0) * z.ln()), &grid).exp();
    assert!(h.max_abs_diff(&e) < 1e-12 * e.max_norm());
}

#[test]
fn reference_frame_is_unitary_for_small_z() {
    let psi = delaunay_reference_frame(&DelaunaySpec::clifford(), c64(1e-3, 1e-3), &CircleGrid::default()).unwrap();
    assert!(psi.unitary_defect() < 1e-9);
}

#[test]
fn reversed_path_composes_to_identity() {
    let grid = CircleGrid::new(64).unwrap();
    let pot = common::perturbed_clifford(0.05, 1.5);
    let path = [c64(1.0, 0.0), c64(0.4, 0.6), c64(-0.2, 0.5)];
    let rev: Vec<_> = path.iter().rev().cloned().collect();
    let id = GridLoop::identity(&grid);
    let there = integrate_ode_grid(&pot, &path, &id, &grid, &OdeOptions::default()).unwrap();
    let back = integrate_ode_grid(&pot, &rev, &there, &grid, &OdeOptions::default()).unwrap();
    assert!(back.max_abs_diff(&id) < 1e-9);
}

#[test]
fn translational_potential_matches_matrix_exponential() {
    let grid = CircleGrid::new(64).unwrap();
    let d = delaunay_matrix(&DelaunaySpec::clifford());
    let w = c64(0.8, 0.3);
    let c = integrate_ode(&ConstantPotential(d.clone()), &[c64(0.0, 0.0), w], &LoopMatrix::identity(), &grid).unwrap();
    let want = to_grid(&d.scale(w), &grid).exp();
    assert!(to_grid(&c, &grid).max_abs_diff(&want) < 1e-9);
}

#[test]
fn csv_export_is_deterministic() {
    let pot = common::perturbed_clifford(0.01, 2.0);
    let zgrid = AnnulusGrid::new(0.2, 0.8, 3, 4).unwrap();
    let run = || {
        let mut f = build_frames(&pot, &zgrid, &CircleGrid::new(128).unwrap(), PipelineOptions::default()).unwrap();
        extract_geometry(&mut f).unwrap();
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        buf
    };
    assert_eq!(run(), run());
}
