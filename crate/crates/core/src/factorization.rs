//! Iwasawa and Birkhoff splittings of twisted loops.
//!
//! Iwasawa `C = F·V₊`: the positive loop `Q = C*C = V₊*V₊` determines `V₊` up
//! to a constant unitary. Gram–Schmidt of `{λᵏ}` in the `Q`-inner product,
//! processed from high to low powers, leaves `λ⁰` with residual
//! `V₊⁻¹(λ)·V₀ N`, whose coefficients are read off one block column of the
//! inverse Cholesky factor of the reversed block-Toeplitz Gram matrix. That
//! residual is `V₊⁻¹` with `V₀` upper triangular with positive diagonal, which
//! for twisted input is `diag(r, 1/r, 1)`.
//!
//! Birkhoff `C = G₋·G₊`: `X = G₊⁻¹` solves the truncated block system
//! `Σ_k C_{n−k} X_k = δ_{n0} I`, `0 ≤ n, k < M`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::loops::{
    grid_coefficients, invert_plus, to_grid, CircleGrid, GridLoop, LoopMatrix, Mat3,
};

/// Block counts tried in order by the Iwasawa solver.
const IWASAWA_LADDER: [usize; 9] = [16, 24, 32, 48, 64, 96, 128, 192, 256];
/// Unitarity defect at which the Iwasawa ladder stops early.
const IWASAWA_TARGET: f64 = 1e-13;
const BIRKHOFF_LADDER: [usize; 4] = [16, 32, 64, 128];
/// Condition number beyond which a loop is treated as outside the big cell.
pub const BIG_CELL_CONDITION_LIMIT: f64 = 1e12;
const SINGULAR_DET: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct IwasawaResult {
    pub unitary_part: LoopMatrix,
    pub plus_part: LoopMatrix,
    pub residual: f64,
}

/// Iwasawa factors kept in sampled form.
#[derive(Clone, Debug)]
pub struct GridIwasawa {
    pub unitary: GridLoop,
    pub plus: GridLoop,
    /// Constant coefficient of the positive factor.
    pub plus_constant: Mat3,
    /// Unitarity defect of the unitary factor on the grid.
    pub residual: f64,
    pub blocks: usize,
}

#[derive(Clone, Debug)]
pub struct BirkhoffResult {
    pub minus_part: LoopMatrix,
    pub plus_part: LoopMatrix,
    pub in_big_cell: bool,
    pub conditioning: f64,
}

fn put_block(t: &mut DMatrix<Complex64>, bi: usize, bj: usize, m: &Mat3) {
    for i in 0..3 {
        for j in 0..3 {
            t[(3 * bi + i, 3 * bj + j)] = m[(i, j)];
        }
    }
}

fn get_block(v: &DMatrix<Complex64>, bi: usize, bj: usize) -> Mat3 {
    Mat3::from_fn(|i, j| v[(3 * bi + i, 3 * bj + j)])
}

/// One Iwasawa attempt with `blocks` Toeplitz blocks. Returns samples of
/// `V₊⁻¹` and its constant coefficient `V₀⁻¹`.
fn inverse_plus_factor(
    q: &LoopMatrix,
    grid: &CircleGrid,
    blocks: usize,
) -> Option<(GridLoop, Mat3)> {
    let n = 3 * blocks;
    // Reversed ordering: block j carries λ^{blocks−1−j}, so block (j, j')
    // of the Gram matrix is Q_{j'−j}.
    let mut gram = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..blocks {
        for jp in 0..blocks {
            let d = jp as i32 - j as i32;
            let block = if d >= 0 { q.coeff(d) } else { q.coeff(-d).adjoint() };
            put_block(&mut gram, j, jp, &block);
        }
    }
    let chol = gram.cholesky()?;
    let l = chol.l();
    let mut rhs = DMatrix::<Complex64>::zeros(n, 3);
    for i in 0..3 {
        rhs[(n - 3 + i, i)] = Complex64::new(1.0, 0.0);
    }
    let col = l.adjoint().solve_upper_triangular(&rhs)?;
    let coeffs: Vec<Mat3> = (0..blocks)
        .map(|p| {
            // coefficient of λ^p sits in reversed block blocks−1−p
            let j = blocks - 1 - p;
            Mat3::from_fn(|i, k| col[(3 * j + i, k)])
        })
        .collect();
    let constant = coeffs[0];
    Some((to_grid(&LoopMatrix::from_coeffs(0, coeffs), grid), constant))
}

/// `Q = C*C` as a coefficient loop.
fn gram_symbol(c: &GridLoop, grid: &CircleGrid) -> LoopMatrix {
    let q = c.map(|v| {
        let h = v.adjoint() * v;
        (h + h.adjoint()) * Complex64::new(0.5, 0.0)
    });
    grid_coefficients(&q, grid)
}

/// Iwasawa splitting of a sampled loop.
pub fn iwasawa_grid(c: &GridLoop, grid: &CircleGrid, tol: f64) -> Result<GridIwasawa> {
    let min_det = c.min_abs_det();
    if !(min_det > SINGULAR_DET) {
        return Err(Error::SingularInput { min_det });
    }
    let q = gram_symbol(c, grid);
    let mut best: Option<GridIwasawa> = None;
    let max_blocks = grid.size() / 2;
    for &blocks in IWASAWA_LADDER.iter().filter(|&&b| b <= max_blocks) {
        let Some((inv_plus, inv_const)) = inverse_plus_factor(&q, grid, blocks) else {
            continue;
        };
        let unitary = c.mul(&inv_plus);
        let residual = unitary.unitary_defect();
        let stalled = best.as_ref().is_some_and(|b| residual > 0.5 * b.residual);
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            let plus = inv_plus.inverse()?;
            let plus_constant = inv_const.try_inverse().ok_or(Error::SingularInput { min_det })?;
            best = Some(GridIwasawa { unitary, plus, plus_constant, residual, blocks });
        }
        if residual <= IWASAWA_TARGET || (stalled && best.as_ref().is_some_and(|b| b.residual <= tol)) {
            break;
        }
    }
    match best {
        Some(b) if b.residual <= tol => Ok(b),
        Some(b) => Err(Error::NoConvergence { residual: b.residual, blocks: b.blocks }),
        None => Err(Error::NoConvergence { residual: f64::INFINITY, blocks: 0 }),
    }
}

/// Iwasawa splitting `C = F·V₊` of a coefficient loop.
///
/// The returned `residual` bounds both the unitarity defect of `F` on the grid
/// and the largest coefficient of `F·V₊ − C`.
pub fn iwasawa(c: &LoopMatrix, grid: &CircleGrid, tol: f64) -> Result<IwasawaResult> {
    let samples = to_grid(c, grid);
    let split = iwasawa_grid(&samples, grid, tol)?;
    let unitary_part = grid_coefficients(&split.unitary, grid).trimmed(1e-16);
    let plus_full = grid_coefficients(&split.plus, grid);
    let plus_part = plus_full.window(0, plus_full.hi()).trimmed(1e-16);
    let recon = unitary_part.mul(&plus_part).max_abs_diff(c);
    let negative_mass = plus_full.window(plus_full.lo(), -1).coeffs().iter().map(|m| m.norm()).fold(0.0, f64::max);
    let residual = split.residual.max(recon).max(negative_mass);
    if residual > tol {
        return Err(Error::NoConvergence { residual, blocks: split.blocks });
    }
    Ok(IwasawaResult { unitary_part, plus_part, residual })
}

fn condition_number(a: &DMatrix<Complex64>) -> f64 {
    let sv = a.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Birkhoff splitting `C = G₋·G₊` with `G₋(∞) = I`.
pub fn birkhoff(c: &LoopMatrix, tol: f64) -> Result<BirkhoffResult> {
    let mut last: Option<(BirkhoffResult, f64)> = None;
    for &blocks in &BIRKHOFF_LADDER {
        let n = 3 * blocks;
        let mut sys = DMatrix::<Complex64>::zeros(n, n);
        for r in 0..blocks {
            for k in 0..blocks {
                put_block(&mut sys, r, k, &c.coeff(r as i32 - k as i32));
            }
        }
        let conditioning = condition_number(&sys);
        if !(conditioning < BIG_CELL_CONDITION_LIMIT) {
            return Err(Error::OutsideBigCell { conditioning });
        }
        let mut rhs = DVector::<Complex64>::zeros(n);
        let mut sol = DMatrix::<Complex64>::zeros(n, 3);
        let lu = sys.lu();
        for col in 0..3 {
            rhs.fill(Complex64::new(0.0, 0.0));
            rhs[col] = Complex64::new(1.0, 0.0);
            let x = lu.solve(&rhs).ok_or(Error::OutsideBigCell { conditioning })?;
            sol.set_column(col, &x);
        }
        let x_coeffs: Vec<Mat3> = (0..blocks).map(|k| get_block(&sol, k, 0)).collect();
        let x = LoopMatrix::from_coeffs(0, x_coeffs);
        let tail = x.window((3 * blocks / 4) as i32, blocks as i32 - 1).coeffs().iter().map(|m| m.norm()).fold(0.0, f64::max);
        let minus = c.mul(&x).window(c.lo().min(0), 0).trimmed(1e-16);
        let plus = invert_plus(&x, blocks - 1)?.trimmed(1e-16);
        let result = BirkhoffResult { minus_part: minus, plus_part: plus, in_big_cell: true, conditioning };
        if tail <= tol * 1e-3 {
            return Ok(result);
        }
        last = Some((result, tail));
    }
    match last {
        Some((r, tail)) if tail <= tol => Ok(r),
        Some((_, tail)) => Err(Error::NoConvergence { residual: tail, blocks: *BIRKHOFF_LADDER.last().unwrap() }),
        None => unreachable!("ladder is nonempty"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loops::{c64, grid_twist_defect_group, project_to_grade, DEFAULT_ALGEBRAIC_TOL};

    fn e(i: usize, j: usize) -> Mat3 {
        let mut m = Mat3::zeros();
        m[(i, j)] = c64(1.0, 0.0);
        m
    }

    #[test]
    fn constant_borel_element_is_all_plus() {
        let grid = CircleGrid::default();
        let c = Mat3::from_diagonal(&nalgebra::Vector3::new(c64(2.0, 0.0), c64(0.5, 0.0), c64(1.0, 0.0)));
        let r = iwasawa(&LoopMatrix::constant(c), &grid, 1e-10).unwrap();
        assert!(r.unitary_part.max_abs_diff(&LoopMatrix::identity()) < 1e-10);
        assert!(r.plus_part.max_abs_diff(&LoopMatrix::constant(c)) < 1e-10);
    }

    #[test]
    fn plus_constant_is_normalized_for_twisted_input() {
        let grid = CircleGrid::default();
        let x = LoopMatrix::from_terms([
            (-1, project_to_grade(&(e(0, 2) + e(2, 1) * c64(0.3, 0.1)), 5) * c64(0.4, 0.0)),
            (1, project_to_grade(&(e(0, 1) * c64(0.2, -0.3)), 1)),
            (0, project_to_grade(&(e(0, 0) * c64(0.1, 0.2)), 0)),
        ]);
        let c = to_grid(&x, &grid).exp();
        let r = iwasawa_grid(&c, &grid, 1e-10).unwrap();
        let v0 = r.plus_constant;
        let rr = v0[(0, 0)].re;
        assert!(rr > 0.0);
        let expect = Mat3::from_diagonal(&nalgebra::Vector3::new(c64(rr, 0.0), c64(1.0 / rr, 0.0), c64(1.0, 0.0)));
        assert!((v0 - expect).norm() < 1e-10, "{v0}");
        assert!(grid_twist_defect_group(&r.unitary, &grid) < 1e-10);
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn birkhoff_of_identity() {
        let r = birkhoff(&LoopMatrix::identity(), DEFAULT_ALGEBRAIC_TOL).unwrap();
        assert!(r.minus_part.max_abs_diff(&LoopMatrix::identity()) < 1e-14);
        assert!(r.plus_part.max_abs_diff(&LoopMatrix::identity()) < 1e-14);
    }

    #[test]
    fn birkhoff_of_minus_loop() {
        let c = LoopMatrix::from_terms([(0, Mat3::identity()), (-1, e(1, 0) * c64(0.7, 0.2))]);
        let r = birkhoff(&c, DEFAULT_ALGEBRAIC_TOL).unwrap();
        assert!(r.minus_part.max_abs_diff(&c) < 1e-13);
        assert!(r.plus_part.max_abs_diff(&LoopMatrix::identity()) < 1e-13);
    }

    #[test]
    fn small_cell_is_reported() {
        // λ^{-1}E₁₃ + λE₃₁ + E₂₂ lies outside the big cell.
        let c = LoopMatrix::from_terms([(-1, e(0, 2)), (1, e(2, 0)), (0, e(1, 1))]);
        assert!(matches!(birkhoff(&c, 1e-10), Err(Error::OutsideBigCell { .. })));
    }

    #[test]
    fn singular_input_rejected() {
        let grid = CircleGrid::new(64).unwrap();
        assert!(matches!(
            iwasawa(&LoopMatrix::constant(e(0, 0)), &grid, 1e-10),
            Err(Error::SingularInput { .. })
        ));
    }
}
