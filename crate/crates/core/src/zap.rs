//! Closed-form solution `H = e^{ln z·(−iD)}·P(z, λ)` of `dH = H·η` for
//! perturbed Delaunay potentials.
//!
//! With `D̂ξ = [ξ, −iD]`, the coefficients of `P = Σ_k P_k z^k` come from
//!
//! ```text
//! g₀ = 0,  q₀ = I,
//! (k − D̂) q_k = g_k(0),            q_k := 0 for 1 ≤ k ≤ N,
//! g_{k+1}(z) = (g_k(z) − g_k(0))/z + q_k·η₊(z),
//! ```
//!
//! and `P_k = q_k`. Every `q_k` is kept in grid form: `(k − D̂)⁻¹` divides by
//! `k − δ_q(λ) + δ_p(λ)`, which is analytic only near the unit circle.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::loops::{
    grid_coefficients, grid_rescale_parameter, to_grid, twist_matrix, epsilon, CircleGrid, GridLoop,
    LoopMatrix, Mat3, Weight, WienerNorm,
};
use crate::potentials::{delaunay_matrix, spectral_data, PerturbedPotential, SpectralData};

/// Divisor magnitude below which `k − D̂` counts as singular.
pub const RESONANCE_TOL: f64 = 1e-10;

/// Solves `k·X − [X, h(λ)] = rhs(λ)` pointwise, where `spectral` diagonalizes
/// `h` on the grid.
pub fn ad_solve_grid(k: usize, rhs: &GridLoop, spectral: &SpectralData) -> Result<GridLoop> {
    let kf = k as f64;
    let mut out = Vec::with_capacity(rhs.len());
    for (j, r) in rhs.values().iter().enumerate() {
        let u = spectral.eigenvectors(j);
        let d = spectral.eigenvalues(j);
        let mut x = u.adjoint() * r * u;
        for p in 0..3 {
            for q in 0..3 {
                let div = kf - d[q] + d[p];
                if div.abs() < RESONANCE_TOL {
                    return Err(Error::Resonant { k, divisor: div.abs() });
                }
                x[(p, q)] /= div;
            }
        }
        out.push(u * x * u.adjoint());
    }
    Ok(GridLoop::from_values(out))
}

/// Coefficient-loop front end of [`ad_solve_grid`].
pub fn ad_solve(k: usize, rhs: &LoopMatrix, spectral: &SpectralData, grid: &CircleGrid) -> Result<LoopMatrix> {
    let x = ad_solve_grid(k, &to_grid(rhs, grid), spectral)?;
    Ok(grid_coefficients(&x, grid))
}

/// State of the recursion after `order` steps.
#[derive(Clone, Debug)]
pub struct RecursionState {
    pub order: usize,
    /// `q_0 … q_order` sampled on the grid.
    pub q: Vec<GridLoop>,
    /// `g_0(0) … g_order(0)`.
    pub g_at_zero: Vec<GridLoop>,
    /// `g_1` as a polynomial in `z`, lowest power first.
    pub g_first: Vec<GridLoop>,
    pub resonance_bound: usize,
    /// Smallest `n` with `‖D̂‖/(n+1) + R‖Q̂‖/(n+2) < 1`.
    pub contraction_order: usize,
}

impl RecursionState {
    /// `p_n(z) = Σ_{k ≤ n} q_k z^k` on the grid.
    pub fn partial_sum(&self, n: usize, z: Complex64) -> GridLoop {
        horner(&self.q[..=n.min(self.order)], z)
    }
}

fn horner(coeffs: &[GridLoop], z: Complex64) -> GridLoop {
    let mut acc = coeffs.last().expect("nonempty series").clone();
    for c in coeffs.iter().rev().skip(1) {
        acc = acc.scale(z).add(c);
    }
    acc
}

/// Bound on the operator norms entering the contraction order.
fn contraction_order(pot: &PerturbedPotential, w: &Weight) -> usize {
    let d_hat = 2.0 * delaunay_matrix(pot.spec()).wiener_norm(w);
    let r = pot.radius();
    let q_hat: f64 = pot.perturbation().iter().map(|(&k, c)| c.wiener_norm(w) * r.powi(k as i32)).sum();
    (0usize..)
        .find(|&n| d_hat / (n as f64 + 1.0) + r * q_hat / (n as f64 + 2.0) < 1.0)
        .expect("terms decay to zero")
}

pub fn run_recursion(pot: &PerturbedPotential, k_max: usize, grid: &CircleGrid) -> Result<RecursionState> {
    let spectral = spectral_data(pot.spec(), grid);
    run_recursion_with(pot, k_max, grid, &spectral)
}

fn run_recursion_with(
    pot: &PerturbedPotential,
    k_max: usize,
    grid: &CircleGrid,
    spectral: &SpectralData,
) -> Result<RecursionState> {
    let n = pot.resonance_bound();
    if k_max <= n {
        return Err(Error::InvalidParams(format!("k_max = {k_max} must exceed the resonance bound {n}")));
    }
    let top = pot.max_order();
    // η₊ as a polynomial in z with grid-sampled coefficients
    let eta: Vec<GridLoop> = (0..=top).map(|k| to_grid(&pot.coefficient(k), grid)).collect();
    let zero = GridLoop::zeros(grid);
    let times = |q: &GridLoop| -> Vec<GridLoop> { eta.iter().map(|e| q.mul(e)).collect() };

    let mut q = vec![GridLoop::identity(grid)];
    let mut g_at_zero = vec![zero.clone()];
    let mut g: Vec<GridLoop> = Vec::new();
    let mut g_first = Vec::new();
    for k in 1..=k_max {
        // g_k = (g_{k−1} − g_{k−1}(0))/z + q_{k−1}·η₊
        let mut next: Vec<GridLoop> = g.iter().skip(1).cloned().collect();
        for (i, term) in times(&q[k - 1]).into_iter().enumerate() {
            if i < next.len() {
                next[i] = next[i].add(&term);
            } else {
                next.push(term);
            }
        }
        g = next;
        if k == 1 {
            g_first = g.clone();
        }
        let g0 = g.first().cloned().unwrap_or_else(|| zero.clone());
        let qk = if k <= n { zero.clone() } else { ad_solve_grid(k, &g0, spectral)? };
        g_at_zero.push(g0);
        q.push(qk);
    }
    Ok(RecursionState {
        order: k_max,
        q,
        g_at_zero,
        g_first,
        resonance_bound: n,
        contraction_order: contraction_order(pot, &Weight::default()),
    })
}

/// Ray `{r·e^{iθ} : r ≥ 0}` along which `ln z` jumps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchCut {
    pub angle: f64,
}

impl Default for BranchCut {
    fn default() -> Self {
        BranchCut { angle: PI }
    }
}

impl BranchCut {
    /// Logarithm with argument in `(angle − 2π, angle)`.
    pub fn log(&self, z: Complex64) -> Result<Complex64> {
        if z.norm() == 0.0 {
            return Err(Error::OutOfDomain { z: z.to_string() });
        }
        let rel = (z.arg() - self.angle).rem_euclid(2.0 * PI);
        if rel < 1e-12 || 2.0 * PI - rel < 1e-12 {
            return Err(Error::OnBranchCut { z: z.to_string() });
        }
        Ok(Complex64::new(z.norm().ln(), self.angle - 2.0 * PI + rel))
    }
}

/// `H = e^{ln z(−iD)}·P` with `P` truncated at order `k_max`.
#[derive(Clone, Debug)]
pub struct ZapSolution {
    potential: PerturbedPotential,
    grid: CircleGrid,
    spectral: SpectralData,
    state: RecursionState,
    pub cut: BranchCut,
}

pub fn zap_solve(pot: &PerturbedPotential, k_max: usize, grid: &CircleGrid) -> Result<ZapSolution> {
    let spectral = spectral_data(pot.spec(), grid);
    let state = run_recursion_with(pot, k_max, grid, &spectral)?;
    Ok(ZapSolution { potential: pot.clone(), grid: grid.clone(), spectral, state, cut: BranchCut::default() })
}

impl ZapSolution {
    pub fn with_cut(mut self, cut: BranchCut) -> Self {
        self.cut = cut;
        self
    }

    pub fn potential(&self) -> &PerturbedPotential {
        &self.potential
    }

    pub fn grid(&self) -> &CircleGrid {
        &self.grid
    }

    pub fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    pub fn state(&self) -> &RecursionState {
        &self.state
    }

    /// `P_k` on the grid.
    pub fn coefficient(&self, k: usize) -> &GridLoop {
        &self.state.q[k]
    }

    pub fn k_max(&self) -> usize {
        self.state.order
    }

    fn check_domain(&self, z: Complex64) -> Result<()> {
        if z.norm() == 0.0 || z.norm() >= self.potential.radius() {
            return Err(Error::OutOfDomain { z: z.to_string() });
        }
        Ok(())
    }

    /// `P(z, λ)` on the grid.
    pub fn evaluate_p(&self, z: Complex64) -> Result<GridLoop> {
        self.check_domain(z)?;
        Ok(horner(&self.state.q, z))
    }

    /// `e^{t(−iD)}` on the grid.
    pub fn delaunay_factor(&self, t: Complex64) -> GridLoop {
        self.spectral.exp_scaled(t)
    }

    pub fn evaluate_h(&self, z: Complex64) -> Result<GridLoop> {
        self.check_domain(z)?;
        let log = self.cut.log(z)?;
        Ok(self.delaunay_factor(log).mul(&horner(&self.state.q, z)))
    }

    /// `‖P_{k_max}‖·|z|^{k_max}/(1 − |z|)`, or infinity for `|z| ≥ 1`.
    pub fn tail_estimate(&self, z: Complex64) -> f64 {
        let r = z.norm();
        if r >= 1.0 {
            return f64::INFINITY;
        }
        self.state.q[self.state.order].max_norm() * r.powi(self.state.order as i32) / (1.0 - r)
    }

    /// Per-order defect of the group twist condition for `P`:
    /// `max_λ ‖Σ_{i+j=k} P_i(ελ)·T·P_j(λ)ᵗ − δ_{k0} T‖`.
    pub fn twist_defect_by_order(&self) -> Vec<f64> {
        let t = twist_matrix();
        let shifted: Vec<GridLoop> =
            self.state.q.iter().map(|p| grid_rescale_parameter(p, &self.grid, epsilon())).collect();
        (0..=self.state.order)
            .map(|k| {
                let mut acc = vec![if k == 0 { -t } else { Mat3::zeros() }; self.grid.size()];
                for (i, s) in shifted.iter().enumerate().take(k + 1) {
                    for (a, (x, y)) in acc.iter_mut().zip(s.values().iter().zip(self.state.q[k - i].values())) {
                        *a += x * t * y.transpose();
                    }
                }
                acc.iter().map(|m| m.norm()).fold(0.0, f64::max)
            })
            .collect()
    }
}

pub fn evaluate_h(sol: &ZapSolution, z: Complex64) -> Result<GridLoop> {
    sol.evaluate_h(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loops::{c64, project_to_grade};
    use crate::potentials::DelaunaySpec;
    use std::collections::BTreeMap;

    fn perturbed() -> PerturbedPotential {
        let mut m = Mat3::zeros();
        m[(0, 2)] = c64(1.0, 0.0);
        m[(2, 1)] = c64(1.0, 0.0);
        m[(1, 0)] = c64(0.5, 0.0);
        let pert = BTreeMap::from([(4usize, LoopMatrix::monomial(-1, project_to_grade(&m, 5) * c64(0.01, 0.0)))]);
        PerturbedPotential::new(DelaunaySpec::clifford(), pert, 2.0).unwrap()
    }

    #[test]
    fn diagonal_oracle() {
        let grid = CircleGrid::new(16).unwrap();
        let d = [1.5, 0.25, -1.75];
        let sd = SpectralData::from_generator(&grid, |_| Mat3::from_diagonal(&nalgebra::Vector3::from(d.map(|x| c64(x, 0.0)))));
        let rhs = Mat3::from_fn(|i, j| c64(1.0 + i as f64, j as f64));
        let x = ad_solve_grid(4, &GridLoop::constant(&grid, rhs), &sd).unwrap();
        for p in 0..3 {
            for q in 0..3 {
                let want = rhs[(p, q)] / (4.0 - d[q] + d[p]);
                assert!((x.at(3)[(p, q)] - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn resonance_is_reported() {
        let grid = CircleGrid::new(16).unwrap();
        let sd = SpectralData::from_generator(&grid, |_| Mat3::from_diagonal(&nalgebra::Vector3::new(c64(1.0, 0.0), c64(0.0, 0.0), c64(-1.0, 0.0))));
        let err = ad_solve_grid(2, &GridLoop::identity(&grid).map(|_| Mat3::from_element(c64(1.0, 0.0))), &sd).unwrap_err();
        assert!(matches!(err, Error::Resonant { k: 2, .. }));
    }

    #[test]
    fn forced_zone_is_exactly_zero() {
        let grid = CircleGrid::new(64).unwrap();
        let pot = perturbed();
        let st = run_recursion(&pot, 12, &grid).unwrap();
        for k in 1..=st.resonance_bound {
            assert!(st.q[k].values().iter().all(|m| m.iter().all(|v| *v == c64(0.0, 0.0))));
        }
        let eta = to_grid(&pot.coefficient(4), &grid);
        assert_eq!(st.g_at_zero[4 + 1].max_abs_diff(&eta), 0.0);
        assert_eq!(st.g_first[4].max_abs_diff(&eta), 0.0);
        assert!(st.q[4 + 1].max_norm() > 0.0);
    }

    #[test]
    fn unperturbed_has_trivial_p() {
        let grid = CircleGrid::new(32).unwrap();
        let st = run_recursion(&PerturbedPotential::delaunay(DelaunaySpec::clifford()), 8, &grid).unwrap();
        assert!(st.q.iter().skip(1).all(|q| q.max_norm() == 0.0));
    }

    #[test]
    fn branch_cut() {
        let cut = BranchCut::default();
        assert!(matches!(cut.log(c64(-1.0, 0.0)), Err(Error::OnBranchCut { .. })));
        assert!((cut.log(c64(0.0, 2.0)).unwrap() - c64(2f64.ln(), PI / 2.0)).norm() < 1e-15);
        let up = BranchCut { angle: PI / 2.0 };
        assert!((up.log(c64(-1.0, 0.0)).unwrap() - c64(0.0, -PI)).norm() < 1e-15);
    }

    #[test]
    fn h_at_one_is_p() {
        let grid = CircleGrid::new(64).unwrap();
        let sol = zap_solve(&perturbed(), 16, &grid).unwrap();
        let h = sol.evaluate_h(c64(1.0, 0.0)).unwrap();
        assert!(h.max_abs_diff(&sol.evaluate_p(c64(1.0, 0.0)).unwrap()) < 1e-13);
        assert!(h.det_defect() < 1e-10);
    }

    #[test]
    fn p_is_twisted_order_by_order() {
        let grid = CircleGrid::new(128).unwrap();
        let sol = zap_solve(&perturbed(), 16, &grid).unwrap();
        for (k, d) in sol.twist_defect_by_order().into_iter().enumerate() {
            assert!(d < 1e-12, "order {k}: {d}");
        }
    }
}
