//! Delaunay matrices, their spectra, and perturbed Delaunay potentials.
//!
//! The Delaunay matrix for parameters `a ∈ iℝ₊`, `b ∈ ℂ∖{0}` is
//!
//! ```text
//!          ⎡   0      −λ b̄    λ⁻¹a ⎤
//! D(λ)  =  ⎢ λ⁻¹b      0     −λ ā  ⎥
//!          ⎣ −λ ā    λ⁻¹a      0   ⎦
//! ```
//!
//! a degree-one twisted `su(3)` loop. `−iD(λ)` is hermitian on the circle with
//! characteristic polynomial `ν³ − βν + 2Re(λ⁻³ψ)`, `β = 2|a|² + |b|²`,
//! `ψ = −i b a²`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loops::{
    c64, is_twisted, to_grid, CircleGrid, GridLoop, LoopMatrix, Mat3, DEFAULT_TWIST_TOL,
};

/// Eigenvalue gap below which a spectrum is reported as degenerate.
pub const DEGENERATE_GAP: f64 = 1e-8;
pub const DEFAULT_INTEGER_TOL: f64 = 1e-9;
pub const DENOMINATOR_CAP: i64 = 10_000;
pub const DEFAULT_KMAX: usize = 24;
pub const DEFAULT_RADIUS: f64 = 2.0;
const RESONANCE_SLACK: f64 = 1e-9;

/// Parameters `(a, b)` of a Delaunay matrix, with `a = i·a_im`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelaunaySpec {
    a_im: f64,
    b: Complex64,
}

impl DelaunaySpec {
    pub fn new(a_im: f64, b: Complex64) -> Result<Self> {
        if !(a_im > 0.0 && a_im.is_finite()) {
            return Err(Error::InvalidParams(format!("need −ia > 0, got −ia = {a_im}")));
        }
        if !(b.norm() > 0.0) || !b.re.is_finite() || !b.im.is_finite() {
            return Err(Error::InvalidParams(format!("need b ≠ 0, got {b}")));
        }
        Ok(DelaunaySpec { a_im, b })
    }

    /// The flat torus data `a = b = i`.
    pub fn clifford() -> Self {
        DelaunaySpec { a_im: 1.0, b: c64(0.0, 1.0) }
    }

    pub fn a_im(&self) -> f64 {
        self.a_im
    }

    pub fn a(&self) -> Complex64 {
        c64(0.0, self.a_im)
    }

    pub fn b(&self) -> Complex64 {
        self.b
    }

    /// Cubic-form constant `ψ`, determined by `b = iψ/a²`.
    pub fn psi(&self) -> Complex64 {
        self.b * self.a() * self.a() / c64(0.0, 1.0)
    }

    pub fn beta(&self) -> f64 {
        2.0 * self.a_im * self.a_im + self.b.norm_sqr()
    }

    /// Supremum over the unit circle of `δ₁ − δ₃`.
    ///
    /// `Re(λ⁻³ψ)` vanishes somewhere on the circle, where the roots are
    /// `±√β, 0`; elsewhere the spread is smaller.
    pub fn spread_supremum(&self) -> f64 {
        2.0 * self.beta().sqrt()
    }

    /// Coefficients `(λ⁻¹, λ)` of `D`.
    fn parts(&self) -> (Mat3, Mat3) {
        let z = c64(0.0, 0.0);
        let a = self.a();
        let b = self.b;
        let minus = Mat3::new(z, z, a, b, z, z, z, a, z);
        let plus = Mat3::new(z, -b.conj(), z, z, z, -a.conj(), -a.conj(), z, z);
        (minus, plus)
    }

    pub fn eval(&self, lambda: Complex64) -> Mat3 {
        let (m, p) = self.parts();
        m / lambda + p * lambda
    }

    /// `−iD(λ)`, hermitian for `|λ| = 1`.
    pub fn hermitian_generator(&self, lambda: Complex64) -> Mat3 {
        self.eval(lambda) * c64(0.0, -1.0)
    }
}

pub fn delaunay_matrix(spec: &DelaunaySpec) -> LoopMatrix {
    let (m, p) = spec.parts();
    LoopMatrix::from_coeffs(-1, vec![m, Mat3::zeros(), p])
}

/// Coefficients `(c₂, c₁, c₀)` of `det(μI − M) = μ³ + c₂μ² + c₁μ + c₀`.
pub fn char_poly_coefficients(m: &Mat3) -> [Complex64; 3] {
    let minor = |i: usize, j: usize| m[(i, i)] * m[(j, j)] - m[(i, j)] * m[(j, i)];
    [-m.trace(), minor(0, 1) + minor(0, 2) + minor(1, 2), -m.determinant()]
}

/// Largest coefficientwise deviation of `det(μI − D(λ))` from
/// `μ³ + βμ − 2i·Re(λ⁻³ψ)` over the grid.
pub fn char_poly_defect(spec: &DelaunaySpec, grid: &CircleGrid) -> f64 {
    let beta = spec.beta();
    let psi = spec.psi();
    grid.points()
        .iter()
        .map(|&l| {
            let got = char_poly_coefficients(&spec.eval(l));
            let want = [c64(0.0, 0.0), c64(beta, 0.0), c64(0.0, -2.0 * (psi / l.powi(3)).re)];
            got.iter().zip(&want).map(|(g, w)| (g - w).norm()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

pub fn char_poly_check(spec: &DelaunaySpec, grid: &CircleGrid, tol: f64) -> bool {
    char_poly_defect(spec, grid) <= tol
}

/// Hermitian eigendecomposition of a generator sampled on the circle.
#[derive(Clone, Debug)]
pub struct SpectralData {
    /// `δ₁ ≥ δ₂ ≥ δ₃` per grid point.
    eigenvalues: Vec<[f64; 3]>,
    /// Orthonormal eigenvectors as columns, in eigenvalue order.
    eigenvectors: Vec<Mat3>,
    pub max_spread: f64,
    pub min_gap: f64,
    pub degenerate: bool,
}

fn normalize_phase(u: &mut Mat3) {
    for j in 0..3 {
        let mut col = u.column(j).clone_owned();
        let mut pivot = 0;
        for i in 1..3 {
            if col[i].norm() > col[pivot].norm() + 1e-12 {
                pivot = i;
            }
        }
        let phase = col[pivot] / col[pivot].norm();
        col /= phase;
        u.set_column(j, &col);
    }
}

/// Sorted eigenpairs of a hermitian 3×3 matrix.
pub fn hermitian_eigen(h: &Mat3) -> ([f64; 3], Mat3) {
    let sym = (h + h.adjoint()) * c64(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let vals = order.map(|i| eig.eigenvalues[i]);
    let mut u = Mat3::from_fn(|r, c| eig.eigenvectors[(r, order[c])]);
    normalize_phase(&mut u);
    (vals, u)
}

impl SpectralData {
    /// Eigendata of the hermitian generator `λ ↦ h(λ)` on the grid.
    pub fn from_generator<F: Fn(Complex64) -> Mat3>(grid: &CircleGrid, h: F) -> Self {
        let (eigenvalues, eigenvectors): (Vec<_>, Vec<_>) =
            grid.points().iter().map(|&l| hermitian_eigen(&h(l))).unzip();
        let max_spread = eigenvalues.iter().map(|d| d[0] - d[2]).fold(0.0, f64::max);
        let min_gap = eigenvalues.iter().map(|d| (d[0] - d[1]).min(d[1] - d[2])).fold(f64::INFINITY, f64::min);
        SpectralData { eigenvalues, eigenvectors, max_spread, min_gap, degenerate: min_gap < DEGENERATE_GAP }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self, j: usize) -> [f64; 3] {
        self.eigenvalues[j]
    }

    pub fn eigenvectors(&self, j: usize) -> &Mat3 {
        &self.eigenvectors[j]
    }

    /// Hermitian projection `L_p(λ_j)` onto the `p`-th eigenline.
    pub fn projection(&self, j: usize, p: usize) -> Mat3 {
        let v = self.eigenvectors[j].column(p).clone_owned();
        v * v.adjoint()
    }

    /// `exp(t·h(λ)) = Σ_p e^{tδ_p} L_p` on the grid.
    pub fn exp_scaled(&self, t: Complex64) -> GridLoop {
        GridLoop::from_values(
            self.eigenvalues
                .iter()
                .zip(&self.eigenvectors)
                .map(|(d, u)| {
                    let diag = Mat3::from_diagonal(&nalgebra::Vector3::from_fn(|p, _| (t * d[p]).exp()));
                    u * diag * u.adjoint()
                })
                .collect(),
        )
    }

    /// Reassembles `Σ_p δ_p L_p` on the grid.
    pub fn generator(&self) -> GridLoop {
        self.exp_map(|d| c64(d, 0.0))
    }

    /// `Σ_p f(δ_p) L_p` on the grid.
    pub fn exp_map<F: Fn(f64) -> Complex64>(&self, f: F) -> GridLoop {
        GridLoop::from_values(
            self.eigenvalues
                .iter()
                .zip(&self.eigenvectors)
                .map(|(d, u)| {
                    let diag = Mat3::from_diagonal(&nalgebra::Vector3::from_fn(|p, _| f(d[p])));
                    u * diag * u.adjoint()
                })
                .collect(),
        )
    }
}

/// Eigendata of `−iD(λ)`.
pub fn spectral_data(spec: &DelaunaySpec, grid: &CircleGrid) -> SpectralData {
    SpectralData::from_generator(grid, |l| spec.hermitian_generator(l))
}

/// Spectrum of `−iD(1)`, descending.
pub fn spectrum_at_one(spec: &DelaunaySpec) -> [f64; 3] {
    hermitian_eigen(&spec.hermitian_generator(c64(1.0, 0.0))).0
}

/// Smallest `N ≥ 1` with no integer `j > N` among the differences `δ_p − δ_q`
/// anywhere on the circle.
pub fn resonance_bound(spec: &DelaunaySpec) -> usize {
    ((spec.spread_supremum() + RESONANCE_SLACK).floor() as usize).max(1)
}

pub fn is_star_delaunay(spec: &DelaunaySpec, tol: f64) -> bool {
    spectrum_at_one(spec).iter().all(|d| (d - d.round()).abs() <= tol)
}

/// Best rational approximation `p/q` with `q ≤ cap` and `|x − p/q| ≤ tol`.
pub fn rational_approximation(x: f64, tol: f64, cap: i64) -> Option<(i64, i64)> {
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            return None;
        }
        let a = a as i64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > cap {
            return None;
        }
        if (x - h2 as f64 / k2 as f64).abs() <= tol {
            return Some((h2, k2));
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a as f64;
        if frac == 0.0 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Closing period of the equivariant cylinder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Period {
    /// Smallest `p > 0` with `p·δ_j(1) ∈ 2πℤ` for all `j`.
    pub p: f64,
    /// `k_j = p·δ_j(1)/2π`, coprime.
    pub k: [i64; 3],
}

pub fn period_check(spec: &DelaunaySpec, tol: f64) -> Option<Period> {
    let d = spectrum_at_one(spec);
    let r = (0..3).max_by(|&i, &j| d[i].abs().partial_cmp(&d[j].abs()).unwrap())?;
    let mut fracs = [(0i64, 1i64); 3];
    for j in 0..3 {
        fracs[j] = rational_approximation(d[j] / d[r], tol, DENOMINATOR_CAP)?;
    }
    let lcm = fracs.iter().fold(1i64, |acc, &(_, q)| acc / gcd(acc, q) * q);
    let mut l = fracs.map(|(p, q)| p * (lcm / q));
    let g = l.iter().fold(0i64, |acc, &x| gcd(acc, x));
    for x in &mut l {
        *x /= g;
    }
    let scale = d[r] / l[r] as f64;
    let (scale, l) = if scale < 0.0 { (-scale, l.map(|x| -x)) } else { (scale, l) };
    Some(Period { p: 2.0 * PI / scale, k: l })
}

/// `η = −iD(λ)/z dz + Σ_k η̊₊,ₖ(λ) z^k dz` with `η̊₊,ₖ` supported on
/// `λ`-indices `≥ −1` and `k ≥ N`.
#[derive(Clone, Debug)]
pub struct PerturbedPotential {
    spec: DelaunaySpec,
    resonance_bound: usize,
    perturbation: BTreeMap<usize, LoopMatrix>,
    radius: f64,
}

impl PerturbedPotential {
    pub fn delaunay(spec: DelaunaySpec) -> Self {
        PerturbedPotential {
            spec,
            resonance_bound: resonance_bound(&spec),
            perturbation: BTreeMap::new(),
            radius: DEFAULT_RADIUS,
        }
    }

    /// Validated perturbed potential on the disk of the given radius.
    pub fn new(spec: DelaunaySpec, perturbation: BTreeMap<usize, LoopMatrix>, radius: f64) -> Result<Self> {
        let n = resonance_bound(&spec);
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParams(format!("radius must be positive, got {radius}")));
        }
        for (&k, c) in &perturbation {
            if k < n {
                return Err(Error::InvalidParams(format!(
                    "perturbation order {k} is below the resonance bound {n}"
                )));
            }
            if c.lo() < -1 && c.window(c.lo(), -2).trimmed(0.0).coeffs().iter().any(|m| m.norm() > 0.0) {
                return Err(Error::InvalidParams(format!("perturbation order {k} has λ-powers below −1")));
            }
            if !is_twisted(c, DEFAULT_TWIST_TOL) {
                return Err(Error::InvalidParams(format!("perturbation order {k} is not twisted")));
            }
            if c.coeffs().iter().any(|m| m.trace().norm() > DEFAULT_TWIST_TOL) {
                return Err(Error::InvalidParams(format!("perturbation order {k} is not traceless")));
            }
        }
        let pot = PerturbedPotential { spec, resonance_bound: n, perturbation, radius };
        if !pot.immersion_condition() {
            return Err(Error::InvalidParams(format!(
                "the λ⁻¹ (1,3) entry of the potential may vanish on the disk of radius {radius}"
            )));
        }
        Ok(pot)
    }

    pub fn spec(&self) -> &DelaunaySpec {
        &self.spec
    }

    pub fn resonance_bound(&self) -> usize {
        self.resonance_bound
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn perturbation(&self) -> &BTreeMap<usize, LoopMatrix> {
        &self.perturbation
    }

    /// `η̊₊,ₖ`, zero when absent.
    pub fn coefficient(&self, k: usize) -> LoopMatrix {
        self.perturbation.get(&k).cloned().unwrap_or_else(LoopMatrix::zero)
    }

    pub fn max_order(&self) -> usize {
        self.perturbation.keys().next_back().copied().unwrap_or(0)
    }

    pub fn is_unperturbed(&self) -> bool {
        self.perturbation.values().all(|c| c.coeffs().iter().all(|m| m.norm() == 0.0))
    }

    /// Sufficient condition that `z·(λ⁻¹ part of η)₁₃ = a_im·(−i·i) + Σ c_k z^{k+1}`
    /// stays away from zero on the closed disk.
    pub fn immersion_condition(&self) -> bool {
        let bound: f64 = self
            .perturbation
            .iter()
            .map(|(&k, c)| c.coeff(-1)[(0, 2)].norm() * self.radius.powi(k as i32 + 1))
            .sum();
        bound < self.spec.a_im
    }

    /// The same potential scaled in the perturbation by `t`.
    pub fn scale_perturbation(&self, t: f64) -> Result<Self> {
        let pert = self.perturbation.iter().map(|(&k, c)| (k, c.scale(c64(t, 0.0)))).collect();
        PerturbedPotential::new(self.spec, pert, self.radius)
    }

    /// Pullback under `z ↦ e^{is}z`: `η̊₊,ₖ ↦ e^{is(k+1)} η̊₊,ₖ`.
    pub fn rotate(&self, s: f64) -> Self {
        let perturbation = self
            .perturbation
            .iter()
            .map(|(&k, c)| (k, c.scale(Complex64::from_polar(1.0, s * (k as f64 + 1.0)))))
            .collect();
        PerturbedPotential { perturbation, ..self.clone() }
    }

    /// `η₊(z) = Σ_k η̊₊,ₖ z^k` as a coefficient loop.
    pub fn regular_part(&self, z: Complex64) -> LoopMatrix {
        self.perturbation
            .iter()
            .fold(LoopMatrix::zero(), |acc, (&k, c)| &acc + &c.scale(z.powi(k as i32)))
    }
}

pub fn rotate_potential(pot: &PerturbedPotential, s: f64) -> PerturbedPotential {
    pot.rotate(s)
}

/// Disk domain of a holomorphic potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub radius: f64,
    pub punctured: bool,
}

/// A λ-family `z ↦ Σ_{j ≥ −1} λ^j η_j(z)` of `(1,0)`-forms.
pub trait HolomorphicPotential: Sync {
    /// Coefficient of `dz` at `z`.
    fn coefficients(&self, z: Complex64) -> Result<LoopMatrix>;

    fn domain(&self) -> Domain;

    fn sample(&self, z: Complex64, grid: &CircleGrid) -> Result<GridLoop> {
        Ok(to_grid(&self.coefficients(z)?, grid))
    }
}

impl HolomorphicPotential for PerturbedPotential {
    fn coefficients(&self, z: Complex64) -> Result<LoopMatrix> {
        if z.norm() == 0.0 {
            return Err(Error::PoleOnPath { pole: "0".into() });
        }
        let singular = delaunay_matrix(&self.spec).scale(c64(0.0, -1.0) / z);
        Ok(&singular + &self.regular_part(z))
    }

    fn domain(&self) -> Domain {
        Domain { radius: self.radius, punctured: true }
    }
}

/// A `z`-independent potential `X(λ) dz` on the whole plane.
#[derive(Clone, Debug)]
pub struct ConstantPotential(pub LoopMatrix);

impl HolomorphicPotential for ConstantPotential {
    fn coefficients(&self, _z: Complex64) -> Result<LoopMatrix> {
        Ok(self.0.clone())
    }

    fn domain(&self) -> Domain {
        Domain { radius: f64::INFINITY, punctured: false }
    }
}

// ---------------------------------------------------------------------------
// JSON potential files
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientEntry {
    pub lambda_power: i32,
    /// Row-major 3×3 entries as `[re, im]` pairs.
    pub matrix: [[[f64; 2]; 3]; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationEntry {
    pub k: i64,
    pub coeffs: Vec<CoefficientEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialFile {
    pub a_im: f64,
    pub b_re: f64,
    pub b_im: f64,
    #[serde(default)]
    pub perturbation: Vec<PerturbationEntry>,
}

impl PotentialFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("potential files always serialize")
    }

    pub fn from_potential(pot: &PerturbedPotential) -> Self {
        let perturbation = pot
            .perturbation
            .iter()
            .map(|(&k, c)| PerturbationEntry {
                k: k as i64,
                coeffs: c
                    .terms()
                    .filter(|(_, m)| m.norm() > 0.0)
                    .map(|(n, m)| CoefficientEntry {
                        lambda_power: n,
                        matrix: std::array::from_fn(|i| std::array::from_fn(|j| [m[(i, j)].re, m[(i, j)].im])),
                    })
                    .collect(),
            })
            .collect();
        PotentialFile { a_im: pot.spec.a_im, b_re: pot.spec.b.re, b_im: pot.spec.b.im, perturbation }
    }

    /// Validates against every potential invariant.
    pub fn into_potential(self, radius: f64) -> Result<PerturbedPotential> {
        let spec = DelaunaySpec::new(self.a_im, c64(self.b_re, self.b_im))?;
        let mut pert: BTreeMap<usize, LoopMatrix> = BTreeMap::new();
        for entry in self.perturbation {
            if entry.k < 0 {
                return Err(Error::InvalidParams(format!("perturbation order {} is negative", entry.k)));
            }
            let mut terms = Vec::new();
            for c in entry.coeffs {
                if c.lambda_power < -1 {
                    return Err(Error::InvalidParams(format!(
                        "λ-power {} below −1 in order {}",
                        c.lambda_power, entry.k
                    )));
                }
                terms.push((c.lambda_power, Mat3::from_fn(|i, j| c64(c.matrix[i][j][0], c.matrix[i][j][1]))));
            }
            let slot = pert.entry(entry.k as usize).or_insert_with(LoopMatrix::zero);
            *slot = &*slot + &LoopMatrix::from_terms(terms);
        }
        PerturbedPotential::new(spec, pert, radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loops::{check_unitary_on_circle, project_to_grade};

    #[test]
    fn clifford_constants() {
        let s = DelaunaySpec::clifford();
        assert_eq!(s.beta(), 3.0);
        assert!((s.psi() - c64(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(resonance_bound(&s), 3);
    }

    #[test]
    fn clifford_matrix_entries() {
        let d = delaunay_matrix(&DelaunaySpec::clifford());
        let i = c64(0.0, 1.0);
        for (n, m) in d.terms() {
            for v in m.iter() {
                assert!(v.norm() == 0.0 || (v - i).norm() < 1e-15, "index {n}: {v}");
            }
        }
        assert!(is_twisted(&d, 1e-14));
    }

    #[test]
    fn invalid_specs() {
        assert!(DelaunaySpec::new(1.0, c64(0.0, 0.0)).is_err());
        assert!(DelaunaySpec::new(-1.0, c64(1.0, 0.0)).is_err());
        assert!(DelaunaySpec::new(0.0, c64(1.0, 0.0)).is_err());
    }

    #[test]
    fn clifford_constant_term_at_one() {
        let c = char_poly_coefficients(&DelaunaySpec::clifford().eval(c64(1.0, 0.0)));
        assert!((c[2] - c64(0.0, 2.0)).norm() < 1e-14);
        assert!((c[1] - c64(3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn clifford_spectrum_closed_form() {
        // ν_k = λω^k + λ⁻¹ω^{−k}, ω = e^{2πi/3}
        let grid = CircleGrid::new(64).unwrap();
        let sd = spectral_data(&DelaunaySpec::clifford(), &grid);
        for (j, &l) in grid.points().iter().enumerate() {
            let w = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
            let mut want: Vec<f64> = (0..3).map(|k| (l * w.powi(k) + w.powi(-k) / l).re).collect();
            want.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let got = sd.eigenvalues(j);
            for p in 0..3 {
                assert!((got[p] - want[p]).abs() < 1e-12);
            }
        }
        assert!(sd.degenerate);
    }

    #[test]
    fn spectral_resolution() {
        let grid = CircleGrid::new(32).unwrap();
        let spec = DelaunaySpec::new(0.7, c64(0.3, -1.1)).unwrap();
        let sd = spectral_data(&spec, &grid);
        let g = sd.generator();
        for (j, &l) in grid.points().iter().enumerate() {
            assert!((g.at(j) - spec.hermitian_generator(l)).norm() < 1e-13);
            let sum: Mat3 = (0..3).map(|p| sd.projection(j, p)).sum();
            assert!((sum - Mat3::identity()).norm() < 1e-13);
            assert!(sd.eigenvalues(j).iter().sum::<f64>().abs() < 1e-13);
        }
    }

    #[test]
    fn irrational_spec_is_not_star_and_has_no_period() {
        let s = DelaunaySpec::new(1.0, c64(0.0, 0.5)).unwrap();
        assert!(!is_star_delaunay(&s, DEFAULT_INTEGER_TOL));
        assert!(period_check(&s, DEFAULT_INTEGER_TOL).is_none());
    }

    #[test]
    fn clifford_period() {
        let p = period_check(&DelaunaySpec::clifford(), DEFAULT_INTEGER_TOL).unwrap();
        assert!((p.p - 2.0 * PI).abs() < 1e-12);
        assert_eq!(p.k, [2, -1, -1]);
    }

    #[test]
    fn continued_fractions() {
        assert_eq!(rational_approximation(0.75, 1e-12, 100), Some((3, 4)));
        assert_eq!(rational_approximation(-0.5, 1e-12, 100), Some((-1, 2)));
        assert_eq!(rational_approximation(2f64.sqrt(), 1e-9, 10_000), None);
    }

    #[test]
    fn delaunay_exponential_at_one_for_clifford() {
        let s = DelaunaySpec::clifford();
        let e = (s.eval(c64(1.0, 0.0)) * c64(2.0 * PI, 0.0)).exp();
        assert!((e - Mat3::identity()).norm() < 1e-9);
        let grid = CircleGrid::new(64).unwrap();
        assert!(check_unitary_on_circle(&LoopMatrix::constant(e), &grid, 1e-9));
    }

    fn g5() -> Mat3 {
        let mut m = Mat3::zeros();
        m[(0, 2)] = c64(1.0, 0.0);
        m[(2, 1)] = c64(1.0, 0.0);
        project_to_grade(&m, 5)
    }

    #[test]
    fn perturbation_below_bound_is_rejected() {
        let spec = DelaunaySpec::clifford();
        let pert = BTreeMap::from([(2usize, LoopMatrix::monomial(-1, g5() * c64(0.01, 0.0)))]);
        assert!(PerturbedPotential::new(spec, pert, 1.0).is_err());
        let pert = BTreeMap::from([(4usize, LoopMatrix::monomial(-1, g5() * c64(0.01, 0.0)))]);
        assert!(PerturbedPotential::new(spec, pert, 2.0).is_ok());
    }

    #[test]
    fn rotation_composes() {
        let spec = DelaunaySpec::clifford();
        let pert = BTreeMap::from([(4usize, LoopMatrix::monomial(-1, g5() * c64(0.01, 0.0)))]);
        let pot = PerturbedPotential::new(spec, pert, 2.0).unwrap();
        let a = pot.rotate(0.3).rotate(0.9);
        let b = pot.rotate(1.2);
        assert!(a.coefficient(4).max_abs_diff(&b.coefficient(4)) < 1e-15);
        assert!(pot.rotate(2.0 * PI).coefficient(4).max_abs_diff(&pot.coefficient(4)) < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let spec = DelaunaySpec::clifford();
        let pert = BTreeMap::from([(4usize, LoopMatrix::monomial(-1, g5() * c64(0.01, 0.0)))]);
        let pot = PerturbedPotential::new(spec, pert, 2.0).unwrap();
        let file = PotentialFile::from_potential(&pot);
        let back = PotentialFile::from_json(&file.to_json()).unwrap().into_potential(2.0).unwrap();
        assert!(back.coefficient(4).max_abs_diff(&pot.coefficient(4)) == 0.0);
        assert!(PotentialFile::from_json(r#"{"a_im": 1, "b_re": 0, "b_im": 1, "extra": 3}"#).is_err());
    }
}
