//! 3×3-matrix Laurent loops on the unit circle.
//!
//! Two representations are used side by side:
//!
//! * [`LoopMatrix`] stores Fourier coefficients `M_n` of `Σ_n M_n λ^n` on a
//!   contiguous index range. Products are Cauchy products and are exact.
//! * [`GridLoop`] stores samples at the `m` equispaced points of a
//!   [`CircleGrid`]. Pointwise work (inversion, exponentials, eigen-solves)
//!   happens here; [`to_grid`] and [`from_grid`] move between the two.
//!
//! The twisting automorphism `σ` of order six and the weighted Wiener norms
//! used for all error reporting also live in this module.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::Matrix3;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat3 = Matrix3<Complex64>;

pub const DEFAULT_TRUNCATION_DEGREE: usize = 16;
pub const DEFAULT_GRID_SIZE: usize = 256;
pub const DEFAULT_ALGEBRAIC_TOL: f64 = 1e-10;
pub const DEFAULT_TWIST_TOL: f64 = 1e-12;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The primitive sixth root of unity `ε = e^{iπ/3}`.
pub fn epsilon() -> Complex64 {
    Complex64::from_polar(1.0, PI / 3.0)
}

/// The matrix `P` entering `σ(g) = P (gᵗ)⁻¹ P⁻¹`.
pub fn twist_matrix() -> Mat3 {
    let e = epsilon();
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    Mat3::new(z, e * e, z, e.powi(4), z, z, z, z, one)
}

fn twist_matrix_inv() -> Mat3 {
    // P is a monomial matrix with unimodular entries: P⁻¹ = P*.
    twist_matrix().adjoint()
}

/// `σ(ξ) = −P ξᵗ P⁻¹` on the Lie algebra.
pub fn sigma_algebra(x: &Mat3) -> Mat3 {
    -(twist_matrix() * x.transpose() * twist_matrix_inv())
}

/// `σ(g) = P (gᵗ)⁻¹ P⁻¹` on the group. Returns `None` for singular `g`.
pub fn sigma_group(g: &Mat3) -> Option<Mat3> {
    let inv_t = g.transpose().try_inverse()?;
    Some(twist_matrix() * inv_t * twist_matrix_inv())
}

/// Projects an arbitrary matrix onto the `ε^grade` eigenspace `g_grade` of `σ`,
/// with the trace removed so the result lies in `sl(3, ℂ)`.
pub fn project_to_grade(x: &Mat3, grade: i64) -> Mat3 {
    let e = epsilon();
    let l = grade.rem_euclid(6) as i32;
    let mut acc = Mat3::zeros();
    let mut power = *x;
    for j in 0..6 {
        acc += power * e.powi(-l * j);
        power = sigma_algebra(&power);
    }
    let mut p = acc / Complex64::new(6.0, 0.0);
    let tr = p.trace() / Complex64::new(3.0, 0.0);
    for i in 0..3 {
        p[(i, i)] -= tr;
    }
    p
}

/// `‖σ(M) − ε^n M‖_F`, i.e. how far `M` is from the eigenspace `g_{n mod 6}`.
pub fn grade_defect(m: &Mat3, n: i64) -> f64 {
    (sigma_algebra(m) - m * epsilon().powi((n.rem_euclid(6)) as i32)).norm()
}

// ---------------------------------------------------------------------------
// Weights and Wiener norms
// ---------------------------------------------------------------------------

/// Symmetric submultiplicative weight `ω` on ℤ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Weight {
    /// `ω(k) = (1 + |k|)^exponent`
    Polynomial { exponent: f64 },
    /// `ω(k) = exp(scale · |k|^order)` with `0 < order < 1`
    Gevrey { scale: f64, order: f64 },
}

impl Default for Weight {
    fn default() -> Self {
        Weight::Polynomial { exponent: 1.0 }
    }
}

impl Weight {
    pub fn polynomial(exponent: f64) -> Result<Self> {
        if !(exponent >= 0.0 && exponent.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "polynomial weight exponent must be >= 0, got {exponent}"
            )));
        }
        Ok(Weight::Polynomial { exponent })
    }

    pub fn gevrey(scale: f64, order: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) || !(order > 0.0 && order < 1.0) {
            return Err(Error::InvalidParams(format!(
                "Gevrey weight needs scale > 0 and 0 < order < 1, got ({scale}, {order})"
            )));
        }
        Ok(Weight::Gevrey { scale, order })
    }

    /// Gevrey weight with the library defaults `t = 1`, `s = 1/2`.
    pub fn default_gevrey() -> Self {
        Weight::Gevrey { scale: 1.0, order: 0.5 }
    }

    pub fn eval(&self, k: i64) -> f64 {
        let a = k.unsigned_abs() as f64;
        match *self {
            Weight::Polynomial { exponent } => (1.0 + a).powf(exponent),
            Weight::Gevrey { scale, order } => (scale * a.powf(order)).exp(),
        }
    }
}

/// Weighted Wiener norm `Σ_n |a_n| ω(n)`; for matrices the norm induced on
/// columns, `max_j Σ_i ‖T_ij‖_ω`.
pub trait WienerNorm {
    fn wiener_norm(&self, w: &Weight) -> f64;
}

/// Scalar Laurent polynomial `Σ a_n λ^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopScalar {
    lo: i32,
    coeffs: Vec<Complex64>,
}

impl LoopScalar {
    pub fn new(lo: i32, coeffs: Vec<Complex64>) -> Self {
        LoopScalar { lo, coeffs }
    }

    pub fn constant(a: Complex64) -> Self {
        LoopScalar { lo: 0, coeffs: vec![a] }
    }

    pub fn monomial(n: i32, a: Complex64) -> Self {
        LoopScalar { lo: n, coeffs: vec![a] }
    }

    pub fn coeff(&self, n: i32) -> Complex64 {
        let idx = n - self.lo;
        if idx < 0 || idx as usize >= self.coeffs.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[idx as usize]
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, Complex64)> + '_ {
        self.coeffs.iter().enumerate().map(move |(i, a)| (self.lo + i as i32, *a))
    }

    pub fn mul(&self, other: &LoopScalar) -> LoopScalar {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return LoopScalar::new(0, Vec::new());
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        LoopScalar::new(self.lo + other.lo, out)
    }
}

impl WienerNorm for LoopScalar {
    fn wiener_norm(&self, w: &Weight) -> f64 {
        self.terms().map(|(n, a)| a.norm() * w.eval(n as i64)).sum()
    }
}

// ---------------------------------------------------------------------------
// Coefficient representation
// ---------------------------------------------------------------------------

/// Truncation policy for products of coefficient loops.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Truncation {
    pub degree: usize,
    pub tol: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { degree: DEFAULT_TRUNCATION_DEGREE, tol: DEFAULT_ALGEBRAIC_TOL }
    }
}

/// Laurent polynomial with 3×3 complex matrix coefficients.
#[derive(Clone, PartialEq)]
pub struct LoopMatrix {
    lo: i32,
    coeffs: Vec<Mat3>,
}

impl fmt::Debug for LoopMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_map();
        for (n, m) in self.terms() {
            s.entry(&n, m);
        }
        s.finish()
    }
}

impl LoopMatrix {
    pub fn zero() -> Self {
        LoopMatrix { lo: 0, coeffs: Vec::new() }
    }

    pub fn identity() -> Self {
        Self::constant(Mat3::identity())
    }

    pub fn constant(m: Mat3) -> Self {
        LoopMatrix { lo: 0, coeffs: vec![m] }
    }

    pub fn monomial(n: i32, m: Mat3) -> Self {
        LoopMatrix { lo: n, coeffs: vec![m] }
    }

    /// Coefficients for indices `lo, lo+1, …`.
    pub fn from_coeffs(lo: i32, coeffs: Vec<Mat3>) -> Self {
        LoopMatrix { lo, coeffs }
    }

    pub fn from_terms<I: IntoIterator<Item = (i32, Mat3)>>(terms: I) -> Self {
        let terms: Vec<(i32, Mat3)> = terms.into_iter().collect();
        if terms.is_empty() {
            return Self::zero();
        }
        let lo = terms.iter().map(|t| t.0).min().unwrap();
        let hi = terms.iter().map(|t| t.0).max().unwrap();
        let mut coeffs = vec![Mat3::zeros(); (hi - lo + 1) as usize];
        for (n, m) in terms {
            coeffs[(n - lo) as usize] += m;
        }
        LoopMatrix { lo, coeffs }
    }

    pub fn lo(&self) -> i32 {
        self.lo
    }

    /// Highest stored index (`lo − 1` for the empty loop).
    pub fn hi(&self) -> i32 {
        self.lo + self.coeffs.len() as i32 - 1
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest `|n|` with a nonzero coefficient.
    pub fn degree(&self) -> usize {
        self.terms()
            .filter(|(_, m)| m.iter().any(|z| *z != Complex64::new(0.0, 0.0)))
            .map(|(n, _)| n.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn coeff(&self, n: i32) -> Mat3 {
        let idx = n - self.lo;
        if idx < 0 || idx as usize >= self.coeffs.len() {
            Mat3::zeros()
        } else {
            self.coeffs[idx as usize]
        }
    }

    pub fn coeffs(&self) -> &[Mat3] {
        &self.coeffs
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, &Mat3)> + '_ {
        self.coeffs.iter().enumerate().map(move |(i, m)| (self.lo + i as i32, m))
    }

    pub fn scale(&self, s: Complex64) -> LoopMatrix {
        LoopMatrix { lo: self.lo, coeffs: self.coeffs.iter().map(|m| m * s).collect() }
    }

    /// Exact Cauchy product.
    pub fn mul(&self, other: &LoopMatrix) -> LoopMatrix {
        if self.is_empty() || other.is_empty() {
            return LoopMatrix::zero();
        }
        let mut out = vec![Mat3::zeros(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        LoopMatrix { lo: self.lo + other.lo, coeffs: out }
    }

    fn combine(&self, other: &LoopMatrix, sign: f64) -> LoopMatrix {
        if self.is_empty() {
            return other.scale(Complex64::new(sign, 0.0));
        }
        if other.is_empty() {
            return self.clone();
        }
        let lo = self.lo.min(other.lo);
        let hi = self.hi().max(other.hi());
        let coeffs = (lo..=hi).map(|n| self.coeff(n) + other.coeff(n) * Complex64::new(sign, 0.0)).collect();
        LoopMatrix { lo, coeffs }
    }

    /// Keeps indices in `[−degree, degree]`; returns the kept loop and the
    /// unweighted Wiener mass of the discarded part.
    pub fn truncate(&self, degree: usize) -> (LoopMatrix, f64) {
        let d = degree as i32;
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        for (n, m) in self.terms() {
            if n.abs() <= d {
                kept.push((n, *m));
            } else {
                dropped.push((n, *m));
            }
        }
        let tail = LoopMatrix::from_terms(dropped).wiener_norm(&Weight::Polynomial { exponent: 0.0 });
        (LoopMatrix::from_terms(kept), tail)
    }

    /// Restriction to indices in `[lo, hi]`.
    pub fn window(&self, lo: i32, hi: i32) -> LoopMatrix {
        if hi < lo {
            return LoopMatrix::zero();
        }
        LoopMatrix { lo, coeffs: (lo..=hi).map(|n| self.coeff(n)).collect() }
    }

    /// Drops leading and trailing coefficients whose Frobenius norm is `<= tol`.
    pub fn trimmed(&self, tol: f64) -> LoopMatrix {
        let keep: Vec<usize> = (0..self.coeffs.len()).filter(|&i| self.coeffs[i].norm() > tol).collect();
        match (keep.first(), keep.last()) {
            (Some(&a), Some(&b)) => LoopMatrix { lo: self.lo + a as i32, coeffs: self.coeffs[a..=b].to_vec() },
            _ => LoopMatrix::zero(),
        }
    }

    /// Pointwise adjoint on the circle: `X(λ)*` has coefficients `X_{−n}*`.
    pub fn adjoint(&self) -> LoopMatrix {
        let coeffs = self.coeffs.iter().rev().map(|m| m.adjoint()).collect();
        LoopMatrix { lo: -self.hi(), coeffs }
    }

    pub fn transpose(&self) -> LoopMatrix {
        LoopMatrix { lo: self.lo, coeffs: self.coeffs.iter().map(|m| m.transpose()).collect() }
    }

    /// `λ ↦ λ⁻¹`: coefficient `n` moves to `−n`.
    pub fn reflect(&self) -> LoopMatrix {
        LoopMatrix { lo: -self.hi(), coeffs: self.coeffs.iter().rev().cloned().collect() }
    }

    /// The loop `λ ↦ A(sλ)`.
    pub fn rescale_parameter(&self, s: Complex64) -> LoopMatrix {
        LoopMatrix { lo: self.lo, coeffs: self.terms().map(|(n, m)| m * s.powi(n)).collect() }
    }

    pub fn eval(&self, lambda: Complex64) -> Mat3 {
        self.terms().fold(Mat3::zeros(), |acc, (n, m)| acc + m * lambda.powi(n))
    }

    pub fn max_abs_diff(&self, other: &LoopMatrix) -> f64 {
        let lo = self.lo.min(other.lo);
        let hi = self.hi().max(other.hi());
        (lo..=hi).map(|n| (self.coeff(n) - other.coeff(n)).camax()).fold(0.0, f64::max)
    }
}

impl WienerNorm for LoopMatrix {
    fn wiener_norm(&self, w: &Weight) -> f64 {
        let mut cols = [0.0f64; 3];
        for (n, m) in self.terms() {
            let wn = w.eval(n as i64);
            for j in 0..3 {
                for i in 0..3 {
                    cols[j] += m[(i, j)].norm() * wn;
                }
            }
        }
        cols.into_iter().fold(0.0, f64::max)
    }
}

impl Add for &LoopMatrix {
    type Output = LoopMatrix;
    fn add(self, rhs: &LoopMatrix) -> LoopMatrix {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &LoopMatrix {
    type Output = LoopMatrix;
    fn sub(self, rhs: &LoopMatrix) -> LoopMatrix {
        self.combine(rhs, -1.0)
    }
}

impl Mul for &LoopMatrix {
    type Output = LoopMatrix;
    fn mul(self, rhs: &LoopMatrix) -> LoopMatrix {
        LoopMatrix::mul(self, rhs)
    }
}

impl Neg for &LoopMatrix {
    type Output = LoopMatrix;
    fn neg(self) -> LoopMatrix {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

/// Product re-truncated to `trunc.degree`.
///
/// Fails with [`Error::TailLoss`] if the discarded mass exceeds `trunc.tol`.
pub fn multiply(a: &LoopMatrix, b: &LoopMatrix, trunc: Truncation) -> Result<LoopMatrix> {
    let (kept, tail) = a.mul(b).truncate(trunc.degree);
    if tail > trunc.tol {
        return Err(Error::TailLoss { mass: tail, tol: trunc.tol });
    }
    Ok(kept)
}

/// Inverse of a power series `V = Σ_{n≥0} V_n λⁿ` up to `degree`, by the
/// recursion `W_0 = V_0⁻¹`, `W_n = −V_0⁻¹ Σ_{k=1}^{n} V_k W_{n−k}`.
pub fn invert_plus(v: &LoopMatrix, degree: usize) -> Result<LoopMatrix> {
    if v.lo() < 0 && !v.window(v.lo(), -1).trimmed(0.0).coeffs.is_empty() {
        return Err(Error::InvalidParams("invert_plus needs nonnegative Fourier support".into()));
    }
    let v0 = v.coeff(0);
    let v0_inv = v0.try_inverse().ok_or(Error::SingularInput { min_det: v0.determinant().norm() })?;
    let mut w: Vec<Mat3> = Vec::with_capacity(degree + 1);
    w.push(v0_inv);
    for n in 1..=degree {
        let mut acc = Mat3::zeros();
        for k in 1..=n {
            acc += v.coeff(k as i32) * w[n - k];
        }
        w.push(-(v0_inv * acc));
    }
    Ok(LoopMatrix::from_coeffs(0, w))
}

/// Inverse of a loop supported on nonpositive indices, up to `degree`.
pub fn invert_minus(v: &LoopMatrix, degree: usize) -> Result<LoopMatrix> {
    Ok(invert_plus(&v.reflect(), degree)?.reflect())
}

/// `max_n ‖σ(M_n) − εⁿ M_n‖`: distance from the twisted loop algebra.
pub fn twist_defect(a: &LoopMatrix) -> f64 {
    a.terms().map(|(n, m)| grade_defect(m, n as i64)).fold(0.0, f64::max)
}

/// Coefficientwise membership of a Lie-algebra loop in `Λsl(3,ℂ)_σ`.
pub fn is_twisted(a: &LoopMatrix, tol: f64) -> bool {
    twist_defect(a) <= tol
}

/// Defect of the group condition `g(λ) = σ(g(ε⁻¹λ))`, measured as the
/// largest coefficient of `g(ελ)·P·g(λ)ᵗ − P`.
pub fn twist_defect_group(g: &LoopMatrix) -> f64 {
    let p = LoopMatrix::constant(twist_matrix());
    let lhs = g.rescale_parameter(epsilon()).mul(&p).mul(&g.transpose());
    lhs.max_abs_diff(&p)
}

pub fn is_twisted_group(g: &LoopMatrix, tol: f64) -> bool {
    twist_defect_group(g) <= tol
}

// ---------------------------------------------------------------------------
// Grid representation
// ---------------------------------------------------------------------------

/// `m` equispaced points `λ_j = e^{2πij/m}` on the unit circle, with cached FFT plans.
#[derive(Clone)]
pub struct CircleGrid {
    size: usize,
    points: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for CircleGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CircleGrid").field("size", &self.size).finish()
    }
}

impl Default for CircleGrid {
    fn default() -> Self {
        CircleGrid::new(DEFAULT_GRID_SIZE).expect("default grid size is valid")
    }
}

impl CircleGrid {
    pub fn new(size: usize) -> Result<Self> {
        if size < 8 || !size.is_power_of_two() {
            return Err(Error::InvalidParams(format!("grid size must be a power of two >= 8, got {size}")));
        }
        let points = (0..size)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / size as f64))
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        Ok(CircleGrid { size, points, forward, inverse })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Largest degree representable without aliasing, `m/2 − 1`.
    pub fn max_degree(&self) -> usize {
        self.size / 2 - 1
    }

    /// Signed Fourier index stored in FFT slot `k`.
    fn slot_index(&self, k: usize) -> i32 {
        if k < self.size / 2 {
            k as i32
        } else {
            k as i32 - self.size as i32
        }
    }

    fn slot(&self, n: i32) -> usize {
        n.rem_euclid(self.size as i32) as usize
    }

    /// Entrywise FFT of matrix samples into signed-index coefficients.
    fn analyze(&self, samples: &[Mat3]) -> Vec<Mat3> {
        let m = self.size;
        let mut out = vec![Mat3::zeros(); m];
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        let scale = 1.0 / m as f64;
        for i in 0..3 {
            for j in 0..3 {
                for (b, s) in buf.iter_mut().zip(samples) {
                    *b = s[(i, j)];
                }
                self.forward.process(&mut buf);
                for (o, b) in out.iter_mut().zip(&buf) {
                    o[(i, j)] = b * scale;
                }
            }
        }
        out
    }

    /// Inverse of [`analyze`]: slot-ordered coefficients to samples.
    fn synthesize(&self, slots: &[Mat3]) -> Vec<Mat3> {
        let m = self.size;
        let mut out = vec![Mat3::zeros(); m];
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for i in 0..3 {
            for j in 0..3 {
                for (b, s) in buf.iter_mut().zip(slots) {
                    *b = s[(i, j)];
                }
                self.inverse.process(&mut buf);
                for (o, b) in out.iter_mut().zip(&buf) {
                    o[(i, j)] = *b;
                }
            }
        }
        out
    }
}

/// Matrix function sampled on a [`CircleGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridLoop {
    values: Vec<Mat3>,
}

impl GridLoop {
    pub fn from_values(values: Vec<Mat3>) -> Self {
        GridLoop { values }
    }

    pub fn from_fn<F: FnMut(Complex64) -> Mat3>(grid: &CircleGrid, f: F) -> Self {
        GridLoop { values: grid.points().iter().copied().map(f).collect() }
    }

    pub fn constant(grid: &CircleGrid, m: Mat3) -> Self {
        GridLoop { values: vec![m; grid.size()] }
    }

    pub fn identity(grid: &CircleGrid) -> Self {
        Self::constant(grid, Mat3::identity())
    }

    pub fn zeros(grid: &CircleGrid) -> Self {
        Self::constant(grid, Mat3::zeros())
    }

    pub fn values(&self) -> &[Mat3] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Mat3] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, j: usize) -> &Mat3 {
        &self.values[j]
    }

    pub fn map<F: Fn(&Mat3) -> Mat3>(&self, f: F) -> GridLoop {
        GridLoop { values: self.values.iter().map(f).collect() }
    }

    pub fn zip_map<F: Fn(&Mat3, &Mat3) -> Mat3>(&self, other: &GridLoop, f: F) -> GridLoop {
        GridLoop { values: self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect() }
    }

    pub fn mul(&self, other: &GridLoop) -> GridLoop {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn add(&self, other: &GridLoop) -> GridLoop {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridLoop) -> GridLoop {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: Complex64) -> GridLoop {
        self.map(|a| a * s)
    }

    pub fn adjoint(&self) -> GridLoop {
        self.map(|a| a.adjoint())
    }

    /// Pointwise inverse; fails if any sample is singular.
    pub fn inverse(&self) -> Result<GridLoop> {
        let mut out = Vec::with_capacity(self.values.len());
        for v in &self.values {
            match v.try_inverse() {
                Some(inv) => out.push(inv),
                None => return Err(Error::SingularInput { min_det: self.min_abs_det() }),
            }
        }
        Ok(GridLoop { values: out })
    }

    pub fn min_abs_det(&self) -> f64 {
        self.values.iter().map(|v| v.determinant().norm()).fold(f64::INFINITY, f64::min)
    }

    /// Largest pointwise deviation `|det − 1|`.
    pub fn det_defect(&self) -> f64 {
        self.values.iter().map(|v| (v.determinant() - 1.0).norm()).fold(0.0, f64::max)
    }

    /// Largest pointwise Frobenius norm.
    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max_j ‖A(λ_j)*A(λ_j) − I‖_F`.
    pub fn unitary_defect(&self) -> f64 {
        self.values.iter().map(|v| (v.adjoint() * v - Mat3::identity()).norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &GridLoop) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Pointwise matrix exponential.
    pub fn exp(&self) -> GridLoop {
        self.map(|a| a.exp())
    }
}

/// Samples a coefficient loop on the grid.
pub fn to_grid(a: &LoopMatrix, grid: &CircleGrid) -> GridLoop {
    let mut slots = vec![Mat3::zeros(); grid.size()];
    for (n, m) in a.terms() {
        slots[grid.slot(n)] += m;
    }
    GridLoop { values: grid.synthesize(&slots) }
}

/// All resolvable coefficients of a sampled loop, indices `−m/2 … m/2−1`.
pub fn grid_coefficients(samples: &GridLoop, grid: &CircleGrid) -> LoopMatrix {
    let slots = grid.analyze(&samples.values);
    let m = grid.size();
    LoopMatrix::from_coeffs(-(m as i32) / 2, (0..m).map(|k| slots[(k + m / 2) % m]).collect())
}

/// Recovers a degree-`d` loop from its samples.
///
/// Fails with [`Error::Alias`] when the unweighted Wiener mass of the
/// coefficients beyond `d` exceeds `tol`.
pub fn from_grid(samples: &GridLoop, grid: &CircleGrid, d: usize, tol: f64) -> Result<LoopMatrix> {
    if 2 * d >= grid.size() {
        return Err(Error::InvalidParams(format!("degree {d} needs a grid larger than {}", grid.size())));
    }
    let slots = grid.analyze(&samples.values);
    let mut tail = [0.0f64; 3];
    let mut kept = Vec::with_capacity(2 * d + 1);
    let mut slot_of = vec![0usize; 2 * d + 1];
    for (k, m) in slots.iter().enumerate() {
        let n = grid.slot_index(k);
        if n.unsigned_abs() as usize <= d {
            slot_of[(n + d as i32) as usize] = k;
        } else {
            for j in 0..3 {
                for i in 0..3 {
                    tail[j] += m[(i, j)].norm();
                }
            }
        }
    }
    let tail = tail.into_iter().fold(0.0, f64::max);
    if tail > tol {
        return Err(Error::Alias { degree: d, tail, tol });
    }
    for k in slot_of {
        kept.push(slots[k]);
    }
    Ok(LoopMatrix::from_coeffs(-(d as i32), kept))
}

/// Weighted Wiener norm of a sampled loop, via its full coefficient set.
pub fn grid_wiener_norm(samples: &GridLoop, grid: &CircleGrid, w: &Weight) -> f64 {
    grid_coefficients(samples, grid).wiener_norm(w)
}

/// Samples of `λ ↦ A(sλ)` for a band-limited sampled loop and `|s| = 1`.
pub fn grid_rescale_parameter(samples: &GridLoop, grid: &CircleGrid, s: Complex64) -> GridLoop {
    let mut slots = grid.analyze(&samples.values);
    for (k, m) in slots.iter_mut().enumerate() {
        *m *= s.powi(grid.slot_index(k));
    }
    GridLoop { values: grid.synthesize(&slots) }
}

/// Group twist defect `max_j ‖g(ελ_j) P g(λ_j)ᵗ − P‖_F` for a sampled loop.
pub fn grid_twist_defect_group(samples: &GridLoop, grid: &CircleGrid) -> f64 {
    let shifted = grid_rescale_parameter(samples, grid, epsilon());
    let p = twist_matrix();
    shifted
        .values
        .iter()
        .zip(&samples.values)
        .map(|(a, b)| (a * p * b.transpose() - p).norm())
        .fold(0.0, f64::max)
}

/// Algebra twist defect for a sampled loop.
pub fn grid_twist_defect(samples: &GridLoop, grid: &CircleGrid) -> f64 {
    twist_defect(&grid_coefficients(samples, grid))
}

/// True iff `A(λ_j)*A(λ_j)` is within `tol` of the identity at every grid point.
pub fn check_unitary_on_circle(a: &LoopMatrix, grid: &CircleGrid, tol: f64) -> bool {
    to_grid(a, grid).unitary_defect() <= tol
}

/// Pointwise `exp` of a coefficient loop, returned on the grid.
pub fn loop_exp(x: &LoopMatrix, grid: &CircleGrid) -> GridLoop {
    to_grid(x, grid).exp()
}
