//! Residual checks on computed surfaces and the near-puncture comparison with
//! the Delaunay frame.
//!
//! Derivatives are centred differences on the per-sample stencils recorded by
//! [`extract_geometry`](crate::pipeline::extract_geometry), in the cylinder
//! coordinate `w = φ + iτ`: `∂_w = (∂_φ − i∂_τ)/2`, `∂_w̄ = (∂_φ + i∂_τ)/2`.

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loops::{c64, grid_coefficients, CircleGrid, Weight, WienerNorm};
use crate::pipeline::{closing_scalar, FrameBuilder, FrameField, Geometry, MonodromyReport, PipelineOptions, CLOSING_TOL};
use crate::potentials::PerturbedPotential;
use crate::zap::zap_solve;

pub const GEOMETRIC_TOL: f64 = 1e-4;
pub const ALGEBRAIC_TOL: f64 = 1e-8;

type Lift = Vector3<Complex64>;

/// `Z·W̄ = Σ Zᵢ conj(Wᵢ)`.
fn hermitian(z: &Lift, w: &Lift) -> Complex64 {
    z.iter().zip(w.iter()).map(|(a, b)| a * b.conj()).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub n_samples: usize,
}

impl CheckResult {
    pub fn new(check: &str, residual: f64, tol: f64, n_samples: usize) -> Self {
        // NaN residuals fail
        CheckResult { check: check.into(), residual, tol, pass: residual < tol, n_samples }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    /// `(|z|, ‖Φ − Ψ‖_ω)`.
    pub pairs: Vec<(f64, f64)>,
    /// Least-squares slope of `ln‖Φ − Ψ‖` against `ln|z|`.
    pub slope: f64,
    /// Largest observed `‖Φ − Ψ‖/|z|`.
    pub max_ratio: f64,
    pub min_ratio: f64,
}

/// Append-only list of checks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub asymptotic: Option<AsymptoticReport>,
}

impl VerificationReport {
    pub fn push(&mut self, c: CheckResult) {
        self.checks.push(c);
    }

    pub fn merge(mut self, other: VerificationReport) -> Self {
        self.checks.extend(other.checks);
        self.asymptotic = self.asymptotic.or(other.asymptotic);
        self
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }
}

/// Derivatives of the lift at the stencil centre.
struct LiftJet {
    f: Lift,
    fw: Lift,
    fwbar: Lift,
}

fn lift_jet(g: &Geometry) -> LiftJet {
    let s = &g.stencil;
    let f_phi = (s.lift[1] - s.lift[2]) / c64(2.0 * s.h, 0.0);
    let f_tau = (s.lift[3] - s.lift[4]) / c64(2.0 * s.h, 0.0);
    let i = c64(0.0, 1.0);
    LiftJet {
        f: s.lift[0],
        fw: (f_phi - f_tau * i) * c64(0.5, 0.0),
        fwbar: (f_phi + f_tau * i) * c64(0.5, 0.0),
    }
}

fn geometries(field: &FrameField) -> Result<Vec<&Geometry>> {
    field
        .samples
        .iter()
        .enumerate()
        .map(|(index, s)| s.geometry.as_ref().ok_or(Error::BoundarySample { index }))
        .collect()
}

fn max_over<F: Fn(&Geometry) -> f64>(field: &FrameField, f: F) -> Result<(f64, usize)> {
    let gs = geometries(field)?;
    // NaN propagates so that a broken sample cannot pass
    let r = gs.iter().map(|g| f(g)).fold(0.0, |a: f64, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) });
    Ok((r, gs.len()))
}

/// `max |𝔣_w·𝔣̄| + |𝔣_w̄·𝔣̄|`.
pub fn check_horizontal(field: &FrameField) -> Result<f64> {
    max_over(field, |g| {
        let j = lift_jet(g);
        hermitian(&j.fw, &j.f).norm() + hermitian(&j.fwbar, &j.f).norm()
    })
    .map(|r| r.0)
}

/// Largest defect of `|𝔣_w|² = |𝔣_w̄|² = e^u` and `𝔣_w·conj(𝔣_w̄) = 0`.
pub fn check_conformal(field: &FrameField) -> Result<f64> {
    max_over(field, |g| {
        let j = lift_jet(g);
        let eu = g.stencil.u[0].exp();
        let a = (j.fw.norm_squared() - eu).abs();
        let b = (j.fwbar.norm_squared() - eu).abs();
        let c = hermitian(&j.fw, &j.fwbar).norm();
        a.max(b).max(c)
    })
    .map(|r| r.0)
}

/// `(max |u_ww̄ + e^u − e^{−2u}|ψ|²|, max |ψ_w̄|)`.
pub fn check_gauss_codazzi(field: &FrameField) -> Result<(f64, f64)> {
    let (gauss, _) = max_over(field, |g| {
        let s = &g.stencil;
        let lap = (s.u[1] + s.u[2] + s.u[3] + s.u[4] - 4.0 * s.u[0]) / (s.h * s.h);
        (lap / 4.0 + s.u[0].exp() - (-2.0 * s.u[0]).exp() * s.psi[0].norm_sqr()).abs()
    })?;
    let (codazzi, _) = max_over(field, |g| {
        let s = &g.stencil;
        let d = (s.psi[1] - s.psi[2]) + (s.psi[3] - s.psi[4]) * c64(0.0, 1.0);
        (d / c64(4.0 * s.h, 0.0)).norm()
    })?;
    Ok((gauss, codazzi))
}

/// `χ(1) = cI` with `c³ = 1`, both to `1e-8`.
pub fn check_closing(report: &MonodromyReport) -> bool {
    closing_scalar(&report.chi_at_one, CLOSING_TOL).is_some()
}

/// Distance of `χ(1)` from the closing set `{cI : c³ = 1}` as used by [`closing_scalar`].
pub fn closing_residual(report: &MonodromyReport) -> f64 {
    let m = &report.chi_at_one;
    let c = m.trace() / c64(3.0, 0.0);
    (m - nalgebra::Matrix3::identity() * c).norm().max((c.powi(3) - 1.0).norm())
}

/// Deviation from `e^{2πD}` and the closing residual, both at tolerance `tol`.
pub fn monodromy_checks(report: &MonodromyReport, tol: f64) -> [CheckResult; 2] {
    [
        CheckResult::new("monodromy_deviation", report.deviation, tol, 1),
        CheckResult::new("closing", closing_residual(report), tol, 1),
    ]
}

/// Runs the four geometric checks at tolerance `tol` and the frame invariants
/// at [`ALGEBRAIC_TOL`].
pub fn verify_field(field: &FrameField, tol: f64) -> Result<VerificationReport> {
    verify_field_with(field, tol, ALGEBRAIC_TOL)
}

pub fn verify_field_with(field: &FrameField, tol: f64, tol_alg: f64) -> Result<VerificationReport> {
    let n = field.samples.len();
    let mut report = VerificationReport::default();
    report.push(CheckResult::new("frame_unitary", field.unitary_defect(), tol_alg, n));
    report.push(CheckResult::new("frame_determinant", field.det_defect(), tol_alg, n));
    report.push(CheckResult::new("frame_twist", field.twist_defect(), tol_alg, n));
    report.push(CheckResult::new("horizontal", check_horizontal(field)?, tol, n));
    report.push(CheckResult::new("conformal", check_conformal(field)?, tol, n));
    let (gauss, codazzi) = check_gauss_codazzi(field)?;
    report.push(CheckResult::new("gauss", gauss, tol, n));
    report.push(CheckResult::new("codazzi", codazzi, tol, n));
    Ok(report)
}

// ---------------------------------------------------------------------------
// Negative controls
// ---------------------------------------------------------------------------

fn map_geometry<F: Fn(usize, &mut Geometry, Complex64)>(field: &FrameField, f: F) -> FrameField {
    let mut out = field.clone();
    for (idx, s) in out.samples.iter_mut().enumerate() {
        if let Some(g) = s.geometry.as_mut() {
            f(idx, g, s.w);
        }
    }
    out
}

/// Stencil offsets in `w`, in stencil order.
fn offsets(h: f64) -> [Complex64; 5] {
    [c64(0.0, 0.0), c64(h, 0.0), c64(-h, 0.0), c64(0.0, h), c64(0.0, -h)]
}

/// `𝔣 ↦ e^{iθ(w)}𝔣` with `θ = φ + 2τ`.
pub fn scramble_lift_phase(field: &FrameField) -> FrameField {
    map_geometry(field, |_, g, w| {
        for (k, d) in offsets(g.stencil.h).iter().enumerate() {
            let p = w + d;
            g.stencil.lift[k] *= Complex64::from_polar(1.0, p.re + 2.0 * p.im);
        }
    })
}

/// Stretches the lift along `τ` by `factor` and renormalizes.
pub fn stretch_lift(field: &FrameField, factor: f64) -> FrameField {
    map_geometry(field, |_, g, _| {
        let c = g.stencil.lift[0];
        for k in [3, 4] {
            let v = c + (g.stencil.lift[k] - c) * c64(factor, 0.0);
            g.stencil.lift[k] = v / c64(v.norm(), 0.0);
        }
    })
}

/// Adds `delta` to `u` at one sample.
pub fn bump_metric(field: &FrameField, sample: usize, delta: f64) -> FrameField {
    map_geometry(field, |idx, g, _| {
        if idx == sample {
            g.stencil.u[0] += delta;
            g.u += delta;
        }
    })
}

/// `ψ ↦ ψ + c·w̄`.
pub fn antiholomorphic_cubic_form(field: &FrameField, c: f64) -> FrameField {
    map_geometry(field, |_, g, w| {
        for (k, d) in offsets(g.stencil.h).iter().enumerate() {
            g.stencil.psi[k] += (w + d).conj() * c;
        }
        g.psi = g.stencil.psi[0];
    })
}

/// Runs each constructed violation through the check it targets. Every
/// returned entry is expected to fail.
pub fn negative_controls(field: &FrameField, tol: f64) -> Result<Vec<CheckResult>> {
    let n = field.samples.len();
    let phase = check_horizontal(&scramble_lift_phase(field))?;
    let stretch = check_conformal(&stretch_lift(field, 1.5))?;
    let (bump, _) = check_gauss_codazzi(&bump_metric(field, n / 2, 0.1))?;
    let (_, holo) = check_gauss_codazzi(&antiholomorphic_cubic_form(field, 0.1))?;
    Ok(vec![
        CheckResult::new("control_lift_phase", phase, tol, n),
        CheckResult::new("control_lift_stretch", stretch, tol, n),
        CheckResult::new("control_metric_bump", bump, tol, n),
        CheckResult::new("control_antiholomorphic_psi", holo, tol, n),
    ])
}

// ---------------------------------------------------------------------------
// Asymptotics
// ---------------------------------------------------------------------------

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// `‖Φ − Ψ‖_ω` at `z = r·e^{i·angle}` for each radius, where `Φ` is the frame of
/// `pot` and `Ψ` the frame of its Delaunay part.
pub fn check_asymptotic(
    pot: &PerturbedPotential,
    radii: &[f64],
    angle: f64,
    grid: &CircleGrid,
    weight: &Weight,
    opts: PipelineOptions,
) -> Result<AsymptoticReport> {
    if radii.len() < 2 {
        return Err(Error::InvalidParams("asymptotic fit needs at least two radii".into()));
    }
    let builder = FrameBuilder::new(zap_solve(pot, opts.k_max, grid)?, opts);
    let pairs = radii
        .iter()
        .map(|&r| {
            let fp = builder.frame(Complex64::from_polar(r, angle))?;
            let diff = grid_coefficients(&fp.frame.sub(&fp.reference), grid);
            Ok((r, diff.wiener_norm(weight)))
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let ratios: Vec<f64> = pairs.iter().map(|p| p.1 / p.0).collect();
    Ok(AsymptoticReport {
        slope: least_squares_slope(&xs, &ys),
        max_ratio: ratios.iter().cloned().fold(0.0, f64::max),
        min_ratio: ratios.iter().cloned().fold(f64::INFINITY, f64::min),
        pairs,
    })
}
