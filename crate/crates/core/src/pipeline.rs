//! Potential → `H` → Iwasawa → extended frame `F`, then the geometry of the
//! surface `[F(λ=1)e₃]` and the monodromy of `H`.
//!
//! `H = E·P` with `E = e^{ln z·A}`, `A = −iD`, is badly conditioned near the
//! puncture: `E` grows like `|z|^{−(δ₁−δ₃)}`. Frames are therefore assembled as
//! `F = Ψ·Y`, where `Ψ` is the unitary Iwasawa factor of `E` and `Y` is the
//! unitary Iwasawa factor of `Ψ⁻¹·(E P E⁻¹)·Ψ`, a loop close to `I`.
//!
//! For `z = e^{t+iθ}`, `Ψ(z) = e^{θD}·Ψ(t)`, and `Ψ(t)` follows the flow
//!
//! ```text
//! Ψ' = Ψ·(λ⁻¹Y − λY*),   Y' = [L₀, Y],   L₀' = 2[Y*, Y],
//! Ψ(0) = I,  Y(0) = −iD₋₁,  L₀(0) = 0,
//! ```
//!
//! obtained by splitting `Ψ⁻¹AΨ = λ⁻¹Y + L₀ + λY*` into its unitary and
//! positive parts. The flow has a skew-hermitian generator on the circle, so it
//! stays unitary for any `t`.
//!
//! Geometry is read in the cylinder coordinate `w = −i ln z = φ + iτ`.

use nalgebra::Vector3;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factorization::iwasawa_grid;
use crate::loops::{c64, grid_coefficients, CircleGrid, GridLoop, Mat3, Weight, WienerNorm};
use crate::ode::{dopri, integrate_ode_grid, OdeOptions};
use crate::potentials::{delaunay_matrix, DelaunaySpec, PerturbedPotential, DEFAULT_KMAX};
use crate::zap::{zap_solve, BranchCut, ZapSolution};

/// Tolerance of the closing predicate `χ(1) = cI`, `c³ = 1`.
pub const CLOSING_TOL: f64 = 1e-8;
const MONODROMY_VERTICES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineOptions {
    pub k_max: usize,
    pub iwasawa_tol: f64,
    /// Finite-difference spacing in `w`.
    pub fd_step: f64,
    pub ode: OdeOptions,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            k_max: DEFAULT_KMAX,
            iwasawa_tol: 1e-10,
            fd_step: 1e-3,
            ode: OdeOptions { rtol: 1e-13, atol: 1e-13, ..OdeOptions::default() },
        }
    }
}

// ---------------------------------------------------------------------------
// Reference frame
// ---------------------------------------------------------------------------

/// `Ψ(t)` together with the flow variables `Y`, `L₀`.
#[derive(Clone, Debug)]
pub struct ReferenceState {
    pub t: f64,
    /// Grid samples of `Ψ`, followed by `Y` and `L₀`.
    packed: GridLoop,
}

impl ReferenceState {
    pub fn frame(&self) -> GridLoop {
        let v = self.packed.values();
        GridLoop::from_values(v[..v.len() - 2].to_vec())
    }

    /// `L₀(t)`, the real diagonal logarithmic derivative of the positive factor's constant term.
    pub fn l0(&self) -> Mat3 {
        let v = self.packed.values();
        v[v.len() - 1]
    }
}

/// Integrator for the reference frame of a Delaunay matrix.
#[derive(Clone, Debug)]
pub struct ReferenceFlow {
    grid: CircleGrid,
    y0: Mat3,
    opts: OdeOptions,
}

impl ReferenceFlow {
    pub fn new(spec: &DelaunaySpec, grid: &CircleGrid, opts: OdeOptions) -> Self {
        let y0 = delaunay_matrix(spec).coeff(-1) * c64(0.0, -1.0);
        ReferenceFlow { grid: grid.clone(), y0, opts }
    }

    pub fn start(&self) -> ReferenceState {
        let mut v = vec![Mat3::identity(); self.grid.size()];
        v.push(self.y0);
        v.push(Mat3::zeros());
        ReferenceState { t: 0.0, packed: GridLoop::from_values(v) }
    }

    pub fn advance(&self, state: &ReferenceState, dt: f64) -> Result<ReferenceState> {
        if dt == 0.0 {
            return Ok(state.clone());
        }
        let m = self.grid.size();
        let points = self.grid.points();
        let dtc = c64(dt, 0.0);
        let packed = dopri(
            &state.packed,
            |_, y| {
                let v = y.values();
                let (yy, l0) = (v[m], v[m + 1]);
                let ys = yy.adjoint();
                let mut out: Vec<Mat3> = (0..m).map(|j| v[j] * (yy / points[j] - ys * points[j]) * dtc).collect();
                out.push((l0 * yy - yy * l0) * dtc);
                out.push((ys * yy - yy * ys) * c64(2.0 * dt, 0.0));
                Ok(GridLoop::from_values(out))
            },
            &self.opts,
            c64(state.t, 0.0),
        )?;
        Ok(ReferenceState { t: state.t + dt, packed })
    }

    /// States at the requested `t`, integrating outward from `t = 0`.
    pub fn states_at(&self, ts: &[f64]) -> Result<Vec<ReferenceState>> {
        let mut order: Vec<usize> = (0..ts.len()).collect();
        order.sort_by(|&a, &b| ts[a].abs().partial_cmp(&ts[b].abs()).unwrap());
        let mut out: Vec<Option<ReferenceState>> = vec![None; ts.len()];
        let (mut neg, mut pos) = (self.start(), self.start());
        for i in order {
            let cur = if ts[i] < 0.0 { &mut neg } else { &mut pos };
            *cur = self.advance(cur, ts[i] - cur.t)?;
            out[i] = Some(cur.clone());
        }
        Ok(out.into_iter().map(|s| s.expect("every index visited")).collect())
    }
}

/// Unitary Iwasawa factor `Ψ` of `e^{ln z·(−iD)}`.
pub fn delaunay_reference_frame(spec: &DelaunaySpec, z: Complex64, grid: &CircleGrid) -> Result<GridLoop> {
    let log = BranchCut::default().log(z)?;
    let flow = ReferenceFlow::new(spec, grid, PipelineOptions::default().ode);
    let psi_t = flow.states_at(&[log.re])?.remove(0).frame();
    let d = crate::loops::to_grid(&delaunay_matrix(spec).scale(c64(log.im, 0.0)), grid).exp();
    Ok(d.mul(&psi_t))
}

// ---------------------------------------------------------------------------
// Frames
// ---------------------------------------------------------------------------

/// Extended frame at one point.
#[derive(Clone, Debug)]
pub struct FramePoint {
    pub frame: GridLoop,
    /// `Ψ(z)`.
    pub reference: GridLoop,
    /// Unitary factor `Y` with `F = Ψ·Y`.
    pub correction: GridLoop,
    /// Unitarity defect of the Iwasawa step.
    pub residual: f64,
}

/// Evaluates frames for one ZAP solution.
#[derive(Clone, Debug)]
pub struct FrameBuilder {
    sol: ZapSolution,
    flow: ReferenceFlow,
    opts: PipelineOptions,
}

impl FrameBuilder {
    pub fn new(sol: ZapSolution, opts: PipelineOptions) -> Self {
        let flow = ReferenceFlow::new(sol.potential().spec(), sol.grid(), opts.ode);
        FrameBuilder { sol, flow, opts }
    }

    pub fn solution(&self) -> &ZapSolution {
        &self.sol
    }

    pub fn flow(&self) -> &ReferenceFlow {
        &self.flow
    }

    /// `E·P·E⁻¹` at `z = e^{log}`, assembled in the eigenbasis of `A` so that no
    /// large factor is ever formed.
    pub fn conjugated_p(&self, log: Complex64) -> Result<GridLoop> {
        let z = log.exp();
        if z.norm() >= self.sol.potential().radius() {
            return Err(Error::OutOfDomain { z: z.to_string() });
        }
        let q = &self.sol.state().q;
        let mut acc = GridLoop::zeros(self.sol.grid());
        for c in q.iter().skip(1).rev() {
            acc = acc.add(c).scale(z);
        }
        let spectral = self.sol.spectral();
        let values = acc
            .values()
            .iter()
            .enumerate()
            .map(|(j, x)| {
                let u = spectral.eigenvectors(j);
                let d = spectral.eigenvalues(j);
                let mut y = u.adjoint() * x * u;
                for p in 0..3 {
                    for r in 0..3 {
                        y[(p, r)] *= (log * (d[p] - d[r])).exp();
                    }
                }
                Mat3::identity() + u * y * u.adjoint()
            })
            .collect();
        Ok(GridLoop::from_values(values))
    }

    /// Frame at `z = e^{log}` given `Ψ(Re log)`.
    pub fn frame_from_log(&self, log: Complex64, psi_t: &GridLoop) -> Result<FramePoint> {
        let rotation = self.sol.spectral().exp_scaled(c64(0.0, log.im));
        let reference = rotation.mul(psi_t);
        if self.sol.potential().is_unperturbed() {
            // P ≡ I, so H = E and F = Ψ exactly
            return Ok(FramePoint {
                frame: reference.clone(),
                reference,
                correction: GridLoop::identity(self.sol.grid()),
                residual: 0.0,
            });
        }
        let m = self.conjugated_p(log)?;
        let n = reference.adjoint().mul(&m).mul(&reference);
        let split = iwasawa_grid(&n, self.sol.grid(), self.opts.iwasawa_tol)?;
        Ok(FramePoint {
            frame: reference.mul(&split.unitary),
            reference,
            correction: split.unitary,
            residual: split.residual,
        })
    }

    pub fn frame(&self, z: Complex64) -> Result<FramePoint> {
        let log = self.sol.cut.log(z)?;
        let psi = self.flow.states_at(&[log.re])?.remove(0).frame();
        self.frame_from_log(log, &psi)
    }
}

/// Annulus `r_min ≤ |z| ≤ r_max`, sampled uniformly in `ln|z|` and in angle,
/// with angles strictly inside the slit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnulusGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub n_radial: usize,
    pub n_angular: usize,
    pub cut: BranchCut,
}

impl AnnulusGrid {
    pub fn new(r_min: f64, r_max: f64, n_radial: usize, n_angular: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_max >= r_min && r_max.is_finite()) || n_radial == 0 || n_angular == 0 {
            return Err(Error::InvalidParams(format!(
                "annulus needs 0 < r_min ≤ r_max and nonempty sampling, got [{r_min}, {r_max}] × {n_radial}×{n_angular}"
            )));
        }
        if n_radial == 1 && r_min != r_max {
            return Err(Error::InvalidParams("a single radial sample needs r_min = r_max".into()));
        }
        Ok(AnnulusGrid { r_min, r_max, n_radial, n_angular, cut: BranchCut::default() })
    }

    pub fn with_cut(mut self, cut: BranchCut) -> Self {
        self.cut = cut;
        self
    }

    pub fn len(&self) -> usize {
        self.n_radial * self.n_angular
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn radius(&self, i: usize) -> f64 {
        if self.n_radial == 1 {
            return self.r_min;
        }
        let s = i as f64 / (self.n_radial - 1) as f64;
        (self.r_min.ln() * (1.0 - s) + self.r_max.ln() * s).exp()
    }

    /// Branch logarithm of sample `(i, j)`.
    pub fn log(&self, i: usize, j: usize) -> Complex64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        let theta = self.cut.angle - two_pi + (j as f64 + 0.5) * two_pi / self.n_angular as f64;
        c64(self.radius(i).ln(), theta)
    }

    /// Samples in row-major order (radius outer, angle inner).
    pub fn points(&self) -> Vec<Complex64> {
        (0..self.n_radial)
            .flat_map(|i| (0..self.n_angular).map(move |j| self.log(i, j).exp()))
            .collect()
    }
}

/// Finite-difference data around one sample, in the order
/// centre, `+φ`, `−φ`, `+τ`, `−τ`.
#[derive(Clone, Debug)]
pub struct GeometryStencil {
    pub h: f64,
    pub lift: [Vector3<Complex64>; 5],
    pub u: [f64; 5],
    pub psi: [Complex64; 5],
}

#[derive(Clone, Debug)]
pub struct Geometry {
    /// Metric `2e^u dw dw̄`.
    pub u: f64,
    /// Cubic form `ψ dw³`.
    pub psi: Complex64,
    /// Horizontal lift `F(λ = 1)e₃ ∈ S⁵`.
    pub lift: Vector3<Complex64>,
    pub stencil: GeometryStencil,
}

#[derive(Clone, Debug)]
pub struct FrameSample {
    pub z: Complex64,
    /// `w = −i ln z`.
    pub w: Complex64,
    pub frame: GridLoop,
    pub residual: f64,
    pub geometry: Option<Geometry>,
}

/// Frames on an annular grid.
#[derive(Clone, Debug)]
pub struct FrameField {
    pub zgrid: AnnulusGrid,
    pub samples: Vec<FrameSample>,
    builder: FrameBuilder,
    references: Vec<ReferenceState>,
}

pub fn build_frames(
    pot: &PerturbedPotential,
    zgrid: &AnnulusGrid,
    grid: &CircleGrid,
    opts: PipelineOptions,
) -> Result<FrameField> {
    let sol = zap_solve(pot, opts.k_max, grid)?.with_cut(zgrid.cut);
    let builder = FrameBuilder::new(sol, opts);
    let ts: Vec<f64> = (0..zgrid.n_radial).map(|i| zgrid.radius(i).ln()).collect();
    let references = builder.flow.states_at(&ts)?;
    let frames: Vec<Ψ> = (0..zgrid.n_radial).map(|i| references[i].frame()).collect();
    let samples = (0..zgrid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / zgrid.n_angular, idx % zgrid.n_angular);
            let log = zgrid.log(i, j);
            let fp = builder.frame_from_log(log, &frames[i])?;
            Ok(FrameSample {
                z: log.exp(),
                w: log * c64(0.0, -1.0),
                frame: fp.frame,
                residual: fp.residual,
                geometry: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrameField { zgrid: *zgrid, samples, builder, references })
}

type Ψ = GridLoop;

/// λ⁻¹ coefficient of `F⁻¹∂_w F` from frames at the centre and its four
/// neighbours (`+φ`, `−φ`, `+τ`, `−τ`).
fn leading_coefficient(grid: &CircleGrid, centre: &GridLoop, nb: [&GridLoop; 4], h: f64) -> Mat3 {
    let m = grid.size();
    let mut acc = Mat3::zeros();
    for (j, &l) in grid.points().iter().enumerate() {
        let f_phi = (nb[0].at(j) - nb[1].at(j)) / c64(2.0 * h, 0.0);
        let f_tau = (nb[2].at(j) - nb[3].at(j)) / c64(2.0 * h, 0.0);
        let dw = (f_phi - f_tau * c64(0.0, 1.0)) * c64(0.5, 0.0);
        acc += centre.at(j).adjoint() * dw * l;
    }
    acc / c64(m as f64, 0.0)
}

/// `u` and `ψ` from the λ⁻¹ coefficient `X` of `F⁻¹∂_wF`: `|X₁₃| = e^{u/2}`,
/// and `ψ = −i X₁₃² X₂₁` is invariant under the residual diagonal gauge.
pub fn metric_and_cubic_form(x: &Mat3) -> (f64, Complex64) {
    let x13 = x[(0, 2)];
    (2.0 * x13.norm().ln(), c64(0.0, -1.0) * x13 * x13 * x[(1, 0)])
}

fn lift_of(frame: &GridLoop) -> Vector3<Complex64> {
    frame.at(0).column(2).clone_owned()
}

/// Fills in `u`, `ψ` and the lift on every sample.
pub fn extract_geometry(field: &mut FrameField) -> Result<()> {
    let h = field.builder.opts.fd_step;
    let zgrid = field.zgrid;
    let flow = &field.builder.flow;
    // Ψ at τ-offsets −2h … 2h, i.e. t + 2h … t − 2h
    let psis: Vec<[GridLoop; 5]> = field
        .references
        .par_iter()
        .map(|st| {
            let mut out: [Option<GridLoop>; 5] = Default::default();
            out[2] = Some(st.frame());
            let mut up = st.clone();
            let mut down = st.clone();
            for s in 1..=2 {
                up = flow.advance(&up, h)?;
                down = flow.advance(&down, -h)?;
                out[2 - s] = Some(up.frame());
                out[2 + s] = Some(down.frame());
            }
            Ok(out.map(|x| x.expect("filled")))
        })
        .collect::<Result<Vec<_>>>()?;
    let builder = &field.builder;
    let grid = builder.sol.grid().clone();
    let cut = zgrid.cut;
    let geoms = field
        .samples
        .par_iter()
        .enumerate()
        .map(|(idx, sample)| {
            let (i, j) = (idx / zgrid.n_angular, idx % zgrid.n_angular);
            let log = zgrid.log(i, j);
            // frame at offset (a, b)·h in (φ, τ)
            let at = |a: i32, b: i32| -> Result<GridLoop> {
                if a == 0 && b == 0 {
                    return Ok(sample.frame.clone());
                }
                let shifted = log + c64(-(b as f64) * h, a as f64 * h);
                let check = cut.log(shifted.exp()).map_err(|_| Error::BoundarySample { index: idx })?;
                if (check - shifted).norm() > 1e-9 {
                    return Err(Error::BoundarySample { index: idx });
                }
                Ok(builder.frame_from_log(shifted, &psis[i][(2 + b) as usize])?.frame)
            };
            let f00 = sample.frame.clone();
            let (fp0, fm0, f0p, f0m) = (at(1, 0)?, at(-1, 0)?, at(0, 1)?, at(0, -1)?);
            let (f20, fm20, f02, f0m2) = (at(2, 0)?, at(-2, 0)?, at(0, 2)?, at(0, -2)?);
            let (fpp, fpm, fmp, fmm) = (at(1, 1)?, at(1, -1)?, at(-1, 1)?, at(-1, -1)?);
            let xs = [
                leading_coefficient(&grid, &f00, [&fp0, &fm0, &f0p, &f0m], h),
                leading_coefficient(&grid, &fp0, [&f20, &f00, &fpp, &fpm], h),
                leading_coefficient(&grid, &fm0, [&f00, &fm20, &fmp, &fmm], h),
                leading_coefficient(&grid, &f0p, [&fpp, &fmp, &f02, &f00], h),
                leading_coefficient(&grid, &f0m, [&fpm, &fmm, &f00, &f0m2], h),
            ];
            let mut u = [0.0; 5];
            let mut psi = [c64(0.0, 0.0); 5];
            for (k, x) in xs.iter().enumerate() {
                (u[k], psi[k]) = metric_and_cubic_form(x);
            }
            let lift = [&f00, &fp0, &fm0, &f0p, &f0m].map(lift_of);
            Ok(Geometry { u: u[0], psi: psi[0], lift: lift[0], stencil: GeometryStencil { h, lift, u, psi } })
        })
        .collect::<Result<Vec<_>>>()?;
    for (s, g) in field.samples.iter_mut().zip(geoms) {
        s.geometry = Some(g);
    }
    Ok(())
}

impl FrameField {
    pub fn builder(&self) -> &FrameBuilder {
        &self.builder
    }

    /// Largest unitarity defect over all samples.
    pub fn unitary_defect(&self) -> f64 {
        self.samples.iter().map(|s| s.frame.unitary_defect()).fold(0.0, f64::max)
    }

    pub fn det_defect(&self) -> f64 {
        self.samples.iter().map(|s| s.frame.det_defect()).fold(0.0, f64::max)
    }

    pub fn twist_defect(&self) -> f64 {
        let grid = self.builder.sol.grid();
        self.samples
            .iter()
            .map(|s| crate::loops::grid_twist_defect_group(&s.frame, grid))
            .fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Monodromy
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct MonodromyReport {
    pub chi: GridLoop,
    pub chi_at_one: Mat3,
    pub closing_scalar: Option<Complex64>,
    pub is_closed: bool,
    pub cubic_root_flag: bool,
    /// `‖χ − e^{2πD·turns}‖_ω` for the default weight.
    pub deviation: f64,
    pub unitary_defect: f64,
}

/// `c` with `m = cI` and `c³ = 1`, both to `tol`.
pub fn closing_scalar(m: &Mat3, tol: f64) -> Option<Complex64> {
    let c = m.trace() / c64(3.0, 0.0);
    let off = (m - Mat3::identity() * c).norm();
    (off <= tol && (c.powi(3) - 1.0).norm() <= tol).then_some(c)
}

/// Continues `H` counterclockwise `turns` times around the puncture from `z0`
/// and reports `χ = H_continued·H(z0)⁻¹`.
pub fn monodromy(sol: &ZapSolution, z0: Complex64, turns: usize, opts: &OdeOptions) -> Result<MonodromyReport> {
    let grid = sol.grid();
    let start = sol.evaluate_h(z0)?;
    let n = MONODROMY_VERTICES * turns.max(1);
    let path: Vec<Complex64> = (0..=n)
        .map(|k| z0 * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / MONODROMY_VERTICES as f64))
        .collect();
    let end = integrate_ode_grid(sol.potential(), &path, &start, grid, opts)?;
    let chi = end.mul(&start.inverse()?);
    let expected = sol.spectral().exp_scaled(c64(0.0, 2.0 * std::f64::consts::PI * turns as f64));
    let deviation = grid_coefficients(&chi.sub(&expected), grid).wiener_norm(&Weight::default());
    let chi_at_one = *chi.at(0);
    let closing = closing_scalar(&chi_at_one, CLOSING_TOL);
    Ok(MonodromyReport {
        unitary_defect: chi.unitary_defect(),
        chi,
        chi_at_one,
        closing_scalar: closing,
        is_closed: closing.is_some(),
        cubic_root_flag: closing.is_some_and(|c| (c - 1.0).norm() > CLOSING_TOL),
        deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::iwasawa_grid;
    use crate::loops::to_grid;
    use crate::potentials::delaunay_matrix;

    #[test]
    fn reference_frame_at_one_is_identity() {
        let grid = CircleGrid::new(64).unwrap();
        let psi = delaunay_reference_frame(&DelaunaySpec::clifford(), c64(1.0, 0.0), &grid).unwrap();
        assert!(psi.max_abs_diff(&GridLoop::identity(&grid)) < 1e-14);
    }

    #[test]
    fn flow_matches_direct_iwasawa() {
        let grid = CircleGrid::new(128).unwrap();
        let spec = DelaunaySpec::new(0.9, c64(0.3, 0.8)).unwrap();
        let z = Complex64::from_polar(0.6, 0.7);
        let psi = delaunay_reference_frame(&spec, z, &grid).unwrap();
        let e = to_grid(&delaunay_matrix(&spec).scale(c64(0.0, -1.0) * z.ln()), &grid).exp();
        let direct = iwasawa_grid(&e, &grid, 1e-10).unwrap().unitary;
        assert!(psi.max_abs_diff(&direct) < 1e-9, "{}", psi.max_abs_diff(&direct));
        assert!(psi.unitary_defect() < 1e-11);
    }

    #[test]
    fn reference_plus_part_has_nonnegative_support() {
        let grid = CircleGrid::default();
        let spec = DelaunaySpec::clifford();
        let z = c64(0.05, 0.0);
        let psi = delaunay_reference_frame(&spec, z, &grid).unwrap();
        let e = to_grid(&delaunay_matrix(&spec).scale(c64(0.0, -1.0) * z.ln()), &grid).exp();
        let w = grid_coefficients(&psi.adjoint().mul(&e), &grid);
        let neg = w.window(-(grid.size() as i32) / 2, -1).coeffs().iter().map(|m| m.norm()).fold(0.0, f64::max);
        let scale = w.coeffs().iter().map(|m| m.norm()).fold(0.0, f64::max);
        assert!(neg < 1e-10 * scale, "{neg} vs {scale}");
    }

    #[test]
    fn closing_scalar_cases() {
        assert_eq!(closing_scalar(&Mat3::identity(), 1e-8), Some(c64(1.0, 0.0)));
        let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        assert!(closing_scalar(&(Mat3::identity() * w), 1e-8).is_some());
        assert!(closing_scalar(&(Mat3::identity() * c64(0.0, 1.0)), 1e-8).is_none());
    }

    #[test]
    fn annulus_samples_avoid_the_cut() {
        let g = AnnulusGrid::new(0.1, 1.0, 3, 4).unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 12);
        assert!(pts.iter().all(|z| g.cut.log(*z).is_ok()));
        assert!((g.radius(0) - 0.1).abs() < 1e-15 && (g.radius(2) - 1.0).abs() < 1e-15);
    }

    fn small_field(pot: &PerturbedPotential, r_min: f64, r_max: f64) -> FrameField {
        let grid = CircleGrid::new(128).unwrap();
        let zgrid = AnnulusGrid::new(r_min, r_max, 3, 6).unwrap();
        let mut field = build_frames(pot, &zgrid, &grid, PipelineOptions::default()).unwrap();
        extract_geometry(&mut field).unwrap();
        field
    }

    #[test]
    fn delaunay_cubic_form_is_constant() {
        let spec = DelaunaySpec::new(0.9, c64(0.3, 0.8)).unwrap();
        let field = small_field(&PerturbedPotential::delaunay(spec), 0.5, 1.0);
        for s in &field.samples {
            let g = s.geometry.as_ref().unwrap();
            assert!((g.psi - spec.psi()).norm() < 1e-6, "{} vs {}", g.psi, spec.psi());
            if (s.z.norm() - 1.0).abs() < 1e-12 {
                assert!((g.u - 2.0 * spec.a().norm().ln()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn clifford_metric_is_flat() {
        let spec = DelaunaySpec::clifford();
        let field = small_field(&PerturbedPotential::delaunay(spec), 0.2, 1.0);
        for s in &field.samples {
            let g = s.geometry.as_ref().unwrap();
            assert!((g.u.exp() - (-2.0 * g.u).exp() * g.psi.norm_sqr()).abs() < 1e-6);
        }
    }

    #[test]
    fn perturbed_frames_are_unitary_and_twisted() {
        let spec = DelaunaySpec::clifford();
        let n = crate::potentials::resonance_bound(&spec);
        let mut pert = std::collections::BTreeMap::new();
        let mut e = Mat3::zeros();
        e[(0, 2)] = c64(0.01, 0.0);
        e[(2, 1)] = c64(0.01, 0.0);
        pert.insert(n + 1, crate::loops::LoopMatrix::monomial(-1, crate::loops::project_to_grade(&e, 5)));
        let pot = PerturbedPotential::new(spec, pert, 2.0).unwrap();
        let grid = CircleGrid::new(128).unwrap();
        let zgrid = AnnulusGrid::new(0.05, 0.8, 3, 5).unwrap();
        let field = build_frames(&pot, &zgrid, &grid, PipelineOptions::default()).unwrap();
        assert!(field.unitary_defect() < 1e-10);
        assert!(field.det_defect() < 1e-10);
        assert!(field.twist_defect() < 1e-9, "{}", field.twist_defect());
    }
}
