//! Path integration of `dC = C·η` for grid-sampled loops.
//!
//! Each straight segment `z(t) = z_a + t(z_b − z_a)`, `t ∈ [0, 1]`, is
//! integrated with the embedded Dormand–Prince 5(4) pair; all grid samples
//! share one step size.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::loops::{from_grid, CircleGrid, GridLoop, LoopMatrix, DEFAULT_ALGEBRAIC_TOL};
use crate::potentials::HolomorphicPotential;

/// Step control for [`integrate_ode`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest accepted step in the segment parameter `t`.
    pub min_step: f64,
    /// Distance to a pole below which a path is rejected.
    pub pole_clearance: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-12, atol: 1e-12, min_step: 1e-12, pole_clearance: 1e-10 }
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn combine(y: &GridLoop, h: f64, ks: &[GridLoop], w: &[f64]) -> GridLoop {
    let mut out = y.clone();
    for (k, &c) in ks.iter().zip(w) {
        if c == 0.0 {
            continue;
        }
        for (o, v) in out.values_mut().iter_mut().zip(k.values()) {
            *o += v * Complex64::new(h * c, 0.0);
        }
    }
    out
}

/// Integrates `y' = f(t, y)` on `[0, 1]` from `y0`.
pub(crate) fn dopri<F>(y0: &GridLoop, f: F, opts: &OdeOptions, origin: Complex64) -> Result<GridLoop>
where
    F: Fn(f64, &GridLoop) -> Result<GridLoop>,
{
    let mut t = 0.0;
    let mut y = y0.clone();
    let mut h = 0.05;
    let mut k1 = f(0.0, &y)?;
    while t < 1.0 {
        if t + h > 1.0 {
            h = 1.0 - t;
        }
        let mut ks = vec![k1.clone()];
        for s in 1..7 {
            let ys = combine(&y, h, &ks, &A[s][..s]);
            ks.push(f(t + C[s] * h, &ys)?);
        }
        let y5 = combine(&y, h, &ks, &B5);
        let y4 = combine(&y, h, &ks, &B4);
        let err = y5
            .values()
            .iter()
            .zip(y4.values())
            .zip(y.values())
            .map(|((a, b), c)| {
                let scale = opts.atol + opts.rtol * a.norm().max(c.norm());
                (a - b).norm() / scale
            })
            .fold(0.0, f64::max);
        if err <= 1.0 {
            t += h;
            y = y5;
            k1 = ks.pop().expect("seven stages");
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < opts.min_step && t < 1.0 {
            return Err(Error::StepUnderflow { at: origin.norm() + t });
        }
    }
    Ok(y)
}

fn segment_distance(a: Complex64, b: Complex64, p: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let s = (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (a + d * s - p).norm()
}

/// `C` at the end of the polyline `path`, solving `dC = C·η` from `init`.
pub fn integrate_ode_grid(
    pot: &dyn HolomorphicPotential,
    path: &[Complex64],
    init: &GridLoop,
    grid: &CircleGrid,
    opts: &OdeOptions,
) -> Result<GridLoop> {
    let dom = pot.domain();
    for &z in path {
        if z.norm() >= dom.radius {
            return Err(Error::OutOfDomain { z: z.to_string() });
        }
    }
    let mut c = init.clone();
    for seg in path.windows(2) {
        let (za, zb) = (seg[0], seg[1]);
        if dom.punctured && segment_distance(za, zb, Complex64::new(0.0, 0.0)) < opts.pole_clearance {
            return Err(Error::PoleOnPath { pole: "0".into() });
        }
        let dz = zb - za;
        c = dopri(
            &c,
            |t, y| {
                let eta = pot.sample(za + dz * t, grid)?;
                Ok(y.mul(&eta).scale(dz))
            },
            opts,
            za,
        )?;
    }
    Ok(c)
}

/// Coefficient-loop front end of [`integrate_ode_grid`]; fails with
/// [`Error::Alias`] if the result is not resolved by the grid.
pub fn integrate_ode(
    pot: &dyn HolomorphicPotential,
    path: &[Complex64],
    init: &LoopMatrix,
    grid: &CircleGrid,
) -> Result<LoopMatrix> {
    let start = crate::loops::to_grid(init, grid);
    let end = integrate_ode_grid(pot, path, &start, grid, &OdeOptions::default())?;
    Ok(from_grid(&end, grid, grid.max_degree(), DEFAULT_ALGEBRAIC_TOL)?.trimmed(1e-16))
}
