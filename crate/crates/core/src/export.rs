//! CSV and OBJ writers for sampled surfaces.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pipeline::FrameField;

pub const CSV_HEADER: &str = "z_re,z_im,u,psi_re,psi_im,f1_re,f1_im,f2_re,f2_im,f3_re,f3_im";
/// Samples with `|f₃|` below this are left out of the affine chart.
pub const CHART_THRESHOLD: f64 = 0.1;

/// Projection of `[f₁ : f₂ : f₃]` to ℝ³ used for mesh vertices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Chart {
    /// `(Re f₁/f₃, Im f₁/f₃, Re f₂/f₃)`.
    #[default]
    Affine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MeshSummary {
    pub vertices: usize,
    pub faces: usize,
    /// Samples dropped because the chart is singular there.
    pub chart_singular: usize,
}

fn io(e: std::io::Error) -> Error {
    Error::Config(format!("write failed: {e}"))
}

/// One row per sample, 17 significant digits.
pub fn write_csv<W: Write>(field: &FrameField, out: &mut W) -> Result<usize> {
    writeln!(out, "{CSV_HEADER}").map_err(io)?;
    for (index, s) in field.samples.iter().enumerate() {
        let g = s.geometry.as_ref().ok_or(Error::BoundarySample { index })?;
        let mut cells = vec![s.z.re, s.z.im, g.u, g.psi.re, g.psi.im];
        cells.extend(g.lift.iter().flat_map(|c| [c.re, c.im]));
        let line: Vec<String> = cells.iter().map(|x| format!("{x:.16e}")).collect();
        writeln!(out, "{}", line.join(",")).map_err(io)?;
    }
    Ok(field.samples.len())
}

fn chart_point(chart: Chart, f: &[Complex64; 3]) -> Option<[f64; 3]> {
    match chart {
        Chart::Affine => {
            if f[2].norm() <= CHART_THRESHOLD {
                return None;
            }
            let (p, q) = (f[0] / f[2], f[1] / f[2]);
            Some([p.re, p.im, q.re])
        }
    }
}

/// Vertices in the chosen chart, quads from the structured annulus grid.
/// Faces touching a dropped sample are omitted; the angular direction is not
/// wrapped because the samples stop at the cut.
pub fn write_obj<W: Write>(field: &FrameField, chart: Chart, out: &mut W) -> Result<MeshSummary> {
    let (nr, na) = (field.zgrid.n_radial, field.zgrid.n_angular);
    let mut vertex_of = vec![None; field.samples.len()];
    let mut next = 1usize;
    for (index, s) in field.samples.iter().enumerate() {
        let g = s.geometry.as_ref().ok_or(Error::BoundarySample { index })?;
        if let Some(p) = chart_point(chart, &[g.lift[0], g.lift[1], g.lift[2]]) {
            writeln!(out, "v {:.8e} {:.8e} {:.8e}", p[0], p[1], p[2]).map_err(io)?;
            vertex_of[index] = Some(next);
            next += 1;
        }
    }
    let mut faces = 0;
    for i in 0..nr.saturating_sub(1) {
        for j in 0..na.saturating_sub(1) {
            let corners = [i * na + j, (i + 1) * na + j, (i + 1) * na + j + 1, i * na + j + 1];
            if let [Some(a), Some(b), Some(c), Some(d)] = corners.map(|k| vertex_of[k]) {
                writeln!(out, "f {a} {b} {c} {d}").map_err(io)?;
                faces += 1;
            }
        }
    }
    let vertices = next - 1;
    Ok(MeshSummary { vertices, faces, chart_singular: field.samples.len() - vertices })
}
