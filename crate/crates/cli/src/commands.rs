use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use lagloop_core::export::{write_csv, write_obj, Chart, MeshSummary};
use lagloop_core::loops::{c64, CircleGrid, Weight};
use lagloop_core::pipeline::{build_frames, extract_geometry, monodromy, AnnulusGrid, FrameField, PipelineOptions};
use lagloop_core::potentials::{
    is_star_delaunay, period_check, resonance_bound, spectral_data, spectrum_at_one, DelaunaySpec, Period,
    PerturbedPotential, PotentialFile, DEFAULT_INTEGER_TOL, DEFAULT_RADIUS,
};
use lagloop_core::verification::{check_asymptotic, monodromy_checks, verify_field_with, VerificationReport};
use lagloop_core::zap::BranchCut;
use lagloop_core::Error;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{
    ChartArg, DelaunayArgs, ExportArgs, Format, Global, MeshArgs, PerturbArgs, PotentialArgs, SweepArgs, VerifyArgs,
};

pub const SWEEP_HEADER: &str = "b_re,b_im,delta1,delta2,delta3,star,period";

/// Raised after all outputs are written when `--strict` sees a failed check.
#[derive(Debug)]
pub struct StrictFailure {
    pub failed: Vec<String>,
}

impl fmt::Display for StrictFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "verification failed: {}", self.failed.join(", "))
    }
}

impl std::error::Error for StrictFailure {}

fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn create(out: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(out).map_err(|e| config(format!("cannot create {}: {e}", out.display())))?;
    let path = out.join(name);
    let file = File::create(&path).map_err(|e| config(format!("cannot write {}: {e}", path.display())))?;
    Ok((path, BufWriter::new(file)))
}

fn write_text(out: &Path, name: &str, text: &str) -> Result<()> {
    let (path, mut w) = create(out, name)?;
    writeln!(w, "{text}").and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

impl Global {
    fn lambda_grid(&self) -> Result<CircleGrid> {
        if 2 * self.trunc_d >= self.lambda_grid {
            return Err(config(format!(
                "--trunc-d {} needs a λ-grid larger than {}, got {}",
                self.trunc_d,
                2 * self.trunc_d,
                self.lambda_grid
            ))
            .into());
        }
        Ok(CircleGrid::new(self.lambda_grid)?)
    }

    fn pipeline(&self) -> Result<PipelineOptions> {
        for (name, v) in [("--tol-alg", self.tol_alg), ("--tol-geo", self.tol_geo), ("--cut-angle", self.cut_angle)] {
            if !v.is_finite() {
                return Err(config(format!("{name} must be finite")).into());
            }
        }
        if self.tol_alg <= 0.0 || self.tol_geo <= 0.0 {
            return Err(config("tolerances must be positive").into());
        }
        if self.kmax == 0 {
            return Err(config("--kmax must be at least 1").into());
        }
        Ok(PipelineOptions { k_max: self.kmax, ..PipelineOptions::default() })
    }

    fn annulus(&self, m: &MeshArgs) -> Result<AnnulusGrid> {
        Ok(AnnulusGrid::new(m.r_min, m.r_max, m.n_radial, m.n_angular)?.with_cut(BranchCut { angle: self.cut_angle }))
    }

    fn strict_check(&self, report: &VerificationReport) -> Result<()> {
        let failed: Vec<String> = report.checks.iter().filter(|c| !c.pass).map(|c| c.check.clone()).collect();
        for name in &failed {
            eprintln!("check failed: {name}");
        }
        if self.strict && !failed.is_empty() {
            return Err(StrictFailure { failed }.into());
        }
        Ok(())
    }
}

fn spec_of(a_im: f64, b_re: f64, b_im: f64) -> Result<DelaunaySpec, Error> {
    DelaunaySpec::new(a_im, c64(b_re, b_im))
}

// ---------------------------------------------------------------------------
// delaunay
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct Flatness {
    flat: bool,
    /// Smallest gap between eigenvalues of `−iD(λ)` over the λ-grid.
    min_eigenvalue_gap: f64,
    /// Arguments of the six λ on the circle where `−iD(λ)` has a zero eigenvalue.
    zero_eigenvalue_lambda_args: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct DelaunayAnalysis {
    a_im: f64,
    b_re: f64,
    b_im: f64,
    beta: f64,
    psi: [f64; 2],
    eigenvalues_at_one: [f64; 3],
    resonance_bound: usize,
    star_delaunay: bool,
    period: Option<Period>,
    flatness: Flatness,
}

fn analyse(spec: &DelaunaySpec, grid: &CircleGrid) -> DelaunayAnalysis {
    let spectral = spectral_data(spec, grid);
    let psi = spec.psi();
    let zero_args = if spectral.degenerate {
        Vec::new()
    } else {
        // λ⁶ = −ψ/ψ̄
        let base = std::f64::consts::PI + 2.0 * psi.arg();
        (0..6).map(|m| (base + 2.0 * std::f64::consts::PI * m as f64) / 6.0).collect()
    };
    DelaunayAnalysis {
        a_im: spec.a_im(),
        b_re: spec.b().re,
        b_im: spec.b().im,
        beta: spec.beta(),
        psi: [psi.re, psi.im],
        eigenvalues_at_one: spectrum_at_one(spec),
        resonance_bound: resonance_bound(spec),
        star_delaunay: is_star_delaunay(spec, DEFAULT_INTEGER_TOL),
        period: period_check(spec, DEFAULT_INTEGER_TOL),
        flatness: Flatness {
            flat: spectral.degenerate,
            min_eigenvalue_gap: spectral.min_gap,
            zero_eigenvalue_lambda_args: zero_args,
        },
    }
}

pub fn delaunay(g: &Global, args: &DelaunayArgs) -> Result<()> {
    let spec = spec_of(args.spec.a_im, args.spec.b_re, args.spec.b_im)?;
    let grid = g.lambda_grid()?;
    let analysis = analyse(&spec, &grid);
    let text = serde_json::to_string_pretty(&analysis).context("serializing analysis")?;
    write_text(&g.out, "delaunay.json", &text)?;
    if args.mesh {
        let zgrid = g.annulus(&args.grid)?;
        // the unperturbed potential is entire; the radius only has to clear the annulus
        let radius = DEFAULT_RADIUS.max(2.0 * zgrid.r_max);
        let pot = PerturbedPotential::new(spec, Default::default(), radius)?;
        let field = frames(g, &pot, &zgrid, &grid)?;
        write_mesh(g, &field, Format::Csv, ChartArg::Affine)?;
        write_mesh(g, &field, Format::Obj, ChartArg::Affine)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// pipeline commands
// ---------------------------------------------------------------------------

fn load_potential(g: &Global, args: &PotentialArgs) -> Result<PerturbedPotential> {
    let text = fs::read_to_string(&args.potential)
        .map_err(|e| config(format!("cannot read {}: {e}", args.potential.display())))?;
    let file = PotentialFile::from_json(&text)?;
    for entry in &file.perturbation {
        if let Some(c) = entry.coeffs.iter().find(|c| c.lambda_power > g.trunc_d as i32) {
            return Err(config(format!(
                "order {} carries λ-power {} beyond --trunc-d {}",
                entry.k, c.lambda_power, g.trunc_d
            ))
            .into());
        }
    }
    Ok(file.into_potential(args.radius)?)
}

fn frames(g: &Global, pot: &PerturbedPotential, zgrid: &AnnulusGrid, grid: &CircleGrid) -> Result<FrameField> {
    if zgrid.r_max >= pot.radius() {
        return Err(config(format!(
            "annulus radius {} reaches the convergence radius {}",
            zgrid.r_max,
            pot.radius()
        ))
        .into());
    }
    let mut field = build_frames(pot, zgrid, grid, g.pipeline()?)?;
    extract_geometry(&mut field)?;
    Ok(field)
}

/// Frames, geometry, field checks and the monodromy around the puncture.
fn verified(g: &Global, pot: &PerturbedPotential, mesh: &MeshArgs) -> Result<(FrameField, VerificationReport)> {
    let grid = g.lambda_grid()?;
    let zgrid = g.annulus(mesh)?;
    let field = frames(g, pot, &zgrid, &grid)?;
    let mut report = verify_field_with(&field, g.tol_geo, g.tol_alg)?;
    // base point opposite the cut, at the geometric mean radius
    let z0 = Complex64::from_polar((zgrid.r_min * zgrid.r_max).sqrt(), g.cut_angle - std::f64::consts::PI);
    let m = monodromy(field.builder().solution(), z0, 1, &g.pipeline()?.ode)?;
    for c in monodromy_checks(&m, g.tol_alg) {
        report.push(c);
    }
    match m.closing_scalar {
        Some(c) if m.cubic_root_flag => eprintln!("monodromy closes up to the cube root of unity {c}"),
        Some(_) => eprintln!("monodromy closes"),
        None => eprintln!("monodromy does not close"),
    }
    Ok((field, report))
}

fn write_mesh(g: &Global, field: &FrameField, format: Format, chart: ChartArg) -> Result<()> {
    let chart = match chart {
        ChartArg::Affine => Chart::Affine,
    };
    match format {
        Format::Csv => {
            let (path, mut w) = create(&g.out, "surface.csv")?;
            let rows = write_csv(field, &mut w)?;
            w.flush().with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {} ({rows} rows)", path.display());
        }
        Format::Obj => {
            let (path, mut w) = create(&g.out, "surface.obj")?;
            let MeshSummary { vertices, faces, chart_singular } = write_obj(field, chart, &mut w)?;
            w.flush().with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {} ({vertices} vertices, {faces} faces)", path.display());
            if chart_singular > 0 {
                eprintln!("chart singular: {chart_singular} samples skipped");
            }
        }
    }
    Ok(())
}

pub fn perturb(g: &Global, args: &PerturbArgs) -> Result<()> {
    let pot = load_potential(g, &args.potential)?;
    let (field, mut report) = verified(g, &pot, &args.grid)?;
    if args.verify_asymptotics {
        if let Some(&r) = args.asymptotic_radii.iter().find(|&&r| !(r > 0.0 && r < pot.radius())) {
            return Err(config(format!("asymptotic radius {r} is outside (0, {})", pot.radius())).into());
        }
        let a = check_asymptotic(
            &pot,
            &args.asymptotic_radii,
            g.cut_angle - std::f64::consts::PI,
            &g.lambda_grid()?,
            &Weight::default(),
            g.pipeline()?,
        )?;
        eprintln!("asymptotic slope {:.3}", a.slope);
        report.asymptotic = Some(a);
    }
    write_mesh(g, &field, Format::Csv, ChartArg::Affine)?;
    write_mesh(g, &field, Format::Obj, ChartArg::Affine)?;
    write_text(&g.out, "report.json", &report.to_json())?;
    g.strict_check(&report)
}

pub fn verify(g: &Global, args: &VerifyArgs) -> Result<()> {
    let pot = load_potential(g, &args.potential)?;
    let (_, report) = verified(g, &pot, &args.grid)?;
    write_text(&g.out, "report.json", &report.to_json())?;
    g.strict_check(&report)
}

pub fn export(g: &Global, args: &ExportArgs) -> Result<()> {
    let pot = load_potential(g, &args.potential)?;
    let field = frames(g, &pot, &g.annulus(&args.grid)?, &g.lambda_grid()?)?;
    write_mesh(g, &field, args.format, args.chart)
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

fn sweep_row(a_im: f64, b_re: f64, b_im: f64) -> String {
    let head = format!("{b_re:.16e},{b_im:.16e}");
    match spec_of(a_im, b_re, b_im) {
        Ok(spec) => {
            let d = spectrum_at_one(&spec);
            let period = period_check(&spec, DEFAULT_INTEGER_TOL).map(|p| format!("{:.16e}", p.p)).unwrap_or_default();
            let star = is_star_delaunay(&spec, DEFAULT_INTEGER_TOL);
            format!("{head},{:.16e},{:.16e},{:.16e},{star},{period}", d[0], d[1], d[2])
        }
        Err(e) => {
            eprintln!("b = {b_re} + {b_im}i: {e}");
            format!("{head},,,,,")
        }
    }
}

pub fn sweep(g: &Global, args: &SweepArgs) -> Result<()> {
    let n = args.steps;
    let at = |i: usize, from: f64, to: f64| {
        if n <= 1 {
            from
        } else {
            from + (to - from) * i as f64 / (n - 1) as f64
        }
    };
    let rows: Vec<String> = (0..n)
        .into_par_iter()
        .map(|i| sweep_row(args.a_im, at(i, args.b_re_from, args.b_re_to), at(i, args.b_im_from, args.b_im_to)))
        .collect();
    let mut text = String::from(SWEEP_HEADER);
    for row in rows {
        text.push('\n');
        text.push_str(&row);
    }
    write_text(&g.out, "sweep.csv", &text)
}
