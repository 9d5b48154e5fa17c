//! Command-line front end: evaluate models, sweep λ-grids into CSV tables,
//! and run identity-verification suites with a pass/fail exit status.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use crate::coupled::{self, CoupledSystem};
use crate::dissipative::{self, DissipativeParameter};
use crate::linalg::c;
use crate::matfun::DEFAULT_RANK_TOL;
use crate::model_io::{
    self, CoupledSweepRow, DissipativeSweepRow, ParameterKind, SaSweepRow, SweepRow,
};
use crate::nevanlinna::NevanlinnaModel;
use crate::sa_scatter::{self, SelfAdjointParameter};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_PARSE_IO: i32 = 3;

/// Default tolerance for algebraically exact identities (Birman-Krein).
pub const DEFAULT_BK_TOL: f64 = 1e-8;
/// Default tolerance for quadrature-backed identities (trace formulas).
pub const DEFAULT_TRACE_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(
    name = "weylscat",
    about = "Scattering matrices, spectral shift functions and Birman-Krein checks \
             for matrix Nevanlinna models",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Sa,
    Dissipative,
    Coupled,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate M(λ); boundary value M(λ+i0) when the imaginary part is
    /// omitted or zero.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// λ as RE or RE,IM
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
    },
    /// Sweep a λ-grid and write one CSV row per grid point.
    Sweep {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        param: PathBuf,
        /// Inclusive grid A:B:N
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        rank_tol: f64,
    },
    /// Verify the identities of the chosen mode on a grid; exits 0 only if
    /// every identity passes.
    Verify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        param: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Trace-formula evaluation point as RE,IM
        #[arg(long, default_value = "0,1", allow_hyphen_values = true)]
        z: String,
        /// Overrides both default tolerances when given.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        rank_tol: f64,
    },
}

/// Uniform inclusive grid parsed from A:B:N.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn parse(text: &str) -> Result<GridSpec> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!(
                "grid {text:?}: expected A:B:N with start, stop and count"
            )));
        }
        let start: f64 = parts[0]
            .parse()
            .map_err(|_| Error::Parse(format!("grid start {:?} is not a number", parts[0])))?;
        let stop: f64 = parts[1]
            .parse()
            .map_err(|_| Error::Parse(format!("grid stop {:?} is not a number", parts[1])))?;
        let count: usize = parts[2]
            .parse()
            .map_err(|_| Error::Parse(format!("grid count {:?} is not a positive integer", parts[2])))?;
        if count == 0 {
            return Err(Error::Validation("grid count must be at least 1".into()));
        }
        if count > 1 && !(start < stop) {
            return Err(Error::Validation(format!(
                "grid start {start} must be below stop {stop} when count > 1"
            )));
        }
        Ok(GridSpec { start, stop, count })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count as f64 - 1.0);
        (0..self.count)
            .map(|k| self.start + step * k as f64)
            .collect()
    }
}

/// RE or RE,IM.
pub fn parse_complex(text: &str) -> Result<Complex64> {
    let parts: Vec<&str> = text.split(',').collect();
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse()
            .map_err(|_| Error::Parse(format!("{s:?} is not a number")))
    };
    match parts.as_slice() {
        [re] => Ok(c(parse(re)?, 0.0)),
        [re, im] => Ok(c(parse(re)?, parse(im)?)),
        _ => Err(Error::Parse(format!(
            "{text:?}: expected RE or RE,IM"
        ))),
    }
}

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Parse(_) | Error::Io(_) => EXIT_PARSE_IO,
        Error::Validation(_) | Error::Dimension(_) => EXIT_VALIDATION,
        Error::Domain(_)
        | Error::ExceptionalPoint { .. }
        | Error::Singular(_)
        | Error::Quadrature(_) => EXIT_NUMERICAL,
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn load_model(path: &Path) -> Result<NevanlinnaModel> {
    model_io::parse_model(&read_file(path)?)
}

fn load_parameter(path: &Path, dim: usize) -> Result<ParameterKind> {
    model_io::parse_parameter(&read_file(path)?, dim)
}

/// Runs the parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Eval { model, lambda } => cmd_eval(&model, &lambda),
        Command::Sweep {
            model,
            param,
            grid,
            mode,
            out,
            rank_tol,
        } => cmd_sweep(&model, &param, &grid, mode, &out, rank_tol),
        Command::Verify {
            model,
            param,
            grid,
            mode,
            z,
            tol,
            rank_tol,
        } => cmd_verify(&model, &param, &grid, mode, &z, tol, rank_tol),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

fn cmd_eval(model_path: &Path, lambda: &str) -> Result<i32> {
    let model = load_model(model_path)?;
    let lambda = parse_complex(lambda)?;
    let value = if lambda.im == 0.0 {
        model.boundary_value(lambda.re)?
    } else {
        model.eval(lambda)?
    };
    let doc: Vec<Vec<[f64; 2]>> = (0..value.nrows())
        .map(|i| {
            (0..value.ncols())
                .map(|j| [value[(i, j)].re, value[(i, j)].im])
                .collect()
        })
        .collect();
    println!("{}", serde_json::to_string(&doc).expect("matrix serialization"));
    Ok(EXIT_OK)
}

fn require_selfadjoint(param: ParameterKind) -> Result<SelfAdjointParameter> {
    match param {
        ParameterKind::SelfAdjoint(theta) => Ok(theta),
        _ => Err(Error::Validation(
            "mode sa needs a theta or relation parameter file".to_string(),
        )),
    }
}

fn require_dissipative(param: ParameterKind, rank_tol: f64) -> Result<DissipativeParameter> {
    match param {
        ParameterKind::Dissipative(d) => DissipativeParameter::new(d, rank_tol),
        _ => Err(Error::Validation(
            "mode dissipative needs a dissipative parameter file".to_string(),
        )),
    }
}

fn require_coupled(param: ParameterKind, model: &NevanlinnaModel) -> Result<CoupledSystem> {
    match param {
        ParameterKind::Coupled(tau) => CoupledSystem::new(model.clone(), tau),
        _ => Err(Error::Validation(
            "mode coupled needs a coupled parameter file".to_string(),
        )),
    }
}

fn is_numerical(err: &Error) -> bool {
    exit_code_for(err) == EXIT_NUMERICAL
}

fn write_csv<R: SweepRow>(rows: &[R], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    model_io::write_sweep_csv(rows, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

fn cmd_sweep(
    model_path: &Path,
    param_path: &Path,
    grid: &str,
    mode: Mode,
    out: &Path,
    rank_tol: f64,
) -> Result<i32> {
    let model = load_model(model_path)?;
    let grid = GridSpec::parse(grid)?;
    let param = load_parameter(param_path, model.dim())?;
    let points = grid.points();

    match mode {
        Mode::Sa => {
            let theta = require_selfadjoint(param)?;
            let mut rows = Vec::with_capacity(points.len());
            for &lambda in &points {
                match sa_scatter::scattering_matrix(&model, &theta, lambda, rank_tol) {
                    Ok(v) => rows.push(SaSweepRow::from(&v)),
                    Err(err) if is_numerical(&err) => {
                        eprintln!("skipping lambda = {lambda}: {err}");
                        rows.push(SaSweepRow::skipped(lambda));
                    }
                    Err(err) => return Err(err),
                }
            }
            write_csv(&rows, out)?;
        }
        Mode::Dissipative => {
            let dp = require_dissipative(param, rank_tol)?;
            let mut rows = Vec::with_capacity(points.len());
            for &lambda in &points {
                match dissipative::dilation_scattering(&model, &dp, lambda, rank_tol) {
                    Ok(v) => rows.push(DissipativeSweepRow::from(&v)),
                    Err(err) if is_numerical(&err) => {
                        eprintln!("skipping lambda = {lambda}: {err}");
                        rows.push(DissipativeSweepRow::skipped(lambda));
                    }
                    Err(err) => return Err(err),
                }
            }
            write_csv(&rows, out)?;
        }
        Mode::Coupled => {
            let sys = require_coupled(param, &model)?;
            let mut rows = Vec::with_capacity(points.len());
            for &lambda in &points {
                match coupled::coupled_scattering(&sys, lambda, rank_tol) {
                    Ok(v) => rows.push(CoupledSweepRow::from(&v)),
                    Err(err) if is_numerical(&err) => {
                        eprintln!("skipping lambda = {lambda}: {err}");
                        rows.push(CoupledSweepRow::skipped(lambda));
                    }
                    Err(err) => return Err(err),
                }
            }
            write_csv(&rows, out)?;
        }
    }
    Ok(EXIT_OK)
}

struct IdentityLine {
    name: String,
    max_residual: f64,
    points: usize,
    skipped: usize,
    tol: f64,
}

impl IdentityLine {
    fn passed(&self) -> bool {
        self.points > 0 && self.max_residual <= self.tol
    }

    fn print(&self) {
        println!(
            "{}: max residual {:.3e} over {} points (skipped: {}) tol {:.1e}: {}",
            self.name,
            self.max_residual,
            self.points,
            self.skipped,
            self.tol,
            if self.passed() { "PASS" } else { "FAIL" }
        );
    }
}

fn cmd_verify(
    model_path: &Path,
    param_path: &Path,
    grid: &str,
    mode: Mode,
    z: &str,
    tol: Option<f64>,
    rank_tol: f64,
) -> Result<i32> {
    let model = load_model(model_path)?;
    let grid = GridSpec::parse(grid)?;
    let param = load_parameter(param_path, model.dim())?;
    let z = parse_complex(z)?;
    if z.im == 0.0 {
        return Err(Error::Validation(
            "trace formula point z must have a nonzero imaginary part".to_string(),
        ));
    }
    let bk_tol = tol.unwrap_or(DEFAULT_BK_TOL);
    let trace_tol = tol.unwrap_or(DEFAULT_TRACE_TOL);
    let points = grid.points();
    let mut lines: Vec<IdentityLine> = Vec::new();

    match mode {
        Mode::Sa => {
            let theta = require_selfadjoint(param)?;
            let report = sa_scatter::verify_birman_krein(&model, &theta, &points, rank_tol);
            lines.push(IdentityLine {
                name: "birman_krein".into(),
                max_residual: report.max_residual(),
                points: report.residuals.len(),
                skipped: report.skipped.len(),
                tol: bk_tol,
            });
            let residual = sa_scatter::verify_trace_formula(&model, &theta, z, trace_tol)?;
            lines.push(IdentityLine {
                name: format!("trace_formula[z={z}]"),
                max_residual: residual,
                points: 1,
                skipped: 0,
                tol: trace_tol,
            });
        }
        Mode::Dissipative => {
            let dp = require_dissipative(param, rank_tol)?;
            let report = dissipative::verify_modified_bk(&model, &dp, &points, rank_tol);
            let max_sd = report
                .residuals
                .iter()
                .fold(0.0_f64, |m, r| m.max(r.residual_sd));
            let max_slp = report
                .residuals
                .iter()
                .fold(0.0_f64, |m, r| m.max(r.residual_slp));
            lines.push(IdentityLine {
                name: "modified_bk_sd".into(),
                max_residual: max_sd,
                points: report.residuals.len(),
                skipped: report.skipped.len(),
                tol: bk_tol,
            });
            lines.push(IdentityLine {
                name: "modified_bk_slp".into(),
                max_residual: max_slp,
                points: report.residuals.len(),
                skipped: report.skipped.len(),
                tol: bk_tol,
            });
            let residual = dissipative::verify_modified_trace_formula(&model, &dp, z, trace_tol)?;
            lines.push(IdentityLine {
                name: format!("modified_trace[z={z}]"),
                max_residual: residual,
                points: 1,
                skipped: 0,
                tol: trace_tol,
            });
        }
        Mode::Coupled => {
            let sys = require_coupled(param, &model)?;
            let report = coupled::verify_coupled_bk(&sys, &points, rank_tol);
            let max_h = report
                .residuals
                .iter()
                .fold(0.0_f64, |m, r| m.max(r.residual_h));
            let max_g = report
                .residuals
                .iter()
                .fold(0.0_f64, |m, r| m.max(r.residual_g));
            lines.push(IdentityLine {
                name: "coupled_bk_h".into(),
                max_residual: max_h,
                points: report.residuals.len(),
                skipped: report.skipped.len(),
                tol: bk_tol,
            });
            lines.push(IdentityLine {
                name: "coupled_bk_g".into(),
                max_residual: max_g,
                points: report.residuals.len(),
                skipped: report.skipped.len(),
                tol: bk_tol,
            });
            let residual = coupled::verify_coupled_trace_formula(&sys, z, trace_tol)?;
            lines.push(IdentityLine {
                name: format!("coupled_trace[z={z}]"),
                max_residual: residual,
                points: 1,
                skipped: 0,
                tol: trace_tol,
            });
        }
    }

    let mut all_pass = true;
    for line in &lines {
        line.print();
        all_pass &= line.passed();
    }
    println!("overall: {}", if all_pass { "PASS" } else { "FAIL" });
    Ok(if all_pass { EXIT_OK } else { EXIT_NUMERICAL })
}
