//! Parsing and serialization of model/parameter description files and CSV
//! sweep output.
//!
//! Models are stored as JSON-compatible structured objects: complex numbers
//! as two-element `[re, im]` arrays, matrices as row-major nested arrays.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coupled::ChannelScatterValue;
use crate::dissipative::DilationScatterValue;
use crate::linalg::{self, c, herm_part, CMatrix};
use crate::nevanlinna::{HerglotzTerm, NevanlinnaModel};
use crate::sa_scatter::{ScatterValue, SelfAdjointParameter};
use crate::{Error, Result};

pub const SCHEMA_VERSION: &str = "1";
/// Hermitian/dissipativity tolerance applied when loading parameters.
const LOAD_TOL: f64 = 1e-10;

type MatrixDoc = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub schema_version: String,
    pub name: String,
    pub dim: usize,
    pub terms: Vec<TermDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TermDocument {
    Constant {
        #[serde(rename = "C")]
        c: MatrixDoc,
    },
    Affine {
        #[serde(rename = "A")]
        a: MatrixDoc,
        #[serde(rename = "B")]
        b: MatrixDoc,
    },
    Pole {
        t: f64,
        #[serde(rename = "G")]
        g: MatrixDoc,
    },
    AcBox {
        a: f64,
        b: f64,
        #[serde(rename = "R")]
        r: MatrixDoc,
    },
    Sqrt {
        #[serde(rename = "G")]
        g: MatrixDoc,
    },
}

/// Extension parameter file: exactly one of the four shapes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ParameterDocument {
    Theta {
        op_basis: BasisDocument,
        theta_op: MatrixDoc,
    },
    Relation {
        op_rank: usize,
    },
    Dissipative {
        #[serde(rename = "D")]
        d: MatrixDoc,
    },
    Coupled {
        model_g: ModelDocument,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasisDocument {
    Keyword(String),
    Matrix(MatrixDoc),
}

/// A parsed extension parameter, still independent of rank tolerances.
#[derive(Debug, Clone)]
pub enum ParameterKind {
    SelfAdjoint(SelfAdjointParameter),
    /// Raw dissipative matrix; pair with a rank tolerance to build the
    /// channel subspace.
    Dissipative(CMatrix),
    /// Exit-channel model of a coupled system.
    Coupled(NevanlinnaModel),
}

fn matrix_from_doc(doc: &MatrixDoc, rows: usize, cols: usize, what: &str) -> Result<CMatrix> {
    if doc.len() != rows || doc.iter().any(|row| row.len() != cols) {
        return Err(Error::Validation(format!(
            "{what}: expected a {rows}x{cols} matrix, got {}x{:?}",
            doc.len(),
            doc.iter().map(Vec::len).max().unwrap_or(0)
        )));
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| {
        c(doc[i][j][0], doc[i][j][1])
    }))
}

fn matrix_to_doc(m: &CMatrix) -> MatrixDoc {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn parse_json<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| Error::Parse(format!("{} (at {})", e.inner(), e.path())))
}

/// Parses and validates a model file.
pub fn parse_model(text: &str) -> Result<NevanlinnaModel> {
    let doc: ModelDocument = parse_json(text)?;
    model_from_document(&doc)
}

pub fn model_from_document(doc: &ModelDocument) -> Result<NevanlinnaModel> {
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::Parse(format!(
            "unsupported schema_version {:?} (expected {SCHEMA_VERSION:?})",
            doc.schema_version
        )));
    }
    let n = doc.dim;
    let mut terms = Vec::with_capacity(doc.terms.len());
    for (i, term) in doc.terms.iter().enumerate() {
        let what = |field: &str| format!("terms[{i}].{field}");
        let term = match term {
            TermDocument::Constant { c } => HerglotzTerm::Constant {
                c: matrix_from_doc(c, n, n, &what("C"))?,
            },
            TermDocument::Affine { a, b } => HerglotzTerm::Affine {
                a: matrix_from_doc(a, n, n, &what("A"))?,
                b: matrix_from_doc(b, n, n, &what("B"))?,
            },
            TermDocument::Pole { t, g } => HerglotzTerm::Pole {
                t: *t,
                g: matrix_from_doc(g, n, n, &what("G"))?,
            },
            TermDocument::AcBox { a, b, r } => HerglotzTerm::AcBox {
                a: *a,
                b: *b,
                r: matrix_from_doc(r, n, n, &what("R"))?,
            },
            TermDocument::Sqrt { g } => HerglotzTerm::Sqrt {
                g: matrix_from_doc(g, n, n, &what("G"))?,
            },
        };
        terms.push(term);
    }
    NevanlinnaModel::new(doc.name.clone(), n, terms)
}

pub fn model_to_document(model: &NevanlinnaModel) -> ModelDocument {
    let terms = model
        .terms()
        .iter()
        .map(|term| match term {
            HerglotzTerm::Constant { c } => TermDocument::Constant {
                c: matrix_to_doc(c),
            },
            HerglotzTerm::Affine { a, b } => TermDocument::Affine {
                a: matrix_to_doc(a),
                b: matrix_to_doc(b),
            },
            HerglotzTerm::Pole { t, g } => TermDocument::Pole {
                t: *t,
                g: matrix_to_doc(g),
            },
            HerglotzTerm::AcBox { a, b, r } => TermDocument::AcBox {
                a: *a,
                b: *b,
                r: matrix_to_doc(r),
            },
            HerglotzTerm::Sqrt { g } => TermDocument::Sqrt {
                g: matrix_to_doc(g),
            },
        })
        .collect();
    ModelDocument {
        schema_version: SCHEMA_VERSION.to_string(),
        name: model.name().to_string(),
        dim: model.dim(),
        terms,
    }
}

pub fn serialize_model(model: &NevanlinnaModel) -> String {
    serde_json::to_string_pretty(&model_to_document(model)).expect("document serialization")
}

/// Parses a parameter file for a model of dimension `dim`.
pub fn parse_parameter(text: &str, dim: usize) -> Result<ParameterKind> {
    let doc: ParameterDocument = parse_json(text)?;
    match doc {
        ParameterDocument::Theta { op_basis, theta_op } => {
            let basis = match op_basis {
                BasisDocument::Keyword(word) if word == "full" => CMatrix::identity(dim, dim),
                BasisDocument::Keyword(word) => {
                    return Err(Error::Parse(format!(
                        "theta.op_basis: unknown keyword {word:?} (expected \"full\" or a matrix)"
                    )));
                }
                BasisDocument::Matrix(doc) => {
                    let r = doc.first().map_or(0, Vec::len);
                    matrix_from_doc(&doc, dim, r, "theta.op_basis")?
                }
            };
            let r = basis.ncols();
            let theta = matrix_from_doc(&theta_op, r, r, "theta.theta_op")?;
            if linalg::hermitian_defect(&theta) > LOAD_TOL {
                return Err(Error::Validation(
                    "theta.theta_op: Hermitian check failed".to_string(),
                ));
            }
            let theta = herm_part(&theta);
            Ok(ParameterKind::SelfAdjoint(SelfAdjointParameter::subspace(
                basis, theta,
            )?))
        }
        ParameterDocument::Relation { op_rank } => {
            if op_rank != 0 {
                return Err(Error::Validation(format!(
                    "relation.op_rank: only the pure relation (op_rank 0) is supported, got {op_rank}"
                )));
            }
            Ok(ParameterKind::SelfAdjoint(SelfAdjointParameter::relation(
                dim,
            )))
        }
        ParameterDocument::Dissipative { d } => {
            let d = matrix_from_doc(&d, dim, dim, "dissipative.D")?;
            let largest = linalg::max_herm_eigenvalue(&linalg::imag_part(&d));
            if largest > LOAD_TOL * linalg::fro_norm(&d).max(1.0) {
                return Err(Error::Validation(format!(
                    "dissipative.D: Im D ⪯ 0 fails (largest eigenvalue {largest:.3e})"
                )));
            }
            Ok(ParameterKind::Dissipative(d))
        }
        ParameterDocument::Coupled { model_g } => {
            let model = model_from_document(&model_g)?;
            if model.dim() != dim {
                return Err(Error::Dimension(format!(
                    "coupled.model_g: dimension {} does not match model dimension {dim}",
                    model.dim()
                )));
            }
            Ok(ParameterKind::Coupled(model))
        }
    }
}

/// One CSV row of a sweep; skipped grid points leave the numeric fields
/// empty and set the `skipped` flag.
pub trait SweepRow {
    fn header() -> &'static str;
    fn to_csv(&self) -> String;
}

fn fmt_f64(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn fmt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone)]
pub struct SaSweepRow {
    pub lambda: f64,
    pub rank: Option<usize>,
    pub det: Option<Complex64>,
    pub ssf: Option<f64>,
    pub residual_bk: Option<f64>,
    pub skipped: bool,
}

impl SaSweepRow {
    pub fn skipped(lambda: f64) -> Self {
        SaSweepRow {
            lambda,
            rank: None,
            det: None,
            ssf: None,
            residual_bk: None,
            skipped: true,
        }
    }
}

impl From<&ScatterValue> for SaSweepRow {
    fn from(v: &ScatterValue) -> Self {
        SaSweepRow {
            lambda: v.lambda,
            rank: Some(v.subspace.rank),
            det: Some(v.det_s),
            ssf: Some(v.ssf),
            residual_bk: Some(crate::sa_scatter::bk_residual(v.det_s, v.ssf)),
            skipped: false,
        }
    }
}

impl SweepRow for SaSweepRow {
    fn header() -> &'static str {
        "lambda,rank,det_re,det_im,ssf,residual_bk,skipped"
    }
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.lambda,
            fmt_usize(self.rank),
            fmt_f64(self.det.map(|d| d.re)),
            fmt_f64(self.det.map(|d| d.im)),
            fmt_f64(self.ssf),
            fmt_f64(self.residual_bk),
            u8::from(self.skipped)
        )
    }
}

#[derive(Debug, Clone)]
pub struct DissipativeSweepRow {
    pub lambda: f64,
    pub rank_m: Option<usize>,
    pub rank_d: Option<usize>,
    pub det_sd: Option<Complex64>,
    pub det_slp: Option<Complex64>,
    pub eta_d: Option<f64>,
    pub xi_dilation: Option<f64>,
    pub residual_bk_sd: Option<f64>,
    pub residual_bk_slp: Option<f64>,
    pub skipped: bool,
}

impl DissipativeSweepRow {
    pub fn skipped(lambda: f64) -> Self {
        DissipativeSweepRow {
            lambda,
            rank_m: None,
            rank_d: None,
            det_sd: None,
            det_slp: None,
            eta_d: None,
            xi_dilation: None,
            residual_bk_sd: None,
            residual_bk_slp: None,
            skipped: true,
        }
    }
}

impl From<&DilationScatterValue> for DissipativeSweepRow {
    fn from(v: &DilationScatterValue) -> Self {
        let r = crate::dissipative::modified_bk_residuals(v);
        DissipativeSweepRow {
            lambda: v.lambda,
            rank_m: Some(v.rank_m),
            rank_d: Some(v.rank_d),
            det_sd: Some(v.det_sd),
            det_slp: Some(v.det_slp),
            eta_d: Some(v.eta_d),
            xi_dilation: Some(v.xi_dilation),
            residual_bk_sd: Some(r.residual_sd),
            residual_bk_slp: Some(r.residual_slp),
            skipped: false,
        }
    }
}

impl SweepRow for DissipativeSweepRow {
    fn header() -> &'static str {
        "lambda,rank_m,rank_d,det_sd_re,det_sd_im,det_slp_re,det_slp_im,eta_d,xi_dilation,\
         residual_bk_sd,residual_bk_slp,skipped"
    }
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.lambda,
            fmt_usize(self.rank_m),
            fmt_usize(self.rank_d),
            fmt_f64(self.det_sd.map(|d| d.re)),
            fmt_f64(self.det_sd.map(|d| d.im)),
            fmt_f64(self.det_slp.map(|d| d.re)),
            fmt_f64(self.det_slp.map(|d| d.im)),
            fmt_f64(self.eta_d),
            fmt_f64(self.xi_dilation),
            fmt_f64(self.residual_bk_sd),
            fmt_f64(self.residual_bk_slp),
            u8::from(self.skipped)
        )
    }
}

#[derive(Debug, Clone)]
pub struct CoupledSweepRow {
    pub lambda: f64,
    pub rank_h: Option<usize>,
    pub rank_g: Option<usize>,
    pub det_sh: Option<Complex64>,
    pub det_sg: Option<Complex64>,
    pub xi_tilde: Option<f64>,
    pub residual_bk_h: Option<f64>,
    pub residual_bk_g: Option<f64>,
    pub skipped: bool,
}

impl CoupledSweepRow {
    pub fn skipped(lambda: f64) -> Self {
        CoupledSweepRow {
            lambda,
            rank_h: None,
            rank_g: None,
            det_sh: None,
            det_sg: None,
            xi_tilde: None,
            residual_bk_h: None,
            residual_bk_g: None,
            skipped: true,
        }
    }
}

impl From<&ChannelScatterValue> for CoupledSweepRow {
    fn from(v: &ChannelScatterValue) -> Self {
        let r = crate::coupled::coupled_bk_residuals(v);
        CoupledSweepRow {
            lambda: v.lambda,
            rank_h: Some(v.rank_h),
            rank_g: Some(v.rank_g),
            det_sh: Some(v.det_sh),
            det_sg: Some(v.det_sg),
            xi_tilde: Some(v.xi_tilde),
            residual_bk_h: Some(r.residual_h),
            residual_bk_g: Some(r.residual_g),
            skipped: false,
        }
    }
}

impl SweepRow for CoupledSweepRow {
    fn header() -> &'static str {
        "lambda,rank_h,rank_g,det_sh_re,det_sh_im,det_sg_re,det_sg_im,xi_tilde,\
         residual_bk_h,residual_bk_g,skipped"
    }
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.lambda,
            fmt_usize(self.rank_h),
            fmt_usize(self.rank_g),
            fmt_f64(self.det_sh.map(|d| d.re)),
            fmt_f64(self.det_sh.map(|d| d.im)),
            fmt_f64(self.det_sg.map(|d| d.re)),
            fmt_f64(self.det_sg.map(|d| d.im)),
            fmt_f64(self.xi_tilde),
            fmt_f64(self.residual_bk_h),
            fmt_f64(self.residual_bk_g),
            u8::from(self.skipped)
        )
    }
}

/// Writes rows in grid order as CSV with a header line, "\n" line endings
/// and shortest round-trip float formatting.
pub fn write_sweep_csv<R: SweepRow>(rows: &[R], out: &mut impl Write) -> Result<()> {
    writeln!(out, "{}", R::header())?;
    for row in rows {
        writeln!(out, "{}", row.to_csv())?;
    }
    Ok(())
}
