//! JSON persistence of descriptor models.
//!
//! Layout: `{"n", "nu", "ny", "ts": <seconds>|"continuous", "A", "B", "C",
//! "D"?, "E"?}` with matrices as row-major arrays, either flat or one array
//! per row. Complex entries are `[re, im]` pairs. Missing `D` means zero
//! feedthrough, missing `E` the identity.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dataio::write_json;
use crate::error::{Error, Result};
use crate::lti::{DescriptorModel, Realified, Sampling};
use crate::metrics::EvalGrid;
use crate::signal::{MarkovSequence, SignalSequence};
use crate::spectral::FrequencySamples;

/// A real- or complex-valued descriptor model.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Real(DescriptorModel<f64>),
    Complex(DescriptorModel<Complex64>),
}

impl From<DescriptorModel<f64>> for AnyModel {
    fn from(m: DescriptorModel<f64>) -> Self {
        AnyModel::Real(m)
    }
}

impl From<DescriptorModel<Complex64>> for AnyModel {
    fn from(m: DescriptorModel<Complex64>) -> Self {
        AnyModel::Complex(m)
    }
}

macro_rules! dispatch {
    ($self:expr, $m:ident => $body:expr) => {
        match $self {
            AnyModel::Real($m) => $body,
            AnyModel::Complex($m) => $body,
        }
    };
}

impl AnyModel {
    pub fn n(&self) -> usize {
        dispatch!(self, m => m.n())
    }

    pub fn nu(&self) -> usize {
        dispatch!(self, m => m.nu())
    }

    pub fn ny(&self) -> usize {
        dispatch!(self, m => m.ny())
    }

    pub fn sampling(&self) -> Sampling<f64> {
        dispatch!(self, m => m.sampling())
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, AnyModel::Complex(_))
    }

    pub fn as_real(&self) -> Result<&DescriptorModel<f64>> {
        match self {
            AnyModel::Real(m) => Ok(m),
            AnyModel::Complex(_) => Err(Error::MethodUnsupported("this operation needs a real-valued model".into())),
        }
    }

    pub fn simulate_detailed(&self, input: &SignalSequence<f64>) -> Result<Realified<SignalSequence<f64>, f64>> {
        dispatch!(self, m => m.simulate_detailed(input, None))
    }

    pub fn impulse_response_detailed(&self, count: usize) -> Result<Realified<MarkovSequence<f64>, f64>> {
        dispatch!(self, m => m.impulse_response_detailed(count))
    }

    pub fn realified_frequency_response(
        &self,
        points: &[Complex64],
    ) -> Result<Realified<Vec<DMatrix<Complex64>>, f64>> {
        dispatch!(self, m => m.realified_frequency_response(points))
    }

    pub fn evaluate(&self, grid: &EvalGrid<f64>) -> Result<FrequencySamples<f64>> {
        dispatch!(self, m => grid.evaluate(m))
    }

    pub fn discretize_zoh(&self, ts: f64) -> Result<Self> {
        Ok(dispatch!(self, m => m.discretize_zoh(ts)?.into()))
    }
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
enum Cell {
    Re(f64),
    Cx([f64; 2]),
}

/// Flat row-major entries, or one array per row. A pair is read as one
/// complex entry when the flat length matches the dimensions.
#[derive(Serialize, Deserialize)]
#[serde(transparent)]
struct Cells(serde_json::Value);

impl Cells {
    fn entries(&self, name: &str, rows: usize, cols: usize) -> Result<Vec<Cell>> {
        let bad = || Error::format(format!("matrix {name}: expected {rows}x{cols} entries, row-major"));
        let outer = self.0.as_array().ok_or_else(bad)?;
        let cell = |v: &serde_json::Value| serde_json::from_value::<Cell>(v.clone()).map_err(|_| bad());
        if outer.len() == rows * cols {
            if let Ok(flat) = outer.iter().map(cell).collect::<Result<Vec<_>>>() {
                return Ok(flat);
            }
        }
        if outer.len() != rows {
            return Err(bad());
        }
        let mut out = Vec::with_capacity(rows * cols);
        for row in outer {
            let row = row.as_array().filter(|r| r.len() == cols).ok_or_else(bad)?;
            for v in row {
                out.push(cell(v)?);
            }
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TsField {
    Seconds(f64),
    Label(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    n: usize,
    nu: usize,
    ny: usize,
    ts: TsField,
    #[serde(rename = "A")]
    a: Cells,
    #[serde(rename = "B")]
    b: Cells,
    #[serde(rename = "C")]
    c: Cells,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    d: Option<Cells>,
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    e: Option<Cells>,
}

fn flatten<S: Copy>(m: &DMatrix<S>, cell: impl Fn(S) -> Cell) -> Cells {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(cell(m[(i, j)]));
        }
    }
    Cells(serde_json::to_value(out).expect("numbers serialize"))
}

/// Entries of one matrix, read once with known dimensions.
struct Parsed {
    name: &'static str,
    rows: usize,
    cols: usize,
    cells: Vec<Cell>,
}

impl Parsed {
    fn new(name: &'static str, cells: &Cells, rows: usize, cols: usize) -> Result<Self> {
        Ok(Self {
            name,
            rows,
            cols,
            cells: cells.entries(name, rows, cols)?,
        })
    }

    fn matrix<S: nalgebra::Scalar>(&self, read: impl Fn(&Cell) -> S) -> DMatrix<S> {
        let values: Vec<S> = self.cells.iter().map(read).collect();
        DMatrix::from_row_slice(self.rows, self.cols, &values)
    }
}

fn ts_field(s: Sampling<f64>) -> TsField {
    match s {
        Sampling::Discrete { ts } => TsField::Seconds(ts),
        Sampling::Continuous => TsField::Label("continuous".into()),
    }
}

fn doc_of<S: crate::scalar::Entry<RealField = f64>>(m: &DescriptorModel<S>, cell: impl Fn(S) -> Cell + Copy) -> ModelDoc {
    ModelDoc {
        n: m.n(),
        nu: m.nu(),
        ny: m.ny(),
        ts: ts_field(m.sampling()),
        a: flatten(m.a(), cell),
        b: flatten(m.b(), cell),
        c: flatten(m.c(), cell),
        d: Some(flatten(m.d(), cell)),
        e: m.e().map(|e| flatten(e, cell)),
    }
}

fn model_from_doc<S: crate::scalar::Entry<RealField = f64>>(
    doc: &ModelDoc,
    parsed: &[Parsed],
    read: impl Fn(&Cell) -> S + Copy,
) -> Result<DescriptorModel<S>> {
    let sampling = match &doc.ts {
        TsField::Seconds(ts) => Sampling::Discrete { ts: *ts },
        TsField::Label(l) if l == "continuous" => Sampling::Continuous,
        TsField::Label(l) => return Err(Error::format(format!("ts must be a number or \"continuous\", got {l:?}"))),
    };
    let get = |name: &str| parsed.iter().find(|p| p.name == name).map(|p| p.matrix(read));
    DescriptorModel::new(
        get("E"),
        get("A").expect("A parsed"),
        get("B").expect("B parsed"),
        get("C").expect("C parsed"),
        get("D"),
        sampling,
    )
    .map_err(|e| match e {
        Error::Dimension(msg) | Error::InvalidArgument(msg) => Error::format(msg),
        other => other,
    })
}

fn doc_of_any(model: &AnyModel) -> ModelDoc {
    match model {
        AnyModel::Real(m) => doc_of(m, Cell::Re),
        AnyModel::Complex(m) => doc_of(m, |z: Complex64| Cell::Cx([z.re, z.im])),
    }
}

pub fn model_to_json(model: &AnyModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(&doc_of_any(model))?)
}

/// Parses a model; any `[re, im]` entry makes the whole model complex.
pub fn model_from_json(text: &str) -> Result<AnyModel> {
    let doc: ModelDoc = serde_json::from_str(text)?;
    let (n, nu, ny) = (doc.n, doc.nu, doc.ny);
    let mut parsed = vec![
        Parsed::new("A", &doc.a, n, n)?,
        Parsed::new("B", &doc.b, n, nu)?,
        Parsed::new("C", &doc.c, ny, n)?,
    ];
    if let Some(d) = &doc.d {
        parsed.push(Parsed::new("D", d, ny, nu)?);
    }
    if let Some(e) = &doc.e {
        parsed.push(Parsed::new("E", e, n, n)?);
    }
    let complex = parsed.iter().flat_map(|p| &p.cells).any(|c| matches!(c, Cell::Cx(_)));
    if complex {
        Ok(AnyModel::Complex(model_from_doc(&doc, &parsed, |c| match c {
            Cell::Re(v) => Complex64::new(*v, 0.0),
            Cell::Cx([re, im]) => Complex64::new(*re, *im),
        })?))
    } else {
        Ok(AnyModel::Real(model_from_doc(&doc, &parsed, |c| match c {
            Cell::Re(v) => *v,
            Cell::Cx(_) => unreachable!("real document"),
        })?))
    }
}

pub fn save_model(path: &Path, model: &AnyModel) -> Result<()> {
    write_json(path, &doc_of_any(model))
}

pub fn load_model(path: &Path) -> Result<AnyModel> {
    model_from_json(&std::fs::read_to_string(path)?)
}
