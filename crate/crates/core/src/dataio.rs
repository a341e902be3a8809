//! Experiment generation and on-disk formats for datasets, reports and plot data.
//!
//! Random excitation and output noise come from ChaCha8 (`rand_chacha`)
//! seeded with `seed_from_u64`; Gaussian draws use the ziggurat sampler of
//! `rand_distr::StandardNormal`. Draw order: all input samples (time-major,
//! channel-minor), then all noise samples in the same order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::DescriptorModel;
use crate::scalar::{Entry, Real};
use crate::signal::{MarkovSequence, SignalSequence};

/// Input/output record of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Real> {
    pub u: SignalSequence<T>,
    pub y: SignalSequence<T>,
    /// Noise-free output, when known.
    pub y_clean: Option<SignalSequence<T>>,
    pub sigma2_true: Option<T>,
    pub seed: Option<u64>,
}

impl<T: Real> Dataset<T> {
    pub fn new(u: SignalSequence<T>, y: SignalSequence<T>) -> Result<Self> {
        if u.len() != y.len() {
            return Err(Error::Dimension(format!(
                "input has {} samples, output has {}",
                u.len(),
                y.len()
            )));
        }
        if u.len() < 2 {
            return Err(Error::Dimension("a dataset needs at least two samples".into()));
        }
        Ok(Self {
            u,
            y,
            y_clean: None,
            sigma2_true: None,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn nu(&self) -> usize {
        self.u.channels()
    }

    pub fn ny(&self) -> usize {
        self.y.channels()
    }

    pub fn ts(&self) -> T {
        self.u.ts()
    }
}

/// Excitation and noise settings for [`generate_experiment`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentSpec {
    pub samples: usize,
    pub sigma2: f64,
    pub seed: u64,
    /// Standard deviation of the white Gaussian input.
    pub input_std: f64,
    /// Separate stream for the input. When set, `seed` drives only the
    /// noise, so records sharing `input_seed` differ in noise alone.
    pub input_seed: Option<u64>,
}

impl ExperimentSpec {
    pub fn new(samples: usize, sigma2: f64, seed: u64) -> Self {
        Self {
            samples,
            sigma2,
            seed,
            input_std: 1.0,
            input_seed: None,
        }
    }
}

/// Simulates `model` under white Gaussian excitation and adds i.i.d. output noise.
///
/// Draws come from ChaCha8 seeded with `seed` and are mapped to normals by
/// the ziggurat method: first the whole input (time-major, channel-minor),
/// then the noise in the same order. With `input_seed` the input comes from
/// ChaCha8 seeded with `input_seed` on stream 1 instead.
pub fn generate_experiment<S: Entry>(
    model: &DescriptorModel<S>,
    spec: &ExperimentSpec,
) -> Result<Dataset<S::RealField>> {
    let ts = model
        .sampling()
        .ts()
        .ok_or_else(|| Error::InvalidArgument("experiments need a discrete-time model".into()))?;
    if !(spec.sigma2 >= 0.0) {
        return Err(Error::InvalidArgument("noise variance must be nonnegative".into()));
    }
    if spec.samples < 2 {
        return Err(Error::InvalidArgument("at least two samples are required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut input_rng = spec.input_seed.map(|seed| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(1);
        r
    });
    let (nu, ny, ns) = (model.nu(), model.ny(), spec.samples);
    let mut u = DMatrix::<S::RealField>::zeros(nu, ns);
    {
        let source = input_rng.as_mut().unwrap_or(&mut rng);
        for k in 0..ns {
            for c in 0..nu {
                let g: f64 = source.sample(StandardNormal);
                u[(c, k)] = S::RealField::lit(spec.input_std * g);
            }
        }
    }
    let u = SignalSequence::new(u, ts)?;
    let y_clean = model.simulate(&u, None)?;
    let mut y = y_clean.data().clone();
    if spec.sigma2 > 0.0 {
        let std = spec.sigma2.sqrt();
        for k in 0..ns {
            for c in 0..ny {
                let g: f64 = rng.sample(StandardNormal);
                y[(c, k)] += S::RealField::lit(std * g);
            }
        }
    }
    Ok(Dataset {
        y: SignalSequence::new(y, ts)?,
        u,
        y_clean: Some(y_clean),
        sigma2_true: Some(S::RealField::lit(spec.sigma2)),
        seed: Some(spec.seed),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetMeta {
    ts: f64,
    sigma2_true: Option<f64>,
    seed: Option<u64>,
}

/// `<dir>/<stem>.meta.json` for a dataset stored at `<dir>/<stem>.csv`.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.meta.json"))
}

/// Writes the CSV (`k,u_1..,y_1..`) and its `.meta.json` sidecar.
///
/// Values use the shortest decimal form that parses back to the same float.
pub fn save_dataset<T: Real>(path: &Path, ds: &Dataset<T>) -> Result<()> {
    let mut out = String::new();
    out.push('k');
    for i in 1..=ds.nu() {
        out.push_str(&format!(",u_{i}"));
    }
    for i in 1..=ds.ny() {
        out.push_str(&format!(",y_{i}"));
    }
    out.push('\n');
    for k in 0..ds.len() {
        out.push_str(&k.to_string());
        for v in ds.u.sample(k).iter().chain(ds.y.sample(k).iter()) {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    let meta = DatasetMeta {
        ts: ds.ts().to_f64_lossy(),
        sigma2_true: ds.sigma2_true.map(Real::to_f64_lossy),
        seed: ds.seed,
    };
    write_json(&meta_path(path), &meta)
}

/// Reads a dataset written by [`save_dataset`]. A missing sidecar means
/// `ts = 1` and unknown noise/seed.
pub fn load_dataset<T: Real>(path: &Path) -> Result<Dataset<T>> {
    let text = fs::read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Format {
            line: 1,
            column: 0,
            message: e.to_string(),
        })?
        .clone();
    let (nu, ny) = parse_header(&header)?;
    let width = 1 + nu + ny;

    let mut u_cols: Vec<Vec<T>> = Vec::new();
    let mut y_cols: Vec<Vec<T>> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row as u64 + 2;
        let record = record.map_err(|e| Error::Format {
            line,
            column: 0,
            message: e.to_string(),
        })?;
        if record.len() != width {
            return Err(Error::Format {
                line,
                column: record.len().min(width) as u64 + 1,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let k: usize = record[0].parse().map_err(|_| Error::Format {
            line,
            column: 1,
            message: format!("invalid time index {:?}", &record[0]),
        })?;
        if k != row {
            return Err(Error::Format {
                line,
                column: 1,
                message: format!("time index {k} out of sequence, expected {row}"),
            });
        }
        let mut values = Vec::with_capacity(nu + ny);
        for (j, field) in record.iter().enumerate().skip(1) {
            let v: T = field.parse().map_err(|_| Error::Format {
                line,
                column: j as u64 + 1,
                message: format!("invalid number {field:?}"),
            })?;
            values.push(v);
        }
        u_cols.push(values[..nu].to_vec());
        y_cols.push(values[nu..].to_vec());
    }
    if u_cols.len() < 2 {
        return Err(Error::Format {
            line: u_cols.len() as u64 + 1,
            column: 0,
            message: format!("dataset has {} samples, at least 2 required", u_cols.len()),
        });
    }

    let meta_file = meta_path(path);
    let meta = if meta_file.exists() {
        let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(&meta_file)?)?;
        meta
    } else {
        log::warn!("no sidecar {}; assuming ts = 1", meta_file.display());
        DatasetMeta {
            ts: 1.0,
            sigma2_true: None,
            seed: None,
        }
    };
    if !(meta.ts > 0.0) {
        return Err(Error::format("sample period in sidecar must be positive"));
    }
    let ts = T::lit(meta.ts);
    let mut ds = Dataset::new(
        SignalSequence::from_samples(&u_cols, ts)?,
        SignalSequence::from_samples(&y_cols, ts)?,
    )?;
    ds.sigma2_true = meta.sigma2_true.map(T::lit);
    ds.seed = meta.seed;
    Ok(ds)
}

fn parse_header(header: &csv::StringRecord) -> Result<(usize, usize)> {
    let bad = |column: usize, message: String| Error::Format {
        line: 1,
        column: column as u64,
        message,
    };
    if header.get(0) != Some("k") {
        return Err(bad(1, "first column must be `k`".into()));
    }
    let mut nu = 0;
    let mut ny = 0;
    for (j, name) in header.iter().enumerate().skip(1) {
        if ny == 0 && name == format!("u_{}", nu + 1) {
            nu += 1;
        } else if name == format!("y_{}", ny + 1) {
            ny += 1;
        } else {
            return Err(bad(j + 1, format!("unexpected column name {name:?}")));
        }
    }
    if nu == 0 || ny == 0 {
        return Err(bad(0, "header needs at least one u_i and one y_i column".into()));
    }
    Ok((nu, ny))
}

/// Markov parameters as CSV: `k,t,h_1_1,…,h_ny_nu`, one row per block.
pub fn save_markov(path: &Path, h: &MarkovSequence<f64>) -> Result<()> {
    let mut header = vec!["k".to_string(), "t".to_string()];
    for i in 1..=h.ny() {
        for j in 1..=h.nu() {
            header.push(format!("h_{i}_{j}"));
        }
    }
    let rows: Vec<Vec<CsvCell>> = h
        .blocks()
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let mut row = vec![CsvCell::from(k), CsvCell::from(k as f64 * h.ts())];
            for i in 0..h.ny() {
                for j in 0..h.nu() {
                    row.push(b[(i, j)].into());
                }
            }
            row
        })
        .collect();
    write_csv(path, &header, &rows)
}

/// Reads [`save_markov`] output. The sample period is the `t` of row 1
/// (1 for a single block).
pub fn load_markov(path: &Path) -> Result<MarkovSequence<f64>> {
    let text = fs::read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Format {
            line: 1,
            column: 0,
            message: e.to_string(),
        })?
        .clone();
    if header.get(0) != Some("k") || header.get(1) != Some("t") {
        return Err(Error::Format {
            line: 1,
            column: 1,
            message: "header must start with `k,t`".into(),
        });
    }
    let names: Vec<(usize, usize)> = header
        .iter()
        .skip(2)
        .enumerate()
        .map(|(c, name)| {
            name.strip_prefix("h_")
                .and_then(|r| r.split_once('_'))
                .and_then(|(i, j)| Some((i.parse().ok()?, j.parse().ok()?)))
                .ok_or(Error::Format {
                    line: 1,
                    column: c as u64 + 3,
                    message: format!("unexpected column name {name:?}"),
                })
        })
        .collect::<Result<_>>()?;
    let ny = names.iter().map(|p| p.0).max().unwrap_or(0);
    let nu = names.iter().map(|p| p.1).max().unwrap_or(0);
    let expected: Vec<(usize, usize)> = (1..=ny).flat_map(|i| (1..=nu).map(move |j| (i, j))).collect();
    if names.is_empty() || names != expected {
        return Err(Error::format("columns must be h_i_j in row-major order"));
    }
    let mut blocks = Vec::new();
    let mut ts = 1.0;
    for (row, record) in reader.records().enumerate() {
        let line = row as u64 + 2;
        let record = record.map_err(|e| Error::Format {
            line,
            column: 0,
            message: e.to_string(),
        })?;
        let num = |c: usize| -> Result<f64> {
            record.get(c).and_then(|f| f.parse().ok()).ok_or(Error::Format {
                line,
                column: c as u64 + 1,
                message: "invalid or missing number".into(),
            })
        };
        if row == 1 {
            ts = num(1)?;
        }
        let values: Vec<f64> = (2..2 + ny * nu).map(num).collect::<Result<_>>()?;
        blocks.push(DMatrix::from_row_slice(ny, nu, &values));
    }
    if !(ts > 0.0) {
        return Err(Error::format("t must increase from row 0 to row 1"));
    }
    MarkovSequence::new(blocks, ts).map_err(|e| Error::format(e.to_string()))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<V: Serialize + ?Sized>(path: &Path, value: &V) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// CSV table with a one-line header. Floats use shortest round-trip formatting.
pub fn write_csv<H: AsRef<str>>(path: &Path, header: &[H], rows: &[Vec<CsvCell>]) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    let names: Vec<&str> = header.iter().map(AsRef::as_ref).collect();
    writeln!(file, "{}", names.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(CsvCell::render).collect();
        writeln!(file, "{}", cells.join(","))?;
    }
    file.flush()?;
    Ok(())
}

/// One cell of an output table.
#[derive(Debug, Clone, PartialEq)]
pub enum CsvCell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl CsvCell {
    fn render(&self) -> String {
        match self {
            CsvCell::Int(v) => v.to_string(),
            CsvCell::Float(v) => v.to_string(),
            CsvCell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for CsvCell {
    fn from(v: f64) -> Self {
        CsvCell::Float(v)
    }
}

impl From<usize> for CsvCell {
    fn from(v: usize) -> Self {
        CsvCell::Int(v as i64)
    }
}

impl From<&str> for CsvCell {
    fn from(v: &str) -> Self {
        CsvCell::Text(v.to_string())
    }
}

impl From<String> for CsvCell {
    fn from(v: String) -> Self {
        CsvCell::Text(v)
    }
}
