//! Monte-Carlo campaigns: many noisy records of one reference system, every
//! method run on each, aggregated into report and plot-data files.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataio::{generate_experiment, write_csv, write_json, CsvCell, Dataset, ExperimentSpec};
use crate::error::{Error, Result};
use crate::estimation::{L0Choice, TuningConfig};
use crate::lti::Sampling;
use crate::metrics::fit_percentage;
use crate::modelfile::{save_model, AnyModel};
use crate::pencils::{build_loewner_partitioned, svd_order, Partition};
use crate::pipeline::{
    averaged_l0, hankel_stage, loewner_stage, step_one, step_one_with_l0, step_two, GridSpec, HyperParameters,
    Method, MetricSet, OrderSource, PartitionMode, PencilStage, Reference, STEP_PENCIL,
};
use crate::signal::MarkovSequence;
use crate::spectral::{estimate_frf_spectral, markov_to_frequency};

/// How the past window is chosen across realizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum L0Mode {
    /// One `L0` from the cross-correlation averaged over all records.
    #[default]
    Averaged,
    PerRealization,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkConfig {
    pub samples: usize,
    /// Sample period used to discretize a continuous-time reference.
    pub ts: f64,
    pub sigma2: f64,
    pub input_std: f64,
    pub realizations: usize,
    pub base_seed: u64,
    /// All records share one input and differ only in noise.
    pub shared_input: bool,
    #[serde(skip)]
    pub tuning: TuningConfig,
    pub alpha: f64,
    pub order: Option<usize>,
    pub partition: PartitionMode,
    pub l0_mode: L0Mode,
    pub methods: Vec<Method>,
    pub grid: GridSpec,
    pub sweep_orders: Vec<usize>,
    /// Impulse-response length for `W_h`; defaults to `samples`.
    pub impulse_horizon: Option<usize>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        let tuning = TuningConfig::default();
        Self {
            samples: 1000,
            ts: 0.015,
            sigma2: 1e-7,
            input_std: 1.0,
            realizations: 50,
            base_seed: 0,
            shared_input: true,
            alpha: tuning.alpha,
            order: tuning.order,
            tuning,
            partition: PartitionMode::Combined,
            l0_mode: L0Mode::Averaged,
            methods: Method::ALL.to_vec(),
            grid: GridSpec::default(),
            sweep_orders: vec![10, 20, 30, 40, 48],
            impulse_horizon: None,
        }
    }
}

impl BenchmarkConfig {
    /// Tuning with `alpha` and `order` taken from the config's own fields.
    pub fn effective_tuning(&self) -> TuningConfig {
        TuningConfig {
            alpha: self.alpha,
            order: self.order,
            ..self.tuning.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.effective_tuning().validate()?;
        if self.realizations == 0 {
            return Err(Error::InvalidArgument("at least one realization is required".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no method selected".into()));
        }
        if !(self.sigma2 >= 0.0 && self.input_std > 0.0 && self.ts > 0.0) {
            return Err(Error::InvalidArgument(
                "need sigma2 >= 0, input std > 0 and ts > 0".into(),
            ));
        }
        Ok(())
    }

    fn spec(&self, index: usize) -> ExperimentSpec {
        let seed = self.base_seed.wrapping_add(index as u64);
        ExperimentSpec {
            input_std: self.input_std,
            input_seed: self.shared_input.then_some(self.base_seed),
            ..ExperimentSpec::new(self.samples, self.sigma2, seed)
        }
    }
}

/// Metrics of one method on one record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodRecord {
    pub order: usize,
    pub order_source: OrderSource,
    pub suggested_order: usize,
    pub metrics: MetricSet,
    /// `(order, W_H, W_h)`; `None` where the order exceeds the pencil size.
    pub sweep: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub order: usize,
    pub freq_error: Option<f64>,
    pub impulse_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizationRecord {
    pub index: usize,
    pub seed: u64,
    pub error: Option<String>,
    pub hyper: Option<HyperParameters>,
    pub sigma2_used: Option<f64>,
    pub fit_smm: Option<f64>,
    pub fit_ls: Option<f64>,
    pub methods: BTreeMap<Method, MethodRecord>,
}

/// Per-realization data kept out of the report but used for plot files.
#[derive(Debug, Clone, Default)]
struct Traces {
    singular_values: BTreeMap<String, Vec<f64>>,
    markov: BTreeMap<String, Vec<f64>>,
    impulse: BTreeMap<Method, Vec<f64>>,
    magnitude: BTreeMap<Method, Vec<f64>>,
}

/// Five-number summary with Tukey outliers (beyond 1.5 IQR).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxStats {
    pub count: usize,
    pub mean: f64,
    /// Lowest value inside the lower fence.
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    /// Highest value inside the upper fence.
    pub max: f64,
    pub outliers: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl BoxStats {
    pub fn new(values: &[f64]) -> Option<Self> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let (q25, median, q75) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
        let iqr = q75 - q25;
        let (lo, hi) = (q25 - 1.5 * iqr, q75 + 1.5 * iqr);
        let inside: Vec<f64> = v.iter().copied().filter(|x| (lo..=hi).contains(x)).collect();
        Some(Self {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: inside.first().copied().unwrap_or(median),
            q25,
            median,
            q75,
            max: inside.last().copied().unwrap_or(median),
            outliers: v.iter().copied().filter(|x| !(lo..=hi).contains(x)).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub method: Method,
    pub order: usize,
    pub mean_freq_error: Option<f64>,
    pub mean_impulse_error: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelInfo {
    pub source: String,
    pub n: usize,
    pub nu: usize,
    pub ny: usize,
    pub ts: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L0Summary {
    pub mode: L0Mode,
    /// The averaged-mode choice; absent in per-realization mode.
    pub l0: Option<usize>,
    pub epsilon: Option<f64>,
    pub saturated: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkSummary {
    pub requested: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub metrics: BTreeMap<String, BoxStats>,
    pub hyper: BTreeMap<String, BoxStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub model: ModelInfo,
    pub l0_selection: L0Summary,
    pub summary: BenchmarkSummary,
    pub sweep: Vec<SweepSummary>,
    pub realizations: Vec<RealizationRecord>,
    pub wall_time_s: f64,
}

/// Report plus the data behind the plot files.
pub struct BenchmarkOutcome {
    pub report: BenchmarkReport,
    pub reference: AnyModel,
    reference_impulse: Vec<f64>,
    reference_magnitude: Vec<f64>,
    grid_omega: Vec<f64>,
    traces: Vec<Option<Traces>>,
}

fn discrete_reference(model: &AnyModel, ts: f64) -> Result<AnyModel> {
    match model.sampling() {
        Sampling::Discrete { .. } => Ok(model.clone()),
        Sampling::Continuous => model.discretize_zoh(ts),
    }
}

fn metric_key(metric: &str, method: Method) -> String {
    format!("{metric}[{method}]")
}

/// Runs the campaign on `model` (discretized with `cfg.ts` when continuous).
pub fn run_benchmark(model: &AnyModel, source: &str, cfg: &BenchmarkConfig) -> Result<BenchmarkOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let truth_any = discrete_reference(model, cfg.ts)?;
    let truth = truth_any.as_real()?.clone();
    if truth.nu() != 1 || truth.ny() != 1 {
        return Err(Error::MethodUnsupported(
            "benchmark campaigns need a single-input single-output model".into(),
        ));
    }
    let ts = truth.sampling().ts().expect("discrete reference");
    let horizon = cfg.impulse_horizon.unwrap_or(cfg.samples);
    let reference = Reference::new(&truth_any, &cfg.grid, horizon)?;
    let tuning = cfg.effective_tuning();

    let datasets: Vec<Result<Dataset<f64>>> = (0..cfg.realizations)
        .into_par_iter()
        .map(|i| generate_experiment(&truth, &cfg.spec(i)))
        .collect();
    let datasets: Vec<Dataset<f64>> = datasets.into_iter().collect::<Result<_>>()?;

    let averaged = match cfg.l0_mode {
        L0Mode::Averaged if tuning.l0.is_none() => {
            let refs: Vec<&Dataset<f64>> = datasets.iter().collect();
            Some(averaged_l0(&refs, tuning.alpha)?)
        }
        _ => None,
    };

    let results: Vec<(RealizationRecord, Option<Traces>)> = datasets
        .par_iter()
        .enumerate()
        .map(|(i, ds)| {
            let seed = cfg.spec(i).seed;
            match analyze(ds, cfg, &tuning, averaged.as_ref(), &reference) {
                Ok((mut record, traces)) => {
                    record.index = i;
                    record.seed = seed;
                    (record, Some(traces))
                }
                Err(e) => {
                    log::warn!("realization {i} (seed {seed}) failed: {e}");
                    (
                        RealizationRecord {
                            index: i,
                            seed,
                            error: Some(e.to_string()),
                            hyper: None,
                            sigma2_used: None,
                            fit_smm: None,
                            fit_ls: None,
                            methods: BTreeMap::new(),
                        },
                        None,
                    )
                }
            }
        })
        .collect();
    let (records, traces): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    let mut traces = traces;
    if let Some(n) = records.iter().find_map(|r| r.hyper.as_ref().map(|h| h.n)) {
        // Noise-free reference decays on the same grid as the estimates.
        let exact = markov_to_frequency(&reference.impulse.truncated(n.min(reference.impulse.len()))?)?;
        let mut extra = BTreeMap::new();
        for scheme in [Partition::HalfHalf, Partition::Alternate] {
            let pencil = build_loewner_partitioned(&exact, scheme)?;
            extra.insert(
                format!("loewner-{}[exact]", scheme.name()),
                svd_order(&pencil.l, tuning.svd_threshold)?.normalized,
            );
        }
        traces.push(Some(Traces {
            singular_values: extra,
            ..Traces::default()
        }));
    }

    let summary = summarize(&records, cfg);
    let sweep = summarize_sweep(&records, cfg);
    let report = BenchmarkReport {
        config: cfg.clone(),
        model: ModelInfo {
            source: source.to_string(),
            n: truth.n(),
            nu: truth.nu(),
            ny: truth.ny(),
            ts,
        },
        l0_selection: L0Summary {
            mode: cfg.l0_mode,
            l0: averaged.map(|c| c.l0).or(tuning.l0),
            epsilon: averaged.map(|c| c.epsilon),
            saturated: averaged.map(|c| c.saturated),
        },
        summary,
        sweep,
        realizations: records,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(BenchmarkOutcome {
        report,
        reference_impulse: reference.impulse.scalar_values(),
        reference_magnitude: reference.frequency.values().iter().map(|v| v[(0, 0)].norm()).collect(),
        grid_omega: reference.grid.omega.clone(),
        reference: truth_any,
        traces,
    })
}

fn analyze(
    ds: &Dataset<f64>,
    cfg: &BenchmarkConfig,
    tuning: &TuningConfig,
    averaged: Option<&L0Choice<f64>>,
    reference: &Reference,
) -> Result<(RealizationRecord, Traces)> {
    let one = match averaged {
        Some(c) => step_one_with_l0(ds, tuning, c.l0, Some(c.epsilon), c.saturated)?,
        None => step_one(ds, tuning)?,
    };
    let needs_smm = cfg.methods.iter().any(|m| matches!(m, Method::SmmHf | Method::SmmLf));
    let (h_smm, sigma2_used) = if needs_smm {
        let (h, s) = step_two(ds, &one, tuning)?;
        (Some(h), Some(s))
    } else {
        (None, None)
    };
    let fit = |h: &MarkovSequence<f64>| fit_percentage(h, &reference.impulse.truncated(h.len())?);
    let mut traces = Traces::default();
    traces.markov.insert("ls".into(), one.h_ls.scalar_values());
    if let Some(h) = &h_smm {
        traces.markov.insert("smm".into(), h.scalar_values());
    }
    let mut methods = BTreeMap::new();
    for &method in &cfg.methods {
        let (stage, markov): (PencilStage, Option<&MarkovSequence<f64>>) = match method {
            Method::SmmHf => {
                let h = h_smm.as_ref().expect("SMM estimate");
                (hankel_stage(h, tuning.svd_threshold)?, Some(h))
            }
            Method::LsHf => (hankel_stage(&one.h_ls, tuning.svd_threshold)?, Some(&one.h_ls)),
            Method::SmmLf => {
                let h = h_smm.as_ref().expect("SMM estimate");
                let f = markov_to_frequency(h).map_err(|e| e.at_step(STEP_PENCIL))?;
                (loewner_stage(&f, cfg.partition, tuning.svd_threshold)?, Some(h))
            }
            Method::NoisyLf => {
                let f = estimate_frf_spectral(ds, one.hyper.n).map_err(|e| e.at_step(STEP_PENCIL))?;
                (loewner_stage(&f, cfg.partition, tuning.svd_threshold)?, None)
            }
        };
        let data_label = match method {
            Method::SmmHf | Method::SmmLf => "smm",
            Method::LsHf => "ls",
            Method::NoisyLf => "noisy",
        };
        for (name, report) in &stage.svd {
            traces
                .singular_values
                .insert(format!("{name}[{data_label}]"), report.normalized.clone());
        }
        let (order, order_source) = stage.resolve_order(tuning.order)?;
        let max = stage.reducer.max_order();
        let mut orders = vec![order];
        orders.extend(cfg.sweep_orders.iter().copied().filter(|&r| r >= 1 && r <= max));
        let models = stage.reducer.reduce(&orders)?;
        let metrics = reference.score(&models[0], markov)?;
        let mut scored = models[1..]
            .iter()
            .map(|m| reference.score(m, None))
            .collect::<Result<Vec<_>>>()?
            .into_iter();
        let mut sweep = Vec::with_capacity(cfg.sweep_orders.len());
        for &r in &cfg.sweep_orders {
            if r >= 1 && r <= max {
                let m = scored.next().expect("one model per valid order");
                sweep.push(SweepPoint {
                    order: r,
                    freq_error: Some(m.freq_error),
                    impulse_error: Some(m.impulse_error),
                });
            } else {
                sweep.push(SweepPoint {
                    order: r,
                    freq_error: None,
                    impulse_error: None,
                });
            }
        }
        traces
            .impulse
            .insert(method, models[0].impulse_response_detailed(reference.impulse.len())?.value.scalar_values());
        traces.magnitude.insert(
            method,
            models[0].evaluate(&reference.grid)?.values().iter().map(|v| v[(0, 0)].norm()).collect(),
        );
        methods.insert(
            method,
            MethodRecord {
                order,
                order_source,
                suggested_order: stage.suggested_order(),
                metrics,
                sweep,
            },
        );
    }
    let record = RealizationRecord {
        index: 0,
        seed: 0,
        error: None,
        fit_smm: h_smm.as_ref().map(fit).transpose()?,
        fit_ls: Some(fit(&one.h_ls)?),
        hyper: Some(one.hyper),
        sigma2_used,
        methods,
    };
    Ok((record, traces))
}

fn summarize(records: &[RealizationRecord], cfg: &BenchmarkConfig) -> BenchmarkSummary {
    let ok: Vec<&RealizationRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let mut metrics = BTreeMap::new();
    let add = |key: String, values: Vec<f64>, into: &mut BTreeMap<String, BoxStats>| {
        if let Some(stats) = BoxStats::new(&values) {
            into.insert(key, stats);
        }
    };
    add("W[smm]".into(), ok.iter().filter_map(|r| r.fit_smm).collect(), &mut metrics);
    add("W[ls]".into(), ok.iter().filter_map(|r| r.fit_ls).collect(), &mut metrics);
    for &method in &cfg.methods {
        let recs: Vec<&MethodRecord> = ok.iter().filter_map(|r| r.methods.get(&method)).collect();
        add(
            metric_key("W_H", method),
            recs.iter().map(|m| m.metrics.freq_error).collect(),
            &mut metrics,
        );
        add(
            metric_key("W_h", method),
            recs.iter().map(|m| m.metrics.impulse_error).collect(),
            &mut metrics,
        );
        add(
            metric_key("order", method),
            recs.iter().map(|m| m.order as f64).collect(),
            &mut metrics,
        );
    }
    let mut hyper = BTreeMap::new();
    let hp: Vec<&HyperParameters> = ok.iter().filter_map(|r| r.hyper.as_ref()).collect();
    add("L0".into(), hp.iter().map(|h| h.l0 as f64).collect(), &mut hyper);
    add("N".into(), hp.iter().map(|h| h.n as f64).collect(), &mut hyper);
    add("N_max".into(), hp.iter().map(|h| h.n_max as f64).collect(), &mut hyper);
    add("sigma2_hat".into(), hp.iter().map(|h| h.sigma2_hat).collect(), &mut hyper);
    BenchmarkSummary {
        requested: records.len(),
        succeeded: ok.len(),
        failed: records.len() - ok.len(),
        metrics,
        hyper,
    }
}

fn summarize_sweep(records: &[RealizationRecord], cfg: &BenchmarkConfig) -> Vec<SweepSummary> {
    let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let mut out = Vec::new();
    for &method in &cfg.methods {
        for (slot, &order) in cfg.sweep_orders.iter().enumerate() {
            let points: Vec<&SweepPoint> = records
                .iter()
                .filter(|r| r.error.is_none())
                .filter_map(|r| r.methods.get(&method).map(|m| &m.sweep[slot]))
                .collect();
            let freq: Vec<f64> = points.iter().filter_map(|p| p.freq_error).collect();
            let imp: Vec<f64> = points.iter().filter_map(|p| p.impulse_error).collect();
            out.push(SweepSummary {
                method,
                order,
                count: freq.len(),
                mean_freq_error: mean(freq),
                mean_impulse_error: mean(imp),
            });
        }
    }
    out
}

/// Index-wise mean over sequences of possibly different lengths.
fn ragged_mean<'a>(rows: impl Iterator<Item = &'a Vec<f64>>) -> Vec<f64> {
    let mut sum: Vec<f64> = Vec::new();
    let mut count: Vec<usize> = Vec::new();
    for row in rows {
        if row.len() > sum.len() {
            sum.resize(row.len(), 0.0);
            count.resize(row.len(), 0);
        }
        for (i, v) in row.iter().enumerate() {
            sum[i] += v;
            count[i] += 1;
        }
    }
    sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect()
}

/// Index-wise median, for singular-value decays spanning many decades.
fn ragged_median<'a>(rows: impl Iterator<Item = &'a Vec<f64>>) -> Vec<f64> {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for row in rows {
        if row.len() > cols.len() {
            cols.resize(row.len(), Vec::new());
        }
        for (i, v) in row.iter().enumerate() {
            cols[i].push(*v);
        }
    }
    cols.into_iter()
        .map(|mut c| {
            c.sort_by(f64::total_cmp);
            quantile(&c, 0.5)
        })
        .collect()
}

fn optional(v: Option<f64>) -> CsvCell {
    v.map(CsvCell::from).unwrap_or_else(|| CsvCell::from(""))
}

impl BenchmarkOutcome {
    /// Median normalized singular values per matrix, keyed
    /// `matrix[data]`, e.g. `loewner-half-half[smm]`.
    pub fn singular_value_decays(&self) -> BTreeMap<String, Vec<f64>> {
        let keys: std::collections::BTreeSet<&String> = self
            .traces
            .iter()
            .flatten()
            .flat_map(|t| t.singular_values.keys())
            .collect();
        keys.into_iter()
            .map(|k| {
                let rows = self.traces.iter().flatten().filter_map(|t| t.singular_values.get(k));
                (k.clone(), ragged_median(rows))
            })
            .collect()
    }

    /// Normalized singular values of one realization.
    pub fn realization_singular_values(&self, index: usize, key: &str) -> Option<&Vec<f64>> {
        self.traces.get(index)?.as_ref()?.singular_values.get(key)
    }

    /// Writes `report.json`, `model.json`, `boxplot.csv`, `order_sweep.csv`,
    /// `singular_values.csv`, `impulse.csv` and `frf.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("report.json"), &self.report)?;
        save_model(&dir.join("model.json"), &self.reference)?;

        let header = ["metric", "count", "mean", "min", "q25", "median", "q75", "max", "outliers"];
        let rows: Vec<Vec<CsvCell>> = self
            .report
            .summary
            .metrics
            .iter()
            .map(|(name, s)| {
                let outliers = s.outliers.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" ");
                vec![
                    name.as_str().into(),
                    s.count.into(),
                    s.mean.into(),
                    s.min.into(),
                    s.q25.into(),
                    s.median.into(),
                    s.q75.into(),
                    s.max.into(),
                    outliers.as_str().into(),
                ]
            })
            .collect();
        write_csv(&dir.join("boxplot.csv"), &header, &rows)?;

        let rows: Vec<Vec<CsvCell>> = self
            .report
            .sweep
            .iter()
            .map(|s| {
                vec![
                    s.method.name().into(),
                    s.order.into(),
                    optional(s.mean_freq_error),
                    optional(s.mean_impulse_error),
                    s.count.into(),
                ]
            })
            .collect();
        write_csv(
            &dir.join("order_sweep.csv"),
            &["method", "order", "mean_W_H", "mean_W_h", "count"],
            &rows,
        )?;

        let mut rows = Vec::new();
        for (key, decay) in self.singular_value_decays() {
            for (i, v) in decay.iter().enumerate() {
                rows.push(vec![key.as_str().into(), (i + 1).into(), (*v).into(), (*v).into()]);
            }
        }
        write_csv(
            &dir.join("singular_values.csv"),
            &["matrix", "index", "sigma", "sigma_normalized"],
            &rows,
        )?;

        let ok = || self.traces.iter().flatten();
        let markov: BTreeMap<&str, Vec<f64>> = ["smm", "ls"]
            .into_iter()
            .map(|k| (k, ragged_mean(ok().filter_map(|t| t.markov.get(k)))))
            .collect();
        let impulse: BTreeMap<Method, Vec<f64>> = self
            .report
            .config
            .methods
            .iter()
            .map(|&m| (m, ragged_mean(ok().filter_map(|t| t.impulse.get(&m)))))
            .collect();
        let ts = self.report.model.ts;
        let mut header: Vec<String> = vec!["k".into(), "t".into(), "true".into()];
        header.extend(markov.keys().map(|k| format!("{k}_markov")));
        header.extend(impulse.keys().map(|m| m.name().to_string()));
        let cell = |v: &Vec<f64>, k: usize| v.get(k).map(|x| CsvCell::from(*x)).unwrap_or_else(|| "".into());
        let rows: Vec<Vec<CsvCell>> = (0..self.reference_impulse.len())
            .map(|k| {
                let mut row = vec![k.into(), (k as f64 * ts).into(), self.reference_impulse[k].into()];
                row.extend(markov.values().map(|v| cell(v, k)));
                row.extend(impulse.values().map(|v| cell(v, k)));
                row
            })
            .collect();
        write_csv(&dir.join("impulse.csv"), &header, &rows)?;

        let magnitude: BTreeMap<Method, Vec<f64>> = self
            .report
            .config
            .methods
            .iter()
            .map(|&m| (m, ragged_mean(ok().filter_map(|t| t.magnitude.get(&m)))))
            .collect();
        let mut header: Vec<String> = vec!["omega".into(), "true".into()];
        header.extend(magnitude.keys().map(|m| m.name().to_string()));
        let rows: Vec<Vec<CsvCell>> = self
            .grid_omega
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let mut row = vec![(*w).into(), self.reference_magnitude[i].into()];
                row.extend(magnitude.values().map(|v| cell(v, i)));
                row
            })
            .collect();
        write_csv(&dir.join("frf.csv"), &header, &rows)
    }
}
