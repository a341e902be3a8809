//! End-to-end identification and reduction runs.
//!
//! Every method shares step 1 (past window, future window and noise level):
//! 1a `L0` from the cross-correlation, 1b `N` from the excitation bound,
//! 1c least-squares FIR fit and noise variance. The SMM methods then estimate
//! the impulse response (step 2) and reduce it with a Hankel or Loewner pencil
//! (step 3).

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::estimation::{
    build_behavioral, cross_correlation, estimate_markov_ls_detailed, estimate_noise_variance, select_l0,
    select_n, CrossCorrelation, SmmPredictor, TuningConfig,
};
use crate::metrics::{eval_grid_logspace, fit_percentage, h2_freq_error, h2_impulse_error, EvalGrid};
use crate::modelfile::AnyModel;
use crate::pencils::{
    build_hankel, build_loewner_partitioned, hankel_reduce_orders, loewner_reduce_orders, svd_order, Partition,
    SvdReport,
};
use crate::signal::MarkovSequence;
use crate::spectral::{estimate_frf_spectral, markov_to_frequency, FrequencySamples};

pub const STEP_L0: &str = "step 1a (past window L0)";
pub const STEP_N: &str = "step 1b (future window N)";
pub const STEP_NOISE: &str = "step 1c (least squares and noise variance)";
pub const STEP_SMM: &str = "step 2 (SMM impulse response)";
pub const STEP_PENCIL: &str = "step 3a (pencil)";
pub const STEP_SVD: &str = "step 3b (singular values)";
pub const STEP_MODEL: &str = "step 3c (reduced model)";

/// Identification method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// SMM impulse response, Hankel realization.
    SmmHf,
    /// SMM impulse response, FFT, Loewner realization.
    SmmLf,
    /// Least-squares impulse response, Hankel realization.
    LsHf,
    /// Periodogram-ratio frequency response, Loewner realization.
    NoisyLf,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::SmmHf, Method::SmmLf, Method::LsHf, Method::NoisyLf];

    pub fn name(self) -> &'static str {
        match self {
            Method::SmmHf => "smm-hf",
            Method::SmmLf => "smm-lf",
            Method::LsHf => "ls-hf",
            Method::NoisyLf => "noisy-lf",
        }
    }

    pub fn is_loewner(self) -> bool {
        matches!(self, Method::SmmLf | Method::NoisyLf)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

/// Partitioning used by the Loewner methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionMode {
    Alternate,
    HalfHalf,
    /// Order from the half-half matrix, model from the alternate pencil.
    #[default]
    Combined,
}

impl PartitionMode {
    pub fn name(self) -> &'static str {
        match self {
            PartitionMode::Alternate => "alternate",
            PartitionMode::HalfHalf => "half-half",
            PartitionMode::Combined => "combined",
        }
    }

    fn order_scheme(self) -> Partition {
        match self {
            PartitionMode::Alternate => Partition::Alternate,
            _ => Partition::HalfHalf,
        }
    }

    fn model_scheme(self) -> Partition {
        match self {
            PartitionMode::HalfHalf => Partition::HalfHalf,
            _ => Partition::Alternate,
        }
    }
}

impl std::str::FromStr for PartitionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alternate" => Ok(PartitionMode::Alternate),
            "half-half" => Ok(PartitionMode::HalfHalf),
            "combined" => Ok(PartitionMode::Combined),
            other => Err(Error::InvalidArgument(format!("unknown partition {other:?}"))),
        }
    }
}

/// Log-spaced evaluation frequencies in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub w_min: f64,
    pub w_max: f64,
    pub count: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            w_min: 1.0,
            w_max: 100.0,
            count: 200,
        }
    }
}

impl GridSpec {
    pub fn grid(&self, ts: f64) -> Result<EvalGrid<f64>> {
        eval_grid_logspace(self.w_min, self.w_max, self.count, ts)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub method: Method,
    pub tuning: TuningConfig,
    pub partition: PartitionMode,
    pub grid: GridSpec,
}

impl PipelineConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            tuning: TuningConfig::default(),
            partition: PartitionMode::default(),
            grid: GridSpec::default(),
        }
    }

    pub fn validate(&self, ds: &Dataset<f64>) -> Result<()> {
        self.tuning.validate()?;
        if self.method == Method::NoisyLf && (ds.nu() != 1 || ds.ny() != 1) {
            return Err(Error::MethodUnsupported(
                "noisy-lf needs single-input single-output data".into(),
            ));
        }
        Ok(())
    }
}

/// Step-1 choices and their inputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperParameters {
    pub l0: usize,
    /// `None` when `L0` was supplied rather than selected.
    pub l0_epsilon: Option<f64>,
    pub l0_saturated: bool,
    pub n: usize,
    pub n_max: usize,
    /// Data columns `M' = N_s − L0 − N + 1`.
    pub columns: usize,
    pub sigma2_hat: f64,
}

/// Step-1 results shared by every method on one dataset.
#[derive(Debug, Clone)]
pub struct StepOne {
    pub hyper: HyperParameters,
    pub h_ls: MarkovSequence<f64>,
}

/// Runs step 1. `tuning.l0` / `tuning.n` skip the corresponding selection.
pub fn step_one(ds: &Dataset<f64>, tuning: &TuningConfig) -> Result<StepOne> {
    let (l0, epsilon, saturated) = match tuning.l0 {
        Some(l0) => (l0, None, false),
        None => {
            let choice = select_l0(&cross_correlation(ds), tuning.alpha).map_err(|e| e.at_step(STEP_L0))?;
            (choice.l0, Some(choice.epsilon), choice.saturated)
        }
    };
    step_one_with_l0(ds, tuning, l0, epsilon, saturated)
}

/// Step 1 with `L0` chosen elsewhere, e.g. from a correlation averaged over
/// several records.
pub fn step_one_with_l0(
    ds: &Dataset<f64>,
    tuning: &TuningConfig,
    l0: usize,
    epsilon: Option<f64>,
    saturated: bool,
) -> Result<StepOne> {
    if l0 == 0 {
        return Err(Error::InvalidArgument("L0 must be >= 1".into()).at_step(STEP_L0));
    }
    let ns = ds.len();
    let (n, n_max) = match tuning.n {
        Some(n) => (n, crate::estimation::n_upper_bound(ns, ds.nu(), l0).unwrap_or(0)),
        None => {
            let c = select_n(&ds.u, l0, tuning.rank_tolerance).map_err(|e| e.at_step(STEP_N))?;
            (c.n, c.n_max)
        }
    };
    let columns = crate::estimation::data_columns(ns, l0, n)
        .ok_or_else(|| Error::OutOfRange(format!("L0 + N = {} exceeds N_s = {ns}", l0 + n)).at_step(STEP_N))?;
    let ls = estimate_markov_ls_detailed(ds, n, tuning.rank_tolerance).map_err(|e| e.at_step(STEP_NOISE))?;
    let sigma2_hat = estimate_noise_variance(ds, &ls.markov).map_err(|e| e.at_step(STEP_NOISE))?;
    Ok(StepOne {
        hyper: HyperParameters {
            l0,
            l0_epsilon: epsilon,
            l0_saturated: saturated,
            n,
            n_max,
            columns,
            sigma2_hat,
        },
        h_ls: ls.markov,
    })
}

/// SMM impulse response (step 2) and the variance actually used.
pub fn step_two(ds: &Dataset<f64>, one: &StepOne, tuning: &TuningConfig) -> Result<(MarkovSequence<f64>, f64)> {
    let run = || {
        let mats = build_behavioral(ds, one.hyper.l0, one.hyper.n)?;
        let sigma2 = tuning.sigma2.unwrap_or(one.hyper.sigma2_hat);
        let predictor = SmmPredictor::new(mats, sigma2, tuning.rank_tolerance)?;
        Ok((predictor.markov(ds.ts())?, predictor.sigma2()))
    };
    run().map_err(|e: Error| e.at_step(STEP_SMM))
}

/// How the reduction order was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderSource {
    Fixed,
    /// Largest logarithmic gap of the designated matrix.
    Gap,
}

/// Pencil data and singular values prepared for reduction.
pub enum Reducer {
    Hankel(crate::pencils::HankelPencil<f64>),
    Loewner(crate::pencils::LoewnerPencil<f64>),
}

impl Reducer {
    pub fn max_order(&self) -> usize {
        match self {
            Reducer::Hankel(p) => p.h.nrows().min(p.h.ncols()),
            Reducer::Loewner(p) => p.l.nrows().min(p.l.ncols()),
        }
    }

    /// Models at each order (one SVD).
    pub fn reduce(&self, orders: &[usize]) -> Result<Vec<AnyModel>> {
        let models: Vec<AnyModel> = match self {
            Reducer::Hankel(p) => hankel_reduce_orders(p, orders)?.into_iter().map(AnyModel::from).collect(),
            Reducer::Loewner(p) => loewner_reduce_orders(p, orders)?.into_iter().map(AnyModel::from).collect(),
        };
        Ok(models)
    }
}

/// Step 3 outcome before choosing an order: the reducer, the matrix used for
/// order selection, and all singular-value reports keyed by matrix name.
pub struct PencilStage {
    pub reducer: Reducer,
    pub designated: String,
    pub svd: BTreeMap<String, SvdReport>,
}

impl PencilStage {
    pub fn suggested_order(&self) -> usize {
        self.svd[&self.designated].gap_order
    }

    /// Explicit order, else the gap suggestion, capped by the pencil size.
    pub fn resolve_order(&self, fixed: Option<usize>) -> Result<(usize, OrderSource)> {
        let max = self.reducer.max_order();
        match fixed {
            Some(r) if r == 0 || r > max => Err(Error::Order { r, max }.at_step(STEP_MODEL)),
            Some(r) => Ok((r, OrderSource::Fixed)),
            None => Ok((self.suggested_order().clamp(1, max), OrderSource::Gap)),
        }
    }
}

pub fn hankel_stage(h: &MarkovSequence<f64>, svd_threshold: f64) -> Result<PencilStage> {
    let pencil = build_hankel(h).map_err(|e| e.at_step(STEP_PENCIL))?;
    let report = svd_order(&pencil.h, svd_threshold).map_err(|e| e.at_step(STEP_SVD))?;
    Ok(PencilStage {
        reducer: Reducer::Hankel(pencil),
        designated: "hankel".into(),
        svd: BTreeMap::from([("hankel".to_string(), report)]),
    })
}

pub fn loewner_stage(samples: &FrequencySamples<f64>, mode: PartitionMode, svd_threshold: f64) -> Result<PencilStage> {
    let mut svd = BTreeMap::new();
    let mut pencils = BTreeMap::new();
    for scheme in [mode.order_scheme(), mode.model_scheme()] {
        if pencils.contains_key(scheme.name()) {
            continue;
        }
        let pencil = build_loewner_partitioned(samples, scheme).map_err(|e| e.at_step(STEP_PENCIL))?;
        let report = svd_order(&pencil.l, svd_threshold).map_err(|e| e.at_step(STEP_SVD))?;
        svd.insert(format!("loewner-{}", scheme.name()), report);
        pencils.insert(scheme.name(), pencil);
    }
    let model_pencil = pencils.remove(mode.model_scheme().name()).expect("model pencil built");
    Ok(PencilStage {
        reducer: Reducer::Loewner(model_pencil),
        designated: format!("loewner-{}", mode.order_scheme().name()),
        svd,
    })
}

/// Scores against a known reference system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSet {
    /// Fit of the estimated Markov parameters, when the method produced any.
    pub fit: Option<f64>,
    pub freq_error: f64,
    pub impulse_error: f64,
    /// Largest imaginary part of the reduced model's impulse response
    /// relative to its norm (complex models only).
    pub impulse_imag_ratio: f64,
}

/// Reference responses of the true system, computed once per campaign.
#[derive(Debug, Clone)]
pub struct Reference {
    pub grid: EvalGrid<f64>,
    pub frequency: FrequencySamples<f64>,
    pub impulse: MarkovSequence<f64>,
}

impl Reference {
    pub fn new(truth: &AnyModel, grid: &GridSpec, horizon: usize) -> Result<Self> {
        let ts = match truth.sampling() {
            crate::lti::Sampling::Discrete { ts } => ts,
            crate::lti::Sampling::Continuous => {
                return Err(Error::InvalidArgument("reference model must be discrete".into()))
            }
        };
        let grid = grid.grid(ts)?;
        Ok(Self {
            frequency: truth.evaluate(&grid)?,
            impulse: truth.impulse_response_detailed(horizon)?.value,
            grid,
        })
    }

    pub fn score(&self, model: &AnyModel, markov: Option<&MarkovSequence<f64>>) -> Result<MetricSet> {
        let freq = model.evaluate(&self.grid)?;
        let ir = model.impulse_response_detailed(self.impulse.len())?;
        let fit = markov
            .map(|h| fit_percentage(h, &self.impulse.truncated(h.len())?))
            .transpose()?;
        Ok(MetricSet {
            fit,
            freq_error: h2_freq_error(&freq, &self.frequency)?,
            impulse_error: h2_impulse_error(&ir.value, &self.impulse)?,
            impulse_imag_ratio: ir.imag_ratio(),
        })
    }
}

/// Record of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub method: Method,
    pub partition: Option<&'static str>,
    pub samples: usize,
    pub inputs: usize,
    pub outputs: usize,
    pub ts: f64,
    pub hyper: HyperParameters,
    /// Variance entering the SMM estimator after flooring.
    pub sigma2_used: Option<f64>,
    pub order: usize,
    pub order_source: OrderSource,
    pub suggested_order: usize,
    pub designated_matrix: String,
    pub singular_values: BTreeMap<String, SvdReport>,
    pub metrics: Option<MetricSet>,
    pub warnings: Vec<String>,
    pub wall_time_s: f64,
}

/// Model, report and intermediate data of one run.
pub struct RunOutput {
    pub model: AnyModel,
    pub report: ExperimentReport,
    /// Estimated Markov parameters (SMM or LS), absent for noisy-lf.
    pub markov: Option<MarkovSequence<f64>>,
    /// Frequency data fed to the Loewner methods.
    pub frequency: Option<FrequencySamples<f64>>,
}

/// Runs `cfg.method` on `ds`. With a reference, metrics are attached.
pub fn run_method(ds: &Dataset<f64>, cfg: &PipelineConfig, reference: Option<&Reference>) -> Result<RunOutput> {
    cfg.validate(ds)?;
    let started = Instant::now();
    let one = step_one(ds, &cfg.tuning)?;
    let tuning = &cfg.tuning;
    let (markov, sigma2_used) = match cfg.method {
        Method::SmmHf | Method::SmmLf => {
            let (h, s) = step_two(ds, &one, tuning)?;
            (Some(h), Some(s))
        }
        Method::LsHf => (Some(one.h_ls.clone()), None),
        Method::NoisyLf => (None, None),
    };
    let frequency = match cfg.method {
        Method::SmmLf => Some(
            markov_to_frequency(markov.as_ref().expect("SMM estimate")).map_err(|e| e.at_step(STEP_PENCIL))?,
        ),
        Method::NoisyLf => Some(estimate_frf_spectral(ds, one.hyper.n).map_err(|e| e.at_step(STEP_PENCIL))?),
        _ => None,
    };
    let stage = match (&frequency, &markov) {
        (Some(f), _) => loewner_stage(f, cfg.partition, tuning.svd_threshold)?,
        (None, Some(h)) => hankel_stage(h, tuning.svd_threshold)?,
        (None, None) => unreachable!("every method yields Markov or frequency data"),
    };
    let (order, order_source) = stage.resolve_order(tuning.order)?;
    let model = stage
        .reducer
        .reduce(&[order])
        .map_err(|e| e.at_step(STEP_MODEL))?
        .remove(0);
    let mut warnings = Vec::new();
    if one.hyper.l0_saturated {
        warnings.push(format!("L0 = {} saturated at the largest lag", one.hyper.l0));
    }
    let metrics = reference.map(|r| r.score(&model, markov.as_ref())).transpose()?;
    if let Some(m) = &metrics {
        if m.impulse_imag_ratio > crate::lti::IMAG_WARN_RATIO {
            warnings.push(format!(
                "reduced model response has relative imaginary part {:.3e}",
                m.impulse_imag_ratio
            ));
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let report = ExperimentReport {
        method: cfg.method,
        partition: cfg.method.is_loewner().then(|| cfg.partition.name()),
        samples: ds.len(),
        inputs: ds.nu(),
        outputs: ds.ny(),
        ts: ds.ts(),
        hyper: one.hyper,
        sigma2_used,
        order,
        order_source,
        suggested_order: stage.suggested_order(),
        designated_matrix: stage.designated.clone(),
        singular_values: stage.svd,
        metrics,
        warnings,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(RunOutput {
        model,
        report,
        markov,
        frequency,
    })
}

/// Algorithm SMM-HF.
pub fn run_smm_hf(ds: &Dataset<f64>, cfg: &PipelineConfig) -> Result<RunOutput> {
    run_method(ds, &PipelineConfig { method: Method::SmmHf, ..cfg.clone() }, None)
}

/// Algorithm SMM-LF.
pub fn run_smm_lf(ds: &Dataset<f64>, cfg: &PipelineConfig) -> Result<RunOutput> {
    run_method(ds, &PipelineConfig { method: Method::SmmLf, ..cfg.clone() }, None)
}

/// LS-HF or noisy-LF comparator, as selected by `cfg.method`.
pub fn run_baseline(ds: &Dataset<f64>, cfg: &PipelineConfig) -> Result<RunOutput> {
    match cfg.method {
        Method::LsHf | Method::NoisyLf => run_method(ds, cfg, None),
        m => Err(Error::InvalidArgument(format!("{m} is not a baseline method"))),
    }
}

/// Averages cross-correlations over records and selects one `L0`.
pub fn averaged_l0(datasets: &[&Dataset<f64>], alpha: f64) -> Result<crate::estimation::L0Choice<f64>> {
    let r: Vec<CrossCorrelation<f64>> = datasets.iter().map(|d| cross_correlation(d)).collect();
    select_l0(&CrossCorrelation::average(&r)?, alpha).map_err(|e| e.at_step(STEP_L0))
}
