use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use smmrom::benchmark::{run_benchmark, BenchmarkConfig, L0Mode};
use smmrom::dataio::{
    generate_experiment, load_dataset, load_markov, save_dataset, save_markov, write_csv, write_json, CsvCell, Dataset,
    ExperimentSpec,
};
use smmrom::estimation::TuningConfig;
use smmrom::lti::Sampling;
use smmrom::modelfile::{load_model, save_model, AnyModel};
use smmrom::pencils::SvdReport;
use smmrom::pipeline::{
    hankel_stage, loewner_stage, run_method, step_one, step_two, GridSpec, Method, PartitionMode, PipelineConfig,
    Reference,
};
use smmrom::signal::MarkovSequence;
use smmrom::spectral::{estimate_frf_spectral, markov_to_frequency, write_frequency_csv};
use smmrom::systems::{structural_surrogate, SurrogateSpec};
use smmrom::{Error, Result};

#[derive(Parser)]
#[command(name = "smmrom", version, about = "Reduced-order LTI models from noisy input-output data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Noise-free response of a model: impulse response, or the output for a dataset's input.
    Simulate(SimulateArgs),
    /// Simulate a model under white Gaussian input and add output noise.
    Generate(GenerateArgs),
    /// Estimate Markov parameters from a dataset.
    Estimate(EstimateArgs),
    /// DFT of Markov parameters, or the periodogram-ratio FRF of a dataset.
    Fft(FftArgs),
    /// Singular values and order suggestions of a Hankel or Loewner matrix.
    Svd(PencilArgs),
    /// Build a reduced model from Markov parameters.
    Reduce(PencilArgs),
    /// Run one identification method end to end.
    Run(RunArgs),
    /// Monte-Carlo campaign over noisy realizations of a reference model.
    Benchmark(BenchmarkArgs),
}

#[derive(Clone, Copy, Debug)]
enum OrderArg {
    Auto,
    Fixed(usize),
}

impl std::str::FromStr for OrderArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(OrderArg::Auto),
            n => n
                .parse::<usize>()
                .ok()
                .filter(|&n| n >= 1)
                .map(OrderArg::Fixed)
                .ok_or_else(|| format!("expected a positive integer or `auto`, got {n:?}")),
        }
    }
}

impl OrderArg {
    fn fixed(self) -> Option<usize> {
        match self {
            OrderArg::Auto => None,
            OrderArg::Fixed(r) => Some(r),
        }
    }
}

#[derive(Args)]
struct TuningArgs {
    /// Margin on the cross-correlation threshold.
    #[arg(long, default_value_t = 0.4)]
    alpha: f64,
    /// Past window length; selected from the cross-correlation when absent.
    #[arg(long)]
    l0: Option<usize>,
    /// Future window length; selected from the rank rule when absent.
    #[arg(long)]
    n: Option<usize>,
    /// Noise variance for SMM; the LS residual estimate when absent.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Relative singular-value threshold for the threshold order rule.
    #[arg(long, default_value_t = 1e-8)]
    svd_threshold: f64,
}

impl TuningArgs {
    fn tuning(&self, order: Option<usize>) -> TuningConfig {
        TuningConfig {
            alpha: self.alpha,
            svd_threshold: self.svd_threshold,
            l0: self.l0,
            n: self.n,
            sigma2: self.sigma2,
            order,
            ..TuningConfig::default()
        }
    }
}

#[derive(Args)]
struct GridArgs {
    /// Lowest evaluation frequency in rad/s.
    #[arg(long, default_value_t = 1.0)]
    w_min: f64,
    /// Highest evaluation frequency in rad/s.
    #[arg(long, default_value_t = 100.0)]
    w_max: f64,
    /// Number of log-spaced evaluation frequencies.
    #[arg(long, default_value_t = 200)]
    grid_points: usize,
}

impl GridArgs {
    fn spec(&self) -> GridSpec {
        GridSpec {
            w_min: self.w_min,
            w_max: self.w_max,
            count: self.grid_points,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Dataset whose input is replayed; without it the impulse response is written.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Impulse-response length.
    #[arg(long, default_value_t = 1000)]
    ns: usize,
    /// Sample period for continuous models (zero-order hold).
    #[arg(long)]
    ts: Option<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    /// Model file; the built-in 48th-order surrogate when absent.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    ns: usize,
    /// Sample period for continuous models (zero-order hold).
    #[arg(long, default_value_t = 0.015)]
    ts: f64,
    #[arg(long, default_value_t = 1e-7)]
    sigma2: f64,
    #[arg(long, default_value_t = 1.0)]
    input_std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Estimator {
    Ls,
    Smm,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(value_enum)]
    estimator: Estimator,
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    tuning: TuningArgs,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct FftArgs {
    /// Markov-parameter CSV (`k,t,h_1_1,…`).
    #[arg(long, conflicts_with = "dataset")]
    markov: Option<PathBuf>,
    /// Dataset for the periodogram-ratio estimate.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Grid size for the dataset estimate; the selected N when absent.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0.4)]
    alpha: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PencilKind {
    Hankel,
    Loewner,
}

#[derive(Args)]
struct PencilArgs {
    #[arg(value_enum)]
    kind: PencilKind,
    /// Markov-parameter CSV (`k,t,h_1_1,…`).
    #[arg(long)]
    markov: PathBuf,
    #[arg(long, default_value = "auto")]
    order: OrderArg,
    #[arg(long, default_value = "combined")]
    partition: PartitionMode,
    #[arg(long, default_value_t = 1e-8)]
    svd_threshold: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    method: Method,
    /// Dataset to identify from; generated from `--model` when absent.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Reference model for metrics, and the data source without `--dataset`.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    ns: usize,
    #[arg(long, default_value_t = 0.015)]
    ts: f64,
    #[arg(long, default_value_t = 1e-7)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "auto")]
    order: OrderArg,
    #[arg(long, default_value = "combined")]
    partition: PartitionMode,
    #[command(flatten)]
    tuning: TuningArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum L0ModeArg {
    Averaged,
    PerRealization,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Model file; the built-in 48th-order surrogate when absent.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    ns: usize,
    #[arg(long, default_value_t = 0.015)]
    ts: f64,
    #[arg(long, default_value_t = 1e-7)]
    sigma2: f64,
    #[arg(long, default_value_t = 0.4)]
    alpha: f64,
    #[arg(long, default_value = "48")]
    order: OrderArg,
    #[arg(long, default_value = "combined")]
    partition: PartitionMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    realizations: usize,
    /// Comma-separated methods to run.
    #[arg(long, value_delimiter = ',', default_value = "smm-hf,smm-lf,ls-hf,noisy-lf")]
    methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,48")]
    sweep_orders: Vec<usize>,
    #[arg(long, value_enum, default_value = "averaged")]
    l0_mode: L0ModeArg,
    /// Draw a fresh input for every realization instead of sharing one.
    #[arg(long)]
    independent_inputs: bool,
    #[arg(long, default_value_t = 1.0)]
    input_std: f64,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn model_or_surrogate(path: Option<&Path>) -> Result<(AnyModel, String)> {
    match path {
        Some(p) => Ok((load_model(p)?, p.display().to_string())),
        None => Ok((structural_surrogate(&SurrogateSpec::default())?.into(), "surrogate".into())),
    }
}

fn discrete(model: AnyModel, ts: Option<f64>) -> Result<AnyModel> {
    match (model.sampling(), ts) {
        (Sampling::Discrete { .. }, _) => Ok(model),
        (Sampling::Continuous, Some(ts)) => model.discretize_zoh(ts),
        (Sampling::Continuous, None) => Err(Error::InvalidArgument(
            "continuous model needs --ts for zero-order-hold discretization".into(),
        )),
    }
}

fn create(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let model = discrete(load_model(&a.model)?, a.ts)?;
    create(&a.out)?;
    match &a.dataset {
        Some(path) => {
            let ds: Dataset<f64> = load_dataset(path)?;
            let y = model.simulate_detailed(&ds.u)?;
            let out = Dataset::new(ds.u, y.value)?;
            save_dataset(&a.out.join("simulated.csv"), &out)?;
        }
        None => {
            let h = model.impulse_response_detailed(a.ns)?;
            save_markov(&a.out.join("impulse.csv"), &h.value)?;
        }
    }
    Ok(())
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let (model, _) = model_or_surrogate(a.model.as_deref())?;
    let model = discrete(model, Some(a.ts))?;
    let spec = ExperimentSpec {
        input_std: a.input_std,
        ..ExperimentSpec::new(a.ns, a.sigma2, a.seed)
    };
    let ds = generate_experiment(model.as_real()?, &spec)?;
    create(&a.out)?;
    save_dataset(&a.out.join("dataset.csv"), &ds)
}

fn estimate(a: &EstimateArgs) -> Result<()> {
    let ds: Dataset<f64> = load_dataset(&a.dataset)?;
    let tuning = a.tuning.tuning(None);
    tuning.validate()?;
    let one = step_one(&ds, &tuning)?;
    let (h, sigma2_used) = match a.estimator {
        Estimator::Ls => (one.h_ls.clone(), None),
        Estimator::Smm => {
            let (h, s) = step_two(&ds, &one, &tuning)?;
            (h, Some(s))
        }
    };
    create(&a.out)?;
    save_markov(&a.out.join("markov.csv"), &h)?;
    write_json(
        &a.out.join("report.json"),
        &json!({
            "estimator": match a.estimator { Estimator::Ls => "ls", Estimator::Smm => "smm" },
            "hyper": one.hyper,
            "sigma2_used": sigma2_used,
        }),
    )
}

fn fft(a: &FftArgs) -> Result<()> {
    let samples = match (&a.markov, &a.dataset) {
        (Some(path), _) => markov_to_frequency(&load_markov(path)?)?,
        (None, Some(path)) => {
            let ds: Dataset<f64> = load_dataset(path)?;
            let n = match a.n {
                Some(n) => n,
                None => {
                    let tuning = TuningConfig {
                        alpha: a.alpha,
                        ..TuningConfig::default()
                    };
                    step_one(&ds, &tuning)?.hyper.n
                }
            };
            estimate_frf_spectral(&ds, n)?
        }
        (None, None) => return Err(Error::InvalidArgument("give --markov or --dataset".into())),
    };
    create(&a.out)?;
    write_frequency_csv(&a.out.join("frf.csv"), &samples)
}

fn write_singular_values<'a>(path: &Path, reports: impl Iterator<Item = (&'a String, &'a SvdReport)>) -> Result<()> {
    let mut rows = Vec::new();
    for (name, r) in reports {
        for (i, (s, n)) in r.singular_values.iter().zip(&r.normalized).enumerate() {
            rows.push(vec![CsvCell::from(name.as_str()), (i + 1).into(), (*s).into(), (*n).into()]);
        }
    }
    write_csv(path, &["matrix", "index", "sigma", "sigma_normalized"], &rows)
}

fn pencil_stage(kind: PencilKind, h: &MarkovSequence<f64>, partition: PartitionMode, thr: f64) -> Result<smmrom::pipeline::PencilStage> {
    match kind {
        PencilKind::Hankel => hankel_stage(h, thr),
        PencilKind::Loewner => loewner_stage(&markov_to_frequency(h)?, partition, thr),
    }
}

fn svd(a: &PencilArgs) -> Result<()> {
    let stage = pencil_stage(a.kind, &load_markov(&a.markov)?, a.partition, a.svd_threshold)?;
    create(&a.out)?;
    write_singular_values(&a.out.join("singular_values.csv"), stage.svd.iter())?;
    for (name, r) in &stage.svd {
        println!(
            "{name}: threshold order {}, gap order {}",
            r.threshold_order, r.gap_order
        );
    }
    Ok(())
}

fn reduce(a: &PencilArgs) -> Result<()> {
    let h = load_markov(&a.markov)?;
    let stage = pencil_stage(a.kind, &h, a.partition, a.svd_threshold)?;
    let (order, source) = stage.resolve_order(a.order.fixed())?;
    let model = stage.reducer.reduce(&[order])?.remove(0);
    create(&a.out)?;
    save_model(&a.out.join("model.json"), &model)?;
    write_singular_values(&a.out.join("singular_values.csv"), stage.svd.iter())?;
    write_json(
        &a.out.join("report.json"),
        &json!({
            "pencil": match a.kind { PencilKind::Hankel => "hankel", PencilKind::Loewner => "loewner" },
            "partition": (a.kind == PencilKind::Loewner).then(|| a.partition.name()),
            "order": order,
            "order_source": source,
            "suggested_order": stage.suggested_order(),
            "designated_matrix": stage.designated,
            "singular_values": stage.svd,
        }),
    )
}

fn run(a: &RunArgs) -> Result<()> {
    let truth = a
        .model
        .as_deref()
        .map(|p| discrete(load_model(p)?, Some(a.ts)))
        .transpose()?;
    let ds: Dataset<f64> = match (&a.dataset, &truth) {
        (Some(path), _) => load_dataset(path)?,
        (None, Some(m)) => generate_experiment(m.as_real()?, &ExperimentSpec::new(a.ns, a.noise, a.seed))?,
        (None, None) => return Err(Error::InvalidArgument("give --dataset or --model".into())),
    };
    let cfg = PipelineConfig {
        method: a.method,
        tuning: a.tuning.tuning(a.order.fixed()),
        partition: a.partition,
        grid: a.grid.spec(),
    };
    let reference = truth
        .as_ref()
        .map(|m| Reference::new(m, &cfg.grid, ds.len()))
        .transpose()?;
    let out = run_method(&ds, &cfg, reference.as_ref())?;
    create(&a.out)?;
    write_json(&a.out.join("report.json"), &out.report)?;
    save_model(&a.out.join("model.json"), &out.model)?;
    write_singular_values(&a.out.join("singular_values.csv"), out.report.singular_values.iter())?;
    if let Some(h) = &out.markov {
        save_markov(&a.out.join("markov.csv"), h)?;
    }
    let horizon = reference.as_ref().map_or(ds.len(), |r| r.impulse.len());
    save_markov(&a.out.join("impulse.csv"), &out.model.impulse_response_detailed(horizon)?.value)?;
    let grid = cfg.grid.grid(ds.ts())?;
    write_frequency_csv(&a.out.join("frf.csv"), &out.model.evaluate(&grid)?)?;
    println!(
        "{}: order {} ({:?}), L0 {}, N {}, sigma2_hat {:.3e}",
        a.method,
        out.report.order,
        out.report.order_source,
        out.report.hyper.l0,
        out.report.hyper.n,
        out.report.hyper.sigma2_hat
    );
    if let Some(m) = &out.report.metrics {
        println!("W_H {:.4e}, W_h {:.4e}", m.freq_error, m.impulse_error);
    }
    Ok(())
}

fn benchmark(a: &BenchmarkArgs) -> Result<()> {
    let (model, source) = model_or_surrogate(a.model.as_deref())?;
    let tuning = TuningConfig::default();
    let cfg = BenchmarkConfig {
        samples: a.ns,
        ts: a.ts,
        sigma2: a.sigma2,
        input_std: a.input_std,
        realizations: a.realizations,
        base_seed: a.seed,
        shared_input: !a.independent_inputs,
        alpha: a.alpha,
        order: a.order.fixed(),
        tuning,
        partition: a.partition,
        l0_mode: match a.l0_mode {
            L0ModeArg::Averaged => L0Mode::Averaged,
            L0ModeArg::PerRealization => L0Mode::PerRealization,
        },
        methods: a.methods.clone(),
        grid: a.grid.spec(),
        sweep_orders: a.sweep_orders.clone(),
        impulse_horizon: None,
    };
    let outcome = run_benchmark(&model, &source, &cfg)?;
    outcome.write(&a.out)?;
    let s = &outcome.report.summary;
    println!("{} of {} realizations succeeded", s.succeeded, s.requested);
    for (name, b) in &s.metrics {
        println!("{name}: median {:.4}, IQR [{:.4}, {:.4}]", b.median, b.q25, b.q75);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Generate(a) => generate(a),
        Command::Estimate(a) => estimate(a),
        Command::Fft(a) => fft(a),
        Command::Svd(a) => svd(a),
        Command::Reduce(a) => reduce(a),
        Command::Run(a) => run(a),
        Command::Benchmark(a) => benchmark(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
