//! Command-line frontend: experiment runner plus standalone tools for each
//! pipeline stage. Progress goes to stderr; data to stdout or `--out`.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qubolearn::logo::{average_weights, emit_weight_logo, render_svg, sidecar_tsv};
use qubolearn::model::{scale_ising, IsingInstance, TargetScaler};
use qubolearn::pipeline::{
    calibrate, default_lambda_grid, evaluate, run_experiment, train_instances,
    CalibrationOptions, CalibrationResult, ExperimentConfig, MethodKind, MethodSpec, Task,
    TrainedWeights, DEFAULT_BAG_COUNT, DEFAULT_FOLDS, DEFAULT_THRESHOLDS,
};
use qubolearn::samplers::{
    brute_force_solve, simulated_anneal, simulated_quantum_anneal, AnnealSchedule,
};
use qubolearn::seqdata::{preprocess, read_raw_tsv, EncodedDataset, SplitSpec};
use qubolearn::Error;

#[derive(Parser)]
#[command(name = "qubolearn", version, about = "Binary-weight sequence regression toolkit")]
struct Cli {
    /// Cap worker parallelism (default: available cores). Output does not
    /// depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a raw sequence/value TSV: window truncation, duplicate
    /// averaging, optional log2, one-hot features.
    Preprocess(PreprocessArgs),
    /// Cross-validate the regularization grid (and ensemble size for
    /// annealers) on a training TSV.
    Calibrate(CalibrateArgs),
    /// Train bagged instances at fixed hyper-parameters; weights as TSV.
    Train(TrainArgs),
    /// Score weight vectors against a disjoint test TSV.
    Evaluate(EvaluateArgs),
    /// Run the full experiment described by a config file.
    Run(RunArgs),
    /// Sample a spin-model text file with an annealer; solution pool as TSV.
    Sample(SampleArgs),
    /// Exhaustively enumerate a spin-model text file (dimension <= 24).
    SolveExact(SolveExactArgs),
    /// Render averaged weight vectors as an SVG column logo plus TSV sidecar.
    Logo(LogoArgs),
}

#[derive(Args)]
struct PreprocessArgs {
    /// Raw TSV: sequence <TAB> value, optional header and # comments
    #[arg(long)]
    input: PathBuf,
    /// Central window length (default: full sequence length)
    #[arg(long)]
    window: Option<usize>,
    /// Apply log2 to values after duplicate averaging
    #[arg(long)]
    log2: bool,
    /// Output path (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Copy)]
struct ScheduleArgs {
    /// Monte Carlo sweeps per read
    #[arg(long, default_value_t = AnnealSchedule::default().sweeps)]
    sweeps: usize,
    /// Independent annealing reads
    #[arg(long, default_value_t = AnnealSchedule::default().reads)]
    reads: usize,
    /// Initial inverse temperature
    #[arg(long, default_value_t = AnnealSchedule::default().beta_initial)]
    beta_initial: f64,
    /// Final inverse temperature
    #[arg(long, default_value_t = AnnealSchedule::default().beta_final)]
    beta_final: f64,
    /// Initial transverse field (sqa only)
    #[arg(long, default_value_t = AnnealSchedule::default().gamma_initial)]
    gamma_initial: f64,
    /// Final transverse field (sqa only)
    #[arg(long, default_value_t = AnnealSchedule::default().gamma_final)]
    gamma_final: f64,
    /// Trotter slices (sqa only)
    #[arg(long, default_value_t = AnnealSchedule::default().trotter_slices)]
    trotter_slices: usize,
}

impl ScheduleArgs {
    fn schedule(&self) -> AnnealSchedule {
        AnnealSchedule {
            sweeps: self.sweeps,
            reads: self.reads,
            beta_initial: self.beta_initial,
            beta_final: self.beta_final,
            gamma_initial: self.gamma_initial,
            gamma_final: self.gamma_final,
            trotter_slices: self.trotter_slices,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Sa,
    Sqa,
    Exact,
    Ridge,
    Lasso,
}

impl MethodArg {
    fn kind(self) -> MethodKind {
        match self {
            MethodArg::Sa => MethodKind::SaQubo,
            MethodArg::Sqa => MethodKind::SqaQubo,
            MethodArg::Exact => MethodKind::ExactQubo,
            MethodArg::Ridge => MethodKind::Ridge,
            MethodArg::Lasso => MethodKind::Lasso,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Classify,
    Rank,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Encoded training TSV (from `preprocess`)
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long, value_enum)]
    task: TaskArg,
    #[arg(long)]
    seed: u64,
    /// Comma-separated grid (default: 2^-3 .. 2^6)
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    /// Fix the ensemble size instead of sweeping 1..=20 (annealers only)
    #[arg(long)]
    ensemble_k: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,
    /// Fold training-subset fraction
    #[arg(long, default_value_t = 0.02)]
    bag_fraction: f64,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Output path for the calibration JSON (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Encoded training TSV (from `preprocess`)
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long)]
    seed: u64,
    /// Regularization strength
    #[arg(long)]
    lambda: f64,
    /// Ensemble size for annealers (default 1)
    #[arg(long)]
    ensemble_k: Option<usize>,
    #[arg(long, default_value_t = 0.02)]
    bag_fraction: f64,
    #[arg(long, default_value_t = DEFAULT_BAG_COUNT)]
    bag_count: usize,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Output path for the weights TSV, one instance per row (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Encoded training TSV (overlap guard only)
    #[arg(long)]
    train: PathBuf,
    /// Encoded test TSV
    #[arg(long)]
    test: PathBuf,
    /// Weights TSV, one instance per row
    #[arg(long)]
    weights: PathBuf,
    /// Comma-separated percentile thresholds
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    /// Output path for the metrics JSON (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (`key = value` lines)
    #[arg(long)]
    config: PathBuf,
    /// Output directory for reports, logos, tables, and the manifest
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Sa,
    Sqa,
}

#[derive(Args)]
struct SampleArgs {
    /// Spin-model text file (`n <dim> offset <v>` header plus coefficient triples)
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    sampler: SamplerArg,
    #[arg(long)]
    seed: u64,
    /// Rescale couplings by their largest magnitude before sampling
    #[arg(long)]
    rescale: bool,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Output path for the pool TSV (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveExactArgs {
    /// Spin-model text file
    #[arg(long)]
    input: PathBuf,
    /// Output path for the pool TSV (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LogoArgs {
    /// Weights TSV, one instance per row (length 4L columns)
    #[arg(long)]
    weights: PathBuf,
    /// Output SVG path; the TSV sidecar shares its stem
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // ignore failure: the global pool may already exist in tests
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> qubolearn::Result<()> {
    match command {
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Run(args) => cmd_run(args),
        Command::Sample(args) => cmd_sample(args),
        Command::SolveExact(args) => cmd_solve_exact(args),
        Command::Logo(args) => cmd_logo(args),
    }
}

fn open(path: &PathBuf) -> qubolearn::Result<BufReader<std::fs::File>> {
    Ok(BufReader::new(std::fs::File::open(path)?))
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> qubolearn::Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn cmd_preprocess(args: PreprocessArgs) -> qubolearn::Result<()> {
    let raw = read_raw_tsv(open(&args.input)?)?;
    let window = args
        .window
        .unwrap_or_else(|| raw[0].sequence.chars().count());
    let data = preprocess(&raw, window, args.log2)?;
    eprintln!(
        "preprocess: {} raw rows -> {} distinct sequences of length {}",
        raw.len(),
        data.len(),
        data.seq_length
    );
    let mut buf = Vec::new();
    data.write_tsv(&mut buf)?;
    emit(&args.out, &buf)
}

fn method_spec(kind: MethodKind, schedule: &ScheduleArgs, ensemble_k: Option<usize>) -> MethodSpec {
    let mut spec = MethodSpec::new(kind);
    if matches!(kind, MethodKind::SaQubo | MethodKind::SqaQubo) {
        spec.schedule = Some(schedule.schedule());
    }
    spec.ensemble_k = ensemble_k;
    spec
}

fn cmd_calibrate(args: CalibrateArgs) -> qubolearn::Result<()> {
    let data = EncodedDataset::read_tsv(open(&args.input)?)?;
    let method = method_spec(args.method.kind(), &args.schedule, args.ensemble_k);
    let task = match args.task {
        TaskArg::Classify => Task::Classify,
        TaskArg::Rank => Task::Rank,
    };
    let grid = args.lambda_grid.unwrap_or_else(default_lambda_grid);
    let spec = SplitSpec {
        // unused here: train/calibrate never split, but validate() wants (0,1)
        test_fraction: 0.5,
        bag_fraction: args.bag_fraction,
        bag_count: 1,
        seed: args.seed,
    };
    let start = std::time::Instant::now();
    let calib = calibrate(
        &data,
        &method,
        task,
        &spec,
        &grid,
        &CalibrationOptions { folds: args.folds },
    )?;
    eprintln!(
        "calibrate: {} folds x {} lambdas in {:.1}s -> lambda {}{}",
        args.folds,
        grid.len(),
        start.elapsed().as_secs_f64(),
        calib.chosen_lambda,
        calib
            .chosen_k
            .map_or(String::new(), |k| format!(", K {k}")),
    );
    let mut buf = serde_json::to_vec_pretty(&calib)?;
    buf.push(b'\n');
    emit(&args.out, &buf)
}

fn cmd_train(args: TrainArgs) -> qubolearn::Result<()> {
    let data = EncodedDataset::read_tsv(open(&args.input)?)?;
    let kind = args.method.kind();
    let method = method_spec(kind, &args.schedule, args.ensemble_k);
    let spec = SplitSpec {
        // unused here: train/calibrate never split, but validate() wants (0,1)
        test_fraction: 0.5,
        bag_fraction: args.bag_fraction,
        bag_count: args.bag_count,
        seed: args.seed,
    };
    let calib = CalibrationResult {
        method: kind,
        task: Task::Rank,
        lambda_grid: vec![args.lambda],
        chosen_lambda: args.lambda,
        chosen_k: if kind.is_annealer() {
            Some(args.ensemble_k.unwrap_or(1))
        } else {
            None
        },
        fold_scores: vec![],
    };
    let start = std::time::Instant::now();
    let trained = train_instances(&data, &method, &calib, &spec)?;
    eprintln!(
        "train: {} instances in {:.1}s",
        trained.len(),
        start.elapsed().as_secs_f64()
    );
    let mut buf = Vec::new();
    for t in &trained {
        let row: Vec<String> = t.weights.iter().map(|w| format!("{w}")).collect();
        writeln!(buf, "{}", row.join("\t"))?;
    }
    emit(&args.out, &buf)
}

fn read_weight_rows<R: Read>(r: R) -> qubolearn::Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split('\t')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("bad weight: {t}"),
                })
            })
            .collect::<qubolearn::Result<_>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("no weight rows".into()));
    }
    let dim = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    Ok(rows)
}

fn cmd_evaluate(args: EvaluateArgs) -> qubolearn::Result<()> {
    let train = EncodedDataset::read_tsv(open(&args.train)?)?;
    let test = EncodedDataset::read_tsv(open(&args.test)?)?;
    let rows = read_weight_rows(std::fs::File::open(&args.weights)?)?;
    let scaler = TargetScaler::fit(&train.targets, train.seq_length as f64)?;
    let weights: Vec<TrainedWeights> = rows
        .into_iter()
        .map(|w| TrainedWeights {
            weights: w,
            scaler: scaler.clone(),
        })
        .collect();
    let thresholds = args
        .thresholds
        .unwrap_or_else(|| DEFAULT_THRESHOLDS.to_vec());
    let metrics = evaluate(&train, &test, &weights, &thresholds)?;
    let (mean, _) = metrics.auprc_mean_std();
    let (_, tau_median, _) = metrics.tau_quartiles();
    eprintln!(
        "evaluate: {} instances on {} test rows; auprc[{}] {:.4}, tau median {:.4}",
        metrics.per_instance_tau.len(),
        test.len(),
        thresholds[0],
        mean[0],
        tau_median
    );
    let mut buf = serde_json::to_vec_pretty(&metrics)?;
    buf.push(b'\n');
    emit(&args.out, &buf)
}

fn cmd_run(args: RunArgs) -> qubolearn::Result<()> {
    let config = ExperimentConfig::parse(open(&args.config)?)?;
    let start = std::time::Instant::now();
    let reports = run_experiment(&config, &args.out)?;
    eprintln!(
        "run: {} reports written to {} in {:.1}s",
        reports.len(),
        args.out.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn cmd_sample(args: SampleArgs) -> qubolearn::Result<()> {
    let model = IsingInstance::read_text(open(&args.input)?)?;
    let model = if args.rescale {
        scale_ising(&model)?
    } else {
        model
    };
    let schedule = args.schedule.schedule();
    let start = std::time::Instant::now();
    let pool = match args.sampler {
        SamplerArg::Sa => simulated_anneal(&model, &schedule, args.seed)?,
        SamplerArg::Sqa => simulated_quantum_anneal(&model, &schedule, args.seed)?,
    };
    eprintln!(
        "sample: {} reads, {} distinct states, lowest energy {:.6} in {:.1}s",
        pool.reads,
        pool.records.len(),
        pool.lowest_energy().unwrap_or(f64::NAN),
        start.elapsed().as_secs_f64()
    );
    let mut buf = Vec::new();
    pool.write_tsv(&mut buf)?;
    emit(&args.out, &buf)
}

fn cmd_solve_exact(args: SolveExactArgs) -> qubolearn::Result<()> {
    let model = IsingInstance::read_text(open(&args.input)?)?;
    let pool = brute_force_solve(&model)?;
    eprintln!(
        "solve-exact: {} states, ground energy {:.6}",
        pool.records.len(),
        pool.lowest_energy().unwrap_or(f64::NAN)
    );
    let mut buf = Vec::new();
    pool.write_tsv(&mut buf)?;
    emit(&args.out, &buf)
}

fn cmd_logo(args: LogoArgs) -> qubolearn::Result<()> {
    let rows = read_weight_rows(std::fs::File::open(&args.weights)?)?;
    let dim = rows[0].len();
    if dim % 4 != 0 {
        return Err(Error::DimensionMismatch {
            expected: dim + 4 - dim % 4,
            got: dim,
        });
    }
    let logo = average_weights(&rows, dim / 4)?;
    match &args.out {
        Some(path) => {
            emit_weight_logo(&logo, path)?;
            eprintln!(
                "logo: {} positions from {} instances -> {}",
                logo.positions(),
                logo.instance_count,
                path.display()
            );
        }
        None => {
            // stdout gets the SVG followed by the sidecar table
            let mut out = std::io::stdout();
            out.write_all(render_svg(&logo).as_bytes())?;
            out.write_all(sidecar_tsv(&logo).as_bytes())?;
        }
    }
    Ok(())
}
