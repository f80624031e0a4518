use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use quantid::bench::{generate_dataset, kb_oracle, run_estimator, stream_rng};
use quantid::config::{ExperimentConfig, PAPER_RUNS};
use quantid::dataset_io::{fmt_f64, load_dataset, save_dataset};
use quantid::report::{boxplot_svg, read_csv, summary_text, write_csv};
use quantid::trace::{write_em_trace, ChainRecorder};
use quantid::{run_experiment, ConfigError, EstimatorKind, FitReport};
use quantid_core::metrics::fit_score;
use quantid_core::sampler::{Method, NoTrace, PosteriorGaussian, QuantizedProblem};

/// Impulse-response identification from quantized output data.
#[derive(Debug, Parser)]
#[command(name = "quantid", version)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the datasets of an experiment and write one file per run.
    Simulate(SimulateArgs),
    /// Run one estimator on one dataset file.
    Identify(IdentifyArgs),
    /// Run a full Monte Carlo experiment.
    Bench(BenchArgs),
    /// Summarize a FIT CSV written by `bench`.
    Summarize(SummarizeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Binary,
    Ceil,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Joint,
    Marginal,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Joint => Method::Joint,
            MethodArg::Marginal => Method::Marginal,
        }
    }
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// TOML experiment configuration. Overrides --experiment.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in desk-scale experiment.
    #[arg(long, value_enum, default_value = "binary")]
    experiment: Preset,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Use 100 runs. Expect hours.
    #[arg(long)]
    paper_scale: bool,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => match self.experiment {
                Preset::Binary => ExperimentConfig::binary_desk(),
                Preset::Ceil => ExperimentConfig::ceil_desk(),
            },
        };
        if self.paper_scale {
            cfg.n_runs = PAPER_RUNS;
        }
        if let Some(r) = self.runs {
            cfg.n_runs = r;
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Output directory.
    #[arg(long, default_value = "datasets")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IdentifyArgs {
    /// Dataset file.
    dataset: PathBuf,
    /// Estimator name (KB-GS-1, KB-GS-2, KB-St, KB-Or, ML-GS, MAP-GS).
    /// Defaults to the kernel-based Gibbs estimator selected by --method.
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long, value_enum, default_value = "joint")]
    method: MethodArg,
    /// Impulse-response length.
    #[arg(long, default_value_t = 50)]
    m: usize,
    /// EM and baseline settings from this experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for the estimator's RNG. Defaults to the dataset's seed, which
    /// replays the estimator exactly as `bench` ran it.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the EM trace and the final chain.
    #[arg(long)]
    trace: bool,
    /// Output directory for the estimate and traces.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Write the EM trace of every Gibbs-based estimator run.
    #[arg(long)]
    trace: bool,
    /// Output directory.
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SummarizeArgs {
    /// FIT CSV.
    csv: PathBuf,
    /// Write summary.txt and boxplot.svg here.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn runtime<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{context}: {e}"))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(runtime(&format!("cannot create {}", dir.display())))
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>,
) -> Result<(), Failure> {
    let context = format!("cannot write {}", path.display());
    let file = fs::File::create(path).map_err(runtime(&context))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(runtime(&context))
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let cfg = args.exp.resolve()?;
    create_dir(&args.out)?;
    write_file(&args.out.join("config.toml"), |w| {
        w.write_all(cfg.to_toml_string().as_bytes())
    })?;
    for run in 0..cfg.n_runs {
        let (d, discards) = generate_dataset(&cfg, run).map_err(runtime("simulation failed"))?;
        let path = args.out.join(format!("run_{run:04}.dataset"));
        save_dataset(&path, &d).map_err(runtime(&format!("cannot write {}", path.display())))?;
        log::info!("wrote {} ({discards} discarded)", path.display());
    }
    println!("wrote {} datasets to {}", cfg.n_runs, args.out.display());
    Ok(())
}

fn identify(args: &IdentifyArgs) -> Result<(), Failure> {
    let kind = match &args.estimator {
        Some(name) => name.parse::<EstimatorKind>().map_err(Failure::Config)?,
        None => EstimatorKind::from_method(args.method.into()),
    };
    let cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::binary_desk(),
    };
    let dataset = load_dataset(&args.dataset)?;
    if args.m == 0 || args.m > dataset.n() {
        return Err(Failure::Config(format!(
            "--m must be between 1 and the data length {}",
            dataset.n()
        )));
    }
    if matches!(kind, EstimatorKind::KbOracle | EstimatorKind::MapGs) && dataset.z_latent.is_none()
    {
        return Err(Failure::Config(format!(
            "{kind} needs z_latent, which the dataset lacks"
        )));
    }
    let problem =
        QuantizedProblem::from_dataset(&dataset, args.m).map_err(runtime("bad dataset"))?;
    let em = cfg.em.to_em_config();
    let oracle_eta = if kind == EstimatorKind::MapGs {
        let r = kb_oracle(&problem, &dataset, &em).map_err(Failure::Runtime)?;
        r.eta_hat
    } else {
        None
    };
    let seed = args.seed.unwrap_or(dataset.seed);
    let mut rng = stream_rng(seed, dataset.stream + kind.stream_offset());
    let mut recorder = ChainRecorder::default();
    let run = if args.trace {
        run_estimator(
            kind,
            &dataset,
            &problem,
            &cfg,
            oracle_eta.as_ref(),
            &mut rng,
            &mut recorder,
        )
    } else {
        run_estimator(
            kind,
            &dataset,
            &problem,
            &cfg,
            oracle_eta.as_ref(),
            &mut rng,
            &mut NoTrace,
        )
    }
    .map_err(|e| Failure::Runtime(format!("{kind} failed: {e}")))?;
    let result = &run.result;

    let mut out = String::new();
    out.push_str(&format!("estimator = {kind}\n"));
    if let Some(eta) = result.eta_hat {
        out.push_str(&format!(
            "lambda = {}\nbeta = {}\nsigma2 = {}\n",
            fmt_f64(eta.lambda),
            fmt_f64(eta.beta),
            fmt_f64(eta.sigma2)
        ));
    }
    out.push_str(&format!(
        "iterations = {}\nconverged = {}\n",
        result.iterations, result.converged
    ));
    let fit = dataset.g_true.as_ref().map(|g| fit_score(g, &result.g_hat));
    match &fit {
        Some(Ok(f)) => out.push_str(&format!("fit = {}\n", fmt_f64(*f))),
        Some(Err(e)) => log::warn!("no FIT: {e}"),
        None => {}
    }
    let taps: Vec<String> = result.g_hat.iter().map(|v| fmt_f64(*v)).collect();
    out.push_str(&format!("g_hat = {}\n", taps.join(" ")));
    print!("{out}");

    if let Some(dir) = &args.out {
        create_dir(dir)?;
        write_file(&dir.join("estimate.txt"), |w| w.write_all(out.as_bytes()))?;
    }
    if args.trace {
        let dir = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
        create_dir(&dir)?;
        match (&run.trace, kind.gibbs_method()) {
            (Some(trace), Some(method)) => {
                write_file(&dir.join("em_trace.txt"), |w| write_em_trace(w, trace))?;
                if method == Method::Marginal {
                    let eta = result.eta_hat.expect("EM estimate");
                    let post = PosteriorGaussian::for_problem(&problem, &eta)
                        .map_err(runtime("posterior at the final estimate"))?;
                    recorder.fill_conditional_means(post.gain());
                }
                write_file(&dir.join("chain_trace.txt"), |w| recorder.write(w, true))?;
            }
            _ => log::warn!("{kind} has no EM trace; --trace ignored"),
        }
    }
    Ok(())
}

fn write_report(dir: &Path, report: &FitReport, title: &str) -> Result<String, Failure> {
    let summary = summary_text(report);
    write_file(&dir.join("fits.csv"), |w| {
        write_csv(w, report).map_err(io::Error::other)
    })?;
    write_file(&dir.join("summary.txt"), |w| {
        w.write_all(summary.as_bytes())
    })?;
    write_file(&dir.join("boxplot.svg"), |w| {
        w.write_all(boxplot_svg(report, title).as_bytes())
    })?;
    Ok(summary)
}

fn bench(args: &BenchArgs) -> Result<(), Failure> {
    let cfg = args.exp.resolve()?;
    create_dir(&args.out)?;
    write_file(&args.out.join("config.toml"), |w| {
        w.write_all(cfg.to_toml_string().as_bytes())
    })?;
    let report = run_experiment(&cfg, args.trace).map_err(runtime("experiment failed"))?;
    let summary = write_report(&args.out, &report, &cfg.name)?;
    if !report.failures.is_empty() {
        write_file(&args.out.join("failures.txt"), |w| {
            for (run, est, msg) in &report.failures {
                writeln!(w, "{run} {est} {msg}")?;
            }
            Ok(())
        })?;
    }
    if args.trace {
        let dir = args.out.join("traces");
        create_dir(&dir)?;
        for (run, kind, trace) in &report.traces {
            let path = dir.join(format!("run_{run:04}_{kind}.txt"));
            write_file(&path, |w| write_em_trace(w, trace))?;
        }
    }
    print!("{summary}");
    Ok(())
}

fn summarize(args: &SummarizeArgs) -> Result<(), Failure> {
    let file = fs::File::open(&args.csv)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", args.csv.display())))?;
    let report = read_csv(io::BufReader::new(file))
        .map_err(|e| Failure::Config(format!("{}: {e}", args.csv.display())))?;
    if report.rows.is_empty() {
        return Err(Failure::Config(format!(
            "{} has no rows",
            args.csv.display()
        )));
    }
    let summary = match &args.out {
        Some(dir) => {
            create_dir(dir)?;
            let title = args
                .csv
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("FIT");
            write_report(dir, &report, title)?
        }
        None => summary_text(&report),
    };
    print!("{summary}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Identify(a) => identify(a),
        Command::Bench(a) => bench(a),
        Command::Summarize(a) => summarize(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
