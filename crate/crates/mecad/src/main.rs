use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mecad::config::load_config;
use mecad::report::{read_report, write_plot_data, write_scores_csv, ScoreRow};
use mecad::run::{execute_run, RunRequest};
use mecad::state::load_pool;
use mecad::{load_dataset, write_dataset, Error, Result};
use mecad_core::synthetic::{clustered_means, generate_stream, SyntheticConfig};
use mecad_core::{auroc, score_class, EngineConfig, Label, RetentionMode};

const EXIT_VALIDATION: u8 = 65;
const EXIT_RUNTIME: u8 = 70;
const EXIT_IO: u8 = 74;

#[derive(Parser)]
#[command(name = "mecad", version, about = "Continual anomaly detection with a pool of patch-memory experts")]
struct Cli {
    /// Worker threads for scoring and coreset selection (default: all cores).
    #[arg(long, global = true, env = "MECAD_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a dataset file is well formed.
    Validate { file: PathBuf },
    /// Run the sequential protocol and write all artifacts.
    Run(RunArgs),
    /// Score one class of a dataset against a saved expert pool.
    Score(ScoreArgs),
    /// Summarize a finished run and regenerate its plot data.
    Report { run_dir: PathBuf },
    /// Write a synthetic clustered dataset.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Number of experts; overrides the config.
    #[arg(long, conflicts_with = "sweep")]
    experts: Option<usize>,
    /// Inclusive range of expert counts, e.g. `1..8`.
    #[arg(long, value_parser = parse_range)]
    sweep: Option<(usize, usize)>,
    #[arg(long, value_enum)]
    retention: Option<Retention>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Retention {
    #[value(name = "replay_shrink")]
    ReplayShrink,
    Accumulate,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Train,
    Test,
}

#[derive(Args)]
struct ScoreArgs {
    /// Directory holding `manifest.json` and expert files.
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    class: String,
    #[arg(long, value_enum, default_value = "test")]
    split: Split,
    /// Write per-image scores as CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    clusters: usize,
    #[arg(long, default_value_t = 3)]
    per_cluster: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    latent_dim: usize,
    #[arg(long, default_value_t = 0.0)]
    residual_sigma: f64,
    #[arg(long, default_value_t = 5.0)]
    anomaly_offset: f64,
    #[arg(long, default_value_t = 20.0)]
    mean_norm: f64,
    #[arg(long, default_value_t = 0.25)]
    jitter: f64,
    #[arg(long)]
    interleave: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got '{s}'"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("bad range start: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("bad range end: {e}"))?;
    if a == 0 || b < a {
        return Err(format!("range must satisfy 1 <= A <= B, got {a}..{b}"));
    }
    Ok((a, b))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    let result = match cli.command {
        Command::Validate { file } => validate(&file),
        Command::Run(args) => run(args),
        Command::Score(args) => score(args),
        Command::Report { run_dir } => report(&run_dir),
        Command::Synth(args) => synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() || matches!(e, Error::Config(_) | Error::Engine(mecad_core::Error::InvalidConfig(_))) {
        EXIT_VALIDATION
    } else if matches!(e, Error::Io { .. } | Error::Sink(_)) {
        EXIT_IO
    } else {
        EXIT_RUNTIME
    }
}

fn validate(file: &Path) -> Result<()> {
    let stream = load_dataset(file)?;
    let width = stream.classes.iter().map(|c| c.name.len()).max().unwrap_or(0).max(5);
    println!("{:<width$}  {:>6}  {:>11}  {:>14}", "class", "train", "test normal", "test anomalous");
    for c in &stream.classes {
        let anomalous = c.test.iter().filter(|r| r.label.is_anomalous()).count();
        println!("{:<width$}  {:>6}  {:>11}  {:>14}", c.name, c.train.len(), c.test.len() - anomalous, anomalous);
    }
    let train: usize = stream.classes.iter().map(|c| c.train.len()).sum();
    let test: usize = stream.classes.iter().map(|c| c.test.len()).sum();
    println!(
        "ok: {} classes, dim {}, {train} train and {test} test records",
        stream.classes.len(),
        stream.dim
    );
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(p) => load_config(p)?,
        None => EngineConfig::default(),
    };
    if let Some(n) = args.experts {
        config.router.num_experts = n;
    }
    if let Some(r) = args.retention {
        config.memory.retention_mode = match r {
            Retention::ReplayShrink => RetentionMode::ReplayShrink,
            Retention::Accumulate => RetentionMode::Accumulate,
        };
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    config.validate()?;
    let stream = load_dataset(&args.dataset)?;
    let outcome = execute_run(
        RunRequest {
            dataset_path: &args.dataset,
            config_path: args.config.as_deref(),
            config,
            output_dir: &args.out,
            sweep: args.sweep.map(|(a, b)| (a..=b).collect()),
        },
        &stream,
    )?;
    match &outcome.sweep {
        Some(rows) => {
            println!("{:>3}  {:>10}  {:>10}  {:>5}", "N", "auroc", "forgetting", "used");
            for r in rows {
                println!(
                    "{:>3}  {:>10}  {:>10}  {:>5}",
                    r.num_experts,
                    fmt(r.mean_final_auroc),
                    fmt(r.mean_forgetting),
                    r.experts_used
                );
            }
        }
        None => {
            let (_, run) = &outcome.runs[0];
            for a in &run.ledger.assignments {
                println!("{} -> expert {} ({})", a.class_name, a.expert_id, a.reason.as_str());
            }
            println!("mean final auroc: {}", fmt(run.ledger.mean_final_auroc()));
            println!("mean forgetting: {}", fmt(mecad_core::forgetting(&run.ledger).global));
        }
    }
    println!("artifacts written to {}", args.out.display());
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
}

fn score(args: ScoreArgs) -> Result<()> {
    let (pool, _) = load_pool(&args.state)?;
    let stream = load_dataset(&args.dataset)?;
    let expert_id = pool.expert_of(&args.class).ok_or_else(|| {
        let known: Vec<&str> = pool.routing().iter().map(|(c, _)| c.as_str()).collect();
        Error::Config(format!("class '{}' is not assigned to any expert; known classes: {}", args.class, known.join(", ")))
    })?;
    let data = stream.class(&args.class).ok_or_else(|| {
        Error::Config(format!("class '{}' is not in dataset {}", args.class, args.dataset.display()))
    })?;
    let records = match args.split {
        Split::Train => &data.train,
        Split::Test => &data.test,
    };
    let expert = pool.expert(expert_id).expect("routing points at a pool member");
    let scores = score_class(&args.class, records, expert)?;
    let labels: Vec<Label> = records.iter().map(|r| r.label).collect();
    let values: Vec<f64> = scores.iter().map(|s| s.score).collect();
    match auroc(&values, &labels) {
        Ok(a) => println!("{} (expert {expert_id}): auroc {a:.4} over {} images", args.class, records.len()),
        Err(mecad_core::Error::SingleClassLabels) => {
            println!("{} (expert {expert_id}): auroc undefined, single label in {} images", args.class, records.len())
        }
        Err(e) => return Err(e.into()),
    }
    if let Some(out) = &args.out {
        let rows: Vec<ScoreRow> = scores.iter().zip(&labels).map(|(s, l)| ScoreRow::new(s, *l)).collect();
        let f = std::fs::File::create(out).map_err(|e| Error::io(out, e))?;
        write_scores_csv(&rows, f)?;
    }
    Ok(())
}

fn report(dir: &Path) -> Result<()> {
    let report = read_report(&dir.join("report.json"))?;
    println!("engine {} / {} experts / seed {}", report.engine_version, report.config.router.num_experts, report.config.seed);
    for a in &report.assignments {
        println!("{} -> expert {} ({})", a.class_name, a.expert_id, a.reason.as_str());
    }
    for u in &report.utilization {
        println!("expert {}: {} rows, utilization {:.4}, classes [{}]", u.expert_id, u.bank_size, u.utilization, u.classes.join(", "));
    }
    println!("mean final auroc: {}", fmt(report.mean_final_auroc));
    println!("mean forgetting: {}", fmt(report.forgetting.global));
    write_plot_data(&dir.join("plots"), &[(report.config.router.num_experts, &report.ledger)])?;
    println!("plot data written to {}", dir.join("plots").display());
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let cfg = SyntheticConfig {
        dim: args.dim,
        latent_dim: args.latent_dim,
        residual_sigma: args.residual_sigma,
        anomaly_offset: args.anomaly_offset,
        seed: args.seed,
        ..SyntheticConfig::default()
    };
    let specs = clustered_means(args.dim, args.clusters, args.per_cluster, args.mean_norm, args.jitter, args.interleave, args.seed);
    let stream = generate_stream(&cfg, &specs)?;
    let f = std::fs::File::create(&args.out).map_err(|e| Error::io(&args.out, e))?;
    write_dataset(&stream, std::io::BufWriter::new(f))?;
    println!("wrote {} classes to {}", stream.classes.len(), args.out.display());
    Ok(())
}
