use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use resmoves::artifacts;
use resmoves::ingest::{self, ObjectId};
use resmoves::linalg::Matrix;
use resmoves::pipeline::{self, PipelineOutput, Stage};
use resmoves::plot::{self, PlotStyle};
use resmoves::synthetic::{self, SyntheticConfig};
use resmoves::{Error, ErrorKind, PipelineConfig};

/// Segment game traces into moves with reservoir states and replay them
/// under conceptors.
#[derive(Parser, Debug)]
#[command(name = "resmoves", version, about)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// `key = value` configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Clustering seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (or file, for `plot` and `synth`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Input trace CSV.
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Extra configuration overrides, `key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a trace; writes the canonical trace.csv.
    Ingest,
    /// Drive the reservoir; writes reservoir.json and states.json.
    Drive,
    /// Cluster post-washout states with X-means; writes labels.csv and model.json.
    Cluster,
    /// Cut the labels into moves; adds moves.jsonl.
    Moves,
    /// Per-cluster and whole-game conceptors; adds conceptors.json.
    Conceptors,
    /// Whole-game replay; adds replay.csv.
    Replay,
    /// All stages plus report and plots.
    Pipeline,
    /// Plot trajectories from a 47-column trace or replay CSV as SVG.
    Plot(PlotArgs),
    /// Write the deterministic synthetic trace as CSV.
    Synth(SynthArgs),
    /// Print the effective configuration.
    Config,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Objects: comma list of `ball`, `l1`..`l11`, `r1`..`r11`, or `all`, `goalies`, `left`, `right`.
    #[arg(long, default_value = "goalies")]
    objects: String,
    /// First cycle to draw (inclusive).
    #[arg(long)]
    from: Option<i64>,
    /// Last cycle to draw (inclusive).
    #[arg(long)]
    to: Option<i64>,
    #[arg(long)]
    title: Option<String>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    steps: usize,
}

fn config_from(common: &Common) -> Result<PipelineConfig, Error> {
    let mut config = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    for kv in &common.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        config.set(k, v)?;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    if let Some(input) = &common.input {
        config.input = input.clone();
    }
    Ok(config)
}

fn summarize(stage: Stage, out: &PipelineOutput) {
    let a = &out.analysis;
    println!("world states      {}", a.input.raw.len());
    if let Some(t) = &a.trained {
        println!("labeled states    {}", t.run.series.len());
        println!(
            "readout NRMSE     {:.6} (baseline {:.6})",
            t.readout.nrmse, t.baseline_nrmse
        );
    }
    if let Some(m) = &a.model {
        println!(
            "clusters          {} (reference match: {})",
            m.k,
            pipeline::REFERENCE_K
        );
    }
    if let Some(m) = &a.moves {
        println!("moves             {}", m.len());
    }
    if let Some(c) = &a.cluster_conceptors {
        println!(
            "conceptors        {} ({} clusters skipped)",
            c.conceptors.len(),
            c.skipped.len()
        );
    }
    if stage == Stage::Replay {
        if let Some(r) = &a.replay {
            let s = pipeline::summarize_replay(r);
            println!(
                "replay            {} steps, ball x sign changes {}",
                s.steps, s.ball_x_sign_changes
            );
        }
    }
    println!("output            {}", out.out_dir.display());
    println!("manifest sha256   {}", out.manifest.combined_sha256);
}

fn plot_command(common: &Common, args: &PlotArgs) -> Result<(), Error> {
    let config = config_from(common)?;
    let trace = ingest::read_csv(&config.input)?;
    let from = args.from.unwrap_or(i64::MIN);
    let to = args.to.unwrap_or(i64::MAX);
    let rows: Vec<usize> = trace
        .cycles()
        .iter()
        .enumerate()
        .filter(|(_, c)| (from..=to).contains(*c))
        .map(|(i, _)| i)
        .collect();
    if rows.is_empty() {
        return Err(Error::Validation(format!(
            "no cycles of {} fall in {from}..={to}",
            config.input.display()
        )));
    }
    let positions: Matrix = trace.to_matrix().select_rows(&rows);
    let selection: Vec<ObjectId> = plot::parse_selection(&args.objects)?;
    let style = PlotStyle {
        title: args.title.clone(),
        field: config.field,
        ..PlotStyle::default()
    };
    let svg = plot::plot_trajectories(&positions, &selection, &style)?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("plot.svg"));
    artifacts::write_file(&out, svg.as_bytes())?;
    println!("{}", out.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    let stage = match &cli.command {
        Command::Plot(args) => return plot_command(&cli.common, args),
        Command::Synth(args) => {
            let trace = synthetic::generate(&SyntheticConfig::with_steps(args.steps));
            let out = cli
                .common
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("synthetic_{}.csv", args.steps)));
            artifacts::write_file(&out, ingest::write_csv(&trace).as_bytes())?;
            println!("{}", out.display());
            return Ok(());
        }
        Command::Config => {
            print!("{}", config_from(&cli.common)?.to_text());
            return Ok(());
        }
        Command::Ingest => Stage::Ingest,
        Command::Drive => Stage::Drive,
        Command::Cluster => Stage::Cluster,
        Command::Moves => Stage::Moves,
        Command::Conceptors => Stage::Conceptors,
        Command::Replay => Stage::Replay,
        Command::Pipeline => Stage::Full,
    };
    let config = config_from(&cli.common)?;
    let out = pipeline::run_stage(&config, stage)?;
    if stage == Stage::Full {
        if let Some(report) = out.analysis.report() {
            print!("{}", report.to_text());
        }
        println!();
        println!("output            {}", out.out_dir.display());
        println!("manifest sha256   {}", out.manifest.combined_sha256);
    } else {
        summarize(stage, &out);
    }
    Ok(())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Input => 2,
        ErrorKind::Validation => 3,
        ErrorKind::Numerical => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.common.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
