/// Console line that tolerates a closed stdout (e.g. piped into `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

mod cmd;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{OutputFormat, RunConfig};

#[derive(Parser)]
#[command(name = "gmprune", version, about = "Robust data pruning by geometric median matching")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Embedding file (.gmpk binary, .csv text).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Output path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
    /// JSON run configuration, or a previous output; its values win over flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// The last CSV column holds integer labels.
    #[arg(long, global = true)]
    csv_labels: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the geometric median of the input rows.
    Gm(cmd::gm::GmArgs),
    /// Select a subset of rows.
    Select(cmd::select::SelectArgs),
    /// Generate the toy mixture or corrupt an existing set.
    Simulate(cmd::simulate::SimulateArgs),
    /// Error-vs-k grids and breakdown tables.
    Sweep(cmd::sweep::SweepArgs),
    /// Evaluate a selection against the clean rows.
    Report(cmd::report::ReportArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Gm(_) => "gm",
            Command::Select(_) => "select",
            Command::Simulate(_) => "simulate",
            Command::Sweep(_) => "sweep",
            Command::Report(_) => "report",
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("GMPRUNE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .with_context(|| format!("GMPRUNE_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("cannot configure the thread pool")
}

fn run(cli: Cli) -> Result<u8> {
    configure_threads()?;
    let g = cli.global;
    let mut cfg = RunConfig {
        command: cli.command.name().to_string(),
        input: g.input,
        out: g.out,
        seed: g.seed,
        format: g.format,
        csv_labels: g.csv_labels,
        ..RunConfig::default()
    };
    match &cli.command {
        Command::Gm(a) => a.fill(&mut cfg),
        Command::Select(a) => a.fill(&mut cfg)?,
        Command::Simulate(a) => a.fill(&mut cfg)?,
        Command::Sweep(a) => a.fill(&mut cfg),
        Command::Report(a) => a.fill(&mut cfg),
    }
    if let Some(path) = &g.config {
        cfg = cfg.apply_override(path)?;
    }
    cfg.gm.validate()?;
    match cli.command {
        Command::Gm(_) => cmd::gm::run(&cfg),
        Command::Select(_) => cmd::select::run(&cfg),
        Command::Simulate(_) => cmd::simulate::run(&cfg),
        Command::Sweep(_) => cmd::sweep::run(&cfg),
        Command::Report(_) => cmd::report::run(&cfg),
    }
}

fn describe(err: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    match err.chain().find_map(|e| e.downcast_ref::<gmprune::Error>()) {
        Some(e) => format!("{msg} [{}]", e.code()),
        None => msg,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::from(1)
        }
    }
}
