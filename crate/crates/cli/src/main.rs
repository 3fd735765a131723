use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coxhecke_cli::commands::{self, CommandError, Report};
use coxhecke_cli::config::RunConfig;

#[derive(Parser)]
#[command(name = "coxhecke", version, about = "Verification suite for right-angled polygon groups, Hecke algebras and boundary representations")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

/// Each flag overrides the key of the same name in the config file.
#[derive(Args)]
struct Global {
    /// `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    k: Option<String>,
    /// One rational, or a comma-separated list with one entry per generator.
    #[arg(long, global = true)]
    q: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    eps: Option<String>,
    #[arg(long, global = true)]
    n: Option<String>,
    #[arg(long, global = true)]
    lmax: Option<String>,
    #[arg(long, global = true)]
    samples: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Comma-separated layer radii.
    #[arg(long, global = true)]
    t: Option<String>,
    /// JSON file with named arc triples.
    #[arg(long, global = true)]
    arcs: Option<String>,
    #[arg(long, global = true)]
    radius: Option<String>,
    #[arg(long, global = true)]
    w: Option<String>,
    /// `worst` or `all`.
    #[arg(long, global = true)]
    rows: Option<String>,
    /// Directory for the JSON and CSV outputs.
    #[arg(long, global = true)]
    out: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// The Coxeter group of the k-gon.
    #[command(subcommand)]
    Group(GroupCommand),
    /// The wall poset P(1|w).
    #[command(subcommand)]
    Walls(WallsCommand),
    /// Hecke algebra arithmetic.
    #[command(subcommand)]
    Hecke(HeckeCommand),
    /// Boundary representation checks for one element.
    #[command(subcommand)]
    Rep(RepCommand),
    /// The geometric estimate sweep.
    #[command(subcommand)]
    Estimates(EstimatesCommand),
    /// The spherical averaging experiment.
    #[command(subcommand)]
    Averaging(AveragingCommand),
    /// Every check at config scale.
    #[command(subcommand)]
    Suite(SuiteCommand),
}

#[derive(Subcommand)]
enum GroupCommand {
    Info,
    Ball,
}

#[derive(Subcommand)]
enum WallsCommand {
    Dump,
}

#[derive(Subcommand)]
enum HeckeCommand {
    /// Multiplies two elements given as JSON maps word -> coefficient.
    Mul {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
}

#[derive(Subcommand)]
enum RepCommand {
    Check,
}

#[derive(Subcommand)]
enum EstimatesCommand {
    Sweep,
}

#[derive(Subcommand)]
enum AveragingCommand {
    Run,
}

#[derive(Subcommand)]
enum SuiteCommand {
    All,
}

fn load_config(global: &Global) -> Result<RunConfig, CommandError> {
    let mut cfg = match &global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CommandError::Input(format!("config file {}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    let overrides = [
        ("k", &global.k),
        ("q", &global.q),
        ("eps", &global.eps),
        ("n", &global.n),
        ("lmax", &global.lmax),
        ("samples", &global.samples),
        ("seed", &global.seed),
        ("t", &global.t),
        ("arcs", &global.arcs),
        ("radius", &global.radius),
        ("w", &global.w),
        ("rows", &global.rows),
        ("out", &global.out),
    ];
    for (key, value) in overrides {
        if let Some(value) = value {
            cfg.set(key, value)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_outputs(report: &Report, out: Option<&PathBuf>) -> std::io::Result<()> {
    print!("{}", report.json_text());
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let stem = report.command.replace(' ', "_");
        std::fs::write(dir.join(format!("{stem}.json")), report.json_text())?;
        if let Some(csv) = &report.csv {
            std::fs::write(dir.join(format!("{stem}.csv")), csv)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Report, CommandError> {
    let cfg = load_config(&cli.global)?;
    match cli.command {
        Command::Group(GroupCommand::Info) => commands::group_info(&cfg),
        Command::Group(GroupCommand::Ball) => commands::group_ball(&cfg),
        Command::Walls(WallsCommand::Dump) => commands::walls_dump(&cfg),
        Command::Hecke(HeckeCommand::Mul { a, b }) => commands::hecke_mul(&cfg, &a, &b),
        Command::Rep(RepCommand::Check) => commands::rep_check(&cfg),
        Command::Estimates(EstimatesCommand::Sweep) => commands::estimates_sweep(&cfg),
        Command::Averaging(AveragingCommand::Run) => commands::averaging_run(&cfg),
        Command::Suite(SuiteCommand::All) => commands::suite_all(&cfg),
    }
    .map(|report| {
        let out = cfg.out.clone();
        (report, out)
    })
    .and_then(|(report, out)| {
        write_outputs(&report, out.as_ref()).map_err(|e| CommandError::Input(format!("writing outputs: {e}")))?;
        Ok(report)
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            eprintln!("{}", report.summary);
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
