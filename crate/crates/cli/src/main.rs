use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use condensa_core::cover::{covering_number_exact, covering_number_greedy, COVER_CSV_HEADER};
use condensa_core::io::{read_matrix, read_partition, write_matrix};
use condensa_core::metric::{diameter, Metric};
use condensa_core::quotient::build_quotient;
use condensa_core::{run_experiment, Error, ExperimentConfig, ExperimentKind};

/// Metric condensation experiments and tools.
#[derive(Parser)]
#[command(name = "condensa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Covering numbers of sampled segments against length.
    Capacity(RunArgs),
    /// Separator and fiber quotient on interleaved spirals.
    Collapse(RunArgs),
    /// Block-parity interference audit and forgetting comparison.
    Parity(RunArgs),
    /// Slow versus fast inference cost across stream lengths.
    Scaling(RunArgs),
    /// Condensation depth against stream length, with a noise control.
    Depth(RunArgs),
    /// Check that a matrix file is a valid finite metric.
    Validate { file: PathBuf },
    /// Covering number of a matrix file at radius epsilon.
    Cover {
        file: PathBuf,
        #[arg(long)]
        epsilon: f64,
        /// Solve exactly instead of greedily.
        #[arg(long)]
        exact: bool,
    },
    /// Quotient a matrix file by a partition file and print the result.
    Quotient {
        file: PathBuf,
        #[arg(long)]
        partition: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` config file; omitted keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory. Falls back to the config's `output_dir`, then
    /// $CONDENSA_OUT/<experiment>, then out/<experiment>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long)]
    svg: bool,
}

/// 0 ok, 1 failed assertion, 2 bad config or input, 3 i/o failure.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Io(_)) => 3,
        Some(Error::ExperimentFailed(_)) => 1,
        Some(_) => 2,
        None if e.downcast_ref::<std::io::Error>().is_some() => 3,
        None => 2,
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path)
        .map_err(Error::from)
        .with_context(|| format!("reading {}", path.display()))
}

fn run(kind: ExperimentKind, args: RunArgs) -> anyhow::Result<()> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::parse(kind, &read(p)?)?,
        None => ExperimentConfig::new(kind),
    };
    if let Some(seed) = args.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if args.svg {
        cfg.set("emit_svg", "true")?;
    }
    let out = args
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| {
            std::env::var_os("CONDENSA_OUT")
                .map_or_else(|| PathBuf::from("out"), PathBuf::from)
                .join(kind.name())
        });
    let outcome = run_experiment(&cfg, &out)?;
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    println!("wrote {}", outcome.manifest.display());
    if outcome.passed() {
        println!("{kind}: PASS");
        Ok(())
    } else {
        for f in &outcome.failures {
            eprintln!("FAIL: {f}");
        }
        Err(Error::ExperimentFailed(format!(
            "{kind}: {} condition(s) failed",
            outcome.failures.len()
        ))
        .into())
    }
}

fn main_inner(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Capacity(a) => run(ExperimentKind::Capacity, a),
        Command::Collapse(a) => run(ExperimentKind::Collapse, a),
        Command::Parity(a) => run(ExperimentKind::Parity, a),
        Command::Scaling(a) => run(ExperimentKind::Scaling, a),
        Command::Depth(a) => run(ExperimentKind::Depth, a),
        Command::Validate { file } => {
            let space = read_matrix(&read(&file)?)?;
            println!(
                "valid: {} points, diameter {}",
                space.len(),
                diameter(&space).unwrap_or(0.0)
            );
            Ok(())
        }
        Command::Cover {
            file,
            epsilon,
            exact,
        } => {
            let space = read_matrix(&read(&file)?)?;
            let cover = if exact {
                covering_number_exact(&space, epsilon)?
            } else {
                covering_number_greedy(&space, epsilon)?
            };
            println!("{COVER_CSV_HEADER}");
            println!("{}", cover.csv_row(Some(space.ids())));
            Ok(())
        }
        Command::Quotient { file, partition } => {
            let space = read_matrix(&read(&file)?)?;
            let part = read_partition(&space, &read(&partition)?)?;
            let q = build_quotient(&space, &part)?;
            print!("{}", write_matrix(&q.space));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
