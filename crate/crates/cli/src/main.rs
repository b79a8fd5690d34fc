//! Batch experiment runner for the coarsequant workbench.
//!
//! Exit codes: 0 all checks pass, 1 acceptance failure, 2 config error,
//! 3 numerical error.

mod config;
mod error;
mod report;
mod verbs;

use clap::{Args, Parser, Subcommand};
use coarsequant::symbol::catalog;
use coarsequant::verify::{run_criterion, CRITERIA, DEFAULT_SEED, KNOWN_UNATTAINABLE};
use config::{ExperimentConfig, Outputs, Verb};
use error::CliError;
use report::{svg_from_csv, write_file, Cell, Table};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use verbs::Outcome;

#[derive(Parser)]
#[command(name = "coarsequant", version, about = "Coarse PDO experiments: quantize, recover, diagnose, index")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV and SVG artifacts
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads
    #[arg(long, global = true, env = "COARSEQUANT_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the verb named in the config
    Run,
    /// Assemble the coarse operator along the ladder
    Quantize,
    /// Recover the cosymbol from the coarse operator
    Recover,
    /// Tangent-map distortion against the certificate
    Jacobi,
    /// Group averaging bound on a proper action
    Average,
    /// Commutator compactness ladder
    Diagnose,
    /// Coarse against direct quantization
    Compare,
    /// Toeplitz index from the Calderón traces
    Index(IndexArgs),
    /// Acceptance criteria
    Suite {
        #[arg(long)]
        criterion: Option<u8>,
    },
}

#[derive(Args)]
struct IndexArgs {
    /// Catalog symbol name
    #[arg(long, conflicts_with = "winding")]
    symbol: Option<String>,
    /// Shorthand for --symbol winding_<W>
    #[arg(long, allow_hyphen_values = true)]
    winding: Option<i32>,
    /// Finest grid size
    #[arg(long, default_value_t = 512)]
    grid: usize,
    /// Number of grid doublings ending at --grid
    #[arg(long, default_value_t = 1)]
    ladder_levels: u32,
    #[arg(long)]
    emit_csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::ConfigInvalid(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Run => run_config(cli, None),
        Command::Quantize => run_config(cli, Some(Verb::Quantize)),
        Command::Recover => run_config(cli, Some(Verb::Recover)),
        Command::Jacobi => run_config(cli, Some(Verb::Jacobi)),
        Command::Average => run_config(cli, Some(Verb::Average)),
        Command::Diagnose => run_config(cli, Some(Verb::Diagnose)),
        Command::Compare => run_config(cli, Some(Verb::Compare)),
        Command::Index(args) if cli.config.is_some() && args.symbol.is_none() && args.winding.is_none() => {
            run_config(cli, Some(Verb::Index))
        }
        Command::Index(args) => run_index(cli, args),
        Command::Suite { criterion } => run_suite(cli, *criterion),
    }
}

fn run_config(cli: &Cli, verb: Option<Verb>) -> Result<bool, CliError> {
    let path = cli.config.as_deref().ok_or_else(|| CliError::ConfigInvalid("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(v) = verb.filter(|&v| v != cfg.verb) {
        return Err(CliError::ConfigInvalid(format!("config verb is {}, not {}", cfg.verb.name(), v.name())));
    }
    let outcome = match cfg.verb {
        Verb::Quantize => verbs::quantize_verb(&cfg),
        Verb::Index => verbs::index_verb(&cfg),
        Verb::Recover => verbs::recover_verb(&cfg),
        Verb::Jacobi => verbs::jacobi_verb(&cfg),
        Verb::Average => verbs::average_verb(&cfg),
        Verb::Diagnose => verbs::diagnose_verb(&cfg),
        Verb::Compare => verbs::compare_verb(&cfg),
    }?;
    emit(&cfg.name, &cfg.outputs, cli.out.as_deref(), &outcome.table)?;
    Ok(verdict(&format!("{} {}", cfg.name, cfg.verb.name()), &outcome))
}

fn run_index(cli: &Cli, args: &IndexArgs) -> Result<bool, CliError> {
    let name = match (&args.symbol, args.winding) {
        (Some(s), _) => s.clone(),
        (None, Some(w)) => format!("winding_{w}"),
        (None, None) => return Err(CliError::ConfigInvalid("index needs --symbol, --winding or --config".into())),
    };
    let sym = catalog(&name)?;
    if args.ladder_levels == 0 || args.ladder_levels > 16 {
        return Err(CliError::ConfigInvalid("--ladder-levels must lie in 1..=16".into()));
    }
    let grids: Vec<usize> = (0..args.ladder_levels).rev().map(|k| args.grid >> k).collect();
    if grids[0] < 4 {
        return Err(CliError::ConfigInvalid(format!("coarsest grid {} is below 4", grids[0])));
    }
    let outcome = verbs::index_run(&sym, &grids)?;
    let outputs = Outputs { csv: args.emit_csv.clone(), svg: None };
    emit("index", &outputs, cli.out.as_deref(), &outcome.table)?;
    Ok(verdict(&format!("index {name}"), &outcome))
}

fn run_suite(cli: &Cli, only: Option<u8>) -> Result<bool, CliError> {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    if only.is_some_and(|o| !CRITERIA.iter().any(|c| c.0 == o)) {
        return Err(CliError::ConfigInvalid(format!("no criterion {}", only.unwrap_or(0))));
    }
    let mut table = Table::new(&["id", "name", "pass"]);
    let mut ok = true;
    for (id, _) in CRITERIA {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let r = run_criterion(id, seed).expect("listed criterion");
        let known = KNOWN_UNATTAINABLE.contains(&id);
        let note = if !r.pass && known { " (known unattainable)" } else { "" };
        println!("criterion {:>2} {} {}{note} [{:.2}s] {}", r.id, if r.pass { "PASS" } else { "FAIL" }, r.name, r.seconds, r.detail);
        ok &= r.pass || known;
        table.push(vec![(id as usize).into(), Cell::from(r.name), r.pass.into()]);
    }
    if cli.out.is_some() {
        emit("suite", &Outputs::default(), cli.out.as_deref(), &table)?;
    }
    Ok(ok)
}

fn verdict(label: &str, outcome: &Outcome) -> bool {
    println!("{label}: {} ({})", if outcome.pass { "PASS" } else { "FAIL" }, outcome.summary);
    outcome.pass
}

/// CSV goes to the configured path, else `<out>/<name>.csv`, else stdout.
/// SVG is written when a path is configured or `--out` is given.
fn emit(name: &str, outputs: &Outputs, out: Option<&Path>, table: &Table) -> Result<(), CliError> {
    let place = |p: &Path| match out {
        Some(d) if p.is_relative() => d.join(p),
        _ => p.to_path_buf(),
    };
    let csv = table.to_csv();
    match (&outputs.csv, out) {
        (Some(p), _) => write_file(&place(p), &csv)?,
        (None, Some(d)) => write_file(&d.join(format!("{name}.csv")), &csv)?,
        (None, None) => print!("{csv}"),
    }
    let svg_path = match (&outputs.svg, out) {
        (Some(p), _) => Some(place(p)),
        (None, Some(d)) => Some(d.join(format!("{name}.svg"))),
        (None, None) => None,
    };
    if let Some(p) = svg_path {
        write_file(&p, &svg_from_csv(&csv))?;
    }
    Ok(())
}
