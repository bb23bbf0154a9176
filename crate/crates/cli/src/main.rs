//! `psforge`: PuzzleScript toolchain, playtester and generation driver.

mod config;
mod generate;
mod play;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use psforge_core::compiler::CompiledLevel;
use psforge_core::diagnostic::{error_count, render};
use psforge_core::engine::actions_to_letters;
use psforge_core::metrics::aggregate;
use psforge_core::orchestrator::{find_trial_dirs, load_trial_record, GroupKey};
use psforge_core::solver::LevelReport;
use psforge_core::{
    bfs_solve, compile, parse_game, repair_source, CompiledGame, Diagnostic, SolverConfig,
    SourceText,
};

use config::ConfigFile;

/// Exit status for domain failures: does not compile, unsolved, no
/// successful trial.
const FAILED: u8 = 1;
/// Exit status for usage and I/O errors.
const USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "psforge", version, about = "PuzzleScript toolchain, BFS playtester and LLM generation loop")]
struct Cli {
    /// `key = value` file mirroring the long flags; flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// More log output (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Seed for the few-shot sampler and the engine's random rules
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check syntax and optionally repair a game
    Parse(ParseArgs),
    /// Parse and compile a game, printing every diagnostic
    Compile(CompileArgs),
    /// Search levels breadth-first for shortest solutions
    Solve(SolveArgs),
    /// Play a game in the terminal or replay recorded inputs
    Play(play::PlayArgs),
    /// Run generation trials against a language model backend
    Generate(generate::GenerateArgs),
    /// Aggregate saved trials into a results table
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct ParseArgs {
    file: PathBuf,
    /// Print the repaired source to stdout
    #[arg(long)]
    repair: bool,
    /// Diagnostics as JSON
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct CompileArgs {
    file: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct SolveArgs {
    file: PathBuf,
    /// A level index or `all`
    #[arg(long, default_value = "all")]
    level: String,
    /// Unique states to expand per level
    #[arg(long, default_value_t = psforge_core::solver::DEFAULT_NODE_BUDGET)]
    budget: u64,
    /// Wall-clock limit per level in seconds
    #[arg(long, value_name = "SECS")]
    time_limit: Option<f64>,
    /// Results as JSON
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Trial directories, or folders containing them
    #[arg(long, num_args = 1.., required = true, action = clap::ArgAction::Append)]
    trials: Vec<PathBuf>,
    /// Comma-separated: fewshot, cot, context_budget, brainstorm, model
    #[arg(long, default_value = "")]
    group_by: String,
    /// CSV instead of an aligned table
    #[arg(long)]
    csv: bool,
}

fn read_source(path: &Path) -> anyhow::Result<SourceText> {
    SourceText::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn print_diagnostics(diagnostics: &[Diagnostic], json: bool) -> anyhow::Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(diagnostics)?);
    } else {
        print!("{}", render(diagnostics));
    }
    Ok(())
}

fn cmd_parse(args: &ParseArgs) -> anyhow::Result<u8> {
    let source = read_source(&args.file)?;
    let parsed = parse_game(&source);
    if !args.repair {
        print_diagnostics(&parsed.diagnostics, args.json)?;
        return Ok(if parsed.syntax_errors() == 0 { 0 } else { FAILED });
    }
    let outcome = repair_source(&source, &parsed.diagnostics);
    let after = parse_game(&outcome.repaired);
    for note in &outcome.repairs {
        eprintln!("repair: {note}");
    }
    if args.json {
        eprintln!("{}", serde_json::to_string_pretty(&after.diagnostics)?);
    } else {
        eprint!("{}", render(&after.diagnostics));
    }
    print!("{}", outcome.repaired.content());
    Ok(if after.syntax_errors() == 0 { 0 } else { FAILED })
}

/// Parse and compile diagnostics together, plus the game when it compiled.
fn build(source: &SourceText) -> (Vec<Diagnostic>, Option<CompiledGame>) {
    let parsed = parse_game(source);
    let mut diagnostics = parsed.diagnostics;
    let Some(spec) = parsed.spec else {
        return (diagnostics, None);
    };
    let compiled = compile(&spec);
    diagnostics.extend(compiled.diagnostics);
    (diagnostics, compiled.game)
}

fn cmd_compile(args: &CompileArgs) -> anyhow::Result<u8> {
    let (diagnostics, game) = build(&read_source(&args.file)?);
    print_diagnostics(&diagnostics, args.json)?;
    Ok(if game.is_some() { 0 } else { FAILED })
}

/// Loads and compiles a game, reporting failures on stderr.
fn load_game(path: &Path) -> anyhow::Result<CompiledGame> {
    let (diagnostics, game) = build(&read_source(path)?);
    match game {
        Some(game) => Ok(game),
        None => {
            eprint!("{}", render(&diagnostics));
            bail!("{} does not compile ({} errors)", path.display(), error_count(&diagnostics))
        }
    }
}

fn level_indices(game: &CompiledGame, selector: &str) -> anyhow::Result<Vec<usize>> {
    if selector.eq_ignore_ascii_case("all") {
        return Ok(game
            .levels
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, CompiledLevel::Grid(_)))
            .map(|(i, _)| i)
            .collect());
    }
    let index: usize = selector
        .parse()
        .with_context(|| format!("--level expects a number or `all`, got `{selector}`"))?;
    match game.levels.get(index) {
        None => bail!("level {index} does not exist ({} levels)", game.levels.len()),
        Some(CompiledLevel::Message(_)) => bail!("level {index} is a message, not a playable level"),
        Some(CompiledLevel::Grid(_)) => Ok(vec![index]),
    }
}

fn cmd_solve(args: &SolveArgs) -> anyhow::Result<u8> {
    let game = load_game(&args.file)?;
    let levels = level_indices(&game, &args.level)?;
    let mut config = SolverConfig::with_budget(args.budget);
    if let Some(secs) = args.time_limit {
        config.per_level_time_budget =
            Some(Duration::try_from_secs_f64(secs).context("--time-limit must be a non-negative number")?);
    }
    let reports: Vec<LevelReport> = levels
        .iter()
        .map(|&level_index| LevelReport::Grid {
            level_index,
            result: bfs_solve(&game, level_index, &config),
        })
        .collect();
    let all_solved = reports.iter().all(|r| r.result().is_some_and(|r| r.is_solved()));

    if args.json {
        println!("{}", serde_json::to_string_pretty(&reports)?);
    } else {
        for report in &reports {
            let r = report.result().expect("grid levels only");
            print!(
                "level {}: {}, length {}, nodes {}",
                report.level_index(),
                r.status,
                r.solution_length,
                r.nodes_explored
            );
            match &r.detail {
                Some(detail) => println!(" ({detail})"),
                None => println!(),
            }
            if r.is_solved() {
                println!("  solution: {}", actions_to_letters(&r.solution));
            }
        }
    }
    Ok(if all_solved { 0 } else { FAILED })
}

fn cmd_report(args: &ReportArgs) -> anyhow::Result<u8> {
    let keys = GroupKey::parse_list(&args.group_by).map_err(anyhow::Error::msg)?;
    let mut records = Vec::new();
    for path in &args.trials {
        let dirs = find_trial_dirs(path).with_context(|| format!("cannot read {}", path.display()))?;
        for dir in dirs {
            match load_trial_record(&dir) {
                Ok(record) => records.push(record),
                Err(e) => log::warn!("skipping {}: {e}", dir.display()),
            }
        }
    }
    if records.is_empty() {
        bail!("no trial records found");
    }
    let table = aggregate(&records, &keys);
    if args.csv {
        print!("{}", table.to_csv());
    } else {
        print!("{}", table.to_text());
    }
    Ok(0)
}

struct Parsed {
    cli: Cli,
    file: ConfigFile,
    unused_keys: Vec<String>,
}

/// Parses `argv`, folding in the config file when one is named.
fn parse_cli(argv: Vec<OsString>) -> Result<Parsed, clap::Error> {
    let first = Cli::try_parse_from(&argv)?;
    let Some(path) = &first.config else {
        return Ok(Parsed {
            cli: first,
            file: ConfigFile::default(),
            unused_keys: Vec::new(),
        });
    };
    let file = match ConfigFile::load(path) {
        Ok(file) => file,
        Err(e) => {
            return Err(Cli::command().error(clap::error::ErrorKind::Io, format!("{e:#}")));
        }
    };
    let command = Cli::command();
    let sub = first_subcommand_name(&first.command);
    let (argv, unused_keys) = file.inject(&argv, &command, sub);
    let matches = command.try_get_matches_from(argv)?;
    Ok(Parsed {
        cli: Cli::from_arg_matches(&matches)?,
        file,
        unused_keys,
    })
}

fn first_subcommand_name(command: &Command) -> &'static str {
    match command {
        Command::Parse(_) => "parse",
        Command::Compile(_) => "compile",
        Command::Solve(_) => "solve",
        Command::Play(_) => "play",
        Command::Generate(_) => "generate",
        Command::Report(_) => "report",
    }
}

fn main() -> ExitCode {
    let Parsed { cli, file, unused_keys } = match parse_cli(std::env::args_os().collect()) {
        Ok(parsed) => parsed,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    for key in unused_keys {
        log::info!("config key `{key}` does not apply to this command");
    }

    let result = match &cli.command {
        Command::Parse(args) => cmd_parse(args),
        Command::Compile(args) => cmd_compile(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Play(args) => play::cmd_play(args, cli.seed.unwrap_or(0)),
        Command::Generate(args) => generate::cmd_generate(args, cli.seed.unwrap_or(0), &file),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(USAGE)
        }
    }
}
