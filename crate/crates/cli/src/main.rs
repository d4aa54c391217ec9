use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lawshield::harness::{
    self, cmd_graph, cmd_induce, cmd_run, cmd_verify, load_law_file, load_logs, load_vocabulary, ExperimentConfig,
    HarnessError,
};
use lawshield::LawSet;

#[derive(Parser)]
#[command(
    name = "lawshield",
    version,
    about = "Shielded agent experiments over temporal-logic laws"
)]
struct Cli {
    /// Proposition vocabulary file; the bundled one is used by default.
    #[arg(long, global = true)]
    vocab: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run episodes and critic rounds from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// First seed; episodes use consecutive seeds from here.
        #[arg(long)]
        seed: Option<u64>,
        /// Force the deterministic environment.
        #[arg(long)]
        deterministic: bool,
        /// Override the config's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check every law against every trajectory in a log.
    Verify {
        #[arg(long)]
        laws: String,
        #[arg(long)]
        log: PathBuf,
    },
    /// Run one offline critic round over logged trajectories.
    Induce {
        #[arg(long)]
        laws: String,
        /// Glob of trajectory logs.
        #[arg(long)]
        logs: String,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the round report; printed to stdout otherwise.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build the task graph from logs, prune it by a law set, export DOT.
    Graph {
        #[arg(long)]
        logs: String,
        #[arg(long)]
        laws: Option<String>,
        #[arg(long)]
        dot: PathBuf,
    },
}

/// Exit status for violations or failed runs.
const FAILURE: u8 = 1;
/// Exit status for bad arguments or unreadable inputs.
const USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &HarnessError) -> u8 {
    match e {
        HarnessError::Io { .. }
        | HarnessError::Config(_)
        | HarnessError::Log { .. }
        | HarnessError::Laws { .. }
        | HarnessError::Vocab(_)
        | HarnessError::Shield(_) => USAGE,
        _ => FAILURE,
    }
}

fn expand(pattern: &str) -> Result<Vec<PathBuf>, HarnessError> {
    let paths = glob::glob(pattern)
        .map_err(|e| HarnessError::Config(format!("bad glob `{pattern}`: {e}")))?
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    if paths.is_empty() {
        return Err(HarnessError::Config(format!("no files match `{pattern}`")));
    }
    Ok(paths)
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn execute(cli: Cli) -> Result<u8, HarnessError> {
    let vocab = load_vocabulary(cli.vocab.as_deref())?;
    match cli.command {
        Command::Run {
            config,
            seed,
            deterministic,
            output,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.override_seed(seed);
            }
            if deterministic {
                cfg.env.deterministic = true;
            }
            if let Some(dir) = output {
                cfg.output_dir = dir;
            }
            if cfg.vocabulary.is_none() {
                cfg.vocabulary = cli.vocab;
            }
            let out = cmd_run(&cfg)?;
            print!("{}", out.report.render());
            println!("output: {}", cfg.output_dir.display());
            Ok(0)
        }
        Command::Verify { laws, log } => {
            let laws = load_law_file(&laws, &vocab)?;
            let trajectories = load_logs(&[log])?;
            let report = cmd_verify(&laws, &trajectories, &vocab)?;
            print!("{}", report.render());
            Ok(if report.all_satisfied() { 0 } else { FAILURE })
        }
        Command::Induce {
            laws,
            logs,
            out,
            report,
        } => {
            let set = LawSet::from_laws(load_law_file(&laws, &vocab)?)?;
            let trajectories = load_logs(&expand(&logs)?)?;
            let (text, round) = cmd_induce(&set, &trajectories, &vocab, None)?;
            write_file(&out, &text)?;
            match report {
                Some(path) => write_file(&path, &round.render())?,
                None => print!("{}", round.render()),
            }
            Ok(0)
        }
        Command::Graph { logs, laws, dot } => {
            let set = match laws {
                Some(spec) => LawSet::from_laws(load_law_file(&spec, &vocab)?)?,
                None => LawSet::new(),
            };
            let trajectories = harness::load_logs(&expand(&logs)?)?;
            let out = cmd_graph(&trajectories, &set, &vocab)?;
            write_file(&dot, &out.dot)?;
            print!("{}", out.table);
            if !out.diff.is_empty() {
                println!("pruned {} choice edge(s):", out.diff.len());
                for line in &out.diff {
                    println!("{line}");
                }
            }
            Ok(0)
        }
    }
}
