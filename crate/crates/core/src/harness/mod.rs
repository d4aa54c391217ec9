//! Experiment plumbing: configuration, trajectory logs, metrics and the
//! `run`/`verify`/`induce`/`graph` commands behind the CLI.

pub mod config;
pub mod log;
pub mod metrics;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use thiserror::Error;

use crate::actor::{
    builtin_policy, run_episode, ActorError, EpisodeConfig, ExternalPolicy, HttpTransport, Policy, PolicyError,
    StdioTransport, Trajectory, Transport,
};
use crate::critic::{run_round, CriticError, CriticRound};
use crate::env::{Env, EnvError};
use crate::fixtures;
use crate::graph::{BipartiteGraph, GraphError};
use crate::ltl::{eval_trace, parse_law_file, write_law_file, Law, LtlError, TraceVerdict};
use crate::shield::{LawSet, ShieldError};
use crate::vocab::{VocabError, Vocabulary};

pub use config::{ExperimentConfig, ExternalConfig, TransportKind};
pub use log::{read_trajectories, write_trajectory, LogRecord, LOG_SCHEMA_VERSION};
pub use metrics::{error_classes, subgoal_counts, MetricsReport, RoundMetrics, SubgoalStat};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error("{origin}: {source}")]
    Laws {
        origin: String,
        #[source]
        source: LtlError,
    },
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Actor(#[from] ActorError),
    #[error(transparent)]
    Critic(#[from] CriticError),
    #[error(transparent)]
    Shield(#[from] ShieldError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Transport(#[from] PolicyError),
}

pub(crate) fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, contents).map_err(io)
}

/// Loads the bundled vocabulary, or the file at `path`.
pub fn load_vocabulary(path: Option<&Path>) -> Result<Vocabulary, HarnessError> {
    match path {
        None => Ok(Vocabulary::minecraft()),
        Some(p) => Ok(Vocabulary::parse(&read(p)?)?),
    }
}

/// Reads one law file, or a bundled fixture when `spec` is `bundled:NAME`.
pub fn load_law_file(spec: &str, vocab: &Vocabulary) -> Result<Vec<Law>, HarnessError> {
    let text = match spec.strip_prefix("bundled:") {
        Some(name) => fixtures::by_name(name)
            .ok_or_else(|| HarnessError::Config(format!("no bundled law set named `{name}`")))?
            .to_string(),
        None => read(Path::new(spec))?,
    };
    parse_law_file(&text, vocab).map_err(|source| HarnessError::Laws {
        origin: spec.to_string(),
        source,
    })
}

/// Concatenates several law files into one set; ids must stay unique.
pub fn load_laws(specs: &[String], vocab: &Vocabulary) -> Result<LawSet, HarnessError> {
    let mut set = LawSet::new();
    for spec in specs {
        for law in load_law_file(spec, vocab)? {
            set.push(law)?;
        }
    }
    Ok(set)
}

/// Reads and concatenates the episodes of several log files.
pub fn load_logs(paths: &[PathBuf]) -> Result<Vec<Trajectory>, HarnessError> {
    let mut out = Vec::new();
    for p in paths {
        let text = read(p)?;
        let trajectories = read_trajectories(&text).map_err(|e| match e {
            HarnessError::Log { line, message } => HarnessError::Log {
                line,
                message: format!("{}: {message}", p.display()),
            },
            other => other,
        })?;
        out.extend(trajectories);
    }
    Ok(out)
}

pub fn connect(external: &ExternalConfig) -> Result<Box<dyn Transport>, HarnessError> {
    let timeout = Duration::from_millis(external.timeout_ms);
    match external.transport {
        TransportKind::Stdio => {
            let (program, args) = external
                .command
                .split_first()
                .ok_or_else(|| HarnessError::Config("stdio transport needs a non-empty `command`".into()))?;
            Ok(Box::new(StdioTransport::spawn(program, args, timeout)?))
        }
        TransportKind::Http => {
            let url = external
                .url
                .as_deref()
                .ok_or_else(|| HarnessError::Config("http transport needs a `url`".into()))?;
            Ok(Box::new(HttpTransport::new(url, timeout)))
        }
    }
}

fn make_policy(config: &ExperimentConfig, vocab: &Vocabulary) -> Result<Box<dyn Policy + Send>, HarnessError> {
    if config.policy == "external" {
        let external = config
            .external
            .as_ref()
            .ok_or_else(|| HarnessError::Config("policy `external` needs an [external] section".into()))?;
        return Ok(Box::new(ExternalPolicy::new(
            connect(external)?,
            external.send_allowed_actions,
        )));
    }
    Ok(builtin_policy(&config.policy, vocab)?)
}

/// Everything `cmd_run` produced, besides the files it wrote.
#[derive(Debug)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub rounds: Vec<CriticRound>,
    pub trajectories: Vec<Vec<Trajectory>>,
    pub final_laws: LawSet,
}

/// Runs the outer loop: a batch of episodes under the current law set, then
/// a critic round, until a round changes nothing or `max_rounds` critic
/// rounds have run.
///
/// Files written under `output_dir`:
/// `round_N/laws.laws`, `round_N/seed_S.jsonl`, `critic_round_N.txt`,
/// `report.txt` and `report.json`.
pub fn cmd_run(config: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let vocab = load_vocabulary(config.vocabulary.as_deref())?;
    let env = Env::new(config.env, vocab)?;
    let vocab = env.vocab();
    let episode = EpisodeConfig {
        max_steps: config.max_steps,
        retry_budget: config.retry_budget,
    };
    let mut policy = make_policy(config, vocab)?;
    let mut critic_transport = config.critic_external.as_ref().map(connect).transpose()?;
    let out_dir = &config.output_dir;

    let mut laws = load_laws(&config.laws, vocab)?;
    let mut report = MetricsReport {
        policy: config.policy.clone(),
        max_steps: config.max_steps,
        retry_budget: config.retry_budget,
        rounds: Vec::new(),
        stopped: String::new(),
    };
    let mut critic_rounds = Vec::new();
    let mut all = Vec::new();

    loop {
        let round = laws.round;
        let round_dir = out_dir.join(format!("round_{round}"));
        write(&round_dir.join("laws.laws"), &write_law_file(laws.laws()))?;
        let mut batch = Vec::with_capacity(config.episodes);
        for seed in config.seeds() {
            let mut t = run_episode(&env, policy.as_mut(), &laws, &episode, seed)?;
            t.law_round = round;
            write(&round_dir.join(format!("seed_{seed}.jsonl")), &write_trajectory(&t))?;
            batch.push(t);
        }
        report
            .rounds
            .push(RoundMetrics::compute(round, laws.len(), &batch, vocab));

        if round >= config.max_rounds {
            report.stopped = format!("reached max_rounds = {}", config.max_rounds);
            all.push(batch);
            break;
        }
        let transport = critic_transport.as_deref_mut().map(|t| t as &mut dyn Transport);
        let (next, critic) = run_round(&batch, &laws, vocab, transport)?;
        write(
            &out_dir.join(format!("critic_round_{}.txt", critic.round)),
            &critic.render(),
        )?;
        all.push(batch);
        let unchanged = critic.added.is_empty() && critic.edited.is_empty();
        critic_rounds.push(critic);
        if unchanged {
            report.stopped = format!("critic round {} changed no laws", round + 1);
            break;
        }
        laws = next;
    }

    write(&out_dir.join("report.txt"), &report.render())?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write(&out_dir.join("report.json"), &(json + "\n"))?;
    Ok(RunOutput {
        report,
        rounds: critic_rounds,
        trajectories: all,
        final_laws: laws,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyRow {
    pub law_id: String,
    pub trajectory: usize,
    pub verdict: TraceVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub laws: usize,
    pub trajectories: usize,
    pub rows: Vec<VerifyRow>,
}

impl VerifyReport {
    pub fn violations(&self) -> impl Iterator<Item = &VerifyRow> {
        self.rows.iter().filter(|r| r.verdict != TraceVerdict::Satisfied)
    }

    pub fn all_satisfied(&self) -> bool {
        self.violations().next().is_none()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut ids: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !ids.contains(&r.law_id.as_str()) {
                ids.push(&r.law_id);
            }
        }
        for id in ids {
            let bad: Vec<String> = self
                .rows
                .iter()
                .filter(|r| r.law_id == id)
                .filter_map(|r| match r.verdict {
                    TraceVerdict::Violated(step) => Some(format!("trajectory {} step {step}", r.trajectory)),
                    TraceVerdict::Satisfied => None,
                })
                .collect();
            if bad.is_empty() {
                let _ = writeln!(out, "{id}: satisfied");
            } else {
                let _ = writeln!(out, "{id}: VIOLATED at {}", bad.join(", "));
            }
        }
        let n = self.violations().count();
        let _ = writeln!(
            out,
            "{} law(s) x {} trajectory(ies): {}",
            self.laws,
            self.trajectories,
            if n == 0 {
                "all satisfied".to_string()
            } else {
                format!("{n} violation(s)")
            }
        );
        out
    }
}

/// Checks every law against every trajectory.
pub fn cmd_verify(laws: &[Law], trajectories: &[Trajectory], vocab: &Vocabulary) -> Result<VerifyReport, HarnessError> {
    let mut rows = Vec::new();
    for law in laws {
        for (i, t) in trajectories.iter().enumerate() {
            let steps = t.monitor_steps(vocab)?;
            let verdict = eval_trace(law, steps).map_err(|source| HarnessError::Laws {
                origin: law.id.clone(),
                source,
            })?;
            rows.push(VerifyRow {
                law_id: law.id.clone(),
                trajectory: i,
                verdict,
            });
        }
    }
    Ok(VerifyReport {
        laws: laws.len(),
        trajectories: trajectories.len(),
        rows,
    })
}

/// One offline critic round: returns the new law file text and the round
/// report.
pub fn cmd_induce(
    laws: &LawSet,
    trajectories: &[Trajectory],
    vocab: &Vocabulary,
    external: Option<&mut dyn Transport>,
) -> Result<(String, CriticRound), HarnessError> {
    let (next, round) = run_round(trajectories, laws, vocab, external)?;
    Ok((write_law_file(next.laws()), round))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphOutput {
    /// DOT rendering of the pruned graph.
    pub dot: String,
    /// One row per state: distance before and after pruning, and the state.
    pub table: String,
    /// Choice edges removed by pruning, one per line.
    pub diff: Vec<String>,
}

pub fn cmd_graph(trajectories: &[Trajectory], laws: &LawSet, vocab: &Vocabulary) -> Result<GraphOutput, HarnessError> {
    let full = BipartiteGraph::build(trajectories, vocab)?;
    let pruned = full.prune(laws, vocab);
    let before = full.distances();
    let after = pruned.distances();
    let show = |d: Option<usize>| d.map_or_else(|| "-".to_string(), |d| d.to_string());

    let mut table = String::from("dist  pruned  state\n");
    for (i, s) in full.states().iter().enumerate() {
        let names = vocab.true_names(s);
        let label = if names.is_empty() {
            "(none)".to_string()
        } else {
            names.join(",")
        };
        let _ = writeln!(table, "{:>4}  {:>6}  {label}", show(before[i]), show(after[i]));
    }

    let mut diff = Vec::new();
    for (s, a) in full.choice_edges() {
        if pruned.successors(s, a).is_empty() {
            diff.push(format!(
                "- {{{}}} --{}-->",
                vocab.true_names(s).join(","),
                vocab.actions()[a].name
            ));
        }
    }
    Ok(GraphOutput {
        dot: pruned.to_dot(vocab),
        table,
        diff,
    })
}
