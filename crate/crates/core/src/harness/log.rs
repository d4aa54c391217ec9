//! JSON-lines trajectory logs.
//!
//! Each episode is a `header` record, one `step` record per decision and an
//! `end` record. Several episodes may be concatenated in one file.

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::actor::{StepRecord, Termination, Trajectory};
use crate::vocab::AbstractState;

/// Version of the record layout below. Bump on incompatible changes.
pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Header {
        schema: u32,
        seed: u64,
        law_round: u32,
        policy: String,
    },
    Step(StepRecord),
    End {
        final_state: AbstractState,
        terminated: Termination,
    },
}

pub fn write_trajectory(t: &Trajectory) -> String {
    let mut records = Vec::with_capacity(t.steps.len() + 2);
    records.push(LogRecord::Header {
        schema: LOG_SCHEMA_VERSION,
        seed: t.seed,
        law_round: t.law_round,
        policy: t.policy.clone(),
    });
    records.extend(t.steps.iter().cloned().map(LogRecord::Step));
    records.push(LogRecord::End {
        final_state: t.final_state.clone(),
        terminated: t.terminated,
    });
    let mut out = String::new();
    for r in &records {
        out.push_str(&serde_json::to_string(r).expect("log records serialize"));
        out.push('\n');
    }
    out
}

/// Parses every episode in a log. Blank lines are ignored; an empty log
/// yields no trajectories.
pub fn read_trajectories(text: &str) -> Result<Vec<Trajectory>, HarnessError> {
    let mut out = Vec::new();
    let mut open: Option<Trajectory> = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| HarnessError::Log { line: line_no, message };
        let record: LogRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        match record {
            LogRecord::Header {
                schema,
                seed,
                law_round,
                policy,
            } => {
                if schema != LOG_SCHEMA_VERSION {
                    return Err(err(format!(
                        "schema {schema} is not supported (expected {LOG_SCHEMA_VERSION})"
                    )));
                }
                if open.is_some() {
                    return Err(err("header before the previous episode ended".into()));
                }
                open = Some(Trajectory {
                    seed,
                    law_round,
                    policy,
                    steps: Vec::new(),
                    final_state: AbstractState::new(Vec::new()),
                    terminated: Termination::StepLimit,
                });
            }
            LogRecord::Step(step) => match open.as_mut() {
                Some(t) => t.steps.push(step),
                None => return Err(err("step record outside an episode".into())),
            },
            LogRecord::End {
                final_state,
                terminated,
            } => match open.take() {
                Some(mut t) => {
                    t.final_state = final_state;
                    t.terminated = terminated;
                    out.push(t);
                }
                None => return Err(err("end record outside an episode".into())),
            },
        }
    }
    if open.is_some() {
        return Err(HarnessError::Log {
            line: text.lines().count(),
            message: "log ends inside an episode".into(),
        });
    }
    Ok(out)
}
