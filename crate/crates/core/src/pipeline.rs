//! Config → run → diagnostics → classification.

use serde::{Deserialize, Serialize};

use crate::blowup::{classify_limit, BlowupVerdict};
use crate::config::RunConfig;
use crate::diagnostics::{audit_summary, diagnose, Audit, Diagnostics};
use crate::error::Error;
use crate::flow::{run, RunRecord, Termination};

/// Outcome of the classification step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum VerdictRecord {
    Classified(BlowupVerdict),
    Inconclusive { s_max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub record: RunRecord,
    pub diagnostics: Diagnostics,
    pub audits: Vec<Audit>,
    pub verdict: VerdictRecord,
}

/// A run that stopped on a numerical error, with whatever was computed.
#[derive(Debug, Clone, PartialEq)]
pub struct FailedRun {
    pub record: Option<RunRecord>,
    pub s: f64,
    pub error: String,
}

/// Execute a validated config.
pub fn execute(cfg: &RunConfig) -> std::result::Result<RunOutcome, Box<FailedRun>> {
    let fail = |record: Option<RunRecord>, e: &Error, s: f64| {
        let s = match e {
            Error::AtTime { s, .. } => *s,
            _ => s,
        };
        Box::new(FailedRun {
            record,
            s,
            error: e.to_string(),
        })
    };
    let grid = cfg.grid().map_err(|e| fail(None, &e, 0.0))?;
    let record = run(
        &cfg.bundle(),
        cfg.class0(),
        &grid,
        &cfg.schedule(),
        cfg.controller(),
    )
    .map_err(|e| fail(None, &e, 0.0))?;
    if let Termination::Failed { s, reason } = &record.termination {
        return Err(Box::new(FailedRun {
            s: *s,
            error: reason.clone(),
            record: Some(record),
        }));
    }
    let s_last = record.last().s;
    let diagnostics = diagnose(&record, cfg.weight_choice(), cfg.weight.harnack_radius)
        .map_err(|e| fail(Some(record.clone()), &e, s_last))?;
    let audits = audit_summary(&diagnostics, &cfg.bundle());
    let verdict = match classify_limit(&record) {
        Ok(v) => VerdictRecord::Classified(v),
        Err(Error::Inconclusive { s_max }) => VerdictRecord::Inconclusive { s_max },
        Err(e) => return Err(fail(Some(record), &e, s_last)),
    };
    Ok(RunOutcome {
        config: cfg.clone(),
        record,
        diagnostics,
        audits,
        verdict,
    })
}

impl RunOutcome {
    /// Estimate report at the last checkpoint.
    pub fn final_report(&self) -> &crate::diagnostics::EstimateReport {
        self.diagnostics
            .reports
            .last()
            .expect("a completed run has snapshots")
    }
}
