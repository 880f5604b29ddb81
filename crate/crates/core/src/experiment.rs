//! One experiment: the requested architectures over a shared request
//! stream, each audited, plus the comparison when both ran.

use std::fmt::Write;

use crate::audit::{audit, AuditReport};
use crate::config::{ArchKind, ResolvedScenario, ScenarioConfig};
use crate::error::RunError;
use crate::metrics::{compare, Comparison, ScenarioReport};
use crate::scenario::{run_with, workload, AuditLog, RunOptions, RunOutput};

pub struct ArchRun {
    pub output: RunOutput,
    pub audit: AuditReport,
}

pub struct Experiment {
    pub resolved: ResolvedScenario,
    pub centralized: Option<ArchRun>,
    pub edge: Option<ArchRun>,
    pub comparison: Option<Comparison>,
}

impl Experiment {
    /// Runs in a fixed order: centralized first, then edge.
    pub fn runs(&self) -> impl Iterator<Item = &ArchRun> {
        self.centralized.iter().chain(self.edge.iter())
    }

    pub fn passed(&self) -> bool {
        self.runs().all(|r| r.audit.passed())
    }
}

pub fn run_experiment(cfg: &ScenarioConfig, opts: RunOptions) -> Result<Experiment, RunError> {
    let resolved = cfg.resolve()?;
    let reqs = workload(&resolved);
    let one = |arch| {
        let output = run_with(&resolved, arch, &reqs, opts);
        let audit = audit(&resolved, &output);
        ArchRun { output, audit }
    };
    let centralized = cfg.architecture.includes_centralized().then(|| one(ArchKind::Centralized));
    let edge = cfg.architecture.includes_edge().then(|| one(ArchKind::Edge));
    let comparison = match (&centralized, &edge) {
        // Compares the reports as written so that re-comparing the files
        // reproduces the same numbers.
        (Some(c), Some(e)) => Some(compare(&as_written(&c.output.report), &as_written(&e.output.report))?),
        _ => None,
    };
    Ok(Experiment {
        resolved,
        centralized,
        edge,
        comparison,
    })
}

/// Final status of every seat at its partition owner.
pub fn seats_csv(sc: &ResolvedScenario, log: &AuditLog) -> String {
    let mut out = String::from("flight,seat,owner,status,holder\n");
    for (f, spec) in sc.flights.iter().enumerate() {
        let Some(rep) = log.replicas.iter().find(|r| r.owns(f as u32)) else {
            continue;
        };
        for seat in 0..spec.seats {
            let st = rep.state(crate::inventory::SeatId::new(f as u32, seat));
            let holder = st.holder().map(|h| h.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                spec.name,
                seat,
                sc.topology.name(rep.node()),
                st.status(),
                holder
            );
        }
    }
    out
}

/// Every coordinator decision in decision order.
pub fn ledger_csv(sc: &ResolvedScenario, log: &AuditLog) -> String {
    let mut out = String::from("decided_at_us,request,flight,seat,kind,outcome,coordinator\n");
    for t in &log.tickets {
        let _ = writeln!(
            out,
            "{},{},{},{},{:?},{},{}",
            t.decided_at.0,
            t.request,
            sc.flights[t.seat.flight as usize].name,
            t.seat.seat,
            t.kind,
            t.outcome,
            sc.topology.name(t.coordinator)
        );
    }
    out
}

fn as_written(r: &ScenarioReport) -> ScenarioReport {
    ScenarioReport::from_text(&r.to_text()).expect("report text round-trips")
}
