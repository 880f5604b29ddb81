//! Post-run auditor. Re-checks a finished run against the simulator's
//! invariants using only the structured run log and the final report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::config::ResolvedScenario;
use crate::engine::{NodeId, SimDuration, SimTime};
use crate::inventory::{ReplicaState, SeatId, TicketOutcome, WriteKind};
use crate::pipeline::{valid_hop_chain, StageKind};
use crate::scenario::{AuditLog, Outcome, RunOutput, StageLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Preconditions for the check did not hold in this run.
    Skipped,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct AuditReport {
    pub checks: Vec<Check>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &'static str, result: Result<String, String>) {
        let (status, detail) = match result {
            Ok(d) => (Status::Pass, d),
            Err(d) => (Status::Fail, d),
        };
        self.checks.push(Check { name, status, detail });
    }

    fn skip(&mut self, name: &'static str, why: &str) {
        self.checks.push(Check {
            name,
            status: Status::Skipped,
            detail: why.to_string(),
        });
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let s = match c.status {
                Status::Pass => "ok",
                Status::Fail => "VIOLATION",
                Status::Skipped => "skipped",
            };
            writeln!(f, "{:<20} {:<9} {}", c.name, s, c.detail)?;
        }
        Ok(())
    }
}

/// Runs every check against one finished run.
pub fn audit(sc: &ResolvedScenario, out: &RunOutput) -> AuditReport {
    let log = &out.audit;
    let mut r = AuditReport::default();
    r.push("hop_order", hop_order(log));
    r.push("conservation", conservation(out));
    r.push("work_conservation", work_conservation(log));
    r.push("no_double_booking", no_double_booking(log));
    r.push("log_replay", log_replay(&log.replicas));
    r.push("read_staleness", read_staleness(log));

    let dropped: u64 = out
        .report
        .details
        .get("network.dropped")
        .and_then(|v| v.parse().ok())
        .unwrap_or(0);
    let lossless = dropped == 0 && sc.failures.is_empty();
    if lossless {
        r.push("convergence", convergence(sc, log));
        r.push("cloud_lag", cloud_lag(sc, log));
    } else {
        r.skip("convergence", "messages were dropped or nodes failed");
        r.skip("cloud_lag", "messages were dropped or nodes failed");
    }
    r
}

fn hop_order(log: &AuditLog) -> Result<String, String> {
    let mut checked = 0;
    for (i, rec) in log.requests.iter().enumerate() {
        valid_hop_chain(&rec.hops).map_err(|e| format!("request {i}: {e}"))?;
        if let Some(first) = rec.hops.first() {
            if first.enter < rec.created_at {
                return Err(format!("request {i}: ingested before it was created"));
            }
        }
        let last = rec.hops.last().map(|h| h.stage);
        let ok = match rec.outcome {
            Outcome::Completed => matches!(last, Some(StageKind::TempStorage | StageKind::CloudSync)),
            Outcome::Filtered => last == Some(StageKind::Filtering),
            Outcome::Shed | Outcome::Failed | Outcome::Pending => true,
        };
        if !ok {
            return Err(format!("request {i}: {:?} with last stage {last:?}", rec.outcome));
        }
        checked += 1;
    }
    Ok(format!("{checked} hop chains"))
}

fn conservation(out: &RunOutput) -> Result<String, String> {
    let mut tally: BTreeMap<&'static str, u64> = BTreeMap::new();
    for rec in &out.audit.requests {
        let k = match rec.outcome {
            Outcome::Pending => "in_flight",
            Outcome::Completed => "completed",
            Outcome::Filtered => "filtered",
            Outcome::Shed => "shed",
            Outcome::Failed => "failed",
        };
        *tally.entry(k).or_default() += 1;
    }
    let c = out.report.total();
    let get = |k| tally.get(k).copied().unwrap_or(0);
    let pairs = [
        ("generated", c.generated, out.audit.requests.len() as u64),
        ("completed", c.completed, get("completed")),
        ("filtered", c.filtered, get("filtered")),
        ("shed", c.shed, get("shed")),
        ("failed", c.failed, get("failed")),
        ("in_flight", c.in_flight(), get("in_flight")),
    ];
    for (name, reported, logged) in pairs {
        if reported != logged {
            return Err(format!("{name}: report {reported}, run log {logged}"));
        }
    }
    let sum = c.completed + c.filtered + c.shed + c.failed + c.in_flight();
    if sum != c.generated {
        return Err(format!("terminal states sum to {sum}, generated {}", c.generated));
    }
    Ok(format!("{} requests accounted for", c.generated))
}

/// Sweeps each stage's timeline; at no instant may an item wait while an
/// instance is idle.
fn work_conservation(log: &AuditLog) -> Result<String, String> {
    for ((node, stage), sl) in &log.stages {
        if let Some(t) = idle_while_waiting(sl) {
            return Err(format!("node {} stage {stage}: idle instance with a queue at {t}", node.0));
        }
    }
    Ok(format!("{} stage timelines", log.stages.len()))
}

pub fn idle_while_waiting(sl: &StageLog) -> Option<SimTime> {
    // (time, d_waiting, d_busy)
    let mut ev: Vec<(SimTime, i64, i64)> = Vec::with_capacity(sl.visits.len() * 3);
    for v in &sl.visits {
        ev.push((v.enter, 1, 0));
        ev.push((v.start, -1, 1));
        ev.push((v.exit, 0, -1));
    }
    for &s in &sl.in_service {
        ev.push((s, 0, 1));
    }
    ev.sort_unstable_by_key(|e| e.0);
    let mut inst = sl.instances.iter().peekable();
    let mut instances = 0i64;
    let (mut waiting, mut busy) = (0i64, 0i64);
    let mut i = 0;
    while i < ev.len() {
        let t = ev[i].0;
        while let Some((at, n)) = inst.peek() {
            if *at > t {
                break;
            }
            instances = *n as i64;
            inst.next();
        }
        while i < ev.len() && ev[i].0 == t {
            waiting += ev[i].1;
            busy += ev[i].2;
            i += 1;
        }
        if waiting > 0 && busy < instances {
            return Some(t);
        }
    }
    None
}

fn no_double_booking(log: &AuditLog) -> Result<String, String> {
    let mut booked: BTreeMap<SeatId, u64> = BTreeMap::new();
    let mut confirmed = 0;
    for t in &log.tickets {
        match (t.kind, t.outcome) {
            (WriteKind::Book, TicketOutcome::Confirmed) => {
                if let Some(prev) = booked.insert(t.seat, t.request) {
                    return Err(format!("seat {} confirmed to {prev} and {}", t.seat, t.request));
                }
                confirmed += 1;
            }
            (WriteKind::Cancel, TicketOutcome::Cancelled) => {
                if booked.remove(&t.seat).is_none() {
                    return Err(format!("seat {} cancelled while not booked", t.seat));
                }
            }
            _ => {}
        }
    }
    for rep in &log.replicas {
        for (&seat, st) in rep.seats() {
            if !rep.owns(seat.flight) {
                continue;
            }
            let is_booked = st.status() == crate::inventory::SeatStatus::Booked;
            if is_booked != booked.contains_key(&seat) {
                return Err(format!("seat {seat}: owner state disagrees with the ticket ledger"));
            }
        }
    }
    Ok(format!("{confirmed} confirmations, {} seats booked at end", booked.len()))
}

fn log_replay(replicas: &[ReplicaState]) -> Result<String, String> {
    let mut entries = 0;
    for rep in replicas {
        let replayed = ReplicaState::replay(rep.log());
        if &replayed != rep.seats() {
            return Err(format!("node {}: log replay differs from live state", rep.node().0));
        }
        entries += rep.log().len();
    }
    Ok(format!("{} replicas, {entries} log entries", replicas.len()))
}

fn read_staleness(log: &AuditLog) -> Result<String, String> {
    let bound = log.staleness_bound;
    let mut worst = SimDuration::ZERO;
    for rd in &log.reads {
        if rd.staleness > bound {
            return Err(format!(
                "request {}: staleness {} above bound {bound}",
                rd.request, rd.staleness
            ));
        }
        worst = worst.max(rd.staleness);
    }
    Ok(format!("{} reads, max staleness {worst}, bound {bound}", log.reads.len()))
}

/// Worst-case delivery time for the largest message seen on a pair.
fn transit_bound(sc: &ResolvedScenario, log: &AuditLog, src: NodeId, dst: NodeId) -> SimDuration {
    let Some(link) = sc.topology.link(src, dst) else {
        return SimDuration::ZERO;
    };
    let size = log.max_message.get(&(src, dst)).copied().unwrap_or(0);
    link.max_latency() + link.serialization_delay(size)
}

/// Replica convergence bound after the last write: one sync interval plus
/// the slowest replica-to-replica transit, per hop of the sync graph.
pub fn convergence_bound(sc: &ResolvedScenario, log: &AuditLog) -> SimDuration {
    let nodes: Vec<NodeId> = log.replicas.iter().map(|r| r.node()).collect();
    let mut transit = SimDuration::ZERO;
    for &a in &nodes {
        for &b in &nodes {
            if a != b {
                transit = transit.max(transit_bound(sc, log, a, b));
            }
        }
    }
    let hops = if sc.config.inventory.replicate_to_peers { 1 } else { 2 };
    let interval = SimDuration::from_millis_f64(sc.config.inventory.sync_interval_ms);
    SimDuration((interval + transit).0 * hops)
}

fn convergence(sc: &ResolvedScenario, log: &AuditLog) -> Result<String, String> {
    let Some(last) = log.last_write_at else {
        return Ok("no writes".into());
    };
    let bound = convergence_bound(sc, log);
    for (node, at) in &log.replica_changed_at {
        if *at > last + bound {
            return Err(format!(
                "node {} changed at {at}, {} after the last write (bound {bound})",
                node.0,
                at.since(last)
            ));
        }
    }
    if last + bound > log.horizon {
        return Ok(format!("last write at {last} too close to the horizon to require agreement"));
    }
    let seats: BTreeSet<SeatId> = log.replicas.iter().flat_map(|r| r.seats().keys().copied()).collect();
    for &seat in &seats {
        let first = log.replicas[0].state(seat);
        for rep in &log.replicas[1..] {
            if rep.state(seat) != first {
                return Err(format!("seat {seat}: node {} disagrees at the horizon", rep.node().0));
            }
        }
    }
    Ok(format!("{} replicas agree on {} seats, bound {bound}", log.replicas.len(), seats.len()))
}

/// Cloud copy lags the producing site by at most one flush interval plus
/// the transit of the batch.
fn cloud_lag(sc: &ResolvedScenario, log: &AuditLog) -> Result<String, String> {
    let interval = SimDuration::from_millis_f64(sc.config.pipeline.cloud_sync.interval_ms);
    let cloud = sc.topology.cloud();
    let mut worst = SimDuration::ZERO;
    for l in &log.sync_lags {
        let bound = interval + transit_bound(sc, log, l.node, cloud);
        let lag = l.stored_at.since(l.ready_at);
        if lag > bound {
            return Err(format!("node {}: lag {lag} above bound {bound}", l.node.0));
        }
        worst = worst.max(lag);
    }
    Ok(format!("{} records, max lag {worst}", log.sync_lags.len()))
}
