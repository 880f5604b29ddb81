//! The six-stage edge processing chain and the decision node.
//!
//! Each stage is an M-server FIFO queue with a capacity limit. The stage
//! types here are passive: the scenario driver samples service times and
//! schedules completions on the engine.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{NodeId, SimDuration, SimTime};
use crate::network::Message;
use crate::workload::RequestKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Ingestion,
    Filtering,
    Aggregation,
    Analysis,
    TempStorage,
    CloudSync,
}

impl StageKind {
    pub const ALL: [StageKind; 6] = [
        StageKind::Ingestion,
        StageKind::Filtering,
        StageKind::Aggregation,
        StageKind::Analysis,
        StageKind::TempStorage,
        StageKind::CloudSync,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StageKind::Ingestion => "INGESTION",
            StageKind::Filtering => "FILTERING",
            StageKind::Aggregation => "AGGREGATION",
            StageKind::Analysis => "ANALYSIS",
            StageKind::TempStorage => "TEMP_STORAGE",
            StageKind::CloudSync => "CLOUD_SYNC",
        }
    }

    /// Whether `next` may directly follow `self` in a record's hop list.
    pub fn may_precede(self, next: StageKind) -> bool {
        use StageKind::*;
        matches!(
            (self, next),
            (Ingestion, Filtering)
                | (Filtering, Aggregation)
                | (Aggregation, Analysis)
                | (Analysis, TempStorage)
                | (Analysis, CloudSync)
        )
    }
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hop {
    pub stage: StageKind,
    pub enter: SimTime,
    pub exit: SimTime,
}

/// Checks that `hops` is a prefix of the fixed chain and is time ordered.
pub fn valid_hop_chain(hops: &[Hop]) -> Result<(), String> {
    if let Some(first) = hops.first() {
        if first.stage != StageKind::Ingestion {
            return Err(format!("chain starts at {}", first.stage));
        }
    }
    for h in hops {
        if h.exit < h.enter {
            return Err(format!("{} exits before it enters", h.stage));
        }
    }
    for w in hops.windows(2) {
        if !w[0].stage.may_precede(w[1].stage) {
            return Err(format!("{} followed by {}", w[0].stage, w[1].stage));
        }
        if w[1].enter < w[0].exit {
            return Err(format!("{} entered before {} exited", w[1].stage, w[0].stage));
        }
    }
    Ok(())
}

/// A unit of work moving through the chain. After aggregation a record may
/// stand for several requests (`members`).
#[derive(Debug, Clone, PartialEq)]
pub struct DataRecord {
    pub id: u64,
    pub kind: RequestKind,
    pub origin: NodeId,
    pub created_at: SimTime,
    pub relevant: bool,
    pub size: u64,
    pub members: Vec<u64>,
    pub hops: Vec<Hop>,
}

impl DataRecord {
    pub fn single(
        id: u64,
        kind: RequestKind,
        origin: NodeId,
        created_at: SimTime,
        relevant: bool,
        size: u64,
    ) -> Self {
        DataRecord {
            id,
            kind,
            origin,
            created_at,
            relevant,
            size,
            members: vec![id],
            hops: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterVerdict {
    Pass,
    Drop,
}

pub fn filter(record: &DataRecord) -> FilterVerdict {
    if record.relevant {
        FilterVerdict::Pass
    } else {
        FilterVerdict::Drop
    }
}

/// Consolidates a window into one record. The caller guarantees a non-empty
/// window from a single origin node.
pub fn aggregate(window: Vec<DataRecord>, compression: f64, id: u64) -> DataRecord {
    assert!(!window.is_empty(), "aggregation window must be non-empty");
    if window.len() == 1 && compression == 1.0 {
        return window.into_iter().next().expect("len 1");
    }
    let origin = window[0].origin;
    debug_assert!(window.iter().all(|r| r.origin == origin));
    let total: u64 = window.iter().map(|r| r.size).sum();
    let size = ((total as f64 * compression).round() as u64).max(1);
    let created_at = window.iter().map(|r| r.created_at).min().expect("non-empty");
    DataRecord {
        id,
        kind: window[0].kind,
        origin,
        created_at,
        relevant: true,
        size,
        members: window.iter().flat_map(|r| r.members.iter().copied()).collect(),
        hops: Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowPolicy {
    pub max_count: usize,
    pub timeout: SimDuration,
}

#[derive(Debug)]
struct OpenWindow {
    id: u64,
    records: Vec<DataRecord>,
}

/// Open aggregation windows at one node, one per request kind so that a
/// consolidated record carries a single kind.
#[derive(Debug)]
pub struct WindowSet {
    policy: WindowPolicy,
    open: BTreeMap<RequestKind, OpenWindow>,
    next_id: u64,
}

#[derive(Debug, PartialEq)]
pub enum WindowPush {
    /// The record opened a new window; arm a timeout for this window id.
    Opened(u64),
    Joined,
    /// The window reached its count limit and closed.
    Closed(Vec<DataRecord>),
}

impl WindowSet {
    pub fn new(policy: WindowPolicy) -> Self {
        WindowSet {
            policy,
            open: BTreeMap::new(),
            next_id: 0,
        }
    }

    pub fn policy(&self) -> WindowPolicy {
        self.policy
    }

    pub fn push(&mut self, record: DataRecord) -> WindowPush {
        let kind = record.kind;
        let mut opened = None;
        let w = self.open.entry(kind).or_insert_with(|| {
            let id = self.next_id;
            self.next_id += 1;
            opened = Some(id);
            OpenWindow {
                id,
                records: Vec::new(),
            }
        });
        w.records.push(record);
        if w.records.len() >= self.policy.max_count {
            let w = self.open.remove(&kind).expect("present");
            return WindowPush::Closed(w.records);
        }
        match opened {
            Some(id) => WindowPush::Opened(id),
            None => WindowPush::Joined,
        }
    }

    /// Closes the window for `kind` if it is still the one identified by
    /// `window_id`; a stale timeout returns `None`.
    pub fn expire(&mut self, kind: RequestKind, window_id: u64) -> Option<Vec<DataRecord>> {
        match self.open.get(&kind) {
            Some(w) if w.id == window_id => self.open.remove(&kind).map(|w| w.records),
            _ => None,
        }
    }

    pub fn pending(&self) -> usize {
        self.open.values().map(|w| w.records.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Local,
    Cloud,
}

/// Kind-based decision rule; every kind maps to exactly one verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionPolicy {
    verdicts: [Verdict; 4],
}

impl DecisionPolicy {
    pub fn new(verdicts: [Verdict; 4]) -> Self {
        DecisionPolicy { verdicts }
    }

    pub fn constant(v: Verdict) -> Self {
        DecisionPolicy { verdicts: [v; 4] }
    }

    pub fn set(&mut self, kind: RequestKind, v: Verdict) {
        self.verdicts[kind.index()] = v;
    }

    pub fn decide(&self, record: &DataRecord) -> Verdict {
        self.verdicts[record.kind.index()]
    }
}

impl Default for DecisionPolicy {
    /// Reads and reservations stay local; finalized orders and
    /// cancellations go to the cloud.
    fn default() -> Self {
        DecisionPolicy {
            verdicts: [Verdict::Local, Verdict::Local, Verdict::Cloud, Verdict::Cloud],
        }
    }
}

/// Result of offering an item to a stage.
#[derive(Debug, PartialEq)]
pub enum Admit<T> {
    /// An instance was idle; service starts now.
    Start(T),
    Queued,
    Shed(T),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageCounters {
    pub arrived: u64,
    pub started: u64,
    pub completed: u64,
    pub shed: u64,
}

/// An M-server FIFO queue. `busy` may exceed `instances` right after a
/// scale-down; running work is never preempted.
#[derive(Debug)]
pub struct StageQueue<T> {
    kind: StageKind,
    instances: u32,
    busy: u32,
    capacity: usize,
    queue: VecDeque<(T, SimTime)>,
    pub counters: StageCounters,
    last_change: SimTime,
    busy_integral: u128,
    instance_integral: u128,
}

impl<T> StageQueue<T> {
    pub fn new(kind: StageKind, instances: u32, capacity: usize) -> Self {
        assert!(instances >= 1, "a stage needs at least one instance");
        StageQueue {
            kind,
            instances,
            busy: 0,
            capacity,
            queue: VecDeque::new(),
            counters: StageCounters::default(),
            last_change: SimTime::ZERO,
            busy_integral: 0,
            instance_integral: 0,
        }
    }

    pub fn kind(&self) -> StageKind {
        self.kind
    }

    pub fn instances(&self) -> u32 {
        self.instances
    }

    pub fn busy(&self) -> u32 {
        self.busy
    }

    pub fn waiting(&self) -> usize {
        self.queue.len()
    }

    pub fn depth(&self) -> usize {
        self.queue.len() + self.busy as usize
    }

    fn advance(&mut self, now: SimTime) {
        if now > self.last_change {
            let dt = (now - self.last_change).as_micros() as u128;
            self.busy_integral += dt * self.busy as u128;
            self.instance_integral += dt * self.instances as u128;
            self.last_change = now;
        }
    }

    /// Busy instance-microseconds and provisioned instance-microseconds up
    /// to `now`.
    pub fn integrals(&mut self, now: SimTime) -> (u128, u128) {
        self.advance(now);
        (self.busy_integral, self.instance_integral)
    }

    pub fn arrive(&mut self, item: T, now: SimTime) -> Admit<T> {
        self.advance(now);
        self.counters.arrived += 1;
        if self.busy < self.instances {
            self.busy += 1;
            self.counters.started += 1;
            Admit::Start(item)
        } else if self.queue.len() < self.capacity {
            self.queue.push_back((item, now));
            Admit::Queued
        } else {
            self.counters.shed += 1;
            Admit::Shed(item)
        }
    }

    /// Frees one instance; returns the next queued item (with its enqueue
    /// time) if service can start on it immediately.
    pub fn finish(&mut self, now: SimTime) -> Option<(T, SimTime)> {
        self.advance(now);
        debug_assert!(self.busy > 0);
        self.busy -= 1;
        self.counters.completed += 1;
        self.try_start()
    }

    fn try_start(&mut self) -> Option<(T, SimTime)> {
        if self.busy < self.instances {
            if let Some(next) = self.queue.pop_front() {
                self.busy += 1;
                self.counters.started += 1;
                return Some(next);
            }
        }
        None
    }

    /// Changes the instance count; returns queued items that start at once.
    pub fn resize(&mut self, instances: u32, now: SimTime) -> Vec<(T, SimTime)> {
        assert!(instances >= 1);
        self.advance(now);
        self.instances = instances;
        let mut started = Vec::new();
        while let Some(x) = self.try_start() {
            started.push(x);
        }
        started
    }
}

/// A batch of records shipped from an edge node's sync stage to the cloud
/// store.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncBatch {
    pub batch_id: u64,
    pub attempt: u32,
    pub records: Vec<SyncedRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncedRecord {
    pub request: u64,
    pub ready_at: SimTime,
    pub size: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SyncRetry {
    Resend(Message<SyncBatch>),
    /// Retry budget exhausted; the batch is reported as unsynced.
    GiveUp(SyncBatch),
    /// Already acknowledged.
    Done,
}

/// Per-node write-behind buffer for cloud sync with retry accounting.
#[derive(Debug)]
pub struct CloudSyncBuffer {
    node: NodeId,
    cloud: NodeId,
    header_bytes: u64,
    retry_limit: u32,
    pending: Vec<SyncedRecord>,
    in_flight: BTreeMap<u64, SyncBatch>,
    next_batch: u64,
    pub unsynced: Vec<SyncBatch>,
    pub messages_sent: u64,
}

impl CloudSyncBuffer {
    pub fn new(node: NodeId, cloud: NodeId, header_bytes: u64, retry_limit: u32) -> Self {
        CloudSyncBuffer {
            node,
            cloud,
            header_bytes,
            retry_limit,
            pending: Vec::new(),
            in_flight: BTreeMap::new(),
            next_batch: 0,
            unsynced: Vec::new(),
            messages_sent: 0,
        }
    }

    pub fn push(&mut self, rec: SyncedRecord) {
        self.pending.push(rec);
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    fn message(&mut self, batch: SyncBatch, now: SimTime) -> Message<SyncBatch> {
        self.messages_sent += 1;
        let size = self.header_bytes + batch.records.iter().map(|r| r.size).sum::<u64>();
        Message {
            src: self.node,
            dst: self.cloud,
            size,
            payload: batch,
            send_time: now,
        }
    }

    /// Packs everything pending into exactly one message.
    pub fn flush(&mut self, now: SimTime) -> Option<Message<SyncBatch>> {
        if self.pending.is_empty() {
            return None;
        }
        let batch = SyncBatch {
            batch_id: self.next_batch,
            attempt: 1,
            records: std::mem::take(&mut self.pending),
        };
        self.next_batch += 1;
        self.in_flight.insert(batch.batch_id, batch.clone());
        Some(self.message(batch, now))
    }

    pub fn ack(&mut self, batch_id: u64) -> bool {
        self.in_flight.remove(&batch_id).is_some()
    }

    /// Called when the ack timer for `batch_id` fires.
    pub fn on_timeout(&mut self, batch_id: u64, now: SimTime) -> SyncRetry {
        let Some(batch) = self.in_flight.get_mut(&batch_id) else {
            return SyncRetry::Done;
        };
        if batch.attempt >= self.retry_limit {
            let b = self.in_flight.remove(&batch_id).expect("present");
            self.unsynced.push(b.clone());
            return SyncRetry::GiveUp(b);
        }
        batch.attempt += 1;
        let b = batch.clone();
        SyncRetry::Resend(self.message(b, now))
    }
}
