//! The simulated world for one architecture: request generation and routing,
//! the stage chain at each serving site, the seat inventory (replicas,
//! partition coordinators, anti-entropy sync), the cloud store and the
//! autoscaler. Both architectures run this same code; the centralized
//! baseline is the case of a single site at the cloud node that owns every
//! partition.

use std::collections::BTreeMap;

use crate::config::{ArchKind, ResolvedScenario};
use crate::dist::DurationDist;
use crate::engine::{Engine, Event, NodeId, SimDuration, SimTime, TraceLabel};
use crate::inventory::{
    BookingTicket, CoordEvent, Coordinator, Delta, ReplicaState, SeatId, TicketOutcome, WriteKind, WriteRequest,
};
use crate::metrics::{MetricsCollector, SatisfactionWeights, ScenarioReport};
use crate::network::{deliver, Delivery, Message};
use crate::orchestration::{
    route, ArrivalForecaster, Autoscaler, CacheGet, DepthEwma, EdgeCache, LoadSnapshot, RoutingKind,
};
use crate::pipeline::{
    aggregate, filter, Admit, CloudSyncBuffer, DataRecord, FilterVerdict, Hop, StageKind, StageQueue, SyncBatch,
    SyncRetry, SyncedRecord, Verdict, WindowPush, WindowSet,
};
use crate::rng::{RngStream, StreamId};
use crate::workload::{generate, Request, RequestKind};

/// Payloads carried between nodes.
#[derive(Debug, Clone)]
pub enum Msg {
    Request(u64),
    Response(u64),
    Write { req: WriteRequest, attempt: u32 },
    Ticket(BookingTicket),
    Fetch { request: u64, flight: u32 },
    Snapshot { request: u64, flight: u32 },
    Delta(Box<Delta>),
    DeltaAck { upto: usize },
    Batch(Box<SyncBatch>),
    BatchAck { batch: u64 },
}

impl Msg {
    fn label(&self) -> String {
        match self {
            Msg::Request(r) => format!("request r{r}"),
            Msg::Response(r) => format!("response r{r}"),
            Msg::Write { req, attempt } => format!("write r{} seat {} try {attempt}", req.request, req.seat),
            Msg::Ticket(t) => format!("ticket r{} {}", t.request, t.outcome),
            Msg::Fetch { request, flight } => format!("fetch r{request} flight {flight}"),
            Msg::Snapshot { request, flight } => format!("snapshot r{request} flight {flight}"),
            Msg::Delta(d) => format!("delta upto {} entries {}", d.upto, d.entries.len()),
            Msg::DeltaAck { upto } => format!("delta_ack upto {upto}"),
            Msg::Batch(b) => format!("batch {} try {} records {}", b.batch_id, b.attempt, b.records.len()),
            Msg::BatchAck { batch } => format!("batch_ack {batch}"),
        }
    }
}

/// Engine payload. `target` of the event is the node where it happens.
#[derive(Debug, Clone)]
pub enum Action {
    Generate(u64),
    Deliver { from: NodeId, msg: Msg },
    StageDone {
        stage: StageKind,
        rec: Box<DataRecord>,
        enter: SimTime,
        start: SimTime,
    },
    WindowTimeout { kind: RequestKind, window: u64 },
    Commit { seat: SeatId },
    WriteTimeout { request: u64, attempt: u32 },
    FetchTimeout { request: u64, attempt: u32 },
    CloudFlush,
    CloudTimeout { batch: u64 },
    InventorySync,
    Autoscale,
    Resize { stage: StageKind, instances: u32 },
    NodeDown,
    NodeUp,
    Dropped { to: NodeId, what: String },
}

impl TraceLabel for Action {
    fn trace_label(&self) -> String {
        match self {
            Action::Generate(r) => format!("generate r{r}"),
            Action::Deliver { from, msg } => format!("recv {} from n{}", msg.label(), from.0),
            Action::StageDone { stage, rec, .. } => format!("done {} rec{} x{}", stage, rec.id, rec.members.len()),
            Action::WindowTimeout { kind, window } => format!("window_timeout {kind} w{window}"),
            Action::Commit { seat } => format!("commit seat {seat}"),
            Action::WriteTimeout { request, attempt } => format!("write_timeout r{request} try {attempt}"),
            Action::FetchTimeout { request, attempt } => format!("fetch_timeout r{request} try {attempt}"),
            Action::CloudFlush => "cloud_flush".into(),
            Action::CloudTimeout { batch } => format!("cloud_timeout batch {batch}"),
            Action::InventorySync => "inventory_sync".into(),
            Action::Autoscale => "autoscale".into(),
            Action::Resize { stage, instances } => format!("resize {stage} {instances}"),
            Action::NodeDown => "node_down".into(),
            Action::NodeUp => "node_up".into(),
            Action::Dropped { to, what } => format!("dropped {what} to n{}", to.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pending,
    Completed,
    Filtered,
    Shed,
    Failed,
}

/// Where an availability read was served from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ReadSource {
    Owner,
    Replica,
    Cache,
    Fetch,
}

impl ReadSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ReadSource::Owner => "owner",
            ReadSource::Replica => "replica",
            ReadSource::Cache => "cache",
            ReadSource::Fetch => "fetch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReadRecord {
    pub request: u64,
    pub node: NodeId,
    pub flight: u32,
    pub at: SimTime,
    pub staleness: SimDuration,
    pub source: ReadSource,
}

#[derive(Debug, Clone)]
pub struct RequestRecord {
    pub kind: RequestKind,
    pub created_at: SimTime,
    pub site: Option<NodeId>,
    pub outcome: Outcome,
    pub hops: Vec<Hop>,
    /// Response produced at the serving site.
    pub ready_at: Option<SimTime>,
    /// Response received by the user.
    pub done_at: Option<SimTime>,
}

/// One service episode at a stage: queued at `enter`, served from `start`
/// to `exit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Visit {
    pub enter: SimTime,
    pub start: SimTime,
    pub exit: SimTime,
}

#[derive(Debug, Clone, Default)]
pub struct StageLog {
    /// (time, instance count), starting with the initial count at time 0.
    pub instances: Vec<(SimTime, u32)>,
    pub visits: Vec<Visit>,
    /// Start times of items still in service at the horizon.
    pub in_service: Vec<SimTime>,
    /// Items still queued at the horizon.
    pub queued: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncLag {
    pub node: NodeId,
    pub ready_at: SimTime,
    pub stored_at: SimTime,
}

/// Structured record of a run, consumed by the auditor and the tests.
#[derive(Debug, Clone)]
pub struct AuditLog {
    pub arch: ArchKind,
    pub horizon: SimTime,
    pub requests: Vec<RequestRecord>,
    pub stages: BTreeMap<(NodeId, StageKind), StageLog>,
    /// Coordinator decisions in decision order.
    pub tickets: Vec<BookingTicket>,
    /// Outcome as seen by the entry node, one per booking/cancellation.
    pub entry_tickets: BTreeMap<u64, TicketOutcome>,
    pub reads: Vec<ReadRecord>,
    pub staleness_bound: SimDuration,
    pub replicas: Vec<ReplicaState>,
    /// Last time each replica's state changed.
    pub replica_changed_at: BTreeMap<NodeId, SimTime>,
    /// Last local write at any partition owner.
    pub last_write_at: Option<SimTime>,
    pub sync_lags: Vec<SyncLag>,
    pub unsynced_batches: usize,
    /// Largest message size seen per (src, dst) pair, for transit bounds.
    pub max_message: BTreeMap<(NodeId, NodeId), u64>,
}

pub struct RunOutput {
    pub report: ScenarioReport,
    pub trace: Option<Vec<u8>>,
    pub audit: AuditLog,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub trace: bool,
}

struct ScalerState {
    scaler: Autoscaler,
    pending: bool,
    last: (u128, u128),
}

struct Site {
    stages: Vec<StageQueue<DataRecord>>,
    service: Vec<DurationDist>,
    windows: WindowSet,
    sync: CloudSyncBuffer,
    cache: EdgeCache<u32, SimTime>,
    scalers: Vec<Option<ScalerState>>,
}

struct PendingWrite {
    req: WriteRequest,
    owner: NodeId,
    attempt: u32,
}

struct PendingFetch {
    flight: u32,
    owner: NodeId,
    attempt: u32,
}

struct World<'a> {
    sc: &'a ResolvedScenario,
    arch: ArchKind,
    reqs: &'a [Request],
    records: Vec<RequestRecord>,
    sites: Vec<Option<Site>>,
    replicas: Vec<Option<ReplicaState>>,
    coordinators: Vec<Option<Coordinator>>,
    owner: Vec<NodeId>,
    sync_peers: Vec<Vec<NodeId>>,
    healthy: Vec<bool>,
    net_rng: RngStream,
    svc_rng: RngStream,
    metrics: MetricsCollector,
    stored: BTreeMap<(NodeId, u64), usize>,
    sync_lags: Vec<SyncLag>,
    reads: Vec<ReadRecord>,
    ewma: Vec<DepthEwma>,
    forecaster: ArrivalForecaster,
    routed: Vec<u64>,
    net_messages: u64,
    net_drops: u64,
    next_record: u64,
    writes: BTreeMap<u64, PendingWrite>,
    fetches: BTreeMap<u64, PendingFetch>,
    entry_tickets: BTreeMap<u64, TicketOutcome>,
    stage_logs: BTreeMap<(NodeId, StageKind), StageLog>,
    replica_changed_at: BTreeMap<NodeId, SimTime>,
    last_write_at: Option<SimTime>,
    max_message: BTreeMap<(NodeId, NodeId), u64>,
    in_service: BTreeMap<(NodeId, StageKind, u64), SimTime>,
}

/// The request stream for a scenario; identical for both architectures.
pub fn workload(sc: &ResolvedScenario) -> Vec<Request> {
    let mut rng = RngStream::new(sc.config.seed, StreamId::Workload);
    generate(&sc.profile, &sc.flights, &mut rng)
}

fn ms(x: f64) -> SimDuration {
    SimDuration::from_millis_f64(x)
}

impl<'a> World<'a> {
    fn new(sc: &'a ResolvedScenario, arch: ArchKind, reqs: &'a [Request]) -> Self {
        let cfg = &sc.config;
        let topo = &sc.topology;
        let n = topo.nodes().len();
        let cloud = topo.cloud();
        let site_nodes: Vec<NodeId> = match arch {
            ArchKind::Edge => topo.edges().collect(),
            ArchKind::Centralized => vec![cloud],
        };
        let factor = match arch {
            ArchKind::Edge => 1,
            ArchKind::Centralized => cfg.topology.cloud.capacity_factor,
        };
        let owner: Vec<NodeId> = match arch {
            ArchKind::Edge => sc.edge_owner.clone(),
            ArchKind::Centralized => vec![cloud; sc.flights.len()],
        };

        let mut sites: Vec<Option<Site>> = (0..n).map(|_| None).collect();
        let mut stage_logs = BTreeMap::new();
        for &s in &site_nodes {
            let auto = &cfg.orchestration.autoscaler;
            let stages = StageKind::ALL
                .iter()
                .map(|&k| {
                    let st = cfg.pipeline.stages.get(k);
                    let instances = st.instances * factor;
                    stage_logs.insert(
                        (s, k),
                        StageLog {
                            instances: vec![(SimTime::ZERO, instances)],
                            ..StageLog::default()
                        },
                    );
                    StageQueue::new(k, instances, st.capacity.unwrap_or(cfg.pipeline.queue_capacity))
                })
                .collect();
            let scalers = StageKind::ALL
                .iter()
                .map(|k| {
                    (auto.enabled && auto.stages.contains(k)).then(|| ScalerState {
                        scaler: Autoscaler::new(auto.config(factor)),
                        pending: false,
                        last: (0, 0),
                    })
                })
                .collect();
            sites[s.index()] = Some(Site {
                stages,
                service: StageKind::ALL.iter().map(|&k| cfg.pipeline.stages.get(k).service).collect(),
                windows: WindowSet::new(sc.window),
                sync: CloudSyncBuffer::new(
                    s,
                    cloud,
                    cfg.pipeline.cloud_sync.header_bytes,
                    cfg.pipeline.cloud_sync.retry_limit,
                ),
                cache: EdgeCache::new(cfg.orchestration.cache.capacity, ms(cfg.orchestration.cache.ttl_ms)),
                scalers,
            });
        }

        let replica_nodes: Vec<NodeId> = match arch {
            ArchKind::Edge => topo.edges().chain(std::iter::once(cloud)).collect(),
            ArchKind::Centralized => vec![cloud],
        };
        let mut replicas: Vec<Option<ReplicaState>> = (0..n).map(|_| None).collect();
        let mut coordinators: Vec<Option<Coordinator>> = (0..n).map(|_| None).collect();
        let mut sync_peers = vec![Vec::new(); n];
        for &r in &replica_nodes {
            let part = owner
                .iter()
                .enumerate()
                .filter(|(_, o)| **o == r)
                .map(|(f, _)| f as u32);
            replicas[r.index()] = Some(ReplicaState::new(r, part));
            coordinators[r.index()] = Some(Coordinator::new(r, ms(cfg.inventory.commit_ms)));
            sync_peers[r.index()] = replica_nodes
                .iter()
                .copied()
                .filter(|&p| p != r)
                .filter(|&p| cfg.inventory.replicate_to_peers || p == cloud || r == cloud)
                .collect();
        }

        World {
            sc,
            arch,
            reqs,
            records: reqs
                .iter()
                .map(|r| RequestRecord {
                    kind: r.kind,
                    created_at: r.created_at,
                    site: None,
                    outcome: Outcome::Pending,
                    hops: Vec::new(),
                    ready_at: None,
                    done_at: None,
                })
                .collect(),
            sites,
            replicas,
            coordinators,
            owner,
            sync_peers,
            healthy: vec![true; n],
            net_rng: RngStream::new(cfg.seed, StreamId::Network),
            svc_rng: RngStream::new(cfg.seed, StreamId::ServiceTimes),
            metrics: MetricsCollector::new(ms(cfg.metrics.slo_ms)),
            stored: BTreeMap::new(),
            sync_lags: Vec::new(),
            reads: Vec::new(),
            ewma: (0..n).map(|_| DepthEwma::new(ms(cfg.orchestration.ewma_half_life_ms))).collect(),
            forecaster: ArrivalForecaster::new(
                n,
                ms(cfg.orchestration.forecast_period_ms),
                cfg.orchestration.forecast_window,
            ),
            routed: vec![0; n],
            net_messages: 0,
            net_drops: 0,
            next_record: reqs.len() as u64,
            writes: BTreeMap::new(),
            fetches: BTreeMap::new(),
            entry_tickets: BTreeMap::new(),
            stage_logs,
            replica_changed_at: BTreeMap::new(),
            last_write_at: None,
            max_message: BTreeMap::new(),
            in_service: BTreeMap::new(),
        }
    }

    fn site(&mut self, n: NodeId) -> &mut Site {
        self.sites[n.index()].as_mut().expect("event targets a serving site")
    }

    fn cloud(&self) -> NodeId {
        self.sc.topology.cloud()
    }

    fn drop_msg(&mut self, eng: &mut Engine<Action>, src: NodeId, dst: NodeId, msg: &Msg) {
        self.net_drops += 1;
        self.lost(msg);
        eng.schedule(SimDuration::ZERO, src, Action::Dropped { to: dst, what: msg.label() });
    }

    /// Client traffic is not retried: a lost request or response fails it.
    fn lost(&mut self, msg: &Msg) {
        if let Msg::Request(r) | Msg::Response(r) = *msg {
            self.finish(r, Outcome::Failed);
        }
    }

    /// Sends a message; unreachable endpoints and lossy links drop it.
    fn send(&mut self, eng: &mut Engine<Action>, src: NodeId, dst: NodeId, size: u64, msg: Msg) {
        self.net_messages += 1;
        let size = size.max(1);
        let m = self.max_message.entry((src, dst)).or_insert(0);
        *m = (*m).max(size);
        if !self.healthy[src.index()] || !self.healthy[dst.index()] {
            return self.drop_msg(eng, src, dst, &msg);
        }
        let envelope = Message {
            src,
            dst,
            size,
            payload: (),
            send_time: eng.now(),
        };
        match deliver(&self.sc.topology, &envelope, &mut self.net_rng) {
            Ok(Delivery::Arrives(at)) => {
                eng.schedule_at(at, dst, Action::Deliver { from: src, msg })
                    .expect("arrival is never in the past");
            }
            Ok(Delivery::Dropped) | Err(_) => self.drop_msg(eng, src, dst, &msg),
        }
    }

    fn finish(&mut self, r: u64, outcome: Outcome) {
        let rec = &mut self.records[r as usize];
        if rec.outcome != Outcome::Pending {
            return;
        }
        rec.outcome = outcome;
        let kind = rec.kind;
        match outcome {
            Outcome::Filtered => self.metrics.filtered(kind),
            Outcome::Shed => self.metrics.shed(kind),
            Outcome::Failed => self.metrics.failed(kind),
            Outcome::Completed | Outcome::Pending => unreachable!("completion goes through on_response"),
        }
    }

    // ---- requests and routing ----

    fn on_generate(&mut self, eng: &mut Engine<Action>, i: u64) {
        let now = eng.now();
        if let Some(next) = self.reqs.get(i as usize + 1) {
            eng.schedule_at(next.created_at, next.region, Action::Generate(i + 1))
                .expect("requests are time ordered");
        }
        let req = &self.reqs[i as usize];
        self.metrics.generated(req.kind);
        let topo = &self.sc.topology;
        let target = match self.arch {
            ArchKind::Centralized => topo.link(req.region, topo.cloud()).map(|_| topo.cloud()),
            ArchKind::Edge => {
                let policy = self.sc.config.orchestration.routing;
                let mut load = LoadSnapshot::default();
                match policy {
                    RoutingKind::Nearest => {}
                    RoutingKind::LeastLoaded => {
                        load.ewma_depth = vec![0.0; topo.nodes().len()];
                        for e in topo.edges() {
                            let depth = self.depth(e) as f64;
                            load.ewma_depth[e.index()] = self.ewma[e.index()].observe(depth, now);
                        }
                    }
                    RoutingKind::Predictive => {
                        load.forecast = vec![0.0; topo.nodes().len()];
                        for e in topo.edges() {
                            load.forecast[e.index()] = self.forecaster.forecast(e, now);
                        }
                    }
                }
                route(req.region, policy, topo, &self.healthy, &load)
            }
        };
        match target {
            None => self.finish(i, Outcome::Failed),
            Some(site) => {
                self.routed[site.index()] += 1;
                self.forecaster.record(site, now);
                self.records[i as usize].site = Some(site);
                self.send(eng, req.region, site, req.size, Msg::Request(i));
            }
        }
    }

    fn depth(&self, n: NodeId) -> usize {
        match &self.sites[n.index()] {
            Some(s) => s.stages.iter().map(|q| q.depth()).sum::<usize>() + s.windows.pending(),
            None => 0,
        }
    }

    // ---- stage chain ----

    fn enter_stage(&mut self, eng: &mut Engine<Action>, node: NodeId, stage: StageKind, rec: DataRecord) {
        let now = eng.now();
        match self.site(node).stages[stage.index()].arrive(rec, now) {
            Admit::Start(rec) => self.start_service(eng, node, stage, rec, now),
            Admit::Queued => {}
            Admit::Shed(rec) => {
                for m in rec.members {
                    self.finish(m, Outcome::Shed);
                }
            }
        }
    }

    fn start_service(&mut self, eng: &mut Engine<Action>, node: NodeId, stage: StageKind, rec: DataRecord, enter: SimTime) {
        let dist = self.sites[node.index()].as_ref().expect("site").service[stage.index()];
        let d = dist.sample(&mut self.svc_rng);
        let start = eng.now();
        self.in_service.insert((node, stage, rec.id), start);
        eng.schedule(
            d,
            node,
            Action::StageDone {
                stage,
                rec: Box::new(rec),
                enter,
                start,
            },
        );
    }

    fn on_stage_done(
        &mut self,
        eng: &mut Engine<Action>,
        node: NodeId,
        stage: StageKind,
        rec: DataRecord,
        enter: SimTime,
        start: SimTime,
    ) {
        let now = eng.now();
        self.in_service.remove(&(node, stage, rec.id));
        self.stage_logs
            .get_mut(&(node, stage))
            .expect("stage log")
            .visits
            .push(Visit { enter, start, exit: now });
        for &m in &rec.members {
            self.records[m as usize].hops.push(Hop { stage, enter, exit: now });
        }
        if let Some((next, enq)) = self.site(node).stages[stage.index()].finish(now) {
            self.start_service(eng, node, stage, next, enq);
        }
        match stage {
            StageKind::Ingestion => self.enter_stage(eng, node, StageKind::Filtering, rec),
            StageKind::Filtering => match filter(&rec) {
                FilterVerdict::Drop => {
                    for m in rec.members {
                        self.finish(m, Outcome::Filtered);
                    }
                }
                FilterVerdict::Pass => {
                    let kind = rec.kind;
                    match self.site(node).windows.push(rec) {
                        WindowPush::Opened(window) => {
                            let timeout = self.sc.window.timeout;
                            eng.schedule(timeout, node, Action::WindowTimeout { kind, window });
                        }
                        WindowPush::Joined => {}
                        WindowPush::Closed(records) => self.close_window(eng, node, records),
                    }
                }
            },
            StageKind::Aggregation => self.enter_stage(eng, node, StageKind::Analysis, rec),
            StageKind::Analysis => {
                let next = match self.sc.policy.decide(&rec) {
                    Verdict::Local => StageKind::TempStorage,
                    Verdict::Cloud => StageKind::CloudSync,
                };
                self.enter_stage(eng, node, next, rec);
            }
            StageKind::TempStorage => {
                for &m in &rec.members {
                    self.act(eng, node, m);
                }
            }
            StageKind::CloudSync => {
                let compression = self.sc.config.pipeline.compression;
                for &m in &rec.members {
                    let size = ((self.reqs[m as usize].size as f64 * compression).round() as u64).max(1);
                    let sr = SyncedRecord {
                        request: m,
                        ready_at: now,
                        size,
                    };
                    if node == self.cloud() {
                        self.sync_lags.push(SyncLag {
                            node,
                            ready_at: now,
                            stored_at: now,
                        });
                    } else {
                        self.site(node).sync.push(sr);
                    }
                }
                for &m in &rec.members {
                    self.act(eng, node, m);
                }
            }
        }
    }

    fn close_window(&mut self, eng: &mut Engine<Action>, node: NodeId, records: Vec<DataRecord>) {
        let id = self.next_record;
        self.next_record += 1;
        let rec = aggregate(records, self.sc.config.pipeline.compression, id);
        self.enter_stage(eng, node, StageKind::Aggregation, rec);
    }

    // ---- request actions after the final stage ----

    fn act(&mut self, eng: &mut Engine<Action>, site: NodeId, r: u64) {
        let req = &self.reqs[r as usize];
        match req.kind {
            RequestKind::AvailabilityCheck => self.read(eng, site, r),
            RequestKind::Confirmation => self.respond(eng, site, r),
            RequestKind::Booking | RequestKind::Cancellation => {
                let kind = if req.kind == RequestKind::Booking {
                    WriteKind::Book
                } else {
                    WriteKind::Cancel
                };
                let seat = SeatId::new(req.flight, req.seat);
                let wr = WriteRequest {
                    request: r,
                    seat,
                    kind,
                    entry: site,
                };
                let owner = self.owner[req.flight as usize];
                self.writes.insert(r, PendingWrite { req: wr, owner, attempt: 1 });
                if owner == site {
                    self.submit(eng, owner, wr);
                } else {
                    self.send_write(eng, site, r);
                }
            }
        }
    }

    fn send_write(&mut self, eng: &mut Engine<Action>, site: NodeId, r: u64) {
        let pw = &self.writes[&r];
        let (req, owner, attempt) = (pw.req, pw.owner, pw.attempt);
        let size = self.sc.config.inventory.delta_entry_bytes;
        self.send(eng, site, owner, size, Msg::Write { req, attempt });
        let timeout = ms(self.sc.config.inventory.retry_timeout_ms);
        eng.schedule(timeout, site, Action::WriteTimeout { request: r, attempt });
    }

    fn on_write_timeout(&mut self, eng: &mut Engine<Action>, site: NodeId, r: u64, attempt: u32) {
        let limit = self.sc.config.inventory.retry_limit;
        match self.writes.get_mut(&r) {
            Some(pw) if pw.attempt == attempt => {
                if attempt >= limit {
                    self.writes.remove(&r);
                    self.entry_tickets.insert(r, TicketOutcome::Timeout);
                    self.finish(r, Outcome::Failed);
                } else {
                    pw.attempt += 1;
                    self.send_write(eng, site, r);
                }
            }
            _ => {}
        }
    }

    fn submit(&mut self, eng: &mut Engine<Action>, owner: NodeId, req: WriteRequest) {
        let now = eng.now();
        let replica = self.replicas[owner.index()].as_mut().expect("owner replica");
        let coord = self.coordinators[owner.index()].as_mut().expect("owner coordinator");
        let before = replica.log().len();
        let events = coord.submit(replica, req, now);
        let changed = replica.log().len() != before;
        if changed {
            self.wrote(owner, now);
        }
        self.coord_events(eng, owner, events);
    }

    fn on_commit(&mut self, eng: &mut Engine<Action>, owner: NodeId, seat: SeatId) {
        let now = eng.now();
        let replica = self.replicas[owner.index()].as_mut().expect("owner replica");
        let coord = self.coordinators[owner.index()].as_mut().expect("owner coordinator");
        let before = replica.log().len();
        let events = coord.commit(replica, seat, now);
        if replica.log().len() != before {
            self.wrote(owner, now);
        }
        self.coord_events(eng, owner, events);
    }

    fn wrote(&mut self, node: NodeId, now: SimTime) {
        self.last_write_at = Some(now);
        self.replica_changed_at.insert(node, now);
    }

    fn coord_events(&mut self, eng: &mut Engine<Action>, owner: NodeId, events: Vec<CoordEvent>) {
        for ev in events {
            match ev {
                CoordEvent::CommitAt { seat, at } => {
                    eng.schedule_at(at, owner, Action::Commit { seat })
                        .expect("commit is in the future");
                }
                CoordEvent::Decided(t) => {
                    let entry = self.writes.get(&t.request).map(|w| w.req.entry).or(self.records[t.request as usize].site);
                    match entry {
                        Some(e) if e == owner => self.on_ticket(eng, e, t),
                        Some(e) => {
                            let size = self.sc.config.inventory.delta_entry_bytes;
                            self.send(eng, owner, e, size, Msg::Ticket(t));
                        }
                        None => {}
                    }
                }
            }
        }
    }

    fn on_ticket(&mut self, eng: &mut Engine<Action>, site: NodeId, t: BookingTicket) {
        if self.writes.remove(&t.request).is_none() {
            return;
        }
        self.entry_tickets.insert(t.request, t.outcome);
        match t.outcome {
            TicketOutcome::Timeout => self.finish(t.request, Outcome::Failed),
            _ => self.respond(eng, site, t.request),
        }
    }

    fn read(&mut self, eng: &mut Engine<Action>, site: NodeId, r: u64) {
        let now = eng.now();
        let flight = self.reqs[r as usize].flight;
        let owner = self.owner[flight as usize];
        let bound = self.sc.staleness_bound;
        let replica = self.replicas[site.index()].as_ref();
        let local = match replica {
            Some(rep) if rep.owns(flight) || owner == site => Some((SimDuration::ZERO, ReadSource::Owner)),
            Some(rep) if self.sc.config.inventory.replicate_to_peers => {
                let st = rep.staleness(flight, owner, now);
                (st <= bound).then_some((st, ReadSource::Replica))
            }
            _ => None,
        };
        let served = local.or_else(|| match self.site(site).cache.get(&flight, now) {
            CacheGet::Hit(as_of) => Some((now.since(as_of), ReadSource::Cache)),
            CacheGet::Miss => None,
        });
        match served {
            Some((staleness, source)) => {
                self.reads.push(ReadRecord {
                    request: r,
                    node: site,
                    flight,
                    at: now,
                    staleness,
                    source,
                });
                self.respond(eng, site, r);
            }
            None => {
                self.fetches.insert(
                    r,
                    PendingFetch {
                        flight,
                        owner,
                        attempt: 1,
                    },
                );
                self.send_fetch(eng, site, r);
            }
        }
    }

    fn send_fetch(&mut self, eng: &mut Engine<Action>, site: NodeId, r: u64) {
        let pf = &self.fetches[&r];
        let (flight, owner, attempt) = (pf.flight, pf.owner, pf.attempt);
        let size = self.sc.config.inventory.delta_entry_bytes;
        self.send(eng, site, owner, size, Msg::Fetch { request: r, flight });
        let timeout = ms(self.sc.config.inventory.retry_timeout_ms);
        eng.schedule(timeout, site, Action::FetchTimeout { request: r, attempt });
    }

    fn on_fetch_timeout(&mut self, eng: &mut Engine<Action>, site: NodeId, r: u64, attempt: u32) {
        let limit = self.sc.config.inventory.retry_limit;
        match self.fetches.get_mut(&r) {
            Some(pf) if pf.attempt == attempt => {
                if attempt >= limit {
                    self.fetches.remove(&r);
                    self.finish(r, Outcome::Failed);
                } else {
                    pf.attempt += 1;
                    self.send_fetch(eng, site, r);
                }
            }
            _ => {}
        }
    }

    fn respond(&mut self, eng: &mut Engine<Action>, site: NodeId, r: u64) {
        let now = eng.now();
        self.records[r as usize].ready_at = Some(now);
        let region = self.reqs[r as usize].region;
        let size = self.sc.config.pipeline.response_bytes;
        self.send(eng, site, region, size, Msg::Response(r));
    }

    fn on_response(&mut self, now: SimTime, r: u64) {
        let rec = &mut self.records[r as usize];
        if rec.outcome != Outcome::Pending {
            return;
        }
        rec.outcome = Outcome::Completed;
        rec.done_at = Some(now);
        let ready = rec.ready_at.expect("response follows processing");
        self.metrics
            .completed(rec.kind, ready.since(rec.created_at), now.since(rec.created_at));
    }

    // ---- messages ----

    fn on_deliver(&mut self, eng: &mut Engine<Action>, at: NodeId, from: NodeId, msg: Msg) {
        let now = eng.now();
        if !self.healthy[at.index()] {
            self.net_drops += 1;
            self.lost(&msg);
            return;
        }
        match msg {
            Msg::Request(r) => {
                let req = &self.reqs[r as usize];
                let rec = DataRecord::single(r, req.kind, at, req.created_at, req.relevant, req.size);
                self.enter_stage(eng, at, StageKind::Ingestion, rec);
            }
            Msg::Response(r) => match self.records[r as usize].outcome {
                Outcome::Pending => self.on_response(now, r),
                _ => {}
            },
            Msg::Write { req, .. } => self.submit(eng, at, req),
            Msg::Ticket(t) => self.on_ticket(eng, at, t),
            Msg::Fetch { request, flight } => {
                let size = self.sc.config.pipeline.response_bytes;
                self.send(eng, at, from, size, Msg::Snapshot { request, flight });
            }
            Msg::Snapshot { request, flight } => {
                if self.fetches.remove(&request).is_some() {
                    self.site(at).cache.put(flight, now, now);
                    self.reads.push(ReadRecord {
                        request,
                        node: at,
                        flight,
                        at: now,
                        staleness: SimDuration::ZERO,
                        source: ReadSource::Fetch,
                    });
                    self.respond(eng, at, request);
                }
            }
            Msg::Delta(d) => {
                let upto = d.upto;
                let rep = self.replicas[at.index()].as_mut().expect("replica");
                if rep.apply_delta(&d, now) > 0 {
                    self.replica_changed_at.insert(at, now);
                }
                let size = self.sc.config.pipeline.cloud_sync.header_bytes;
                self.send(eng, at, from, size, Msg::DeltaAck { upto });
            }
            Msg::DeltaAck { upto } => {
                self.replicas[at.index()].as_mut().expect("replica").ack(from, upto);
            }
            Msg::Batch(b) => {
                let key = (from, b.batch_id);
                if !self.stored.contains_key(&key) {
                    self.stored.insert(key, b.records.len());
                    for rec in &b.records {
                        self.sync_lags.push(SyncLag {
                            node: from,
                            ready_at: rec.ready_at,
                            stored_at: now,
                        });
                    }
                }
                let size = self.sc.config.pipeline.cloud_sync.header_bytes;
                self.send(eng, at, from, size, Msg::BatchAck { batch: b.batch_id });
            }
            Msg::BatchAck { batch } => {
                self.site(at).sync.ack(batch);
            }
        }
    }

    // ---- periodic work ----

    fn on_inventory_sync(&mut self, eng: &mut Engine<Action>, node: NodeId) {
        let now = eng.now();
        let interval = ms(self.sc.config.inventory.sync_interval_ms);
        eng.schedule(interval, node, Action::InventorySync);
        if !self.healthy[node.index()] {
            return;
        }
        let ttl = ms(self.sc.config.inventory.hold_ttl_ms);
        let expired = self.replicas[node.index()]
            .as_mut()
            .expect("replica")
            .expire_holds(now, ttl);
        if !expired.is_empty() {
            self.wrote(node, now);
        }
        let header = self.sc.config.pipeline.cloud_sync.header_bytes;
        let per_entry = self.sc.config.inventory.delta_entry_bytes;
        for peer in self.sync_peers[node.index()].clone() {
            let d = self.replicas[node.index()].as_ref().expect("replica").delta_for(peer, now);
            let size = header + per_entry * d.entries.len() as u64;
            self.send(eng, node, peer, size, Msg::Delta(Box::new(d)));
        }
    }

    fn on_cloud_flush(&mut self, eng: &mut Engine<Action>, node: NodeId) {
        let now = eng.now();
        let cfg = &self.sc.config.pipeline.cloud_sync;
        let (interval, timeout) = (ms(cfg.interval_ms), ms(cfg.retry_timeout_ms));
        eng.schedule(interval, node, Action::CloudFlush);
        if !self.healthy[node.index()] {
            return;
        }
        if let Some(m) = self.site(node).sync.flush(now) {
            let batch = m.payload.batch_id;
            self.send(eng, m.src, m.dst, m.size, Msg::Batch(Box::new(m.payload)));
            eng.schedule(timeout, node, Action::CloudTimeout { batch });
        }
    }

    fn on_cloud_timeout(&mut self, eng: &mut Engine<Action>, node: NodeId, batch: u64) {
        let now = eng.now();
        let timeout = ms(self.sc.config.pipeline.cloud_sync.retry_timeout_ms);
        match self.site(node).sync.on_timeout(batch, now) {
            SyncRetry::Resend(m) => {
                self.send(eng, m.src, m.dst, m.size, Msg::Batch(Box::new(m.payload)));
                eng.schedule(timeout, node, Action::CloudTimeout { batch });
            }
            SyncRetry::GiveUp(_) | SyncRetry::Done => {}
        }
    }

    fn on_autoscale(&mut self, eng: &mut Engine<Action>, node: NodeId) {
        let now = eng.now();
        let period = ms(self.sc.config.orchestration.autoscaler.evaluation_period_ms);
        let delay = ms(self.sc.config.orchestration.autoscaler.actuation_delay_ms);
        eng.schedule(period, node, Action::Autoscale);
        let site = self.site(node);
        for k in StageKind::ALL {
            let q = &mut site.stages[k.index()];
            let Some(s) = site.scalers[k.index()].as_mut() else {
                continue;
            };
            let (busy, inst) = q.integrals(now);
            let (db, di) = (busy - s.last.0, inst - s.last.1);
            s.last = (busy, inst);
            if s.pending || di == 0 {
                continue;
            }
            let util = db as f64 / di as f64;
            if let Some(n) = s.scaler.evaluate(q.instances(), util) {
                s.pending = true;
                eng.schedule(delay, node, Action::Resize { stage: k, instances: n });
            }
        }
    }

    fn on_resize(&mut self, eng: &mut Engine<Action>, node: NodeId, stage: StageKind, n: u32) {
        let now = eng.now();
        let site = self.site(node);
        let started = site.stages[stage.index()].resize(n, now);
        if let Some(s) = site.scalers[stage.index()].as_mut() {
            s.pending = false;
        }
        self.stage_logs
            .get_mut(&(node, stage))
            .expect("stage log")
            .instances
            .push((now, n));
        for (rec, enq) in started {
            self.start_service(eng, node, stage, rec, enq);
        }
    }

    fn handle(&mut self, eng: &mut Engine<Action>, ev: Event<Action>) {
        let node = ev.target;
        match ev.payload {
            Action::Generate(i) => self.on_generate(eng, i),
            Action::Deliver { from, msg } => self.on_deliver(eng, node, from, msg),
            Action::StageDone { stage, rec, enter, start } => self.on_stage_done(eng, node, stage, *rec, enter, start),
            Action::WindowTimeout { kind, window } => {
                if let Some(records) = self.site(node).windows.expire(kind, window) {
                    self.close_window(eng, node, records);
                }
            }
            Action::Commit { seat } => self.on_commit(eng, node, seat),
            Action::WriteTimeout { request, attempt } => self.on_write_timeout(eng, node, request, attempt),
            Action::FetchTimeout { request, attempt } => self.on_fetch_timeout(eng, node, request, attempt),
            Action::CloudFlush => self.on_cloud_flush(eng, node),
            Action::CloudTimeout { batch } => self.on_cloud_timeout(eng, node, batch),
            Action::InventorySync => self.on_inventory_sync(eng, node),
            Action::Autoscale => self.on_autoscale(eng, node),
            Action::Resize { stage, instances } => self.on_resize(eng, node, stage, instances),
            Action::NodeDown => self.healthy[node.index()] = false,
            Action::NodeUp => self.healthy[node.index()] = true,
            Action::Dropped { .. } => {}
        }
    }

    fn start(&mut self, eng: &mut Engine<Action>) {
        let cfg = &self.sc.config;
        if let Some(first) = self.reqs.first() {
            eng.schedule_at(first.created_at, first.region, Action::Generate(0))
                .expect("clock at zero");
        }
        let nodes: Vec<NodeId> = self.sc.topology.nodes().iter().map(|n| n.id).collect();
        for &n in &nodes {
            if self.replicas[n.index()].is_some() && !self.sync_peers[n.index()].is_empty() {
                eng.schedule(ms(cfg.inventory.sync_interval_ms), n, Action::InventorySync);
            }
            if self.sites[n.index()].is_some() {
                if n != self.cloud() {
                    eng.schedule(ms(cfg.pipeline.cloud_sync.interval_ms), n, Action::CloudFlush);
                }
                if cfg.orchestration.autoscaler.enabled {
                    eng.schedule(
                        ms(cfg.orchestration.autoscaler.evaluation_period_ms),
                        n,
                        Action::Autoscale,
                    );
                }
            }
        }
        if self.arch == ArchKind::Edge {
            for &(node, down, up) in &self.sc.failures {
                eng.schedule_at(down, node, Action::NodeDown).expect("future");
                if let Some(up) = up {
                    eng.schedule_at(up, node, Action::NodeUp).expect("future");
                }
            }
        }
    }

    fn into_output(mut self, eng: &mut Engine<Action>, horizon: SimTime) -> RunOutput {
        let cfg = &self.sc.config;
        let topo = &self.sc.topology;
        let mut report = ScenarioReport::new(
            &cfg.name,
            self.arch,
            cfg.seed,
            cfg.config_hash(),
            cfg.workload_hash(),
        );
        let mut resource_us: u128 = 0;
        for n in topo.nodes() {
            let Some(site) = self.sites[n.id.index()].as_mut() else {
                continue;
            };
            for q in site.stages.iter_mut() {
                let (busy, inst) = q.integrals(horizon);
                resource_us += inst;
                let p = format!("stage.{}.{}", n.name, q.kind());
                let c = q.counters;
                report.detail(format!("{p}.arrived"), c.arrived);
                report.detail(format!("{p}.completed"), c.completed);
                report.detail(format!("{p}.shed"), c.shed);
                report.detail(format!("{p}.instances_final"), q.instances());
                let util = if inst > 0 { busy as f64 / inst as f64 } else { 0.0 };
                report.detail(format!("{p}.utilization"), crate::metrics::fmt_f(util));
            }
            if self.arch == ArchKind::Edge {
                report.detail(format!("routing.{}", n.name), self.routed[n.id.index()]);
                report.detail(format!("cache.{}.hits", n.name), site.cache.hits);
                report.detail(format!("cache.{}.misses", n.name), site.cache.misses);
            }
        }
        report.resource_seconds = resource_us as f64 / 1e6;
        for ((node, stage), log) in &self.stage_logs {
            if log.instances.len() > 1 {
                let series: Vec<String> = log.instances.iter().map(|(t, n)| format!("{}:{n}", t.0)).collect();
                report.detail(format!("instances.{}.{}", topo.name(*node), stage), series.join(";"));
            }
        }

        let mut tickets: Vec<BookingTicket> = self
            .coordinators
            .iter()
            .flatten()
            .flat_map(|c| c.ledger().values().copied())
            .collect();
        tickets.sort_by_key(|t| (t.decided_at, t.request));
        for outcome in [
            TicketOutcome::Confirmed,
            TicketOutcome::RejectedTaken,
            TicketOutcome::Timeout,
            TicketOutcome::Cancelled,
            TicketOutcome::RejectedNotBooked,
        ] {
            let n = tickets.iter().filter(|t| t.outcome == outcome).count();
            report.detail(format!("bookings.{}", outcome.as_str().to_lowercase()), n);
        }
        let entry_timeouts = self.entry_tickets.values().filter(|o| **o == TicketOutcome::Timeout).count();
        report.detail("bookings.entry_timeouts", entry_timeouts);

        for src in [ReadSource::Owner, ReadSource::Replica, ReadSource::Cache, ReadSource::Fetch] {
            let n = self.reads.iter().filter(|r| r.source == src).count();
            report.detail(format!("reads.{}", src.as_str()), n);
        }
        let max_stale = self.reads.iter().map(|r| r.staleness).max().unwrap_or_default();
        report.detail("reads.max_staleness_ms", crate::metrics::fmt_f(max_stale.as_millis_f64()));
        report.detail(
            "reads.staleness_bound_ms",
            crate::metrics::fmt_f(self.sc.staleness_bound.as_millis_f64()),
        );

        let unsynced: usize = self.sites.iter().flatten().map(|s| s.sync.unsynced.len()).sum();
        let max_lag = self.sync_lags.iter().map(|l| l.stored_at.since(l.ready_at)).max().unwrap_or_default();
        report.detail("cloud_sync.stored_records", self.sync_lags.len());
        report.detail("cloud_sync.unsynced_batches", unsynced);
        report.detail(
            "cloud_sync.messages",
            self.sites.iter().flatten().map(|s| s.sync.messages_sent).sum::<u64>(),
        );
        report.detail("cloud_sync.max_lag_ms", crate::metrics::fmt_f(max_lag.as_millis_f64()));
        report.detail("network.messages", self.net_messages);
        report.detail("network.dropped", self.net_drops);
        report.detail("engine.events", eng.processed());

        for (f, spec) in self.sc.flights.iter().enumerate() {
            let owner = self.owner[f];
            let rep = self.replicas[owner.index()].as_ref().expect("owner replica");
            let snap = rep.snapshot(f as u32, spec.seats);
            let booked = snap
                .iter()
                .filter(|s| **s == crate::inventory::SeatStatus::Booked)
                .count();
            report.detail(format!("seats.{}.booked", spec.name), booked);
        }

        let horizon_s = horizon.as_secs_f64();
        let weights = SatisfactionWeights {
            slo: cfg.metrics.slo_weight,
            completion: cfg.metrics.completion_weight,
        };
        let metrics = std::mem::replace(&mut self.metrics, MetricsCollector::new(SimDuration::ZERO));
        metrics.finish(horizon_s, weights, &mut report);

        let mut stage_logs = std::mem::take(&mut self.stage_logs);
        for n in topo.nodes() {
            if let Some(site) = &self.sites[n.id.index()] {
                for q in &site.stages {
                    let log = stage_logs.get_mut(&(n.id, q.kind())).expect("stage log");
                    log.queued = q.waiting();
                }
            }
        }
        for ((node, stage, _), start) in &self.in_service {
            stage_logs.get_mut(&(*node, *stage)).expect("stage log").in_service.push(*start);
        }

        RunOutput {
            report,
            trace: eng.take_trace(),
            audit: AuditLog {
                arch: self.arch,
                horizon,
                requests: self.records,
                stages: stage_logs,
                tickets,
                entry_tickets: self.entry_tickets,
                reads: self.reads,
                staleness_bound: self.sc.staleness_bound,
                replicas: self.replicas.into_iter().flatten().collect(),
                replica_changed_at: self.replica_changed_at,
                last_write_at: self.last_write_at,
                sync_lags: self.sync_lags,
                unsynced_batches: unsynced,
                max_message: self.max_message,
            },
        }
    }
}

/// End of simulated time: the workload duration plus the drain period.
pub fn horizon(sc: &ResolvedScenario) -> SimTime {
    SimTime::ZERO + sc.profile.duration + ms(sc.config.metrics.drain_s * 1_000.0)
}

/// Runs one architecture over a pregenerated request stream.
pub fn run_with(sc: &ResolvedScenario, arch: ArchKind, reqs: &[Request], opts: RunOptions) -> RunOutput {
    let mut eng: Engine<Action> = Engine::new();
    if opts.trace {
        eng = eng.with_trace(sc.topology.nodes().iter().map(|n| n.name.clone()).collect());
    }
    let mut world = World::new(sc, arch, reqs);
    world.start(&mut eng);
    let horizon = horizon(sc);
    eng.run_until(horizon, &mut |e: &mut Engine<Action>, ev| world.handle(e, ev));
    world.into_output(&mut eng, horizon)
}

pub fn run(sc: &ResolvedScenario, arch: ArchKind, opts: RunOptions) -> RunOutput {
    let reqs = workload(sc);
    run_with(sc, arch, &reqs, opts)
}
