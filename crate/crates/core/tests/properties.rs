mod common;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

use edgesim_core::audit::{audit, Status};
use edgesim_core::engine::{Engine, Event, NodeId, SimDuration, SimTime, TraceLabel};
use edgesim_core::inventory::{ReplicaState, SeatId, SeatStatus, VersionedSeatState};
use edgesim_core::metrics::LatencySummary;
use edgesim_core::network::{deliver, Delivery, LinkClass, LinkKind, Message, NodeRole, Topology};
use edgesim_core::orchestration::{desired_instances, route, AutoscalerConfig, CacheGet, EdgeCache, LoadSnapshot};
use edgesim_core::pipeline::{Admit, DataRecord, StageKind, StageQueue, WindowPolicy, WindowPush, WindowSet};
use edgesim_core::scenario::{run, RunOptions};
use edgesim_core::{ArchKind, DurationDist, RequestKind, RngStream, RoutingKind, StreamId};

fn cfg(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..Config::default()
    }
}

#[derive(Debug, Clone)]
struct Ev(u64);

impl TraceLabel for Ev {
    fn trace_label(&self) -> String {
        format!("ev {}", self.0)
    }
}

const STATUSES: [SeatStatus; 4] = [
    SeatStatus::Available,
    SeatStatus::Held,
    SeatStatus::Booked,
    SeatStatus::CancelledTombstone,
];

/// Replays a random history of local writes and pairwise merges across
/// three replicas of one seat.
fn history(ops: &[(u8, bool, u8, u8)]) -> Vec<VersionedSeatState> {
    let mut s = vec![VersionedSeatState::initial(); 3];
    for (t, &(node, is_write, a, b)) in ops.iter().enumerate() {
        let n = (node % 3) as usize;
        if is_write {
            let status = STATUSES[(a % 4) as usize];
            s[n] = s[n].write(NodeId(n as u32 + 1), SimTime(t as u64 * (b as u64 % 3)), status, Some(b as u64));
        } else {
            let o = (a % 3) as usize;
            s[n] = s[n].merge(&s[o]);
        }
    }
    s
}

fn ops() -> impl Strategy<Value = Vec<(u8, bool, u8, u8)>> {
    prop::collection::vec(any::<(u8, bool, u8, u8)>(), 0..24)
}

proptest! {
    #![proptest_config(cfg(2_000))]

    #[test]
    fn merge_is_a_join(h in ops()) {
        let s = history(&h);
        let (a, b, c) = (&s[0], &s[1], &s[2]);
        prop_assert_eq!(a.merge(b), b.merge(a));
        prop_assert_eq!(a.merge(b).merge(c), a.merge(&b.merge(c)));
        prop_assert_eq!(a.merge(a), a.clone());
    }

    #[test]
    fn booked_survives_merge_with_anything_not_causally_later(h in ops(), other in ops()) {
        let s = history(&h);
        let t = history(&other);
        for x in &s {
            if x.status() != SeatStatus::Booked {
                continue;
            }
            for y in &t {
                // Only a causally later write (an explicit cancellation
                // path) may supersede BOOKED.
                let superseded = x
                    .siblings()
                    .iter()
                    .filter(|(_, v)| v.status == SeatStatus::Booked)
                    .all(|(v, _)| y.siblings().iter().any(|(w, _)| v.before(w)));
                if !superseded {
                    prop_assert_eq!(x.merge(y).status(), SeatStatus::Booked);
                    prop_assert_eq!(y.merge(x).status(), SeatStatus::Booked);
                }
            }
        }
    }

    #[test]
    fn replica_log_replay_matches_live_state(steps in prop::collection::vec((0u32..4, 0u8..4, any::<bool>()), 1..60)) {
        let a = NodeId(1);
        let b = NodeId(2);
        let mut ra = ReplicaState::new(a, [0]);
        let mut rb = ReplicaState::new(b, [1]);
        for (i, &(seat, st, sync)) in steps.iter().enumerate() {
            let now = SimTime(i as u64 * 10);
            let seat_a = SeatId::new(0, seat);
            let next = STATUSES[st as usize];
            let _ = ra.transition(seat_a, next, Some(i as u64), now);
            let _ = rb.transition(SeatId::new(1, seat), next, Some(i as u64), now);
            if sync {
                let d = ra.delta_for(b, now);
                rb.apply_delta(&d, now);
                rb.ack(a, d.upto);
                let d = rb.delta_for(a, now);
                ra.apply_delta(&d, now);
            }
            prop_assert_eq!(&ReplicaState::replay(ra.log()), ra.seats());
            prop_assert_eq!(&ReplicaState::replay(rb.log()), rb.seats());
        }
    }

    #[test]
    fn engine_pops_in_time_order_and_never_into_the_past(
        delays in prop::collection::vec((0u64..1_000, 0u8..3), 1..200),
        horizon in 0u64..3_000,
    ) {
        let mut eng: Engine<Ev> = Engine::new();
        for (i, &(d, _)) in delays.iter().enumerate() {
            eng.schedule(SimDuration(d), NodeId(0), Ev(i as u64));
        }
        let mut seen: Vec<(SimTime, u64)> = Vec::new();
        let mut scheduled_by_handler: Vec<(SimTime, SimTime)> = Vec::new();
        let delays2 = delays.clone();
        let mut handler = |e: &mut Engine<Ev>, ev: Event<Ev>| {
            seen.push((ev.fire_at, ev.seq));
            let k = ev.payload.0 as usize;
            if k < delays2.len() && delays2[k].1 == 0 {
                let at = e.now() + SimDuration(delays2[k].0 / 2);
                e.schedule_at(at, NodeId(0), Ev(u64::MAX)).unwrap();
                scheduled_by_handler.push((e.now(), at));
            }
        };
        let n = eng.run_until(SimTime(horizon), &mut handler);
        prop_assert!(seen.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(seen.iter().all(|(t, _)| t.0 <= horizon));
        prop_assert!(scheduled_by_handler.iter().all(|(now, at)| at >= now));
        // Everything scheduled at or before the horizon was processed.
        let due = delays.iter().filter(|(d, _)| *d <= horizon).count()
            + scheduled_by_handler.iter().filter(|(_, at)| at.0 <= horizon).count();
        prop_assert_eq!(n as usize, due);
        prop_assert_eq!(eng.now(), SimTime(horizon));
    }

    #[test]
    fn arrival_not_before_send(
        lat in 0.0f64..50.0,
        spread in 0.0f64..20.0,
        bw in 1u64..1_000_000_000,
        size in 1u64..1_000_000,
        send in 0u64..1_000_000,
        seed in any::<u64>(),
    ) {
        let mut b = Topology::builder();
        let x = b.node("X", NodeRole::Region, (0.0, 0.0));
        let y = b.node("Y", NodeRole::Cloud, (1.0, 0.0));
        let latency = if spread == 0.0 {
            DurationDist::Fixed { ms: lat }
        } else {
            DurationDist::Uniform { min_ms: lat, max_ms: lat + spread }
        };
        let c = b.class(LinkClass::new("l", LinkKind::Wan, latency, bw, 0.0).unwrap());
        b.link(x, y, c);
        let topo = b.build().unwrap();
        let mut rng = RngStream::new(seed, StreamId::Network);
        let msg = Message { src: x, dst: y, size, payload: (), send_time: SimTime(send) };
        match deliver(&topo, &msg, &mut rng).unwrap() {
            Delivery::Arrives(at) => {
                prop_assert!(at >= msg.send_time);
                // Serialization of a positive size is never zero.
                prop_assert!(at > msg.send_time);
            }
            Delivery::Dropped => prop_assert!(false, "lossless link dropped"),
        }
    }

    #[test]
    fn stage_queue_is_fifo_and_bounded(
        capacity in 0usize..8,
        instances in 1u32..4,
        ops in prop::collection::vec(any::<bool>(), 1..200),
    ) {
        let mut q: StageQueue<u64> = StageQueue::new(StageKind::Analysis, instances, capacity);
        let mut next = 0u64;
        let mut started = Vec::new();
        let mut shed = 0u64;
        for (i, arrive) in ops.into_iter().enumerate() {
            let now = SimTime(i as u64);
            if arrive {
                match q.arrive(next, now) {
                    Admit::Start(x) => started.push(x),
                    Admit::Queued => {}
                    Admit::Shed(_) => shed += 1,
                }
                next += 1;
            } else if q.busy() > 0 {
                if let Some((x, _)) = q.finish(now) {
                    started.push(x);
                }
            }
            prop_assert!(q.waiting() <= capacity);
            prop_assert!(q.busy() <= instances);
            // Work conservation: nothing waits while an instance is idle.
            prop_assert!(q.waiting() == 0 || q.busy() == instances);
        }
        prop_assert!(started.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(q.counters.arrived, next);
        prop_assert_eq!(q.counters.shed, shed);
        prop_assert_eq!(q.counters.started + q.counters.shed + q.waiting() as u64, next);
    }

    #[test]
    fn windows_partition_their_records(
        max_count in 1usize..6,
        kinds in prop::collection::vec(0usize..4, 1..100),
        expire_every in 1usize..10,
    ) {
        let mut w = WindowSet::new(WindowPolicy { max_count, timeout: SimDuration(1) });
        let mut out: Vec<u64> = Vec::new();
        let mut open: Vec<(RequestKind, u64)> = Vec::new();
        for (i, &k) in kinds.iter().enumerate() {
            let kind = RequestKind::ALL[k];
            let rec = DataRecord::single(i as u64, kind, NodeId(1), SimTime(i as u64), true, 10);
            match w.push(rec) {
                WindowPush::Opened(id) => open.push((kind, id)),
                WindowPush::Joined => {}
                WindowPush::Closed(rs) => {
                    prop_assert!(rs.len() <= max_count);
                    prop_assert!(rs.iter().all(|r| r.kind == kind));
                    out.extend(rs.iter().map(|r| r.id));
                }
            }
            if i % expire_every == 0 {
                for (kind, id) in open.drain(..) {
                    if let Some(rs) = w.expire(kind, id) {
                        out.extend(rs.iter().map(|r| r.id));
                    }
                }
            }
        }
        for (kind, id) in open.drain(..) {
            if let Some(rs) = w.expire(kind, id) {
                out.extend(rs.iter().map(|r| r.id));
            }
        }
        out.sort_unstable();
        let all: Vec<u64> = (0..kinds.len() as u64).collect();
        prop_assert_eq!(out, all);
        prop_assert_eq!(w.pending(), 0);
    }

    #[test]
    fn cache_never_returns_expired_or_overflows(
        capacity in 1usize..6,
        ttl in 1u64..50,
        ops in prop::collection::vec((0u32..10, any::<bool>(), 0u64..20), 1..200),
    ) {
        let mut c: EdgeCache<u32, SimTime> = EdgeCache::new(capacity, SimDuration(ttl));
        let mut now = SimTime(0);
        for (key, put, dt) in ops {
            now = now + SimDuration(dt);
            if put {
                c.put(key, now, now);
            } else if let CacheGet::Hit(stored_at) = c.get(&key, now) {
                prop_assert!(now.since(stored_at) <= SimDuration(ttl));
            }
            prop_assert!(c.len() <= capacity);
        }
    }

    #[test]
    fn autoscaler_target_stays_in_bounds(
        current in 1u32..20,
        util in 0.0f64..1.0,
        target in 0.05f64..0.95,
        min in 1u32..5,
        extra in 0u32..10,
    ) {
        let cfg = AutoscalerConfig {
            target_utilization: target,
            min_instances: min,
            max_instances: min + extra,
            ..AutoscalerConfig::default()
        };
        let n = desired_instances(current, util, &cfg);
        prop_assert!(n >= cfg.min_instances && n <= cfg.max_instances);
        // At the desired count the same busy work stays at or under target.
        if n < cfg.max_instances && (util / target - 1.0).abs() > cfg.tolerance {
            prop_assert!(current as f64 * util / n as f64 <= target + 1e-6);
        }
    }

    #[test]
    fn routing_is_total_over_healthy_nodes(mask in prop::collection::vec(any::<bool>(), 4), policy in 0usize..3) {
        let sc = common::parse(common::FOUR_REGIONS).resolve().unwrap();
        let topo = &sc.topology;
        let mut healthy = vec![true; topo.nodes().len()];
        for (e, up) in topo.edges().zip(&mask) {
            healthy[e.index()] = *up;
        }
        let policy = [RoutingKind::Nearest, RoutingKind::LeastLoaded, RoutingKind::Predictive][policy];
        let load = LoadSnapshot {
            ewma_depth: (0..healthy.len()).map(|i| (i * 7 % 5) as f64).collect(),
            forecast: (0..healthy.len()).map(|i| (i * 3 % 4) as f64).collect(),
        };
        for region in topo.regions() {
            let reachable = topo
                .edges()
                .any(|e| healthy[e.index()] && topo.link(region, e).is_some());
            match route(region, policy, topo, &healthy, &load) {
                Some(n) => {
                    prop_assert!(healthy[n.index()]);
                    prop_assert!(topo.link(region, n).is_some());
                    prop_assert_eq!(route(region, policy, topo, &healthy, &load), Some(n));
                }
                None => prop_assert!(!reachable),
            }
        }
    }

    #[test]
    fn percentiles_are_ordered(mut xs in prop::collection::vec(0u64..10_000_000, 1..500)) {
        let s = LatencySummary::from_micros(&mut xs).unwrap();
        prop_assert!(s.p50_ms <= s.p95_ms && s.p95_ms <= s.p99_ms && s.p99_ms <= s.max_ms);
        prop_assert!(s.mean_ms <= s.max_ms);
    }
}

proptest! {
    #![proptest_config(cfg(24))]

    /// Whole-run invariants over randomized small scenarios.
    #[test]
    fn runs_satisfy_every_audited_invariant(
        seed in any::<u64>(),
        rate in 50.0f64..600.0,
        window in 1usize..12,
        irrelevant in 0.0f64..0.5,
        affinity in 0.0f64..1.0,
        policy in 0usize..3,
        capacity in 5usize..200,
        edge in any::<bool>(),
    ) {
        let mut c = common::parse(common::FOUR_REGIONS);
        c.seed = seed;
        c.workload.base_rate = rate;
        c.workload.irrelevant_fraction = irrelevant;
        c.workload.home_affinity = affinity;
        c.pipeline.window_count = window;
        c.pipeline.queue_capacity = capacity;
        c.orchestration.routing = [RoutingKind::Nearest, RoutingKind::LeastLoaded, RoutingKind::Predictive][policy];
        let sc = c.resolve().unwrap();
        let arch = if edge { ArchKind::Edge } else { ArchKind::Centralized };
        let out = run(&sc, arch, RunOptions::default());
        let a = audit(&sc, &out);
        prop_assert!(a.passed(), "{}", a);
        prop_assert_eq!(a.get("convergence").map(|c| c.status), Some(Status::Pass));
        let t = out.report.total();
        prop_assert_eq!(t.completed + t.filtered + t.shed + t.failed + t.in_flight(), t.generated);
        for s in out.report.latency.values().chain(out.report.response_time.values()) {
            prop_assert!(s.p50_ms <= s.p95_ms && s.p95_ms <= s.p99_ms && s.p99_ms <= s.max_ms);
        }
        if let Some(s) = out.report.satisfaction {
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }
}
