use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use edgesim_bench::{Tick, SMALL_SCENARIO};
use edgesim_core::experiment::run_experiment;
use edgesim_core::scenario::{run, RunOptions};
use edgesim_core::{
    ArchKind, Engine, Event, NodeId, ScenarioConfig, SeatStatus, SimDuration, SimTime, VersionedSeatState,
};

fn engine(c: &mut Criterion) {
    const N: u64 = 100_000;
    let mut g = c.benchmark_group("engine");
    g.throughput(Throughput::Elements(N));
    g.bench_function("self_rescheduling_events", |b| {
        b.iter(|| {
            let mut eng: Engine<Tick> = Engine::new();
            for i in 0..64 {
                eng.schedule(SimDuration(i), NodeId(0), Tick(i));
            }
            let mut left = N;
            let mut h = |e: &mut Engine<Tick>, ev: Event<Tick>| {
                if left > 0 {
                    left -= 1;
                    e.schedule(SimDuration(ev.payload.0 % 97 + 1), NodeId(0), Tick(ev.payload.0 + 1));
                }
            };
            eng.run_until(SimTime(u64::MAX / 2), &mut h)
        })
    });
    g.finish();
}

fn merge(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut states: Vec<VersionedSeatState> = vec![VersionedSeatState::initial(); 4];
    for t in 0..64u64 {
        let n = rng.random_range(0..4);
        if rng.random_bool(0.5) {
            let status = match rng.random_range(0..3) {
                0 => SeatStatus::Held,
                1 => SeatStatus::Booked,
                _ => SeatStatus::Available,
            };
            states[n] = states[n].write(NodeId(n as u32), SimTime(t), status, Some(t));
        } else {
            let o = rng.random_range(0..4);
            states[n] = states[n].merge(&states[o]);
        }
    }
    c.bench_function("crdt_merge_pairwise", |b| {
        b.iter(|| {
            let mut acc = states[0].clone();
            for s in &states[1..] {
                acc = acc.merge(s);
            }
            acc
        })
    });
}

fn scenario(c: &mut Criterion) {
    let cfg = ScenarioConfig::parse(SMALL_SCENARIO).expect("bench scenario parses");
    let sc = cfg.resolve().expect("bench scenario resolves");
    let mut g = c.benchmark_group("scenario");
    g.sample_size(20);
    g.bench_function("small_edge_run", |b| {
        b.iter(|| run(&sc, ArchKind::Edge, RunOptions::default()))
    });
    g.bench_function("small_experiment_both", |b| {
        b.iter(|| run_experiment(&cfg, RunOptions::default()).expect("runs"))
    });
    g.finish();
}

criterion_group!(benches, engine, merge, scenario);
criterion_main!(benches);
