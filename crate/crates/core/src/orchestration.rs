//! Request routing, the edge cache and stage autoscaling.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::engine::{NodeId, SimDuration, SimTime};
use crate::network::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RoutingKind {
    Nearest,
    LeastLoaded,
    Predictive,
}

/// Per-node load figures, indexed by `NodeId::index`.
#[derive(Debug, Clone, Default)]
pub struct LoadSnapshot {
    pub ewma_depth: Vec<f64>,
    pub forecast: Vec<f64>,
}

impl LoadSnapshot {
    fn at(v: &[f64], n: NodeId) -> f64 {
        v.get(n.index()).copied().unwrap_or(0.0)
    }
}

/// Picks the serving edge node for a request from `region`. Only healthy
/// nodes linked to the region are candidates; ties fall back to proximity
/// order. `None` means no healthy node is reachable.
pub fn route(
    region: NodeId,
    policy: RoutingKind,
    topology: &Topology,
    healthy: &[bool],
    load: &LoadSnapshot,
) -> Option<NodeId> {
    let candidates: Vec<NodeId> = topology
        .edges_by_proximity(region)
        .into_iter()
        .filter(|n| healthy.get(n.index()).copied().unwrap_or(false))
        .collect();
    let key = |n: NodeId| match policy {
        RoutingKind::Nearest => 0.0,
        RoutingKind::LeastLoaded => LoadSnapshot::at(&load.ewma_depth, n),
        RoutingKind::Predictive => LoadSnapshot::at(&load.forecast, n),
    };
    candidates
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| key(**a).total_cmp(&key(**b)).then(ia.cmp(ib)))
        .map(|(_, n)| *n)
}

/// Exponentially weighted queue depth with a half-life in virtual time.
#[derive(Debug, Clone)]
pub struct DepthEwma {
    half_life: SimDuration,
    value: f64,
    last: Option<SimTime>,
}

impl DepthEwma {
    pub fn new(half_life: SimDuration) -> Self {
        DepthEwma {
            half_life,
            value: 0.0,
            last: None,
        }
    }

    pub fn observe(&mut self, depth: f64, now: SimTime) -> f64 {
        match self.last {
            None => self.value = depth,
            Some(prev) => {
                let dt = now.since(prev).as_micros() as f64;
                let hl = self.half_life.as_micros().max(1) as f64;
                let alpha = 1.0 - 0.5f64.powf(dt / hl);
                self.value += alpha * (depth - self.value);
            }
        }
        self.last = Some(now);
        self.value
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

/// Arithmetic mean over the last `window` observations.
#[derive(Debug, Clone)]
pub struct MovingAverage {
    window: usize,
    history: VecDeque<f64>,
}

impl MovingAverage {
    pub fn new(window: usize) -> Self {
        MovingAverage {
            window: window.max(1),
            history: VecDeque::new(),
        }
    }

    pub fn push(&mut self, x: f64) {
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(x);
    }

    pub fn forecast(&self) -> Option<f64> {
        if self.history.is_empty() {
            None
        } else {
            Some(self.history.iter().sum::<f64>() / self.history.len() as f64)
        }
    }
}

/// Forecast of per-node arrivals over the next period, from a moving average
/// of past period counts.
#[derive(Debug, Clone)]
pub struct ArrivalForecaster {
    period: SimDuration,
    period_start: SimTime,
    current: Vec<u64>,
    averages: Vec<MovingAverage>,
}

impl ArrivalForecaster {
    pub fn new(nodes: usize, period: SimDuration, window: usize) -> Self {
        ArrivalForecaster {
            period,
            period_start: SimTime::ZERO,
            current: vec![0; nodes],
            averages: vec![MovingAverage::new(window); nodes],
        }
    }

    fn roll(&mut self, now: SimTime) {
        let p = self.period.as_micros().max(1);
        while now.since(self.period_start).as_micros() >= p {
            for (c, ma) in self.current.iter_mut().zip(&mut self.averages) {
                ma.push(*c as f64);
                *c = 0;
            }
            self.period_start += self.period;
        }
    }

    pub fn record(&mut self, node: NodeId, now: SimTime) {
        self.roll(now);
        self.current[node.index()] += 1;
    }

    pub fn forecast(&mut self, node: NodeId, now: SimTime) -> f64 {
        self.roll(now);
        self.averages[node.index()].forecast().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CacheGet<V> {
    Hit(V),
    Miss,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CachePut<K> {
    Stored,
    StoredWithEviction(K),
}

#[derive(Debug, Clone)]
struct CacheEntry<V> {
    value: V,
    inserted_at: SimTime,
    tick: u64,
}

/// LRU cache whose entries are never served past `ttl`.
#[derive(Debug, Clone)]
pub struct EdgeCache<K: Ord + Clone, V: Clone> {
    capacity: usize,
    ttl: SimDuration,
    entries: BTreeMap<K, CacheEntry<V>>,
    recency: BTreeMap<u64, K>,
    tick: u64,
    pub hits: u64,
    pub misses: u64,
}

impl<K: Ord + Clone, V: Clone> EdgeCache<K, V> {
    pub fn new(capacity: usize, ttl: SimDuration) -> Self {
        EdgeCache {
            capacity,
            ttl,
            entries: BTreeMap::new(),
            recency: BTreeMap::new(),
            tick: 0,
            hits: 0,
            misses: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ttl(&self) -> SimDuration {
        self.ttl
    }

    fn bump(&mut self) -> u64 {
        self.tick += 1;
        self.tick
    }

    pub fn get(&mut self, key: &K, now: SimTime) -> CacheGet<V> {
        let fresh = match self.entries.get(key) {
            Some(e) => now.since(e.inserted_at) <= self.ttl,
            None => {
                self.misses += 1;
                return CacheGet::Miss;
            }
        };
        if !fresh {
            let e = self.entries.remove(key).expect("present");
            self.recency.remove(&e.tick);
            self.misses += 1;
            return CacheGet::Miss;
        }
        let tick = self.bump();
        let e = self.entries.get_mut(key).expect("present");
        self.recency.remove(&e.tick);
        e.tick = tick;
        self.recency.insert(tick, key.clone());
        self.hits += 1;
        CacheGet::Hit(e.value.clone())
    }

    /// Age of the entry at `now`, if present and fresh. Does not touch
    /// recency or counters.
    pub fn age(&self, key: &K, now: SimTime) -> Option<SimDuration> {
        self.entries
            .get(key)
            .map(|e| now.since(e.inserted_at))
            .filter(|a| *a <= self.ttl)
    }

    pub fn put(&mut self, key: K, value: V, now: SimTime) -> CachePut<K> {
        let tick = self.bump();
        if let Some(e) = self.entries.get_mut(&key) {
            self.recency.remove(&e.tick);
            e.value = value;
            e.inserted_at = now;
            e.tick = tick;
            self.recency.insert(tick, key);
            return CachePut::Stored;
        }
        let mut evicted = None;
        if self.capacity == 0 {
            return CachePut::Stored;
        }
        if self.entries.len() >= self.capacity {
            let (&old_tick, _) = self.recency.iter().next().expect("non-empty at capacity");
            let old = self.recency.remove(&old_tick).expect("present");
            self.entries.remove(&old);
            evicted = Some(old);
        }
        self.entries.insert(
            key.clone(),
            CacheEntry {
                value,
                inserted_at: now,
                tick,
            },
        );
        self.recency.insert(tick, key);
        match evicted {
            Some(k) => CachePut::StoredWithEviction(k),
            None => CachePut::Stored,
        }
    }

    pub fn hit_rate(&self) -> Option<f64> {
        let total = self.hits + self.misses;
        (total > 0).then(|| self.hits as f64 / total as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoscalerConfig {
    pub target_utilization: f64,
    pub min_instances: u32,
    pub max_instances: u32,
    pub evaluation_period: SimDuration,
    /// Moving-average window over past utilization; 0 disables forecasting.
    pub forecast_window: usize,
    pub actuation_delay: SimDuration,
    /// No change while `|utilization / target - 1|` stays within this band.
    pub tolerance: f64,
}

impl Default for AutoscalerConfig {
    fn default() -> Self {
        AutoscalerConfig {
            target_utilization: 0.6,
            min_instances: 1,
            max_instances: 8,
            evaluation_period: SimDuration::from_secs(1),
            forecast_window: 0,
            actuation_delay: SimDuration::from_secs(1),
            tolerance: 0.1,
        }
    }
}

/// `ceil(current * utilization / target)` clamped to the configured bounds.
pub fn desired_instances(current: u32, utilization: f64, cfg: &AutoscalerConfig) -> u32 {
    let ratio = utilization / cfg.target_utilization;
    if (ratio - 1.0).abs() <= cfg.tolerance {
        return current.clamp(cfg.min_instances, cfg.max_instances);
    }
    // Guard against 1.8 / 0.6 = 3.0000000000000004 style rounding.
    let raw = (current as f64 * ratio - 1e-9).ceil().max(0.0) as u32;
    raw.clamp(cfg.min_instances, cfg.max_instances)
}

#[derive(Debug, Clone)]
pub struct Autoscaler {
    cfg: AutoscalerConfig,
    history: Option<MovingAverage>,
}

impl Autoscaler {
    pub fn new(cfg: AutoscalerConfig) -> Self {
        let history = (cfg.forecast_window > 0).then(|| MovingAverage::new(cfg.forecast_window));
        Autoscaler { cfg, history }
    }

    pub fn config(&self) -> &AutoscalerConfig {
        &self.cfg
    }

    /// Returns the new instance count when it differs from `current`.
    pub fn evaluate(&mut self, current: u32, observed_utilization: f64) -> Option<u32> {
        let util = match self.history.as_mut() {
            Some(ma) => {
                ma.push(observed_utilization);
                ma.forecast().expect("just pushed")
            }
            None => observed_utilization,
        };
        let desired = desired_instances(current, util, &self.cfg);
        (desired != current).then_some(desired)
    }
}
