//! Scenario file format (TOML), defaults, validation and resolution into
//! the runtime model.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dist::DurationDist;
use crate::engine::{NodeId, SimDuration, SimTime};
use crate::error::{ConfigError, Diagnostic};
use crate::network::{LinkClass, LinkKind, NodeRole, Topology};
use crate::orchestration::{AutoscalerConfig, RoutingKind};
use crate::pipeline::{DecisionPolicy, StageKind, Verdict, WindowPolicy};
use crate::workload::{FlightSpec, Peak, RequestKind, WorkloadProfile};

pub const REFERENCE_SCENARIO: &str = include_str!("../scenarios/reference.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Architecture {
    Edge,
    Centralized,
    Both,
}

impl Architecture {
    pub fn includes_edge(self) -> bool {
        matches!(self, Architecture::Edge | Architecture::Both)
    }

    pub fn includes_centralized(self) -> bool {
        matches!(self, Architecture::Centralized | Architecture::Both)
    }
}

/// A single architecture actually simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArchKind {
    Centralized,
    Edge,
}

impl ArchKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ArchKind::Centralized => "centralized",
            ArchKind::Edge => "edge",
        }
    }
}

impl std::str::FromStr for ArchKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "centralized" => Ok(ArchKind::Centralized),
            "edge" => Ok(ArchKind::Edge),
            _ => Err(format!("unknown architecture {s}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_arch")]
    pub architecture: Architecture,
    pub topology: TopologyConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub inventory: InventoryConfig,
    #[serde(default)]
    pub orchestration: OrchestrationConfig,
    pub workload: WorkloadConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

fn default_arch() -> Architecture {
    Architecture::Both
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    pub name: String,
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub name: String,
    pub region: String,
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudConfig {
    #[serde(default = "default_cloud_name")]
    pub name: String,
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    /// Per-stage instance multiplier for the centralized deployment.
    #[serde(default = "one_u32")]
    pub capacity_factor: u32,
}

impl Default for CloudConfig {
    fn default() -> Self {
        CloudConfig {
            name: default_cloud_name(),
            x: 0.0,
            y: 0.0,
            capacity_factor: 1,
        }
    }
}

fn default_cloud_name() -> String {
    "CLOUD".into()
}

fn one_u32() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkClassConfig {
    pub kind: LinkKind,
    pub latency: DurationDist,
    /// Bytes per second.
    pub bandwidth: u64,
    #[serde(default)]
    pub loss_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub a: String,
    pub b: String,
    pub class: String,
}

/// Link classes used to fill in links that are not listed explicitly.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDefaults {
    pub region_edge: Option<String>,
    pub region_cloud: Option<String>,
    pub edge_cloud: Option<String>,
    pub edge_edge: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    /// Requires every region's nearest edge to beat its cloud latency.
    #[serde(default)]
    pub edge_favorable: bool,
    #[serde(default)]
    pub cloud: CloudConfig,
    pub regions: Vec<PointConfig>,
    #[serde(default)]
    pub edges: Vec<EdgeConfig>,
    #[serde(default)]
    pub classes: BTreeMap<String, LinkClassConfig>,
    #[serde(default)]
    pub defaults: LinkDefaults,
    #[serde(default)]
    pub links: Vec<LinkConfig>,
}

pub fn default_link_classes() -> BTreeMap<String, LinkClassConfig> {
    let mut m = BTreeMap::new();
    m.insert(
        "lan".into(),
        LinkClassConfig {
            kind: LinkKind::Lan,
            latency: DurationDist::fixed_ms(2.0),
            bandwidth: 1_000_000_000,
            loss_rate: 0.0,
        },
    );
    m.insert(
        "wan".into(),
        LinkClassConfig {
            kind: LinkKind::Wan,
            latency: DurationDist::fixed_ms(80.0),
            bandwidth: 100_000_000,
            loss_rate: 0.0,
        },
    );
    m.insert(
        "cellular".into(),
        LinkClassConfig {
            kind: LinkKind::Cellular,
            latency: DurationDist::Uniform {
                min_ms: 20.0,
                max_ms: 50.0,
            },
            bandwidth: 50_000_000,
            loss_rate: 0.0,
        },
    );
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub service: DurationDist,
    #[serde(default = "one_u32")]
    pub instances: u32,
    pub capacity: Option<usize>,
}

fn stage(mean_ms: f64) -> StageConfig {
    StageConfig {
        service: DurationDist::Exp { mean_ms },
        instances: 1,
        capacity: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StagesConfig {
    pub ingestion: StageConfig,
    pub filtering: StageConfig,
    pub aggregation: StageConfig,
    pub analysis: StageConfig,
    pub temp_storage: StageConfig,
    pub cloud_sync: StageConfig,
}

impl Default for StagesConfig {
    fn default() -> Self {
        StagesConfig {
            ingestion: stage(0.2),
            filtering: stage(0.1),
            aggregation: stage(0.5),
            analysis: stage(2.0),
            temp_storage: stage(0.3),
            cloud_sync: stage(0.5),
        }
    }
}

impl StagesConfig {
    pub fn get(&self, kind: StageKind) -> &StageConfig {
        match kind {
            StageKind::Ingestion => &self.ingestion,
            StageKind::Filtering => &self.filtering,
            StageKind::Aggregation => &self.aggregation,
            StageKind::Analysis => &self.analysis,
            StageKind::TempStorage => &self.temp_storage,
            StageKind::CloudSync => &self.cloud_sync,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecisionConfig {
    #[serde(rename = "AVAILABILITY_CHECK")]
    pub availability_check: Verdict,
    #[serde(rename = "BOOKING")]
    pub booking: Verdict,
    #[serde(rename = "CONFIRMATION")]
    pub confirmation: Verdict,
    #[serde(rename = "CANCELLATION")]
    pub cancellation: Verdict,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        DecisionConfig {
            availability_check: Verdict::Local,
            booking: Verdict::Local,
            confirmation: Verdict::Cloud,
            cancellation: Verdict::Cloud,
        }
    }
}

impl DecisionConfig {
    pub fn policy(&self) -> DecisionPolicy {
        DecisionPolicy::new([
            self.availability_check,
            self.booking,
            self.confirmation,
            self.cancellation,
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CloudSyncConfig {
    pub interval_ms: f64,
    pub retry_limit: u32,
    pub retry_timeout_ms: f64,
    pub header_bytes: u64,
}

impl Default for CloudSyncConfig {
    fn default() -> Self {
        CloudSyncConfig {
            interval_ms: 100.0,
            retry_limit: 3,
            retry_timeout_ms: 400.0,
            header_bytes: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub queue_capacity: usize,
    pub window_count: usize,
    pub window_timeout_ms: f64,
    pub compression: f64,
    pub response_bytes: u64,
    pub stages: StagesConfig,
    pub decision: DecisionConfig,
    pub cloud_sync: CloudSyncConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            queue_capacity: 1_000,
            window_count: 8,
            window_timeout_ms: 20.0,
            compression: 1.0,
            response_bytes: 2_000,
            stages: StagesConfig::default(),
            decision: DecisionConfig::default(),
            cloud_sync: CloudSyncConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlightConfig {
    pub name: String,
    pub home: String,
    pub seats: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InventoryConfig {
    pub sync_interval_ms: f64,
    pub hold_ttl_ms: f64,
    pub commit_ms: f64,
    pub replicate_to_peers: bool,
    pub retry_limit: u32,
    pub retry_timeout_ms: f64,
    pub delta_entry_bytes: u64,
    /// Used when `flights` is empty: this many flights homed in each region.
    pub flights_per_region: u32,
    pub seats_per_flight: u32,
    pub flights: Vec<FlightConfig>,
    /// Explicit owner per edge node; unlisted flights go to the edge node
    /// nearest their home region.
    pub partitions: BTreeMap<String, Vec<String>>,
}

impl Default for InventoryConfig {
    fn default() -> Self {
        InventoryConfig {
            sync_interval_ms: 100.0,
            hold_ttl_ms: 5_000.0,
            commit_ms: 0.5,
            replicate_to_peers: true,
            retry_limit: 3,
            retry_timeout_ms: 500.0,
            delta_entry_bytes: 64,
            flights_per_region: 4,
            seats_per_flight: 150,
            flights: Vec::new(),
            partitions: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CacheConfig {
    pub capacity: usize,
    pub ttl_ms: f64,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig {
            capacity: 256,
            ttl_ms: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutoscalerSection {
    pub enabled: bool,
    pub target_utilization: f64,
    pub min_instances: u32,
    pub max_instances: u32,
    pub evaluation_period_ms: f64,
    pub forecast_window: usize,
    pub actuation_delay_ms: f64,
    pub tolerance: f64,
    pub stages: Vec<StageKind>,
}

impl Default for AutoscalerSection {
    fn default() -> Self {
        AutoscalerSection {
            enabled: false,
            target_utilization: 0.6,
            min_instances: 1,
            max_instances: 8,
            evaluation_period_ms: 1_000.0,
            forecast_window: 0,
            actuation_delay_ms: 1_000.0,
            tolerance: 0.1,
            stages: StageKind::ALL.to_vec(),
        }
    }
}

impl AutoscalerSection {
    pub fn config(&self, factor: u32) -> AutoscalerConfig {
        AutoscalerConfig {
            target_utilization: self.target_utilization,
            min_instances: self.min_instances * factor,
            max_instances: self.max_instances * factor,
            evaluation_period: SimDuration::from_millis_f64(self.evaluation_period_ms),
            forecast_window: self.forecast_window,
            actuation_delay: SimDuration::from_millis_f64(self.actuation_delay_ms),
            tolerance: self.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureConfig {
    pub node: String,
    pub down_at_ms: f64,
    pub up_at_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrchestrationConfig {
    pub routing: RoutingKind,
    pub ewma_half_life_ms: f64,
    pub forecast_period_ms: f64,
    pub forecast_window: usize,
    pub cache: CacheConfig,
    pub autoscaler: AutoscalerSection,
    pub failures: Vec<FailureConfig>,
}

impl Default for OrchestrationConfig {
    fn default() -> Self {
        OrchestrationConfig {
            routing: RoutingKind::Nearest,
            ewma_half_life_ms: 100.0,
            forecast_period_ms: 1_000.0,
            forecast_window: 5,
            cache: CacheConfig::default(),
            autoscaler: AutoscalerSection::default(),
            failures: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeakConfig {
    pub start_s: f64,
    pub end_s: f64,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    pub base_rate: f64,
    pub duration_s: f64,
    #[serde(default = "default_mix")]
    pub mix: BTreeMap<RequestKind, f64>,
    /// Missing means uniform over regions.
    #[serde(default)]
    pub region_weights: BTreeMap<String, f64>,
    #[serde(default)]
    pub peaks: Vec<PeakConfig>,
    #[serde(default = "default_affinity")]
    pub home_affinity: f64,
    #[serde(default)]
    pub irrelevant_fraction: f64,
    #[serde(default = "default_request_bytes")]
    pub request_bytes: u64,
}

fn default_mix() -> BTreeMap<RequestKind, f64> {
    [
        (RequestKind::AvailabilityCheck, 0.7),
        (RequestKind::Booking, 0.2),
        (RequestKind::Confirmation, 0.05),
        (RequestKind::Cancellation, 0.05),
    ]
    .into_iter()
    .collect()
}

fn default_affinity() -> f64 {
    0.8
}

fn default_request_bytes() -> u64 {
    1_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub slo_ms: f64,
    pub slo_weight: f64,
    pub completion_weight: f64,
    /// Extra simulated time after the last arrival before metrics are cut.
    pub drain_s: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            slo_ms: 500.0,
            slo_weight: 0.7,
            completion_weight: 0.3,
            drain_s: 0.0,
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn parse_error(text: &str, e: toml::de::Error) -> ConfigError {
    let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
    ConfigError::Parse {
        line,
        message: e.message().to_string(),
    }
}

/// Splits `a.b.c=value` overrides and applies them to a parsed TOML table.
pub fn apply_override(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = path.split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut cur = table;
    for p in parents {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| ConfigError::UnknownPath(path.to_string()))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Parses a scalar override: integer, float, bool, else string.
pub fn parse_scalar(s: &str) -> toml::Value {
    if let Ok(i) = s.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(f) = s.parse::<f64>() {
        toml::Value::Float(f)
    } else if let Ok(b) = s.parse::<bool>() {
        toml::Value::Boolean(b)
    } else {
        toml::Value::String(s.to_string())
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| parse_error(text, e))
    }

    pub fn parse_table(text: &str) -> Result<toml::Table, ConfigError> {
        text.parse::<toml::Table>().map_err(|e| parse_error(text, e))
    }

    pub fn from_table(table: toml::Table) -> Result<Self, ConfigError> {
        let text = toml::to_string(&table).map_err(|e| ConfigError::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn reference() -> Self {
        Self::parse(REFERENCE_SCENARIO).expect("shipped reference scenario parses")
    }

    /// SHA-256 over the canonical serialization (after any overrides).
    pub fn config_hash(&self) -> String {
        let canon = toml::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canon.as_bytes()))
    }

    /// Identifies the request stream: seed, workload and inventory catalog.
    pub fn workload_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(toml::to_string(&self.workload).expect("workload serializes").as_bytes());
        h.update(format!("{:?}", self.flights_resolved()).as_bytes());
        hex::encode(&h.finalize()[..12])
    }

    fn classes(&self) -> BTreeMap<String, LinkClassConfig> {
        let mut m = default_link_classes();
        for (k, v) in &self.topology.classes {
            m.insert(k.clone(), v.clone());
        }
        m
    }

    fn flights_resolved(&self) -> Vec<(String, String, u32)> {
        if !self.inventory.flights.is_empty() {
            return self
                .inventory
                .flights
                .iter()
                .map(|f| (f.name.clone(), f.home.clone(), f.seats))
                .collect();
        }
        let mut v = Vec::new();
        for r in &self.topology.regions {
            for i in 0..self.inventory.flights_per_region {
                v.push((format!("{}-F{}", r.name, i + 1), r.name.clone(), self.inventory.seats_per_flight));
            }
        }
        v
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut d = Vec::new();
        let mut push = |path: &str, message: String| {
            d.push(Diagnostic {
                path: path.to_string(),
                message,
            })
        };
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;

        // names
        let mut names = BTreeSet::new();
        let regions: BTreeSet<&str> = self.topology.regions.iter().map(|r| r.name.as_str()).collect();
        let edges: BTreeSet<&str> = self.topology.edges.iter().map(|e| e.name.as_str()).collect();
        for n in self
            .topology
            .regions
            .iter()
            .map(|r| &r.name)
            .chain(self.topology.edges.iter().map(|e| &e.name))
            .chain(std::iter::once(&self.topology.cloud.name))
        {
            if !names.insert(n.as_str()) {
                push("topology", format!("duplicate node name {n}"));
            }
        }
        if self.topology.regions.is_empty() {
            push("topology.regions", "at least one region is required".into());
        }
        if self.topology.cloud.capacity_factor == 0 {
            push("topology.cloud.capacity_factor", "must be at least 1".into());
        }
        for (i, e) in self.topology.edges.iter().enumerate() {
            if !regions.contains(e.region.as_str()) {
                push(&format!("topology.edges[{i}].region"), format!("unknown region {}", e.region));
            }
        }
        let classes = self.classes();
        for (name, c) in &classes {
            let lc = LinkClass {
                name: name.clone(),
                kind: c.kind,
                latency: c.latency,
                bandwidth: c.bandwidth,
                loss_rate: c.loss_rate,
            };
            if let Err(e) = lc.validate() {
                push(&format!("topology.classes.{name}"), e.to_string());
            }
        }
        for (field, v) in [
            ("region_edge", &self.topology.defaults.region_edge),
            ("region_cloud", &self.topology.defaults.region_cloud),
            ("edge_cloud", &self.topology.defaults.edge_cloud),
            ("edge_edge", &self.topology.defaults.edge_edge),
        ] {
            if let Some(c) = v {
                if !classes.contains_key(c) {
                    push(&format!("topology.defaults.{field}"), format!("unknown link class {c}"));
                }
            }
        }
        for (i, l) in self.topology.links.iter().enumerate() {
            for end in [&l.a, &l.b] {
                if !names.contains(end.as_str()) {
                    push(&format!("topology.links[{i}]"), format!("unknown node {end}"));
                }
            }
            if !classes.contains_key(&l.class) {
                push(&format!("topology.links[{i}].class"), format!("unknown link class {}", l.class));
            }
        }

        // workload
        let w = &self.workload;
        let mix_sum: f64 = w.mix.values().sum();
        if (mix_sum - 1.0).abs() > 1e-9 || w.mix.values().any(|p| !nonneg(*p)) {
            push("workload.mix", format!("probabilities must be non-negative and sum to 1 (got {mix_sum})"));
        }
        if !w.region_weights.is_empty() {
            let s: f64 = w.region_weights.values().sum();
            if (s - 1.0).abs() > 1e-9 || w.region_weights.values().any(|p| !nonneg(*p)) {
                push("workload.region_weights", format!("weights must be non-negative and sum to 1 (got {s})"));
            }
            for r in w.region_weights.keys() {
                if !regions.contains(r.as_str()) {
                    push("workload.region_weights", format!("unknown region {r}"));
                }
            }
        }
        if !nonneg(w.base_rate) {
            push("workload.base_rate", "must be non-negative".into());
        }
        if !(w.duration_s.is_finite() && w.duration_s > 0.0) {
            push("workload.duration_s", "must be positive".into());
        }
        for (i, p) in w.peaks.iter().enumerate() {
            if !nonneg(p.start_s) || !nonneg(p.end_s) || p.end_s < p.start_s {
                push(&format!("workload.peaks[{i}]"), "needs 0 <= start_s <= end_s".into());
            }
            if !(p.multiplier >= 1.0) {
                push(&format!("workload.peaks[{i}].multiplier"), "must be >= 1".into());
            }
        }
        for (path, v) in [
            ("workload.home_affinity", w.home_affinity),
            ("workload.irrelevant_fraction", w.irrelevant_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                push(path, "must be in [0, 1]".into());
            }
        }

        // durations
        let durations = [
            ("pipeline.window_timeout_ms", self.pipeline.window_timeout_ms),
            ("pipeline.cloud_sync.interval_ms", self.pipeline.cloud_sync.interval_ms),
            ("pipeline.cloud_sync.retry_timeout_ms", self.pipeline.cloud_sync.retry_timeout_ms),
            ("inventory.sync_interval_ms", self.inventory.sync_interval_ms),
            ("inventory.hold_ttl_ms", self.inventory.hold_ttl_ms),
            ("inventory.commit_ms", self.inventory.commit_ms),
            ("inventory.retry_timeout_ms", self.inventory.retry_timeout_ms),
            ("orchestration.ewma_half_life_ms", self.orchestration.ewma_half_life_ms),
            ("orchestration.forecast_period_ms", self.orchestration.forecast_period_ms),
            ("orchestration.cache.ttl_ms", self.orchestration.cache.ttl_ms),
            ("orchestration.autoscaler.evaluation_period_ms", self.orchestration.autoscaler.evaluation_period_ms),
            ("orchestration.autoscaler.actuation_delay_ms", self.orchestration.autoscaler.actuation_delay_ms),
            ("metrics.slo_ms", self.metrics.slo_ms),
            ("metrics.drain_s", self.metrics.drain_s),
        ];
        for (path, v) in durations {
            if !nonneg(v) {
                push(path, format!("negative duration {v}"));
            }
        }
        for (path, v) in [
            ("inventory.sync_interval_ms", self.inventory.sync_interval_ms),
            ("pipeline.cloud_sync.interval_ms", self.pipeline.cloud_sync.interval_ms),
            ("orchestration.autoscaler.evaluation_period_ms", self.orchestration.autoscaler.evaluation_period_ms),
            ("orchestration.forecast_period_ms", self.orchestration.forecast_period_ms),
            ("metrics.slo_ms", self.metrics.slo_ms),
        ] {
            if v.is_finite() && v <= 0.0 {
                push(path, "must be positive".into());
            }
        }
        if self.pipeline.cloud_sync.retry_limit == 0 {
            push("pipeline.cloud_sync.retry_limit", "must be at least 1".into());
        }
        if self.inventory.retry_limit == 0 {
            push("inventory.retry_limit", "must be at least 1".into());
        }

        // pipeline
        for k in StageKind::ALL {
            let s = self.pipeline.stages.get(k);
            let path = format!("pipeline.stages.{}", k.as_str().to_lowercase());
            if let Err(e) = s.service.validate() {
                push(&format!("{path}.service"), e);
            }
            if s.instances == 0 {
                push(&format!("{path}.instances"), "must be at least 1".into());
            }
        }
        if self.pipeline.window_count == 0 {
            push("pipeline.window_count", "must be at least 1".into());
        }
        if !(self.pipeline.compression > 0.0 && self.pipeline.compression <= 1.0) {
            push("pipeline.compression", "must be in (0, 1]".into());
        }

        // autoscaler
        let a = &self.orchestration.autoscaler;
        if a.min_instances == 0 {
            push("orchestration.autoscaler.min_instances", "must be at least 1".into());
        }
        if a.min_instances > a.max_instances {
            push(
                "orchestration.autoscaler",
                format!("min_instances {} > max_instances {}", a.min_instances, a.max_instances),
            );
        }
        if !(a.target_utilization > 0.0 && a.target_utilization < 1.0) {
            push("orchestration.autoscaler.target_utilization", "must be in (0, 1)".into());
        }
        if !nonneg(a.tolerance) {
            push("orchestration.autoscaler.tolerance", "must be non-negative".into());
        }

        // metrics
        let m = &self.metrics;
        if !nonneg(m.slo_weight) || !nonneg(m.completion_weight) || ((m.slo_weight + m.completion_weight) - 1.0).abs() > 1e-9 {
            push("metrics", "slo_weight and completion_weight must be non-negative and sum to 1".into());
        }

        // inventory
        let flights = self.flights_resolved();
        let mut fnames = BTreeSet::new();
        for (i, (name, home, seats)) in flights.iter().enumerate() {
            if !fnames.insert(name.clone()) {
                push(&format!("inventory.flights[{i}]"), format!("duplicate flight {name}"));
            }
            if !regions.contains(home.as_str()) {
                push(&format!("inventory.flights[{i}].home"), format!("unknown region {home}"));
            }
            if *seats == 0 {
                push(&format!("inventory.flights[{i}].seats"), "must be at least 1".into());
            }
        }
        if flights.is_empty() {
            push("inventory", "no flights defined".into());
        }
        let mut owned = BTreeSet::new();
        for (node, fl) in &self.inventory.partitions {
            if !edges.contains(node.as_str()) {
                push(&format!("inventory.partitions.{node}"), "partition owner must be an edge node".into());
            }
            for f in fl {
                if !fnames.contains(f) {
                    push(&format!("inventory.partitions.{node}"), format!("unknown flight {f}"));
                }
                if !owned.insert(f.clone()) {
                    push(&format!("inventory.partitions.{node}"), format!("flight {f} owned twice"));
                }
            }
        }

        for (i, f) in self.orchestration.failures.iter().enumerate() {
            if !edges.contains(f.node.as_str()) {
                push(&format!("orchestration.failures[{i}].node"), "failures apply to edge nodes".into());
            }
            if !nonneg(f.down_at_ms) || f.up_at_ms.is_some_and(|u| u < f.down_at_ms) {
                push(&format!("orchestration.failures[{i}]"), "needs 0 <= down_at_ms <= up_at_ms".into());
            }
        }

        if !d.is_empty() {
            return d;
        }

        // structure checks need a well-formed topology
        match self.build_topology() {
            Err(e) => d.push(Diagnostic {
                path: "topology".into(),
                message: e.to_string(),
            }),
            Ok(t) => d.extend(self.check_topology(&t)),
        }
        if let Ok(t) = self.build_topology() {
            let bound = self.staleness_bound(&t);
            let ttl = SimDuration::from_millis_f64(self.orchestration.cache.ttl_ms);
            if ttl > bound {
                d.push(Diagnostic {
                    path: "orchestration.cache.ttl_ms".into(),
                    message: format!(
                        "cache ttl {} ms exceeds the availability staleness bound {} ms",
                        ttl.as_millis_f64(),
                        bound.as_millis_f64()
                    ),
                });
            }
        }
        d
    }

    fn check_topology(&self, t: &Topology) -> Vec<Diagnostic> {
        let mut d = Vec::new();
        let cloud = t.cloud();
        let arch = self.architecture;
        let edges: Vec<NodeId> = t.edges().collect();
        if arch.includes_edge() && edges.is_empty() {
            d.push(Diagnostic {
                path: "topology.edges".into(),
                message: "edge architecture needs at least one edge node".into(),
            });
        }
        for r in t.regions() {
            let name = t.name(r);
            let reach = t.edges_by_proximity(r);
            if arch.includes_edge() && reach.is_empty() {
                d.push(Diagnostic {
                    path: format!("topology.regions.{name}"),
                    message: "region has no reachable edge node".into(),
                });
            }
            let direct = t.link(r, cloud).is_some();
            let via_edge = reach.iter().any(|&e| t.link(e, cloud).is_some());
            if !direct && !via_edge {
                d.push(Diagnostic {
                    path: format!("topology.regions.{name}"),
                    message: "region has no path to the cloud".into(),
                });
            }
            if arch.includes_centralized() && !direct {
                d.push(Diagnostic {
                    path: format!("topology.regions.{name}"),
                    message: "centralized architecture needs a region-cloud link".into(),
                });
            }
            if self.topology.edge_favorable {
                if let (Some(&e), Some(cl)) = (reach.first(), t.link(r, cloud)) {
                    let el = t.link(r, e).expect("linked").mean_latency();
                    if el >= cl.mean_latency() {
                        d.push(Diagnostic {
                            path: format!("topology.regions.{name}"),
                            message: format!(
                                "edge-favorable scenario but nearest edge latency {} ms >= cloud latency {} ms",
                                el.as_millis_f64(),
                                cl.mean_latency().as_millis_f64()
                            ),
                        });
                    }
                }
            }
        }
        if arch.includes_edge() {
            for &e in &edges {
                if t.link(e, cloud).is_none() {
                    d.push(Diagnostic {
                        path: format!("topology.edges.{}", t.name(e)),
                        message: "edge node has no link to the cloud".into(),
                    });
                }
                for &f in &edges {
                    if e < f && t.link(e, f).is_none() {
                        d.push(Diagnostic {
                            path: format!("topology.edges.{}", t.name(e)),
                            message: format!("no link to edge node {}", t.name(f)),
                        });
                    }
                }
            }
        }
        d
    }

    pub fn build_topology(&self) -> Result<Topology, crate::error::NetworkError> {
        let mut b = Topology::builder();
        let mut class_idx = BTreeMap::new();
        for (name, c) in self.classes() {
            let i = b.class(LinkClass {
                name: name.clone(),
                kind: c.kind,
                latency: c.latency,
                bandwidth: c.bandwidth,
                loss_rate: c.loss_rate,
            });
            class_idx.insert(name, i);
        }
        let cloud = &self.topology.cloud;
        let cloud_id = b.node(&cloud.name, NodeRole::Cloud, (cloud.x, cloud.y));
        let regions: Vec<NodeId> = self
            .topology
            .regions
            .iter()
            .map(|r| b.node(&r.name, NodeRole::Region, (r.x, r.y)))
            .collect();
        let mut edges = Vec::new();
        for e in &self.topology.edges {
            let id = b.node(&e.name, NodeRole::Edge, (e.x, e.y));
            let region = b
                .find(&e.region)
                .ok_or_else(|| crate::error::NetworkError::UnknownNode(e.region.clone()))?;
            b.place(id, region);
            edges.push(id);
        }
        for l in &self.topology.links {
            let a = b
                .find(&l.a)
                .ok_or_else(|| crate::error::NetworkError::UnknownNode(l.a.clone()))?;
            let c = b
                .find(&l.b)
                .ok_or_else(|| crate::error::NetworkError::UnknownNode(l.b.clone()))?;
            let idx = *class_idx.get(&l.class).ok_or_else(|| crate::error::NetworkError::InvalidLink {
                name: l.class.clone(),
                reason: "unknown class".into(),
            })?;
            b.link(a, c, idx);
        }
        let defaults = &self.topology.defaults;
        let fill = |b: &mut crate::network::TopologyBuilder, x: NodeId, y: NodeId, class: &Option<String>| {
            if let Some(c) = class {
                if !b.has_link(x, y) {
                    if let Some(&i) = class_idx.get(c) {
                        b.link(x, y, i);
                    }
                }
            }
        };
        for &r in &regions {
            for &e in &edges {
                fill(&mut b, r, e, &defaults.region_edge);
            }
            fill(&mut b, r, cloud_id, &defaults.region_cloud);
        }
        for (i, &e) in edges.iter().enumerate() {
            fill(&mut b, e, cloud_id, &defaults.edge_cloud);
            for &f in &edges[i + 1..] {
                fill(&mut b, e, f, &defaults.edge_edge);
            }
        }
        b.build()
    }

    /// Availability reads are never older than this when sync is healthy:
    /// sync interval + largest link latency + one storage service time.
    pub fn staleness_bound(&self, t: &Topology) -> SimDuration {
        SimDuration::from_millis_f64(self.inventory.sync_interval_ms)
            + t.max_link_latency()
            + self.pipeline.stages.temp_storage.service.upper()
    }

    /// Validates and converts to the runtime model.
    pub fn resolve(&self) -> Result<ResolvedScenario, ConfigError> {
        let diags = self.validate();
        if !diags.is_empty() {
            return Err(ConfigError::Invalid(diags));
        }
        let topology = self.build_topology().map_err(|e| {
            ConfigError::Invalid(vec![Diagnostic {
                path: "topology".into(),
                message: e.to_string(),
            }])
        })?;
        let find = |n: &str| topology.find(n).expect("validated name");
        let flights: Vec<FlightSpec> = self
            .flights_resolved()
            .into_iter()
            .map(|(name, home, seats)| FlightSpec {
                name,
                home_region: find(&home),
                seats,
            })
            .collect();

        let mut owner_of: Vec<Option<NodeId>> = vec![None; flights.len()];
        for (node, fl) in &self.inventory.partitions {
            for f in fl {
                let i = flights.iter().position(|x| &x.name == f).expect("validated");
                owner_of[i] = Some(find(node));
            }
        }
        let edge_owner: Vec<NodeId> = flights
            .iter()
            .zip(&owner_of)
            .map(|(f, o)| {
                o.unwrap_or_else(|| {
                    topology
                        .edges_by_proximity(f.home_region)
                        .first()
                        .copied()
                        .unwrap_or(topology.cloud())
                })
            })
            .collect();

        let regions: Vec<(NodeId, f64)> = if self.workload.region_weights.is_empty() {
            let n = self.topology.regions.len() as f64;
            self.topology.regions.iter().map(|r| (find(&r.name), 1.0 / n)).collect()
        } else {
            self.topology
                .regions
                .iter()
                .map(|r| (find(&r.name), self.workload.region_weights.get(&r.name).copied().unwrap_or(0.0)))
                .collect()
        };
        let mut mix = [0.0; 4];
        for (k, p) in &self.workload.mix {
            mix[k.index()] = *p;
        }
        let secs = |s: f64| SimTime::ZERO + SimDuration::from_millis_f64(s * 1_000.0);
        let profile = WorkloadProfile {
            base_rate: self.workload.base_rate,
            mix,
            regions,
            peaks: self
                .workload
                .peaks
                .iter()
                .map(|p| Peak {
                    start: secs(p.start_s),
                    end: secs(p.end_s),
                    multiplier: p.multiplier,
                })
                .collect(),
            duration: SimDuration::from_millis_f64(self.workload.duration_s * 1_000.0),
            home_affinity: self.workload.home_affinity,
            irrelevant_fraction: self.workload.irrelevant_fraction,
            request_bytes: self.workload.request_bytes,
        };
        let failures = self
            .orchestration
            .failures
            .iter()
            .map(|f| {
                (
                    find(&f.node),
                    SimTime::ZERO + SimDuration::from_millis_f64(f.down_at_ms),
                    f.up_at_ms.map(|u| SimTime::ZERO + SimDuration::from_millis_f64(u)),
                )
            })
            .collect();
        let staleness_bound = self.staleness_bound(&topology);
        Ok(ResolvedScenario {
            config: self.clone(),
            topology,
            flights,
            edge_owner,
            profile,
            policy: self.pipeline.decision.policy(),
            window: WindowPolicy {
                max_count: self.pipeline.window_count,
                timeout: SimDuration::from_millis_f64(self.pipeline.window_timeout_ms),
            },
            failures,
            staleness_bound,
        })
    }
}

/// Validated scenario with names resolved to node ids.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub config: ScenarioConfig,
    pub topology: Topology,
    pub flights: Vec<FlightSpec>,
    /// Partition owner of each flight in the edge deployment.
    pub edge_owner: Vec<NodeId>,
    pub profile: WorkloadProfile,
    pub policy: DecisionPolicy,
    pub window: WindowPolicy,
    pub failures: Vec<(NodeId, SimTime, Option<SimTime>)>,
    pub staleness_bound: SimDuration,
}
