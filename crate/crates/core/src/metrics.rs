//! Per-run metric collection, the key-value report format, the flat CSV
//! table and baseline-vs-edge comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::config::ArchKind;
use crate::engine::SimDuration;
use crate::error::{CompareError, ReportError};
use crate::workload::RequestKind;

pub const ALL_KINDS: &str = "ALL";

/// Nearest-rank percentile of an ascending slice (`q` in (0, 1]).
pub fn percentile(sorted: &[u64], q: f64) -> u64 {
    assert!(!sorted.is_empty());
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencySummary {
    pub count: u64,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

impl LatencySummary {
    /// Summarizes microsecond samples; sorts in place.
    pub fn from_micros(samples: &mut [u64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        samples.sort_unstable();
        let sum: u128 = samples.iter().map(|&x| x as u128).sum();
        let ms = |us: u64| us as f64 / 1_000.0;
        Some(LatencySummary {
            count: samples.len() as u64,
            mean_ms: sum as f64 / samples.len() as f64 / 1_000.0,
            p50_ms: ms(percentile(samples, 0.50)),
            p95_ms: ms(percentile(samples, 0.95)),
            p99_ms: ms(percentile(samples, 0.99)),
            max_ms: ms(*samples.last().expect("non-empty")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatisfactionWeights {
    pub slo: f64,
    pub completion: f64,
}

impl Default for SatisfactionWeights {
    fn default() -> Self {
        SatisfactionWeights {
            slo: 0.7,
            completion: 0.3,
        }
    }
}

/// Proxy score: weighted SLO-hit fraction of completed requests plus the
/// completion rate. `None` when nothing was generated.
pub fn satisfaction(within_slo: u64, completed: u64, generated: u64, w: SatisfactionWeights) -> Option<f64> {
    if generated == 0 {
        return None;
    }
    let hit = if completed == 0 {
        0.0
    } else {
        within_slo as f64 / completed as f64
    };
    Some(w.slo * hit + w.completion * completed as f64 / generated as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KindCounts {
    pub generated: u64,
    pub completed: u64,
    pub filtered: u64,
    pub shed: u64,
    pub failed: u64,
}

impl KindCounts {
    pub fn in_flight(&self) -> u64 {
        self.generated - self.completed - self.filtered - self.shed - self.failed
    }

    fn add(&mut self, o: &KindCounts) {
        self.generated += o.generated;
        self.completed += o.completed;
        self.filtered += o.filtered;
        self.shed += o.shed;
        self.failed += o.failed;
    }
}

#[derive(Debug, Default)]
struct KindSamples {
    counts: KindCounts,
    within_slo: u64,
    latency: Vec<u64>,
    response: Vec<u64>,
}

/// Accumulates request outcomes during one run.
#[derive(Debug)]
pub struct MetricsCollector {
    slo: SimDuration,
    kinds: [KindSamples; 4],
}

impl MetricsCollector {
    pub fn new(slo: SimDuration) -> Self {
        MetricsCollector {
            slo,
            kinds: Default::default(),
        }
    }

    pub fn generated(&mut self, kind: RequestKind) {
        self.kinds[kind.index()].counts.generated += 1;
    }

    /// `latency`: generation to processed at the serving node; `response`:
    /// generation to the reply reaching the user.
    pub fn completed(&mut self, kind: RequestKind, latency: SimDuration, response: SimDuration) {
        let k = &mut self.kinds[kind.index()];
        k.counts.completed += 1;
        k.latency.push(latency.as_micros());
        k.response.push(response.as_micros());
        if response <= self.slo {
            k.within_slo += 1;
        }
    }

    pub fn filtered(&mut self, kind: RequestKind) {
        self.kinds[kind.index()].counts.filtered += 1;
    }

    pub fn shed(&mut self, kind: RequestKind) {
        self.kinds[kind.index()].counts.shed += 1;
    }

    pub fn failed(&mut self, kind: RequestKind) {
        self.kinds[kind.index()].counts.failed += 1;
    }

    pub fn counts(&self) -> KindCounts {
        let mut c = KindCounts::default();
        for k in &self.kinds {
            c.add(&k.counts);
        }
        c
    }

    /// Builds the metric part of a report. Throughput is completed requests
    /// over the horizon.
    pub fn finish(mut self, horizon_s: f64, weights: SatisfactionWeights, report: &mut ScenarioReport) {
        let mut all_lat = Vec::new();
        let mut all_resp = Vec::new();
        let mut within = 0;
        for kind in RequestKind::ALL {
            let k = &mut self.kinds[kind.index()];
            all_lat.extend_from_slice(&k.latency);
            all_resp.extend_from_slice(&k.response);
            within += k.within_slo;
            report.counts.insert(kind.as_str().to_string(), k.counts);
            if let Some(s) = LatencySummary::from_micros(&mut k.latency) {
                report.latency.insert(kind.as_str().to_string(), s);
            }
            if let Some(s) = LatencySummary::from_micros(&mut k.response) {
                report.response_time.insert(kind.as_str().to_string(), s);
            }
        }
        let total = self.counts();
        report.counts.insert(ALL_KINDS.to_string(), total);
        if let Some(s) = LatencySummary::from_micros(&mut all_lat) {
            report.latency.insert(ALL_KINDS.to_string(), s);
        }
        if let Some(s) = LatencySummary::from_micros(&mut all_resp) {
            report.response_time.insert(ALL_KINDS.to_string(), s);
        }
        report.horizon_s = horizon_s;
        report.throughput_rps = if horizon_s > 0.0 {
            total.completed as f64 / horizon_s
        } else {
            0.0
        };
        report.satisfaction = satisfaction(within, total.completed, total.generated, weights);
        report.slo_hit_fraction = (total.completed > 0).then(|| within as f64 / total.completed as f64);
        report.completion_rate = (total.generated > 0).then(|| total.completed as f64 / total.generated as f64);
    }
}

/// Everything emitted for one architecture run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub scenario: String,
    pub architecture: ArchKind,
    pub seed: u64,
    pub config_hash: String,
    pub workload_hash: String,
    pub horizon_s: f64,
    pub throughput_rps: f64,
    pub satisfaction: Option<f64>,
    pub slo_hit_fraction: Option<f64>,
    pub completion_rate: Option<f64>,
    pub resource_seconds: f64,
    /// Keyed by request kind name or `ALL`.
    pub counts: BTreeMap<String, KindCounts>,
    pub latency: BTreeMap<String, LatencySummary>,
    pub response_time: BTreeMap<String, LatencySummary>,
    /// Per-node and per-stage detail lines, already formatted.
    pub details: BTreeMap<String, String>,
}

impl ScenarioReport {
    pub fn new(scenario: &str, architecture: ArchKind, seed: u64, config_hash: String, workload_hash: String) -> Self {
        ScenarioReport {
            scenario: scenario.to_string(),
            architecture,
            seed,
            config_hash,
            workload_hash,
            horizon_s: 0.0,
            throughput_rps: 0.0,
            satisfaction: None,
            slo_hit_fraction: None,
            completion_rate: None,
            resource_seconds: 0.0,
            counts: BTreeMap::new(),
            latency: BTreeMap::new(),
            response_time: BTreeMap::new(),
            details: BTreeMap::new(),
        }
    }

    pub fn total(&self) -> KindCounts {
        self.counts.get(ALL_KINDS).copied().unwrap_or_default()
    }

    pub fn mean_latency_ms(&self) -> Option<f64> {
        self.latency.get(ALL_KINDS).map(|s| s.mean_ms)
    }

    pub fn detail(&mut self, key: impl Into<String>, value: impl ToString) {
        self.details.insert(key.into(), value.to_string());
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("scenario", self.scenario.clone());
        kv("architecture", self.architecture.as_str().into());
        kv("seed", self.seed.to_string());
        kv("config_hash", self.config_hash.clone());
        kv("workload_hash", self.workload_hash.clone());
        kv("horizon_s", fmt_f(self.horizon_s));
        kv("throughput_rps", fmt_f(self.throughput_rps));
        kv("satisfaction_proxy", fmt_opt(self.satisfaction));
        kv("slo_hit_fraction", fmt_opt(self.slo_hit_fraction));
        kv("completion_rate", fmt_opt(self.completion_rate));
        kv("resource_seconds", fmt_f(self.resource_seconds));
        for (k, c) in &self.counts {
            kv(&format!("requests.{k}.generated"), c.generated.to_string());
            kv(&format!("requests.{k}.completed"), c.completed.to_string());
            kv(&format!("requests.{k}.filtered"), c.filtered.to_string());
            kv(&format!("requests.{k}.shed"), c.shed.to_string());
            kv(&format!("requests.{k}.failed"), c.failed.to_string());
            kv(&format!("requests.{k}.in_flight"), c.in_flight().to_string());
        }
        for (prefix, map) in [("latency_ms", &self.latency), ("response_time_ms", &self.response_time)] {
            for (k, s) in map {
                kv(&format!("{prefix}.{k}.count"), s.count.to_string());
                kv(&format!("{prefix}.{k}.mean"), fmt_f(s.mean_ms));
                kv(&format!("{prefix}.{k}.p50"), fmt_f(s.p50_ms));
                kv(&format!("{prefix}.{k}.p95"), fmt_f(s.p95_ms));
                kv(&format!("{prefix}.{k}.p99"), fmt_f(s.p99_ms));
                kv(&format!("{prefix}.{k}.max"), fmt_f(s.max_ms));
            }
        }
        for (k, v) in &self.details {
            kv(&format!("detail.{k}"), v.clone());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ReportError> {
        let map = parse_kv(text)?;
        let get = |k: &str| map.get(k).map(String::as_str).ok_or_else(|| ReportError::MissingKey(k.to_string()));
        let num = |k: &str| -> Result<f64, ReportError> {
            get(k)?.parse().map_err(|_| ReportError::Malformed {
                line: 0,
                message: format!("{k} is not a number"),
            })
        };
        let opt = |k: &str| -> Result<Option<f64>, ReportError> {
            match get(k)? {
                "absent" => Ok(None),
                _ => num(k).map(Some),
            }
        };
        let mut r = ScenarioReport::new(
            get("scenario")?,
            get("architecture")?.parse().map_err(|m| ReportError::Malformed { line: 0, message: m })?,
            num("seed")? as u64,
            get("config_hash")?.to_string(),
            get("workload_hash")?.to_string(),
        );
        r.seed = get("seed")?.parse().map_err(|_| ReportError::Malformed {
            line: 0,
            message: "seed is not an integer".into(),
        })?;
        r.horizon_s = num("horizon_s")?;
        r.throughput_rps = num("throughput_rps")?;
        r.satisfaction = opt("satisfaction_proxy")?;
        r.slo_hit_fraction = opt("slo_hit_fraction")?;
        r.completion_rate = opt("completion_rate")?;
        r.resource_seconds = num("resource_seconds")?;
        let int = |k: &str| -> Result<u64, ReportError> {
            get(k)?.parse().map_err(|_| ReportError::Malformed {
                line: 0,
                message: format!("{k} is not an integer"),
            })
        };
        let kinds = std::iter::once(ALL_KINDS).chain(RequestKind::ALL.iter().map(|k| k.as_str()));
        for k in kinds {
            if map.contains_key(&format!("requests.{k}.generated")) {
                r.counts.insert(
                    k.to_string(),
                    KindCounts {
                        generated: int(&format!("requests.{k}.generated"))?,
                        completed: int(&format!("requests.{k}.completed"))?,
                        filtered: int(&format!("requests.{k}.filtered"))?,
                        shed: int(&format!("requests.{k}.shed"))?,
                        failed: int(&format!("requests.{k}.failed"))?,
                    },
                );
            }
            for (prefix, target) in [("latency_ms", &mut r.latency), ("response_time_ms", &mut r.response_time)] {
                if map.contains_key(&format!("{prefix}.{k}.count")) {
                    target.insert(
                        k.to_string(),
                        LatencySummary {
                            count: int(&format!("{prefix}.{k}.count"))?,
                            mean_ms: num(&format!("{prefix}.{k}.mean"))?,
                            p50_ms: num(&format!("{prefix}.{k}.p50"))?,
                            p95_ms: num(&format!("{prefix}.{k}.p95"))?,
                            p99_ms: num(&format!("{prefix}.{k}.p99"))?,
                            max_ms: num(&format!("{prefix}.{k}.max"))?,
                        },
                    );
                }
            }
        }
        for (k, v) in &map {
            if let Some(d) = k.strip_prefix("detail.") {
                r.details.insert(d.to_string(), v.clone());
            }
        }
        Ok(r)
    }

    /// Rows of the flat table: (request_kind, metric, value).
    pub fn csv_rows(&self) -> Vec<(String, String, String)> {
        let mut rows = Vec::new();
        let all = ALL_KINDS.to_string();
        rows.push((all.clone(), "throughput_rps".into(), fmt_f(self.throughput_rps)));
        rows.push((all.clone(), "satisfaction_proxy".into(), fmt_opt(self.satisfaction)));
        rows.push((all.clone(), "slo_hit_fraction".into(), fmt_opt(self.slo_hit_fraction)));
        rows.push((all.clone(), "completion_rate".into(), fmt_opt(self.completion_rate)));
        rows.push((all, "resource_seconds".into(), fmt_f(self.resource_seconds)));
        for (k, c) in &self.counts {
            for (m, v) in [
                ("generated", c.generated),
                ("completed", c.completed),
                ("filtered", c.filtered),
                ("shed", c.shed),
                ("failed", c.failed),
                ("in_flight", c.in_flight()),
            ] {
                rows.push((k.clone(), m.into(), v.to_string()));
            }
        }
        for (prefix, map) in [("latency", &self.latency), ("response_time", &self.response_time)] {
            for (k, s) in map {
                for (m, v) in [
                    ("mean_ms", s.mean_ms),
                    ("p50_ms", s.p50_ms),
                    ("p95_ms", s.p95_ms),
                    ("p99_ms", s.p99_ms),
                    ("max_ms", s.max_ms),
                ] {
                    rows.push((k.clone(), format!("{prefix}_{m}"), fmt_f(v)));
                }
            }
        }
        rows
    }
}

pub fn fmt_f(x: f64) -> String {
    format!("{x:.6}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_else(|| "absent".into())
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, ReportError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once(" = ").ok_or_else(|| ReportError::Malformed {
            line: i + 1,
            message: "expected `key = value`".into(),
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Edge-vs-baseline deltas, in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub scenario: String,
    pub seed: u64,
    pub workload_hash: String,
    pub latency_reduction_pct: f64,
    pub response_time_reduction_pct: f64,
    pub throughput_gain_pct: f64,
    pub satisfaction_gain_pct: f64,
    pub per_kind_latency_reduction_pct: BTreeMap<String, f64>,
}

fn reduction(base: f64, edge: f64, what: &'static str) -> Result<f64, CompareError> {
    if base == 0.0 {
        return Err(CompareError::ZeroBaseline(what));
    }
    Ok(100.0 * (base - edge) / base)
}

fn gain(base: f64, edge: f64, what: &'static str) -> Result<f64, CompareError> {
    if base == 0.0 {
        return Err(CompareError::ZeroBaseline(what));
    }
    Ok(100.0 * (edge - base) / base)
}

pub fn compare(baseline: &ScenarioReport, edge: &ScenarioReport) -> Result<Comparison, CompareError> {
    if baseline.seed != edge.seed {
        return Err(CompareError::SeedMismatch(baseline.seed, edge.seed));
    }
    if baseline.workload_hash != edge.workload_hash {
        return Err(CompareError::WorkloadMismatch(
            baseline.workload_hash.clone(),
            edge.workload_hash.clone(),
        ));
    }
    let lat = |r: &ScenarioReport| r.mean_latency_ms().unwrap_or(0.0);
    let resp = |r: &ScenarioReport| r.response_time.get(ALL_KINDS).map(|s| s.mean_ms).unwrap_or(0.0);
    let sat = |r: &ScenarioReport| r.satisfaction.unwrap_or(0.0);
    let mut per_kind = BTreeMap::new();
    for (k, b) in &baseline.latency {
        if let Some(e) = edge.latency.get(k) {
            if b.mean_ms > 0.0 {
                per_kind.insert(k.clone(), 100.0 * (b.mean_ms - e.mean_ms) / b.mean_ms);
            }
        }
    }
    Ok(Comparison {
        scenario: baseline.scenario.clone(),
        seed: baseline.seed,
        workload_hash: baseline.workload_hash.clone(),
        latency_reduction_pct: reduction(lat(baseline), lat(edge), "mean latency")?,
        response_time_reduction_pct: reduction(resp(baseline), resp(edge), "mean response time")?,
        throughput_gain_pct: gain(baseline.throughput_rps, edge.throughput_rps, "throughput")?,
        satisfaction_gain_pct: gain(sat(baseline), sat(edge), "satisfaction")?,
        per_kind_latency_reduction_pct: per_kind,
    })
}

impl Comparison {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# satisfaction is a proxy score: slo_weight * slo_hit_fraction + completion_weight * completion_rate");
        let _ = writeln!(out, "scenario = {}", self.scenario);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "workload_hash = {}", self.workload_hash);
        for (k, v) in self.rows() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    fn rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            ("latency_reduction_pct".to_string(), fmt_f(self.latency_reduction_pct)),
            ("response_time_reduction_pct".to_string(), fmt_f(self.response_time_reduction_pct)),
            ("throughput_gain_pct".to_string(), fmt_f(self.throughput_gain_pct)),
            ("satisfaction_proxy_gain_pct".to_string(), fmt_f(self.satisfaction_gain_pct)),
        ];
        for (k, v) in &self.per_kind_latency_reduction_pct {
            rows.push((format!("latency_reduction_pct.{k}"), fmt_f(*v)));
        }
        rows
    }

    pub fn from_text(text: &str) -> Result<Self, ReportError> {
        let map = parse_kv(text)?;
        let get = |k: &str| map.get(k).ok_or_else(|| ReportError::MissingKey(k.to_string()));
        let num = |k: &str| -> Result<f64, ReportError> {
            get(k)?.parse().map_err(|_| ReportError::Malformed {
                line: 0,
                message: format!("{k} is not a number"),
            })
        };
        let per_kind = map
            .iter()
            .filter_map(|(k, v)| {
                k.strip_prefix("latency_reduction_pct.")
                    .map(|kind| (kind.to_string(), v.parse().unwrap_or(f64::NAN)))
            })
            .collect();
        Ok(Comparison {
            scenario: get("scenario")?.clone(),
            seed: get("seed")?.parse().map_err(|_| ReportError::Malformed {
                line: 0,
                message: "seed is not an integer".into(),
            })?,
            workload_hash: get("workload_hash")?.clone(),
            latency_reduction_pct: num("latency_reduction_pct")?,
            response_time_reduction_pct: num("response_time_reduction_pct")?,
            throughput_gain_pct: num("throughput_gain_pct")?,
            satisfaction_gain_pct: num("satisfaction_proxy_gain_pct")?,
            per_kind_latency_reduction_pct: per_kind,
        })
    }
}

/// The flat table: one row per (architecture, request kind, metric), then
/// the comparison rows under architecture `comparison`.
pub fn metrics_csv(reports: &[&ScenarioReport], comparison: Option<&Comparison>) -> String {
    let mut out = String::from("architecture,request_kind,metric,value\n");
    for r in reports {
        for (k, m, v) in r.csv_rows() {
            let _ = writeln!(out, "{},{k},{m},{v}", r.architecture.as_str());
        }
    }
    if let Some(c) = comparison {
        for (k, v) in c.rows() {
            let (metric, kind) = match k.split_once('.') {
                Some((m, kind)) => (m.to_string(), kind.to_string()),
                None => (k, ALL_KINDS.to_string()),
            };
            let _ = writeln!(out, "comparison,{kind},{metric},{v}");
        }
    }
    out
}
