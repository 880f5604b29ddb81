#![allow(dead_code)]

use edgesim_core::config::ScenarioConfig;

/// Two regions with one edge each; fixed metro and WAN latencies.
pub const TWO_REGIONS: &str = r#"
name = "two-regions"
seed = 7
architecture = "BOTH"

[topology]
edge_favorable = true
regions = [{ name = "R1" }, { name = "R2", x = 10.0 }]
edges = [{ name = "E1", region = "R1" }, { name = "E2", region = "R2", x = 10.0 }]

[topology.classes.metro]
kind = "LAN"
latency = { kind = "fixed", ms = 3.0 }
bandwidth = 1000000000

[topology.defaults]
region_edge = "metro"
region_cloud = "wan"
edge_cloud = "wan"
edge_edge = "wan"

[workload]
base_rate = 200.0
duration_s = 2.0

[metrics]
drain_s = 2.0
"#;

/// Four regions with one edge each.
pub const FOUR_REGIONS: &str = r#"
name = "four-regions"
seed = 1
architecture = "EDGE"

[topology]
edge_favorable = true
regions = [
  { name = "R1", x = 0.0, y = 10.0 },
  { name = "R2", x = 10.0, y = 0.0 },
  { name = "R3", x = 0.0, y = -10.0 },
  { name = "R4", x = -10.0, y = 0.0 },
]
edges = [
  { name = "E1", region = "R1", x = 0.0, y = 9.0 },
  { name = "E2", region = "R2", x = 9.0, y = 0.0 },
  { name = "E3", region = "R3", x = 0.0, y = -9.0 },
  { name = "E4", region = "R4", x = -9.0, y = 0.0 },
]

[topology.classes.metro]
kind = "LAN"
latency = { kind = "uniform", min_ms = 1.0, max_ms = 5.0 }
bandwidth = 1000000000

[topology.classes.inter]
kind = "WAN"
latency = { kind = "fixed", ms = 15.0 }
bandwidth = 100000000

[topology.defaults]
region_edge = "metro"
region_cloud = "wan"
edge_cloud = "wan"
edge_edge = "inter"

[workload]
base_rate = 400.0
duration_s = 3.0

[metrics]
drain_s = 2.0
"#;

/// One region served by a single edge node.
pub const SINGLE_SITE: &str = r#"
name = "single-site"
seed = 3
architecture = "EDGE"

[topology]
regions = [{ name = "R" }]
edges = [{ name = "E", region = "R" }]

[topology.classes.metro]
kind = "LAN"
latency = { kind = "fixed", ms = 1.0 }
bandwidth = 1000000000

[topology.defaults]
region_edge = "metro"
region_cloud = "wan"
edge_cloud = "wan"

[pipeline]
window_count = 1

[workload]
base_rate = 100.0
duration_s = 1.0
"#;

pub fn parse(text: &str) -> ScenarioConfig {
    ScenarioConfig::parse(text).expect("test scenario parses")
}

/// Parses `base` with `extra` TOML appended.
pub fn with(base: &str, extra: &str) -> ScenarioConfig {
    parse(&format!("{base}\n{extra}"))
}
