//! Fixtures shared by the benchmarks in `benches/`.

use edgesim_core::TraceLabel;

/// Payload for raw engine benchmarks.
#[derive(Debug, Clone, Copy)]
pub struct Tick(pub u64);

impl TraceLabel for Tick {
    fn trace_label(&self) -> String {
        format!("tick {}", self.0)
    }
}

/// Two regions, one edge each, one second of mixed traffic.
pub const SMALL_SCENARIO: &str = r#"
name = "bench-small"
seed = 42
architecture = "BOTH"

[topology]
edge_favorable = true
regions = [{ name = "R1" }, { name = "R2", x = 10.0 }]
edges = [{ name = "E1", region = "R1" }, { name = "E2", region = "R2", x = 10.0 }]

[topology.classes.metro]
kind = "LAN"
latency = { kind = "uniform", min_ms = 1.0, max_ms = 5.0 }
bandwidth = 1000000000

[topology.defaults]
region_edge = "metro"
region_cloud = "wan"
edge_cloud = "wan"
edge_edge = "wan"

[workload]
base_rate = 1000.0
duration_s = 1.0
"#;
