//! Deterministic discrete-event simulation of edge-hosted airline
//! reservation microservices, with a centralized cloud baseline.

pub mod audit;
pub mod config;
pub mod dist;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod inventory;
pub mod metrics;
pub mod network;
pub mod orchestration;
pub mod pipeline;
pub mod rng;
pub mod scenario;
pub mod workload;

pub use config::{ArchKind, Architecture, ResolvedScenario, ScenarioConfig};
pub use dist::DurationDist;
pub use engine::{Engine, Event, Handler, NodeId, SimDuration, SimTime, TraceLabel};
pub use metrics::{Comparison, ScenarioReport};
pub use error::{CompareError, ConfigError, Diagnostic, EngineError, NetworkError, ReportError, RunError};
pub use inventory::{
    BookingTicket, Coordinator, ReplicaState, SeatId, SeatStatus, TicketOutcome, VersionVector,
    VersionedSeatState,
};
pub use network::{Delivery, LinkClass, LinkKind, Message, NodeRole, Topology};
pub use orchestration::{Autoscaler, AutoscalerConfig, EdgeCache, RoutingKind};
pub use pipeline::{DataRecord, DecisionPolicy, StageKind, StageQueue, Verdict};
pub use rng::{RngStream, StreamId};
pub use workload::{FlightSpec, Request, RequestKind, WorkloadProfile};
