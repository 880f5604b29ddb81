//! Geo-partitioned seat inventory: replicated CRDT state for reads, a
//! per-seat lock at the partition owner for writes.

mod coordinator;
mod crdt;
mod replica;

pub use coordinator::{BookingTicket, CoordEvent, Coordinator, TicketOutcome, WriteKind, WriteRequest};
pub use crdt::{Causality, SeatStatus, SeatValue, VersionVector, VersionedSeatState};
pub use replica::{Delta, LogEntry, LogOp, ReplicaState, SeatId, TransitionError};
