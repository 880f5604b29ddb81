use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::crdt::{SeatStatus, VersionedSeatState};
use crate::engine::{NodeId, SimDuration, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SeatId {
    pub flight: u32,
    pub seat: u32,
}

impl SeatId {
    pub fn new(flight: u32, seat: u32) -> Self {
        SeatId { flight, seat }
    }
}

impl fmt::Display for SeatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.flight, self.seat)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogOp {
    Write {
        node: NodeId,
        status: SeatStatus,
        holder: Option<u64>,
    },
    Merge(VersionedSeatState),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub at: SimTime,
    pub seat: SeatId,
    pub op: LogOp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionError {
    pub seat: SeatId,
    pub from: SeatStatus,
    pub to: SeatStatus,
}

impl fmt::Display for TransitionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "seat {}: {} -> {} not allowed", self.seat, self.from, self.to)
    }
}

/// Per-seat states touched since a peer's acknowledged log offset.
#[derive(Debug, Clone, PartialEq)]
pub struct Delta {
    pub origin: NodeId,
    /// Log length at the sender when the delta was cut.
    pub upto: usize,
    /// Sender clock when the delta was cut; the entries are current as of
    /// this instant.
    pub cut_at: SimTime,
    pub entries: Vec<(SeatId, VersionedSeatState)>,
}

/// One node's copy of the seat inventory, kept as an append-only log plus
/// the folded state. Seats absent from `seats` are in the initial state.
#[derive(Debug, Clone)]
pub struct ReplicaState {
    node: NodeId,
    partition: BTreeSet<u32>,
    seats: BTreeMap<SeatId, VersionedSeatState>,
    log: Vec<LogEntry>,
    last_sync_from: BTreeMap<NodeId, SimTime>,
    acked: BTreeMap<NodeId, usize>,
}

impl ReplicaState {
    pub fn new(node: NodeId, partition: impl IntoIterator<Item = u32>) -> Self {
        ReplicaState {
            node,
            partition: partition.into_iter().collect(),
            seats: BTreeMap::new(),
            log: Vec::new(),
            last_sync_from: BTreeMap::new(),
            acked: BTreeMap::new(),
        }
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn owns(&self, flight: u32) -> bool {
        self.partition.contains(&flight)
    }

    pub fn partition(&self) -> &BTreeSet<u32> {
        &self.partition
    }

    pub fn seats(&self) -> &BTreeMap<SeatId, VersionedSeatState> {
        &self.seats
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn state(&self, seat: SeatId) -> VersionedSeatState {
        self.seats.get(&seat).cloned().unwrap_or_default()
    }

    pub fn status(&self, seat: SeatId) -> SeatStatus {
        self.seats
            .get(&seat)
            .map(|s| s.status())
            .unwrap_or(SeatStatus::Available)
    }

    /// Applies a local state transition and logs it.
    pub fn transition(
        &mut self,
        seat: SeatId,
        to: SeatStatus,
        holder: Option<u64>,
        now: SimTime,
    ) -> Result<(), TransitionError> {
        let current = self.state(seat);
        let from = current.status();
        if !from.can_become(to) {
            return Err(TransitionError { seat, from, to });
        }
        self.seats
            .insert(seat, current.write(self.node, now, to, holder));
        self.log.push(LogEntry {
            at: now,
            seat,
            op: LogOp::Write {
                node: self.node,
                status: to,
                holder,
            },
        });
        Ok(())
    }

    /// Merges a remote seat state; logs only if something changed.
    pub fn merge_remote(&mut self, seat: SeatId, remote: &VersionedSeatState, now: SimTime) -> bool {
        let current = self.state(seat);
        let merged = current.merge(remote);
        if merged == current {
            return false;
        }
        self.seats.insert(seat, merged);
        self.log.push(LogEntry {
            at: now,
            seat,
            op: LogOp::Merge(remote.clone()),
        });
        true
    }

    pub fn apply_delta(&mut self, delta: &Delta, now: SimTime) -> usize {
        let changed = delta
            .entries
            .iter()
            .filter(|(seat, st)| self.merge_remote(*seat, st, now))
            .count();
        let e = self.last_sync_from.entry(delta.origin).or_insert(delta.cut_at);
        *e = (*e).max(delta.cut_at);
        changed
    }

    pub fn delta_for(&self, peer: NodeId, now: SimTime) -> Delta {
        let from = self.acked.get(&peer).copied().unwrap_or(0);
        let touched: BTreeSet<SeatId> = self.log[from..].iter().map(|e| e.seat).collect();
        Delta {
            origin: self.node,
            upto: self.log.len(),
            cut_at: now,
            entries: touched
                .into_iter()
                .map(|s| (s, self.seats[&s].clone()))
                .collect(),
        }
    }

    pub fn ack(&mut self, peer: NodeId, upto: usize) {
        let e = self.acked.entry(peer).or_insert(0);
        *e = (*e).max(upto.min(self.log.len()));
    }

    pub fn acked(&self, peer: NodeId) -> usize {
        self.acked.get(&peer).copied().unwrap_or(0)
    }

    /// Cut time of the newest delta received from `origin`; all replicas
    /// start from the same inventory, so this is time zero before any sync.
    pub fn last_sync_from(&self, origin: NodeId) -> SimTime {
        self.last_sync_from.get(&origin).copied().unwrap_or(SimTime::ZERO)
    }

    pub fn staleness(&self, flight: u32, owner: NodeId, now: SimTime) -> SimDuration {
        if self.owns(flight) || owner == self.node {
            SimDuration::ZERO
        } else {
            now.since(self.last_sync_from(owner))
        }
    }

    pub fn snapshot(&self, flight: u32, seat_count: u32) -> Vec<SeatStatus> {
        (0..seat_count)
            .map(|s| self.status(SeatId::new(flight, s)))
            .collect()
    }

    /// Returns held seats whose hold is older than `ttl` to AVAILABLE.
    pub fn expire_holds(&mut self, now: SimTime, ttl: SimDuration) -> Vec<(SeatId, Option<u64>)> {
        let expired: Vec<(SeatId, Option<u64>)> = self
            .seats
            .iter()
            .filter(|(s, st)| {
                let v = st.value();
                self.partition.contains(&s.flight)
                    && v.status == SeatStatus::Held
                    && v.last_writer.0 + ttl <= now
            })
            .map(|(s, st)| (*s, st.holder()))
            .collect();
        for (seat, _) in &expired {
            self.transition(*seat, SeatStatus::Available, None, now)
                .expect("held seat can be released");
        }
        expired
    }

    /// Folds a log from the initial inventory.
    pub fn replay(log: &[LogEntry]) -> BTreeMap<SeatId, VersionedSeatState> {
        let mut seats: BTreeMap<SeatId, VersionedSeatState> = BTreeMap::new();
        for e in log {
            let current = seats.get(&e.seat).cloned().unwrap_or_default();
            let next = match &e.op {
                LogOp::Write {
                    node,
                    status,
                    holder,
                } => current.write(*node, e.at, *status, *holder),
                LogOp::Merge(remote) => current.merge(remote),
            };
            seats.insert(e.seat, next);
        }
        seats
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: NodeId = NodeId(1);
    const B: NodeId = NodeId(2);

    #[test]
    fn transitions_follow_the_lifecycle() {
        let mut r = ReplicaState::new(A, [0]);
        let s = SeatId::new(0, 1);
        r.transition(s, SeatStatus::Held, Some(7), SimTime(1)).unwrap();
        r.transition(s, SeatStatus::Booked, Some(7), SimTime(2)).unwrap();
        assert!(r.transition(s, SeatStatus::Available, None, SimTime(3)).is_err());
        r.transition(s, SeatStatus::CancelledTombstone, None, SimTime(3)).unwrap();
        r.transition(s, SeatStatus::Available, None, SimTime(4)).unwrap();
        assert_eq!(r.log().len(), 4);
        assert_eq!(&ReplicaState::replay(r.log()), r.seats());
    }

    #[test]
    fn delta_exchange_converges_and_is_idempotent() {
        let mut a = ReplicaState::new(A, [0]);
        let mut b = ReplicaState::new(B, [1]);
        a.transition(SeatId::new(0, 0), SeatStatus::Held, Some(1), SimTime(1)).unwrap();
        b.transition(SeatId::new(1, 3), SeatStatus::Held, Some(2), SimTime(1)).unwrap();
        let da = a.delta_for(B, SimTime(5));
        let db = b.delta_for(A, SimTime(5));
        assert_eq!(b.apply_delta(&da, SimTime(10)), 1);
        assert_eq!(a.apply_delta(&db, SimTime(10)), 1);
        assert_eq!(a.seats(), b.seats());
        // duplicate delivery changes nothing
        let before = b.seats().clone();
        assert_eq!(b.apply_delta(&da, SimTime(11)), 0);
        assert_eq!(b.seats(), &before);
        assert_eq!(&ReplicaState::replay(a.log()), a.seats());
        assert_eq!(&ReplicaState::replay(b.log()), b.seats());
    }

    #[test]
    fn acked_offset_trims_delta() {
        let mut a = ReplicaState::new(A, [0]);
        assert!(a.delta_for(B, SimTime(5)).entries.is_empty());
        a.transition(SeatId::new(0, 0), SeatStatus::Held, Some(1), SimTime(1)).unwrap();
        let d = a.delta_for(B, SimTime(5));
        assert_eq!(d.entries.len(), 1);
        a.ack(B, d.upto);
        assert!(a.delta_for(B, SimTime(5)).entries.is_empty());
    }

    #[test]
    fn staleness_bookkeeping() {
        let mut b = ReplicaState::new(B, [1]);
        assert_eq!(b.staleness(1, B, SimTime(500)), SimDuration::ZERO);
        let d = Delta {
            origin: A,
            upto: 0,
            cut_at: SimTime(60_000),
            entries: vec![],
        };
        b.apply_delta(&d, SimTime(75_000));
        assert_eq!(b.staleness(0, A, SimTime(100_000)), SimDuration(40_000));
    }

    #[test]
    fn holds_expire_after_ttl() {
        let mut a = ReplicaState::new(A, [0]);
        let s = SeatId::new(0, 0);
        a.transition(s, SeatStatus::Held, Some(9), SimTime(1_000)).unwrap();
        assert!(a.expire_holds(SimTime(5_000), SimDuration(5_000)).is_empty());
        assert_eq!(a.expire_holds(SimTime(6_000), SimDuration(5_000)), vec![(s, Some(9))]);
        assert_eq!(a.status(s), SeatStatus::Available);
    }
}
