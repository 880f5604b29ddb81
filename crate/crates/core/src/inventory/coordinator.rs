//! Strong path for seat writes: the partition owner serializes bookings and
//! cancellations per seat behind a lock.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use super::crdt::SeatStatus;
use super::replica::{ReplicaState, SeatId};
use crate::engine::{NodeId, SimDuration, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WriteKind {
    Book,
    Cancel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WriteRequest {
    pub request: u64,
    pub seat: SeatId,
    pub kind: WriteKind,
    pub entry: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TicketOutcome {
    Confirmed,
    RejectedTaken,
    Timeout,
    Cancelled,
    RejectedNotBooked,
}

impl TicketOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            TicketOutcome::Confirmed => "CONFIRMED",
            TicketOutcome::RejectedTaken => "REJECTED_TAKEN",
            TicketOutcome::Timeout => "TIMEOUT",
            TicketOutcome::Cancelled => "CANCELLED",
            TicketOutcome::RejectedNotBooked => "REJECTED_NOT_BOOKED",
        }
    }
}

impl fmt::Display for TicketOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BookingTicket {
    pub request: u64,
    pub seat: SeatId,
    pub kind: WriteKind,
    pub outcome: TicketOutcome,
    pub decided_at: SimTime,
    pub coordinator: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordEvent {
    Decided(BookingTicket),
    /// A hold was placed; call [`Coordinator::commit`] for `seat` at `at`.
    CommitAt { seat: SeatId, at: SimTime },
}

#[derive(Debug)]
struct SeatLock {
    holder: WriteRequest,
    waiting: VecDeque<WriteRequest>,
}

#[derive(Debug)]
pub struct Coordinator {
    node: NodeId,
    commit_time: SimDuration,
    locks: BTreeMap<SeatId, SeatLock>,
    ledger: BTreeMap<u64, BookingTicket>,
}

impl Coordinator {
    pub fn new(node: NodeId, commit_time: SimDuration) -> Self {
        Coordinator {
            node,
            commit_time,
            locks: BTreeMap::new(),
            ledger: BTreeMap::new(),
        }
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn ledger(&self) -> &BTreeMap<u64, BookingTicket> {
        &self.ledger
    }

    pub fn locked(&self, seat: SeatId) -> bool {
        self.locks.contains_key(&seat)
    }

    fn in_progress(&self, request: u64) -> bool {
        self.locks.values().any(|l| {
            l.holder.request == request || l.waiting.iter().any(|w| w.request == request)
        })
    }

    /// Accepts a write. Retransmissions of a decided request get the
    /// recorded ticket back; retransmissions of a pending one are ignored.
    pub fn submit(
        &mut self,
        replica: &mut ReplicaState,
        req: WriteRequest,
        now: SimTime,
    ) -> Vec<CoordEvent> {
        if let Some(t) = self.ledger.get(&req.request) {
            return vec![CoordEvent::Decided(*t)];
        }
        if self.in_progress(req.request) {
            return Vec::new();
        }
        if let Some(lock) = self.locks.get_mut(&req.seat) {
            lock.waiting.push_back(req);
            return Vec::new();
        }
        self.locks.insert(
            req.seat,
            SeatLock {
                holder: req,
                waiting: VecDeque::new(),
            },
        );
        let mut out = Vec::new();
        self.run(replica, req, now, &mut out);
        out
    }

    /// Finishes the held booking on `seat` and hands the lock on.
    pub fn commit(&mut self, replica: &mut ReplicaState, seat: SeatId, now: SimTime) -> Vec<CoordEvent> {
        let Some(lock) = self.locks.get(&seat) else {
            return Vec::new();
        };
        let req = lock.holder;
        let value = replica.state(seat).value();
        let outcome = if value.status == SeatStatus::Held && value.holder == Some(req.request) {
            replica
                .transition(seat, SeatStatus::Booked, Some(req.request), now)
                .expect("held -> booked");
            TicketOutcome::Confirmed
        } else {
            // the hold expired before commit
            TicketOutcome::Timeout
        };
        let mut out = Vec::new();
        self.decide(req, outcome, now, &mut out);
        self.release(replica, seat, now, &mut out);
        out
    }

    fn run(&mut self, replica: &mut ReplicaState, req: WriteRequest, now: SimTime, out: &mut Vec<CoordEvent>) {
        let status = replica.status(req.seat);
        match req.kind {
            WriteKind::Book if status == SeatStatus::Available => {
                replica
                    .transition(req.seat, SeatStatus::Held, Some(req.request), now)
                    .expect("available -> held");
                out.push(CoordEvent::CommitAt {
                    seat: req.seat,
                    at: now + self.commit_time,
                });
            }
            WriteKind::Book => {
                self.decide(req, TicketOutcome::RejectedTaken, now, out);
                self.release(replica, req.seat, now, out);
            }
            WriteKind::Cancel if status == SeatStatus::Booked => {
                replica
                    .transition(req.seat, SeatStatus::CancelledTombstone, None, now)
                    .expect("booked -> tombstone");
                replica
                    .transition(req.seat, SeatStatus::Available, None, now)
                    .expect("tombstone -> available");
                self.decide(req, TicketOutcome::Cancelled, now, out);
                self.release(replica, req.seat, now, out);
            }
            WriteKind::Cancel => {
                self.decide(req, TicketOutcome::RejectedNotBooked, now, out);
                self.release(replica, req.seat, now, out);
            }
        }
    }

    fn decide(&mut self, req: WriteRequest, outcome: TicketOutcome, now: SimTime, out: &mut Vec<CoordEvent>) {
        let t = BookingTicket {
            request: req.request,
            seat: req.seat,
            kind: req.kind,
            outcome,
            decided_at: now,
            coordinator: self.node,
        };
        self.ledger.insert(req.request, t);
        out.push(CoordEvent::Decided(t));
    }

    fn release(&mut self, replica: &mut ReplicaState, seat: SeatId, now: SimTime, out: &mut Vec<CoordEvent>) {
        let next = match self.locks.get_mut(&seat) {
            Some(lock) => lock.waiting.pop_front(),
            None => None,
        };
        match next {
            Some(req) => {
                self.locks.get_mut(&seat).expect("lock").holder = req;
                self.run(replica, req, now, out);
            }
            None => {
                self.locks.remove(&seat);
            }
        }
    }
}
