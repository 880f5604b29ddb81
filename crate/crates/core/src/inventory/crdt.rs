//! Version vectors and the replicated per-seat register.
//!
//! A seat state keeps every write that no other write causally dominates
//! (an antichain of siblings). Merge takes the union and drops dominated
//! siblings, which makes it a join: commutative, associative, idempotent.
//! The visible status is resolved from the siblings by precedence
//! BOOKED > CANCELLED_TOMBSTONE > HELD > AVAILABLE, then by last writer.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use crate::engine::{NodeId, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SeatStatus {
    Available,
    Held,
    Booked,
    CancelledTombstone,
}

impl SeatStatus {
    pub fn precedence(self) -> u8 {
        match self {
            SeatStatus::Available => 0,
            SeatStatus::Held => 1,
            SeatStatus::CancelledTombstone => 2,
            SeatStatus::Booked => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SeatStatus::Available => "AVAILABLE",
            SeatStatus::Held => "HELD",
            SeatStatus::Booked => "BOOKED",
            SeatStatus::CancelledTombstone => "CANCELLED_TOMBSTONE",
        }
    }

    /// Allowed local transitions.
    pub fn can_become(self, next: SeatStatus) -> bool {
        use SeatStatus::*;
        matches!(
            (self, next),
            (Available, Held)
                | (Held, Booked)
                | (Held, Available)
                | (Booked, CancelledTombstone)
                | (CancelledTombstone, Available)
        )
    }
}

impl fmt::Display for SeatStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Causality {
    Equal,
    Before,
    After,
    Concurrent,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VersionVector(BTreeMap<NodeId, u64>);

impl VersionVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, node: NodeId) -> u64 {
        self.0.get(&node).copied().unwrap_or(0)
    }

    pub fn increment(&mut self, node: NodeId) {
        *self.0.entry(node).or_insert(0) += 1;
    }

    pub fn set(&mut self, node: NodeId, v: u64) {
        if v == 0 {
            self.0.remove(&node);
        } else {
            self.0.insert(node, v);
        }
    }

    pub fn join(&self, other: &VersionVector) -> VersionVector {
        let mut out = self.0.clone();
        for (&n, &v) in &other.0 {
            let e = out.entry(n).or_insert(0);
            *e = (*e).max(v);
        }
        VersionVector(out)
    }

    pub fn compare(&self, other: &VersionVector) -> Causality {
        let mut less = false;
        let mut greater = false;
        for n in self.0.keys().chain(other.0.keys()) {
            match self.get(*n).cmp(&other.get(*n)) {
                Ordering::Less => less = true,
                Ordering::Greater => greater = true,
                Ordering::Equal => {}
            }
        }
        match (less, greater) {
            (false, false) => Causality::Equal,
            (true, false) => Causality::Before,
            (false, true) => Causality::After,
            (true, true) => Causality::Concurrent,
        }
    }

    /// Strictly dominated by `other`.
    pub fn before(&self, other: &VersionVector) -> bool {
        self.compare(other) == Causality::Before
    }
}

/// The content of one write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SeatValue {
    pub status: SeatStatus,
    pub last_writer: (SimTime, NodeId),
    pub holder: Option<u64>,
}

impl SeatValue {
    fn rank(&self) -> (u8, SimTime, NodeId, Option<u64>) {
        (
            self.status.precedence(),
            self.last_writer.0,
            self.last_writer.1,
            self.holder,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VersionedSeatState {
    /// Sorted, deduplicated, no element strictly dominated by another.
    siblings: Vec<(VersionVector, SeatValue)>,
    /// Pointwise max over all siblings.
    version: VersionVector,
}

impl Default for VersionedSeatState {
    fn default() -> Self {
        VersionedSeatState::initial()
    }
}

impl VersionedSeatState {
    /// The shared starting state every replica assumes for every seat.
    pub fn initial() -> Self {
        VersionedSeatState {
            siblings: vec![(
                VersionVector::new(),
                SeatValue {
                    status: SeatStatus::Available,
                    last_writer: (SimTime::ZERO, NodeId(0)),
                    holder: None,
                },
            )],
            version: VersionVector::new(),
        }
    }

    /// Builds a state from arbitrary writes, normalizing to an antichain.
    pub fn from_siblings(writes: Vec<(VersionVector, SeatValue)>) -> Self {
        Self::normalize(writes)
    }

    fn normalize(mut all: Vec<(VersionVector, SeatValue)>) -> Self {
        all.sort();
        all.dedup();
        let keep: Vec<_> = all
            .iter()
            .filter(|(v, _)| !all.iter().any(|(w, _)| v.before(w)))
            .cloned()
            .collect();
        let version = keep
            .iter()
            .fold(VersionVector::new(), |acc, (v, _)| acc.join(v));
        VersionedSeatState {
            siblings: keep,
            version,
        }
    }

    pub fn version(&self) -> &VersionVector {
        &self.version
    }

    pub fn siblings(&self) -> &[(VersionVector, SeatValue)] {
        &self.siblings
    }

    pub fn value(&self) -> SeatValue {
        *self
            .siblings
            .iter()
            .map(|(_, v)| v)
            .max_by_key(|v| v.rank())
            .expect("a seat state always has a sibling")
    }

    pub fn status(&self) -> SeatStatus {
        self.value().status
    }

    pub fn holder(&self) -> Option<u64> {
        self.value().holder
    }

    pub fn merge(&self, other: &VersionedSeatState) -> VersionedSeatState {
        if self == other {
            return self.clone();
        }
        let mut all = self.siblings.clone();
        all.extend(other.siblings.iter().cloned());
        Self::normalize(all)
    }

    /// A local write at `node`: dominates everything seen so far.
    pub fn write(
        &self,
        node: NodeId,
        at: SimTime,
        status: SeatStatus,
        holder: Option<u64>,
    ) -> VersionedSeatState {
        let mut version = self.version.clone();
        version.increment(node);
        VersionedSeatState {
            siblings: vec![(
                version.clone(),
                SeatValue {
                    status,
                    last_writer: (at, node),
                    holder,
                },
            )],
            version,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vv(pairs: &[(u32, u64)]) -> VersionVector {
        let mut v = VersionVector::new();
        for &(n, c) in pairs {
            v.set(NodeId(n), c);
        }
        v
    }

    fn val(status: SeatStatus, t: u64, n: u32) -> SeatValue {
        SeatValue {
            status,
            last_writer: (SimTime(t), NodeId(n)),
            holder: None,
        }
    }

    #[test]
    fn causality() {
        assert_eq!(vv(&[(1, 1)]).compare(&vv(&[(1, 1)])), Causality::Equal);
        assert_eq!(vv(&[(1, 1)]).compare(&vv(&[(1, 2)])), Causality::Before);
        assert_eq!(vv(&[(1, 2)]).compare(&vv(&[(1, 1)])), Causality::After);
        assert_eq!(vv(&[(1, 1)]).compare(&vv(&[(2, 1)])), Causality::Concurrent);
        assert_eq!(vv(&[]).compare(&vv(&[(2, 1)])), Causality::Before);
    }

    #[test]
    fn idempotent() {
        let s = VersionedSeatState::initial().write(NodeId(1), SimTime(5), SeatStatus::Held, Some(3));
        assert_eq!(s.merge(&s), s);
    }

    #[test]
    fn concurrent_booked_beats_held() {
        let x = VersionedSeatState::from_siblings(vec![(vv(&[(1, 1)]), val(SeatStatus::Held, 9, 1))]);
        let y = VersionedSeatState::from_siblings(vec![(vv(&[(2, 1)]), val(SeatStatus::Booked, 1, 2))]);
        assert_eq!(x.merge(&y).status(), SeatStatus::Booked);
        assert_eq!(y.merge(&x).status(), SeatStatus::Booked);
        assert_eq!(x.merge(&y).version(), &vv(&[(1, 1), (2, 1)]));
    }

    #[test]
    fn dominant_version_wins_regardless_of_precedence() {
        let booked = VersionedSeatState::initial().write(NodeId(1), SimTime(1), SeatStatus::Booked, Some(1));
        let released = booked
            .write(NodeId(1), SimTime(2), SeatStatus::CancelledTombstone, None)
            .write(NodeId(1), SimTime(3), SeatStatus::Available, None);
        assert_eq!(booked.merge(&released).status(), SeatStatus::Available);
        assert_eq!(released.merge(&booked), released);
    }

    #[test]
    fn associativity_counterexample_for_single_winner_merge_holds_here() {
        // a: BOOKED at (1,0); c: AVAILABLE at (2,0) dominating a; b: HELD at
        // (0,1) concurrent with both. A merge that keeps a single winner with
        // the joined version gives BOOKED one way and HELD the other.
        let a = VersionedSeatState::from_siblings(vec![(vv(&[(1, 1)]), val(SeatStatus::Booked, 1, 1))]);
        let b = VersionedSeatState::from_siblings(vec![(vv(&[(2, 1)]), val(SeatStatus::Held, 1, 2))]);
        let c = VersionedSeatState::from_siblings(vec![(vv(&[(1, 2)]), val(SeatStatus::Available, 2, 1))]);
        let left = a.merge(&b).merge(&c);
        let right = a.merge(&b.merge(&c));
        assert_eq!(left, right);
        assert_eq!(left.status(), SeatStatus::Held);
    }

    #[test]
    fn transitions() {
        use SeatStatus::*;
        assert!(Available.can_become(Held));
        assert!(Held.can_become(Booked));
        assert!(Held.can_become(Available));
        assert!(Booked.can_become(CancelledTombstone));
        assert!(CancelledTombstone.can_become(Available));
        assert!(!Available.can_become(Booked));
        assert!(!Booked.can_become(Available));
    }
}
