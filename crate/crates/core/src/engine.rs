//! Discrete-event core: a virtual microsecond clock, a totally ordered event
//! queue and an optional trace log.
//!
//! Events are ordered by `(fire_at, seq)`. `seq` is handed out at scheduling
//! time, so events that share a timestamp fire in the order they were
//! scheduled.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use crate::error::EngineError;

/// A point on the virtual clock, in microseconds since simulation start.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(pub u64);

/// A span of virtual time in microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimDuration(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1_000_000.0
    }

    /// Time elapsed since `earlier`, saturating at zero.
    pub fn since(self, earlier: SimTime) -> SimDuration {
        SimDuration(self.0.saturating_sub(earlier.0))
    }
}

impl SimDuration {
    pub const ZERO: SimDuration = SimDuration(0);

    pub fn from_micros(us: u64) -> Self {
        SimDuration(us)
    }

    pub fn from_millis(ms: u64) -> Self {
        SimDuration(ms * 1_000)
    }

    pub fn from_secs(s: u64) -> Self {
        SimDuration(s * 1_000_000)
    }

    /// Rounds a non-negative millisecond value to the nearest microsecond.
    /// Negative and non-finite inputs are clamped to zero; configuration
    /// validation is responsible for rejecting them earlier.
    pub fn from_millis_f64(ms: f64) -> Self {
        if !ms.is_finite() || ms <= 0.0 {
            return SimDuration(0);
        }
        SimDuration((ms * 1_000.0).round() as u64)
    }

    pub fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1_000_000.0
    }
}

impl Add<SimDuration> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimDuration) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign<SimDuration> for SimTime {
    fn add_assign(&mut self, rhs: SimDuration) {
        self.0 += rhs.0;
    }
}

impl Add for SimDuration {
    type Output = SimDuration;
    fn add(self, rhs: SimDuration) -> SimDuration {
        SimDuration(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimDuration;
    fn sub(self, rhs: SimTime) -> SimDuration {
        SimDuration(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for SimDuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

/// Identifier of a simulated node (region, edge node or cloud). Indices are
/// assigned by the topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Payloads render a short label for the trace log.
pub trait TraceLabel {
    fn trace_label(&self) -> String;
}

#[derive(Debug, Clone)]
pub struct Event<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub target: NodeId,
    pub payload: P,
}

impl<P> PartialEq for Event<P> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}

impl<P> Eq for Event<P> {}

impl<P> PartialOrd for Event<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Event<P> {
    // Reversed so that `BinaryHeap` pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_at
            .cmp(&self.fire_at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventHandle {
    pub fire_at: SimTime,
    pub seq: u64,
}

/// Receives events popped by [`Engine::run_until`].
pub trait Handler<P> {
    fn handle(&mut self, engine: &mut Engine<P>, event: Event<P>);
}

impl<P, F> Handler<P> for F
where
    F: FnMut(&mut Engine<P>, Event<P>),
{
    fn handle(&mut self, engine: &mut Engine<P>, event: Event<P>) {
        self(engine, event)
    }
}

pub struct Engine<P> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Event<P>>,
    trace: Option<Vec<u8>>,
    node_names: Vec<String>,
    processed: u64,
}

impl<P: TraceLabel> Engine<P> {
    pub fn new() -> Self {
        Engine {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            trace: None,
            node_names: Vec::new(),
            processed: 0,
        }
    }

    /// Enables the in-memory trace. `node_names[i]` labels `NodeId(i)`.
    pub fn with_trace(mut self, node_names: Vec<String>) -> Self {
        self.trace = Some(Vec::new());
        self.node_names = node_names;
        self
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Total events handed to a handler so far.
    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn schedule(&mut self, delay: SimDuration, target: NodeId, payload: P) -> EventHandle {
        let fire_at = self.now + delay;
        self.push(fire_at, target, payload)
    }

    /// Schedules at an absolute time; refuses times before the clock.
    pub fn schedule_at(
        &mut self,
        fire_at: SimTime,
        target: NodeId,
        payload: P,
    ) -> Result<EventHandle, EngineError> {
        if fire_at < self.now {
            return Err(EngineError::InPast {
                at: fire_at.0,
                now: self.now.0,
            });
        }
        Ok(self.push(fire_at, target, payload))
    }

    /// Schedules with a signed delay, rejecting negative values.
    pub fn schedule_signed(
        &mut self,
        delay_us: i64,
        target: NodeId,
        payload: P,
    ) -> Result<EventHandle, EngineError> {
        if delay_us < 0 {
            return Err(EngineError::NegativeDelay(delay_us));
        }
        Ok(self.schedule(SimDuration(delay_us as u64), target, payload))
    }

    fn push(&mut self, fire_at: SimTime, target: NodeId, payload: P) -> EventHandle {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Event {
            fire_at,
            seq,
            target,
            payload,
        });
        EventHandle { fire_at, seq }
    }

    /// Processes every event with `fire_at <= horizon` in total order and
    /// leaves the clock at `horizon`. Returns the number of events handled.
    pub fn run_until<H: Handler<P>>(&mut self, horizon: SimTime, handler: &mut H) -> u64 {
        let mut count = 0;
        while let Some(next) = self.queue.peek() {
            if next.fire_at > horizon {
                break;
            }
            let event = self.queue.pop().expect("peeked");
            debug_assert!(event.fire_at >= self.now);
            self.now = event.fire_at;
            self.record(&event);
            count += 1;
            self.processed += 1;
            handler.handle(self, event);
        }
        if horizon > self.now {
            self.now = horizon;
        }
        count
    }

    fn record(&mut self, event: &Event<P>) {
        if let Some(buf) = self.trace.as_mut() {
            use std::io::Write;
            let name = self
                .node_names
                .get(event.target.index())
                .map(String::as_str)
                .unwrap_or("?");
            let _ = writeln!(
                buf,
                "{},{},{},{}",
                event.fire_at.0,
                event.seq,
                name,
                event.payload.trace_label()
            );
        }
    }

    pub fn trace(&self) -> Option<&[u8]> {
        self.trace.as_deref()
    }

    pub fn take_trace(&mut self) -> Option<Vec<u8>> {
        self.trace.take()
    }
}

impl<P: TraceLabel> Default for Engine<P> {
    fn default() -> Self {
        Self::new()
    }
}
