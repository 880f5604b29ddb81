//! Reservation workload: Poisson arrivals with a piecewise-constant rate,
//! per-request kind/region/flight draws.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::engine::{NodeId, SimDuration, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RequestKind {
    AvailabilityCheck,
    Booking,
    Confirmation,
    Cancellation,
}

impl RequestKind {
    pub const ALL: [RequestKind; 4] = [
        RequestKind::AvailabilityCheck,
        RequestKind::Booking,
        RequestKind::Confirmation,
        RequestKind::Cancellation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RequestKind::AvailabilityCheck => "AVAILABILITY_CHECK",
            RequestKind::Booking => "BOOKING",
            RequestKind::Confirmation => "CONFIRMATION",
            RequestKind::Cancellation => "CANCELLATION",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Bookings and cancellations change seat state and go through the
    /// partition owner.
    pub fn is_inventory_write(self) -> bool {
        matches!(self, RequestKind::Booking | RequestKind::Cancellation)
    }
}

impl fmt::Display for RequestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RequestKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        RequestKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown request kind {s}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub start: SimTime,
    pub end: SimTime,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlightSpec {
    pub name: String,
    pub home_region: NodeId,
    pub seats: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadProfile {
    /// Requests per second before peak multipliers.
    pub base_rate: f64,
    /// Probability per kind, indexed by `RequestKind::index`.
    pub mix: [f64; 4],
    pub regions: Vec<(NodeId, f64)>,
    pub peaks: Vec<Peak>,
    pub duration: SimDuration,
    /// Probability that a request targets a flight homed in its own region.
    pub home_affinity: f64,
    /// Probability that a record is judged irrelevant by the filter stage.
    pub irrelevant_fraction: f64,
    pub request_bytes: u64,
}

impl WorkloadProfile {
    pub fn rate_at(&self, t: SimTime) -> f64 {
        let m = self
            .peaks
            .iter()
            .filter(|p| p.start <= t && t < p.end)
            .map(|p| p.multiplier)
            .fold(1.0, f64::max);
        self.base_rate * m
    }

    fn breakpoints(&self) -> Vec<SimTime> {
        let end = SimTime::ZERO + self.duration;
        let mut v = vec![SimTime::ZERO, end];
        for p in &self.peaks {
            v.push(p.start.min(end));
            v.push(p.end.min(end));
        }
        v.sort();
        v.dedup();
        v
    }

    /// Expected arrivals on `[from, to)`.
    pub fn expected_count(&self, from: SimTime, to: SimTime) -> f64 {
        let bps = self.breakpoints();
        let mut total = 0.0;
        for w in bps.windows(2) {
            let (a, b) = (w[0].max(from), w[1].min(to));
            if b > a {
                total += self.rate_at(a) * (b - a).as_secs_f64();
            }
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: u64,
    pub created_at: SimTime,
    pub kind: RequestKind,
    pub region: NodeId,
    pub flight: u32,
    pub seat: u32,
    pub relevant: bool,
    pub size: u64,
}

fn pick(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w / total;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Draws the full request stream for a run. Every request consumes the same
/// number of draws, so the stream depends only on the profile, the flight
/// list and the generator's seed.
pub fn generate<R: Rng + ?Sized>(
    profile: &WorkloadProfile,
    flights: &[FlightSpec],
    rng: &mut R,
) -> Vec<Request> {
    let end = SimTime::ZERO + profile.duration;
    let bps = profile.breakpoints();
    let region_weights: Vec<f64> = profile.regions.iter().map(|r| r.1).collect();
    let home: Vec<Vec<u32>> = profile
        .regions
        .iter()
        .map(|(r, _)| {
            flights
                .iter()
                .enumerate()
                .filter(|(_, f)| f.home_region == *r)
                .map(|(i, _)| i as u32)
                .collect()
        })
        .collect();

    let mut out = Vec::new();
    let mut t = 0.0_f64; // seconds
    let mut seg = 0;
    loop {
        // Invert the cumulative rate across segment boundaries.
        let mut need: f64 = Exp1.sample(rng);
        let arrival = loop {
            if seg + 1 >= bps.len() {
                break None;
            }
            let seg_end = bps[seg + 1].as_secs_f64();
            let rate = profile.rate_at(bps[seg]);
            let room = (seg_end - t) * rate;
            if rate > 0.0 && need <= room {
                t += need / rate;
                break Some(t);
            }
            need -= room.max(0.0);
            t = seg_end;
            seg += 1;
        };
        let Some(at_secs) = arrival else { break };
        let created_at = SimTime((at_secs * 1e6).floor() as u64);
        if created_at >= end {
            break;
        }
        let u_kind: f64 = rng.random();
        let u_region: f64 = rng.random();
        let u_affinity: f64 = rng.random();
        let u_flight: f64 = rng.random();
        let u_seat: f64 = rng.random();
        let u_relevant: f64 = rng.random();

        let kind = RequestKind::ALL[pick(&profile.mix, u_kind)];
        let ri = pick(&region_weights, u_region);
        let pool = &home[ri];
        let flight = if !flights.is_empty() {
            if u_affinity < profile.home_affinity && !pool.is_empty() {
                pool[((u_flight * pool.len() as f64) as usize).min(pool.len() - 1)]
            } else {
                ((u_flight * flights.len() as f64) as usize).min(flights.len() - 1) as u32
            }
        } else {
            0
        };
        let seats = flights.get(flight as usize).map(|f| f.seats).unwrap_or(1).max(1);
        let seat = ((u_seat * seats as f64) as u32).min(seats - 1);
        out.push(Request {
            id: out.len() as u64,
            created_at,
            kind,
            region: profile.regions[ri].0,
            flight,
            seat,
            relevant: u_relevant >= profile.irrelevant_fraction,
            size: profile.request_bytes,
        });
    }
    out
}
