//! Topology of user regions, edge nodes and the cloud, and the link delay
//! model: a sampled propagation delay plus size/bandwidth serialization.
//! Links do not queue; contention happens at service instances.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::DurationDist;
use crate::engine::{NodeId, SimDuration, SimTime};
use crate::error::NetworkError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LinkKind {
    Lan,
    Wan,
    Cellular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkClass {
    pub name: String,
    pub kind: LinkKind,
    pub latency: DurationDist,
    /// Bytes per second.
    pub bandwidth: u64,
    pub loss_rate: f64,
}

impl LinkClass {
    pub fn new(
        name: impl Into<String>,
        kind: LinkKind,
        latency: DurationDist,
        bandwidth: u64,
        loss_rate: f64,
    ) -> Result<Self, NetworkError> {
        let class = LinkClass {
            name: name.into(),
            kind,
            latency,
            bandwidth,
            loss_rate,
        };
        class.validate()?;
        Ok(class)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let bad = |reason: String| NetworkError::InvalidLink {
            name: self.name.clone(),
            reason,
        };
        if matches!(self.latency, DurationDist::Exp { .. }) {
            return Err(bad("latency must be fixed or uniform".into()));
        }
        self.latency.validate().map_err(bad)?;
        if self.bandwidth == 0 {
            return Err(bad("bandwidth must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.loss_rate) {
            return Err(bad(format!("loss rate {} outside [0, 1)", self.loss_rate)));
        }
        Ok(())
    }

    /// Serialization delay, rounded up to the next microsecond.
    pub fn serialization_delay(&self, size: u64) -> SimDuration {
        let bits = size as u128 * 1_000_000;
        let bw = self.bandwidth as u128;
        SimDuration(bits.div_ceil(bw) as u64)
    }

    pub fn transit_delay<R: Rng + ?Sized>(&self, size: u64, rng: &mut R) -> SimDuration {
        self.latency.sample(rng) + self.serialization_delay(size)
    }

    pub fn max_latency(&self) -> SimDuration {
        self.latency.upper()
    }

    pub fn mean_latency(&self) -> SimDuration {
        self.latency.mean()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Region,
    Edge,
    Cloud,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub name: String,
    pub role: NodeRole,
    pub pos: (f64, f64),
    /// Region an edge node is placed in.
    pub region: Option<NodeId>,
}

/// Immutable after construction; shared read-only by a run.
#[derive(Debug, Clone)]
pub struct Topology {
    nodes: Vec<Node>,
    classes: Vec<LinkClass>,
    links: BTreeMap<(NodeId, NodeId), usize>,
    cloud: NodeId,
}

fn key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Default)]
pub struct TopologyBuilder {
    nodes: Vec<Node>,
    classes: Vec<LinkClass>,
    links: BTreeMap<(NodeId, NodeId), usize>,
    cloud: Option<NodeId>,
}

impl TopologyBuilder {
    pub fn node(&mut self, name: &str, role: NodeRole, pos: (f64, f64)) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node {
            id,
            name: name.to_string(),
            role,
            pos,
            region: None,
        });
        if role == NodeRole::Cloud {
            self.cloud = Some(id);
        }
        id
    }

    pub fn place(&mut self, edge: NodeId, region: NodeId) {
        self.nodes[edge.index()].region = Some(region);
    }

    pub fn class(&mut self, class: LinkClass) -> usize {
        if let Some(i) = self.classes.iter().position(|c| c.name == class.name) {
            self.classes[i] = class;
            return i;
        }
        self.classes.push(class);
        self.classes.len() - 1
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.name == name)
    }

    pub fn link(&mut self, a: NodeId, b: NodeId, class: usize) {
        self.links.insert(key(a, b), class);
    }

    pub fn has_link(&self, a: NodeId, b: NodeId) -> bool {
        self.links.contains_key(&key(a, b))
    }

    pub fn find(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.name == name).map(|n| n.id)
    }

    pub fn build(self) -> Result<Topology, NetworkError> {
        let cloud = self
            .cloud
            .ok_or_else(|| NetworkError::UnknownNode("cloud".into()))?;
        for c in &self.classes {
            c.validate()?;
        }
        Ok(Topology {
            nodes: self.nodes,
            classes: self.classes,
            links: self.links,
            cloud,
        })
    }
}

impl Topology {
    pub fn builder() -> TopologyBuilder {
        TopologyBuilder::default()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id.index()].name
    }

    pub fn find(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.name == name).map(|n| n.id)
    }

    pub fn cloud(&self) -> NodeId {
        self.cloud
    }

    pub fn regions(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.by_role(NodeRole::Region)
    }

    pub fn edges(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.by_role(NodeRole::Edge)
    }

    fn by_role(&self, role: NodeRole) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .filter(move |n| n.role == role)
            .map(|n| n.id)
    }

    /// Link class between two nodes; symmetric in its arguments.
    pub fn link(&self, a: NodeId, b: NodeId) -> Option<&LinkClass> {
        self.links.get(&key(a, b)).map(|&i| &self.classes[i])
    }

    pub fn require_link(&self, a: NodeId, b: NodeId) -> Result<&LinkClass, NetworkError> {
        self.link(a, b).ok_or_else(|| {
            NetworkError::UnknownLink(self.name(a).to_string(), self.name(b).to_string())
        })
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        let (ax, ay) = self.node(a).pos;
        let (bx, by) = self.node(b).pos;
        ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
    }

    /// Edge nodes linked to `region`, nearest first: lowest mean configured
    /// latency, then Euclidean distance, then node id.
    pub fn edges_by_proximity(&self, region: NodeId) -> Vec<NodeId> {
        let mut v: Vec<(SimDuration, f64, NodeId)> = self
            .edges()
            .filter_map(|e| {
                self.link(region, e)
                    .map(|l| (l.mean_latency(), self.distance(region, e), e))
            })
            .collect();
        v.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        v.into_iter().map(|(_, _, e)| e).collect()
    }

    /// Largest latency any configured link can produce.
    pub fn max_link_latency(&self) -> SimDuration {
        self.links
            .values()
            .map(|&i| self.classes[i].max_latency())
            .max()
            .unwrap_or(SimDuration::ZERO)
    }

    pub fn link_pairs(&self) -> impl Iterator<Item = (NodeId, NodeId, &LinkClass)> + '_ {
        self.links
            .iter()
            .map(|(&(a, b), &i)| (a, b, &self.classes[i]))
    }
}

/// Data in flight between two nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Message<T> {
    pub src: NodeId,
    pub dst: NodeId,
    pub size: u64,
    pub payload: T,
    pub send_time: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delivery {
    Arrives(SimTime),
    Dropped,
}

/// Samples the fate of a message. A message to the sending node itself is
/// delivered immediately. Randomness is only drawn for random latencies and
/// lossy links.
pub fn deliver<T, R: Rng + ?Sized>(
    topology: &Topology,
    msg: &Message<T>,
    rng: &mut R,
) -> Result<Delivery, NetworkError> {
    if msg.src == msg.dst {
        return Ok(Delivery::Arrives(msg.send_time));
    }
    let link = topology.require_link(msg.src, msg.dst)?;
    if link.loss_rate > 0.0 && rng.random::<f64>() < link.loss_rate {
        return Ok(Delivery::Dropped);
    }
    let delay = link.transit_delay(msg.size.max(1), rng);
    Ok(Delivery::Arrives(msg.send_time + delay))
}
