//! Deterministic, seedable network simulation: random geometric topologies,
//! hop-count routing, and a discrete-event scheduler with a configurable
//! latency model. Identical seeds and inputs yield identical event traces.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::error::{Error, Result};

pub type NodeId = u32;

const CONNECTIVITY_RETRIES: u32 = 64;

/// Unit-square node placement with a radio-range adjacency.
#[derive(Debug, Clone)]
pub struct Topology {
    pub n: usize,
    pub positions: Vec<(f64, f64)>,
    pub radio_range: f64,
    adjacency: Vec<BTreeSet<NodeId>>,
}

impl Topology {
    /// Random geometric topology: uniform positions, edges between nodes at
    /// distance <= radio_range. Regenerates with sub-seeds until connected,
    /// within a bounded number of retries.
    pub fn generate(n: usize, radio_range: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("topology needs at least one node".into()));
        }
        if !(radio_range > 0.0 && radio_range <= std::f64::consts::SQRT_2) {
            return Err(Error::InvalidRadioRange);
        }
        for attempt in 0..CONNECTIVITY_RETRIES {
            let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(attempt as u64));
            let positions: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.gen::<f64>(), rng.gen::<f64>()))
                .collect();
            let topo = Self::from_positions(positions, radio_range)?;
            if topo.is_connected() {
                return Ok(topo);
            }
        }
        Err(Error::ConnectivityRetries(CONNECTIVITY_RETRIES))
    }

    /// Topology from explicit unit-square positions.
    pub fn from_positions(positions: Vec<(f64, f64)>, radio_range: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Config("topology needs at least one node".into()));
        }
        if !(radio_range > 0.0 && radio_range <= std::f64::consts::SQRT_2) {
            return Err(Error::InvalidRadioRange);
        }
        if positions
            .iter()
            .any(|&(x, y)| !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y))
        {
            return Err(Error::Config(
                "positions must lie in the unit square".into(),
            ));
        }
        let n = positions.len();
        let mut adjacency = vec![BTreeSet::new(); n];
        for i in 0..n {
            for j in i + 1..n {
                let dx = positions[i].0 - positions[j].0;
                let dy = positions[i].1 - positions[j].1;
                if (dx * dx + dy * dy).sqrt() <= radio_range {
                    adjacency[i].insert(j as NodeId);
                    adjacency[j].insert(i as NodeId);
                }
            }
        }
        Ok(Topology {
            n,
            positions,
            radio_range,
            adjacency,
        })
    }

    pub fn contains(&self, v: NodeId) -> bool {
        (v as usize) < self.n
    }

    pub fn neighbors(&self, v: NodeId) -> &BTreeSet<NodeId> {
        &self.adjacency[v as usize]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adjacency[v as usize].len()
    }

    /// Undirected edges, each once, ordered.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for (i, nbrs) in self.adjacency.iter().enumerate() {
            for &j in nbrs.iter() {
                if (i as NodeId) < j {
                    out.push((i as NodeId, j));
                }
            }
        }
        out
    }

    pub fn mean_degree(&self) -> f64 {
        let total: usize = self.adjacency.iter().map(BTreeSet::len).sum();
        total as f64 / self.n as f64
    }

    pub fn is_connected(&self) -> bool {
        self.distances_from(0).iter().all(Option::is_some)
    }

    /// BFS hop distances from `s` to every node.
    pub fn distances_from(&self, s: NodeId) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.n];
        let mut queue = VecDeque::new();
        dist[s as usize] = Some(0);
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize].unwrap();
            for &v in self.neighbors(u) {
                if dist[v as usize].is_none() {
                    dist[v as usize] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn hop_distance(&self, s: NodeId, t: NodeId) -> Option<u32> {
        self.distances_from(s)[t as usize]
    }

    /// Shortest path by hop count, ties broken by the smallest next-node id
    /// at every step. `s = t` gives the singleton path.
    pub fn route(&self, s: NodeId, t: NodeId) -> Result<Vec<NodeId>> {
        if !self.contains(s) {
            return Err(Error::UnknownNode(s));
        }
        if !self.contains(t) {
            return Err(Error::UnknownNode(t));
        }
        if s == t {
            return Ok(vec![s]);
        }
        let dist_to_t = self.distances_from(t);
        if dist_to_t[s as usize].is_none() {
            return Err(Error::Unreachable(s, t));
        }
        let mut path = vec![s];
        let mut current = s;
        while current != t {
            let remaining = dist_to_t[current as usize].unwrap();
            // neighbors iterate ascending, so the first one on a shortest
            // path is the smallest-id choice
            let next = self
                .neighbors(current)
                .iter()
                .copied()
                .find(|&v| dist_to_t[v as usize] == Some(remaining - 1))
                .expect("a shortest path always has a next hop");
            path.push(next);
            current = next;
        }
        Ok(path)
    }

    /// All unordered pairs at hop distance >= `min_hops`, sorted by
    /// (distance descending, then ids ascending).
    pub fn pairs_at_distance(&self, min_hops: u32) -> Vec<(NodeId, NodeId, u32)> {
        let mut out = Vec::new();
        for s in 0..self.n as NodeId {
            let dist = self.distances_from(s);
            for t in s + 1..self.n as NodeId {
                if let Some(d) = dist[t as usize] {
                    if d >= min_hops {
                        out.push((s, t, d));
                    }
                }
            }
        }
        out.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        out
    }

    /// The pair at maximal hop distance (smallest ids on ties).
    pub fn most_distant_pair(&self) -> Option<(NodeId, NodeId, u32)> {
        self.pairs_at_distance(1).into_iter().next()
    }
}

/// Per-message, per-hop and per-byte delivery cost in simulated seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyModel {
    pub per_message: f64,
    pub per_hop: f64,
    pub per_byte: f64,
}

impl LatencyModel {
    pub fn zero() -> Self {
        LatencyModel {
            per_message: 0.0,
            per_hop: 0.0,
            per_byte: 0.0,
        }
    }

    /// Calibrated so a 3-message two-node pairwise run lands near 0.21 s,
    /// the ballpark of slow-radio mote hardware.
    pub fn mote() -> Self {
        LatencyModel {
            per_message: 0.07,
            per_hop: 0.0,
            per_byte: 0.0,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "zero" => Ok(Self::zero()),
            "mote" => Ok(Self::mote()),
            other => Err(Error::Config(format!("unknown latency preset {other:?}"))),
        }
    }

    pub fn delivery_delay(&self, hops: u32, bytes: usize) -> f64 {
        self.per_message + hops as f64 * self.per_hop + bytes as f64 * self.per_byte
    }
}

/// A routed in-flight message.
#[derive(Debug, Clone)]
pub struct SimMessage {
    pub src: NodeId,
    pub dst: NodeId,
    pub payload: Vec<u8>,
    pub hop_path: Vec<NodeId>,
    pub enqueued_at: f64,
    pub deliver_at: f64,
}

impl SimMessage {
    pub fn hops(&self) -> u32 {
        (self.hop_path.len() - 1) as u32
    }
}

/// One delivered event.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub src: NodeId,
    pub dst: NodeId,
    pub msg_type: u8,
    pub hops: u32,
    pub bytes: usize,
}

/// Ordered delivery log with aggregate counters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventTrace {
    pub events: Vec<EventRecord>,
    pub messages: u64,
    pub link_transmissions: u64,
    pub bytes: u64,
    pub completed_at: f64,
}

impl EventTrace {
    fn record(&mut self, event: EventRecord) {
        self.messages += 1;
        self.link_transmissions += event.hops as u64;
        self.bytes += event.bytes as u64;
        self.completed_at = event.time;
        self.events.push(event);
    }

    /// Recomputes the counters from the event list; used to assert
    /// conservation.
    pub fn recount(&self) -> (u64, u64, u64) {
        let messages = self.events.len() as u64;
        let links = self.events.iter().map(|e| e.hops as u64).sum();
        let bytes = self.events.iter().map(|e| e.bytes as u64).sum();
        (messages, links, bytes)
    }

    /// One JSON object per line: time, src, dst, type, hops, bytes.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("trace events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        format!(
            "messages,link_transmissions,bytes,completed_at\n{},{},{},{:.6}\n",
            self.messages, self.link_transmissions, self.bytes, self.completed_at
        )
    }
}

struct Pending {
    deliver_at: f64,
    seq: u64,
    msg: SimMessage,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    // reversed: BinaryHeap is a max-heap, we want the earliest event first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .deliver_at
            .total_cmp(&self.deliver_at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Single-threaded event scheduler. Events are processed in (time, sequence)
/// order; the sequence number makes simultaneous deliveries deterministic.
pub struct Scheduler {
    now: f64,
    seq: u64,
    queue: BinaryHeap<Pending>,
    latency: LatencyModel,
    trace: EventTrace,
}

impl Scheduler {
    pub fn new(latency: LatencyModel) -> Self {
        Scheduler {
            now: 0.0,
            seq: 0,
            queue: BinaryHeap::new(),
            latency,
            trace: EventTrace::default(),
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn latency(&self) -> LatencyModel {
        self.latency
    }

    /// Routes and enqueues a message; delivery happens after the modelled
    /// delay.
    pub fn send(
        &mut self,
        topo: &Topology,
        src: NodeId,
        dst: NodeId,
        payload: Vec<u8>,
    ) -> Result<()> {
        let hop_path = topo.route(src, dst)?;
        let hops = (hop_path.len() - 1) as u32;
        let deliver_at = self.now + self.latency.delivery_delay(hops, payload.len());
        let msg = SimMessage {
            src,
            dst,
            payload,
            hop_path,
            enqueued_at: self.now,
            deliver_at,
        };
        self.queue.push(Pending {
            deliver_at,
            seq: self.seq,
            msg,
        });
        self.seq += 1;
        Ok(())
    }

    /// Pops the earliest pending message, advances the clock, and records
    /// the delivery.
    pub fn deliver_next(&mut self) -> Option<SimMessage> {
        let Pending {
            deliver_at, msg, ..
        } = self.queue.pop()?;
        self.now = deliver_at;
        self.trace.record(EventRecord {
            time: deliver_at,
            src: msg.src,
            dst: msg.dst,
            msg_type: msg.payload.first().copied().unwrap_or(0),
            hops: msg.hops(),
            bytes: msg.payload.len(),
        });
        Some(msg)
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn trace(&self) -> &EventTrace {
        &self.trace
    }

    pub fn into_trace(self) -> EventTrace {
        self.trace
    }
}
