//! Experiment drivers: the density sweep, the group tree demo, the memory
//! report, and the revocation demo, all deterministic per seed and rendered
//! as CSV or JSON with the full config embedded in every output.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::ec::CurveParams;
use crate::error::{Error, Result};
use crate::field::FieldPrime;
use crate::group::{build_group, GroupOrigin, GroupTransport, KeyTree, MemberId, NodeLabel};
use crate::handshake::{PairwiseHandshake, PathHandshake, SessionKey};
use crate::key_matrix::{KeyShare, MasterKeyMatrix};
use crate::lifecycle::{MemoryReport, Network, RevocationReport};
use crate::sim::{LatencyModel, NodeId, Scheduler, Topology};
use crate::wire::{
    GroupBroadcast, WireContext, WireMessage, TYPE_PAIRWISE_MSG1, TYPE_PAIRWISE_MSG2,
    TYPE_PAIRWISE_MSG3, TYPE_PATH_MSG1, TYPE_PATH_MSG2, TYPE_PATH_MSG3,
};

pub const MAX_SWEEP_NODES: u32 = 64;
/// Sampled source-destination pairs for path-key timing.
pub const PATH_SAMPLE_CAP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Full experiment configuration; every output embeds it for
/// reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub nodes: u32,
    pub range: (u32, u32),
    pub key_bits: u32,
    pub curve: String,
    pub group_size: u32,
    pub radio_range: f64,
    pub seed_topology: u64,
    pub seed_protocol: u64,
    pub latency_preset: String,
    pub format: OutputFormat,
    pub victim: Option<u32>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            nodes: 12,
            range: (2, 20),
            key_bits: 16,
            curve: "p192".to_string(),
            group_size: 4,
            radio_range: std::f64::consts::SQRT_2,
            seed_topology: 1,
            seed_protocol: 1,
            latency_preset: "mote".to_string(),
            format: OutputFormat::Csv,
            victim: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 || self.nodes > MAX_SWEEP_NODES {
            return Err(Error::Config(format!(
                "nodes must be in 1..={MAX_SWEEP_NODES}"
            )));
        }
        if self.range.0 < 2 || self.range.1 > MAX_SWEEP_NODES || self.range.0 > self.range.1 {
            return Err(Error::Config(format!(
                "range must lie within 2..={MAX_SWEEP_NODES}"
            )));
        }
        if self.key_bits == 0 || self.key_bits > 62 {
            return Err(Error::Config("key-bits must be in 1..=62".into()));
        }
        if self.group_size == 0 {
            return Err(Error::Config("group-size must be at least 1".into()));
        }
        if !(self.radio_range > 0.0 && self.radio_range <= std::f64::consts::SQRT_2) {
            return Err(Error::Config("radio-range must be in (0, sqrt(2)]".into()));
        }
        self.latency()?;
        self.curve_params()?;
        Ok(())
    }

    /// The smallest prime above the key-size bound 2^key_bits.
    pub fn field_prime(&self) -> Result<FieldPrime> {
        FieldPrime::smallest_above(1u64 << self.key_bits)
    }

    /// Resolves the curve: a preset name, or a path to a curve config file.
    pub fn curve_params(&self) -> Result<CurveParams> {
        match CurveParams::preset(&self.curve) {
            Ok(params) => Ok(params),
            Err(Error::UnknownPreset(_)) if std::path::Path::new(&self.curve).is_file() => {
                let text = std::fs::read_to_string(&self.curve)
                    .map_err(|e| Error::Config(format!("curve file {}: {e}", self.curve)))?;
                CurveParams::from_config_str(&text)
            }
            Err(e) => Err(e),
        }
    }

    pub fn latency(&self) -> Result<LatencyModel> {
        LatencyModel::by_name(&self.latency_preset)
    }

    /// Parses `key = value` lines using the CLI flag names (dashes and
    /// underscores both accepted); unknown keys are rejected.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            let key = key.trim().replace('_', "-");
            let value = value.trim();
            let bad =
                |what: &str| Error::Config(format!("line {}: bad {what}: {value:?}", lineno + 1));
            match key.as_str() {
                "nodes" => config.nodes = value.parse().map_err(|_| bad("nodes"))?,
                "range" => config.range = parse_range(value)?,
                "key-bits" => config.key_bits = value.parse().map_err(|_| bad("key-bits"))?,
                "curve" => config.curve = value.to_string(),
                "group-size" => config.group_size = value.parse().map_err(|_| bad("group-size"))?,
                "radio-range" => {
                    config.radio_range = value.parse().map_err(|_| bad("radio-range"))?
                }
                "seed-topology" => {
                    config.seed_topology = value.parse().map_err(|_| bad("seed-topology"))?
                }
                "seed-protocol" => {
                    config.seed_protocol = value.parse().map_err(|_| bad("seed-protocol"))?
                }
                "latency-preset" => config.latency_preset = value.to_string(),
                "format" => config.format = parse_format(value)?,
                "victim" => config.victim = Some(value.parse().map_err(|_| bad("victim"))?),
                other => return Err(Error::Config(format!("unknown config key {other:?}"))),
            }
        }
        Ok(config)
    }

    fn csv_columns() -> &'static str {
        "key_bits,curve,group_size,radio_range,seed_topology,seed_protocol,latency_preset"
    }

    /// One-line config echo for the text reports.
    pub fn summary_line(&self) -> String {
        format!(
            "config: nodes={} group-size={} radio-range={} key-bits={} curve={} seed-topology={} seed-protocol={} latency-preset={}",
            self.nodes,
            self.group_size,
            self.radio_range,
            self.key_bits,
            self.curve,
            self.seed_topology,
            self.seed_protocol,
            self.latency_preset
        )
    }

    fn csv_values(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.key_bits,
            self.curve,
            self.group_size,
            self.radio_range,
            self.seed_topology,
            self.seed_protocol,
            self.latency_preset
        )
    }
}

pub fn parse_range(value: &str) -> Result<(u32, u32)> {
    let (lo, hi) = value
        .split_once("..")
        .ok_or_else(|| Error::Config(format!("range must look like 2..20, got {value:?}")))?;
    let lo = lo
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad range start {lo:?}")))?;
    let hi = hi
        .trim()
        .trim_start_matches('=')
        .parse()
        .map_err(|_| Error::Config(format!("bad range end {hi:?}")))?;
    Ok((lo, hi))
}

pub fn parse_format(value: &str) -> Result<OutputFormat> {
    match value {
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        other => Err(Error::Config(format!(
            "format must be csv or json, got {other:?}"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Protocol drivers over the simulator
// ---------------------------------------------------------------------------

fn decode(ctx: &WireContext, msg: crate::sim::SimMessage, expected: u8) -> Result<WireMessage> {
    WireMessage::decode_expected(ctx, &msg.payload, expected)
}

/// Runs one pairwise handshake across the simulated network (three routed
/// messages) and returns both endpoints' keys.
pub fn sim_pairwise(
    sched: &mut Scheduler,
    topo: &Topology,
    ctx: &WireContext,
    shares: &BTreeMap<NodeId, KeyShare>,
    initiator: NodeId,
    responder: NodeId,
) -> Result<(SessionKey, SessionKey)> {
    let (mut ini, msg1) = PairwiseHandshake::initiate(&shares[&initiator], responder)?;
    sched.send(
        topo,
        initiator,
        responder,
        WireMessage::PairwiseMsg1(msg1).encode(ctx),
    )?;
    let delivered = sched.deliver_next().expect("msg1 pending");
    let msg1 = match decode(ctx, delivered, TYPE_PAIRWISE_MSG1)? {
        WireMessage::PairwiseMsg1(m) => m,
        _ => unreachable!(),
    };

    let (mut rsp, msg2) = PairwiseHandshake::respond(&shares[&responder], &msg1)?;
    sched.send(
        topo,
        responder,
        initiator,
        WireMessage::PairwiseMsg2(msg2).encode(ctx),
    )?;
    let delivered = sched.deliver_next().expect("msg2 pending");
    let msg2 = match decode(ctx, delivered, TYPE_PAIRWISE_MSG2)? {
        WireMessage::PairwiseMsg2(m) => m,
        _ => unreachable!(),
    };

    let (key_i, msg3) = ini.confirm(&msg2)?;
    sched.send(
        topo,
        initiator,
        responder,
        WireMessage::PairwiseMsg3(msg3).encode(ctx),
    )?;
    let delivered = sched.deliver_next().expect("msg3 pending");
    let msg3 = match decode(ctx, delivered, TYPE_PAIRWISE_MSG3)? {
        WireMessage::PairwiseMsg3(m) => m,
        _ => unreachable!(),
    };
    let key_j = rsp.finalize(&msg3)?;
    Ok((key_i, key_j))
}

/// Runs one path handshake across the simulated network. On a failed
/// verification at the initiator the abort broadcast goes out before the
/// error propagates.
pub fn sim_path(
    sched: &mut Scheduler,
    topo: &Topology,
    ctx: &WireContext,
    shares: &BTreeMap<NodeId, KeyShare>,
    rng: &mut impl rand::Rng,
    initiator: NodeId,
    responder: NodeId,
) -> Result<(SessionKey, SessionKey)> {
    let curve = &ctx.curve;
    let (mut ini, msg1) = PathHandshake::initiate(&shares[&initiator], curve, rng, responder)?;
    sched.send(
        topo,
        initiator,
        responder,
        WireMessage::PathMsg1(msg1).encode(ctx),
    )?;
    let delivered = sched.deliver_next().expect("msg1 pending");
    let msg1 = match decode(ctx, delivered, TYPE_PATH_MSG1)? {
        WireMessage::PathMsg1(m) => m,
        _ => unreachable!(),
    };

    let (mut rsp, msg2) = PathHandshake::respond(&shares[&responder], curve, rng, &msg1)?;
    sched.send(
        topo,
        responder,
        initiator,
        WireMessage::PathMsg2(msg2).encode(ctx),
    )?;
    let delivered = sched.deliver_next().expect("msg2 pending");
    let msg2 = match decode(ctx, delivered, TYPE_PATH_MSG2)? {
        WireMessage::PathMsg2(m) => m,
        _ => unreachable!(),
    };

    let (key_i, msg3) = match ini.confirm(&msg2) {
        Ok(done) => done,
        Err(e) => {
            let abort = WireMessage::Abort(ini.abort_message()).encode(ctx);
            sched.send(topo, initiator, responder, abort)?;
            sched.deliver_next();
            return Err(e);
        }
    };
    sched.send(
        topo,
        initiator,
        responder,
        WireMessage::PathMsg3(msg3).encode(ctx),
    )?;
    let delivered = sched.deliver_next().expect("msg3 pending");
    let msg3 = match decode(ctx, delivered, TYPE_PATH_MSG3)? {
        WireMessage::PathMsg3(m) => m,
        _ => unreachable!(),
    };
    let key_j = rsp.finalize(&msg3)?;
    Ok((key_i, key_j))
}

/// Scheduling of independent handshakes in a sweep: one at a time (total
/// time well defined) or all started at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Serial,
    Concurrent,
}

/// Establishes pairwise keys for every node pair (full mesh). In serial
/// mode each handshake completes before the next begins; in concurrent mode
/// all initiations enter the queue at once and deliveries interleave
/// deterministically.
pub fn sim_pairwise_mesh(
    sched: &mut Scheduler,
    topo: &Topology,
    ctx: &WireContext,
    shares: &BTreeMap<NodeId, KeyShare>,
    mode: SweepMode,
) -> Result<BTreeMap<(NodeId, NodeId), SessionKey>> {
    let n = topo.n as NodeId;
    let mut keys = BTreeMap::new();
    match mode {
        SweepMode::Serial => {
            for i in 0..n {
                for j in i + 1..n {
                    let (key_i, key_j) = sim_pairwise(sched, topo, ctx, shares, i, j)?;
                    debug_assert_eq!(key_i, key_j);
                    keys.insert((i, j), key_i);
                }
            }
        }
        SweepMode::Concurrent => {
            let mut initiators = BTreeMap::new();
            let mut responders: BTreeMap<(NodeId, NodeId), PairwiseHandshake> = BTreeMap::new();
            for i in 0..n {
                for j in i + 1..n {
                    let (state, msg1) = PairwiseHandshake::initiate(&shares[&i], j)?;
                    initiators.insert((i, j), state);
                    sched.send(topo, i, j, WireMessage::PairwiseMsg1(msg1).encode(ctx))?;
                }
            }
            while let Some(delivered) = sched.deliver_next() {
                let (src, dst) = (delivered.src, delivered.dst);
                match WireMessage::decode(ctx, &delivered.payload)? {
                    WireMessage::PairwiseMsg1(m) => {
                        let (state, msg2) = PairwiseHandshake::respond(&shares[&dst], &m)?;
                        responders.insert((src, dst), state);
                        sched.send(topo, dst, src, WireMessage::PairwiseMsg2(msg2).encode(ctx))?;
                    }
                    WireMessage::PairwiseMsg2(m) => {
                        let state = initiators.get_mut(&(dst, src)).expect("known handshake");
                        let (key, msg3) = state.confirm(&m)?;
                        keys.insert((dst, src), key);
                        sched.send(topo, dst, src, WireMessage::PairwiseMsg3(msg3).encode(ctx))?;
                    }
                    WireMessage::PairwiseMsg3(m) => {
                        let state = responders.get_mut(&(src, dst)).expect("known handshake");
                        let key = state.finalize(&m)?;
                        debug_assert_eq!(Some(&key), keys.get(&(src, dst)));
                    }
                    other => {
                        return Err(Error::Config(format!(
                            "unexpected message in mesh: type {}",
                            other.type_byte()
                        )))
                    }
                }
            }
        }
    }
    Ok(keys)
}

/// Group transport that routes every exchange and sponsor broadcast through
/// the scheduler.
pub struct SimTransport<'a> {
    pub sched: &'a mut Scheduler,
    pub topo: &'a Topology,
    pub ctx: &'a WireContext,
    pub shares: &'a BTreeMap<NodeId, KeyShare>,
}

impl GroupTransport for SimTransport<'_> {
    fn pairwise_exchange(&mut self, a: MemberId, b: MemberId) -> Result<SessionKey> {
        let (key, _) = sim_pairwise(self.sched, self.topo, self.ctx, self.shares, a, b)?;
        Ok(key)
    }

    fn sponsor_broadcast(
        &mut self,
        sponsor: MemberId,
        recipients: &[MemberId],
        broadcast: &GroupBroadcast,
    ) -> Result<()> {
        let bytes = WireMessage::GroupBroadcast(broadcast.clone()).encode(self.ctx);
        for &r in recipients {
            self.sched.send(self.topo, sponsor, r, bytes.clone())?;
            self.sched.deliver_next();
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

/// One row of the density sweep: the timing summary (pairwise total, path
/// average, group total) plus the message and link-transmission counters
/// that make the structural claims checkable.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub nodes: u32,
    pub pairwise_total_s: f64,
    pub path_avg_s: f64,
    pub group_total_s: f64,
    pub pairwise_msgs: u64,
    pub pairwise_links: u64,
    pub path_msgs: u64,
    pub path_links: u64,
    pub group_msgs: u64,
    pub group_links: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub config: ExperimentConfig,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn render(&self) -> String {
        match self.config.format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => to_json(self),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "nodes,pairwise_total_s,path_avg_s,group_total_s,pairwise_msgs,pairwise_links,path_msgs,path_links,group_msgs,group_links,{}\n",
            ExperimentConfig::csv_columns()
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{},{},{},{},{},{},{}\n",
                r.nodes,
                r.pairwise_total_s,
                r.path_avg_s,
                r.group_total_s,
                r.pairwise_msgs,
                r.pairwise_links,
                r.path_msgs,
                r.path_links,
                r.group_msgs,
                r.group_links,
                self.config.csv_values()
            ));
        }
        out
    }

    pub fn verdict_ok(&self) -> bool {
        !self.rows.is_empty()
    }
}

/// Per node count in the range: full-mesh pairwise establishment, path
/// establishment over sampled multi-hop pairs, and group establishment over
/// all nodes, all serially timed under the configured latency model.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    let q = config.field_prime()?;
    let curve = config.curve_params()?;
    let latency = config.latency()?;
    let ctx = WireContext {
        q,
        curve: curve.clone(),
    };
    let mut rows = Vec::new();
    for n in config.range.0..=config.range.1 {
        let topo = Topology::generate(
            n as usize,
            config.radio_range,
            config.seed_topology.wrapping_add(n as u64),
        )?;
        let master = MasterKeyMatrix::generate(n as usize, q, config.seed_protocol ^ n as u64)?;
        let shares: BTreeMap<NodeId, KeyShare> = (0..n)
            .map(|i| (i, master.assign_share(i as usize).unwrap()))
            .collect();
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed_protocol.wrapping_add(n as u64));

        // pairwise: full mesh, serial
        let mut sched = Scheduler::new(latency);
        sim_pairwise_mesh(&mut sched, &topo, &ctx, &shares, SweepMode::Serial)?;
        let pairwise = sched.into_trace();

        // path keys over sampled multi-hop pairs (all pairs when the
        // topology has diameter one)
        let mut sched = Scheduler::new(latency);
        let mut pairs = topo.pairs_at_distance(2);
        if pairs.is_empty() {
            pairs = topo.pairs_at_distance(1);
        }
        pairs.truncate(PATH_SAMPLE_CAP);
        let mut total = 0.0;
        for &(s, t, _) in &pairs {
            let started = sched.now();
            sim_path(&mut sched, &topo, &ctx, &shares, &mut rng, s, t)?;
            total += sched.now() - started;
        }
        let path_avg = if pairs.is_empty() {
            0.0
        } else {
            total / pairs.len() as f64
        };
        let path = sched.into_trace();

        // group over all nodes
        let mut sched = Scheduler::new(latency);
        let members: Vec<MemberId> = (0..n).collect();
        {
            let mut transport = SimTransport {
                sched: &mut sched,
                topo: &topo,
                ctx: &ctx,
                shares: &shares,
            };
            build_group(&members, &ctx.curve, &mut rng, &mut transport)?;
        }
        let group = sched.into_trace();

        rows.push(SweepRow {
            nodes: n,
            pairwise_total_s: pairwise.completed_at,
            path_avg_s: path_avg,
            group_total_s: group.completed_at,
            pairwise_msgs: pairwise.messages,
            pairwise_links: pairwise.link_transmissions,
            path_msgs: path.messages,
            path_links: path.link_transmissions,
            group_msgs: group.messages,
            group_links: group.link_transmissions,
        });
    }
    Ok(SweepReport {
        config: config.clone(),
        rows,
    })
}

// ---------------------------------------------------------------------------
// Group demo
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct RoundGroupSummary {
    pub label: String,
    pub members: Vec<MemberId>,
    pub origin: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupDemoReport {
    pub config: ExperimentConfig,
    pub nodes: u32,
    pub rounds: Vec<Vec<RoundGroupSummary>>,
    pub height: u32,
    pub all_members_agree: bool,
    /// Exact check of the canonical six-member construction; only set when
    /// nodes == 6.
    pub canonical_shape_ok: Option<bool>,
}

impl GroupDemoReport {
    pub fn verdict_ok(&self) -> bool {
        self.all_members_agree && self.canonical_shape_ok.unwrap_or(true)
    }

    pub fn render(&self) -> String {
        match self.config.format {
            OutputFormat::Json => to_json(self),
            OutputFormat::Csv => {
                let mut out = format!("{}\n", self.config.summary_line());
                for (i, round) in self.rounds.iter().enumerate() {
                    out.push_str(&format!("round {}:\n", i + 1));
                    for g in round {
                        let members: Vec<String> =
                            g.members.iter().map(|m| format!("M{m}")).collect();
                        out.push_str(&format!(
                            "  {}{{{}}} ({})\n",
                            g.label,
                            members.join(","),
                            g.origin
                        ));
                    }
                }
                out.push_str(&format!("rounds: {}\n", self.height));
                if let Some(shape) = self.canonical_shape_ok {
                    out.push_str(&format!(
                        "six-member canonical shape: {}\n",
                        if shape { "match" } else { "MISMATCH" }
                    ));
                }
                out.push_str(&format!(
                    "verdict: {}\n",
                    if self.verdict_ok() { "OK" } else { "FAILED" }
                ));
                out
            }
        }
    }
}

fn origin_text(origin: &GroupOrigin) -> String {
    match origin {
        GroupOrigin::Pair(a, b) => format!("pairwise M{a}+M{b}"),
        GroupOrigin::Singleton(m) => format!("singleton M{m}"),
        GroupOrigin::Merged { left, right } => format!("merge {left}+{right}"),
        GroupOrigin::Carried { from } => format!("renamed from {from}"),
    }
}

/// Checks the canonical 6-member construction: three pairs, then a merge
/// with the third pair carried, then the final merge.
fn canonical_shape_ok(tree: &KeyTree) -> bool {
    let expect: Vec<Vec<(NodeLabel, Vec<MemberId>)>> = vec![
        vec![
            (NodeLabel::new(1, 1), vec![1, 2]),
            (NodeLabel::new(1, 2), vec![3, 4]),
            (NodeLabel::new(1, 3), vec![5, 6]),
        ],
        vec![
            (NodeLabel::new(2, 1), vec![1, 2, 3, 4]),
            (NodeLabel::new(2, 2), vec![5, 6]),
        ],
        vec![(NodeLabel::new(3, 1), vec![1, 2, 3, 4, 5, 6])],
    ];
    if tree.rounds.len() != expect.len() {
        return false;
    }
    for (round, want) in tree.rounds.iter().zip(&expect) {
        if round.len() != want.len() {
            return false;
        }
        for (group, (label, members)) in round.iter().zip(want) {
            if group.label != *label || group.members != *members {
                return false;
            }
        }
    }
    matches!(
        &tree.rounds[1][1].origin,
        GroupOrigin::Carried { from } if *from == NodeLabel::new(1, 3)
    )
}

/// Builds a group over members 1..=n and verifies that every member derives
/// the same key.
pub fn run_group_demo(config: &ExperimentConfig) -> Result<GroupDemoReport> {
    config.validate()?;
    let n = config.nodes;
    let q = config.field_prime()?;
    let curve = config.curve_params()?;
    // members are named 1..=n; share indices match
    let master = MasterKeyMatrix::generate(n as usize + 1, q, config.seed_protocol ^ 0x6d65)?;
    let shares: BTreeMap<MemberId, KeyShare> = (1..=n)
        .map(|i| (i, master.assign_share(i as usize).unwrap()))
        .collect();
    let members: Vec<MemberId> = (1..=n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed_protocol);
    let outcome = build_group(
        &members,
        &curve,
        &mut rng,
        &mut crate::group::LocalTransport { shares: &shares },
    )?;
    let rounds = outcome
        .tree
        .rounds
        .iter()
        .map(|round| {
            round
                .iter()
                .map(|g| RoundGroupSummary {
                    label: g.label.to_string(),
                    members: g.members.clone(),
                    origin: origin_text(&g.origin),
                })
                .collect()
        })
        .collect();
    let keys: Vec<_> = outcome.member_keys.values().collect();
    let all_members_agree = keys.windows(2).all(|w| w[0] == w[1])
        && keys
            .first()
            .map(|k| **k == outcome.tree.group_key())
            .unwrap_or(false);
    let canonical = (n == 6).then(|| canonical_shape_ok(&outcome.tree));
    Ok(GroupDemoReport {
        config: config.clone(),
        nodes: n,
        rounds,
        height: outcome.tree.height,
        all_members_agree,
        canonical_shape_ok: canonical,
    })
}

// ---------------------------------------------------------------------------
// Memory report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct MemoryDemoReport {
    pub config: ExperimentConfig,
    pub report: MemoryReport,
    pub all_within_prediction: bool,
}

impl MemoryDemoReport {
    pub fn verdict_ok(&self) -> bool {
        self.all_within_prediction
    }

    pub fn render(&self) -> String {
        match self.config.format {
            OutputFormat::Json => to_json(self),
            OutputFormat::Csv => {
                let mut out = format!(
                    "node,neighbors,pairwise,group,path,predicted,within,{}\n",
                    ExperimentConfig::csv_columns()
                );
                for r in &self.report.rows {
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{},{}\n",
                        r.node,
                        r.neighbors,
                        r.pairwise,
                        r.group,
                        r.path,
                        r.predicted,
                        r.within,
                        self.config.csv_values()
                    ));
                }
                out.push_str(&format!(
                    "# formula: k + ceil(log2(group)); k={} group={} -> {} keys\n",
                    self.report.headline_k,
                    self.report.headline_group,
                    self.report.headline_prediction
                ));
                out.push_str(&format!(
                    "# verdict: {}\n",
                    if self.verdict_ok() { "OK" } else { "FAILED" }
                ));
                out
            }
        }
    }
}

fn establish_network(config: &ExperimentConfig) -> Result<Network> {
    let topo = Topology::generate(
        config.nodes as usize,
        config.radio_range,
        config.seed_topology,
    )?;
    let mut pairs = topo.pairs_at_distance(2);
    pairs.truncate(PATH_SAMPLE_CAP);
    let path_pairs: Vec<(NodeId, NodeId)> = pairs.iter().map(|&(s, t, _)| (s, t)).collect();
    Network::establish(
        topo,
        config.field_prime()?,
        &config.curve_params()?,
        config.group_size as usize,
        &path_pairs,
        config.seed_protocol,
    )
}

/// Establishes a fresh network and reports per-node key counts against the
/// formula prediction.
pub fn run_memory_report(config: &ExperimentConfig) -> Result<MemoryDemoReport> {
    config.validate()?;
    let net = establish_network(config)?;
    let report = net.memory_report();
    let all_within_prediction = report.rows.iter().all(|r| r.within);
    Ok(MemoryDemoReport {
        config: config.clone(),
        report,
        all_within_prediction,
    })
}

// ---------------------------------------------------------------------------
// Revocation demo
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct RevokeDemoReport {
    pub config: ExperimentConfig,
    pub victim: NodeId,
    pub report: RevocationReport,
    /// No surviving store references the victim afterwards.
    pub purity_ok: bool,
    /// Keys not involving the victim are byte-identical; groups that
    /// contained it changed epoch and value with all members agreeing.
    pub non_disturbance_ok: bool,
}

impl RevokeDemoReport {
    pub fn verdict_ok(&self) -> bool {
        self.purity_ok && self.non_disturbance_ok
    }

    pub fn render(&self) -> String {
        match self.config.format {
            OutputFormat::Json => to_json(self),
            OutputFormat::Csv => {
                let mut out = format!("{}\nvictim: {}\n", self.config.summary_line(), self.victim);
                out.push_str(&format!(
                    "pairwise removed: {}\npath removed: {}\ngroups rekeyed (new epochs): {:?}\nbroadcast reached: {}\n",
                    self.report.pairwise_removed,
                    self.report.path_removed,
                    self.report.groups_rekeyed,
                    self.report.broadcast_reached
                ));
                out.push_str(&format!(
                    "post-revocation audit: purity {}, non-disturbance {}\nverdict: {}\n",
                    if self.purity_ok { "clean" } else { "VIOLATED" },
                    if self.non_disturbance_ok {
                        "clean"
                    } else {
                        "VIOLATED"
                    },
                    if self.verdict_ok() { "OK" } else { "FAILED" }
                ));
                out
            }
        }
    }
}

/// Establishes a network, revokes the victim, and audits the stores.
pub fn run_revoke_demo(config: &ExperimentConfig) -> Result<RevokeDemoReport> {
    config.validate()?;
    let victim = config.victim.unwrap_or(1);
    let mut net = establish_network(config)?;
    if !net.topology.contains(victim) {
        return Err(Error::UnknownNode(victim));
    }
    let before = net.stores.clone();
    let old_groups: Vec<(usize, bool, u32, [u8; 32])> = net
        .groups
        .iter()
        .map(|g| {
            (
                g.id,
                g.tree.members.contains(&victim),
                g.tree.epoch,
                g.tree.group_key().bytes,
            )
        })
        .collect();
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed_protocol ^ 0x7265766f);
    let report = net.revoke(victim, &mut rng)?;

    let purity_ok = net
        .surviving()
        .all(|u| !net.stores[u as usize].references(victim));
    let mut non_disturbance_ok = true;
    for u in net.surviving() {
        let (pre, post) = (&before[u as usize], &net.stores[u as usize]);
        for (peer, bytes) in pre.pairwise_entries() {
            if *peer != victim && post.pairwise_entries().get(peer) != Some(bytes) {
                non_disturbance_ok = false;
            }
        }
        for (peer, bytes) in pre.path_entries() {
            if *peer != victim && post.path_entries().get(peer) != Some(bytes) {
                non_disturbance_ok = false;
            }
        }
        for (id, entry) in pre.group_entries() {
            if !entry.members.contains(&victim) && post.group_entries().get(id) != Some(entry) {
                non_disturbance_ok = false;
            }
        }
    }
    for (gid, contained, old_epoch, old_key) in old_groups {
        let g = &net.groups[gid];
        if contained && !g.tree.members.is_empty() {
            let keys: Vec<_> = g.member_keys.values().collect();
            let agree = keys.windows(2).all(|w| w[0] == w[1]);
            if g.tree.epoch <= old_epoch || g.tree.group_key().bytes == old_key || !agree {
                non_disturbance_ok = false;
            }
        } else if !contained && (g.tree.epoch != old_epoch || g.tree.group_key().bytes != old_key) {
            non_disturbance_ok = false;
        }
    }

    Ok(RevokeDemoReport {
        config: config.clone(),
        victim,
        report,
        purity_ok,
        non_disturbance_ok,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("reports serialize");
    out.push('\n');
    out
}
