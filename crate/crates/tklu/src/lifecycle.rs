//! Per-node key storage and the compromised-node revocation cascade.
//!
//! Each node's store holds its pairwise keys (one per 1-hop neighbor), path
//! keys, and one group entry per round of each group it belongs to — the
//! round-level subgroup keys are what a member accumulates while the tree is
//! built, which is why a member of a group of size g holds ceil(log2 g)
//! group entries.
//!
//! Revocation removes every key referencing the compromised node, rekeys the
//! groups that contained it, and floods a notice from the sink so every node
//! audits its store. The flood relays over the full radio graph (a radio
//! broadcast is overheard regardless of the compromised node's cooperation),
//! so it reaches every surviving node on a connected topology.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::ec::CurveParams;
use crate::error::{Error, Result};
use crate::field::FieldPrime;
use crate::group::{
    build_group, rekey_on_leave, sponsor_of, GroupKey, KeyTree, LocalTransport, MemberId,
    NodeLabel, RoundGroup,
};
use crate::handshake::{PairwiseHandshake, PathHandshake, SessionKey};
use crate::key_matrix::{KeyShare, MasterKeyMatrix};
use crate::sim::{NodeId, Topology};
use crate::tag::{hash_tag, HashTag, GROUP_KEY, SINK_REVOKE};
use crate::wire::RevocationNotice;

/// Identifies one per-round group entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroupEntryId {
    pub group: usize,
    pub round: u32,
    pub label: NodeLabel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupEntry {
    pub members: BTreeSet<MemberId>,
    pub epoch: u32,
    pub key: [u8; 32],
}

/// A node's key chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyStore {
    pub owner: NodeId,
    pairwise: BTreeMap<NodeId, [u8; 32]>,
    path: BTreeMap<NodeId, [u8; 32]>,
    group: BTreeMap<GroupEntryId, GroupEntry>,
}

impl KeyStore {
    pub fn new(owner: NodeId) -> Self {
        KeyStore {
            owner,
            pairwise: BTreeMap::new(),
            path: BTreeMap::new(),
            group: BTreeMap::new(),
        }
    }

    /// At most one pairwise key per neighbor.
    pub fn put_pairwise(&mut self, peer: NodeId, key: &SessionKey) -> Result<()> {
        if self.pairwise.contains_key(&peer) {
            return Err(Error::DuplicateEntry(peer));
        }
        self.pairwise.insert(peer, key.bytes);
        Ok(())
    }

    pub fn put_path(&mut self, peer: NodeId, key: &SessionKey) {
        self.path.insert(peer, key.bytes);
    }

    pub fn put_group(&mut self, id: GroupEntryId, entry: GroupEntry) {
        self.group.insert(id, entry);
    }

    /// Removes an entry; `false` signals it was absent.
    pub fn remove_pairwise(&mut self, peer: NodeId) -> bool {
        self.pairwise.remove(&peer).is_some()
    }

    pub fn remove_path(&mut self, peer: NodeId) -> bool {
        self.path.remove(&peer).is_some()
    }

    pub fn pairwise_count(&self) -> usize {
        self.pairwise.len()
    }

    pub fn path_count(&self) -> usize {
        self.path.len()
    }

    pub fn group_count(&self) -> usize {
        self.group.len()
    }

    pub fn pairwise_entries(&self) -> &BTreeMap<NodeId, [u8; 32]> {
        &self.pairwise
    }

    pub fn path_entries(&self) -> &BTreeMap<NodeId, [u8; 32]> {
        &self.path
    }

    pub fn group_entries(&self) -> &BTreeMap<GroupEntryId, GroupEntry> {
        &self.group
    }

    /// True if any entry's peer set contains `v`.
    pub fn references(&self, v: NodeId) -> bool {
        self.pairwise.contains_key(&v)
            || self.path.contains_key(&v)
            || self.group.values().any(|e| e.members.contains(&v))
    }

    /// Drops every entry referencing `v`; returns (pairwise, path, group)
    /// removal counts.
    pub fn purge_references(&mut self, v: NodeId) -> (usize, usize, usize) {
        let pw = self.remove_pairwise(v) as usize;
        let path = self.remove_path(v) as usize;
        let before = self.group.len();
        self.group.retain(|_, e| !e.members.contains(&v));
        (pw, path, before - self.group.len())
    }
}

/// One cluster's group state.
#[derive(Debug, Clone)]
pub struct GroupState {
    pub id: usize,
    pub tree: KeyTree,
    pub member_keys: BTreeMap<MemberId, GroupKey>,
}

impl GroupState {
    /// The group leader: the sponsor of the whole tree.
    pub fn leader(&self) -> MemberId {
        sponsor_of(&self.tree.root)
    }
}

/// Outcome of a revocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RevocationReport {
    pub revoked: NodeId,
    pub pairwise_removed: usize,
    pub path_removed: usize,
    /// New epoch of each rekeyed group.
    pub groups_rekeyed: Vec<u32>,
    /// Surviving nodes the sink flood reached (the sink originates).
    pub broadcast_reached: usize,
}

/// Per-node row of the memory report.
#[derive(Debug, Clone, Serialize)]
pub struct NodeMemoryRow {
    pub node: NodeId,
    pub neighbors: usize,
    pub pairwise: usize,
    pub group: usize,
    pub path: usize,
    pub predicted: u32,
    pub within: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MemoryReport {
    pub rows: Vec<NodeMemoryRow>,
    /// The headline formula row: k = 40 neighbors, group size 80 predicts 47
    /// stored keys.
    pub headline_k: u32,
    pub headline_group: u32,
    pub headline_prediction: u32,
}

pub fn ceil_log2(n: u32) -> u32 {
    if n <= 1 {
        0
    } else {
        32 - (n - 1).leading_zeros()
    }
}

/// Predicted keys per node: k pairwise plus ceil(log2(group size)) group
/// keys; path keys are ignored as a small number.
pub fn formula_prediction(k: u32, group_size: u32) -> u32 {
    k + ceil_log2(group_size)
}

/// The sink's 32-byte tag over a revoked id (shared-key stand-in, no PKI).
pub fn revocation_tag(sink_key: &[u8; 32], revoked: NodeId) -> HashTag {
    let mut payload = revoked.to_be_bytes().to_vec();
    payload.extend_from_slice(sink_key);
    hash_tag(SINK_REVOKE, &payload)
}

/// A fully established network: topology, shares, per-node stores and group
/// states.
#[derive(Debug, Clone)]
pub struct Network {
    pub topology: Topology,
    pub shares: BTreeMap<NodeId, KeyShare>,
    pub stores: Vec<KeyStore>,
    pub groups: Vec<GroupState>,
    pub group_of: BTreeMap<NodeId, usize>,
    pub sink: NodeId,
    pub sink_key: [u8; 32],
    pub revoked: BTreeSet<NodeId>,
}

impl Network {
    /// Runs the whole establishment phase: pairwise keys on every radio
    /// link, path keys for the given pairs, and group keys per id-contiguous
    /// cluster of `group_size` nodes. Deterministic per seed.
    pub fn establish(
        topology: Topology,
        q: FieldPrime,
        curve: &CurveParams,
        group_size: usize,
        path_pairs: &[(NodeId, NodeId)],
        seed: u64,
    ) -> Result<Self> {
        if group_size == 0 {
            return Err(Error::Config("group size must be at least 1".into()));
        }
        let n = topology.n;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut sink_key = [0u8; 32];
        rand::Rng::fill(&mut rng, &mut sink_key);

        let master_seed: u64 = rand::Rng::gen(&mut rng);
        let master = MasterKeyMatrix::generate(n, q, master_seed)?;
        let shares: BTreeMap<NodeId, KeyShare> = (0..n)
            .map(|i| (i as NodeId, master.assign_share(i).unwrap()))
            .collect();
        let mut stores: Vec<KeyStore> = (0..n).map(|i| KeyStore::new(i as NodeId)).collect();

        // pairwise keys between 1-hop neighbors
        for (i, j) in topology.edges() {
            let key = run_pairwise(&shares[&i], &shares[&j])?;
            stores[i as usize].put_pairwise(j, &key)?;
            stores[j as usize].put_pairwise(i, &key)?;
        }

        // path keys across multi-hop pairs
        for &(s, t) in path_pairs {
            if !topology.contains(s) || !topology.contains(t) {
                return Err(Error::UnknownNode(s.max(t)));
            }
            let key = run_path(&shares[&s], &shares[&t], curve, &mut rng)?;
            stores[s as usize].put_path(t, &key);
            stores[t as usize].put_path(s, &key);
        }

        // group keys per cluster of ascending ids
        let mut groups = Vec::new();
        let mut group_of = BTreeMap::new();
        let ids: Vec<NodeId> = (0..n as NodeId).collect();
        for (gid, chunk) in ids.chunks(group_size).enumerate() {
            let outcome = build_group(
                chunk,
                curve,
                &mut rng,
                &mut LocalTransport { shares: &shares },
            )?;
            for &m in chunk {
                group_of.insert(m, gid);
            }
            if outcome.tree.members.len() >= 2 {
                for (round_index, round) in outcome.tree.rounds.iter().enumerate() {
                    for rg in round {
                        for &m in &rg.members {
                            stores[m as usize].put_group(
                                GroupEntryId {
                                    group: gid,
                                    round: round_index as u32 + 1,
                                    label: rg.label,
                                },
                                GroupEntry {
                                    members: rg.members.iter().copied().collect(),
                                    epoch: 0,
                                    key: subgroup_key_bytes(curve, rg),
                                },
                            );
                        }
                    }
                }
            }
            groups.push(GroupState {
                id: gid,
                tree: outcome.tree,
                member_keys: outcome.member_keys,
            });
        }

        Ok(Network {
            topology,
            shares,
            stores,
            groups,
            group_of,
            sink: 0,
            sink_key,
            revoked: BTreeSet::new(),
        })
    }

    pub fn surviving(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.topology.n as NodeId).filter(move |v| !self.revoked.contains(v))
    }

    /// The revocation cascade: neighbors drop the pairwise keys, group
    /// leaders rekey, path key holders drop their entries, and the sink
    /// floods the node id so every survivor audits its store.
    pub fn revoke(&mut self, v: NodeId, rng: &mut impl rand::Rng) -> Result<RevocationReport> {
        if !self.topology.contains(v) {
            return Err(Error::UnknownNode(v));
        }

        let mut pairwise_removed = 0;
        let mut path_removed = 0;
        for u in 0..self.topology.n as NodeId {
            if u == v || self.revoked.contains(&u) {
                continue;
            }
            pairwise_removed += self.stores[u as usize].remove_pairwise(v) as usize;
            path_removed += self.stores[u as usize].remove_path(v) as usize;
        }

        // group leaders trigger the rekey for every group containing v
        let mut groups_rekeyed = Vec::new();
        for gid in 0..self.groups.len() {
            if !self.groups[gid].tree.members.contains(&v) {
                continue;
            }
            if self.groups[gid].tree.members.len() == 1 {
                // v was alone; the group dissolves with nothing to rekey
                self.groups[gid].tree.members.clear();
                self.groups[gid].member_keys.clear();
                continue;
            }
            let shares = self.shares.clone();
            let state = &mut self.groups[gid];
            let outcome = rekey_on_leave(
                &mut state.tree,
                v,
                rng,
                &mut LocalTransport { shares: &shares },
            )?;
            state.member_keys = outcome.member_keys.clone();
            let epoch = state.tree.epoch;
            // drop the stale entries, then install the recomputed chain
            for u in 0..self.topology.n as NodeId {
                if u == v || self.revoked.contains(&u) {
                    continue;
                }
                let store = &mut self.stores[u as usize];
                let stale: Vec<GroupEntryId> = store
                    .group
                    .iter()
                    .filter(|(id, e)| id.group == gid && e.members.contains(&v))
                    .map(|(id, _)| *id)
                    .collect();
                for id in stale {
                    store.group.remove(&id);
                }
            }
            for updated in &outcome.updated {
                let key = updated.key_bytes(state.tree.curve());
                let members: BTreeSet<MemberId> = updated.members.iter().copied().collect();
                for &m in &updated.members {
                    for label in &updated.labels {
                        self.stores[m as usize].put_group(
                            GroupEntryId {
                                group: gid,
                                round: label.level,
                                label: *label,
                            },
                            GroupEntry {
                                members: members.clone(),
                                epoch,
                                key,
                            },
                        );
                    }
                }
            }
            groups_rekeyed.push(epoch);
        }
        self.group_of.remove(&v);
        self.revoked.insert(v);

        // sink flood with duplicate suppression; every receiver audits
        let notice = RevocationNotice {
            revoked: v,
            tag: revocation_tag(&self.sink_key, v),
        };
        let mut seen = BTreeSet::new();
        let mut queue = std::collections::VecDeque::new();
        seen.insert(self.sink);
        queue.push_back(self.sink);
        let mut broadcast_reached = 0;
        while let Some(u) = queue.pop_front() {
            for &w in self.topology.neighbors(u) {
                if seen.insert(w) {
                    queue.push_back(w);
                    if !self.revoked.contains(&w) {
                        debug_assert!(notice.tag.ct_eq(&revocation_tag(&self.sink_key, v)));
                        let (pw, path, _) = self.stores[w as usize].purge_references(v);
                        pairwise_removed += pw;
                        path_removed += path;
                        broadcast_reached += 1;
                    }
                }
            }
        }
        if !self.revoked.contains(&self.sink) && self.sink != v {
            let (pw, path, _) = self.stores[self.sink as usize].purge_references(v);
            pairwise_removed += pw;
            path_removed += path;
        }

        Ok(RevocationReport {
            revoked: v,
            pairwise_removed,
            path_removed,
            groups_rekeyed,
            broadcast_reached,
        })
    }

    /// Actual per-node counts against the formula prediction from the
    /// node's own degree and group size.
    pub fn memory_report(&self) -> MemoryReport {
        let rows = self
            .surviving()
            .map(|v| {
                let store = &self.stores[v as usize];
                let group_size = self
                    .group_of
                    .get(&v)
                    .map(|&g| self.groups[g].tree.members.len() as u32)
                    .unwrap_or(1);
                let neighbors = self.topology.degree(v);
                let predicted = formula_prediction(neighbors as u32, group_size);
                let actual = store.pairwise_count() + store.group_count();
                NodeMemoryRow {
                    node: v,
                    neighbors,
                    pairwise: store.pairwise_count(),
                    group: store.group_count(),
                    path: store.path_count(),
                    predicted,
                    within: actual <= predicted as usize,
                }
            })
            .collect();
        MemoryReport {
            rows,
            headline_k: 40,
            headline_group: 80,
            headline_prediction: formula_prediction(40, 80),
        }
    }
}

fn subgroup_key_bytes(curve: &CurveParams, rg: &RoundGroup) -> [u8; 32] {
    *hash_tag(GROUP_KEY, &rg.secret.encode(&curve.order)).as_bytes()
}

/// Runs the three pairwise messages in memory.
pub fn run_pairwise(a: &KeyShare, b: &KeyShare) -> Result<SessionKey> {
    let (mut ini, msg1) = PairwiseHandshake::initiate(a, b.node_id)?;
    let (mut rsp, msg2) = PairwiseHandshake::respond(b, &msg1)?;
    let (key_a, msg3) = ini.confirm(&msg2)?;
    let key_b = rsp.finalize(&msg3)?;
    debug_assert_eq!(key_a, key_b);
    Ok(key_a)
}

/// Runs the three path messages in memory.
pub fn run_path(
    a: &KeyShare,
    b: &KeyShare,
    curve: &CurveParams,
    rng: &mut impl rand::Rng,
) -> Result<SessionKey> {
    let (mut ini, msg1) = PathHandshake::initiate(a, curve, rng, b.node_id)?;
    let (mut rsp, msg2) = PathHandshake::respond(b, curve, rng, &msg1)?;
    let (key_a, msg3) = ini.confirm(&msg2)?;
    let key_b = rsp.finalize(&msg3)?;
    debug_assert_eq!(key_a, key_b);
    Ok(key_a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::handshake::SessionKind;

    fn test_curve() -> CurveParams {
        CurveParams::preset("test64").unwrap()
    }

    fn q16() -> FieldPrime {
        FieldPrime::new(65537).unwrap()
    }

    fn session(bytes: u8, a: u32, b: u32, kind: SessionKind) -> SessionKey {
        SessionKey {
            kind,
            bytes: [bytes; 32],
            peers: (a.min(b), a.max(b)),
        }
    }

    #[test]
    fn store_put_count_remove() {
        let mut store = KeyStore::new(0);
        store
            .put_pairwise(1, &session(1, 0, 1, SessionKind::Pairwise))
            .unwrap();
        assert_eq!(store.pairwise_count(), 1);
        assert_eq!(
            store
                .put_pairwise(1, &session(2, 0, 1, SessionKind::Pairwise))
                .unwrap_err(),
            Error::DuplicateEntry(1)
        );
        assert!(store.remove_pairwise(1));
        assert!(
            !store.remove_pairwise(1),
            "removing an absent entry signals a no-op"
        );
        assert_eq!(store.pairwise_count(), 0);
    }

    #[test]
    fn formula_examples() {
        assert_eq!(formula_prediction(40, 80), 47);
        assert_eq!(formula_prediction(1, 2), 2);
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(64), 6);
        assert_eq!(ceil_log2(65), 7);
    }

    /// Nodes 0-3 form a cluster around node 1; nodes 4 and 5 hang off a
    /// chain so that (1,3) and (1,5) are multi-hop pairs.
    fn scenario() -> Network {
        let positions = vec![
            (0.10, 0.10),
            (0.20, 0.10),
            (0.10, 0.20),
            (0.00, 0.10),
            (0.34, 0.10),
            (0.48, 0.10),
        ];
        let topo = Topology::from_positions(positions, 0.15).unwrap();
        assert_eq!(
            topo.neighbors(1).iter().copied().collect::<Vec<_>>(),
            vec![0, 2, 4]
        );
        assert!(topo.hop_distance(1, 3).unwrap() >= 2);
        assert!(topo.hop_distance(1, 5).unwrap() >= 2);
        Network::establish(topo, q16(), &test_curve(), 3, &[(1, 3), (1, 5)], 77).unwrap()
    }

    #[test]
    fn revoke_counts_a_constructed_scenario() {
        let mut net = scenario();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let report = net.revoke(1, &mut rng).unwrap();
        assert_eq!(report.revoked, 1);
        assert_eq!(report.pairwise_removed, 3);
        assert_eq!(report.path_removed, 2);
        assert_eq!(report.groups_rekeyed, vec![1]);
        assert_eq!(report.broadcast_reached, 4);

        // purity: nothing references the revoked node afterwards
        for u in net.surviving() {
            assert!(
                !net.stores[u as usize].references(1),
                "node {u} still references 1"
            );
        }
    }

    #[test]
    fn second_revocation_is_a_no_op() {
        let mut net = scenario();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        net.revoke(1, &mut rng).unwrap();
        let again = net.revoke(1, &mut rng).unwrap();
        assert_eq!(again.pairwise_removed, 0);
        assert_eq!(again.path_removed, 0);
        assert!(again.groups_rekeyed.is_empty());
        assert_eq!(again.broadcast_reached, 4);
    }

    #[test]
    fn revoke_unknown_node_rejected() {
        let mut net = scenario();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        assert_eq!(
            net.revoke(99, &mut rng).unwrap_err(),
            Error::UnknownNode(99)
        );
    }

    #[test]
    fn revocation_preserves_unrelated_keys_and_changes_group_epochs() {
        let mut net = scenario();
        let before: Vec<KeyStore> = net.stores.clone();
        let old_group_key = net.groups[0].tree.group_key();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        net.revoke(1, &mut rng).unwrap();

        for u in net.surviving() {
            let (pre, post) = (&before[u as usize], &net.stores[u as usize]);
            for (peer, bytes) in pre.pairwise_entries() {
                if *peer != 1 {
                    assert_eq!(post.pairwise_entries().get(peer), Some(bytes));
                }
            }
            for (peer, bytes) in pre.path_entries() {
                if *peer != 1 {
                    assert_eq!(post.path_entries().get(peer), Some(bytes));
                }
            }
            for (id, entry) in pre.group_entries() {
                if !entry.members.contains(&1) {
                    assert_eq!(post.group_entries().get(id), Some(entry));
                }
            }
        }

        let new_key = net.groups[0].tree.group_key();
        assert_ne!(new_key.bytes, old_group_key.bytes);
        assert_eq!(new_key.epoch, 1);
        // remaining members agree
        let keys: Vec<&GroupKey> = net.groups[0].member_keys.values().collect();
        assert_eq!(keys.len(), 2);
        assert!(keys.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn memory_counts_match_formula_exactly_on_a_12_node_net() {
        let topo = Topology::generate(12, 0.55, 4242).unwrap();
        let net = Network::establish(topo, q16(), &test_curve(), 4, &[], 9).unwrap();
        let report = net.memory_report();
        assert_eq!(report.headline_prediction, 47);
        assert_eq!(report.rows.len(), 12);
        for row in &report.rows {
            assert_eq!(row.pairwise, row.neighbors);
            assert_eq!(
                (row.pairwise + row.group) as u32,
                row.predicted,
                "node {} stores {}+{} against prediction {}",
                row.node,
                row.pairwise,
                row.group,
                row.predicted
            );
            assert!(row.within);
        }
    }

    #[test]
    fn two_node_network_stores_one_pairwise_and_one_group_key() {
        let topo = Topology::generate(2, std::f64::consts::SQRT_2, 3).unwrap();
        let net = Network::establish(topo, q16(), &test_curve(), 2, &[], 5).unwrap();
        for row in net.memory_report().rows {
            assert_eq!(row.pairwise, 1);
            assert_eq!(row.group, 1);
        }
    }

    #[test]
    fn establishment_is_deterministic() {
        let make = || {
            let topo = Topology::generate(8, 0.6, 11).unwrap();
            Network::establish(topo, q16(), &test_curve(), 4, &[], 21).unwrap()
        };
        let a = make();
        let b = make();
        assert_eq!(a.stores, b.stores);
        assert_eq!(a.sink_key, b.sink_key);
    }

    #[test]
    fn revocation_tag_is_deterministic_and_key_bound() {
        let k1 = [1u8; 32];
        let k2 = [2u8; 32];
        assert_eq!(revocation_tag(&k1, 7), revocation_tag(&k1, 7));
        assert_ne!(revocation_tag(&k1, 7), revocation_tag(&k2, 7));
        assert_ne!(revocation_tag(&k1, 7), revocation_tag(&k1, 8));
    }

    #[test]
    fn group_leader_is_the_tree_sponsor() {
        let net = scenario();
        // cluster {3,4,5}: balanced pair {3,4} with carried singleton 5
        assert_eq!(net.groups[1].leader(), 5);
    }
}
