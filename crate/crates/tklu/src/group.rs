//! Tree-based group key establishment.
//!
//! Members are ordered ascending and paired off; each pair runs the LU
//! pairwise handshake and derives its group node secret from the session
//! key. An odd trailing member forms a singleton with a fresh random scalar.
//! Rounds then merge adjacent groups: each side's sponsor broadcasts its
//! subtree with all blinded keys, and the merged node's secret is a hash of
//! the Diffie-Hellman point of one side's secret with the other side's
//! blinded key. After ceil(log2 n) rounds one group remains and every member
//! can compute the root secret from its own entry secret plus the public
//! blinded keys.
//!
//! On leave, the departed leaf's pair node dissolves and its sibling is
//! promoted. The departed member never knew the promoted subtree's own
//! secret, so recomputing the ancestors of the promoted position (with a
//! fresh scalar only when the promoted sibling is a bare paired leaf, whose
//! old pair secret the leaver shares) excludes it from the new key while
//! leaving every subgroup it was never part of untouched.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::ec::{CurveParams, CurvePoint, Scalar};
use crate::error::{Error, Result};
use crate::handshake::{PairwiseHandshake, SessionKey};
use crate::key_matrix::KeyShare;
use crate::tag::{hash_tag, hash_to_scalar, GROUP_KEY, GROUP_LEAF, GROUP_NODE};
use crate::wire::GroupBroadcast;

pub type MemberId = u32;

/// Tree coordinate of a group formed at round `level`, counting groups from
/// 1 within the round. Leaves use level 0 with the member id as index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct NodeLabel {
    pub level: u32,
    pub index: u32,
}

impl NodeLabel {
    pub fn new(level: u32, index: u32) -> Self {
        NodeLabel { level, index }
    }

    fn for_leaf(member: MemberId) -> Self {
        NodeLabel {
            level: 0,
            index: member,
        }
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T_{}{}", self.level, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InternalKind {
    /// Formed in the leaf round from a pairwise exchange.
    Pair,
    /// Formed by merging two groups with a DH of their secrets.
    Merge,
}

/// A node of the key tree, with full secrets (the coordinator's view).
///
/// Leaves of paired members carry no secret of their own: their entry secret
/// is the pair node's. Singleton leaves own a random scalar.
#[derive(Debug, Clone)]
pub enum TreeNode {
    Leaf {
        member: MemberId,
        secret: Option<Scalar>,
        blinded: Option<CurvePoint>,
        /// Round-group labels this leaf carried while it was a singleton
        /// group of its own.
        labels: Vec<NodeLabel>,
    },
    Internal {
        /// Labels this node carried across rounds; the last one is current.
        labels: Vec<NodeLabel>,
        kind: InternalKind,
        secret: Scalar,
        blinded: CurvePoint,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    fn leaf(member: MemberId) -> Self {
        TreeNode::Leaf {
            member,
            secret: None,
            blinded: None,
            labels: Vec::new(),
        }
    }

    pub fn members(&self) -> Vec<MemberId> {
        match self {
            TreeNode::Leaf { member, .. } => vec![*member],
            TreeNode::Internal { left, right, .. } => {
                let mut m = left.members();
                m.extend(right.members());
                m
            }
        }
    }

    pub fn secret(&self) -> Option<&Scalar> {
        match self {
            TreeNode::Leaf { secret, .. } => secret.as_ref(),
            TreeNode::Internal { secret, .. } => Some(secret),
        }
    }

    pub fn blinded(&self) -> Option<&CurvePoint> {
        match self {
            TreeNode::Leaf { blinded, .. } => blinded.as_ref(),
            TreeNode::Internal { blinded, .. } => Some(blinded),
        }
    }

    fn push_label(&mut self, label: NodeLabel) {
        match self {
            TreeNode::Leaf { labels, .. } => labels.push(label),
            TreeNode::Internal { labels, .. } => labels.push(label),
        }
    }

    /// Leaves in order with their depth below this node.
    fn leaf_depths(&self, depth: u32, out: &mut Vec<(MemberId, u32)>) {
        match self {
            TreeNode::Leaf { member, .. } => out.push((*member, depth)),
            TreeNode::Internal { left, right, .. } => {
                left.leaf_depths(depth + 1, out);
                right.leaf_depths(depth + 1, out);
            }
        }
    }

    /// Blinded keys in pre-order, labelled. Bare paired leaves are skipped.
    pub fn blinded_entries(&self) -> Vec<(NodeLabel, CurvePoint)> {
        let mut out = Vec::new();
        self.collect_blinded(&mut out);
        out
    }

    fn collect_blinded(&self, out: &mut Vec<(NodeLabel, CurvePoint)>) {
        match self {
            TreeNode::Leaf {
                member, blinded, ..
            } => {
                if let Some(b) = blinded {
                    out.push((NodeLabel::for_leaf(*member), b.clone()));
                }
            }
            TreeNode::Internal {
                labels,
                blinded,
                left,
                right,
                ..
            } => {
                out.push((
                    *labels.last().expect("internal nodes are labelled"),
                    blinded.clone(),
                ));
                left.collect_blinded(out);
                right.collect_blinded(out);
            }
        }
    }

    fn strip_secrets(&self) -> PublicNode {
        match self {
            TreeNode::Leaf {
                member, blinded, ..
            } => PublicNode::Leaf {
                member: *member,
                blinded: blinded.clone(),
            },
            TreeNode::Internal {
                labels,
                kind,
                blinded,
                left,
                right,
                ..
            } => PublicNode::Internal {
                label: *labels.last().expect("internal nodes are labelled"),
                kind: *kind,
                blinded: Some(blinded.clone()),
                left: Box::new(left.strip_secrets()),
                right: Box::new(right.strip_secrets()),
            },
        }
    }
}

/// The shallowest rightmost leaf of a subtree: among leaves of minimal
/// depth, the last one in order.
pub fn sponsor_of(node: &TreeNode) -> MemberId {
    let mut leaves = Vec::new();
    node.leaf_depths(0, &mut leaves);
    let min_depth = leaves
        .iter()
        .map(|&(_, d)| d)
        .min()
        .expect("tree has leaves");
    leaves
        .iter()
        .rev()
        .find(|&&(_, d)| d == min_depth)
        .map(|&(m, _)| m)
        .expect("a leaf at the minimal depth exists")
}

/// Public counterpart of the tree: shape, labels and blinded keys only.
/// Blinded keys are optional so tests can model lossy broadcasts.
#[derive(Debug, Clone)]
pub enum PublicNode {
    Leaf {
        member: MemberId,
        blinded: Option<CurvePoint>,
    },
    Internal {
        label: NodeLabel,
        kind: InternalKind,
        blinded: Option<CurvePoint>,
        left: Box<PublicNode>,
        right: Box<PublicNode>,
    },
}

impl PublicNode {
    fn blinded(&self) -> Option<&CurvePoint> {
        match self {
            PublicNode::Leaf { blinded, .. } => blinded.as_ref(),
            PublicNode::Internal { blinded, .. } => blinded.as_ref(),
        }
    }

    pub fn members(&self) -> Vec<MemberId> {
        match self {
            PublicNode::Leaf { member, .. } => vec![*member],
            PublicNode::Internal { left, right, .. } => {
                let mut m = left.members();
                m.extend(right.members());
                m
            }
        }
    }

    /// Drops the blinded key of the node carrying `label` (for tests of
    /// fail-closed behavior).
    pub fn remove_blinded(&mut self, label: NodeLabel) {
        match self {
            PublicNode::Leaf { member, blinded } => {
                if NodeLabel::for_leaf(*member) == label {
                    *blinded = None;
                }
            }
            PublicNode::Internal {
                label: own,
                blinded,
                left,
                right,
                ..
            } => {
                if *own == label {
                    *blinded = None;
                }
                left.remove_blinded(label);
                right.remove_blinded(label);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PublicTree {
    pub epoch: u32,
    pub root: PublicNode,
}

/// A 32-byte group key for a member set at a given rekey epoch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupKey {
    pub bytes: [u8; 32],
    pub epoch: u32,
    pub members: BTreeSet<MemberId>,
}

fn key_from_secret(
    curve: &CurveParams,
    secret: &Scalar,
    epoch: u32,
    members: BTreeSet<MemberId>,
) -> GroupKey {
    let bytes = *hash_tag(GROUP_KEY, &secret.encode(&curve.order)).as_bytes();
    GroupKey {
        bytes,
        epoch,
        members,
    }
}

/// Origin of a round group, mirroring the round-by-round narration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupOrigin {
    Pair(MemberId, MemberId),
    Singleton(MemberId),
    Merged { left: NodeLabel, right: NodeLabel },
    Carried { from: NodeLabel },
}

/// One group as it stood in one round.
#[derive(Debug, Clone)]
pub struct RoundGroup {
    pub label: NodeLabel,
    pub members: Vec<MemberId>,
    pub origin: GroupOrigin,
    /// The group node's secret at that round (subgroup key material).
    pub secret: Scalar,
}

/// The built key tree with its construction log.
#[derive(Debug, Clone)]
pub struct KeyTree {
    pub root: TreeNode,
    pub members: Vec<MemberId>,
    /// Rounds executed to build the tree; equals the maximum leaf depth.
    pub height: u32,
    pub epoch: u32,
    /// Per-round groups, in formation order.
    pub rounds: Vec<Vec<RoundGroup>>,
    curve: CurveParams,
}

impl KeyTree {
    pub fn curve(&self) -> &CurveParams {
        &self.curve
    }

    pub fn public_view(&self) -> PublicTree {
        PublicTree {
            epoch: self.epoch,
            root: self.root.strip_secrets(),
        }
    }

    /// The root-derived group key.
    pub fn group_key(&self) -> GroupKey {
        let secret = self.root.secret().expect("root always carries a secret");
        key_from_secret(
            &self.curve,
            secret,
            self.epoch,
            self.members.iter().copied().collect(),
        )
    }

    /// The lowest tree secret a member knows: its own singleton leaf scalar,
    /// or its pair node's secret.
    pub fn member_entry_secret(&self, member: MemberId) -> Result<Scalar> {
        fn walk(node: &TreeNode, member: MemberId) -> Option<Scalar> {
            match node {
                TreeNode::Leaf {
                    member: m, secret, ..
                } => {
                    if *m == member {
                        Some(
                            secret
                                .clone()
                                .expect("bare leaves are handled by the parent"),
                        )
                    } else {
                        None
                    }
                }
                TreeNode::Internal {
                    secret,
                    left,
                    right,
                    ..
                } => {
                    for child in [left, right] {
                        if let TreeNode::Leaf {
                            member: m,
                            secret: leaf_secret,
                            ..
                        } = &**child
                        {
                            if *m == member {
                                return Some(leaf_secret.clone().unwrap_or_else(|| secret.clone()));
                            }
                        } else if child.members().contains(&member) {
                            return walk(child, member);
                        }
                    }
                    None
                }
            }
        }
        walk(&self.root, member).ok_or(Error::UnknownMember(member))
    }

    /// The current sponsor broadcast: the whole tree's blinded keys.
    pub fn broadcast(&self) -> GroupBroadcast {
        GroupBroadcast {
            epoch: self.epoch,
            entries: self.root.blinded_entries(),
        }
    }
}

/// Message delivery hooks for group establishment, so a simulator can route
/// and count the traffic. [`LocalTransport`] runs everything in memory.
pub trait GroupTransport {
    /// Runs the three-message pairwise handshake between two members and
    /// returns the (identical) session key.
    fn pairwise_exchange(&mut self, a: MemberId, b: MemberId) -> Result<SessionKey>;

    /// The sponsor ships its subtree's blinded keys to each recipient.
    fn sponsor_broadcast(
        &mut self,
        sponsor: MemberId,
        recipients: &[MemberId],
        broadcast: &GroupBroadcast,
    ) -> Result<()>;
}

/// In-memory transport over a share map; no routing, no counters.
pub struct LocalTransport<'a> {
    pub shares: &'a BTreeMap<MemberId, KeyShare>,
}

impl GroupTransport for LocalTransport<'_> {
    fn pairwise_exchange(&mut self, a: MemberId, b: MemberId) -> Result<SessionKey> {
        let share_a = self.shares.get(&a).ok_or(Error::UnknownMember(a))?;
        let share_b = self.shares.get(&b).ok_or(Error::UnknownMember(b))?;
        let (mut ini, msg1) = PairwiseHandshake::initiate(share_a, b)?;
        let (mut rsp, msg2) = PairwiseHandshake::respond(share_b, &msg1)?;
        let (key_a, msg3) = ini.confirm(&msg2)?;
        let key_b = rsp.finalize(&msg3)?;
        debug_assert_eq!(key_a, key_b);
        Ok(key_a)
    }

    fn sponsor_broadcast(
        &mut self,
        _sponsor: MemberId,
        _recipients: &[MemberId],
        _broadcast: &GroupBroadcast,
    ) -> Result<()> {
        Ok(())
    }
}

/// Deterministic total order: ascending id, duplicates collapsed.
pub fn order_members(ids: &[MemberId]) -> Result<Vec<MemberId>> {
    if ids.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let set: BTreeSet<MemberId> = ids.iter().copied().collect();
    Ok(set.into_iter().collect())
}

/// A group under construction: its root node and round bookkeeping.
pub struct GroupUnit {
    pub label: NodeLabel,
    pub node: TreeNode,
    pub origin: GroupOrigin,
}

impl GroupUnit {
    fn round_group(&self) -> RoundGroup {
        RoundGroup {
            label: self.label,
            members: self.node.members(),
            origin: self.origin.clone(),
            secret: self
                .node
                .secret()
                .expect("group roots carry secrets")
                .clone(),
        }
    }
}

/// Round one: adjacent members pair off and run the pairwise handshake; the
/// pair's secret hashes the session key to a scalar. An odd trailing member
/// becomes a singleton with a fresh random scalar.
pub fn leaf_pair_round(
    ordered: &[MemberId],
    curve: &CurveParams,
    rng: &mut impl rand::Rng,
    transport: &mut dyn GroupTransport,
) -> Result<Vec<GroupUnit>> {
    if ordered.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let mut units = Vec::with_capacity(ordered.len().div_ceil(2));
    let mut index = 1u32;
    let mut chunks = ordered.chunks_exact(2);
    for pair in &mut chunks {
        let (a, b) = (pair[0], pair[1]);
        let session = transport.pairwise_exchange(a, b)?;
        let secret = Scalar::new(
            hash_to_scalar(GROUP_LEAF, &session.bytes, &curve.order),
            &curve.order,
        )?;
        let blinded = curve.scalar_mul(&secret, &curve.base)?;
        let label = NodeLabel::new(1, index);
        units.push(GroupUnit {
            label,
            node: TreeNode::Internal {
                labels: vec![label],
                kind: InternalKind::Pair,
                secret,
                blinded,
                left: Box::new(TreeNode::leaf(a)),
                right: Box::new(TreeNode::leaf(b)),
            },
            origin: GroupOrigin::Pair(a, b),
        });
        index += 1;
    }
    if let [trailing] = chunks.remainder() {
        let secret = curve.random_scalar(rng);
        let blinded = curve.scalar_mul(&secret, &curve.base)?;
        let label = NodeLabel::new(1, index);
        units.push(GroupUnit {
            label,
            node: TreeNode::Leaf {
                member: *trailing,
                secret: Some(secret),
                blinded: Some(blinded),
                labels: vec![label],
            },
            origin: GroupOrigin::Singleton(*trailing),
        });
    }
    Ok(units)
}

/// One merge round: adjacent group pairs combine via a DH of one side's
/// secret with the other side's blinded key; an odd trailing group is
/// renamed and carried forward.
pub fn merge_round(
    units: Vec<GroupUnit>,
    level: u32,
    curve: &CurveParams,
    transport: &mut dyn GroupTransport,
) -> Result<Vec<GroupUnit>> {
    if units.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let mut out = Vec::with_capacity(units.len().div_ceil(2));
    let mut iter = units.into_iter();
    let mut index = 1u32;
    while let Some(left_unit) = iter.next() {
        match iter.next() {
            Some(right_unit) => {
                let left_members = left_unit.node.members();
                let right_members = right_unit.node.members();
                let left_sponsor = sponsor_of(&left_unit.node);
                let right_sponsor = sponsor_of(&right_unit.node);
                let epoch = 0;
                transport.sponsor_broadcast(
                    left_sponsor,
                    &right_members,
                    &GroupBroadcast {
                        epoch,
                        entries: left_unit.node.blinded_entries(),
                    },
                )?;
                transport.sponsor_broadcast(
                    right_sponsor,
                    &left_members,
                    &GroupBroadcast {
                        epoch,
                        entries: right_unit.node.blinded_entries(),
                    },
                )?;
                let label = NodeLabel::new(level, index);
                let node = merge_nodes(curve, label, left_unit.node, right_unit.node)?;
                out.push(GroupUnit {
                    label,
                    node,
                    origin: GroupOrigin::Merged {
                        left: left_unit.label,
                        right: right_unit.label,
                    },
                });
            }
            None => {
                let label = NodeLabel::new(level, index);
                let mut node = left_unit.node;
                node.push_label(label);
                out.push(GroupUnit {
                    label,
                    node,
                    origin: GroupOrigin::Carried {
                        from: left_unit.label,
                    },
                });
            }
        }
        index += 1;
    }
    Ok(out)
}

fn merge_nodes(
    curve: &CurveParams,
    label: NodeLabel,
    left: TreeNode,
    right: TreeNode,
) -> Result<TreeNode> {
    let secret = merged_secret(curve, &left, &right)?;
    let blinded = curve.scalar_mul(&secret, &curve.base)?;
    Ok(TreeNode::Internal {
        labels: vec![label],
        kind: InternalKind::Merge,
        secret,
        blinded,
        left: Box::new(left),
        right: Box::new(right),
    })
}

/// Both sides derive the same point: left members compute
/// dh(left secret, right blinded), right members the mirror image.
fn merged_secret(curve: &CurveParams, left: &TreeNode, right: &TreeNode) -> Result<Scalar> {
    let left_secret = left.secret().ok_or(Error::MissingBlindedKey)?;
    let right_blinded = right.blinded().ok_or(Error::MissingBlindedKey)?;
    let shared = curve.dh(left_secret, right_blinded)?;
    debug_assert_eq!(
        shared,
        curve
            .dh(
                right.secret().expect("group roots carry secrets"),
                left.blinded().unwrap()
            )
            .unwrap(),
    );
    Scalar::new(
        hash_to_scalar(GROUP_NODE, &curve.encode_point(&shared), &curve.order),
        &curve.order,
    )
}

/// Outcome of a full build: the tree plus every member's independently
/// computed group key.
#[derive(Debug)]
pub struct GroupOutcome {
    pub tree: KeyTree,
    pub member_keys: BTreeMap<MemberId, GroupKey>,
}

/// Builds the group key tree over the given members. Runs the leaf pair
/// round, then merge rounds until a single group remains.
pub fn build_group(
    members: &[MemberId],
    curve: &CurveParams,
    rng: &mut impl rand::Rng,
    transport: &mut dyn GroupTransport,
) -> Result<GroupOutcome> {
    let ordered = order_members(members)?;
    let mut rounds = Vec::new();
    let mut units = leaf_pair_round(&ordered, curve, rng, transport)?;
    rounds.push(units.iter().map(GroupUnit::round_group).collect::<Vec<_>>());
    let mut level = 1u32;
    while units.len() > 1 {
        level += 1;
        units = merge_round(units, level, curve, transport)?;
        rounds.push(units.iter().map(GroupUnit::round_group).collect::<Vec<_>>());
    }
    let root = units.pop().expect("at least one group remains").node;
    let height = if ordered.len() == 1 { 0 } else { level };
    let tree = KeyTree {
        root,
        members: ordered.clone(),
        height,
        epoch: 0,
        rounds,
        curve: curve.clone(),
    };
    let view = tree.public_view();
    let mut member_keys = BTreeMap::new();
    for &member in &ordered {
        let entry = tree.member_entry_secret(member)?;
        member_keys.insert(member, member_compute_key(&view, curve, member, &entry)?);
    }
    Ok(GroupOutcome { tree, member_keys })
}

/// Recomputes the group key from public data plus the member's own entry
/// secret: walk from the entry node to the root, deriving each ancestor's
/// secret from the sibling's blinded key. Fails closed if a required
/// blinded key is missing.
pub fn member_compute_key(
    view: &PublicTree,
    curve: &CurveParams,
    member: MemberId,
    entry_secret: &Scalar,
) -> Result<GroupKey> {
    // Path of child indices from the root down to the member's leaf.
    fn find_path(node: &PublicNode, member: MemberId, path: &mut Vec<u8>) -> bool {
        match node {
            PublicNode::Leaf { member: m, .. } => *m == member,
            PublicNode::Internal { left, right, .. } => {
                path.push(0);
                if find_path(left, member, path) {
                    return true;
                }
                path.pop();
                path.push(1);
                if find_path(right, member, path) {
                    return true;
                }
                path.pop();
                false
            }
        }
    }
    let mut path = Vec::new();
    if !find_path(&view.root, member, &mut path) {
        return Err(Error::UnknownMember(member));
    }
    // The entry node is the leaf itself when it owns a blinded key
    // (singleton), otherwise its pair parent.
    let mut node = &view.root;
    let mut chain = vec![node];
    for &dir in &path {
        node = match node {
            PublicNode::Internal { left, right, .. } => {
                if dir == 0 {
                    left
                } else {
                    right
                }
            }
            PublicNode::Leaf { .. } => unreachable!("path stops at a leaf"),
        };
        chain.push(node);
    }
    let leaf = chain.last().expect("chain contains the leaf");
    let entry_depth = if leaf.blinded().is_some() {
        path.len()
    } else if path.is_empty() {
        return Err(Error::MissingBlindedKey);
    } else {
        path.len() - 1
    };
    let mut secret = entry_secret.clone();
    for depth in (0..entry_depth).rev() {
        let parent = chain[depth];
        let (left, right) = match parent {
            PublicNode::Internal { left, right, .. } => (left, right),
            PublicNode::Leaf { .. } => unreachable!("ancestors are internal"),
        };
        let sibling = if path[depth] == 0 { right } else { left };
        let sibling_blinded = sibling.blinded().ok_or(Error::MissingBlindedKey)?;
        let shared = curve.dh(&secret, sibling_blinded)?;
        secret = Scalar::new(
            hash_to_scalar(GROUP_NODE, &curve.encode_point(&shared), &curve.order),
            &curve.order,
        )?;
    }
    Ok(key_from_secret(
        curve,
        &secret,
        view.epoch,
        view.root.members().into_iter().collect(),
    ))
}

/// A recomputed node after a rekey: all labels it ever carried, its member
/// set, and the new secret.
#[derive(Debug, Clone)]
pub struct UpdatedNode {
    pub labels: Vec<NodeLabel>,
    pub members: Vec<MemberId>,
    pub secret: Scalar,
}

impl UpdatedNode {
    pub fn key_bytes(&self, curve: &CurveParams) -> [u8; 32] {
        *hash_tag(GROUP_KEY, &self.secret.encode(&curve.order)).as_bytes()
    }
}

/// Outcome of removing one member.
#[derive(Debug)]
pub struct RekeyOutcome {
    pub group_key: GroupKey,
    pub member_keys: BTreeMap<MemberId, GroupKey>,
    pub sponsor: MemberId,
    /// Set when the promoted sibling was a bare paired leaf and received a
    /// fresh scalar.
    pub refreshed_leaf: Option<MemberId>,
    /// Ancestors of the promotion point, bottom-up, with new secrets.
    pub updated: Vec<UpdatedNode>,
}

enum Walk {
    NotFound(TreeNode),
    Replaced {
        node: TreeNode,
        updated: Vec<UpdatedNode>,
        sponsor: MemberId,
        refreshed_leaf: Option<MemberId>,
    },
}

/// Removes `leaving` from the tree: its pair node dissolves, the sibling is
/// promoted, and every ancestor of the promotion point gets a recomputed
/// secret. The departed member never knew the promoted subtree's own secret,
/// so no other subgroup needs to change.
pub fn rekey_on_leave(
    tree: &mut KeyTree,
    leaving: MemberId,
    rng: &mut impl rand::Rng,
    transport: &mut dyn GroupTransport,
) -> Result<RekeyOutcome> {
    if !tree.members.contains(&leaving) {
        return Err(Error::UnknownMember(leaving));
    }
    if tree.members.len() == 1 {
        return Err(Error::LastMember);
    }
    let curve = tree.curve.clone();
    let root = std::mem::replace(&mut tree.root, TreeNode::leaf(u32::MAX));
    let walk = remove_rec(root, leaving, &curve, rng)?;
    let (new_root, updated, sponsor, refreshed_leaf) = match walk {
        Walk::Replaced {
            node,
            updated,
            sponsor,
            refreshed_leaf,
        } => (node, updated, sponsor, refreshed_leaf),
        Walk::NotFound(_) => unreachable!("membership was checked above"),
    };
    tree.root = new_root;
    tree.members.retain(|&m| m != leaving);
    tree.epoch += 1;
    let mut depths = Vec::new();
    tree.root.leaf_depths(0, &mut depths);
    tree.height = depths.iter().map(|&(_, d)| d).max().unwrap_or(0);

    let recipients: Vec<MemberId> = tree
        .members
        .iter()
        .copied()
        .filter(|&m| m != sponsor)
        .collect();
    transport.sponsor_broadcast(sponsor, &recipients, &tree.broadcast())?;

    let view = tree.public_view();
    let mut member_keys = BTreeMap::new();
    for &member in &tree.members {
        let entry = tree.member_entry_secret(member)?;
        member_keys.insert(member, member_compute_key(&view, &curve, member, &entry)?);
    }
    Ok(RekeyOutcome {
        group_key: tree.group_key(),
        member_keys,
        sponsor,
        refreshed_leaf,
        updated,
    })
}

fn remove_rec(
    node: TreeNode,
    leaving: MemberId,
    curve: &CurveParams,
    rng: &mut impl rand::Rng,
) -> Result<Walk> {
    let (labels, kind, secret, blinded, left, right) = match node {
        leaf @ TreeNode::Leaf { .. } => return Ok(Walk::NotFound(leaf)),
        TreeNode::Internal {
            labels,
            kind,
            secret,
            blinded,
            left,
            right,
        } => (labels, kind, secret, blinded, left, right),
    };
    let is_leaving_leaf =
        |n: &TreeNode| matches!(n, TreeNode::Leaf { member, .. } if *member == leaving);
    if is_leaving_leaf(&left) || is_leaving_leaf(&right) {
        let mut promoted = if is_leaving_leaf(&left) {
            *right
        } else {
            *left
        };
        let mut refreshed_leaf = None;
        if let TreeNode::Leaf {
            member,
            secret,
            blinded,
            ..
        } = &mut promoted
        {
            if secret.is_none() {
                // The old pair secret is shared with the leaver; replace it.
                let fresh = curve.random_scalar(rng);
                *blinded = Some(curve.scalar_mul(&fresh, &curve.base)?);
                *secret = Some(fresh);
                refreshed_leaf = Some(*member);
            }
        }
        let sponsor = sponsor_of(&promoted);
        return Ok(Walk::Replaced {
            node: promoted,
            updated: Vec::new(),
            sponsor,
            refreshed_leaf,
        });
    }
    let left_has = left.members().contains(&leaving);
    let right_has = right.members().contains(&leaving);
    if !left_has && !right_has {
        return Ok(Walk::NotFound(TreeNode::Internal {
            labels,
            kind,
            secret,
            blinded,
            left,
            right,
        }));
    }
    // Recurse into whichever side contains the leaver.
    let (target, sibling) = if left_has {
        (left, right)
    } else {
        (right, left)
    };
    match remove_rec(*target, leaving, curve, rng)? {
        Walk::NotFound(unchanged) => {
            let (left, right) = if left_has {
                (Box::new(unchanged), sibling)
            } else {
                (sibling, Box::new(unchanged))
            };
            Ok(Walk::NotFound(TreeNode::Internal {
                labels,
                kind,
                secret,
                blinded,
                left,
                right,
            }))
        }
        Walk::Replaced {
            node: new_child,
            mut updated,
            sponsor,
            refreshed_leaf,
        } => {
            let (left, right) = if left_has {
                (Box::new(new_child), sibling)
            } else {
                (sibling, Box::new(new_child))
            };
            let new_secret = merged_secret(curve, &left, &right)?;
            let new_blinded = curve.scalar_mul(&new_secret, &curve.base)?;
            let rebuilt = TreeNode::Internal {
                labels: labels.clone(),
                kind,
                secret: new_secret.clone(),
                blinded: new_blinded,
                left,
                right,
            };
            updated.push(UpdatedNode {
                labels,
                members: rebuilt.members(),
                secret: new_secret,
            });
            Ok(Walk::Replaced {
                node: rebuilt,
                updated,
                sponsor,
                refreshed_leaf,
            })
        }
    }
}
