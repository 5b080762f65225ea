//! Pairwise and path key establishment state machines.
//!
//! Pairwise (three messages, neighbors): the initiator sends its column, the
//! responder derives the shared matrix entry from its own row and replies
//! with its column and a hash tag over the entry, the initiator verifies and
//! confirms with the same tag. Both sides end with a session key derived
//! from the matrix entry.
//!
//! Path (three messages, multi-hop): the same column exchange authenticates
//! the peers, while fresh ephemeral scalars run a Diffie-Hellman exchange.
//! The session key comes from the DH point, so a transcript eavesdropper
//! learns columns and blinded points but not the key. Ephemeral scalars are
//! never serialized.
//!
//! Authenticator tags bind the shared secret *and* both peer ids, so a
//! flipped sender id fails verification instead of completing a session
//! with mismatched peers.

use crate::ec::{CurveParams, CurvePoint, Scalar};
use crate::error::{Error, Result};
use crate::field::FieldElement;
use crate::key_matrix::{derive_key, KeyShare};
use crate::tag::{
    hash_tag, HashTag, PATH_AUTH, PATH_DH, PATH_KEY, PATH_TRANSCRIPT1, PATH_TRANSCRIPT2, PW_AUTH,
    PW_KEY, PW_TRANSCRIPT1, PW_TRANSCRIPT2,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairwiseMsg1 {
    pub sender: u32,
    pub col: Vec<FieldElement>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairwiseMsg2 {
    pub sender: u32,
    pub col: Vec<FieldElement>,
    pub tag: HashTag,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairwiseMsg3 {
    pub sender: u32,
    pub tag: HashTag,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathMsg1 {
    pub sender: u32,
    pub col: Vec<FieldElement>,
    pub eph: CurvePoint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathMsg2 {
    pub sender: u32,
    pub col: Vec<FieldElement>,
    pub key_tag: HashTag,
    pub eph: CurvePoint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathMsg3 {
    pub sender: u32,
    pub key_tag: HashTag,
    pub dh_tag: HashTag,
}

/// Typed abort signal broadcast when path verification fails. Carries no
/// secrets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AbortMsg {
    pub sender: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionKind {
    Pairwise,
    Path,
}

/// A 32-byte session key between an unordered pair of nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionKey {
    pub kind: SessionKind,
    pub bytes: [u8; 32],
    pub peers: (u32, u32),
}

impl SessionKey {
    fn pairwise(shared: FieldElement, a: u32, b: u32) -> Self {
        let (lo, hi) = (a.min(b), a.max(b));
        let mut payload = shared.encode();
        payload.extend_from_slice(&lo.to_be_bytes());
        payload.extend_from_slice(&hi.to_be_bytes());
        SessionKey {
            kind: SessionKind::Pairwise,
            bytes: *hash_tag(PW_KEY, &payload).as_bytes(),
            peers: (lo, hi),
        }
    }

    fn path(curve: &CurveParams, shared: &CurvePoint, a: u32, b: u32) -> Self {
        let (lo, hi) = (a.min(b), a.max(b));
        let mut payload = curve.encode_point(shared);
        payload.extend_from_slice(&lo.to_be_bytes());
        payload.extend_from_slice(&hi.to_be_bytes());
        SessionKey {
            kind: SessionKind::Path,
            bytes: *hash_tag(PATH_KEY, &payload).as_bytes(),
            peers: (lo, hi),
        }
    }
}

// Canonical transcript digests. The authenticator tags bind them so that a
// message altered in flight fails verification even where the change cannot
// influence the derived matrix entry (column positions the receiving row
// zero-weights).

fn canon_column(col: &[FieldElement], out: &mut Vec<u8>) {
    out.extend_from_slice(&(col.len() as u32).to_be_bytes());
    for e in col {
        out.extend_from_slice(&e.value().to_be_bytes());
    }
}

fn pairwise_msg1_digest(msg: &PairwiseMsg1) -> HashTag {
    let mut bytes = msg.sender.to_be_bytes().to_vec();
    canon_column(&msg.col, &mut bytes);
    hash_tag(PW_TRANSCRIPT1, &bytes)
}

fn pairwise_msg2_digest(msg: &PairwiseMsg2) -> HashTag {
    let mut bytes = msg.sender.to_be_bytes().to_vec();
    canon_column(&msg.col, &mut bytes);
    bytes.extend_from_slice(msg.tag.as_bytes());
    hash_tag(PW_TRANSCRIPT2, &bytes)
}

fn path_msg1_digest(curve: &CurveParams, msg: &PathMsg1) -> HashTag {
    let mut bytes = msg.sender.to_be_bytes().to_vec();
    canon_column(&msg.col, &mut bytes);
    bytes.extend_from_slice(&curve.encode_point(&msg.eph));
    hash_tag(PATH_TRANSCRIPT1, &bytes)
}

fn path_msg2_digest(curve: &CurveParams, msg: &PathMsg2) -> HashTag {
    let mut bytes = msg.sender.to_be_bytes().to_vec();
    canon_column(&msg.col, &mut bytes);
    bytes.extend_from_slice(msg.key_tag.as_bytes());
    bytes.extend_from_slice(&curve.encode_point(&msg.eph));
    hash_tag(PATH_TRANSCRIPT2, &bytes)
}

/// Authenticator over the shared matrix entry, bound to the (initiator,
/// responder) pair and the transcript so far.
fn pairwise_auth_tag(
    shared: FieldElement,
    initiator: u32,
    responder: u32,
    transcript: &[&HashTag],
) -> HashTag {
    let mut payload = shared.encode();
    payload.extend_from_slice(&initiator.to_be_bytes());
    payload.extend_from_slice(&responder.to_be_bytes());
    for digest in transcript {
        payload.extend_from_slice(digest.as_bytes());
    }
    hash_tag(PW_AUTH, &payload)
}

fn path_auth_tag(
    shared: FieldElement,
    initiator: u32,
    responder: u32,
    transcript: &[&HashTag],
) -> HashTag {
    let mut payload = shared.encode();
    payload.extend_from_slice(&initiator.to_be_bytes());
    payload.extend_from_slice(&responder.to_be_bytes());
    for digest in transcript {
        payload.extend_from_slice(digest.as_bytes());
    }
    hash_tag(PATH_AUTH, &payload)
}

fn path_dh_tag(
    curve: &CurveParams,
    shared: &CurvePoint,
    initiator: u32,
    responder: u32,
    transcript: &[&HashTag],
) -> HashTag {
    let mut payload = curve.encode_point(shared);
    payload.extend_from_slice(&initiator.to_be_bytes());
    payload.extend_from_slice(&responder.to_be_bytes());
    for digest in transcript {
        payload.extend_from_slice(digest.as_bytes());
    }
    hash_tag(PATH_DH, &payload)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Initiator,
    Responder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    AwaitMsg2,
    AwaitMsg3,
    Done,
    Failed,
}

/// Single-owner pairwise handshake state, advanced by exactly one caller.
#[derive(Debug, Clone)]
pub struct PairwiseHandshake {
    role: Role,
    phase: Phase,
    share: KeyShare,
    peer: u32,
    msg1_digest: HashTag,
    expected_tag: Option<HashTag>,
    session: Option<SessionKey>,
}

impl PairwiseHandshake {
    /// Starts a handshake toward `peer`, emitting the initiator's column.
    pub fn initiate(share: &KeyShare, peer: u32) -> Result<(Self, PairwiseMsg1)> {
        if peer == share.node_id {
            return Err(Error::SelfPeer);
        }
        let msg = PairwiseMsg1 {
            sender: share.node_id,
            col: share.col.clone(),
        };
        let state = PairwiseHandshake {
            role: Role::Initiator,
            phase: Phase::AwaitMsg2,
            share: share.clone(),
            peer,
            msg1_digest: pairwise_msg1_digest(&msg),
            expected_tag: None,
            session: None,
        };
        Ok((state, msg))
    }

    /// Handles the initiator's column: derives the shared entry and replies
    /// with own column plus its tag. Replies before authenticating the
    /// initiator, which happens at the final message.
    pub fn respond(share: &KeyShare, msg1: &PairwiseMsg1) -> Result<(Self, PairwiseMsg2)> {
        if msg1.col.len() != share.dimension() {
            return Err(Error::LengthMismatch);
        }
        if msg1.sender == share.node_id {
            // a wire message claiming our own id is a forgery
            return Err(Error::VerifyFailed);
        }
        let shared = derive_key(&share.row, &msg1.col)?;
        let msg1_digest = pairwise_msg1_digest(msg1);
        let tag = pairwise_auth_tag(shared, msg1.sender, share.node_id, &[&msg1_digest]);
        let msg2 = PairwiseMsg2 {
            sender: share.node_id,
            col: share.col.clone(),
            tag,
        };
        let msg2_digest = pairwise_msg2_digest(&msg2);
        let expected_tag = pairwise_auth_tag(
            shared,
            msg1.sender,
            share.node_id,
            &[&msg1_digest, &msg2_digest],
        );
        let state = PairwiseHandshake {
            role: Role::Responder,
            phase: Phase::AwaitMsg3,
            share: share.clone(),
            peer: msg1.sender,
            msg1_digest,
            expected_tag: Some(expected_tag),
            session: Some(SessionKey::pairwise(shared, msg1.sender, share.node_id)),
        };
        Ok((state, msg2))
    }

    /// Initiator: verifies the responder's tag against its own derivation and
    /// emits the confirmation message.
    pub fn confirm(&mut self, msg2: &PairwiseMsg2) -> Result<(SessionKey, PairwiseMsg3)> {
        if self.role != Role::Initiator || self.phase != Phase::AwaitMsg2 {
            return Err(Error::WrongPhase);
        }
        if msg2.sender != self.peer {
            self.phase = Phase::Failed;
            return Err(Error::VerifyFailed);
        }
        if msg2.col.len() != self.share.dimension() {
            self.phase = Phase::Failed;
            return Err(Error::LengthMismatch);
        }
        let shared = derive_key(&self.share.row, &msg2.col)?;
        let expected =
            pairwise_auth_tag(shared, self.share.node_id, self.peer, &[&self.msg1_digest]);
        if !msg2.tag.ct_eq(&expected) {
            self.phase = Phase::Failed;
            return Err(Error::VerifyFailed);
        }
        let msg2_digest = pairwise_msg2_digest(msg2);
        let confirm_tag = pairwise_auth_tag(
            shared,
            self.share.node_id,
            self.peer,
            &[&self.msg1_digest, &msg2_digest],
        );
        let session = SessionKey::pairwise(shared, self.share.node_id, self.peer);
        self.session = Some(session.clone());
        self.phase = Phase::Done;
        Ok((
            session,
            PairwiseMsg3 {
                sender: self.share.node_id,
                tag: confirm_tag,
            },
        ))
    }

    /// Responder: verifies the confirmation tag and releases the session key.
    pub fn finalize(&mut self, msg3: &PairwiseMsg3) -> Result<SessionKey> {
        if self.role != Role::Responder || self.phase != Phase::AwaitMsg3 {
            return Err(Error::WrongPhase);
        }
        if msg3.sender != self.peer {
            self.phase = Phase::Failed;
            return Err(Error::VerifyFailed);
        }
        let expected = self.expected_tag.expect("responder always caches its tag");
        if !msg3.tag.ct_eq(&expected) {
            self.phase = Phase::Failed;
            return Err(Error::VerifyFailed);
        }
        self.phase = Phase::Done;
        Ok(self
            .session
            .clone()
            .expect("responder always caches the key"))
    }
}

/// Single-owner path handshake state.
#[derive(Debug, Clone)]
pub struct PathHandshake {
    role: Role,
    phase: Phase,
    share: KeyShare,
    curve: CurveParams,
    peer: u32,
    secret: Scalar,
    peer_eph: Option<CurvePoint>,
    msg1_digest: HashTag,
    msg2_digest: Option<HashTag>,
    shared_entry: Option<FieldElement>,
    session: Option<SessionKey>,
}

impl PathHandshake {
    /// Starts a path handshake with a fresh ephemeral scalar from `rng`.
    pub fn initiate(
        share: &KeyShare,
        curve: &CurveParams,
        rng: &mut impl rand::Rng,
        peer: u32,
    ) -> Result<(Self, PathMsg1)> {
        Self::initiate_with_scalar(share, curve, curve.random_scalar(rng), peer)
    }

    /// Deterministic variant with a caller-chosen ephemeral scalar.
    pub fn initiate_with_scalar(
        share: &KeyShare,
        curve: &CurveParams,
        secret: Scalar,
        peer: u32,
    ) -> Result<(Self, PathMsg1)> {
        if peer == share.node_id {
            return Err(Error::SelfPeer);
        }
        let eph = curve.scalar_mul(&secret, &curve.base)?;
        let msg = PathMsg1 {
            sender: share.node_id,
            col: share.col.clone(),
            eph,
        };
        let state = PathHandshake {
            role: Role::Initiator,
            phase: Phase::AwaitMsg2,
            share: share.clone(),
            curve: curve.clone(),
            peer,
            secret,
            peer_eph: None,
            msg1_digest: path_msg1_digest(curve, &msg),
            msg2_digest: None,
            shared_entry: None,
            session: None,
        };
        Ok((state, msg))
    }

    pub fn respond(
        share: &KeyShare,
        curve: &CurveParams,
        rng: &mut impl rand::Rng,
        msg1: &PathMsg1,
    ) -> Result<(Self, PathMsg2)> {
        Self::respond_with_scalar(share, curve, curve.random_scalar(rng), msg1)
    }

    /// Deterministic variant with a caller-chosen ephemeral scalar.
    pub fn respond_with_scalar(
        share: &KeyShare,
        curve: &CurveParams,
        secret: Scalar,
        msg1: &PathMsg1,
    ) -> Result<(Self, PathMsg2)> {
        if msg1.sender == share.node_id {
            return Err(Error::VerifyFailed);
        }
        if !curve.is_on_curve(&msg1.eph) {
            return Err(Error::PointOffCurve);
        }
        if msg1.eph.is_identity() {
            return Err(Error::IdentityPeerPoint);
        }
        if msg1.col.len() != share.dimension() {
            return Err(Error::LengthMismatch);
        }
        let shared = derive_key(&share.row, &msg1.col)?;
        let msg1_digest = path_msg1_digest(curve, msg1);
        let key_tag = path_auth_tag(shared, msg1.sender, share.node_id, &[&msg1_digest]);
        let eph = curve.scalar_mul(&secret, &curve.base)?;
        let msg2 = PathMsg2 {
            sender: share.node_id,
            col: share.col.clone(),
            key_tag,
            eph,
        };
        let msg2_digest = path_msg2_digest(curve, &msg2);
        let state = PathHandshake {
            role: Role::Responder,
            phase: Phase::AwaitMsg3,
            share: share.clone(),
            curve: curve.clone(),
            peer: msg1.sender,
            secret,
            peer_eph: Some(msg1.eph.clone()),
            msg1_digest,
            msg2_digest: Some(msg2_digest),
            shared_entry: Some(shared),
            session: None,
        };
        Ok((state, msg2))
    }

    /// Initiator: verifies the responder's key tag, computes the DH point,
    /// and emits the confirmation. On a tag mismatch the state fails closed;
    /// the caller broadcasts [`Self::abort_message`].
    pub fn confirm(&mut self, msg2: &PathMsg2) -> Result<(SessionKey, PathMsg3)> {
        if self.role != Role::Initiator || self.phase != Phase::AwaitMsg2 {
            return Err(Error::WrongPhase);
        }
        if msg2.sender != self.peer {
            self.phase = Phase::Failed;
            return Err(Error::VerifyFailed);
        }
        if !self.curve.is_on_curve(&msg2.eph) {
            self.phase = Phase::Failed;
            return Err(Error::PointOffCurve);
        }
        if msg2.eph.is_identity() {
            self.phase = Phase::Failed;
            return Err(Error::IdentityPeerPoint);
        }
        if msg2.col.len() != self.share.dimension() {
            self.phase = Phase::Failed;
            return Err(Error::LengthMismatch);
        }
        let shared = derive_key(&self.share.row, &msg2.col)?;
        let expected = path_auth_tag(shared, self.share.node_id, self.peer, &[&self.msg1_digest]);
        if !msg2.key_tag.ct_eq(&expected) {
            self.phase = Phase::Failed;
            return Err(Error::VerifyFailed);
        }
        let msg2_digest = path_msg2_digest(&self.curve, msg2);
        let transcript = [&self.msg1_digest, &msg2_digest];
        let dh_point = self.curve.dh(&self.secret, &msg2.eph)?;
        let key_tag = path_auth_tag(shared, self.share.node_id, self.peer, &transcript);
        let dh_tag = path_dh_tag(
            &self.curve,
            &dh_point,
            self.share.node_id,
            self.peer,
            &transcript,
        );
        let session = SessionKey::path(&self.curve, &dh_point, self.share.node_id, self.peer);
        self.session = Some(session.clone());
        self.phase = Phase::Done;
        Ok((
            session,
            PathMsg3 {
                sender: self.share.node_id,
                key_tag,
                dh_tag,
            },
        ))
    }

    /// Responder: computes the DH point from its own scalar and verifies
    /// both tags before releasing the key.
    pub fn finalize(&mut self, msg3: &PathMsg3) -> Result<SessionKey> {
        if self.role != Role::Responder || self.phase != Phase::AwaitMsg3 {
            return Err(Error::WrongPhase);
        }
        if msg3.sender != self.peer {
            self.phase = Phase::Failed;
            return Err(Error::VerifyFailed);
        }
        let peer_eph = self
            .peer_eph
            .clone()
            .expect("responder always caches msg1's point");
        let dh_point = self.curve.dh(&self.secret, &peer_eph)?;
        let shared = self
            .shared_entry
            .expect("responder always caches the entry");
        let msg2_digest = self
            .msg2_digest
            .expect("responder always caches its digest");
        let transcript = [&self.msg1_digest, &msg2_digest];
        let expected_key_tag = path_auth_tag(shared, self.peer, self.share.node_id, &transcript);
        let expected_dh_tag = path_dh_tag(
            &self.curve,
            &dh_point,
            self.peer,
            self.share.node_id,
            &transcript,
        );
        let key_ok = msg3.key_tag.ct_eq(&expected_key_tag);
        let dh_ok = msg3.dh_tag.ct_eq(&expected_dh_tag);
        if !(key_ok && dh_ok) {
            self.phase = Phase::Failed;
            return Err(Error::VerifyFailed);
        }
        let session = SessionKey::path(&self.curve, &dh_point, self.peer, self.share.node_id);
        self.session = Some(session.clone());
        self.phase = Phase::Done;
        Ok(session)
    }

    /// The error broadcast emitted after a failed verification.
    pub fn abort_message(&self) -> AbortMsg {
        AbortMsg {
            sender: self.share.node_id,
        }
    }
}
