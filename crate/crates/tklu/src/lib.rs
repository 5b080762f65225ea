//! Key establishment for wireless sensor networks from an LU matrix
//! composition, with ECDH-augmented path keys and tree-based group keys.
//!
//! The base station composes a symmetric key pool `K = L * U` over GF(q) and
//! pre-loads each node with one row of `L` and one column of `U`. Neighbors
//! then agree on `K[i][j]` with a three-message mutually authenticated
//! handshake; distant nodes run the same authentication around an ephemeral
//! elliptic-curve Diffie-Hellman exchange so multi-hop relays learn nothing
//! about the key; and clusters build a binary key tree whose leaves are the
//! pairwise exchanges and whose internal nodes are DH merges of sibling
//! groups, giving a shared group key in `ceil(log2 n)` rounds with
//! `log`-sized per-node storage, sponsor-driven rekeying, and full
//! revocation of a compromised node.
//!
//! The [`sim`] module provides a deterministic discrete-event network
//! simulator (geometric topologies, hop routing, latency models), and
//! [`experiment`] drives the reproducible sweeps and demos exposed by the
//! `tklu` CLI.

pub mod ec;
pub mod error;
pub mod experiment;
pub mod field;
pub mod group;
pub mod handshake;
pub mod key_matrix;
pub mod lifecycle;
pub mod sim;
pub mod tag;
pub mod wire;

pub use ec::{CurveParams, CurvePoint, EphemeralKeypair, Scalar};
pub use error::{DecodeError, Error, Result};
pub use experiment::{ExperimentConfig, OutputFormat, SweepReport, SweepRow};
pub use field::{FieldElement, FieldPrime};
pub use group::{GroupKey, KeyTree, MemberId, NodeLabel};
pub use handshake::{PairwiseHandshake, PathHandshake, SessionKey, SessionKind};
pub use key_matrix::{derive_key, KeyShare, MasterKeyMatrix, PairwiseKey};
pub use lifecycle::{KeyStore, MemoryReport, Network, RevocationReport};
pub use sim::{EventTrace, LatencyModel, NodeId, Scheduler, SimMessage, Topology};
pub use tag::{hash_tag, HashTag};
pub use wire::{WireContext, WireMessage};
