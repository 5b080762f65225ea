//! Crate-wide error types.

use thiserror::Error;

/// Errors produced while decoding wire bytes.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("message truncated")]
    Truncated,
    #[error("trailing bytes after message body")]
    TrailingBytes,
    #[error("unknown message type {0:#04x}")]
    UnknownType(u8),
    #[error("expected message type {expected:#04x}, got {got:#04x}")]
    UnexpectedType { expected: u8, got: u8 },
    #[error("count prefix inconsistent with body length")]
    BadCount,
    #[error("field element not in [0, q)")]
    ElementOutOfRange,
    #[error("malformed curve point encoding")]
    BadPointEncoding,
    #[error("decoded point is not on the curve")]
    PointOffCurve,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    // Finite field / matrix
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("prime bound must be at least 2")]
    BoundTooSmall,
    #[error("field element value not in [0, q)")]
    ElementOutOfRange,
    #[error("operands belong to different fields")]
    ModulusMismatch,
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("vector lengths differ")]
    LengthMismatch,
    #[error("matrix dimension must be at least 1")]
    EmptyMatrix,
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    // Elliptic curve
    #[error("curve is singular (discriminant is zero)")]
    SingularCurve,
    #[error("point does not satisfy the curve equation")]
    PointOffCurve,
    #[error("peer point is the identity")]
    IdentityPeerPoint,
    #[error("group order is not prime")]
    CompositeOrder,
    #[error("order times the base point is not the identity")]
    BadBasePointOrder,
    #[error("scalar not in [1, order)")]
    InvalidScalar,
    #[error("unknown curve preset {0:?}")]
    UnknownPreset(String),
    #[error("curve config: {0}")]
    CurveConfig(String),

    // Handshakes
    #[error("peer id equals own id")]
    SelfPeer,
    #[error("verification failed")]
    VerifyFailed,
    #[error("operation not valid in the current handshake phase")]
    WrongPhase,
    #[error(transparent)]
    Decode(#[from] DecodeError),

    // Group tree
    #[error("member set is empty")]
    EmptyGroup,
    #[error("member {0} is not in the group")]
    UnknownMember(u32),
    #[error("blinded key missing for a required tree node")]
    MissingBlindedKey,
    #[error("cannot remove the last remaining member")]
    LastMember,

    // Key store / network
    #[error("duplicate pairwise entry for neighbor {0}")]
    DuplicateEntry(u32),
    #[error("node {0} does not exist in the network")]
    UnknownNode(u32),

    // Simulator
    #[error("radio range must be in (0, sqrt(2)]")]
    InvalidRadioRange,
    #[error("no connected topology found within {0} attempts")]
    ConnectivityRetries(u32),
    #[error("no route between {0} and {1}")]
    Unreachable(u32, u32),

    // Experiment harness
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
