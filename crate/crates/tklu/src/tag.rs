//! Hash tags: fixed 256-bit digests with domain-separation labels.

use num_bigint::BigUint;
use num_traits::Zero;
use sha2::{Digest, Sha256};

pub const TAG_LEN: usize = 32;

// Domain labels. None is a prefix of another, so plain concatenation with the
// payload is unambiguous.
pub(crate) const PW_AUTH: &[u8] = b"PWAUTH";
pub(crate) const PW_KEY: &[u8] = b"PWKEY";
pub(crate) const PW_TRANSCRIPT1: &[u8] = b"PWTR1";
pub(crate) const PW_TRANSCRIPT2: &[u8] = b"PWTR2";
pub(crate) const PATH_TRANSCRIPT1: &[u8] = b"PATHTR1";
pub(crate) const PATH_TRANSCRIPT2: &[u8] = b"PATHTR2";
pub(crate) const PATH_AUTH: &[u8] = b"PATHAUTH";
pub(crate) const PATH_DH: &[u8] = b"PATHDH";
pub(crate) const PATH_KEY: &[u8] = b"PATHKEY";
pub(crate) const GROUP_LEAF: &[u8] = b"GRPLEAF";
pub(crate) const GROUP_NODE: &[u8] = b"GRPNODE";
pub(crate) const GROUP_KEY: &[u8] = b"GRPKEY";
pub(crate) const SINK_REVOKE: &[u8] = b"SINKREV";

/// A 32-byte digest of a domain-labelled payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HashTag([u8; TAG_LEN]);

impl HashTag {
    pub fn from_bytes(bytes: [u8; TAG_LEN]) -> Self {
        HashTag(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; TAG_LEN] {
        &self.0
    }

    /// Constant-time comparison over the full 32 bytes.
    pub fn ct_eq(&self, other: &HashTag) -> bool {
        let mut diff = 0u8;
        for (a, b) in self.0.iter().zip(other.0.iter()) {
            diff |= a ^ b;
        }
        diff == 0
    }
}

/// SHA-256 of `label || payload`.
pub fn hash_tag(label: &[u8], payload: &[u8]) -> HashTag {
    let mut h = Sha256::new();
    h.update(label);
    h.update(payload);
    HashTag(h.finalize().into())
}

/// Maps a labelled payload to a nonzero scalar in `[1, order)` by hashing with
/// an incrementing counter and reducing mod `order` until the result is
/// nonzero.
pub fn hash_to_scalar(label: &[u8], payload: &[u8], order: &BigUint) -> BigUint {
    let mut counter = 0u32;
    loop {
        let mut input = payload.to_vec();
        input.extend_from_slice(&counter.to_be_bytes());
        let tag = hash_tag(label, &input);
        let s = BigUint::from_bytes_be(tag.as_bytes()) % order;
        if !s.is_zero() {
            return s;
        }
        counter += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_inputs_equal_tags() {
        assert_eq!(hash_tag(b"PWAUTH", b"abc"), hash_tag(b"PWAUTH", b"abc"));
    }

    #[test]
    fn one_byte_difference_changes_tag() {
        let a = hash_tag(b"PWAUTH", b"abc");
        let b = hash_tag(b"PWAUTH", b"abd");
        assert_ne!(a, b);
    }

    #[test]
    fn domain_labels_separate() {
        assert_ne!(hash_tag(b"PW", b"payload"), hash_tag(b"PATH", b"payload"));
        assert_ne!(hash_tag(PW_AUTH, b"x"), hash_tag(PATH_AUTH, b"x"));
    }

    #[test]
    fn no_label_is_prefix_of_another() {
        let labels: [&[u8]; 13] = [
            PW_AUTH,
            PW_KEY,
            PW_TRANSCRIPT1,
            PW_TRANSCRIPT2,
            PATH_AUTH,
            PATH_DH,
            PATH_KEY,
            PATH_TRANSCRIPT1,
            PATH_TRANSCRIPT2,
            GROUP_LEAF,
            GROUP_NODE,
            GROUP_KEY,
            SINK_REVOKE,
        ];
        for (i, a) in labels.iter().enumerate() {
            for (j, b) in labels.iter().enumerate() {
                if i != j {
                    assert!(!b.starts_with(a), "{:?} prefixes {:?}", a, b);
                }
            }
        }
    }

    #[test]
    fn hash_to_scalar_in_range_and_nonzero() {
        let order = BigUint::from(19u32);
        for i in 0..200u32 {
            let s = hash_to_scalar(GROUP_NODE, &i.to_be_bytes(), &order);
            assert!(s >= BigUint::from(1u32) && s < order);
        }
    }

    #[test]
    fn ct_eq_matches_eq() {
        let a = hash_tag(b"PWAUTH", b"abc");
        let b = hash_tag(b"PWAUTH", b"abc");
        let c = hash_tag(b"PWAUTH", b"abx");
        assert!(a.ct_eq(&b));
        assert!(!a.ct_eq(&c));
    }
}
