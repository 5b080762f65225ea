//! Prime-field arithmetic over GF(q) for q up to 63 bits.
//!
//! Every element carries its modulus so mixed-field operations are caught at
//! runtime instead of silently wrapping. Values are canonical in `[0, q)` and
//! encode as fixed-width big-endian byte strings of `ceil(bits(q) / 8)` bytes.

use crate::error::{Error, Result};

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for u64 inputs. The fixed base set is a proven
/// witness set for all integers below 3.3 * 10^24.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d & 1 == 0 {
        d >>= 1;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// A prime field modulus q.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldPrime(u64);

impl FieldPrime {
    /// Wraps `q`, verifying primality.
    pub fn new(q: u64) -> Result<Self> {
        if is_prime_u64(q) {
            Ok(FieldPrime(q))
        } else {
            Err(Error::NotPrime(q))
        }
    }

    /// The least prime strictly greater than `bound`.
    ///
    /// Rejects `bound < 2`; always terminates for larger bounds.
    pub fn smallest_above(bound: u64) -> Result<Self> {
        if bound < 2 {
            return Err(Error::BoundTooSmall);
        }
        let mut candidate = bound.checked_add(1).ok_or(Error::BoundTooSmall)?;
        loop {
            if is_prime_u64(candidate) {
                return Ok(FieldPrime(candidate));
            }
            candidate = candidate.checked_add(1).ok_or(Error::BoundTooSmall)?;
        }
    }

    pub fn get(self) -> u64 {
        self.0
    }

    pub fn bits(self) -> u32 {
        64 - self.0.leading_zeros()
    }

    /// Width of the canonical fixed-width element encoding.
    pub fn byte_width(self) -> usize {
        self.bits().div_ceil(8) as usize
    }

    pub fn element(self, value: u64) -> Result<FieldElement> {
        FieldElement::new(value, self)
    }

    pub fn zero(self) -> FieldElement {
        FieldElement {
            value: 0,
            modulus: self,
        }
    }

    pub fn one(self) -> FieldElement {
        FieldElement {
            value: 1 % self.0,
            modulus: self,
        }
    }

    /// Uniform element of [0, q).
    pub fn random(self, rng: &mut impl rand::Rng) -> FieldElement {
        FieldElement {
            value: rng.gen_range(0..self.0),
            modulus: self,
        }
    }

    /// Uniform element of [1, q).
    pub fn random_nonzero(self, rng: &mut impl rand::Rng) -> FieldElement {
        FieldElement {
            value: rng.gen_range(1..self.0),
            modulus: self,
        }
    }
}

/// An element of GF(q), canonical in `[0, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u64,
    modulus: FieldPrime,
}

#[allow(clippy::should_implement_trait)]
impl FieldElement {
    pub fn new(value: u64, modulus: FieldPrime) -> Result<Self> {
        if value < modulus.get() {
            Ok(FieldElement { value, modulus })
        } else {
            Err(Error::ElementOutOfRange)
        }
    }

    /// Reduces an arbitrary integer into the field.
    pub fn reduce(value: u128, modulus: FieldPrime) -> Self {
        FieldElement {
            value: (value % modulus.get() as u128) as u64,
            modulus,
        }
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn modulus(self) -> FieldPrime {
        self.modulus
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    fn check_same_field(self, other: Self) -> Result<u64> {
        if self.modulus == other.modulus {
            Ok(self.modulus.get())
        } else {
            Err(Error::ModulusMismatch)
        }
    }

    pub fn add(self, other: Self) -> Result<Self> {
        let q = self.check_same_field(other)?;
        let sum = (self.value as u128 + other.value as u128) % q as u128;
        Ok(FieldElement {
            value: sum as u64,
            modulus: self.modulus,
        })
    }

    pub fn sub(self, other: Self) -> Result<Self> {
        let q = self.check_same_field(other)?;
        let diff = (self.value as u128 + q as u128 - other.value as u128) % q as u128;
        Ok(FieldElement {
            value: diff as u64,
            modulus: self.modulus,
        })
    }

    pub fn mul(self, other: Self) -> Result<Self> {
        let q = self.check_same_field(other)?;
        Ok(FieldElement {
            value: mul_mod(self.value, other.value, q),
            modulus: self.modulus,
        })
    }

    /// Multiplicative inverse; `q` is prime so a^(q-2) works for a != 0.
    pub fn inv(self) -> Result<Self> {
        if self.value == 0 {
            return Err(Error::ZeroInverse);
        }
        let q = self.modulus.get();
        Ok(FieldElement {
            value: pow_mod(self.value, q - 2, q),
            modulus: self.modulus,
        })
    }

    /// Canonical fixed-width big-endian encoding.
    pub fn encode(self) -> Vec<u8> {
        let w = self.modulus.byte_width();
        self.value.to_be_bytes()[8 - w..].to_vec()
    }

    /// Decodes a fixed-width big-endian encoding, enforcing `value < q`.
    pub fn decode(bytes: &[u8], modulus: FieldPrime) -> Result<Self> {
        if bytes.len() != modulus.byte_width() || bytes.len() > 8 {
            return Err(Error::ElementOutOfRange);
        }
        let mut buf = [0u8; 8];
        buf[8 - bytes.len()..].copy_from_slice(bytes);
        FieldElement::new(u64::from_be_bytes(buf), modulus)
    }
}
