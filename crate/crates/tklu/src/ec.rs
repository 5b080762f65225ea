//! Short-Weierstrass elliptic-curve groups over prime fields, with the
//! Diffie-Hellman exchange used for path and group keys.
//!
//! Curves are fully parameterised (`y^2 = x^3 + ax + b mod p` plus a base
//! point of prime order). Three presets ship:
//!
//! * `toy` - 19-element group over GF(17), small enough for exhaustive
//!   brute-force checks.
//! * `test64` - a 64-bit supersingular curve (`y^2 = x^3 + x`, p = 3 mod 4)
//!   whose group order is p + 1 by construction, so a prime-order subgroup is
//!   known without point counting. Fast, for bulk randomized tests only.
//! * `p192` - the standard 192-bit prime curve, for demos.
//!
//! Arithmetic is plain affine double-and-add. This is not side-channel
//! hardened and is not meant to be.

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};

use crate::error::{DecodeError, Error, Result};

/// A point on a curve: the identity (point at infinity) or affine
/// coordinates in `[0, p)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CurvePoint {
    Identity,
    Affine { x: BigUint, y: BigUint },
}

impl CurvePoint {
    pub fn affine(x: BigUint, y: BigUint) -> Self {
        CurvePoint::Affine { x, y }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, CurvePoint::Identity)
    }
}

/// A secret scalar in `[1, order)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scalar(BigUint);

impl Scalar {
    pub fn new(value: BigUint, order: &BigUint) -> Result<Self> {
        if value.is_zero() || &value >= order {
            return Err(Error::InvalidScalar);
        }
        Ok(Scalar(value))
    }

    pub fn from_u64(value: u64, order: &BigUint) -> Result<Self> {
        Self::new(BigUint::from(value), order)
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    /// Fixed-width big-endian encoding sized for the given order.
    pub fn encode(&self, order: &BigUint) -> Vec<u8> {
        let w = byte_width(order);
        let raw = self.0.to_bytes_be();
        let mut out = vec![0u8; w - raw.len()];
        out.extend_from_slice(&raw);
        out
    }
}

/// An ephemeral keypair: secret scalar and its public point `secret * P`.
#[derive(Debug, Clone)]
pub struct EphemeralKeypair {
    pub secret: Scalar,
    pub public: CurvePoint,
}

fn byte_width(n: &BigUint) -> usize {
    (n.bits() as usize).div_ceil(8)
}

/// Curve parameters: field prime, coefficients, base point and its prime
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurveParams {
    pub name: String,
    pub p: BigUint,
    pub a: BigUint,
    pub b: BigUint,
    pub base: CurvePoint,
    pub order: BigUint,
}

impl CurveParams {
    /// Looks up a named preset.
    pub fn preset(name: &str) -> Result<Self> {
        let mk = |name: &str, p: &str, a: &str, b: &str, gx: &str, gy: &str, order: &str| {
            let big = |s: &str| BigUint::parse_bytes(s.as_bytes(), 10).expect("preset literal");
            CurveParams {
                name: name.to_string(),
                p: big(p),
                a: big(a),
                b: big(b),
                base: CurvePoint::affine(big(gx), big(gy)),
                order: big(order),
            }
        };
        match name {
            "toy" => Ok(mk("toy", "17", "2", "2", "5", "1", "19")),
            "test64" => Ok(mk(
                "test64",
                "9223372036854782251",
                "1",
                "0",
                "9193385439474292727",
                "4736596489552552111",
                "2305843009213695563",
            )),
            "p192" => Ok(mk(
                "p192",
                "6277101735386680763835789423207666416083908700390324961279",
                "6277101735386680763835789423207666416083908700390324961276",
                "2455155546008943817740293915197451784769108058161191238065",
                "602046282375688656758213480587526111916698976636884684818",
                "174050332293622031404857552280219410364023488927386650641",
                "6277101735386680763835789423176059013767194773182842284081",
            )),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }

    /// Parses a curve from `key = value` lines listing `p`, `a`, `b`, `gx`,
    /// `gy`, `order` in decimal or `0x` hex. Negative values are reduced
    /// mod p. Lines starting with `#` are ignored.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut fields: std::collections::BTreeMap<String, (bool, BigUint)> =
            std::collections::BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::CurveConfig(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim().to_ascii_lowercase();
            let mut value = value.trim();
            let negative = value.starts_with('-');
            if negative {
                value = &value[1..];
            }
            let parsed = if let Some(hex) = value
                .strip_prefix("0x")
                .or_else(|| value.strip_prefix("0X"))
            {
                BigUint::parse_bytes(hex.as_bytes(), 16)
            } else {
                BigUint::parse_bytes(value.as_bytes(), 10)
            }
            .ok_or_else(|| {
                Error::CurveConfig(format!("line {}: bad integer {value:?}", lineno + 1))
            })?;
            fields.insert(key, (negative, parsed));
        }
        let p = match fields.get("p") {
            Some((false, v)) if !v.is_zero() => v.clone(),
            _ => return Err(Error::CurveConfig("missing or invalid p".into())),
        };
        let get = |key: &str| -> Result<BigUint> {
            let (negative, v) = fields
                .get(key)
                .ok_or_else(|| Error::CurveConfig(format!("missing {key}")))?;
            let reduced = v % &p;
            Ok(if *negative && !reduced.is_zero() {
                &p - reduced
            } else {
                reduced
            })
        };
        let a = get("a")?;
        let b = get("b")?;
        let gx = get("gx")?;
        let gy = get("gy")?;
        let order = match fields.get("order") {
            Some((false, v)) => v.clone(),
            _ => return Err(Error::CurveConfig("missing or invalid order".into())),
        };
        let params = CurveParams {
            name: "custom".to_string(),
            p,
            a,
            b,
            base: CurvePoint::affine(gx, gy),
            order,
        };
        params.validate()?;
        Ok(params)
    }

    /// Checks every structural invariant: nonsingular curve, base point on
    /// the curve and not the identity, prime order, and `order * P`
    /// reaching the identity.
    pub fn validate(&self) -> Result<()> {
        if self.p < BigUint::from(5u32) || !is_prime(&self.p) {
            return Err(Error::CurveConfig("p must be a prime >= 5".into()));
        }
        // 4a^3 + 27b^2 != 0 mod p
        let four_a3 =
            (BigUint::from(4u32) * self.a.modpow(&BigUint::from(3u32), &self.p)) % &self.p;
        let twenty_seven_b2 =
            (BigUint::from(27u32) * self.b.modpow(&BigUint::from(2u32), &self.p)) % &self.p;
        if (four_a3 + twenty_seven_b2) % &self.p == BigUint::zero() {
            return Err(Error::SingularCurve);
        }
        if self.base.is_identity() || !self.is_on_curve(&self.base) {
            return Err(Error::PointOffCurve);
        }
        if !is_prime(&self.order) {
            return Err(Error::CompositeOrder);
        }
        if !self.mul_uint(&self.order, &self.base)?.is_identity() {
            return Err(Error::BadBasePointOrder);
        }
        Ok(())
    }

    pub fn is_on_curve(&self, point: &CurvePoint) -> bool {
        match point {
            CurvePoint::Identity => true,
            CurvePoint::Affine { x, y } => {
                if x >= &self.p || y >= &self.p {
                    return false;
                }
                let lhs = (y * y) % &self.p;
                let rhs = (x * x * x + &self.a * x + &self.b) % &self.p;
                lhs == rhs
            }
        }
    }

    fn mod_sub(&self, a: &BigUint, b: &BigUint) -> BigUint {
        ((a + &self.p) - b) % &self.p
    }

    fn mod_inv(&self, a: &BigUint) -> BigUint {
        // extended Euclid; p prime and a != 0 mod p
        use num_bigint::BigInt;
        let p = BigInt::from(self.p.clone());
        let mut r0 = p.clone();
        let mut r1 = BigInt::from(a.clone());
        let mut t0 = BigInt::ZERO;
        let mut t1 = BigInt::from(1u32);
        while r1 != BigInt::ZERO {
            let q = &r0 / &r1;
            let r2 = &r0 - &q * &r1;
            r0 = r1;
            r1 = r2;
            let t2 = &t0 - &q * &t1;
            t0 = t1;
            t1 = t2;
        }
        let reduced = ((t0 % &p) + &p) % &p;
        reduced.to_biguint().expect("nonnegative after reduction")
    }

    fn add_unchecked(&self, lhs: &CurvePoint, rhs: &CurvePoint) -> CurvePoint {
        let (x1, y1) = match lhs {
            CurvePoint::Identity => return rhs.clone(),
            CurvePoint::Affine { x, y } => (x, y),
        };
        let (x2, y2) = match rhs {
            CurvePoint::Identity => return lhs.clone(),
            CurvePoint::Affine { x, y } => (x, y),
        };
        if x1 == x2 && (y1 + y2) % &self.p == BigUint::zero() {
            return CurvePoint::Identity;
        }
        let lambda = if x1 == x2 {
            // tangent: (3x^2 + a) / 2y
            let num = (BigUint::from(3u32) * x1 * x1 + &self.a) % &self.p;
            let den = (BigUint::from(2u32) * y1) % &self.p;
            (num * self.mod_inv(&den)) % &self.p
        } else {
            let num = self.mod_sub(y2, y1);
            let den = self.mod_sub(x2, x1);
            (num * self.mod_inv(&den)) % &self.p
        };
        let x3 = self.mod_sub(&self.mod_sub(&((&lambda * &lambda) % &self.p), x1), x2);
        let y3 = self.mod_sub(&((&lambda * self.mod_sub(x1, &x3)) % &self.p), y1);
        CurvePoint::Affine { x: x3, y: y3 }
    }

    /// Group law. Both points must lie on this curve.
    pub fn point_add(&self, lhs: &CurvePoint, rhs: &CurvePoint) -> Result<CurvePoint> {
        if !self.is_on_curve(lhs) || !self.is_on_curve(rhs) {
            return Err(Error::PointOffCurve);
        }
        Ok(self.add_unchecked(lhs, rhs))
    }

    fn mul_uint(&self, k: &BigUint, point: &CurvePoint) -> Result<CurvePoint> {
        if !self.is_on_curve(point) {
            return Err(Error::PointOffCurve);
        }
        let mut acc = CurvePoint::Identity;
        for i in (0..k.bits()).rev() {
            acc = self.add_unchecked(&acc, &acc);
            if k.bit(i) {
                acc = self.add_unchecked(&acc, point);
            }
        }
        Ok(acc)
    }

    /// `k`-fold group sum of `point` by double-and-add.
    pub fn scalar_mul(&self, k: &Scalar, point: &CurvePoint) -> Result<CurvePoint> {
        self.mul_uint(&k.0, point)
    }

    /// Diffie-Hellman: `secret * peer_public`. The peer point must be on the
    /// curve and must not be the identity.
    pub fn dh(&self, secret: &Scalar, peer_public: &CurvePoint) -> Result<CurvePoint> {
        if peer_public.is_identity() {
            return Err(Error::IdentityPeerPoint);
        }
        self.scalar_mul(secret, peer_public)
    }

    /// Uniform scalar in `[1, order)` from the caller's RNG.
    pub fn random_scalar(&self, rng: &mut impl rand::Rng) -> Scalar {
        let upper = &self.order - BigUint::one();
        Scalar(rng.gen_biguint_below(&upper) + BigUint::one())
    }

    pub fn generate_keypair(&self, rng: &mut impl rand::Rng) -> EphemeralKeypair {
        let secret = self.random_scalar(rng);
        let public = self
            .scalar_mul(&secret, &self.base)
            .expect("base point on curve");
        EphemeralKeypair { secret, public }
    }

    pub fn coordinate_width(&self) -> usize {
        byte_width(&self.p)
    }

    pub fn scalar_width(&self) -> usize {
        byte_width(&self.order)
    }

    /// Encoded point size in bytes (identity encodes shorter).
    pub fn point_encoding_len(&self) -> usize {
        1 + 2 * self.coordinate_width()
    }

    /// Uncompressed encoding: `0x04 || x || y` with fixed-width coordinates;
    /// identity is the single byte `0x00`.
    pub fn encode_point(&self, point: &CurvePoint) -> Vec<u8> {
        match point {
            CurvePoint::Identity => vec![0x00],
            CurvePoint::Affine { x, y } => {
                let w = self.coordinate_width();
                let mut out = Vec::with_capacity(1 + 2 * w);
                out.push(0x04);
                for coord in [x, y] {
                    let raw = coord.to_bytes_be();
                    out.extend(std::iter::repeat_n(0u8, w - raw.len()));
                    out.extend_from_slice(&raw);
                }
                out
            }
        }
    }

    /// Strict decode: validates the prefix, coordinate range, and curve
    /// membership.
    pub fn decode_point(&self, bytes: &[u8]) -> Result<CurvePoint> {
        if bytes.len() == 1 && bytes[0] == 0x00 {
            return Ok(CurvePoint::Identity);
        }
        let w = self.coordinate_width();
        if bytes.len() != 1 + 2 * w || bytes[0] != 0x04 {
            return Err(DecodeError::BadPointEncoding.into());
        }
        let x = BigUint::from_bytes_be(&bytes[1..1 + w]);
        let y = BigUint::from_bytes_be(&bytes[1 + w..]);
        if x >= self.p || y >= self.p {
            return Err(DecodeError::BadPointEncoding.into());
        }
        let point = CurvePoint::Affine { x, y };
        if !self.is_on_curve(&point) {
            return Err(DecodeError::PointOffCurve.into());
        }
        Ok(point)
    }
}

/// Miller-Rabin with the first 40 primes as bases. Deterministic behavior;
/// a proven witness set below 3.3 * 10^24 and overwhelming confidence above.
fn is_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    const BASES: [u32; 40] = [
        2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
        97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
    ];
    for p in BASES {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - BigUint::one();
    let mut d = n_minus_1.clone();
    let mut s = 0u64;
    while (&d % &two).is_zero() {
        d >>= 1;
        s += 1;
    }
    'witness: for a in BASES {
        let mut x = BigUint::from(a).modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
