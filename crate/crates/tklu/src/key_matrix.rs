//! The symmetric key pool as an LU composition over GF(q).
//!
//! The base station holds `K = L * U` where `L` is lower triangular and `U`
//! upper triangular. `K` is built as `L * D * L^T` for a random nonzero
//! diagonal `D` (with `U := D * L^T`), which is symmetric by construction and
//! never hits a zero pivot. Node `i` is assigned row `i` of `L` and column `i`
//! of `U`; the dot product of node `i`'s row with node `j`'s column is
//! `K[i][j] = K[j][i]`, the shared pairwise secret.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::field::{FieldElement, FieldPrime};

/// Base-station-side L, U and K = L*U over GF(q).
#[derive(Debug, Clone)]
pub struct MasterKeyMatrix {
    n: usize,
    q: FieldPrime,
    lower: Vec<u64>,
    upper: Vec<u64>,
    pool: Vec<u64>,
}

impl MasterKeyMatrix {
    /// Deterministically generates the matrices from a seed.
    pub fn generate(n: usize, q: FieldPrime, seed: u64) -> Result<Self> {
        Self::generate_with(n, q, &mut ChaCha20Rng::seed_from_u64(seed))
    }

    /// Generates the matrices drawing from the supplied RNG.
    pub fn generate_with(n: usize, q: FieldPrime, rng: &mut impl rand::Rng) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        let mut lower = vec![0u64; n * n];
        for i in 0..n {
            for j in 0..i {
                lower[i * n + j] = rng.gen_range(0..q.get());
            }
            lower[i * n + i] = rng.gen_range(1..q.get());
        }
        let diag: Vec<u64> = (0..n).map(|_| rng.gen_range(1..q.get())).collect();
        Self::from_lower_and_diag_raw(n, q, lower, &diag)
    }

    /// Builds the composition from an explicit lower-triangular matrix and
    /// diagonal (row-major `lower`, length n*n). Exposed for reproducing
    /// fixed small examples.
    pub fn from_lower_and_diag(
        q: FieldPrime,
        lower_rows: &[Vec<u64>],
        diag: &[u64],
    ) -> Result<Self> {
        let n = lower_rows.len();
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        if diag.len() != n || lower_rows.iter().any(|r| r.len() != n) {
            return Err(Error::LengthMismatch);
        }
        let mut lower = vec![0u64; n * n];
        for (i, row) in lower_rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v >= q.get() {
                    return Err(Error::ElementOutOfRange);
                }
                if j > i && v != 0 {
                    return Err(Error::ElementOutOfRange);
                }
                lower[i * n + j] = v;
            }
        }
        Self::from_lower_and_diag_raw(n, q, lower, diag)
    }

    fn from_lower_and_diag_raw(
        n: usize,
        q: FieldPrime,
        lower: Vec<u64>,
        diag: &[u64],
    ) -> Result<Self> {
        let m = q.get();
        if diag.iter().any(|&d| d == 0 || d >= m) {
            return Err(Error::ElementOutOfRange);
        }
        if (0..n).any(|i| lower[i * n + i] == 0) {
            return Err(Error::ElementOutOfRange);
        }
        // U = D * L^T: U[i][j] = D[i] * L[j][i], zero below the diagonal.
        let mut upper = vec![0u64; n * n];
        for i in 0..n {
            for j in i..n {
                upper[i * n + j] =
                    ((diag[i] as u128 * lower[j * n + i] as u128) % m as u128) as u64;
            }
        }
        // K = L * U.
        let mut pool = vec![0u64; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0u128;
                for t in 0..n {
                    acc = (acc + lower[i * n + t] as u128 * upper[t * n + j] as u128) % m as u128;
                }
                pool[i * n + j] = acc as u64;
            }
        }
        Ok(MasterKeyMatrix {
            n,
            q,
            lower,
            upper,
            pool,
        })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> FieldPrime {
        self.q
    }

    pub fn lower(&self, i: usize, j: usize) -> FieldElement {
        FieldElement::new(self.lower[i * self.n + j], self.q).expect("stored element in range")
    }

    pub fn upper(&self, i: usize, j: usize) -> FieldElement {
        FieldElement::new(self.upper[i * self.n + j], self.q).expect("stored element in range")
    }

    pub fn pool_key(&self, i: usize, j: usize) -> FieldElement {
        FieldElement::new(self.pool[i * self.n + j], self.q).expect("stored element in range")
    }

    /// Row `i` of L and column `i` of U for node `i`.
    pub fn assign_share(&self, i: usize) -> Result<KeyShare> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange {
                index: i,
                dim: self.n,
            });
        }
        let row = (0..self.n).map(|j| self.lower(i, j)).collect();
        let col = (0..self.n).map(|t| self.upper(t, i)).collect();
        Ok(KeyShare {
            node_id: i as u32,
            row,
            col,
        })
    }
}

/// A node's pre-distributed secret: one row of L and one column of U.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyShare {
    pub node_id: u32,
    pub row: Vec<FieldElement>,
    pub col: Vec<FieldElement>,
}

impl KeyShare {
    pub fn dimension(&self) -> usize {
        self.row.len()
    }

    pub fn modulus(&self) -> FieldPrime {
        self.row[0].modulus()
    }

    /// Serialization: node_id (4 bytes BE), n (4 bytes BE), q
    /// (length-prefixed BE), then 2n fixed-width elements, row then column.
    pub fn serialize(&self) -> Vec<u8> {
        let q = self.modulus();
        let q_bytes = {
            let full = q.get().to_be_bytes();
            let skip = full.iter().take_while(|&&b| b == 0).count();
            full[skip..].to_vec()
        };
        let mut out = Vec::new();
        out.extend_from_slice(&self.node_id.to_be_bytes());
        out.extend_from_slice(&(self.row.len() as u32).to_be_bytes());
        out.push(q_bytes.len() as u8);
        out.extend_from_slice(&q_bytes);
        for e in self.row.iter().chain(self.col.iter()) {
            out.extend_from_slice(&e.encode());
        }
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let take = |data: &[u8], at: &mut usize, len: usize| -> Result<Vec<u8>> {
            if *at + len > data.len() {
                return Err(Error::LengthMismatch);
            }
            let out = data[*at..*at + len].to_vec();
            *at += len;
            Ok(out)
        };
        let mut at = 0usize;
        let node_id = u32::from_be_bytes(take(bytes, &mut at, 4)?.try_into().unwrap());
        let n = u32::from_be_bytes(take(bytes, &mut at, 4)?.try_into().unwrap()) as usize;
        let q_len = take(bytes, &mut at, 1)?[0] as usize;
        if q_len == 0 || q_len > 8 {
            return Err(Error::LengthMismatch);
        }
        let q_raw = take(bytes, &mut at, q_len)?;
        let mut buf = [0u8; 8];
        buf[8 - q_len..].copy_from_slice(&q_raw);
        let q = FieldPrime::new(u64::from_be_bytes(buf))?;
        let w = q.byte_width();
        let mut elems = Vec::with_capacity(2 * n);
        for _ in 0..2 * n {
            elems.push(FieldElement::decode(&take(bytes, &mut at, w)?, q)?);
        }
        if at != bytes.len() {
            return Err(Error::LengthMismatch);
        }
        let col = elems.split_off(n);
        Ok(KeyShare {
            node_id,
            row: elems,
            col,
        })
    }
}

/// A pairwise key K[i][j] together with the unordered pair it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairwiseKey {
    pub value: FieldElement,
    pub peer_ids: (u32, u32),
}

impl PairwiseKey {
    pub fn new(value: FieldElement, a: u32, b: u32) -> Self {
        PairwiseKey {
            value,
            peer_ids: (a.min(b), a.max(b)),
        }
    }
}

/// Dot product of a row of L with a column of U: `K[i][j]` of the master
/// matrix.
pub fn derive_key(row: &[FieldElement], col: &[FieldElement]) -> Result<FieldElement> {
    if row.len() != col.len() || row.is_empty() {
        return Err(Error::LengthMismatch);
    }
    let q = row[0].modulus();
    if row.iter().chain(col.iter()).any(|e| e.modulus() != q) {
        return Err(Error::ModulusMismatch);
    }
    let m = q.get() as u128;
    let mut acc = 0u128;
    for (a, b) in row.iter().zip(col.iter()) {
        acc = (acc + a.value() as u128 * b.value() as u128) % m;
    }
    Ok(FieldElement::reduce(acc, q))
}
