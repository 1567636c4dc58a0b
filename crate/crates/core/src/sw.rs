//! Slepian–Wolf style compression of a stage against Bob's noisy copy.
//!
//! Alice sends short per-chunk digests plus raw Reed–Solomon parity; Bob searches a
//! Hamming window around each received chunk for the unique digest match, marks
//! ambiguous chunks as erasures and lets the RS decoder clean up.

use crate::gf::{Field, FieldError, RsCode, RsError, RsOutcome};
use crate::hashperm::{self, HashFamily, Perm};
use crate::planner::GridPoint;
use crate::qary;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::ops::ControlFlow;
use std::sync::{Arc, Mutex};
use thiserror::Error;

/// Largest Hamming window (candidates per chunk) the decoder will enumerate.
pub const WINDOW_CAP: u128 = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwError {
    #[error("empty estimation sample")]
    EmptySample,
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("parameter web violated: {0}")]
    Params(String),
    #[error("search space of {0} candidates exceeds the enumeration cap")]
    TooLarge(u128),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Rs(#[from] RsError),
}

/// Fraction of sampled positions where `y` disagrees with `x`.
pub fn estimate_noise(x: &[u8], t: &[usize], y_t: &[u8]) -> Result<f64, SwError> {
    if t.is_empty() {
        return Err(SwError::EmptySample);
    }
    if t.len() != y_t.len() {
        return Err(SwError::Length { expected: t.len(), got: y_t.len() });
    }
    let bad = t.iter().zip(y_t).filter(|(&i, &y)| x[i] != y).count();
    Ok(bad as f64 / t.len() as f64)
}

/// Joint type of `(u, y)` against the q-ary symmetric channel law with uniform input.
pub fn jointly_typical(u: &[u8], y: &[u8], q: u32, p: f64, eps: f64) -> bool {
    let qq = q as usize;
    let mut counts = vec![0u32; qq * qq];
    for (&a, &b) in u.iter().zip(y) {
        counts[a as usize * qq + b as usize] += 1;
    }
    let len = u.len() as f64;
    let on = (1.0 - p) / q as f64;
    let off = p / (q as f64 * (q as f64 - 1.0));
    counts.iter().enumerate().all(|(i, &c)| {
        let target = if i / qq == i % qq { on } else { off };
        (c as f64 / len - target).abs() <= eps + 1e-12
    })
}

/// Distances a jointly typical pair can have: every off-diagonal cell moves at most `eps`.
fn typical_distance_range(len: usize, q: u32, p: f64, eps: f64) -> (usize, usize) {
    let spread = (q * (q - 1)) as f64 * eps;
    let lo = ((p - spread) * len as f64 - 1e-9).ceil().max(0.0) as usize;
    let hi = (((p + spread) * len as f64) + 1e-9).floor().min(len as f64) as usize;
    (lo, hi)
}

/// Monolithic digest: the first `⌈N(H_q(p)+ε_h)⌉` (at most `N`) symbols of one keyed hash of `x`.
pub fn sw_encode_monolithic(family: &HashFamily, x: &[u8], p: f64, eps_h: f64) -> Result<Vec<u8>, SwError> {
    let len = digest_len_for(x.len(), p, eps_h, family.q)?;
    family.eval(x, &[], 0, len).map_err(|e| SwError::Params(e.to_string()))
}

fn digest_len_for(len: usize, p: f64, eps_h: f64, q: u32) -> Result<usize, SwError> {
    let h = qary::entropy_q_capped(p, q);
    Ok((((h + eps_h) * len as f64) - 1e-9).ceil().clamp(0.0, len as f64) as usize)
}

/// Searches the whole space for the unique word that matches the digest and is jointly
/// typical with `y`; `None` when there is no such word or more than one.
pub fn sw_decode_monolithic(family: &HashFamily, y: &[u8], z: &[u8], p: f64, eps_d: f64) -> Result<Option<Vec<u8>>, SwError> {
    let q = family.q;
    let (lo, hi) = typical_distance_range(y.len(), q, p, eps_d);
    let size = hashperm::shell_size(y.len(), lo, hi, q);
    if size > WINDOW_CAP {
        return Err(SwError::TooLarge(size));
    }
    let mut found: Option<Vec<u8>> = None;
    let mut many = false;
    let _ = hashperm::for_each_in_shell(y, q, lo, hi, |u| {
        if jointly_typical(u, y, q, p, eps_d) && family.eval(u, &[], 0, z.len()).unwrap() == z {
            if found.is_some() {
                many = true;
                return ControlFlow::Break(());
            }
            found = Some(u.to_vec());
        }
        ControlFlow::Continue(())
    });
    Ok(if many { None } else { found })
}

/// How chunk candidates are screened before the digest check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Typicality {
    /// Distance to the received chunk in `[⌈ℓc(p̂−ε_d)⌉, ⌊ℓc(p̂+ε_d)⌋]`.
    Window,
    /// Joint type within `ε_d` (ℓ∞) of the channel law with crossover `p`.
    JointType,
}

/// Constants of one chunked codec. `phi` is the parity overhead in `K′ = ⌈K/(1−φ)⌉`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkCodecParams {
    pub q: u32,
    pub chunk_len: usize,
    pub seed_len: usize,
    pub eps_h: f64,
    pub eps_d: f64,
    pub eps_e: f64,
    pub eps_t: f64,
    pub eps_n: f64,
    pub phi: f64,
    pub typicality: Typicality,
}

impl ChunkCodecParams {
    /// `⌊√ℓc⌋` seed symbols per chunk.
    pub fn default_seed_len(chunk_len: usize) -> usize {
        (chunk_len as f64).sqrt().floor() as usize
    }

    /// `4q^{−√ℓc/2} + 2ε_N`.
    pub fn nominal_phi(q: u32, chunk_len: usize, eps_n: f64) -> f64 {
        4.0 * (q as f64).powf(-(chunk_len as f64).sqrt() / 2.0) + 2.0 * eps_n
    }

    /// `√(6 ln ℓc / ℓc)`.
    pub fn nominal_eps_t(chunk_len: usize) -> f64 {
        (6.0 * (chunk_len as f64).ln() / chunk_len as f64).sqrt()
    }

    pub fn eps_hh(&self) -> f64 {
        self.eps_h / 3.0
    }

    pub fn validate(&self) -> Result<(), SwError> {
        if crate::gf::prime_power(self.q).is_none() {
            return Err(SwError::Params(format!("q = {} is not a prime power", self.q)));
        }
        if self.chunk_len == 0 {
            return Err(SwError::Params("chunk length must be positive".into()));
        }
        if !(self.phi >= 0.0 && self.phi < 1.0) {
            return Err(SwError::Params(format!("parity overhead phi = {} must lie in [0,1)", self.phi)));
        }
        if !(self.eps_h > self.eps_d) {
            return Err(SwError::Params(format!("need eps_h > eps_d (eps_h = {}, eps_d = {})", self.eps_h, self.eps_d)));
        }
        if self.eps_d < 0.0 || self.eps_e < 0.0 || self.eps_t < 0.0 {
            return Err(SwError::Params("slacks must be nonnegative".into()));
        }
        Ok(())
    }

    /// Checks of the full scheme with grid spacing `delta`. `strict` enforces the exact
    /// relations `ε_h = 2ε_d`, `ε_d = 2δ`, `ε_e = δ/2`, `ε_d ≥ ε_T + ε_e + 2/ℓc`; otherwise
    /// only the covering inequalities `ε_h ≥ 2ε_d` and `ε_d ≥ δ + ε_T + ε_e` are required.
    pub fn validate_scheme(&self, delta: f64, strict: bool) -> Result<(), SwError> {
        self.validate()?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        if strict {
            if !close(self.eps_h, 2.0 * self.eps_d) {
                return Err(SwError::Params(format!("need eps_h = 2 eps_d ({} vs {})", self.eps_h, 2.0 * self.eps_d)));
            }
            if !close(self.eps_d, 2.0 * delta) {
                return Err(SwError::Params(format!("need eps_d = 2 delta ({} vs {})", self.eps_d, 2.0 * delta)));
            }
            if !close(self.eps_e, delta / 2.0) {
                return Err(SwError::Params(format!("need eps_e = delta/2 ({} vs {})", self.eps_e, delta / 2.0)));
            }
            let need = self.eps_t + self.eps_e + 2.0 / self.chunk_len as f64;
            if self.eps_d < need - 1e-12 {
                return Err(SwError::Params(format!("need eps_d >= eps_T + eps_e + 2/lc ({} < {need})", self.eps_d)));
            }
        } else if self.eps_h < 2.0 * self.eps_d - 1e-12 {
            return Err(SwError::Params(format!("need eps_h >= 2 eps_d ({} < {})", self.eps_h, 2.0 * self.eps_d)));
        }
        let need = delta + self.eps_t + self.eps_e;
        if self.eps_d < need - 1e-12 {
            return Err(SwError::Params(format!("need eps_d >= delta + eps_T + eps_e ({} < {need})", self.eps_d)));
        }
        Ok(())
    }

    /// Digest symbols per chunk, `min(ℓc, ⌈ℓc(H_q(p)+ε_h)⌉)`.
    pub fn digest_len(&self, p: f64) -> usize {
        digest_len_for(self.chunk_len, p, self.eps_h, self.q).unwrap()
    }

    pub fn k_prime(&self, k: usize) -> usize {
        if k == 0 {
            return 0;
        }
        ((k as f64 / (1.0 - self.phi)) - 1e-9).ceil().max(k as f64) as usize
    }

    /// Candidate distances searched around a received chunk.
    pub fn window(&self, p: f64) -> (usize, usize) {
        match self.typicality {
            Typicality::Window => {
                let l = self.chunk_len as f64;
                let lo = (l * (p - self.eps_d) - 1e-9).ceil().max(0.0) as usize;
                let hi = ((l * (p + self.eps_d)) + 1e-9).floor().clamp(0.0, l) as usize;
                (lo, hi)
            }
            Typicality::JointType => typical_distance_range(self.chunk_len, self.q, p, self.eps_d),
        }
    }

    /// Geometry of a stage with `content_len` symbols compressed at noise level `p`.
    pub fn layout(&self, content_len: usize, p: f64) -> Layout {
        let k = content_len.div_ceil(self.chunk_len);
        let padded = k * self.chunk_len;
        let k_prime = self.k_prime(k);
        let digest_len = self.digest_len(p);
        Layout {
            content_len,
            padded,
            k,
            k_prime,
            digest_len,
            payload_len: k * digest_len + (k_prime - k) * self.chunk_len,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub content_len: usize,
    pub padded: usize,
    pub k: usize,
    pub k_prime: usize,
    pub digest_len: usize,
    pub payload_len: usize,
}

/// Compressed stage: digests of the `K` systematic chunks, then `K′−K` raw parity chunks.
///
/// Byte layout (little endian): `u32` magic `SWPL`, `u64 N`, `u32 ℓc`, `u32 K`, `u32 K′`,
/// `u64 j`, `u64 g` (noise grid point `j/g`), `u32 pad`, `u32` digest length, `u32 q`,
/// then one byte per symbol of the body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePayload {
    pub content_len: usize,
    pub chunk_len: usize,
    pub k: usize,
    pub k_prime: usize,
    pub p_hat: GridPoint,
    pub pad: usize,
    pub digest_len: usize,
    pub q: u32,
    pub body: Vec<u8>,
}

impl StagePayload {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(48 + self.body.len());
        b.extend_from_slice(b"SWPL");
        b.extend_from_slice(&(self.content_len as u64).to_le_bytes());
        for v in [self.chunk_len, self.k, self.k_prime] {
            b.extend_from_slice(&(v as u32).to_le_bytes());
        }
        b.extend_from_slice(&self.p_hat.j.to_le_bytes());
        b.extend_from_slice(&self.p_hat.g.to_le_bytes());
        for v in [self.pad, self.digest_len, self.q as usize] {
            b.extend_from_slice(&(v as u32).to_le_bytes());
        }
        b.extend_from_slice(&self.body);
        b
    }

    pub fn from_bytes(b: &[u8]) -> Option<Self> {
        if b.len() < 52 || &b[..4] != b"SWPL" {
            return None;
        }
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap()) as usize;
        let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let p = StagePayload {
            content_len: u64_at(4) as usize,
            chunk_len: u32_at(12),
            k: u32_at(16),
            k_prime: u32_at(20),
            p_hat: GridPoint { j: u64_at(24), g: u64_at(32) },
            pad: u32_at(40),
            digest_len: u32_at(44),
            q: u32_at(48) as u32,
            body: b[52..].to_vec(),
        };
        (p.body.len() == p.k * p.digest_len + (p.k_prime - p.k) * p.chunk_len).then_some(p)
    }

    /// Wraps a received body whose geometry Bob derives from his guess.
    pub fn with_layout(layout: &Layout, p_hat: GridPoint, q: u32, chunk_len: usize, body: Vec<u8>) -> Self {
        Self {
            content_len: layout.content_len,
            chunk_len,
            k: layout.k,
            k_prime: layout.k_prime,
            p_hat,
            pad: layout.padded - layout.content_len,
            digest_len: layout.digest_len,
            q,
            body,
        }
    }

    pub fn digests(&self) -> &[u8] {
        &self.body[..self.k * self.digest_len]
    }

    pub fn parity(&self) -> &[u8] {
        &self.body[self.k * self.digest_len..]
    }
}

/// Per-stage scrambling and hash seeding.
#[derive(Debug, Clone, Copy, Default)]
pub struct Route<'a> {
    /// Permutation of the padded stage.
    pub perm: Option<&'a Perm>,
    /// `K·seed_len` seed symbols, chunk `i` using the `i`-th run.
    pub seeds: &'a [u8],
    /// Distinguishes the hash functions of different stages.
    pub salt: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChunkDecode {
    Unique(Vec<u8>),
    /// Zero or several candidates passed.
    Erasure { candidates: u8 },
}

/// A chunked codec: parameters, the chunk field `GF(q^ℓc)` and the hash family.
#[derive(Debug)]
pub struct ChunkCodec {
    pub params: ChunkCodecParams,
    pub family: HashFamily,
    field: Arc<Field>,
    codes: Mutex<HashMap<(usize, usize), Arc<RsCode>>>,
}

impl ChunkCodec {
    pub fn new(params: ChunkCodecParams, hash_master: u64) -> Result<Self, SwError> {
        params.validate()?;
        let field = Arc::new(Field::for_alphabet(params.q, params.chunk_len as u32)?);
        let family = HashFamily::new(hash_master, params.q, params.chunk_len, params.seed_len);
        Ok(Self { params, family, field, codes: Mutex::new(HashMap::new()) })
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }

    fn code(&self, k: usize, k_prime: usize) -> Result<Arc<RsCode>, SwError> {
        if let Some(c) = self.codes.lock().unwrap().get(&(k, k_prime)) {
            return Ok(c.clone());
        }
        let c = Arc::new(RsCode::new(self.field.clone(), k, k_prime)?);
        self.codes.lock().unwrap().insert((k, k_prime), c.clone());
        Ok(c)
    }

    fn chunk_index(salt: u64, i: usize) -> u64 {
        salt << 32 | i as u64
    }

    fn seed<'a>(&self, route: &Route<'a>, i: usize) -> Result<&'a [u8], SwError> {
        let l = self.params.seed_len;
        route
            .seeds
            .get(i * l..(i + 1) * l)
            .ok_or(SwError::Length { expected: (i + 1) * l, got: route.seeds.len() })
    }

    fn padded(&self, w: &[u8], layout: &Layout, route: &Route<'_>) -> Result<Vec<u8>, SwError> {
        let mut v = w.to_vec();
        v.resize(layout.padded, 0);
        match route.perm {
            Some(p) if p.len() != layout.padded => Err(SwError::Length { expected: layout.padded, got: p.len() }),
            Some(p) => Ok(p.apply(&v)),
            None => Ok(v),
        }
    }

    /// Compresses `x` for noise level `p_hat` (the grid point recorded in the header).
    pub fn encode(&self, x: &[u8], p_hat: GridPoint, route: &Route<'_>) -> Result<StagePayload, SwError> {
        self.encode_at(x, p_hat.value(), p_hat, route)
    }

    /// As [`ChunkCodec::encode`] but sized for an arbitrary noise level `p`.
    pub fn encode_at(&self, x: &[u8], p: f64, p_hat: GridPoint, route: &Route<'_>) -> Result<StagePayload, SwError> {
        let prm = &self.params;
        let layout = prm.layout(x.len(), p);
        let w = self.padded(x, &layout, route)?;
        let mut body = Vec::with_capacity(layout.payload_len);
        let mut elems = Vec::with_capacity(layout.k);
        for (i, chunk) in w.chunks_exact(prm.chunk_len).enumerate() {
            let d = self
                .family
                .eval(chunk, self.seed(route, i)?, Self::chunk_index(route.salt, i), layout.digest_len)
                .map_err(|e| SwError::Params(e.to_string()))?;
            body.extend_from_slice(&d);
            elems.push(self.field.from_symbols(chunk, prm.q));
        }
        if layout.k > 0 {
            let cw = self.code(layout.k, layout.k_prime)?.encode(&elems)?;
            for &e in &cw[layout.k..] {
                body.extend(self.field.to_symbols(e, prm.q, prm.chunk_len));
            }
        }
        debug_assert_eq!(body.len(), layout.payload_len);
        Ok(StagePayload {
            content_len: x.len(),
            chunk_len: prm.chunk_len,
            k: layout.k,
            k_prime: layout.k_prime,
            p_hat,
            pad: layout.padded - x.len(),
            digest_len: layout.digest_len,
            q: prm.q,
            body,
        })
    }

    /// Window search for chunk `i`; `p` drives the window (and the channel law under joint typicality).
    pub fn decode_chunk(&self, y_chunk: &[u8], digest: &[u8], p: f64, i: usize, route: &Route<'_>) -> Result<ChunkDecode, SwError> {
        let prm = &self.params;
        let (lo, hi) = prm.window(p);
        let size = hashperm::shell_size(prm.chunk_len, lo, hi, prm.q);
        if size > WINDOW_CAP {
            return Err(SwError::TooLarge(size));
        }
        let seed = self.seed(route, i)?;
        let index = Self::chunk_index(route.salt, i);
        let m = digest.len();
        let mut hits = 0u8;
        let mut found = Vec::new();
        if prm.q == 2 && prm.chunk_len <= 64 && prm.typicality == Typicality::Window && m <= 64 {
            let key = self.family.key(index, seed);
            let target = digest.iter().enumerate().fold(0u64, |acc, (j, &b)| acc | (b as u64) << j);
            let y = hashperm::pack_bits(y_chunk);
            let len = prm.chunk_len as u32;
            let mut hit = 0u64;
            'outer: for w in lo..=hi {
                for mask in masks(len, w as u32) {
                    let u = y ^ mask;
                    if HashFamily::digest_bits(HashFamily::chunk_state(key, u), m) == target {
                        hits += 1;
                        hit = u;
                        if hits > 1 {
                            break 'outer;
                        }
                    }
                }
            }
            if hits == 1 {
                found = hashperm::unpack_bits(hit, prm.chunk_len);
            }
        } else {
            let joint = prm.typicality == Typicality::JointType;
            let _ = hashperm::for_each_in_shell(y_chunk, prm.q, lo, hi, |u| {
                if joint && !jointly_typical(u, y_chunk, prm.q, p, prm.eps_d) {
                    return ControlFlow::Continue(());
                }
                if self.family.eval(u, seed, index, m).unwrap() == digest {
                    hits += 1;
                    if hits > 1 {
                        return ControlFlow::Break(());
                    }
                    found = u.to_vec();
                }
                ControlFlow::Continue(())
            });
        }
        Ok(if hits == 1 { ChunkDecode::Unique(found) } else { ChunkDecode::Erasure { candidates: hits } })
    }

    /// Recovers the stage from Bob's copy `y` and the exact payload; `None` on RS failure.
    pub fn decode(&self, y: &[u8], payload: &StagePayload, route: &Route<'_>) -> Result<Option<Vec<u8>>, SwError> {
        self.decode_at(y, payload, payload.p_hat.value(), route)
    }

    pub fn decode_at(&self, y: &[u8], payload: &StagePayload, p: f64, route: &Route<'_>) -> Result<Option<Vec<u8>>, SwError> {
        let prm = &self.params;
        let layout = prm.layout(y.len(), p);
        if payload.body.len() != layout.payload_len || payload.digest_len != layout.digest_len {
            return Err(SwError::Length { expected: layout.payload_len, got: payload.body.len() });
        }
        if layout.k == 0 {
            return Ok(Some(Vec::new()));
        }
        let w = self.padded(y, &layout, route)?;
        let budget = layout.k_prime - layout.k;
        let mut received: Vec<Option<u32>> = Vec::with_capacity(layout.k_prime);
        let mut erasures = 0;
        let digests = payload.digests();
        for (i, chunk) in w.chunks_exact(prm.chunk_len).enumerate() {
            let d = &digests[i * layout.digest_len..(i + 1) * layout.digest_len];
            match self.decode_chunk(chunk, d, p, i, route)? {
                ChunkDecode::Unique(u) => received.push(Some(self.field.from_symbols(&u, prm.q))),
                ChunkDecode::Erasure { .. } => {
                    erasures += 1;
                    if erasures > budget {
                        return Ok(None);
                    }
                    received.push(None);
                }
            }
        }
        for par in payload.parity().chunks_exact(prm.chunk_len) {
            received.push(Some(self.field.from_symbols(par, prm.q)));
        }
        let data = match self.code(layout.k, layout.k_prime)?.decode(&received)? {
            RsOutcome::Decoded(d) => d,
            RsOutcome::Failure => return Ok(None),
        };
        let mut out = Vec::with_capacity(layout.padded);
        for e in data {
            out.extend(self.field.to_symbols(e, prm.q, prm.chunk_len));
        }
        if let Some(p) = route.perm {
            out = p.invert().apply(&out);
        }
        if out[y.len()..].iter().any(|&s| s != 0) {
            return Ok(None);
        }
        out.truncate(y.len());
        Ok(Some(out))
    }
}

/// All `len`-bit masks of weight `w`, in increasing order.
fn masks(len: u32, w: u32) -> impl Iterator<Item = u64> {
    let limit: u128 = 1u128 << len;
    let first: u128 = if w == 0 { 0 } else { (1u128 << w) - 1 };
    let mut next = Some(first);
    std::iter::from_fn(move || {
        let cur = next?;
        if cur >= limit || w > len {
            next = None;
            return None;
        }
        next = if cur == 0 {
            None
        } else {
            let c = cur & cur.wrapping_neg();
            let r = cur + c;
            Some((((r ^ cur) >> 2) / c) | r)
        };
        Some(cur as u64)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn params(chunk_len: usize, typicality: Typicality) -> ChunkCodecParams {
        ChunkCodecParams {
            q: 2,
            chunk_len,
            seed_len: ChunkCodecParams::default_seed_len(chunk_len),
            eps_h: 0.5,
            eps_d: 0.125,
            eps_e: 0.0,
            eps_t: 0.0,
            eps_n: 0.0,
            phi: 0.2,
            typicality,
        }
    }

    #[test]
    fn estimator_extremes() {
        let x = [0u8, 1, 1, 0];
        assert_eq!(estimate_noise(&x, &[0, 2], &[0, 1]).unwrap(), 0.0);
        assert_eq!(estimate_noise(&x, &[0, 2], &[1, 0]).unwrap(), 1.0);
        assert!(estimate_noise(&x, &[], &[]).is_err());
    }

    #[test]
    fn mask_enumeration() {
        assert_eq!(masks(4, 2).collect::<Vec<_>>(), vec![3, 5, 6, 9, 10, 12]);
        assert_eq!(masks(5, 0).collect::<Vec<_>>(), vec![0]);
        assert_eq!(masks(3, 3).collect::<Vec<_>>(), vec![7]);
        assert_eq!(masks(3, 4).count(), 0);
        assert_eq!(masks(32, 3).count(), 4960);
        assert_eq!(masks(64, 1).count(), 64);
    }

    #[test]
    fn monolithic_zero_noise_and_far_words() {
        let f = HashFamily::new(8, 2, 16, 0);
        let x: Vec<u8> = (0..16).map(|i| (i % 2) as u8).collect();
        let z = sw_encode_monolithic(&f, &x, 0.0, 0.3).unwrap();
        assert_eq!(z.len(), 5);
        assert_eq!(sw_decode_monolithic(&f, &x, &z, 0.0, 0.05).unwrap(), Some(x.clone()));
        // y complemented: nothing typical with a crossover-0.1 law can match x
        let y: Vec<u8> = x.iter().map(|b| 1 - b).collect();
        let z = sw_encode_monolithic(&f, &x, 0.1, 0.3).unwrap();
        assert_ne!(sw_decode_monolithic(&f, &y, &z, 0.1, 0.15).unwrap(), Some(x));
    }

    #[test]
    fn web_validation() {
        let mut p = params(16, Typicality::Window);
        p.eps_h = 0.1;
        assert!(p.validate().is_err());
        let ok = ChunkCodecParams { eps_d: 0.25, eps_h: 0.5, eps_e: 1.0 / 16.0, eps_t: 0.0, ..params(16, Typicality::Window) };
        assert!(ok.validate_scheme(0.125, true).is_ok());
        // 2/ℓc no longer fits under ε_d
        assert!(ChunkCodecParams { chunk_len: 8, ..ok.clone() }.validate_scheme(0.125, true).is_err());
        assert!(ChunkCodecParams { eps_e: 0.05, ..ok.clone() }.validate_scheme(0.125, true).is_err());
        assert!(ChunkCodecParams { eps_h: 0.6, ..ok.clone() }.validate_scheme(0.125, true).is_err());
        assert!(ChunkCodecParams { eps_h: 0.6, ..ok.clone() }.validate_scheme(0.125, false).is_ok());
        let bad = ChunkCodecParams { phi: 1.0, ..ok.clone() };
        assert!(bad.validate().is_err());
        assert!(ChunkCodecParams { q: 6, ..ok }.validate().is_err());
    }

    #[test]
    fn zero_noise_round_trip_and_layout() {
        for (q, len, typ) in [(2u32, 16usize, Typicality::Window), (3, 6, Typicality::Window), (2, 12, Typicality::JointType)] {
            let joint = typ == Typicality::JointType;
            let eps_d = if joint { 0.1 } else { 0.125 };
            let prm = ChunkCodecParams { q, eps_d, eps_h: 0.75, ..params(len, typ) };
            let codec = ChunkCodec::new(prm.clone(), 77).unwrap();
            let mut r = rng::stream(1, 2, "t");
            // joint typicality against a uniform input needs balanced chunks
            let x: Vec<u8> = if joint {
                (0..102).flat_map(|_| {
                    let b = r.gen_range(0..2u8);
                    [b, 1 - b]
                })
                .take(203)
                .collect()
            } else {
                (0..203).map(|_| r.gen_range(0..q) as u8).collect()
            };
            let seeds: Vec<u8> = (0..1000).map(|_| r.gen_range(0..q) as u8).collect();
            let perm = Perm::random(prm.layout(x.len(), 0.0).padded, &mut r);
            let route = Route { perm: (!joint).then_some(&perm), seeds: &seeds, salt: 3 };
            let g = GridPoint::new(0, 8);
            let pay = codec.encode(&x, g, &route).unwrap();
            let lay = prm.layout(x.len(), 0.0);
            assert_eq!(pay.body.len(), lay.k * lay.digest_len + (lay.k_prime - lay.k) * len);
            assert_eq!(lay.digest_len, (len as f64 * prm.eps_h).ceil().min(len as f64) as usize);
            assert_eq!(StagePayload::from_bytes(&pay.to_bytes()).unwrap(), pay);
            assert_eq!(codec.decode(&x, &pay, &route).unwrap(), Some(x.clone()), "q={q} len={len} {typ:?}");
        }
    }

    #[test]
    fn recovers_with_forced_chunk_corruption() {
        let prm = params(16, Typicality::Window);
        let codec = ChunkCodec::new(prm.clone(), 5).unwrap();
        let mut r = rng::stream(4, 0, "t");
        let x: Vec<u8> = (0..16 * 40).map(|_| r.gen_range(0..2) as u8).collect();
        let seeds: Vec<u8> = (0..200).map(|_| r.gen_range(0..2) as u8).collect();
        let route = Route { perm: None, seeds: &seeds, salt: 0 };
        let g = GridPoint::new(1, 16);
        let pay = codec.encode(&x, g, &route).unwrap();
        let lay = prm.layout(x.len(), g.value());
        // smash (K'−K)/2 chunks far outside the window
        let mut y = x.clone();
        for c in 0..(lay.k_prime - lay.k) / 2 {
            for b in &mut y[c * 16..c * 16 + 8] {
                *b ^= 1;
            }
        }
        assert_eq!(codec.decode(&y, &pay, &route).unwrap(), Some(x));
    }
}
