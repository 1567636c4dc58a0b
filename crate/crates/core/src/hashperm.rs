//! Keyed per-chunk hashes, Hamming-ball enumeration, and the permutation bank.

use crate::rng::{self, mix64};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::ops::ControlFlow;
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HashPermError {
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("range {range} exceeds chunk length {chunk}")]
    Range { range: usize, chunk: usize },
    #[error("enumeration of {0} candidates is too large")]
    TooLarge(u128),
    #[error("permutation index {index} outside bank of size {size}")]
    Index { index: u64, size: u64 },
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stands in for the stored random tables `h_i(chunk, seed)`: a keyed pseudorandom
/// function of (master seed, chunk index, seed, chunk) with digits drawn from a counter
/// stream, so a shorter range is a prefix of a longer one.
///
/// For `q = 2` digest bit `j` is bit `j mod 64` of block `⌊j/64⌋`; otherwise digit `j` is
/// `⌊q·r_j / 2^64⌋` for an independent 64-bit word `r_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashFamily {
    pub master_seed: u64,
    pub q: u32,
    pub chunk_len: usize,
    pub seed_len: usize,
}

/// Packs up to 64 bits worth of base-q symbols per word, folding longer inputs.
fn absorb(mut h: u64, symbols: &[u8], q: u32) -> u64 {
    let per = (64.0 / (q as f64).log2()).floor() as usize;
    for block in symbols.chunks(per.max(1)) {
        let v = block.iter().fold(0u64, |acc, &s| acc.wrapping_mul(q as u64).wrapping_add(s as u64));
        h = mix64(h ^ v);
    }
    mix64(h ^ symbols.len() as u64)
}

impl HashFamily {
    pub fn new(master_seed: u64, q: u32, chunk_len: usize, seed_len: usize) -> Self {
        Self { master_seed, q, chunk_len, seed_len }
    }

    /// State after absorbing everything but the chunk.
    #[inline]
    pub fn key(&self, chunk_index: u64, seed: &[u8]) -> u64 {
        let h = mix64(self.master_seed ^ 0x6c69_7374_6662_6801);
        let h = mix64(h ^ chunk_index.wrapping_mul(GOLDEN));
        absorb(h, seed, self.q)
    }

    /// Binary chunks as a bit mask (first symbol in the most significant place).
    #[inline]
    pub fn chunk_state(key: u64, chunk_bits: u64) -> u64 {
        mix64(mix64(key ^ chunk_bits) ^ 0x2545_F491_4F6C_DD1D)
    }

    /// The first `range_len ≤ 64` digest bits for `q = 2`, bit `j` at position `j`.
    #[inline]
    pub fn digest_bits(state: u64, range_len: usize) -> u64 {
        debug_assert!(range_len <= 64);
        let r = mix64(state.wrapping_add(GOLDEN));
        if range_len == 64 {
            r
        } else {
            r & ((1u64 << range_len) - 1)
        }
    }

    fn state(&self, chunk: &[u8], chunk_index: u64, seed: &[u8]) -> u64 {
        let key = self.key(chunk_index, seed);
        if self.q == 2 && chunk.len() <= 64 {
            Self::chunk_state(key, pack_bits(chunk))
        } else {
            absorb(key, chunk, self.q)
        }
    }

    pub fn eval(&self, chunk: &[u8], seed: &[u8], chunk_index: u64, range_len: usize) -> Result<Vec<u8>, HashPermError> {
        if chunk.len() != self.chunk_len {
            return Err(HashPermError::Length { expected: self.chunk_len, got: chunk.len() });
        }
        if seed.len() != self.seed_len {
            return Err(HashPermError::Length { expected: self.seed_len, got: seed.len() });
        }
        if range_len > self.chunk_len {
            return Err(HashPermError::Range { range: range_len, chunk: self.chunk_len });
        }
        Ok(self.digits(self.state(chunk, chunk_index, seed), range_len))
    }

    fn digits(&self, state: u64, range_len: usize) -> Vec<u8> {
        if self.q == 2 {
            (0..range_len)
                .map(|j| {
                    let block = mix64(state.wrapping_add(GOLDEN.wrapping_mul(j as u64 / 64 + 1)));
                    ((block >> (j % 64)) & 1) as u8
                })
                .collect()
        } else {
            (0..range_len)
                .map(|j| {
                    let r = mix64(state ^ mix64((j as u64 + 1).wrapping_mul(GOLDEN)));
                    ((r as u128 * self.q as u128) >> 64) as u8
                })
                .collect()
        }
    }
}

/// Binary word as an integer, first symbol most significant.
#[inline]
pub fn pack_bits(w: &[u8]) -> u64 {
    w.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
}

pub fn unpack_bits(v: u64, len: usize) -> Vec<u8> {
    (0..len).rev().map(|i| ((v >> i) & 1) as u8).collect()
}

/// Packed digest bits as a vector (bit `j` becomes digit `j`).
pub fn digest_bits_to_vec(bits: u64, len: usize) -> Vec<u8> {
    (0..len).map(|j| ((bits >> j) & 1) as u8).collect()
}

/// Number of words at Hamming distance in `[lo, hi]` from a fixed word of length `len`.
pub fn shell_size(len: usize, lo: usize, hi: usize, q: u32) -> u128 {
    let mut total = 0u128;
    let mut c = 1u128;
    for w in 0..=hi.min(len) {
        if w >= lo {
            total = total.saturating_add(c.saturating_mul((q as u128 - 1).saturating_pow(w as u32)));
        }
        c = c * (len - w) as u128 / (w as u128 + 1);
    }
    total
}

/// Visits every word at distance in `[lo, hi]` from `center`, in order of distance.
pub fn for_each_in_shell<F>(center: &[u8], q: u32, lo: usize, hi: usize, mut f: F) -> ControlFlow<()>
where
    F: FnMut(&[u8]) -> ControlFlow<()>,
{
    let len = center.len();
    let mut word = center.to_vec();
    for w in lo..=hi.min(len) {
        let mut pos: Vec<usize> = (0..w).collect();
        loop {
            let mut vals = vec![1u8; w];
            loop {
                for (k, &p) in pos.iter().enumerate() {
                    word[p] = ((center[p] as u32 + vals[k] as u32) % q) as u8;
                }
                f(&word)?;
                let mut k = 0;
                while k < w && vals[k] as u32 == q - 1 {
                    vals[k] = 1;
                    k += 1;
                }
                if k == w {
                    break;
                }
                vals[k] += 1;
            }
            for &p in &pos {
                word[p] = center[p];
            }
            // next combination in colex order
            let mut i = 0;
            while i < w && (i + 1 < w && pos[i] + 1 == pos[i + 1] || i + 1 == w && pos[i] + 1 == len) {
                i += 1;
            }
            if i == w {
                break;
            }
            pos[i] += 1;
            for (j, slot) in pos.iter_mut().enumerate().take(i) {
                *slot = j;
            }
        }
    }
    ControlFlow::Continue(())
}

/// Bad-seed census for one `(x, s)` pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BadSeedStat {
    pub x: String,
    pub s: String,
    pub radius: usize,
    pub range_len: usize,
    pub bad: u64,
    pub total: u64,
}

/// Counts seeds `r` for which some `u ≠ x` within `radius` of `y = x + s` shares `x`'s digest.
pub fn count_bad_seeds(
    family: &HashFamily,
    x: &[u8],
    s: &[u8],
    radius: usize,
    range_len: usize,
    chunk_index: u64,
) -> Result<BadSeedStat, HashPermError> {
    let q = family.q;
    if x.len() != family.chunk_len || s.len() != x.len() {
        return Err(HashPermError::Length { expected: family.chunk_len, got: x.len().min(s.len()) });
    }
    let total = (q as u64).pow(family.seed_len as u32);
    let work = shell_size(x.len(), 0, radius, q).saturating_mul(total as u128);
    if work > 1 << 24 {
        return Err(HashPermError::TooLarge(work));
    }
    let y: Vec<u8> = x.iter().zip(s).map(|(&a, &b)| ((a as u32 + b as u32) % q) as u8).collect();
    let mut bad = 0;
    let mut seed = vec![0u8; family.seed_len];
    for r in 0..total {
        let mut v = r;
        for slot in seed.iter_mut().rev() {
            *slot = (v % q as u64) as u8;
            v /= q as u64;
        }
        let target = family.eval(x, &seed, chunk_index, range_len)?;
        let hit = for_each_in_shell(&y, q, 0, radius, |u| {
            if u != x && family.eval(u, &seed, chunk_index, range_len).unwrap() == target {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        if hit.is_break() {
            bad += 1;
        }
    }
    let show = |w: &[u8]| w.iter().map(|d| char::from_digit(*d as u32, 36).unwrap()).collect();
    Ok(BadSeedStat { x: show(x), s: show(s), radius, range_len, bad, total })
}

/// A permutation of `[len]`; `apply` moves symbol `i` to position `map[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Perm {
    map: Vec<u32>,
}

impl Perm {
    pub fn identity(len: usize) -> Self {
        Self { map: (0..len as u32).collect() }
    }

    pub fn from_map(map: Vec<u32>) -> Option<Self> {
        let mut seen = vec![false; map.len()];
        for &m in &map {
            let slot = seen.get_mut(m as usize)?;
            if std::mem::replace(slot, true) {
                return None;
            }
        }
        Some(Self { map })
    }

    pub fn random<R: Rng>(len: usize, rng: &mut R) -> Self {
        let mut map: Vec<u32> = (0..len as u32).collect();
        for i in (1..len).rev() {
            let j = rng.gen_range(0..=i);
            map.swap(i, j);
        }
        Self { map }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn map(&self) -> &[u32] {
        &self.map
    }

    pub fn apply<T: Copy + Default>(&self, w: &[T]) -> Vec<T> {
        assert_eq!(w.len(), self.map.len());
        let mut out = vec![T::default(); w.len()];
        for (i, &m) in self.map.iter().enumerate() {
            out[m as usize] = w[i];
        }
        out
    }

    pub fn invert(&self) -> Perm {
        let mut inv = vec![0u32; self.map.len()];
        for (i, &m) in self.map.iter().enumerate() {
            inv[m as usize] = i as u32;
        }
        Perm { map: inv }
    }
}

const CACHE_SLOTS: usize = 8;

/// `P` seeded permutations per length, built on demand behind a small LRU cache.
#[derive(Debug)]
pub struct PermBank {
    pub master_seed: u64,
    pub n: usize,
    pub size: u64,
    cache: Mutex<VecDeque<((usize, u64), Arc<Perm>)>>,
}

impl PermBank {
    pub fn new(master_seed: u64, n: usize, size: u64) -> Self {
        Self { master_seed, n, size, cache: Mutex::new(VecDeque::new()) }
    }

    /// Bank of `round(n^{c_p})` members.
    pub fn with_exponent(master_seed: u64, n: usize, c_p: f64) -> Self {
        Self::new(master_seed, n, bank_size(n, c_p))
    }

    /// Member `j`, as a permutation of `[len]`.
    pub fn get(&self, len: usize, j: u64) -> Result<Arc<Perm>, HashPermError> {
        if j >= self.size {
            return Err(HashPermError::Index { index: j, size: self.size });
        }
        let mut cache = self.cache.lock().unwrap();
        if let Some(pos) = cache.iter().position(|(k, _)| *k == (len, j)) {
            let hit = cache.remove(pos).unwrap();
            let p = hit.1.clone();
            cache.push_front(hit);
            return Ok(p);
        }
        drop(cache);
        let mut r = rng::stream(self.master_seed, j, &format!("perm/{len}"));
        let p = Arc::new(Perm::random(len, &mut r));
        let mut cache = self.cache.lock().unwrap();
        cache.push_front(((len, j), p.clone()));
        cache.truncate(CACHE_SLOTS);
        Ok(p)
    }

    /// Bookkeeping figure `P·n·⌈log₂ n⌉` for storing the whole bank explicitly.
    pub fn storage_symbols(&self) -> u128 {
        self.size as u128 * self.n as u128 * ceil_log2(self.n) as u128
    }
}

pub fn bank_size(n: usize, c_p: f64) -> u64 {
    (n as f64).powf(c_p).round() as u64
}

pub fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// Empirical type of `w` over `q` symbols.
pub fn word_type(w: &[u8], q: u32) -> Vec<f64> {
    let mut t = vec![0f64; q as usize];
    for &c in w {
        t[c as usize] += 1.0;
    }
    t.iter_mut().for_each(|v| *v /= w.len().max(1) as f64);
    t
}

/// Fraction of the complete length-`chunk_len` chunks of `π(s)` whose type is within
/// `eps_t` (ℓ∞) of the type of `s`.
pub fn quasi_uniform_fraction(s: &[u8], q: u32, perm: &Perm, chunk_len: usize, eps_t: f64) -> f64 {
    let global = word_type(s, q);
    let moved = perm.apply(s);
    let chunks = moved.len() / chunk_len;
    if chunks == 0 {
        return 1.0;
    }
    let good = moved
        .chunks_exact(chunk_len)
        .filter(|c| {
            word_type(c, q)
                .iter()
                .zip(&global)
                .all(|(a, b)| (a - b).abs() <= eps_t)
        })
        .count();
    good as f64 / chunks as f64
}
