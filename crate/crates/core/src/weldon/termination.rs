//! The final stage: a concatenated code (random systematic inner codes, Reed–Solomon
//! outer code) with brute-force inner decoding and generalized minimum distance decoding
//! of the outer code.

use crate::gf::{Field, RsCode, RsOutcome};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

/// Largest inner message space enumerated by the decoder.
pub const MAX_INNER_MESSAGES: usize = 4096;
pub const MAX_INNER_LEN: usize = 64;

/// A random `[n, k]` code over GF(q) with generator `[I_k | A]`.
#[derive(Debug, Clone)]
pub struct InnerCode {
    pub q: u32,
    pub k: usize,
    pub n: usize,
    /// Minimum distance, by enumeration.
    pub d: usize,
    /// Codeword of message value `v` (base q, most significant first) at `v·n`.
    codewords: Vec<u8>,
    /// Bit-packed codewords for `q = 2`.
    packed: Vec<u64>,
}

impl InnerCode {
    pub fn random(q: u32, k: usize, n: usize, rng: &mut ChaCha20Rng) -> Self {
        assert!(k >= 1 && n >= k && n <= MAX_INNER_LEN);
        let count = (q as usize).pow(k as u32);
        assert!(count <= MAX_INNER_MESSAGES);
        let parity: Vec<Vec<u8>> = (0..k).map(|_| (0..n - k).map(|_| rng.gen_range(0..q) as u8).collect()).collect();
        let mut codewords = vec![0u8; count * n];
        for v in 0..count {
            let cw = &mut codewords[v * n..(v + 1) * n];
            let mut x = v;
            for i in (0..k).rev() {
                let m = (x % q as usize) as u32;
                x /= q as usize;
                cw[i] = m as u8;
                for (c, &a) in cw[k..].iter_mut().zip(&parity[i]) {
                    *c = ((*c as u32 + m * a as u32) % q) as u8;
                }
            }
        }
        let packed = if q == 2 {
            codewords.chunks_exact(n).map(crate::hashperm::pack_bits).collect()
        } else {
            Vec::new()
        };
        let d = (1..count)
            .map(|v| codewords[v * n..(v + 1) * n].iter().filter(|&&c| c != 0).count())
            .min()
            .unwrap_or(n);
        Self { q, k, n, d, codewords, packed }
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn encode(&self, v: u32) -> &[u8] {
        &self.codewords[v as usize * self.n..(v as usize + 1) * self.n]
    }

    /// Nearest codeword (lowest message value on ties) and its distance.
    pub fn nearest(&self, r: &[u8]) -> (u32, usize) {
        let mut best = (0u32, usize::MAX);
        if self.q == 2 {
            let y = crate::hashperm::pack_bits(r);
            for (v, &c) in self.packed.iter().enumerate() {
                let d = (c ^ y).count_ones() as usize;
                if d < best.1 {
                    best = (v as u32, d);
                }
            }
        } else {
            for (v, c) in self.codewords.chunks_exact(self.n).enumerate() {
                let d = c.iter().zip(r).filter(|(a, b)| a != b).count();
                if d < best.1 {
                    best = (v as u32, d);
                }
            }
        }
        best
    }
}

/// One concrete termination code sized for a residual of `res_len` symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminationDesign {
    pub res_len: usize,
    pub k_in: usize,
    pub n_in: usize,
    pub d_in: usize,
    pub n_out: usize,
    pub k_out: usize,
    /// Corruptions always corrected: `⌈D·d/2⌉ − 1` with `D = N_out − K_out + 1`.
    pub radius: usize,
}

impl TerminationDesign {
    /// Symbols on the wire.
    pub fn len(&self) -> usize {
        self.n_out * self.n_in
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rate(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.res_len as f64 / self.len() as f64
        }
    }

    /// List size bound: decoding within the radius is unique.
    pub fn list_bound(&self) -> usize {
        1
    }

    fn empty(n_avail: usize) -> Self {
        Self { res_len: 0, k_in: 0, n_in: 0, d_in: 0, n_out: 0, k_out: 0, radius: n_avail }
    }
}

/// Every inner code the designer may pick from, fixed at setup.
#[derive(Debug)]
pub struct TerminationFamily {
    pub q: u32,
    inner: BTreeMap<(usize, usize), InnerCode>,
    fields: HashMap<usize, Arc<Field>>,
    codes: Mutex<HashMap<(usize, usize, usize), Arc<RsCode>>>,
}

impl TerminationFamily {
    pub fn new(q: u32, rng: &mut ChaCha20Rng) -> Self {
        let mut inner = BTreeMap::new();
        let mut fields = HashMap::new();
        let mut k = 1;
        while (q as usize).pow(k as u32) <= MAX_INNER_MESSAGES && k <= 12 {
            if (q as u64).pow(k as u32) > 2 {
                fields.insert(k, Arc::new(Field::for_alphabet(q, k as u32).expect("q is a prime power")));
                for n in k..=(4 * k).min(MAX_INNER_LEN) {
                    inner.insert((k, n), InnerCode::random(q, k, n, rng));
                }
            }
            k += 1;
        }
        Self { q, inner, fields, codes: Mutex::new(HashMap::new()) }
    }

    pub fn inner(&self, k: usize, n: usize) -> Option<&InnerCode> {
        self.inner.get(&(k, n))
    }

    /// The design with the largest radius fitting `n_avail` symbols; ties go to the smaller
    /// inner dimension, then the shorter inner code.
    pub fn design(&self, res_len: usize, n_avail: usize) -> Option<TerminationDesign> {
        if res_len == 0 {
            return Some(TerminationDesign::empty(n_avail));
        }
        let mut best: Option<TerminationDesign> = None;
        for (&(k, n), code) in &self.inner {
            let n_out = ((self.q as usize).pow(k as u32) - 1).min(n_avail / n);
            let k_out = res_len.div_ceil(k);
            if k_out == 0 || k_out > n_out {
                continue;
            }
            let dd = n_out - k_out + 1;
            let radius = (dd * code.d).div_ceil(2) - 1;
            let cand = TerminationDesign { res_len, k_in: k, n_in: n, d_in: code.d, n_out, k_out, radius };
            if best.is_none_or(|b| radius > b.radius) {
                best = Some(cand);
            }
        }
        best
    }

    fn outer(&self, d: &TerminationDesign) -> Arc<RsCode> {
        let key = (d.k_in, d.k_out, d.n_out);
        if let Some(c) = self.codes.lock().unwrap().get(&key) {
            return c.clone();
        }
        let c = Arc::new(RsCode::new(self.fields[&d.k_in].clone(), d.k_out, d.n_out).expect("design respects field size"));
        self.codes.lock().unwrap().insert(key, c.clone());
        c
    }

    fn concat(&self, d: &TerminationDesign, outer_cw: &[u32]) -> Vec<u8> {
        let code = &self.inner[&(d.k_in, d.n_in)];
        outer_cw.iter().flat_map(|&v| code.encode(v).iter().copied()).collect()
    }

    pub fn encode(&self, d: &TerminationDesign, residual: &[u8]) -> Vec<u8> {
        assert_eq!(residual.len(), d.res_len, "residual length differs from the design");
        if d.is_empty() {
            return Vec::new();
        }
        let field = &self.fields[&d.k_in];
        let mut padded = residual.to_vec();
        padded.resize(d.k_out * d.k_in, 0);
        let msg: Vec<u32> = padded.chunks_exact(d.k_in).map(|c| field.from_symbols(c, self.q)).collect();
        let cw = self.outer(d).encode(&msg).expect("message fits");
        self.concat(d, &cw)
    }

    /// GMD decoding: nearest inner codewords, then outer errors-and-erasures decoding with
    /// the least reliable blocks erased for every reliability threshold. Returns the unique
    /// residual whose codeword lies within the radius, if any.
    pub fn decode(&self, d: &TerminationDesign, received: &[u8]) -> Vec<Vec<u8>> {
        if d.is_empty() {
            return vec![Vec::new()];
        }
        if received.len() != d.len() {
            return Vec::new();
        }
        let code = &self.inner[&(d.k_in, d.n_in)];
        let inner: Vec<(u32, usize)> = received.chunks_exact(d.n_in).map(|b| code.nearest(b)).collect();
        // every concatenated codeword is at least this far away
        if inner.iter().map(|&(_, dist)| dist).sum::<usize>() > d.radius {
            return Vec::new();
        }
        let half = d.d_in.div_ceil(2).max(1);
        let omega: Vec<usize> = inner.iter().map(|&(_, dist)| dist.min(half)).collect();
        let mut thresholds: Vec<usize> = omega.iter().copied().filter(|&w| w > 0).collect();
        thresholds.sort_unstable();
        thresholds.dedup();
        thresholds.push(usize::MAX);
        let rs = self.outer(d);
        let field = &self.fields[&d.k_in];
        for &t in thresholds.iter().rev() {
            let word: Vec<Option<u32>> = inner.iter().zip(&omega).map(|(&(v, _), &w)| (w < t).then_some(v)).collect();
            if word.iter().filter(|s| s.is_none()).count() > d.n_out - d.k_out {
                continue;
            }
            let RsOutcome::Decoded(msg) = rs.decode(&word).expect("length matches") else { continue };
            let cw = self.concat(d, &rs.encode(&msg).expect("message fits"));
            let dist = cw.iter().zip(received).filter(|(a, b)| a != b).count();
            if dist > d.radius {
                continue;
            }
            let mut out: Vec<u8> = msg.iter().flat_map(|&v| field.to_symbols(v, self.q, d.k_in)).collect();
            if out[d.res_len..].iter().any(|&s| s != 0) {
                continue;
            }
            out.truncate(d.res_len);
            return vec![out];
        }
        Vec::new()
    }
}
