//! Enumerative ranking of error patterns: all q-ary words of length `ℓ` and weight at most
//! `w_max`, ordered by weight and then lexicographically.

use crate::planner::GridPoint;
use crate::qary;
use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IndexError {
    #[error("pattern weight {weight} exceeds the grid allowance {allowed}")]
    WeightExceedsGrid { weight: usize, allowed: usize },
    #[error("index word has {got} symbols, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("index is not the rank of any admissible pattern")]
    OutOfRange,
    #[error("symbol {0} outside the alphabet")]
    Symbol(u8),
}

/// `⌈ℓ·p̂⌉` for `p̂ = j/g`.
pub fn max_weight(len: usize, p_hat: GridPoint) -> usize {
    ((len as u64 * p_hat.j).div_ceil(p_hat.g) as usize).min(len)
}

/// `⌈ℓ(H_q(p̂) + ε_s)⌉ = ⌈ℓH_q(p̂) + c·log_q ℓ⌉`, the nominal index length.
pub fn nominal_index_len(len: usize, p_hat: GridPoint, q: u32) -> usize {
    if len == 0 {
        return 0;
    }
    let l = len as f64;
    let v = l * (qary::entropy_q_capped(p_hat.value(), q) + qary::eps_s(len as u64, q));
    (v - 1e-9).ceil().max(0.0) as usize
}

/// Digits needed to write any rank, `⌈log_q(pattern_count)⌉`.
pub fn exact_index_len(len: usize, p_hat: GridPoint, q: u32) -> usize {
    qary::digits_to_index(&qary::pattern_count(len as u64, max_weight(len, p_hat) as u64, q), q)
}

/// Length of the next stage: the nominal length, raised to the exact digit count where the
/// logarithmic slack is too small (very short stages).
pub fn index_len(len: usize, p_hat: GridPoint, q: u32) -> usize {
    let nominal = nominal_index_len(len, p_hat, q);
    if len < 8 {
        nominal.max(exact_index_len(len, p_hat, q))
    } else {
        nominal
    }
}

/// `C(m, r)·(q−1)^r`.
fn shells(m: usize, r: usize, q: u32) -> BigUint {
    qary::binomial(m as u64, r as u64) * BigUint::from(q - 1).pow(r as u32)
}

/// Rank of `s` among words of length `s.len()` and weight `≤ w_max`.
pub fn rank(s: &[u8], w_max: usize, q: u32) -> Result<BigUint, IndexError> {
    if let Some(&b) = s.iter().find(|&&b| b as u32 >= q) {
        return Err(IndexError::Symbol(b));
    }
    let len = s.len();
    let weight = s.iter().filter(|&&b| b != 0).count();
    if weight > w_max {
        return Err(IndexError::WeightExceedsGrid { weight, allowed: w_max });
    }
    let mut r = BigUint::zero();
    for w in 0..weight {
        r += shells(len, w, q);
    }
    // t = C(m, left)(q−1)^left for the m positions still to place
    let mut left = weight;
    let mut t = shells(len, left, q);
    for (i, &b) in s.iter().enumerate() {
        if left == 0 {
            break;
        }
        let m = len - i;
        let zero_tail = &t * (m - left) / m;
        let nz_tail = &t * left / (m * (q as usize - 1));
        if b == 0 {
            t = zero_tail;
        } else {
            r += &zero_tail + &nz_tail * (b as usize - 1);
            t = nz_tail;
            left -= 1;
        }
    }
    Ok(r)
}

/// Inverse of [`rank`].
pub fn unrank(mut r: BigUint, len: usize, w_max: usize, q: u32) -> Result<Vec<u8>, IndexError> {
    let mut weight = 0;
    loop {
        if weight > w_max.min(len) {
            return Err(IndexError::OutOfRange);
        }
        let c = shells(len, weight, q);
        if r < c {
            break;
        }
        r -= c;
        weight += 1;
    }
    let mut out = vec![0u8; len];
    let mut left = weight;
    let mut t = shells(len, left, q);
    for (i, slot) in out.iter_mut().enumerate() {
        if left == 0 {
            break;
        }
        let m = len - i;
        let zero_tail = &t * (m - left) / m;
        if r < zero_tail {
            t = zero_tail;
            continue;
        }
        r -= &zero_tail;
        let nz_tail = &t * left / (m * (q as usize - 1));
        let v = (&r / &nz_tail).to_usize().unwrap();
        r -= &nz_tail * v;
        *slot = (v + 1) as u8;
        t = nz_tail;
        left -= 1;
    }
    Ok(out)
}

/// Rank of the error pattern, written in base q (most significant first) and padded to
/// [`index_len`].
pub fn error_index_encode(s: &[u8], p_hat: GridPoint, q: u32) -> Result<Vec<u8>, IndexError> {
    let r = rank(s, max_weight(s.len(), p_hat), q)?;
    let out_len = index_len(s.len(), p_hat, q);
    let mut digits = r.to_radix_be(q);
    if digits == [0] {
        digits.clear();
    }
    debug_assert!(digits.len() <= out_len);
    let mut out = vec![0u8; out_len - digits.len()];
    out.extend(digits);
    Ok(out)
}

pub fn error_index_decode(index: &[u8], len: usize, p_hat: GridPoint, q: u32) -> Result<Vec<u8>, IndexError> {
    let expected = index_len(len, p_hat, q);
    if index.len() != expected {
        return Err(IndexError::Length { expected, got: index.len() });
    }
    if let Some(&b) = index.iter().find(|&&b| b as u32 >= q) {
        return Err(IndexError::Symbol(b));
    }
    let r = if index.is_empty() { BigUint::zero() } else { BigUint::from_radix_be(index, q).expect("digits checked") };
    unrank(r, len, max_weight(len, p_hat), q)
}
