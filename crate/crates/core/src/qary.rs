//! q-ary entropy, its inverse, the Pinsker gap bound, the Zyablov rate and
//! error-pattern counting. All logarithms are base q unless a name says `ln`.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MathError {
    #[error("argument {name} = {value} outside its domain [{lo}, {hi}]")]
    Domain {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("alphabet size q = {0} must be at least 2")]
    Alphabet(u32),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
}

/// Integer multiplier `c` in the index-length slack `c·log_q(ℓ)/ℓ`.
///
/// Smallest integer for which `ceil(log_q pattern_count(ℓ, ⌈ℓp⌉, q)) ≤ ⌈ℓ(H_q(p) + slack)⌉`
/// holds for every ℓ ≥ 8 and every p; pinned by the tests at the bottom of this file.
pub const EPS_S_COEFF: u32 = 2;

/// Absolute tolerance of [`inv_entropy_q`].
pub const INV_ENTROPY_TOL: f64 = 1e-12;
const INV_ENTROPY_MAX_ITER: usize = 200;
const ZYABLOV_GRID: usize = 1000;

fn check_q(q: u32) -> Result<(), MathError> {
    if q < 2 {
        return Err(MathError::Alphabet(q));
    }
    Ok(())
}

fn check_unit(name: &'static str, v: f64, hi: f64) -> Result<(), MathError> {
    if !(0.0..=hi).contains(&v) {
        return Err(MathError::Domain {
            name,
            value: v,
            lo: 0.0,
            hi,
        });
    }
    Ok(())
}

/// `log_q(x)`.
#[inline]
pub fn log_q(x: f64, q: u32) -> f64 {
    x.ln() / (q as f64).ln()
}

/// The point `1 − 1/q` where `H_q` peaks.
#[inline]
pub fn peak(q: u32) -> f64 {
    1.0 - 1.0 / q as f64
}

/// q-ary entropy `p·log_q(q−1) − p·log_q p − (1−p)·log_q(1−p)`, with `0·log 0 = 0`.
pub fn entropy_q(p: f64, q: u32) -> Result<f64, MathError> {
    check_q(q)?;
    check_unit("p", p, 1.0)?;
    Ok(entropy_unchecked(p, q))
}

#[inline]
fn xlnx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

#[inline]
pub(crate) fn entropy_unchecked(p: f64, q: u32) -> f64 {
    let ln_q = (q as f64).ln();
    let h = (p * ((q - 1) as f64).ln() - xlnx(p) - xlnx(1.0 - p)) / ln_q;
    h.clamp(0.0, 1.0)
}

/// `H_q(min(p, 1 − 1/q))`: the entropy on its increasing branch, flat at 1 beyond the peak.
///
/// This is the exponent that actually governs how many words of length ℓ lie within
/// relative distance p, so it is the one used wherever a stage length is derived.
pub fn entropy_q_capped(p: f64, q: u32) -> f64 {
    entropy_unchecked(p.clamp(0.0, peak(q)), q)
}

/// Unique `p ∈ [0, 1 − 1/q]` with `H_q(p) = y`, by bisection on the increasing branch.
pub fn inv_entropy_q(y: f64, q: u32) -> Result<f64, MathError> {
    check_q(q)?;
    check_unit("y", y, 1.0)?;
    if y == 0.0 {
        return Ok(0.0);
    }
    if y == 1.0 {
        return Ok(peak(q));
    }
    let (mut lo, mut hi) = (0.0_f64, peak(q));
    for _ in 0..INV_ENTROPY_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if entropy_unchecked(mid, q) < y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < INV_ENTROPY_TOL {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Pinsker-type floor on the capacity gap `1 − H_q(1 − 1/q − γ) ≥ γ²/(2 ln q)`.
pub fn capacity_gap_lower_bound(gamma: f64, q: u32) -> Result<f64, MathError> {
    check_q(q)?;
    check_unit("gamma", gamma, peak(q))?;
    Ok(gamma * gamma / (2.0 * (q as f64).ln()))
}

/// Best rate of a concatenated code with list-decodable inner codes at radius `rho`:
/// `max_r r·(1 − rho/(H_q⁻¹(1−r) − eps_z))` over the feasible `r`.
///
/// The search runs over the inner radius `t = H_q⁻¹(1−r)`, which maps the feasible
/// interval of `r` monotonically onto `(rho + eps_z, 1 − 1/q]` and avoids inverting
/// the entropy inside the loop. A uniform grid of 10³ points is refined by golden
/// section around the best grid cell. `rho = 0` is accepted.
pub fn zyablov_rate(rho: f64, eps_z: f64, q: u32) -> Result<f64, MathError> {
    check_q(q)?;
    let c = peak(q);
    if !(0.0..c).contains(&rho) {
        return Err(MathError::Domain {
            name: "rho",
            value: rho,
            lo: 0.0,
            hi: c,
        });
    }
    if !(eps_z > 0.0) {
        return Err(MathError::Domain {
            name: "eps_z",
            value: eps_z,
            lo: 0.0,
            hi: c - rho,
        });
    }
    let t_lo = rho + eps_z;
    if t_lo >= c {
        return Err(MathError::Infeasible(format!(
            "rho + eps_Z = {t_lo} leaves no feasible inner rate (needs < {c})"
        )));
    }
    let objective = |t: f64| -> f64 {
        let r = 1.0 - entropy_unchecked(t, q);
        r * (1.0 - rho / (t - eps_z))
    };
    let step = (c - t_lo) / ZYABLOV_GRID as f64;
    let mut best_j = 0;
    let mut best = f64::NEG_INFINITY;
    for j in 1..ZYABLOV_GRID {
        let v = objective(t_lo + step * j as f64);
        if v > best {
            best = v;
            best_j = j;
        }
    }
    // golden section on the neighbouring cells
    let (mut a, mut b) = (
        t_lo + step * (best_j as f64 - 1.0),
        t_lo + step * (best_j as f64 + 1.0),
    );
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    for _ in 0..80 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = objective(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = objective(x1);
        }
    }
    Ok(best.max(f1).max(f2).max(0.0))
}

/// `γ³/(64 ln q)`: the closed-form floor of the Zyablov rate at `rho = 1 − 1/q − γ`.
pub fn zyablov_floor(gamma: f64, q: u32) -> f64 {
    gamma.powi(3) / (64.0 * (q as f64).ln())
}

/// Binomial coefficient as a big integer.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Number of q-ary words of length `len` with Hamming weight at most `w_max`.
pub fn pattern_count(len: u64, w_max: u64, q: u32) -> BigUint {
    assert!(w_max <= len, "pattern_count: w_max {w_max} > len {len}");
    assert!(q >= 2, "pattern_count: q < 2");
    let mut total = BigUint::zero();
    let mut c = BigUint::one(); // C(len, w)
    let mut pw = BigUint::one(); // (q-1)^w
    for w in 0..=w_max {
        if w > 0 {
            c *= len - w + 1;
            c /= w;
            pw *= q - 1;
        }
        total += &c * &pw;
    }
    total
}

/// Number of base-q digits needed to index `count` objects, i.e. the least `L` with `q^L ≥ count`.
pub fn digits_to_index(count: &BigUint, q: u32) -> usize {
    if count <= &BigUint::one() {
        return 0;
    }
    let m = count - 1u32;
    m.to_radix_le(q).len()
}

/// Index slack `c·log_q(ℓ)/ℓ` with `c = EPS_S_COEFF`.
pub fn eps_s(len: u64, q: u32) -> f64 {
    if len <= 1 {
        return 0.0;
    }
    EPS_S_COEFF as f64 * log_q(len as f64, q) / len as f64
}
