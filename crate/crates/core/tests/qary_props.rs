use listfb_core::qary::{self, entropy_q, inv_entropy_q, pattern_count};
use num_bigint::BigUint;
use proptest::prelude::*;

fn brute_count(len: u32, w_max: u32, q: u32) -> u64 {
    (0..(q as u64).pow(len))
        .filter(|&v| {
            let mut v = v;
            let mut w = 0;
            for _ in 0..len {
                w += (v % q as u64 != 0) as u32;
                v /= q as u64;
            }
            w <= w_max
        })
        .count() as u64
}

#[test]
fn pattern_count_matches_enumeration() {
    for q in 2..=4u32 {
        let max_len = match q {
            2 => 12,
            3 => 9,
            _ => 7,
        };
        for len in 0..=max_len {
            for w in 0..=len {
                assert_eq!(pattern_count(len as u64, w as u64, q), BigUint::from(brute_count(len, w, q)), "q={q} len={len} w={w}");
            }
        }
    }
}

#[test]
fn inverse_round_trip_on_grid() {
    for q in [2u32, 3, 4, 5] {
        for k in 0..=1000 {
            let y = k as f64 / 1000.0;
            let x = inv_entropy_q(y, q).unwrap();
            assert!(x <= qary::peak(q) + 1e-12);
            assert!((entropy_q(x, q).unwrap() - y).abs() <= 1e-9, "q={q} y={y}");
        }
    }
}

proptest! {
    #[test]
    fn entropy_branches_are_monotone(q in 2u32..=7, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-9);
        let peak = qary::peak(q);
        let (hl, hh) = (entropy_q(lo, q).unwrap(), entropy_q(hi, q).unwrap());
        if hi <= peak {
            prop_assert!(hl < hh);
        } else if lo >= peak {
            prop_assert!(hl > hh);
        }
    }

    #[test]
    fn pattern_index_fits_its_budget(q in 2u32..=5, len in 8u64..400, j in 0u64..=16) {
        // ⌈log_q count⌉ ≤ ⌈ℓ(H_q(p̂) + ε_s)⌉ with p̂ = j/16 on the increasing branch
        let p_hat = j as f64 / 16.0;
        prop_assume!(p_hat <= qary::peak(q));
        let w = (len as f64 * p_hat).ceil() as u64;
        let digits = qary::digits_to_index(&pattern_count(len, w, q), q);
        let budget = (len as f64 * (entropy_q(p_hat, q).unwrap() + qary::eps_s(len, q))).ceil() as usize;
        prop_assert!(digits <= budget, "digits {} > {}", digits, budget);
    }
}
