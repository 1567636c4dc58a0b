use listfb_core::gf::{Field, RsCode, RsOutcome};
use proptest::prelude::*;
use std::sync::Arc;

proptest! {
    #[test]
    fn prime_field_axioms(p in prop::sample::select(vec![2u32, 3, 5, 7, 11, 13, 251]), a in any::<u32>(), b in any::<u32>(), c in any::<u32>()) {
        let f = Field::new(p, 1).unwrap();
        let (a, b, c) = (a % p, b % p, c % p);
        prop_assert_eq!(f.add(a, b), (a + b) % p);
        prop_assert_eq!(f.mul(a, b) as u64, a as u64 * b as u64 % p as u64);
        prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
        prop_assert_eq!(f.add(a, f.neg(a)), 0);
        if a != 0 {
            prop_assert_eq!(f.mul(a, f.inv(a)), 1);
        }
    }

    #[test]
    fn extension_field_axioms(pm in prop::sample::select(vec![(3u32, 2u32), (3, 3), (5, 2), (7, 2)]), a in any::<u32>(), b in any::<u32>(), c in any::<u32>()) {
        let f = Field::new(pm.0, pm.1).unwrap();
        let o = f.order() as u32;
        let (a, b, c) = (a % o, b % o, c % o);
        prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
        prop_assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
        prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
        prop_assert_eq!(f.sub(f.add(a, b), b), a);
        if a != 0 {
            prop_assert_eq!(f.div(f.mul(a, b), a), b);
        }
    }

    #[test]
    fn rs_corrects_errors_and_erasures(
        m in 3u32..=8,
        k_frac in 0.2f64..0.9,
        data_seed in prop::collection::vec(any::<u32>(), 256),
        pos_seed in prop::collection::vec(any::<u32>(), 256),
        t_frac in 0.0f64..=1.0,
    ) {
        let field = Arc::new(Field::new(2, m).unwrap());
        let n = (field.order() - 1) as usize;
        let k = ((n as f64 * k_frac) as usize).clamp(1, n - 1);
        let code = RsCode::new(field.clone(), k, n).unwrap();
        let o = field.order() as u32;
        let data: Vec<u32> = data_seed[..k].iter().map(|v| v % o).collect();
        let cw = code.encode(&data).unwrap();
        prop_assert_eq!(&cw[..k], &data[..]);
        let red = n - k;
        let t = ((red / 2) as f64 * t_frac) as usize;
        let e = red - 2 * t;
        // distinct positions by a seeded partial shuffle
        let mut pos: Vec<usize> = (0..n).collect();
        for i in 0..t + e {
            let j = i + pos_seed[i] as usize % (n - i);
            pos.swap(i, j);
        }
        let mut rx: Vec<Option<u32>> = cw.iter().map(|&c| Some(c)).collect();
        for (i, &at) in pos[..t].iter().enumerate() {
            rx[at] = Some(field.add(cw[at], 1 + pos_seed[i + 1] % (o - 1)));
        }
        for &at in &pos[t..t + e] {
            rx[at] = None;
        }
        prop_assert_eq!(code.decode(&rx).unwrap(), RsOutcome::Decoded(data));
    }
}
