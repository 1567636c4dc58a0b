use listfb_core::hashperm::{HashFamily, Perm, PermBank};
use listfb_core::rng;
use proptest::prelude::*;

proptest! {
    #[test]
    fn hash_is_deterministic_and_prefix_consistent(
        q in prop::sample::select(vec![2u32, 3, 4]),
        raw in prop::collection::vec(any::<u8>(), 16),
        seed in prop::collection::vec(any::<u8>(), 4),
        master in any::<u64>(),
        idx in any::<u64>(),
        short in 0usize..=16,
    ) {
        let chunk: Vec<u8> = raw.iter().map(|b| b % q as u8).collect();
        let seed: Vec<u8> = seed.iter().map(|b| b % q as u8).collect();
        let f = HashFamily::new(master, q, 16, 4);
        let full = f.eval(&chunk, &seed, idx, 16).unwrap();
        prop_assert_eq!(&full, &HashFamily::new(master, q, 16, 4).eval(&chunk, &seed, idx, 16).unwrap());
        prop_assert_eq!(&full[..short], &f.eval(&chunk, &seed, idx, short).unwrap()[..]);
        prop_assert!(full.iter().all(|&d| (d as u32) < q));
    }

    #[test]
    fn permutations_are_bijections(len in 1usize..500, seed in any::<u64>()) {
        let p = Perm::random(len, &mut rng::stream(seed, 0, "perm"));
        let mut seen = vec![false; len];
        for &i in p.map() {
            prop_assert!(!seen[i as usize]);
            seen[i as usize] = true;
        }
        let w: Vec<u32> = (0..len as u32).collect();
        prop_assert_eq!(p.invert().apply(&p.apply(&w)), w.clone());
        prop_assert_eq!(p.apply(&p.invert().apply(&w)), w);
    }

    #[test]
    fn bank_members_are_stable(n in 16usize..256, j in 0u64..8, seed in any::<u64>()) {
        let bank = PermBank::new(seed, n, 8);
        let a = bank.get(n, j).unwrap();
        let b = PermBank::new(seed, n, 8).get(n, j).unwrap();
        prop_assert_eq!(a.map(), b.map());
        prop_assert!(bank.get(n, 8).is_err());
    }
}
