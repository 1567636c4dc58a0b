use listfb_core::channel::{AdversarySpec, SeedRecord};
use listfb_core::planner::{GridPoint, RateFloor};
use listfb_core::rng;
use listfb_core::sw::{ChunkCodecParams, Typicality};
use listfb_core::weldon::{self, index, Scheme, SchemeContext, SchemeParams};
use listfb_core::QaryWord;
use proptest::prelude::*;
use rand::Rng;

fn params() -> SchemeParams {
    SchemeParams {
        q: 2,
        n: 1024,
        rho: 0.05,
        eps: 0.3,
        gamma: 0.3,
        grid_den: 16,
        kappa: 1.0 / 16.0,
        stage_cap: 4,
        toy: true,
        rate_floor: RateFloor::Toy { denominator: 1.0 },
        eta: 0.01,
        eps_t: 0.05,
        c_e: 4.0,
        c_p: 0.5,
        eps_p: 0.1,
        chunk: ChunkCodecParams {
            q: 2,
            chunk_len: 16,
            seed_len: 4,
            eps_h: 0.5,
            eps_d: 0.2,
            eps_e: 0.05,
            eps_t: 0.05,
            eps_n: 0.0,
            phi: 0.2,
            typicality: Typicality::Window,
        },
        oracle_sync: false,
    }
}

#[test]
fn message_always_in_the_list() {
    let ctx = SchemeContext::new(params(), Scheme::Full, 11).unwrap();
    let bound = ctx.params.list_bound().unwrap();
    let specs = [
        AdversarySpec::Null,
        AdversarySpec::UniformIid { p: 0.05 },
        AdversarySpec::BurstFront,
        AdversarySpec::StageGreedy { share: 0.5 },
        AdversarySpec::GridExtremal { p: vec![0.0625, 0.125] },
    ];
    for (a, spec) in specs.iter().enumerate() {
        for trial in 0..20u64 {
            let mut r = rng::stream(11, trial, "message");
            let m = QaryWord::new(2, (0..ctx.params.message_len()).map(|_| r.gen_range(0..2u8)).collect()).unwrap();
            let mut adv = spec.build(rng::stream(11, trial + 100 * a as u64, "adversary"));
            let seeds = SeedRecord { prg: rng::PRG_DESCRIPTION.into(), master: 11, trial };
            let out = weldon::run_full_feedback(&ctx, &m, adv.as_mut(), seeds).unwrap();
            assert!(out.success && out.list.contains(&m), "{} trial {trial}", spec.label());
            assert!(out.list.size() as f64 <= bound);
            assert!(out.transcript.s.weight() as u64 <= ctx.params.budget());
            assert!(out.transcript.x.len() <= ctx.params.n);
        }
    }
}

proptest! {
    #[test]
    fn error_index_round_trips(len in 1usize..300, j in 0u64..=16, q in 2u32..=4, bits in prop::collection::vec(any::<u16>(), 300)) {
        let p_hat = GridPoint::new(j, 16);
        let w = index::max_weight(len, p_hat);
        // a pattern of weight at most w
        let mut s = vec![0u8; len];
        for (i, b) in bits.iter().take(w).enumerate() {
            s[(*b as usize + i * 7) % len] = 1 + (*b as u8 % (q as u8 - 1));
        }
        let idx = index::error_index_encode(&s, p_hat, q).unwrap();
        prop_assert_eq!(idx.len(), index::index_len(len, p_hat, q));
        prop_assert!(idx.iter().all(|&d| (d as u32) < q));
        prop_assert_eq!(index::error_index_decode(&idx, len, p_hat, q).unwrap(), s);
    }
}
