use listfb_core::planner::GridPoint;
use listfb_core::sw::{ChunkCodec, ChunkCodecParams, StagePayload, Route, Typicality};
use proptest::prelude::*;

fn params() -> ChunkCodecParams {
    ChunkCodecParams {
        q: 2,
        chunk_len: 10,
        seed_len: ChunkCodecParams::default_seed_len(10),
        eps_h: 0.6,
        eps_d: 0.1,
        eps_e: 0.0,
        eps_t: 0.0,
        eps_n: 0.0,
        phi: 0.3,
        typicality: Typicality::Window,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn payload_matches_layout_and_round_trips(
        x in prop::collection::vec(0u8..2, 1..120),
        j in 0u64..=4,
        master in any::<u64>(),
        seed_bits in prop::collection::vec(0u8..2, 64),
    ) {
        let prm = params();
        let codec = ChunkCodec::new(prm.clone(), master).unwrap();
        let p_hat = GridPoint::new(j, 16);
        let k = x.len().div_ceil(prm.chunk_len);
        let seeds: Vec<u8> = seed_bits.iter().cycle().take(k * prm.seed_len).copied().collect();
        let route = Route { perm: None, seeds: &seeds, salt: 1 };
        let payload = codec.encode(&x, p_hat, &route).unwrap();
        let layout = prm.layout(x.len(), p_hat.value());
        // recount: K digests of ⌈ℓc(H+ε_h)⌉ capped at ℓc, then K′−K raw chunks
        let h = listfb_core::qary::entropy_q(p_hat.value(), 2).unwrap();
        let d = ((prm.chunk_len as f64 * (h + prm.eps_h)).ceil() as usize).min(prm.chunk_len);
        let k_prime = ((k as f64 / (1.0 - prm.phi)) - 1e-9).ceil() as usize;
        prop_assert_eq!(payload.body.len(), k * d + (k_prime - k) * prm.chunk_len);
        prop_assert_eq!(payload.body.len(), layout.payload_len);
        prop_assert_eq!(StagePayload::from_bytes(&payload.to_bytes()), Some(payload.clone()));
        // a noiseless side word is typical only while distance 0 sits inside the window
        if p_hat.value() <= prm.eps_d {
            prop_assert_eq!(codec.decode(&x, &payload, &route).unwrap(), Some(x.clone()));
        }
    }
}
