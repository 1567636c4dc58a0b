//! Desk-scale configurations used by the selftest, the acceptance suite and `docs/`.

use listfb_core::planner::RateFloor;
use listfb_core::sw::{ChunkCodecParams, Typicality};
use listfb_core::weldon::SchemeParams;

/// Full feedback at `n = 2^12`: every stage is an exact error index, so any grid vector the
/// adversary can afford lands in the list.
pub fn full_params() -> SchemeParams {
    SchemeParams {
        q: 2,
        n: 4096,
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
        chunk: chunk(16, 0.5, 0.2, 0.05, 0.05, 0.2),
        oracle_sync: false,
    }
}

/// Partial feedback at `n = 2^14`. Chunks of 32 bits keep the per-chunk window search in
/// the hundreds of thousands of candidates; `ε_h = 0.65` keeps digest collisions rare
/// against windows that wide.
pub fn partial_params() -> SchemeParams {
    SchemeParams {
        q: 2,
        n: 16384,
        rho: 0.01,
        eps: 0.6,
        gamma: 0.45,
        grid_den: 64,
        kappa: 1.0 / 32.0,
        stage_cap: 3,
        toy: true,
        rate_floor: RateFloor::Toy { denominator: 1.0 },
        eta: 0.01,
        eps_t: 0.05,
        c_e: 8.0,
        c_p: 0.5,
        eps_p: 0.1,
        chunk: chunk(32, 0.65, 0.1, 0.03, 0.05, 0.1),
        oracle_sync: false,
    }
}

fn chunk(chunk_len: usize, eps_h: f64, eps_d: f64, eps_e: f64, eps_t: f64, phi: f64) -> ChunkCodecParams {
    ChunkCodecParams {
        q: 2,
        chunk_len,
        seed_len: ChunkCodecParams::default_seed_len(chunk_len),
        eps_h,
        eps_d,
        eps_e,
        eps_t,
        eps_n: 0.0,
        phi,
        typicality: Typicality::Window,
    }
}
