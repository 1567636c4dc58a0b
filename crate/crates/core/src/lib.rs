//! List decoding with noiseless feedback against an adversarial channel.
//!
//! Layout: q-ary math and word types at the bottom, then the rate planner, the channel
//! model, finite-field and Reed–Solomon codecs, keyed hashes and permutations, chunked
//! Slepian–Wolf style compression, and the multi-stage protocol on top.

pub mod channel;
pub mod gf;
pub mod hashperm;
pub mod planner;
pub mod qary;
pub mod rng;
pub mod sw;
pub mod weldon;
pub mod word;

pub use planner::{GridPoint, PlannerError, PlannerState, RateFloor};
pub use qary::MathError;
pub use word::{QaryWord, WordError};
