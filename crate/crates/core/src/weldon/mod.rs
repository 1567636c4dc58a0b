//! Multi-stage schemes: each stage carries a compressed description of the previous
//! stage's errors (full feedback) or of the previous stage itself (partial feedback);
//! a concatenated code closes the recursion. Bob resynchronizes by guessing every stage's
//! quantized error fraction and decoding backward.

mod full;
pub mod index;
mod partial;
pub mod termination;

pub use full::{decode_full, run_full_feedback};
pub use index::{error_index_decode, error_index_encode, index_len, IndexError};
pub use partial::{decode_partial, feedback_formula, run_partial_feedback, FeedbackSizes};
pub use termination::{InnerCode, TerminationDesign, TerminationFamily};

use crate::channel::{ChannelError, Transcript};
use crate::gf::FieldError;
use crate::hashperm::PermBank;
use crate::planner::{self, GridPoint, PlannerError, RateFloor, TerminationReason};
use crate::qary;
use crate::rng;
use crate::sw::{ChunkCodec, ChunkCodecParams, SwError};
use crate::word::QaryWord;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeldonError {
    #[error("configuration infeasible: {0}")]
    Config(String),
    #[error("message has {got} symbols, expected {expected}")]
    MessageLength { expected: usize, got: usize },
    #[error("no termination code carries {res_len} symbols in {n_avail}")]
    NoDesign { res_len: usize, n_avail: usize },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Sw(#[from] SwError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Full,
    Partial,
}

/// All constants of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub q: u32,
    pub n: usize,
    /// Budget fraction; the adversary may corrupt `⌊nϱ⌋` symbols.
    pub rho: f64,
    /// Gap to capacity; the rate is `1 − H_q(ϱ) − ε`.
    pub eps: f64,
    pub gamma: f64,
    /// Grid denominator, `δ = 1/grid_den`.
    pub grid_den: u64,
    pub kappa: f64,
    pub stage_cap: u32,
    pub toy: bool,
    pub rate_floor: RateFloor,
    pub eta: f64,
    /// Slack of the padded planner step.
    pub eps_t: f64,
    pub c_e: f64,
    pub c_p: f64,
    pub eps_p: f64,
    pub chunk: ChunkCodecParams,
    /// Debug: Bob is told the true grid vector instead of guessing.
    #[serde(default)]
    pub oracle_sync: bool,
}

impl SchemeParams {
    pub fn rate(&self) -> f64 {
        1.0 - qary::entropy_q_capped(self.rho, self.q) - self.eps
    }

    /// `⌊nR⌋`.
    pub fn message_len(&self) -> usize {
        (self.n as f64 * self.rate() + 1e-9).floor().max(0.0) as usize
    }

    /// `⌊nϱ⌋`.
    pub fn budget(&self) -> u64 {
        (self.n as f64 * self.rho + 1e-9).floor() as u64
    }

    pub fn delta(&self) -> f64 {
        1.0 / self.grid_den as f64
    }

    pub fn eps_z(&self) -> f64 {
        self.gamma / 4.0
    }

    pub fn lambda_tilde(&self) -> Result<u32, PlannerError> {
        planner::lambda_tilde_with(self.eps, self.gamma, self.q, self.rate_floor)
    }

    pub fn block_len(&self) -> usize {
        crate::channel::block_len(self.n, self.kappa)
    }

    /// `(1/δ)^{λ̃}·L`.
    pub fn list_bound(&self) -> Result<f64, PlannerError> {
        Ok((self.grid_den as f64).powi(self.lambda_tilde()? as i32))
    }

    pub fn validate(&self, scheme: Scheme) -> Result<(), WeldonError> {
        let bad = |s: String| Err(WeldonError::Config(s));
        if crate::gf::prime_power(self.q).is_none() {
            return bad(format!("q = {} is not a prime power", self.q));
        }
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if !(self.rate() > 0.0) || self.message_len() == 0 {
            return bad(format!("rate 1 - H(rho) - eps = {} must be positive", self.rate()));
        }
        if !(self.rho >= 0.0 && self.rho < qary::peak(self.q) - self.gamma) {
            return bad(format!("need 0 <= rho < 1 - 1/q - gamma (rho = {}, gamma = {})", self.rho, self.gamma));
        }
        if self.grid_den == 0 {
            return bad("grid denominator must be positive".into());
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return bad(format!("kappa = {} outside (0,1]", self.kappa));
        }
        let lambda = self.lambda_tilde()?;
        if self.stage_cap == 0 || self.stage_cap > lambda + 1 {
            return bad(format!("stage cap {} outside [1, lambda~ + 1 = {}]", self.stage_cap, lambda + 1));
        }
        if self.toy != matches!(self.rate_floor, RateFloor::Toy { .. }) {
            return bad("toy flag and rate floor disagree".into());
        }
        planner::kappa_plan_with(self.eps, self.gamma, self.q, self.rate_floor)?;
        if scheme == Scheme::Partial {
            if self.chunk.q != self.q {
                return bad("chunk alphabet differs from q".into());
            }
            self.chunk.validate_scheme(self.delta(), !self.toy)?;
            if !(self.c_p > self.eps_p && self.eps_p > self.eta && self.eta >= 0.0) {
                return bad(format!("need C_p > eps_p > eta >= 0 ({} , {}, {})", self.c_p, self.eps_p, self.eta));
            }
            if self.c_e <= 0.0 {
                return bad("C_e must be positive".into());
            }
            let k_max = self.message_len().div_ceil(self.chunk.chunk_len);
            if self.chunk.k_prime(k_max) as u64 + 1 > (self.q as u64).saturating_pow(self.chunk.chunk_len as u32) {
                return bad("K' exceeds the chunk field size".into());
            }
        }
        Ok(())
    }
}

/// Shared, immutable setup of a configuration.
#[derive(Debug, Clone)]
pub struct SchemeContext {
    pub params: SchemeParams,
    pub scheme: Scheme,
    pub master_seed: u64,
    pub family: Arc<TerminationFamily>,
    pub codec: Option<Arc<ChunkCodec>>,
    pub bank: Option<Arc<PermBank>>,
}

impl SchemeContext {
    pub fn new(params: SchemeParams, scheme: Scheme, master_seed: u64) -> Result<Self, WeldonError> {
        params.validate(scheme)?;
        let family = Arc::new(TerminationFamily::new(params.q, &mut rng::stream(master_seed, rng::SETUP_INDEX, "termination")));
        let (codec, bank) = match scheme {
            Scheme::Full => (None, None),
            Scheme::Partial => {
                let hash = rng::sub_seed(master_seed, rng::SETUP_INDEX, "hash");
                let perm = rng::sub_seed(master_seed, rng::SETUP_INDEX, "perm");
                (
                    Some(Arc::new(ChunkCodec::new(params.chunk.clone(), hash)?)),
                    Some(Arc::new(PermBank::with_exponent(perm, params.n, params.c_p))),
                )
            }
        };
        Ok(Self { params, scheme, master_seed, family, codec, bank })
    }

    pub fn grid(&self) -> impl Iterator<Item = GridPoint> {
        GridPoint::all(self.params.grid_den)
    }

    /// Transmitted length of a stage carrying `len` content symbols.
    pub fn padded(&self, len: usize) -> usize {
        match self.scheme {
            Scheme::Full => len,
            Scheme::Partial => len.div_ceil(self.params.block_len()) * self.params.block_len(),
        }
    }

    /// Content length of the stage that follows a stage of `len` symbols at grid point `p_hat`.
    pub fn next_len(&self, len: usize, p_hat: GridPoint) -> usize {
        match self.scheme {
            Scheme::Full => index_len(len, p_hat, self.params.q),
            Scheme::Partial => self.params.chunk.layout(len, p_hat.value()).payload_len,
        }
    }

    /// Corruptions certainly spent in a stage of `len` symbols reported at `p_hat`.
    pub fn spent_lower(&self, len: usize, p_hat: GridPoint) -> u64 {
        match self.scheme {
            Scheme::Full => {
                if p_hat.j == 0 {
                    0
                } else {
                    (p_hat.j - 1) * len as u64 / p_hat.g + 1
                }
            }
            Scheme::Partial => {
                let slack = p_hat.value() - self.params.delta() - self.params.chunk.eps_e;
                (len as f64 * slack.max(0.0) + 1e-9).floor() as u64
            }
        }
    }

    /// Whether stage `index` (content `len`, starting at `pos`) is the terminal one.
    pub fn decide(&self, index: u32, len: usize, pos: usize, remaining_ub: u64) -> Option<TerminationReason> {
        let p = &self.params;
        let n_avail = p.n.saturating_sub(pos);
        if len == 0 {
            return Some(TerminationReason::Zyablov);
        }
        if remaining_ub == 0 {
            return Some(TerminationReason::BudgetExhausted);
        }
        if index >= p.stage_cap {
            return Some(TerminationReason::StageCap);
        }
        if pos + self.padded(len) >= p.n {
            return Some(TerminationReason::LengthLimit);
        }
        let rate = len as f64 / n_avail as f64;
        let rho = remaining_ub as f64 / n_avail as f64;
        let radius_ok = self.family.design(len, n_avail).is_some_and(|d| d.radius as u64 >= remaining_ub);
        (rate <= planner::zyablov_at(rho, p.eps_z(), p.q) && radius_ok).then_some(TerminationReason::Zyablov)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpan {
    pub index: u32,
    pub start: usize,
    pub len: usize,
    pub padded: usize,
}

/// One complete guess: grid points of the non-terminal stages and the implied layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GuessLeaf {
    pub p_hat: Vec<GridPoint>,
    pub stages: Vec<StageSpan>,
    pub terminal: StageSpan,
    pub design: TerminationDesign,
    pub reason: TerminationReason,
}

/// Every grid vector whose layout fits in `n` and whose certain spend stays within the budget.
pub fn guess_stage_boundaries(ctx: &SchemeContext) -> Vec<GuessLeaf> {
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    let mut spans = Vec::new();
    grow(ctx, 1, 0, ctx.params.message_len(), 0, &mut prefix, &mut spans, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn grow(
    ctx: &SchemeContext,
    index: u32,
    pos: usize,
    len: usize,
    spent: u64,
    prefix: &mut Vec<GridPoint>,
    spans: &mut Vec<StageSpan>,
    out: &mut Vec<GuessLeaf>,
) {
    let n = ctx.params.n;
    let budget = ctx.params.budget();
    if let Some(reason) = ctx.decide(index, len, pos, budget - spent) {
        if let Some(design) = ctx.family.design(len, n - pos) {
            out.push(GuessLeaf {
                p_hat: prefix.clone(),
                stages: spans.clone(),
                terminal: StageSpan { index, start: pos, len, padded: design.len() },
                design,
                reason,
            });
        }
        return;
    }
    let padded = ctx.padded(len);
    spans.push(StageSpan { index, start: pos, len, padded });
    for p_hat in ctx.grid() {
        let s = spent + ctx.spent_lower(len, p_hat);
        if s > budget {
            break;
        }
        prefix.push(p_hat);
        grow(ctx, index + 1, pos + padded, ctx.next_len(len, p_hat), s, prefix, spans, out);
        prefix.pop();
    }
    spans.pop();
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeEntry {
    pub message: QaryWord,
    pub p_hat: Vec<GridPoint>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeList {
    pub entries: Vec<DecodeEntry>,
    /// Guess vectors examined.
    pub guesses: usize,
}

impl DecodeList {
    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn contains(&self, m: &QaryWord) -> bool {
        self.entries.iter().any(|e| &e.message == m)
    }

    pub fn distinct_messages(&self) -> usize {
        let mut v: Vec<&[u8]> = self.entries.iter().map(|e| e.message.symbols()).collect();
        v.sort_unstable();
        v.dedup();
        v.len()
    }
}

/// Per-stage record of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLog {
    pub index: u32,
    pub start: usize,
    pub len: usize,
    pub padded: usize,
    /// Corruptions placed on the stage's transmitted span.
    pub errors: u64,
    /// Grid point of the stage (absent on the terminal stage).
    pub p_hat: Option<GridPoint>,
    /// Alice's sampled noise estimate (partial feedback).
    pub p_est: Option<f64>,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub list: DecodeList,
    pub transcript: Transcript,
    pub stages: Vec<StageLog>,
    pub reason: TerminationReason,
    pub design: TerminationDesign,
    pub feedback_symbols: u64,
    pub success: bool,
}

impl RunOutcome {
    pub fn true_p_hat(&self) -> Vec<GridPoint> {
        self.stages.iter().filter_map(|s| s.p_hat).collect()
    }

    pub fn budget_spent(&self) -> u64 {
        self.transcript.budget.spent
    }
}

fn check_message(ctx: &SchemeContext, m: &QaryWord) -> Result<(), WeldonError> {
    let expected = ctx.params.message_len();
    if m.len() != expected || m.q() != ctx.params.q {
        return Err(WeldonError::MessageLength { expected, got: m.len() });
    }
    Ok(())
}

fn stage_errors(t: &[u8], start: usize, end: usize) -> u64 {
    t[start..end].iter().filter(|&&e| e != 0).count() as u64
}
