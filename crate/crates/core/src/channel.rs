//! The channel model: Alice's symbols pass one at a time through a budget-limited
//! causal adversary; feedback is public and noiseless.

use crate::word::QaryWord;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("transmission past blocklength {0}")]
    Overrun(usize),
    #[error("transcript invariant violated: {0}")]
    Invariant(String),
    #[error("malformed transcript bytes: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryBudget {
    pub total: u64,
    pub spent: u64,
}

impl AdversaryBudget {
    /// `⌊n·ϱ⌋` corruptions.
    pub fn new(total: u64) -> Self {
        Self { total, spent: 0 }
    }

    pub fn remaining(&self) -> u64 {
        self.total - self.spent
    }
}

/// Public description of the stage currently on the wire.
///
/// Every stage length is a deterministic function of public parameters, the symbols
/// already sent and the errors already placed, all of which the adversary sees; handing
/// it over directly saves each strategy from re-running Alice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageInfo {
    /// 1-based stage number; 0 marks the unused tail.
    pub index: u32,
    pub start: usize,
    pub len: usize,
    pub terminal: bool,
}

/// What the adversary may look at when choosing `s_i`.
pub struct ChannelView<'a> {
    pub index: usize,
    pub n: usize,
    pub q: u32,
    /// `x_1..x_i`, including the symbol being corrupted.
    pub x_prefix: &'a [u8],
    pub s_prefix: &'a [u8],
    pub budget: AdversaryBudget,
    pub message: Option<&'a QaryWord>,
    pub stage: Option<StageInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackPacket {
    pub block_index: u32,
    /// Forward position after which the packet is sent.
    pub position: usize,
    /// Sampled indices, relative to the start of the block.
    pub f_a: Vec<u32>,
    pub f_b: QaryWord,
    pub f_c: QaryWord,
    pub f_d: QaryWord,
}

impl FeedbackPacket {
    /// Feedback symbols carried, with each sampled index counted as `digits` symbols.
    pub fn symbol_count(&self, index_digits: usize) -> usize {
        self.f_a.len() * index_digits + self.f_b.len() + self.f_c.len() + self.f_d.len()
    }
}

pub trait Adversary: Send {
    fn name(&self) -> String;
    /// Error symbol for position `view.index`; nonzero symbols spend one unit of budget.
    fn corrupt(&mut self, view: &ChannelView<'_>) -> u8;
    fn observe_feedback(&mut self, _packet: &FeedbackPacket) {}
}

fn nonzero(rng: &mut ChaCha20Rng, q: u32) -> u8 {
    rng.gen_range(1..q) as u8
}

pub struct NullAdversary;

impl Adversary for NullAdversary {
    fn name(&self) -> String {
        "null".into()
    }
    fn corrupt(&mut self, _: &ChannelView<'_>) -> u8 {
        0
    }
}

/// q-ary symmetric noise with crossover `p`, until the budget runs out.
pub struct UniformIid {
    pub p: f64,
    rng: ChaCha20Rng,
}

impl UniformIid {
    pub fn new(p: f64, rng: ChaCha20Rng) -> Self {
        Self { p, rng }
    }
}

impl Adversary for UniformIid {
    fn name(&self) -> String {
        format!("uniform_iid({})", self.p)
    }
    fn corrupt(&mut self, view: &ChannelView<'_>) -> u8 {
        if self.rng.gen_bool(self.p) {
            nonzero(&mut self.rng, view.q)
        } else {
            0
        }
    }
}

/// Spends the whole budget on the earliest symbols.
pub struct BurstFront {
    rng: ChaCha20Rng,
}

impl BurstFront {
    pub fn new(rng: ChaCha20Rng) -> Self {
        Self { rng }
    }
}

impl Adversary for BurstFront {
    fn name(&self) -> String {
        "burst_front".into()
    }
    fn corrupt(&mut self, view: &ChannelView<'_>) -> u8 {
        if view.budget.remaining() > 0 {
            nonzero(&mut self.rng, view.q)
        } else {
            0
        }
    }
}

/// At the start of every non-terminal stage commits `share` of what is left of the budget
/// and spends it on the front of that stage.
pub struct StageGreedy {
    pub share: f64,
    rng: ChaCha20Rng,
    current: Option<u32>,
    quota: u64,
}

impl StageGreedy {
    pub fn new(share: f64, rng: ChaCha20Rng) -> Self {
        Self { share, rng, current: None, quota: 0 }
    }
}

impl Adversary for StageGreedy {
    fn name(&self) -> String {
        format!("stage_greedy({})", self.share)
    }
    fn corrupt(&mut self, view: &ChannelView<'_>) -> u8 {
        let stage = view.stage.unwrap_or(StageInfo { index: 1, start: 0, len: view.n, terminal: false });
        if self.current != Some(stage.index) {
            self.current = Some(stage.index);
            self.quota = if stage.terminal || stage.index == 0 {
                0
            } else {
                ((view.budget.remaining() as f64 * self.share).ceil() as u64).min(stage.len as u64)
            };
        }
        if self.quota > 0 {
            self.quota -= 1;
            nonzero(&mut self.rng, view.q)
        } else {
            0
        }
    }
}

/// Plays `round(p_i·ℓ_i)` errors at the front of stage `i`; later stages are left clean.
pub struct GridExtremal {
    pub p: Vec<f64>,
    rng: ChaCha20Rng,
    current: Option<u32>,
    quota: u64,
}

impl GridExtremal {
    pub fn new(p: Vec<f64>, rng: ChaCha20Rng) -> Self {
        Self { p, rng, current: None, quota: 0 }
    }
}

impl Adversary for GridExtremal {
    fn name(&self) -> String {
        format!("grid_extremal({:?})", self.p)
    }
    fn corrupt(&mut self, view: &ChannelView<'_>) -> u8 {
        let Some(stage) = view.stage else { return 0 };
        if self.current != Some(stage.index) {
            self.current = Some(stage.index);
            let p = if stage.index == 0 || stage.terminal {
                0.0
            } else {
                self.p.get(stage.index as usize - 1).copied().unwrap_or(0.0)
            };
            self.quota = (p * stage.len as f64).round() as u64;
        }
        if self.quota > 0 {
            self.quota -= 1;
            nonzero(&mut self.rng, view.q)
        } else {
            0
        }
    }
}

/// Serializable adversary choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversarySpec {
    Null,
    UniformIid { p: f64 },
    BurstFront,
    StageGreedy {
        #[serde(default = "default_share")]
        share: f64,
    },
    GridExtremal { p: Vec<f64> },
}

fn default_share() -> f64 {
    0.5
}

impl AdversarySpec {
    pub fn build(&self, rng: ChaCha20Rng) -> Box<dyn Adversary> {
        match self {
            AdversarySpec::Null => Box::new(NullAdversary),
            AdversarySpec::UniformIid { p } => Box::new(UniformIid::new(*p, rng)),
            AdversarySpec::BurstFront => Box::new(BurstFront::new(rng)),
            AdversarySpec::StageGreedy { share } => Box::new(StageGreedy::new(*share, rng)),
            AdversarySpec::GridExtremal { p } => Box::new(GridExtremal::new(p.clone(), rng)),
        }
    }

    pub fn label(&self) -> String {
        match self {
            AdversarySpec::Null => "null".into(),
            AdversarySpec::UniformIid { p } => format!("uniform_iid({p})"),
            AdversarySpec::BurstFront => "burst_front".into(),
            AdversarySpec::StageGreedy { share } => format!("stage_greedy({share})"),
            AdversarySpec::GridExtremal { p } => format!("grid_extremal({p:?})"),
        }
    }
}

/// Block boundaries at multiples of `⌈nκ⌉`, closed by `n`.
pub fn feedback_schedule(n: usize, kappa: f64) -> Vec<usize> {
    assert!(kappa > 0.0 && kappa <= 1.0, "kappa must lie in (0,1]");
    let b = block_len(n, kappa);
    let mut out: Vec<usize> = (1..).map(|i| i * b).take_while(|&e| e < n).collect();
    out.push(n);
    out
}

/// `⌈nκ⌉`, ignoring float noise below `1e−9·n`.
pub fn block_len(n: usize, kappa: f64) -> usize {
    ((n as f64 * kappa - 1e-9 * n as f64).ceil() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageBoundary {
    pub index: u32,
    pub start: usize,
    pub end: usize,
    /// Grid value `j/g` the stage's successor was sized for.
    pub p_hat: Option<(u64, u64)>,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub prg: String,
    pub master: u64,
    pub trial: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub q: u32,
    pub n: usize,
    pub x: QaryWord,
    pub s: QaryWord,
    pub y: QaryWord,
    pub feedback: Vec<FeedbackPacket>,
    pub stage_boundaries: Vec<StageBoundary>,
    pub adversary_name: String,
    pub prg_seeds: SeedRecord,
    pub budget: AdversaryBudget,
    /// Nonzero error symbols refused because the budget was exhausted or the symbol was out of range.
    pub clamped: u64,
}

/// Symbol-by-symbol forward channel with a causal adversary.
pub struct Channel<'a> {
    q: u32,
    n: usize,
    adversary: &'a mut dyn Adversary,
    budget: AdversaryBudget,
    message: Option<QaryWord>,
    stage: Option<StageInfo>,
    x: Vec<u8>,
    s: Vec<u8>,
    y: Vec<u8>,
    clamped: u64,
    feedback: Vec<FeedbackPacket>,
    boundaries: Vec<StageBoundary>,
}

impl<'a> Channel<'a> {
    pub fn new(q: u32, n: usize, budget: AdversaryBudget, adversary: &'a mut dyn Adversary) -> Self {
        Self {
            q,
            n,
            adversary,
            budget,
            message: None,
            stage: None,
            x: Vec::with_capacity(n),
            s: Vec::with_capacity(n),
            y: Vec::with_capacity(n),
            clamped: 0,
            feedback: Vec::new(),
            boundaries: Vec::new(),
        }
    }

    /// Lets the adversary read the message (omniscient mode).
    pub fn reveal_message(&mut self, m: QaryWord) {
        self.message = Some(m);
    }

    pub fn position(&self) -> usize {
        self.x.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn budget(&self) -> AdversaryBudget {
        self.budget
    }

    pub fn set_stage(&mut self, stage: StageInfo) {
        self.stage = Some(stage);
    }

    pub fn record_boundary(&mut self, b: StageBoundary) {
        self.boundaries.push(b);
    }

    pub fn send(&mut self, sym: u8) -> Result<u8, ChannelError> {
        if self.x.len() >= self.n {
            return Err(ChannelError::Overrun(self.n));
        }
        debug_assert!((sym as u32) < self.q);
        self.x.push(sym);
        let view = ChannelView {
            index: self.x.len() - 1,
            n: self.n,
            q: self.q,
            x_prefix: &self.x,
            s_prefix: &self.s,
            budget: self.budget,
            message: self.message.as_ref(),
            stage: self.stage,
        };
        let mut e = self.adversary.corrupt(&view);
        if e != 0 && ((e as u32) >= self.q || self.budget.remaining() == 0) {
            self.clamped += 1;
            log::debug!("clamped corruption attempt at position {}", self.x.len() - 1);
            e = 0;
        }
        if e != 0 {
            self.budget.spent += 1;
        }
        self.s.push(e);
        let out = ((sym as u32 + e as u32) % self.q) as u8;
        self.y.push(out);
        Ok(out)
    }

    pub fn send_word(&mut self, w: &[u8]) -> Result<Vec<u8>, ChannelError> {
        w.iter().map(|&c| self.send(c)).collect()
    }

    pub fn deliver_feedback(&mut self, packet: FeedbackPacket) {
        self.adversary.observe_feedback(&packet);
        self.feedback.push(packet);
    }

    /// Packets delivered so far.
    pub fn feedback(&self) -> &[FeedbackPacket] {
        &self.feedback
    }

    /// Symbols received so far.
    pub fn received(&self) -> &[u8] {
        &self.y
    }

    pub fn errors(&self) -> &[u8] {
        &self.s
    }

    /// Pads the unused tail with zeros and closes the transcript.
    pub fn finish(mut self, seeds: SeedRecord) -> Result<Transcript, ChannelError> {
        let start = self.x.len();
        if start < self.n {
            self.stage = Some(StageInfo { index: 0, start, len: self.n - start, terminal: false });
            for _ in start..self.n {
                self.send(0)?;
            }
        }
        let t = Transcript {
            q: self.q,
            n: self.n,
            x: QaryWord::from_raw(self.q, self.x),
            s: QaryWord::from_raw(self.q, self.s),
            y: QaryWord::from_raw(self.q, self.y),
            feedback: self.feedback,
            stage_boundaries: self.boundaries,
            adversary_name: self.adversary.name(),
            prg_seeds: seeds,
            budget: self.budget,
            clamped: self.clamped,
        };
        t.validate()?;
        Ok(t)
    }
}

/// Passes `x` through the adversary in one go.
pub fn transmit(
    x: &QaryWord,
    adversary: &mut dyn Adversary,
    budget: &mut AdversaryBudget,
) -> Result<(QaryWord, QaryWord), ChannelError> {
    let mut ch = Channel::new(x.q(), x.len(), *budget, adversary);
    ch.send_word(x.symbols())?;
    *budget = ch.budget;
    Ok((QaryWord::from_raw(x.q(), ch.y), QaryWord::from_raw(x.q(), ch.s)))
}

const MAGIC: &[u8; 4] = b"TRNS";
const VERSION: u8 = 1;

impl Transcript {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.x.len() != self.n || self.s.len() != self.n || self.y.len() != self.n {
            return Err(ChannelError::Invariant("word lengths differ from n".into()));
        }
        if self.x.add(&self.s).map_err(|e| ChannelError::Invariant(e.to_string()))? != self.y {
            return Err(ChannelError::Invariant("y != x + s".into()));
        }
        let w = self.s.weight() as u64;
        if w > self.budget.total || w != self.budget.spent {
            return Err(ChannelError::Invariant(format!(
                "error weight {w} vs budget {}/{}",
                self.budget.spent, self.budget.total
            )));
        }
        Ok(())
    }

    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "q": self.q,
            "n": self.n,
            "adversary": self.adversary_name,
            "error_weight": self.s.weight(),
            "budget_total": self.budget.total,
            "clamped": self.clamped,
            "stages": self.stage_boundaries,
            "feedback_packets": self.feedback.len(),
            "seeds": self.prg_seeds,
        })
    }

    /// `TRNS`, version, then little-endian fields: q, n, x, s, y, boundaries, packets,
    /// budget, clamped, seeds and the adversary label.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(3 * self.n + 64);
        b.extend_from_slice(MAGIC);
        b.push(VERSION);
        put_u32(&mut b, self.q);
        put_u64(&mut b, self.n as u64);
        for w in [&self.x, &self.s, &self.y] {
            b.extend_from_slice(w.symbols());
        }
        put_u32(&mut b, self.stage_boundaries.len() as u32);
        for sb in &self.stage_boundaries {
            put_u32(&mut b, sb.index);
            put_u64(&mut b, sb.start as u64);
            put_u64(&mut b, sb.end as u64);
            let (j, g) = sb.p_hat.unwrap_or((0, 0));
            put_u64(&mut b, j);
            put_u64(&mut b, g);
            b.push(sb.p_hat.is_some() as u8 | (sb.terminal as u8) << 1);
        }
        put_u32(&mut b, self.feedback.len() as u32);
        for p in &self.feedback {
            put_u32(&mut b, p.block_index);
            put_u64(&mut b, p.position as u64);
            put_u32(&mut b, p.f_a.len() as u32);
            for &i in &p.f_a {
                put_u32(&mut b, i);
            }
            for w in [&p.f_b, &p.f_c, &p.f_d] {
                put_u32(&mut b, w.len() as u32);
                b.extend_from_slice(w.symbols());
            }
        }
        put_u64(&mut b, self.budget.total);
        put_u64(&mut b, self.budget.spent);
        put_u64(&mut b, self.clamped);
        put_u64(&mut b, self.prg_seeds.master);
        put_u64(&mut b, self.prg_seeds.trial);
        for s in [&self.prg_seeds.prg, &self.adversary_name] {
            put_u32(&mut b, s.len() as u32);
            b.extend_from_slice(s.as_bytes());
        }
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ChannelError> {
        let mut r = Reader { b: bytes, pos: 0 };
        if r.take(4)? != MAGIC || r.take(1)?[0] != VERSION {
            return Err(ChannelError::Format("bad magic or version".into()));
        }
        let q = r.u32()?;
        let n = r.u64()? as usize;
        let word = |r: &mut Reader<'_>, len: usize| -> Result<QaryWord, ChannelError> {
            QaryWord::new(q, r.take(len)?.to_vec()).map_err(|e| ChannelError::Format(e.to_string()))
        };
        let x = word(&mut r, n)?;
        let s = word(&mut r, n)?;
        let y = word(&mut r, n)?;
        let mut stage_boundaries = Vec::new();
        for _ in 0..r.u32()? {
            let index = r.u32()?;
            let start = r.u64()? as usize;
            let end = r.u64()? as usize;
            let (j, g) = (r.u64()?, r.u64()?);
            let flags = r.take(1)?[0];
            stage_boundaries.push(StageBoundary {
                index,
                start,
                end,
                p_hat: (flags & 1 == 1).then_some((j, g)),
                terminal: flags & 2 == 2,
            });
        }
        let mut feedback = Vec::new();
        for _ in 0..r.u32()? {
            let block_index = r.u32()?;
            let position = r.u64()? as usize;
            let f_a = (0..r.u32()?).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
            let mut ws = Vec::new();
            for _ in 0..3 {
                let len = r.u32()? as usize;
                ws.push(word(&mut r, len)?);
            }
            let f_d = ws.pop().unwrap();
            let f_c = ws.pop().unwrap();
            let f_b = ws.pop().unwrap();
            feedback.push(FeedbackPacket { block_index, position, f_a, f_b, f_c, f_d });
        }
        let budget = AdversaryBudget { total: r.u64()?, spent: r.u64()? };
        let clamped = r.u64()?;
        let master = r.u64()?;
        let trial = r.u64()?;
        let prg = r.string()?;
        let adversary_name = r.string()?;
        if r.pos != bytes.len() {
            return Err(ChannelError::Format("trailing bytes".into()));
        }
        Ok(Transcript {
            q,
            n,
            x,
            s,
            y,
            feedback,
            stage_boundaries,
            adversary_name,
            prg_seeds: SeedRecord { prg, master, trial },
            budget,
            clamped,
        })
    }
}

fn put_u32(b: &mut Vec<u8>, v: u32) {
    b.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(b: &mut Vec<u8>, v: u64) {
    b.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ChannelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.b.len());
        let end = end.ok_or_else(|| ChannelError::Format("truncated".into()))?;
        let out = &self.b[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u32(&mut self) -> Result<u32, ChannelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, ChannelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn string(&mut self) -> Result<String, ChannelError> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|e| ChannelError::Format(e.to_string()))
    }
}
