use super::*;
use crate::channel::{Adversary, AdversaryBudget, Channel, FeedbackPacket, SeedRecord, StageBoundary, StageInfo};
use crate::hashperm::Perm;
use crate::sw::{Route, StagePayload};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use std::collections::HashMap;

/// Per-packet sizes of the periodic feedback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackSizes {
    pub block_len: usize,
    pub blocks: usize,
    /// `|T| = ⌈C_e·log_q b⌉` sampled positions per block.
    pub samples: usize,
    /// `⌈log_q b⌉` symbols to name one position.
    pub index_digits: usize,
    /// `⌈C_p·log_q n⌉`.
    pub perm_symbols: usize,
    /// `⌈n/√ℓc⌉`.
    pub seed_symbols: usize,
}

impl FeedbackSizes {
    pub fn new(p: &SchemeParams) -> Self {
        let b = p.block_len();
        let lq = |x: f64| qary::log_q(x, p.q);
        let up = |x: f64| (x - 1e-9).ceil().max(1.0) as usize;
        Self {
            block_len: b,
            blocks: p.n.div_ceil(b),
            samples: up(p.c_e * lq(b as f64)),
            index_digits: up(lq(b as f64)),
            perm_symbols: up(p.c_p * lq(p.n as f64)),
            seed_symbols: up(p.n as f64 / (p.chunk.chunk_len as f64).sqrt()),
        }
    }

    pub fn per_packet(&self) -> u64 {
        (self.samples * self.index_digits + self.samples + self.perm_symbols + self.seed_symbols) as u64
    }
}

/// Feedback symbols over the whole run: `(n/b)·(C_e log b · log b + C_e log b + C_p log n + n/√ℓc)`
/// with every term rounded up.
pub fn feedback_formula(p: &SchemeParams) -> u64 {
    let s = FeedbackSizes::new(p);
    s.blocks as u64 * s.per_packet()
}

/// Bob's packet for the block `[start, end)`.
fn make_packet(index: usize, start: usize, end: usize, y: &[u8], sizes: &FeedbackSizes, q: u32, rng: &mut ChaCha20Rng) -> FeedbackPacket {
    let f_a: Vec<u32> = (0..sizes.samples).map(|_| rng.gen_range(0..(end - start) as u32)).collect();
    let f_b = f_a.iter().map(|&i| y[start + i as usize]).collect();
    let mut word = |len: usize| QaryWord::from_raw(q, (0..len).map(|_| rng.gen_range(0..q) as u8).collect());
    let f_c = word(sizes.perm_symbols);
    let f_d = word(sizes.seed_symbols);
    FeedbackPacket { block_index: index as u32, position: end, f_a, f_b: QaryWord::from_raw(q, f_b), f_c, f_d }
}

/// Permutation and seeds a stage uses, read off the packet of its final block.
fn stage_route(ctx: &SchemeContext, packet: &FeedbackPacket, padded: usize) -> Result<Arc<Perm>, WeldonError> {
    let bank = ctx.bank.as_ref().expect("partial context");
    let size = bank.size as u128;
    let j = packet.f_c.symbols().iter().fold(0u128, |acc, &d| (acc * ctx.params.q as u128 + d as u128) % size);
    bank.get(padded, j as u64).map_err(|e| WeldonError::Config(e.to_string()))
}

/// Streams `w` through the channel, emitting a packet at every block boundary.
fn send_blocks(ch: &mut Channel<'_>, w: &[u8], sizes: &FeedbackSizes, q: u32, rng: &mut ChaCha20Rng) -> Result<(), WeldonError> {
    for &c in w {
        ch.send(c)?;
        let pos = ch.position();
        if pos.is_multiple_of(sizes.block_len) || pos == ch.n() {
            let start = (pos - 1) / sizes.block_len * sizes.block_len;
            let pk = make_packet(start / sizes.block_len, start, pos, ch.received(), sizes, q, rng);
            ch.deliver_feedback(pk);
        }
    }
    Ok(())
}

/// Partial feedback: Bob only returns one packet per block of `⌈nκ⌉` symbols.
pub fn run_partial_feedback(
    ctx: &SchemeContext,
    m: &QaryWord,
    adversary: &mut dyn Adversary,
    seeds: SeedRecord,
) -> Result<RunOutcome, WeldonError> {
    check_message(ctx, m)?;
    let p = &ctx.params;
    let codec = ctx.codec.as_ref().expect("partial context");
    let sizes = FeedbackSizes::new(p);
    let mut bob = rng::stream(seeds.master, seeds.trial, "bob");
    let mut ch = Channel::new(p.q, p.n, AdversaryBudget::new(p.budget()), adversary);
    ch.reveal_message(m.clone());
    let mut content = m.symbols().to_vec();
    let mut pos = 0;
    let mut spent = 0u64;
    let mut stages = Vec::new();
    let mut index = 1u32;
    let (reason, design) = loop {
        if let Some(reason) = ctx.decide(index, content.len(), pos, p.budget() - spent) {
            let n_avail = p.n - pos;
            let design = ctx
                .family
                .design(content.len(), n_avail)
                .ok_or(WeldonError::NoDesign { res_len: content.len(), n_avail })?;
            let cw = ctx.family.encode(&design, &content);
            ch.set_stage(StageInfo { index, start: pos, len: cw.len(), terminal: true });
            send_blocks(&mut ch, &cw, &sizes, p.q, &mut bob)?;
            ch.record_boundary(StageBoundary { index, start: pos, end: pos + cw.len(), p_hat: None, terminal: true });
            stages.push(StageLog {
                index,
                start: pos,
                len: content.len(),
                padded: cw.len(),
                errors: stage_errors(ch.errors(), pos, pos + cw.len()),
                p_hat: None,
                p_est: None,
                terminal: true,
            });
            break (reason, design);
        }
        let len = content.len();
        let padded = ctx.padded(len);
        let mut w = content.clone();
        w.resize(padded, 0);
        ch.set_stage(StageInfo { index, start: pos, len: padded, terminal: false });
        send_blocks(&mut ch, &w, &sizes, p.q, &mut bob)?;
        let packets = ch.feedback();
        // pooled estimate over the content positions sampled in this stage's blocks
        let (mut hits, mut total) = (0usize, 0usize);
        for pk in packets.iter().filter(|pk| (pk.block_index as usize) * sizes.block_len >= pos) {
            let base = pk.block_index as usize * sizes.block_len;
            for (&i, &yb) in pk.f_a.iter().zip(pk.f_b.symbols()) {
                let at = base + i as usize;
                if at < pos + len {
                    total += 1;
                    hits += (yb != content[at - pos]) as usize;
                }
            }
        }
        let p_est = if total == 0 { 0.0 } else { hits as f64 / total as f64 };
        let p_hat = GridPoint::ceil_of(p_est, p.grid_den);
        let last = packets.last().expect("a stage spans at least one block").clone();
        let layout = p.chunk.layout(len, p_hat.value());
        let perm = stage_route(ctx, &last, layout.padded)?;
        let route = Route { perm: Some(&perm), seeds: last.f_d.symbols(), salt: index as u64 };
        let payload = codec.encode(&content, p_hat, &route)?;
        ch.record_boundary(StageBoundary { index, start: pos, end: pos + padded, p_hat: Some((p_hat.j, p_hat.g)), terminal: false });
        stages.push(StageLog {
            index,
            start: pos,
            len,
            padded,
            errors: stage_errors(ch.errors(), pos, pos + padded),
            p_hat: Some(p_hat),
            p_est: Some(p_est),
            terminal: false,
        });
        spent += ctx.spent_lower(len, p_hat);
        content = payload.body;
        pos += padded;
        index += 1;
    };
    // Bob keeps talking through the unused tail
    let tail = p.n - ch.position();
    ch.set_stage(StageInfo { index: 0, start: ch.position(), len: tail, terminal: false });
    send_blocks(&mut ch, &vec![0u8; tail], &sizes, p.q, &mut bob)?;
    let transcript = ch.finish(seeds)?;
    let truth: Vec<GridPoint> = stages.iter().filter_map(|s| s.p_hat).collect();
    let list = decode_partial(ctx, &transcript, p.oracle_sync.then_some(&truth[..]))?;
    let success = list.contains(m);
    let feedback_symbols = transcript.feedback.iter().map(|pk| pk.symbol_count(sizes.index_digits) as u64).sum();
    Ok(RunOutcome { list, transcript, stages, reason, design, feedback_symbols, success })
}

/// Bob's side: terminal decoding for every guess, then SW decoding stage by stage backward.
pub fn decode_partial(ctx: &SchemeContext, t: &Transcript, oracle: Option<&[GridPoint]>) -> Result<DecodeList, WeldonError> {
    let p = &ctx.params;
    let codec = ctx.codec.as_ref().expect("partial context");
    let b = p.block_len();
    let y = t.y.symbols();
    let mut list = DecodeList::default();
    let mut terminal_cache: HashMap<(usize, usize, usize), Vec<Vec<u8>>> = HashMap::new();
    for leaf in guess_stage_boundaries(ctx) {
        if oracle.is_some_and(|o| o != leaf.p_hat.as_slice()) {
            continue;
        }
        list.guesses += 1;
        let tm = leaf.terminal;
        let residuals = terminal_cache
            .entry((tm.start, tm.len, leaf.design.len()))
            .or_insert_with(|| ctx.family.decode(&leaf.design, &y[tm.start..tm.start + leaf.design.len()]))
            .clone();
        'res: for mut residual in residuals {
            for (span, &p_hat) in leaf.stages.iter().zip(&leaf.p_hat).rev() {
                let layout = p.chunk.layout(span.len, p_hat.value());
                let packet = &t.feedback[(span.start + span.padded) / b - 1];
                let perm = stage_route(ctx, packet, layout.padded)?;
                let route = Route { perm: Some(&perm), seeds: packet.f_d.symbols(), salt: span.index as u64 };
                let payload = StagePayload::with_layout(&layout, p_hat, p.q, p.chunk.chunk_len, residual);
                match codec.decode(&y[span.start..span.start + span.len], &payload, &route)? {
                    Some(x) => residual = x,
                    None => continue 'res,
                }
            }
            list.entries.push(DecodeEntry { message: QaryWord::from_raw(p.q, residual), p_hat: leaf.p_hat.clone() });
        }
    }
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::super::tests::partial_toy_params;
    use super::*;
    use crate::channel::AdversarySpec;

    fn run(spec: AdversarySpec, trial: u64) -> (SchemeContext, RunOutcome) {
        let ctx = SchemeContext::new(partial_toy_params(), Scheme::Partial, 4).unwrap();
        let mut r = rng::stream(4, trial, "message");
        let m = QaryWord::from_raw(2, (0..ctx.params.message_len()).map(|_| r.gen_range(0..2u8)).collect());
        let mut adv = spec.build(rng::stream(4, trial, "adversary"));
        let out = run_partial_feedback(&ctx, &m, adv.as_mut(), SeedRecord { prg: rng::PRG_DESCRIPTION.into(), master: 4, trial }).unwrap();
        (ctx, out)
    }

    #[test]
    fn null_adversary_listed_and_feedback_counted() {
        let (ctx, out) = run(AdversarySpec::Null, 0);
        assert!(out.success, "{:?}", out.stages);
        assert_eq!(out.feedback_symbols, feedback_formula(&ctx.params));
        // oracle: one packet per block of ⌈nκ⌉ symbols
        let b = (ctx.params.n as f64 * ctx.params.kappa).ceil() as usize;
        assert_eq!(out.transcript.feedback.len(), ctx.params.n.div_ceil(b));
    }

    #[test]
    fn light_noise_listed() {
        for trial in 0..4 {
            let (_, out) = run(AdversarySpec::UniformIid { p: 0.02 }, 100 + trial);
            assert!(out.success, "trial {trial}: {:?}", out.stages);
        }
    }
}
