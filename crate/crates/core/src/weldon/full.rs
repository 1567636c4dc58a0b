use super::*;
use crate::channel::{Adversary, AdversaryBudget, Channel, SeedRecord, StageBoundary, StageInfo};
use std::collections::HashMap;

/// Full feedback: Bob echoes every symbol, so Alice knows each stage's error pattern and
/// sends its rank next.
pub fn run_full_feedback(
    ctx: &SchemeContext,
    m: &QaryWord,
    adversary: &mut dyn Adversary,
    seeds: SeedRecord,
) -> Result<RunOutcome, WeldonError> {
    check_message(ctx, m)?;
    let p = &ctx.params;
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
            ch.send_word(&cw)?;
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
        ch.set_stage(StageInfo { index, start: pos, len, terminal: false });
        let y = ch.send_word(&content)?;
        let s: Vec<u8> = y.iter().zip(&content).map(|(&a, &b)| ((a as u32 + p.q - b as u32) % p.q) as u8).collect();
        let w = s.iter().filter(|&&e| e != 0).count() as u64;
        let p_hat = GridPoint::ceil_ratio(w, len as u64, p.grid_den);
        ch.record_boundary(StageBoundary { index, start: pos, end: pos + len, p_hat: Some((p_hat.j, p_hat.g)), terminal: false });
        stages.push(StageLog { index, start: pos, len, padded: len, errors: w, p_hat: Some(p_hat), p_est: None, terminal: false });
        spent += ctx.spent_lower(len, p_hat);
        content = error_index_encode(&s, p_hat, p.q)?;
        pos += len;
        index += 1;
    };
    let transcript = ch.finish(seeds)?;
    let truth: Vec<GridPoint> = stages.iter().filter_map(|s| s.p_hat).collect();
    let list = decode_full(ctx, transcript.y.symbols(), p.oracle_sync.then_some(&truth[..]));
    let success = list.contains(m);
    Ok(RunOutcome { list, transcript, stages, reason, design, feedback_symbols: p.n as u64, success })
}

/// Bob's side: every guess leaf, terminal list decoding, then backward unranking.
pub fn decode_full(ctx: &SchemeContext, y: &[u8], oracle: Option<&[GridPoint]>) -> DecodeList {
    let q = ctx.params.q;
    let mut list = DecodeList::default();
    let mut terminal_cache: HashMap<(usize, usize, usize), Vec<Vec<u8>>> = HashMap::new();
    for leaf in guess_stage_boundaries(ctx) {
        if oracle.is_some_and(|o| o != leaf.p_hat.as_slice()) {
            continue;
        }
        list.guesses += 1;
        let t = leaf.terminal;
        let residuals = terminal_cache
            .entry((t.start, t.len, leaf.design.len()))
            .or_insert_with(|| ctx.family.decode(&leaf.design, &y[t.start..t.start + leaf.design.len()]))
            .clone();
        'res: for mut residual in residuals {
            for (span, &p_hat) in leaf.stages.iter().zip(&leaf.p_hat).rev() {
                let Ok(s) = error_index_decode(&residual, span.len, p_hat, q) else { continue 'res };
                residual = y[span.start..span.start + span.len]
                    .iter()
                    .zip(&s)
                    .map(|(&a, &e)| ((a as u32 + q - e as u32) % q) as u8)
                    .collect();
            }
            list.entries.push(DecodeEntry { message: QaryWord::from_raw(q, residual), p_hat: leaf.p_hat.clone() });
        }
    }
    list
}
