use crate::config::{Mode, RunConfig};
use crate::plan;
use crate::report::{Aggregates, ReportHeader, RunReport, TrialRow};
use anyhow::{bail, Result};
use listfb_core::channel::{AdversarySpec, SeedRecord};
use listfb_core::hashperm::PermBank;
use listfb_core::rng;
use listfb_core::weldon::{self, RunOutcome, Scheme, SchemeContext, SchemeParams, WeldonError};
use listfb_core::QaryWord;
use rand::Rng;
use rayon::prelude::*;
use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

/// An empty `grid_extremal` allocation stands for the planner's worst case.
pub fn resolve_adversary(spec: &AdversarySpec, params: &SchemeParams) -> Result<AdversarySpec> {
    match spec {
        AdversarySpec::GridExtremal { p } if p.is_empty() => {
            let Some(wc) = plan::worst_case(params)? else {
                bail!("grid_extremal needs an explicit allocation: the grid is too large to enumerate")
            };
            Ok(AdversarySpec::GridExtremal { p: wc.p_f64 })
        }
        other => Ok(other.clone()),
    }
}

/// Uniform message of trial `trial`.
pub fn trial_message(params: &SchemeParams, master: u64, trial: u64) -> QaryWord {
    let mut r = rng::stream(master, trial, "message");
    let symbols = (0..params.message_len()).map(|_| r.gen_range(0..params.q) as u8).collect();
    QaryWord::new(params.q, symbols).expect("symbols drawn below q")
}

pub fn run_trial(ctx: &SchemeContext, adversary: &AdversarySpec, trial: u64) -> Result<RunOutcome, WeldonError> {
    let m = trial_message(&ctx.params, ctx.master_seed, trial);
    let mut adv = adversary.build(rng::stream(ctx.master_seed, trial, "adversary"));
    let seeds = SeedRecord { prg: rng::PRG_DESCRIPTION.into(), master: ctx.master_seed, trial };
    match ctx.scheme {
        Scheme::Full => weldon::run_full_feedback(ctx, &m, adv.as_mut(), seeds),
        Scheme::Partial => weldon::run_partial_feedback(ctx, &m, adv.as_mut(), seeds),
    }
}

fn row(trial: u64, r: std::thread::Result<Result<RunOutcome, WeldonError>>) -> TrialRow {
    let failed = |error: String| TrialRow {
        trial,
        success: false,
        list_size: 0,
        distinct_messages: 0,
        guesses: 0,
        stages: 0,
        termination: String::new(),
        budget_spent: 0,
        feedback_symbols: 0,
        error,
    };
    match r {
        Ok(Ok(o)) => TrialRow {
            trial,
            success: o.success,
            list_size: o.list.size(),
            distinct_messages: o.list.distinct_messages(),
            guesses: o.list.guesses,
            stages: o.stages.len(),
            termination: serde_json::to_value(o.reason).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
            budget_spent: o.budget_spent(),
            feedback_symbols: o.feedback_symbols,
            error: String::new(),
        },
        Ok(Err(e)) => failed(e.to_string()),
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            failed(format!("panic: {msg}"))
        }
    }
}

/// Trials `0..trials`, spread over the rayon pool and returned in trial order.
pub fn run_trials(ctx: &SchemeContext, adversary: &AdversarySpec, trials: u64) -> Vec<TrialRow> {
    (0..trials)
        .into_par_iter()
        .map(|t| row(t, panic::catch_unwind(AssertUnwindSafe(|| run_trial(ctx, adversary, t)))))
        .collect()
}

pub fn header(ctx: &SchemeContext, mode: Mode, adversary: &AdversarySpec) -> Result<ReportHeader> {
    let p = &ctx.params;
    let partial = ctx.scheme == Scheme::Partial;
    Ok(ReportHeader {
        mode: serde_json::to_value(mode)?.as_str().unwrap_or_default().to_string(),
        scheme: serde_json::to_value(ctx.scheme)?.as_str().unwrap_or_default().to_string(),
        adversary: adversary.label(),
        master_seed: ctx.master_seed,
        prg: rng::PRG_DESCRIPTION.into(),
        params: serde_json::to_value(p)?,
        message_len: p.message_len(),
        budget: p.budget(),
        lambda_tilde: p.lambda_tilde()?,
        list_bound: p.list_bound()?,
        feedback_formula: partial.then(|| weldon::feedback_formula(p)),
        perm_storage_symbols: ctx.bank.as_deref().filter(|_| partial).map(PermBank::storage_symbols),
        perm_bank_size: ctx.bank.as_deref().map(|b| b.size),
    })
}

/// Runs one configuration of a run mode.
pub fn run_cell(params: SchemeParams, scheme: Scheme, mode: Mode, adversary: &AdversarySpec, trials: u64, seed: u64) -> Result<RunReport> {
    let start = Instant::now();
    let ctx = SchemeContext::new(params, scheme, seed)?;
    let adversary = resolve_adversary(adversary, &ctx.params)?;
    let rows = run_trials(&ctx, &adversary, trials);
    Ok(RunReport {
        header: header(&ctx, mode, &adversary)?,
        aggregates: Aggregates::fold(&rows),
        rows,
        runtime_ms: start.elapsed().as_millis(),
    })
}

pub fn cli_run(config: &RunConfig) -> Result<RunReport> {
    let Some(scheme) = config.mode.scheme() else { bail!("mode {:?} is not a run mode", config.mode) };
    config.validate()?;
    run_cell(config.params.clone(), scheme, config.mode, &config.adversary, config.trials, config.seed)
}
