use anyhow::Result;
use listfb_core::planner::{self, DeltaChoice, KappaConstants, KappaPlanRecord, StepMode, TrajectoryParams, TrajectoryReport};
use listfb_core::weldon::SchemeParams;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

/// Enumerations with more leaves than this are skipped.
pub const ENUMERATION_LIMIT: u64 = 250_000;

/// Per-stage κ tables are only written for `λ̃` up to this.
pub const KAPPA_TABLE_LIMIT: u32 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanTables {
    pub q: u32,
    pub n: usize,
    pub rho: f64,
    pub eps: f64,
    pub gamma: f64,
    pub rate: f64,
    pub r_gamma: f64,
    pub lambda_tilde: u32,
    /// Smallest `γ` the Pinsker bound certifies for this `ε`.
    pub gamma_floor: Option<f64>,
    /// Grid spacing the rounding penalty would call for.
    pub delta_bound: Option<DeltaChoice>,
    /// Spacing actually configured.
    pub delta: f64,
    pub grid_den: u64,
    pub kappa: f64,
    pub block_len: usize,
    pub kappa_constants: Option<KappaConstants>,
    pub kappa_plan: Option<KappaPlanRecord>,
    /// Why an optional table is missing.
    pub notes: Vec<String>,
    pub worst_case: Option<WorstCase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    /// Per-stage corruption fractions, exact.
    pub p: Vec<String>,
    pub p_f64: Vec<f64>,
    pub trajectories: usize,
    pub trajectory: TrajectoryReport,
}

pub fn trajectory_params(p: &SchemeParams) -> TrajectoryParams {
    TrajectoryParams {
        q: p.q,
        n: p.n as u64,
        rho: planner::rat(p.rho),
        eps: p.eps,
        gamma: p.gamma,
        stage_cap: p.stage_cap,
        delta: planner::ratio(1, p.grid_den as i64),
        kappa: planner::rat(p.kappa),
        eps_t: p.eps_t,
    }
}

/// Grid allocation that keeps the scheme running longest: most stages, then the longest
/// pre-termination span. Ties go to the lexicographically largest allocation.
pub fn worst_case(p: &SchemeParams) -> Result<Option<WorstCase>> {
    let leaves = (p.grid_den + 1).checked_pow(p.stage_cap.saturating_sub(1));
    if leaves.is_none_or(|l| l > ENUMERATION_LIMIT) {
        return Ok(None);
    }
    let all = planner::enumerate_grid_trajectories(&trajectory_params(p), p.grid_den, StepMode::Delta)?;
    let trajectories = all.len();
    let best = all.into_iter().max_by(|(pa, a), (pb, b)| {
        a.stages
            .len()
            .cmp(&b.stages.len())
            .then_with(|| a.pre_termination_length().cmp(&b.pre_termination_length()))
            .then_with(|| pa.cmp(pb))
    });
    Ok(best.map(|(seq, t)| WorstCase {
        p: seq.iter().map(BigRational::to_string).collect(),
        p_f64: seq.iter().map(planner::to_f64).collect(),
        trajectories,
        trajectory: (&t).into(),
    }))
}

pub fn cli_plan(p: &SchemeParams) -> Result<PlanTables> {
    let lambda_tilde = p.lambda_tilde()?;
    let mut notes = Vec::new();
    let gamma_floor = planner::gamma_floor(p.eps, p.q).map_err(|e| notes.push(format!("gamma_floor: {e}"))).ok();
    let delta_bound = if lambda_tilde >= 2 {
        planner::delta_choice(p.eps, lambda_tilde, p.q).map_err(|e| notes.push(format!("delta: {e}"))).ok()
    } else {
        notes.push("delta: a single stage needs no grid".into());
        None
    };
    let kappa_constants =
        planner::kappa_constants_with(p.eps, p.gamma, p.q, p.rate_floor).map_err(|e| notes.push(format!("kappa: {e}"))).ok();
    let kappa_plan = if lambda_tilde <= KAPPA_TABLE_LIMIT {
        planner::kappa_plan_with(p.eps, p.gamma, p.q, p.rate_floor).map_err(|e| notes.push(format!("kappa table: {e}"))).ok()
    } else {
        notes.push(format!("kappa table: lambda_tilde {lambda_tilde} exceeds {KAPPA_TABLE_LIMIT}, constants only"));
        None
    };
    let worst_case = match worst_case(p) {
        Ok(Some(w)) => Some(w),
        Ok(None) => {
            notes.push(format!("worst case: more than {ENUMERATION_LIMIT} grid allocations, not enumerated"));
            None
        }
        Err(e) => {
            notes.push(format!("worst case: {e}"));
            None
        }
    };
    Ok(PlanTables {
        q: p.q,
        n: p.n,
        rho: p.rho,
        eps: p.eps,
        gamma: p.gamma,
        rate: p.rate(),
        r_gamma: p.rate_floor.r_gamma(p.gamma, p.q),
        lambda_tilde,
        gamma_floor,
        delta_bound,
        delta: p.delta(),
        grid_den: p.grid_den,
        kappa: p.kappa,
        block_len: p.block_len(),
        kappa_constants,
        kappa_plan,
        notes,
        worst_case,
    })
}

/// Flat CSV rows of the worst-case trajectory.
pub fn trajectory_csv(t: &PlanTables) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["stage", "p", "p_hat", "n", "ell", "rate", "rho", "eps", "rate_exact", "rho_exact"])?;
    if let Some(wc) = &t.worst_case {
        for r in &wc.trajectory.stages {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            w.write_record([
                r.stage.to_string(),
                opt(r.p),
                opt(r.p_hat),
                r.state.n.to_string(),
                r.state.ell.to_string(),
                r.state.rate.to_string(),
                r.state.rho.to_string(),
                r.state.eps.to_string(),
                r.state.rate_exact.clone(),
                r.state.rho_exact.clone(),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use listfb_core::planner::RateFloor;

    #[test]
    fn eps_one_needs_one_stage() {
        let p = SchemeParams { eps: 1.0, rho: 0.0, ..presets::full_params() };
        assert_eq!(p.lambda_tilde().unwrap(), 1);
    }

    #[test]
    fn toy_worst_case_matches_simulation() {
        let p = SchemeParams { stage_cap: 3, ..presets::full_params() };
        let t = cli_plan(&p).unwrap();
        let wc = t.worst_case.clone().unwrap();
        // oracle: every grid pair through the simulator, budget violations dropped
        let tp = trajectory_params(&p);
        let g = p.grid_den as i64;
        let mut best = None;
        for a in 0..=g {
            for b in 0..=g {
                let seq = vec![planner::ratio(a, g), planner::ratio(b, g)];
                if let Ok(sim) = planner::simulate_trajectory(&tp, &seq, StepMode::Delta) {
                    let key = (sim.stages.len(), sim.pre_termination_length());
                    if best.as_ref().is_none_or(|k| &key > k) {
                        best = Some(key);
                    }
                }
            }
        }
        let seq: Vec<BigRational> = wc.p.iter().map(|s| s.parse().unwrap()).collect();
        let sim = planner::simulate_trajectory(&tp, &seq, StepMode::Delta).unwrap();
        assert_eq!(Some((sim.stages.len(), sim.pre_termination_length())), best);
        assert_eq!(TrajectoryReport::from(&sim), wc.trajectory);
        assert_eq!(trajectory_csv(&t).unwrap().lines().count(), 1 + wc.trajectory.stages.len());
    }

    #[test]
    fn nominal_floor_skips_enumeration() {
        let p = SchemeParams { rate_floor: RateFloor::Nominal, toy: false, grid_den: 4096, ..presets::full_params() };
        let t = cli_plan(&p).unwrap();
        assert!(t.worst_case.is_none());
        assert!(t.notes.iter().any(|n| n.contains("worst case")));
    }
}
