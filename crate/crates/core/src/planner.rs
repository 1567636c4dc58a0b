//! Residual-rate recursions of the multi-stage scheme.
//!
//! Lengths, rates and budgets are exact rationals. Entropy values are computed in
//! `f64` and converted exactly with [`BigRational::from_float`], so the conservation
//! law `(1−R)ϱ' + R·p = ϱ` holds exactly while the gap laws carry a `1e−12` slop.

use crate::qary::{self, MathError};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Float slop allowed in gap-law comparisons.
pub const GAP_SLOP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error(transparent)]
    Math(#[from] MathError),
    #[error("budget violation: spend {spend} exceeds residual budget {budget}")]
    Budget { spend: f64, budget: f64 },
    #[error("stage of padded length {ell_hat} does not fit in residual block {n}")]
    Overflow { ell_hat: f64, n: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Lower bound `R_γ` on every pre-termination residual rate.
///
/// `Nominal` is `γ³/(64 ln q)`. `Toy` replaces the denominator `64 ln q` by a configured
/// constant so that desk-scale runs finish in a handful of stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateFloor {
    Nominal,
    Toy { denominator: f64 },
}

impl RateFloor {
    pub fn r_gamma(&self, gamma: f64, q: u32) -> f64 {
        match *self {
            RateFloor::Nominal => qary::zyablov_floor(gamma, q),
            RateFloor::Toy { denominator } => gamma.powi(3) / denominator,
        }
    }
}

/// Residual tuple of one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerState {
    pub n: BigRational,
    pub ell: BigRational,
    pub rate: BigRational,
    pub rho: BigRational,
    pub eps: f64,
    pub q: u32,
}

/// Gap to capacity `1 − H_q(ϱ) − R`, using the entropy on its increasing branch.
pub fn gap(rho: &BigRational, rate: &BigRational, q: u32) -> f64 {
    1.0 - qary::entropy_q_capped(to_f64(rho), q) - to_f64(rate)
}

impl PlannerState {
    pub fn new(n: BigRational, rate: BigRational, rho: BigRational, q: u32) -> Result<Self, PlannerError> {
        if !n.is_positive() {
            return Err(PlannerError::Invalid("n must be positive".into()));
        }
        if rate.is_negative() || rate > BigRational::one() {
            return Err(PlannerError::Invalid(format!("rate {} outside [0,1]", to_f64(&rate))));
        }
        if rho.is_negative() || to_f64(&rho) > qary::peak(q) {
            return Err(PlannerError::Invalid(format!("rho {} outside [0,1-1/q]", to_f64(&rho))));
        }
        let ell = &rate * &n;
        let eps = gap(&rho, &rate, q);
        Ok(Self { n, ell, rate, rho, eps, q })
    }

    /// Starting state for block length `n`, budget fraction `rho` and gap `eps`,
    /// with `R = 1 − H_q(ϱ) − ε` converted exactly from its float value.
    pub fn initial(n: u64, rho: BigRational, eps: f64, q: u32) -> Result<Self, PlannerError> {
        let r = 1.0 - qary::entropy_q(to_f64(&rho), q)? - eps;
        if r <= 0.0 {
            return Err(PlannerError::Infeasible(format!("rate 1-H(rho)-eps = {r} is not positive")));
        }
        Self::new(BigRational::from_integer(n.into()), rat(r), rho, q)
    }
}

fn check_step(state: &PlannerState, rate: &BigRational, p: &BigRational) -> Result<(), PlannerError> {
    if p.is_negative() || p > &BigRational::one() {
        return Err(PlannerError::Invalid(format!("p = {} outside [0,1]", to_f64(p))));
    }
    if rate >= &BigRational::one() {
        return Err(PlannerError::Invalid("residual rate must be below 1".into()));
    }
    let spend = rate * p;
    if spend > state.rho {
        return Err(PlannerError::Budget {
            spend: to_f64(&spend),
            budget: to_f64(&state.rho),
        });
    }
    Ok(())
}

/// Common successor: stage of (padded) rate `r_hat` spends `p`, next stage carries `h` per symbol.
fn successor(state: &PlannerState, r_hat: &BigRational, p: &BigRational, h: BigRational) -> PlannerState {
    let one = BigRational::one();
    let denom = &one - r_hat;
    let rate = r_hat * h / &denom;
    let rho = (&state.rho - r_hat * p) / &denom;
    let n = &state.n * &denom;
    let ell = &rate * &n;
    let eps = gap(&rho, &rate, state.q);
    PlannerState { n, ell, rate, rho, eps, q: state.q }
}

/// One clean step: `R' = R·H_q(p)/(1−R)`, `ϱ' = (ϱ − R·p)/(1−R)`, `n' = n − ℓ`.
pub fn step_clean(state: &PlannerState, p: &BigRational) -> Result<PlannerState, PlannerError> {
    check_step(state, &state.rate, p)?;
    let h = rat(qary::entropy_q(to_f64(p), state.q)?);
    Ok(successor(state, &state.rate, p, h))
}

/// Exact grid value `j/g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPoint {
    pub j: u64,
    pub g: u64,
}

impl GridPoint {
    pub fn new(j: u64, g: u64) -> Self {
        assert!(g > 0 && j <= g, "grid point {j}/{g} outside [0,1]");
        Self { j, g }
    }

    pub fn zero(g: u64) -> Self {
        Self { j: 0, g }
    }

    /// Smallest grid point not below `p`.
    pub fn ceil_of(p: f64, g: u64) -> Self {
        let j = ((p * g as f64) - 1e-9).ceil().clamp(0.0, g as f64) as u64;
        Self { j, g }
    }

    /// Smallest grid point `≥ w/len`, in exact integer arithmetic.
    pub fn ceil_ratio(w: u64, len: u64, g: u64) -> Self {
        if len == 0 {
            return Self::zero(g);
        }
        let j = ((w as u128 * g as u128).div_ceil(len as u128) as u64).min(g);
        Self { j, g }
    }

    pub fn value(&self) -> f64 {
        self.j as f64 / self.g as f64
    }

    pub fn rational(&self) -> BigRational {
        ratio(self.j as i64, self.g as i64)
    }

    /// All points `0/g, …, g/g`.
    pub fn all(g: u64) -> impl Iterator<Item = GridPoint> {
        (0..=g).map(move |j| GridPoint { j, g })
    }
}

/// `⌈p/δ⌉·δ`, capped at 1.
pub fn round_up_to_grid(p: &BigRational, delta: &BigRational) -> BigRational {
    let k = (p / delta).ceil();
    let v = k * delta;
    if v > BigRational::one() {
        BigRational::one()
    } else {
        v
    }
}

/// Step with the next length driven by the rounded fraction `p̂ = ⌈p/δ⌉·δ`; the budget
/// update keeps the true `p`.
pub fn step_delta(state: &PlannerState, p: &BigRational, delta: &BigRational) -> Result<PlannerState, PlannerError> {
    if !delta.is_positive() {
        return Err(PlannerError::Invalid("delta must be positive".into()));
    }
    check_step(state, &state.rate, p)?;
    let p_hat = round_up_to_grid(p, delta);
    let h = rat(qary::entropy_q(to_f64(&p_hat), state.q)?);
    Ok(successor(state, &state.rate, p, h))
}

/// Result of a κ-padded step: the padded stage length and the successor.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaStep {
    pub ell_hat: BigRational,
    pub rate_hat: BigRational,
    pub next: PlannerState,
}

/// Step with the current stage padded to a multiple of `n·κ` before it is sent:
/// `ℓ̂ = ⌈ℓ/nκ⌉·nκ`, `R' = R̂(H_q(p)+ε_t)/(1−R̂)`, `ϱ' = (ϱ − R̂p)/(1−R̂)`.
pub fn step_kappa(
    state: &PlannerState,
    p: &BigRational,
    kappa: &BigRational,
    n_total: &BigRational,
    eps_t: f64,
) -> Result<KappaStep, PlannerError> {
    if !kappa.is_positive() || kappa > &BigRational::one() {
        return Err(PlannerError::Invalid("kappa must lie in (0,1]".into()));
    }
    let unit = n_total * kappa;
    let ell_hat = (&state.ell / &unit).ceil() * &unit;
    if ell_hat >= state.n {
        return Err(PlannerError::Overflow {
            ell_hat: to_f64(&ell_hat),
            n: to_f64(&state.n),
        });
    }
    let rate_hat = &ell_hat / &state.n;
    check_step(state, &rate_hat, p)?;
    let h = rat(qary::entropy_q(to_f64(p), state.q)? + eps_t);
    let next = successor(state, &rate_hat, p, h);
    Ok(KappaStep { ell_hat, rate_hat, next })
}

fn check_eps_gamma(eps: f64, gamma: f64) -> Result<(), PlannerError> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(MathError::Domain { name: "eps", value: eps, lo: 0.0, hi: 1.0 }.into());
    }
    if !(gamma > 0.0) {
        return Err(MathError::Domain { name: "gamma", value: gamma, lo: 0.0, hi: 1.0 }.into());
    }
    Ok(())
}

/// `⌈ln ε / ln(1 − R_γ) + 1⌉` for a given floor `R_γ ∈ (0,1)`.
pub fn lambda_tilde_for_floor(eps: f64, r_gamma: f64) -> Result<u32, PlannerError> {
    if !(r_gamma > 0.0 && r_gamma < 1.0) {
        return Err(PlannerError::Invalid(format!("rate floor {r_gamma} outside (0,1)")));
    }
    let v = eps.ln() / (-r_gamma).ln_1p() + 1.0;
    Ok(v.ceil().max(1.0) as u32)
}

/// Number of stages after which the gap must have reached 1 (nominal constants).
pub fn lambda_tilde(eps: f64, gamma: f64, q: u32) -> Result<u32, PlannerError> {
    lambda_tilde_with(eps, gamma, q, RateFloor::Nominal)
}

pub fn lambda_tilde_with(eps: f64, gamma: f64, q: u32, floor: RateFloor) -> Result<u32, PlannerError> {
    check_eps_gamma(eps, gamma)?;
    if q < 2 {
        return Err(MathError::Alphabet(q).into());
    }
    if gamma > qary::peak(q) {
        return Err(MathError::Domain { name: "gamma", value: gamma, lo: 0.0, hi: qary::peak(q) }.into());
    }
    lambda_tilde_for_floor(eps, floor.r_gamma(gamma, q))
}

/// `√(2 ln q · ε)`: the smallest `γ` the Pinsker bound certifies, i.e. any budget
/// `ϱ ≤ 1 − 1/q − γ` with this `γ` leaves `1 − H_q(ϱ) ≥ ε`.
pub fn gamma_floor(eps: f64, q: u32) -> Result<f64, PlannerError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(MathError::Domain { name: "eps", value: eps, lo: 0.0, hi: 1.0 }.into());
    }
    if q < 2 {
        return Err(MathError::Alphabet(q).into());
    }
    Ok((2.0 * (q as f64).ln() * eps).sqrt())
}

/// Grid spacing for the rounding penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaChoice {
    /// `H_q⁻¹(ε / (2(λ̃−1)))`, the largest real spacing allowed.
    pub bound: f64,
    /// Largest `1/g` (integer `g`) not exceeding `bound`, so the grid covers `[0,1]`.
    pub delta: f64,
    pub grid_den: u64,
}

pub fn delta_choice(eps: f64, lambda_tilde: u32, q: u32) -> Result<DeltaChoice, PlannerError> {
    if lambda_tilde < 2 {
        return Err(PlannerError::Invalid("delta_choice needs lambda_tilde >= 2".into()));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(MathError::Domain { name: "eps", value: eps, lo: 0.0, hi: 1.0 }.into());
    }
    let target = eps / (2.0 * (lambda_tilde - 1) as f64);
    let bound = qary::inv_entropy_q(target.min(1.0), q)?;
    if bound <= 0.0 {
        return Err(PlannerError::Infeasible("inverse entropy underflowed to 0".into()));
    }
    let mut g = (1.0 / bound).ceil() as u64;
    // guard against the float ceiling landing one short
    while (lambda_tilde - 1) as f64 * qary::entropy_unchecked(1.0 / g as f64, q) > eps / 2.0 {
        g += 1;
    }
    Ok(DeltaChoice { bound, delta: 1.0 / g as f64, grid_den: g })
}

/// Parameters of the padded recursion and the checks they pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaPlanRecord {
    pub eps: f64,
    pub gamma: f64,
    pub q: u32,
    pub lambda_tilde: u32,
    pub u_min: f64,
    pub eps_t: f64,
    pub b: f64,
    pub m: f64,
    /// May underflow to 0 for large λ̃; `ln_kappa` is authoritative.
    pub kappa: f64,
    pub ln_kappa: f64,
    pub c_min: f64,
    pub ln_c_min: f64,
    pub a: f64,
    pub r_gamma: f64,
    pub s_lambda: f64,
    /// Recursion `u_{i+1} = A(u_i − κ/c_i)`, `c_{i+1} = c_i(u_i + ε_t) − κ` from `u_1 = ε − ε_t`, `c_1 = 1`.
    pub u: Vec<f64>,
    pub ln_c: Vec<f64>,
    pub beta: Vec<f64>,
    /// `κ/(c_min·u_min)`.
    pub beta_pessimistic: f64,
    pub kappa_over_c_min: f64,
    pub k_from_u_ok: bool,
    pub k_from_c_ok: bool,
    pub beta_ok: bool,
}

pub fn kappa_plan(eps: f64, gamma: f64, q: u32) -> Result<KappaPlanRecord, PlannerError> {
    kappa_plan_with(eps, gamma, q, RateFloor::Nominal)
}

/// Closed-form part of the κ plan, without the per-stage recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaConstants {
    pub lambda_tilde: u32,
    pub u_min: f64,
    pub eps_t: f64,
    pub b: f64,
    pub m: f64,
    pub kappa: f64,
    pub ln_kappa: f64,
    pub c_min: f64,
    pub ln_c_min: f64,
    pub a: f64,
    pub r_gamma: f64,
    pub s_lambda: f64,
}

/// `u_min = ε/16`, `ε_t = ε/32`, `b = u_min + ε_t`, `M = min(1/16, (A^{λ̃−1}u_1 − u_min)/(2bS))`,
/// `κ = M·b^{λ̃}`, `c_min = ½b^{λ̃−1}`, with `S = Σ_{1≤j<λ̃} A^{λ̃−1−j}` summed in closed form.
pub fn kappa_constants_with(eps: f64, gamma: f64, q: u32, floor: RateFloor) -> Result<KappaConstants, PlannerError> {
    check_eps_gamma(eps, gamma)?;
    let r_gamma = floor.r_gamma(gamma, q);
    let lt = lambda_tilde_for_floor(eps, r_gamma)?;
    let u_min = eps / 16.0;
    let eps_t = eps / 32.0;
    let b = u_min + eps_t;
    let a = 1.0 / (1.0 - r_gamma);
    let u1 = eps - eps_t;
    // A − 1 = R/(1−R), ln A = −ln(1−R)
    let ln_a = -(-r_gamma).ln_1p();
    let s_lambda = ((lt as f64 - 1.0) * ln_a).exp_m1() / (r_gamma / (1.0 - r_gamma));
    let head = ((lt as f64 - 1.0) * ln_a).exp() * u1 - u_min;
    if head <= 0.0 {
        return Err(PlannerError::Infeasible(format!(
            "A^(λ-1)·u_1 - u_min = {head} is not positive"
        )));
    }
    let m = if s_lambda > 0.0 {
        (1.0 / 16.0f64).min(head_over_s(head, s_lambda, u1, r_gamma) / (2.0 * b))
    } else {
        1.0 / 16.0
    };
    let ln_b = b.ln();
    let ln_kappa = m.ln() + lt as f64 * ln_b;
    let ln_c_min = (0.5f64).ln() + (lt as f64 - 1.0) * ln_b;
    Ok(KappaConstants {
        lambda_tilde: lt,
        u_min,
        eps_t,
        b,
        m,
        kappa: ln_kappa.exp(),
        ln_kappa,
        c_min: ln_c_min.exp(),
        ln_c_min,
        a,
        r_gamma,
        s_lambda,
    })
}

/// `head/S`, falling back to its limit `u_1(A−1)` once `A^{λ̃−1}` overflows.
fn head_over_s(head: f64, s: f64, u1: f64, r_gamma: f64) -> f64 {
    if head.is_finite() && s.is_finite() {
        head / s
    } else {
        u1 * r_gamma / (1.0 - r_gamma)
    }
}

/// The constants plus the per-stage recursion and the checks it must pass. Only `R_γ < 1`
/// is required of `γ`.
pub fn kappa_plan_with(eps: f64, gamma: f64, q: u32, floor: RateFloor) -> Result<KappaPlanRecord, PlannerError> {
    let KappaConstants { lambda_tilde: lt, u_min, eps_t, b, m, ln_kappa, ln_c_min, a, r_gamma, s_lambda, .. } =
        kappa_constants_with(eps, gamma, q, floor)?;
    let u1 = eps - eps_t;
    let head = ((lt as f64 - 1.0) * -(-r_gamma).ln_1p()).exp() * u1 - u_min;
    let kappa_over_c_min = (ln_kappa - ln_c_min).exp();
    let k_from_u_ok = s_lambda == 0.0 || kappa_over_c_min <= head_over_s(head, s_lambda, u1, r_gamma) * (1.0 + 1e-9);
    let k_from_c_ok = ln_kappa <= ln_c_min + 1e-12;
    let beta_pessimistic = kappa_over_c_min / u_min;

    let mut u = vec![u1];
    let mut ln_c = vec![0.0f64];
    let mut beta = Vec::new();
    for i in 0..lt as usize {
        let k_over_c = (ln_kappa - ln_c[i]).exp();
        beta.push(k_over_c / u[i]);
        if i + 1 < lt as usize {
            u.push(a * (u[i] - k_over_c));
            let grow = u[i] + eps_t;
            let next = ln_c[i] + grow.ln() + (1.0 - k_over_c / grow).max(f64::MIN_POSITIVE).ln();
            ln_c.push(next);
        }
    }
    let beta_ok = beta_pessimistic <= 0.5 && beta.iter().all(|&x| x <= 0.5);
    if !(k_from_u_ok && k_from_c_ok && beta_ok && m <= 1.0 / 16.0) {
        return Err(PlannerError::Infeasible(format!(
            "kappa constraints violated: k_from_u={k_from_u_ok} k_from_c={k_from_c_ok} beta={beta_ok}"
        )));
    }
    Ok(KappaPlanRecord {
        eps,
        gamma,
        q,
        lambda_tilde: lt,
        u_min,
        eps_t,
        b,
        m,
        kappa: ln_kappa.exp(),
        ln_kappa,
        c_min: ln_c_min.exp(),
        ln_c_min,
        a,
        r_gamma,
        s_lambda,
        u,
        ln_c,
        beta,
        beta_pessimistic,
        kappa_over_c_min,
        k_from_u_ok,
        k_from_c_ok,
        beta_ok,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepMode {
    Clean,
    Delta,
    Kappa,
}

/// Everything a trajectory simulation needs.
#[derive(Debug, Clone)]
pub struct TrajectoryParams {
    pub q: u32,
    pub n: u64,
    pub rho: BigRational,
    pub eps: f64,
    pub gamma: f64,
    pub stage_cap: u32,
    pub delta: BigRational,
    pub kappa: BigRational,
    pub eps_t: f64,
}

impl TrajectoryParams {
    pub fn eps_z(&self) -> f64 {
        self.gamma / 4.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationReason {
    Zyablov,
    StageCap,
    BudgetExhausted,
    /// The next stage would not fit in the remaining blocklength.
    LengthLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStage {
    pub state: PlannerState,
    /// Fraction spent in this stage (absent on the final stage).
    pub p: Option<BigRational>,
    pub p_hat: Option<BigRational>,
    /// Padded length (κ mode) of this stage.
    pub ell_hat: Option<BigRational>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapTrajectory {
    pub stages: Vec<TrajectoryStage>,
    pub terminated_at: Option<u32>,
    pub termination_reason: Option<TerminationReason>,
}

/// Zyablov rate at the residual budget, 0 where no inner rate is feasible.
pub fn zyablov_at(rho: f64, eps_z: f64, q: u32) -> f64 {
    qary::zyablov_rate(rho, eps_z, q).unwrap_or(0.0)
}

/// Termination test `R ≤ R_Z(ϱ)`; a zero rate always terminates.
pub fn meets_termination(state: &PlannerState, eps_z: f64) -> bool {
    if state.rate.is_zero() {
        return true;
    }
    to_f64(&state.rate) <= zyablov_at(to_f64(&state.rho), eps_z, state.q)
}

impl GapTrajectory {
    pub fn last(&self) -> &PlannerState {
        &self.stages.last().expect("non-empty trajectory").state
    }

    /// Sum of transmitted (padded, where applicable) lengths of the non-terminal stages.
    pub fn pre_termination_length(&self) -> BigRational {
        self.stages
            .iter()
            .filter(|s| s.p.is_some())
            .map(|s| s.ell_hat.clone().unwrap_or_else(|| s.state.ell.clone()))
            .fold(BigRational::zero(), |a, b| a + b)
    }
}

fn advance(
    params: &TrajectoryParams,
    state: &PlannerState,
    p: &BigRational,
    mode: &StepMode,
) -> Result<(PlannerState, Option<BigRational>, Option<BigRational>), PlannerError> {
    let n_total = BigRational::from_integer(params.n.into());
    match mode {
        StepMode::Clean => Ok((step_clean(state, p)?, None, None)),
        StepMode::Delta => {
            let p_hat = round_up_to_grid(p, &params.delta);
            Ok((step_delta(state, p, &params.delta)?, Some(p_hat), None))
        }
        StepMode::Kappa => {
            let k = step_kappa(state, p, &params.kappa, &n_total, params.eps_t)?;
            Ok((k.next, None, Some(k.ell_hat)))
        }
    }
}

/// Runs the stage loop against a fixed allocation; stages past the end of `p_sequence`
/// are played with `p = 0`.
pub fn simulate_trajectory(
    params: &TrajectoryParams,
    p_sequence: &[BigRational],
    mode: StepMode,
) -> Result<GapTrajectory, PlannerError> {
    let mut state = PlannerState::initial(params.n, params.rho.clone(), params.eps, params.q)?;
    let mut stages = Vec::new();
    let zero = BigRational::zero();
    for i in 1..=params.stage_cap {
        if meets_termination(&state, params.eps_z()) {
            let reason = if state.rho.is_zero() {
                TerminationReason::BudgetExhausted
            } else {
                TerminationReason::Zyablov
            };
            stages.push(TrajectoryStage { state, p: None, p_hat: None, ell_hat: None });
            return Ok(GapTrajectory { stages, terminated_at: Some(i), termination_reason: Some(reason) });
        }
        if i == params.stage_cap {
            break;
        }
        let p = p_sequence.get(i as usize - 1).unwrap_or(&zero).clone();
        let (next, p_hat, ell_hat) = advance(params, &state, &p, &mode)?;
        stages.push(TrajectoryStage { state, p: Some(p), p_hat, ell_hat });
        state = next;
    }
    stages.push(TrajectoryStage { state, p: None, p_hat: None, ell_hat: None });
    Ok(GapTrajectory {
        stages,
        terminated_at: None,
        termination_reason: Some(TerminationReason::StageCap),
    })
}

/// All trajectories whose per-stage fractions lie on `{0, 1/g, …, 1}` and respect the
/// residual budget, up to `params.stage_cap` stages.
pub fn enumerate_grid_trajectories(
    params: &TrajectoryParams,
    grid_den: u64,
    mode: StepMode,
) -> Result<Vec<(Vec<BigRational>, GapTrajectory)>, PlannerError> {
    let grid: Vec<BigRational> = (0..=grid_den).map(|j| ratio(j as i64, grid_den as i64)).collect();
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    let start = PlannerState::initial(params.n, params.rho.clone(), params.eps, params.q)?;
    walk(params, &grid, &mode, start, &mut prefix, &mut out)?;
    Ok(out)
}

fn walk(
    params: &TrajectoryParams,
    grid: &[BigRational],
    mode: &StepMode,
    state: PlannerState,
    prefix: &mut Vec<BigRational>,
    out: &mut Vec<(Vec<BigRational>, GapTrajectory)>,
) -> Result<(), PlannerError> {
    let stage = prefix.len() as u32 + 1;
    if meets_termination(&state, params.eps_z()) || stage == params.stage_cap {
        out.push((prefix.clone(), simulate_trajectory(params, prefix, mode.clone())?));
        return Ok(());
    }
    for p in grid {
        match advance(params, &state, p, mode) {
            Ok((next, _, _)) => {
                prefix.push(p.clone());
                walk(params, grid, mode, next, prefix, out)?;
                prefix.pop();
            }
            Err(PlannerError::Budget { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

/// Serializable view of a planner state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRow {
    pub n: f64,
    pub ell: f64,
    pub rate: f64,
    pub rho: f64,
    pub eps: f64,
    pub rate_exact: String,
    pub rho_exact: String,
}

impl From<&PlannerState> for StateRow {
    fn from(s: &PlannerState) -> Self {
        Self {
            n: to_f64(&s.n),
            ell: to_f64(&s.ell),
            rate: to_f64(&s.rate),
            rho: to_f64(&s.rho),
            eps: s.eps,
            rate_exact: s.rate.to_string(),
            rho_exact: s.rho.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub stage: u32,
    pub p: Option<f64>,
    pub p_hat: Option<f64>,
    pub ell_hat: Option<f64>,
    pub state: StateRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub stages: Vec<TrajectoryRow>,
    pub terminated_at: Option<u32>,
    pub termination_reason: Option<TerminationReason>,
}

impl From<&GapTrajectory> for TrajectoryReport {
    fn from(t: &GapTrajectory) -> Self {
        Self {
            stages: t
                .stages
                .iter()
                .enumerate()
                .map(|(i, s)| TrajectoryRow {
                    stage: i as u32 + 1,
                    p: s.p.as_ref().map(to_f64),
                    p_hat: s.p_hat.as_ref().map(to_f64),
                    ell_hat: s.ell_hat.as_ref().map(to_f64),
                    state: (&s.state).into(),
                })
                .collect(),
            terminated_at: t.terminated_at,
            termination_reason: t.termination_reason,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(n: i64, r: (i64, i64), rho: (i64, i64), q: u32) -> PlannerState {
        PlannerState::new(ratio(n, 1), ratio(r.0, r.1), ratio(rho.0, rho.1), q).unwrap()
    }

    #[test]
    fn clean_zero_spend() {
        let s = state(1000, (1, 2), (3, 10), 2);
        let t = step_clean(&s, &BigRational::zero()).unwrap();
        assert!(t.rate.is_zero());
        assert_eq!(t.rho, ratio(3, 5));
        assert_eq!(t.n, ratio(500, 1));
    }

    #[test]
    fn clean_reference_step() {
        let s = state(1000, (1, 2), (3, 10), 2);
        let t = step_clean(&s, &ratio(1, 10)).unwrap();
        assert_eq!(t.rho, ratio(1, 2));
        assert!((to_f64(&t.rate) - 0.468_995_593_589_281_2).abs() < 1e-12);
        let back = (BigRational::one() - &s.rate) * &t.rho + &s.rate * ratio(1, 10);
        assert_eq!(back, s.rho);
    }

    #[test]
    fn budget_violation_is_reported() {
        let s = state(1000, (1, 2), (1, 10), 2);
        assert!(matches!(step_clean(&s, &ratio(3, 10)), Err(PlannerError::Budget { .. })));
    }

    #[test]
    fn delta_rounds_up() {
        assert_eq!(round_up_to_grid(&ratio(7, 100), &ratio(1, 20)), ratio(1, 10));
        assert_eq!(round_up_to_grid(&ratio(1, 10), &ratio(1, 20)), ratio(1, 10));
        let s = state(1000, (1, 3), (1, 10), 2);
        let on_grid = ratio(1, 4);
        let a = step_clean(&s, &on_grid).unwrap();
        let b = step_delta(&s, &on_grid, &ratio(1, 4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kappa_matches_clean_when_aligned() {
        // ℓ = 250 is a multiple of nκ = 50
        let s = state(1000, (1, 4), (1, 10), 2);
        let k = step_kappa(&s, &ratio(1, 5), &ratio(1, 20), &ratio(1000, 1), 0.0).unwrap();
        assert_eq!(k.ell_hat, ratio(250, 1));
        assert_eq!(k.next, step_clean(&s, &ratio(1, 5)).unwrap());
    }

    #[test]
    fn kappa_padding_bounded_and_overflow_detected() {
        let s = state(1000, (13, 50), (1, 10), 2);
        let k = step_kappa(&s, &ratio(1, 10), &ratio(1, 16), &ratio(1000, 1), 0.01).unwrap();
        assert!(&k.ell_hat - &s.ell <= ratio(1000, 16));
        assert!(k.ell_hat >= s.ell);
        let big = state(100, (99, 100), (0, 1), 2);
        assert!(matches!(
            step_kappa(&big, &BigRational::zero(), &ratio(1, 2), &ratio(100, 1), 0.0),
            Err(PlannerError::Overflow { .. })
        ));
    }

    #[test]
    fn lambda_tilde_values() {
        assert_eq!(lambda_tilde(1.0, 0.3, 2).unwrap(), 1);
        // oracle: least L with (1 − γ³/(64 ln 2))^{L−1} ≤ ε
        let x = 0.125 / (64.0 * 2f64.ln());
        let mut l = 1u32;
        let mut pw = 1.0f64;
        while pw > 0.5 {
            pw *= 1.0 - x;
            l += 1;
        }
        assert_eq!(l, 247);
        assert_eq!(lambda_tilde(0.5, 0.5, 2).unwrap(), l);
        assert!(lambda_tilde(0.5, 0.6, 2).is_err());
        for &(e, g, q) in &[(0.1, 0.2, 2u32), (0.01, 0.4, 3), (0.5, 0.05, 5)] {
            let lt = lambda_tilde(e, g, q).unwrap() as f64;
            let ub = 64.0 * (q as f64).ln() * (1.0 / e).ln() / g.powi(3) + 2.0;
            assert!(lt <= ub);
        }
    }

    #[test]
    fn lambda_tilde_monotone() {
        let mut prev = u32::MAX;
        for i in 1..40 {
            let g = 0.01 * i as f64;
            let lt = lambda_tilde(0.2, g, 2).unwrap();
            assert!(lt <= prev);
            prev = lt;
        }
        let mut prev = 0;
        for i in (1..=50).rev() {
            let lt = lambda_tilde(i as f64 / 50.0, 0.3, 3).unwrap();
            assert!(lt >= prev);
            prev = lt;
        }
    }

    #[test]
    fn gamma_floor_certifies_gap() {
        let g = gamma_floor(0.1, 2).unwrap();
        assert!(1.0 - qary::entropy_q(0.5 - g, 2).unwrap() >= 0.1);
        for q in [2u32, 3, 4, 5] {
            for i in 1..100 {
                let e = i as f64 / 1000.0;
                let g = gamma_floor(e, q).unwrap();
                if g < qary::peak(q) {
                    assert!(1.0 - qary::entropy_q(qary::peak(q) - g, q).unwrap() >= e);
                }
            }
        }
        assert!(gamma_floor(1e-12, 2).unwrap() < 1e-5);
        assert!(gamma_floor(0.2, 2).unwrap() < gamma_floor(0.3, 2).unwrap());
    }

    #[test]
    fn delta_choice_contract() {
        let d = delta_choice(0.3, 2, 2).unwrap();
        assert!((d.bound - qary::inv_entropy_q(0.15, 2).unwrap()).abs() < 1e-15);
        assert!(d.delta <= d.bound);
        let d = delta_choice(0.2, 5, 2).unwrap();
        // oracle: H_2^{-1}(0.025) by bisection on the definition
        let (mut lo, mut hi) = (0.0f64, 0.5f64);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            let h = -(m * m.log2()) - (1.0 - m) * (1.0 - m).log2();
            if h < 0.025 {
                lo = m
            } else {
                hi = m
            }
        }
        assert!((d.bound - lo).abs() < 1e-11);
        assert_eq!(d.grid_den, (1.0 / lo).ceil() as u64);
        for lt in 2..20 {
            for e in [0.05, 0.2, 0.6, 1.0] {
                let d = delta_choice(e, lt, 3).unwrap();
                assert!((lt - 1) as f64 * qary::entropy_q(d.delta, 3).unwrap() <= e / 2.0);
            }
        }
    }

    #[test]
    fn kappa_plan_record() {
        let g = gamma_floor(0.25, 2).unwrap();
        let r = kappa_plan(0.25, g, 2).unwrap();
        assert_eq!(r.u_min, 0.25 / 16.0);
        assert_eq!(r.eps_t, 0.25 / 32.0);
        assert!((r.b - 3.0 * 0.25 / 32.0).abs() < 1e-15);
        assert!(r.m <= 1.0 / 16.0);
        assert!(r.ln_kappa <= (0.5f64).ln() + (r.lambda_tilde as f64 - 1.0) * r.b.ln());
        assert!((r.kappa_over_c_min - 2.0 * r.m * r.b).abs() <= 1e-12 * r.kappa_over_c_min.max(1e-300));
        assert!(r.beta_pessimistic <= 0.5 && r.beta.iter().all(|&b| b <= 0.5));
        assert!(r.kappa_over_c_min <= r.u_min / 2.0);
        let x = g.powi(3) / (64.0 * 2f64.ln());
        let lt = ((0.25f64).ln() / (1.0 - x).ln() + 1.0).ceil() as u32;
        assert_eq!(r.lambda_tilde, lt);
        assert_eq!(r.u.len(), lt as usize);
    }

    #[test]
    fn closed_form_s_matches_the_sum() {
        for (eps, gamma, q) in [(0.3, 0.3, 2), (0.1, 0.45, 3), (0.5, 0.2, 5)] {
            let c = kappa_constants_with(eps, gamma, q, RateFloor::Toy { denominator: 1.0 }).unwrap();
            let lt = c.lambda_tilde as i32;
            let sum: f64 = (1..lt).map(|j| c.a.powi(lt - 1 - j)).sum();
            assert!((c.s_lambda - sum).abs() <= 1e-9 * sum.max(1.0), "{} vs {sum}", c.s_lambda);
            let r = kappa_plan_with(eps, gamma, q, RateFloor::Toy { denominator: 1.0 }).unwrap();
            assert_eq!((r.ln_kappa, r.m), (c.ln_kappa, c.m));
        }
    }

    fn toy_params(rho: (i64, i64), eps: f64, gamma: f64) -> TrajectoryParams {
        TrajectoryParams {
            q: 2,
            n: 4096,
            rho: ratio(rho.0, rho.1),
            eps,
            gamma,
            stage_cap: 6,
            delta: ratio(1, 4),
            kappa: ratio(1, 64),
            eps_t: 0.0,
        }
    }

    #[test]
    fn all_zero_allocation_terminates_at_stage_two() {
        let p = toy_params((1, 10), 0.3, 0.3);
        let t = simulate_trajectory(&p, &[], StepMode::Clean).unwrap();
        assert_eq!(t.terminated_at, Some(2));
        assert!(t.last().rate.is_zero());
    }

    #[test]
    fn enumerated_trajectories_terminate() {
        let p = toy_params((1, 10), 0.3, 0.3);
        for mode in [StepMode::Clean, StepMode::Delta, StepMode::Kappa] {
            let all = enumerate_grid_trajectories(&p, 4, mode).unwrap();
            assert!(!all.is_empty());
            for (_, t) in &all {
                assert!(t.terminated_at.is_some());
                assert!(t.pre_termination_length() < ratio(4096, 1));
                assert!(t.stages.iter().all(|s| s.state.n.is_positive()));
            }
        }
    }

    fn arb_state() -> impl Strategy<Value = (PlannerState, BigRational)> {
        (1i64..=999, 0i64..=400, 0i64..=1000, prop::sample::select(vec![2u32, 3, 4, 5])).prop_filter_map(
            "budget",
            |(r, rho, pf, q)| {
                let rate = ratio(r, 1000);
                let rho = ratio(rho, 1000);
                if to_f64(&rho) > qary::peak(q) {
                    return None;
                }
                let max_p = if rate.is_zero() { BigRational::one() } else { (&rho / &rate).min(BigRational::one()) };
                let p = max_p * ratio(pf, 1000);
                let s = PlannerState::new(ratio(1 << 20, 1), rate, rho, q).ok()?;
                if s.eps <= 0.0 {
                    return None;
                }
                Some((s, p))
            },
        )
    }

    proptest! {
        #[test]
        fn conservation_is_exact((s, p) in arb_state()) {
            let t = step_clean(&s, &p).unwrap();
            let one = BigRational::one();
            prop_assert_eq!((&one - &s.rate) * &t.rho + &s.rate * &p, s.rho.clone());
            prop_assert!(t.eps >= s.eps / (1.0 - to_f64(&s.rate)) - GAP_SLOP);
            prop_assert!(t.n < s.n && t.n.is_positive());
        }

        #[test]
        fn delta_gap_law((s, p) in arb_state(), g in 1i64..=20) {
            let delta = ratio(1, g);
            let t = step_delta(&s, &p, &delta).unwrap();
            let hd = qary::entropy_q(1.0 / g as f64, s.q).unwrap();
            prop_assert!(t.eps >= (s.eps - hd) / (1.0 - to_f64(&s.rate)) - GAP_SLOP);
        }

        #[test]
        fn kappa_coupled_recursion((s, p) in arb_state(), eps_t in 0.0f64..0.05) {
            let n = s.n.clone();
            let kappa = ratio(1, 64);
            if let Ok(k) = step_kappa(&s, &p, &kappa, &n, eps_t) {
                let one = BigRational::one();
                prop_assert_eq!((&one - &k.rate_hat) * &k.next.rho + &k.rate_hat * &p, s.rho.clone());
                // c_i = 1 on the first stage, so κ/c_i = κ
                let u = s.eps - eps_t;
                let u_next = k.next.eps - eps_t;
                let a_i = 1.0 / (1.0 - to_f64(&k.rate_hat));
                prop_assert!(u_next >= a_i * (u - 1.0 / 64.0) - GAP_SLOP);
            }
        }
    }
}
