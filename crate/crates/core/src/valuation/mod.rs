//! Continuous-time valuation of risk-free, whole-life and annuity contracts.
//!
//! Every contract is valued two ways on the same time grid:
//!
//! * by quadrature of the discounted, survival-weighted cash-flow integral,
//!   cell by cell from the horizon back to zero, and
//! * by classical RK4 integration of the pricing ODE backward from the
//!   boundary value at the horizon.
//!
//! The ODE valuers re-run the quadrature and fail with
//! [`PricingError::StepTooLarge`] when the two disagree.

mod curves;
mod engine;
mod epv;
mod lattice;
mod recursion;

pub use curves::{ForceOfInterest, Schedule, StepFunction};
pub use engine::{solve_backward_ode, value_quadrature};
pub use epv::{a_bar, present_value, solve_net_premium_rate, whole_life_epv, A_bar};
pub use lattice::die_survive_tree;
pub use recursion::{check_recursion, RecursionResidual};

use serde::Serialize;

use crate::error::{ensure_finite, PricingError, Result};
use crate::mortality::SurvivalModel;

/// Grid spacing used when a request does not specify one.
pub const DEFAULT_GRID_STEP: f64 = 1.0 / 64.0;
/// Infinite-ω models are cut off once `ₜp_x · e^{−∫δ}` drops below this.
pub const TRUNCATION_THRESHOLD: f64 = 1e-12;
/// ODE and quadrature paths must agree to `AGREEMENT_TOLERANCE · max(1, max|p|)`.
pub const AGREEMENT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Contract {
    /// Pays `b_t` at the moment of death.
    WholeLife { benefit: Schedule },
    /// Pays at rate `δ_{p,t}` while alive.
    ContinuousAnnuity { rate: Schedule },
    /// Pays at rate `δ_{p,t}` until `n`, then `terminal_value`.
    RiskFree { rate: Schedule, terminal_value: f64 },
}

impl Contract {
    pub fn kind(&self) -> &'static str {
        match self {
            Contract::WholeLife { .. } => "whole_life",
            Contract::ContinuousAnnuity { .. } => "continuous_annuity",
            Contract::RiskFree { .. } => "risk_free",
        }
    }

    /// `b_t` or `δ_{p,t}`.
    pub fn schedule(&self) -> &Schedule {
        match self {
            Contract::WholeLife { benefit } => benefit,
            Contract::ContinuousAnnuity { rate } | Contract::RiskFree { rate, .. } => rate,
        }
    }
}

/// The insured life: survival model and age at policy time zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Life {
    pub model: SurvivalModel,
    pub issue_age: f64,
}

#[derive(Debug, Clone)]
pub struct ValuationRequest {
    pub contract: Contract,
    pub foi: ForceOfInterest,
    pub life: Option<Life>,
    /// Explicit horizon. Required for risk-free contracts; for life
    /// contracts it caps `ω − x₀` (or the truncation point).
    pub term: Option<f64>,
    pub grid_step: f64,
}

impl ValuationRequest {
    pub fn risk_free(rate: Schedule, terminal_value: f64, foi: ForceOfInterest, n: f64) -> Self {
        ValuationRequest {
            contract: Contract::RiskFree { rate, terminal_value },
            foi,
            life: None,
            term: Some(n),
            grid_step: DEFAULT_GRID_STEP,
        }
    }

    pub fn whole_life(model: SurvivalModel, issue_age: f64, foi: ForceOfInterest, benefit: Schedule) -> Self {
        Self::life(Contract::WholeLife { benefit }, model, issue_age, foi)
    }

    pub fn annuity(model: SurvivalModel, issue_age: f64, foi: ForceOfInterest, rate: Schedule) -> Self {
        Self::life(Contract::ContinuousAnnuity { rate }, model, issue_age, foi)
    }

    fn life(contract: Contract, model: SurvivalModel, issue_age: f64, foi: ForceOfInterest) -> Self {
        ValuationRequest {
            contract,
            foi,
            life: Some(Life { model, issue_age }),
            term: None,
            grid_step: DEFAULT_GRID_STEP,
        }
    }

    pub fn with_term(mut self, term: f64) -> Self {
        self.term = Some(term);
        self
    }

    pub fn with_grid_step(mut self, grid_step: f64) -> Self {
        self.grid_step = grid_step;
        self
    }

    pub fn is_life_contingent(&self) -> bool {
        self.life.is_some()
    }

    fn validate(&self) -> Result<()> {
        if let Contract::RiskFree { terminal_value, .. } = self.contract {
            ensure_finite(&[terminal_value], "terminal value")?;
            if self.life.is_some() {
                return Err(PricingError::InvalidRequest("risk-free contracts carry no survival model".into()));
            }
            if self.term.is_none() {
                return Err(PricingError::InvalidRequest("risk-free contracts need a horizon n".into()));
            }
        } else if self.life.is_none() {
            return Err(PricingError::InvalidRequest(format!(
                "{} contracts need a survival model",
                self.contract.kind()
            )));
        }
        if let Some(life) = &self.life {
            life.model.survival_probability(life.issue_age, 0.0)?;
        }
        if let Some(term) = self.term {
            if !term.is_finite() {
                return Err(PricingError::NonFiniteInput(format!("horizon {term}")));
            }
            if term <= 0.0 {
                return Err(PricingError::InvalidRequest(format!("horizon {term} must be > 0")));
            }
        }
        Ok(())
    }

    /// Resolved horizon in policy years.
    pub fn horizon(&self) -> Result<f64> {
        self.validate()?;
        let natural = match &self.life {
            None => f64::INFINITY,
            Some(life) => life.model.limiting_age() - life.issue_age,
        };
        match self.term {
            Some(term) => Ok(term.min(natural)),
            None if natural.is_finite() => Ok(natural),
            None => self.truncation_point(),
        }
    }

    /// True when the horizon is the limiting age, where the hazard blows up.
    fn reaches_limiting_age(&self, horizon: f64) -> bool {
        self.life.as_ref().is_some_and(|life| {
            let omega = life.model.limiting_age();
            omega.is_finite() && life.issue_age + horizon >= omega - 1e-12 * omega.max(1.0)
        })
    }

    fn relative_kernel(&self, anchor: f64, u: f64) -> f64 {
        let survival = match &self.life {
            None => 1.0,
            Some(life) => life.model.survival_unchecked(life.issue_age + anchor, u - anchor),
        };
        self.foi.discount(anchor, u) * survival
    }

    /// First `t` at which `ₜp_x · e^{−∫_0^t δ}` falls below the threshold.
    fn truncation_point(&self) -> Result<f64> {
        const LIMIT: f64 = 1e5;
        let below = |t: f64| self.relative_kernel(0.0, t) < TRUNCATION_THRESHOLD;
        let mut lo = 0.0;
        let mut hi = 1.0;
        while !below(hi) {
            lo = hi;
            hi *= 2.0;
            if hi > LIMIT {
                return Err(PricingError::InvalidRequest(format!(
                    "discounted survival stays above {TRUNCATION_THRESHOLD} for {LIMIT} years; supply a horizon"
                )));
            }
        }
        while hi - lo > 1e-9 * hi {
            let mid = 0.5 * (lo + hi);
            if below(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Policy times in `(0, horizon)` where an input jumps.
    fn breakpoints(&self, horizon: f64) -> Vec<f64> {
        let mut cuts: Vec<f64> = self
            .foi
            .breakpoints()
            .iter()
            .chain(self.contract.schedule().breakpoints())
            .copied()
            .collect();
        if let Some(life) = &self.life {
            cuts.extend(life.model.breakpoints(life.issue_age, horizon));
        }
        cuts.retain(|&t| t > 0.0 && t < horizon);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Quadrature,
    Ode,
}

/// Price path `p_t` sampled on a grid, plus metadata.
#[derive(Debug, Clone)]
pub struct ValuationResult {
    times: Vec<f64>,
    prices: Vec<f64>,
    /// Grid indices where some input jumps; interpolation never crosses them.
    kinks: Vec<usize>,
    horizon_left_limit: f64,
    method: Method,
    grid_step: f64,
    evaluations: usize,
    method_deviation: Option<f64>,
    request: ValuationRequest,
}

impl ValuationResult {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn path(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.prices.iter().copied())
    }

    pub fn p0(&self) -> f64 {
        self.prices[0]
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("grid is never empty")
    }

    /// `lim_{t↑H} p_t`. Differs from the boundary value when the horizon is
    /// the limiting age of a whole-life contract: death is then certain and
    /// imminent, so the price tends to the benefit.
    pub fn horizon_left_limit(&self) -> f64 {
        self.horizon_left_limit
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }

    /// Simpson panels (quadrature) or RK4 steps (ODE).
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Max deviation from the quadrature path, for verified ODE results.
    pub fn method_deviation(&self) -> Option<f64> {
        self.method_deviation
    }

    pub fn request(&self) -> &ValuationRequest {
        &self.request
    }

    /// `p_t` by cubic Lagrange interpolation within the segment holding `t`.
    pub fn price_at(&self, t: f64) -> Result<f64> {
        let horizon = self.horizon();
        if !t.is_finite() {
            return Err(PricingError::NonFiniteInput(format!("time {t}")));
        }
        if t < 0.0 || t > horizon {
            return Err(PricingError::InvalidRequest(format!("time {t} outside [0, {horizon}]")));
        }
        let n = self.times.len() - 1;
        if t == horizon {
            return Ok(self.prices[n]);
        }
        let cell = self.times.partition_point(|&s| s <= t).saturating_sub(1).min(n - 1);
        if self.times[cell] == t {
            return Ok(self.prices[cell]);
        }
        let seg = self.kinks.partition_point(|&k| k <= cell);
        let (lo, hi) = (self.kinks[seg - 1], self.kinks[seg]);
        let width = (hi - lo + 1).min(4);
        let start = cell.saturating_sub(1).max(lo).min(hi + 1 - width);
        let value = |i: usize| if i == n { self.horizon_left_limit } else { self.prices[i] };
        let mut total = 0.0;
        for i in start..start + width {
            let mut weight = 1.0;
            for j in start..start + width {
                if j != i {
                    weight *= (t - self.times[j]) / (self.times[i] - self.times[j]);
                }
            }
            total += weight * value(i);
        }
        Ok(total)
    }
}

fn require_contract(request: &ValuationRequest, kind: &str) -> Result<()> {
    if request.contract.kind() == kind {
        Ok(())
    } else {
        Err(PricingError::InvalidRequest(format!(
            "expected a {kind} contract, got {}",
            request.contract.kind()
        )))
    }
}

/// Risk-free asset: pays `δ_{p,t}` until `n` and `p_n` at `n`.
pub fn value_risk_free(request: &ValuationRequest) -> Result<ValuationResult> {
    require_contract(request, "risk_free")?;
    value_quadrature(request)
}

pub fn value_whole_life_quadrature(request: &ValuationRequest) -> Result<ValuationResult> {
    require_contract(request, "whole_life")?;
    value_quadrature(request)
}

pub fn value_annuity_quadrature(request: &ValuationRequest) -> Result<ValuationResult> {
    require_contract(request, "continuous_annuity")?;
    value_quadrature(request)
}

/// Backward RK4 at `grid_step`, verified against quadrature on the same grid.
pub fn value_whole_life_ode(request: &ValuationRequest, grid_step: f64) -> Result<ValuationResult> {
    require_contract(request, "whole_life")?;
    verified_ode(request, grid_step)
}

/// Backward RK4 at `grid_step`, verified against quadrature on the same grid.
pub fn value_annuity_ode(request: &ValuationRequest, grid_step: f64) -> Result<ValuationResult> {
    require_contract(request, "continuous_annuity")?;
    verified_ode(request, grid_step)
}

/// Largest absolute difference between two paths on the same grid.
pub fn max_deviation(a: &ValuationResult, b: &ValuationResult) -> Result<f64> {
    if a.times.len() != b.times.len() {
        return Err(PricingError::DimensionMismatch {
            expected: a.times.len(),
            actual: b.times.len(),
        });
    }
    Ok(a.prices.iter().zip(&b.prices).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

fn verified_ode(request: &ValuationRequest, grid_step: f64) -> Result<ValuationResult> {
    let request = request.clone().with_grid_step(grid_step);
    let mut ode = solve_backward_ode(&request, grid_step)?;
    let quad = value_quadrature(&request)?;
    let deviation = max_deviation(&ode, &quad)?;
    let scale = quad.prices.iter().fold(1.0_f64, |m, p| m.max(p.abs()));
    let tolerance = AGREEMENT_TOLERANCE * scale;
    if !(deviation <= tolerance) {
        return Err(PricingError::StepTooLarge { deviation, tolerance });
    }
    ode.method_deviation = Some(deviation);
    Ok(ode)
}
