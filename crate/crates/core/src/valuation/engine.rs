//! Grid construction and the two backward solvers.

use super::{Contract, Method, ValuationRequest, ValuationResult};
use crate::error::{ensure_finite, PricingError, Result};
use crate::quadrature::{simpson, SimpsonOptions};
use crate::Side;

/// Refuse grids with more cells than this.
const MAX_CELLS: f64 = 5e7;

struct Grid {
    times: Vec<f64>,
    kinks: Vec<usize>,
}

/// Uniform points `i·step`, plus every breakpoint and the horizon. Points
/// closer than `1e-9·step` to a breakpoint are merged into it, so the last
/// cell (and cells next to breakpoints) may be shorter than `step`.
fn build_grid(horizon: f64, step: f64, cuts: &[f64]) -> Result<Grid> {
    if !step.is_finite() || step <= 0.0 {
        return Err(PricingError::InvalidRequest(format!("grid step {step} must be finite and > 0")));
    }
    let cells = (horizon / step).ceil();
    if cells > MAX_CELLS {
        return Err(PricingError::InvalidRequest(format!(
            "grid step {step} gives {cells} cells over {horizon} years"
        )));
    }
    let snap = 1e-9 * step;
    let mut points: Vec<(f64, bool)> = (0..cells as usize)
        .map(|i| (i as f64 * step, i == 0))
        .filter(|&(t, _)| t < horizon)
        .chain(cuts.iter().map(|&c| (c, true)))
        .chain(std::iter::once((horizon, true)))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut times: Vec<f64> = Vec::with_capacity(points.len());
    let mut is_kink: Vec<bool> = Vec::with_capacity(points.len());
    for (t, kink) in points {
        if let Some(&last) = times.last() {
            if t - last <= snap {
                if kink && times.len() > 1 {
                    *times.last_mut().unwrap() = t;
                    *is_kink.last_mut().unwrap() = true;
                }
                continue;
            }
        }
        times.push(t);
        is_kink.push(kink);
    }
    let kinks = is_kink.iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| i).collect();
    Ok(Grid { times, kinks })
}

impl ValuationRequest {
    /// `g(u) K(u) / K(anchor)`: the cash-flow rate at `u` weighted by
    /// discounting and survival from `anchor`.
    pub(super) fn relative_flow(&self, anchor: f64, u: f64, side: Side) -> f64 {
        let discount = self.foi.discount(anchor, u);
        match (&self.contract, &self.life) {
            (Contract::WholeLife { benefit }, Some(life)) => {
                let density = life
                    .model
                    .density(life.issue_age + anchor, u - anchor, side)
                    .unwrap_or(f64::NAN);
                benefit.value(u, side) * discount * density
            }
            (contract, _) => contract.schedule().value(u, side) * discount * self.relative_survival(anchor, u),
        }
    }

    pub(super) fn relative_survival(&self, anchor: f64, u: f64) -> f64 {
        self.life.as_ref().map_or(1.0, |life| {
            life.model.survival_unchecked(life.issue_age + anchor, u - anchor)
        })
    }

    fn hazard(&self, t: f64, side: Side) -> f64 {
        self.life.as_ref().map_or(0.0, |life| {
            life.model.hazard(life.issue_age + t, side).unwrap_or(f64::NAN)
        })
    }

    fn boundary_value(&self) -> f64 {
        match self.contract {
            Contract::RiskFree { terminal_value, .. } => terminal_value,
            _ => 0.0,
        }
    }

    fn left_limit_at(&self, horizon: f64, boundary: f64) -> f64 {
        if !self.reaches_limiting_age(horizon) {
            return boundary;
        }
        match &self.contract {
            Contract::WholeLife { benefit } => benefit.value(horizon, Side::Left),
            _ => 0.0,
        }
    }

    fn finish(self, grid: Grid, prices: Vec<f64>, method: Method, evaluations: usize) -> Result<ValuationResult> {
        ensure_finite(&prices, "price")?;
        let horizon = *grid.times.last().unwrap();
        let horizon_left_limit = self.left_limit_at(horizon, prices[prices.len() - 1]);
        Ok(ValuationResult {
            times: grid.times,
            prices,
            kinks: grid.kinks,
            horizon_left_limit,
            method,
            grid_step: self.grid_step,
            evaluations,
            method_deviation: None,
            request: self,
        })
    }
}

/// Price path by Simpson quadrature, one grid cell at a time:
/// `p_i = ∫_{t_i}^{t_{i+1}} g K/K(t_i) + p_{i+1} K(t_{i+1})/K(t_i)`.
pub fn value_quadrature(request: &ValuationRequest) -> Result<ValuationResult> {
    let horizon = request.horizon()?;
    let grid = build_grid(horizon, request.grid_step, &request.breakpoints(horizon))?;
    let t = &grid.times;
    let n = t.len() - 1;
    let opts = SimpsonOptions::default();
    let mut prices = vec![0.0; n + 1];
    prices[n] = request.boundary_value();
    let mut panels = 0;
    for i in (0..n).rev() {
        let (a, b) = (t[i], t[i + 1]);
        let cell = simpson(|u, side| request.relative_flow(a, u, side), a, b, &opts);
        panels += cell.panels;
        prices[i] = cell.value + request.relative_kernel(a, b) * prices[i + 1];
    }
    request.clone().finish(grid, prices, Method::Quadrature, panels)
}

/// One classical RK4 step from `b` back to `a`.
fn rk4_backward(f: impl Fn(f64, f64, Side) -> f64, a: f64, b: f64, y: f64) -> f64 {
    let h = b - a;
    let mid = a + 0.5 * h;
    let k1 = f(b, y, Side::Left);
    let k2 = f(mid, y - 0.5 * h * k1, Side::Right);
    let k3 = f(mid, y - 0.5 * h * k2, Side::Right);
    let k4 = f(a, y - h * k3, Side::Right);
    y - h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Fixed-step backward RK4 without the quadrature cross-check.
///
/// Infinite-ω models and risk-free contracts integrate the price directly:
/// `dp/dt = (δ + μ) p − g` with `g = μ b` (whole life) or `δ_p`.
///
/// Finite-ω models integrate `q = p · ₛp_{x₀+t_i}` over each cell instead,
/// `dq/dt = δ q − b f` or `δ q − δ_p ₛp`, since `μ → ∞` at `ω` and the
/// whole-life price jumps from `b` to 0 there.
pub fn solve_backward_ode(request: &ValuationRequest, grid_step: f64) -> Result<ValuationResult> {
    let request = request.clone().with_grid_step(grid_step);
    let horizon = request.horizon()?;
    let grid = build_grid(horizon, grid_step, &request.breakpoints(horizon))?;
    let t = &grid.times;
    let n = t.len() - 1;
    let weighted = request
        .life
        .as_ref()
        .is_some_and(|life| life.model.limiting_age().is_finite());
    let schedule = request.contract.schedule();
    let delta = |s: f64, side: Side| request.foi.rate(s, side);

    let mut prices = vec![0.0; n + 1];
    prices[n] = request.boundary_value();
    for i in (0..n).rev() {
        let (a, b) = (t[i], t[i + 1]);
        prices[i] = if weighted {
            let life = request.life.as_ref().unwrap();
            let x = life.issue_age + a;
            let source = |s: f64, side: Side| match &request.contract {
                Contract::WholeLife { benefit } => {
                    benefit.value(s, side) * life.model.density(x, s - a, side).unwrap_or(f64::NAN)
                }
                _ => schedule.value(s, side) * life.model.survival_unchecked(x, s - a),
            };
            let q_end = prices[i + 1] * request.relative_survival(a, b);
            rk4_backward(|s, q, side| delta(s, side) * q - source(s, side), a, b, q_end)
        } else {
            let outflow = |s: f64, side: Side| match &request.contract {
                Contract::WholeLife { benefit } => request.hazard(s, side) * benefit.value(s, side),
                _ => schedule.value(s, side),
            };
            let rhs = |s: f64, p: f64, side: Side| {
                (delta(s, side) + request.hazard(s, side)) * p - outflow(s, side)
            };
            rk4_backward(rhs, a, b, prices[i + 1])
        };
    }
    request.clone().finish(grid, prices, Method::Ode, n)
}
