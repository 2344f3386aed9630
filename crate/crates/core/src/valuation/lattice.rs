//! Discrete die-or-survive approximation of a life contract.

use super::{Contract, ValuationRequest};
use crate::error::{PricingError, Result};
use crate::tree::{TreeBuilder, UncertaintyTree};
use crate::Side;

/// Refuse trees larger than this many nodes.
const MAX_NODES: usize = 20_000_000;

/// Tree with `N = round(H/Δt)` steps of length `H/N`.
///
/// From the alive node at `t` the life dies with probability `μ_{x₀+t}Δt`
/// (capped at 1) and survives otherwise; both edges discount by
/// `1/(1 + δ_t Δt)`. A death pays `b_{t+Δt}` and is followed by a chain of
/// worthless nodes so that every leaf sits at `N`. For an annuity the
/// survival edge pays `δ_{p,t}Δt` instead. Leaves are priced at zero.
pub fn die_survive_tree(request: &ValuationRequest, dt: f64) -> Result<UncertaintyTree> {
    let life = request
        .life
        .as_ref()
        .ok_or_else(|| PricingError::InvalidRequest("die/survive trees need a survival model".into()))?;
    if !dt.is_finite() || dt <= 0.0 {
        return Err(PricingError::InvalidRequest(format!("time step {dt} must be finite and > 0")));
    }
    let horizon = request.horizon()?;
    let steps = (horizon / dt).round().max(1.0) as usize;
    if steps.saturating_mul(steps + 3) / 2 > MAX_NODES {
        return Err(PricingError::InvalidRequest(format!("{steps} steps exceed the tree size limit")));
    }
    let dt = horizon / steps as f64;

    let mut builder = TreeBuilder::new();
    let mut alive = Some(builder.root());
    for i in 0..steps {
        let Some(parent) = alive else { break };
        let t = i as f64 * dt;
        let sdf = 1.0 / (1.0 + request.foi.rate(t, Side::Right) * dt);
        let mu = life.model.hazard(life.issue_age + t, Side::Right)?;
        let death = (mu * dt).min(1.0);
        if death > 0.0 {
            let mut node = builder.child(parent, death, sdf);
            if let Contract::WholeLife { benefit } = &request.contract {
                builder.set_dividend(node, benefit.value(t + dt, Side::Left));
            }
            for _ in i + 1..steps {
                node = builder.child(node, 1.0, sdf);
            }
            builder.set_price(node, 0.0);
        }
        alive = (death < 1.0).then(|| {
            let next = builder.child(parent, 1.0 - death, sdf);
            if let Contract::ContinuousAnnuity { rate } = &request.contract {
                builder.set_dividend(next, rate.value(t, Side::Right) * dt);
            }
            next
        });
    }
    if let Some(last) = alive {
        builder.set_price(last, 0.0);
    }
    builder.build()
}
