//! Consistency of a price path with its own cash flows between two dates.

use serde::Serialize;

use super::ValuationResult;
use crate::error::{PricingError, Result};
use crate::quadrature::{simpson_piecewise, SimpsonOptions};

/// Residuals of `p_a = D(a, b) + p_b · K(b)/K(a)` on two links and their
/// composition, where `D` is the discounted survival-weighted cash flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecursionResidual {
    /// `t0 → t1`
    pub near: f64,
    /// `t1 → t2`
    pub far: f64,
    /// `t0 → t2` through `t1`.
    pub chained: f64,
    /// `max(1, |p_{t0}|)`
    pub scale: f64,
}

impl RecursionResidual {
    pub fn max_abs(&self) -> f64 {
        self.near.max(self.far).max(self.chained)
    }

    pub fn relative(&self) -> f64 {
        self.max_abs() / self.scale
    }
}

/// Dividends on `[a, b]` and the discount `K(b)/K(a)`, both seen from `a`.
fn link(result: &ValuationResult, a: f64, b: f64) -> (f64, f64) {
    if a == b {
        return (0.0, 1.0);
    }
    let request = result.request();
    let cuts = request.breakpoints(result.horizon());
    let flows = simpson_piecewise(
        |u, side| request.relative_flow(a, u, side),
        a,
        b,
        &cuts,
        &SimpsonOptions::default(),
    );
    (flows.value, request.relative_kernel(a, b))
}

/// Requires `0 ≤ t0 ≤ t1 ≤ t2 ≤ horizon`; prices off the grid are
/// interpolated.
pub fn check_recursion(result: &ValuationResult, t0: f64, t1: f64, t2: f64) -> Result<RecursionResidual> {
    if !(t0 <= t1 && t1 <= t2) {
        return Err(PricingError::InvalidRequest(format!(
            "recursion times must be ordered, got ({t0}, {t1}, {t2})"
        )));
    }
    let (p0, p1, p2) = (result.price_at(t0)?, result.price_at(t1)?, result.price_at(t2)?);
    let (d01, k01) = link(result, t0, t1);
    let (d12, k12) = link(result, t1, t2);
    Ok(RecursionResidual {
        near: (p0 - (d01 + p1 * k01)).abs(),
        far: (p1 - (d12 + p2 * k12)).abs(),
        chained: (p0 - (d01 + (d12 + p2 * k12) * k01)).abs(),
        scale: p0.abs().max(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mortality::SurvivalModel;
    use crate::valuation::{value_quadrature, ForceOfInterest, Schedule, ValuationRequest};

    #[test]
    fn annuity_certain_closed_forms() {
        let req = ValuationRequest::risk_free(Schedule::Constant(1.0), 0.0, ForceOfInterest::Constant(0.05), 10.0);
        let r = value_quadrature(&req).unwrap();
        let res = check_recursion(&r, 0.0, 5.0, 10.0).unwrap();
        assert!(res.max_abs() <= 1e-9, "{res:?}");
    }

    #[test]
    fn equal_times_give_zero() {
        let req = ValuationRequest::whole_life(
            SurvivalModel::de_moivre(90.0).unwrap(),
            50.0,
            ForceOfInterest::Constant(0.03),
            Schedule::Constant(1.0),
        );
        let r = value_quadrature(&req).unwrap();
        let res = check_recursion(&r, 3.3, 3.3, 3.3).unwrap();
        assert_eq!(res.near, 0.0);
        assert_eq!(res.far, 0.0);
    }

    #[test]
    fn constant_whole_life_to_truncation() {
        let req = ValuationRequest::whole_life(
            SurvivalModel::constant_force(0.04).unwrap(),
            30.0,
            ForceOfInterest::Constant(0.06),
            Schedule::Constant(1.0),
        );
        let r = value_quadrature(&req).unwrap();
        let res = check_recursion(&r, 0.0, 1.0, r.horizon()).unwrap();
        assert!(res.relative() <= 1e-8, "{res:?}");
        assert!(check_recursion(&r, 2.0, 1.0, 3.0).is_err());
        assert!(check_recursion(&r, 0.0, 1.0, r.horizon() + 1.0).is_err());
    }
}
