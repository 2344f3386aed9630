//! Expected present values at issue and the equivalence-principle premium.

use super::{ForceOfInterest, Schedule, ValuationRequest};
use crate::error::{ensure_finite, PricingError, Result};
use crate::mortality::SurvivalModel;
use crate::quadrature::{simpson_piecewise, SimpsonOptions};

/// `p_0` of any request by a single integral over `[0, H]`, split at every
/// breakpoint.
pub fn present_value(request: &ValuationRequest) -> Result<f64> {
    let horizon = request.horizon()?;
    let flows = simpson_piecewise(
        |u, side| request.relative_flow(0.0, u, side),
        0.0,
        horizon,
        &request.breakpoints(horizon),
        &SimpsonOptions::default(),
    );
    let terminal = match request.contract {
        super::Contract::RiskFree { terminal_value, .. } => terminal_value * request.relative_kernel(0.0, horizon),
        _ => 0.0,
    };
    let value = flows.value + terminal;
    ensure_finite(&[value], "present value")?;
    Ok(value)
}

fn flat(delta: f64) -> Result<ForceOfInterest> {
    ForceOfInterest::constant(delta)
}

/// `ā_x = ∫ e^{−δt} ₜp_x dt`
pub fn a_bar(model: &SurvivalModel, x: f64, delta: f64) -> Result<f64> {
    present_value(&ValuationRequest::annuity(model.clone(), x, flat(delta)?, Schedule::Constant(1.0)))
}

/// `Ā_x = ∫ e^{−δt} ₜp_x μ_{x+t} dt`
#[allow(non_snake_case)]
pub fn A_bar(model: &SurvivalModel, x: f64, delta: f64) -> Result<f64> {
    whole_life_epv(model, x, delta, &Schedule::Constant(1.0))
}

/// EPV of a death benefit `b_t` under constant `δ`.
pub fn whole_life_epv(model: &SurvivalModel, x: f64, delta: f64, benefit: &Schedule) -> Result<f64> {
    present_value(&ValuationRequest::whole_life(model.clone(), x, flat(delta)?, benefit.clone()))
}

/// Constant premium rate `ρ` with `ρ ā_x` equal to the benefit EPV.
pub fn solve_net_premium_rate(model: &SurvivalModel, x: f64, delta: f64, benefit: &Schedule) -> Result<f64> {
    let annuity = a_bar(model, x, delta)?;
    if annuity <= 0.0 {
        return Err(PricingError::ZeroAnnuity);
    }
    Ok(whole_life_epv(model, x, delta, benefit)? / annuity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mortality::LifeTable;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_force_examples() {
        let m = SurvivalModel::constant_force(0.04).unwrap();
        assert_abs_diff_eq!(A_bar(&m, 50.0, 0.06).unwrap(), 0.4, epsilon = 1e-10);
        assert_abs_diff_eq!(a_bar(&m, 50.0, 0.06).unwrap(), 10.0, epsilon = 1e-9);
        let rho = solve_net_premium_rate(&m, 50.0, 0.06, &Schedule::Constant(1.0)).unwrap();
        assert_abs_diff_eq!(rho, 0.04, epsilon = 1e-10);
        assert_eq!(solve_net_premium_rate(&m, 50.0, 0.06, &Schedule::Constant(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn de_moivre_examples() {
        let m = SurvivalModel::de_moivre(70.0).unwrap();
        assert_abs_diff_eq!(A_bar(&m, 60.0, 0.05).unwrap(), 0.7869386805747332, epsilon = 1e-10);
        assert_abs_diff_eq!(a_bar(&m, 60.0, 0.05).unwrap(), 4.261226388505337, epsilon = 1e-9);
        let rho = solve_net_premium_rate(&m, 60.0, 0.05, &Schedule::Constant(1.0)).unwrap();
        assert_abs_diff_eq!(rho, 0.18467422493615948, epsilon = 1e-10);
    }

    #[test]
    fn undiscounted_finite_omega_benefit_is_certain() {
        let table = LifeTable::new(90, vec![100.0, 80.0, 50.0, 10.0, 0.0]).unwrap();
        for m in [SurvivalModel::de_moivre(100.0).unwrap(), SurvivalModel::LifeTable(table)] {
            assert_abs_diff_eq!(A_bar(&m, 90.25, 0.0).unwrap(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn dead_cohort_and_zero_annuity() {
        let m = SurvivalModel::de_moivre(70.0).unwrap();
        assert!(matches!(a_bar(&m, 70.0, 0.05), Err(PricingError::DeadCohort { .. })));
        assert!(matches!(
            solve_net_premium_rate(&m, 71.0, 0.05, &Schedule::Constant(1.0)),
            Err(PricingError::DeadCohort { .. })
        ));
    }
}
