//! Deterministic time functions: force of interest and cash-flow schedules.

use std::fmt;
use std::sync::Arc;

use crate::error::{ensure_finite, PricingError, Result};
use crate::quadrature::{simpson, SimpsonOptions};
use crate::Side;

/// Right-continuous step function: `values[i]` on `[breakpoints[i-1], breakpoints[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(PricingError::DimensionMismatch {
                expected: breakpoints.len() + 1,
                actual: values.len(),
            });
        }
        ensure_finite(&breakpoints, "breakpoint")?;
        ensure_finite(&values, "value")?;
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PricingError::InvalidRequest(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        Ok(StepFunction { breakpoints, values })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, t: f64, side: Side) -> f64 {
        let idx = match side {
            Side::Right => self.breakpoints.partition_point(|&b| b <= t),
            Side::Left => self.breakpoints.partition_point(|&b| b < t),
        };
        self.values[idx]
    }

    /// Exact `∫_a^b`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return -self.integral(b, a);
        }
        let mut total = 0.0;
        let mut lo = a;
        let mut idx = self.breakpoints.partition_point(|&x| x <= a);
        while lo < b {
            let hi = self.breakpoints.get(idx).copied().unwrap_or(f64::INFINITY).min(b);
            total += self.values[idx] * (hi - lo);
            lo = hi;
            idx += 1;
        }
        total
    }
}

/// Risk-free force of interest `δ_t`, in policy time.
#[derive(Clone)]
pub enum ForceOfInterest {
    Constant(f64),
    PiecewiseConstant(StepFunction),
    /// Any continuous curve; integrals are taken numerically.
    Curve(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for ForceOfInterest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForceOfInterest::Constant(d) => f.debug_tuple("Constant").field(d).finish(),
            ForceOfInterest::PiecewiseConstant(s) => f.debug_tuple("PiecewiseConstant").field(s).finish(),
            ForceOfInterest::Curve(_) => f.write_str("Curve(..)"),
        }
    }
}

impl ForceOfInterest {
    pub fn constant(delta: f64) -> Result<Self> {
        ensure_finite(&[delta], "force of interest")?;
        Ok(ForceOfInterest::Constant(delta))
    }

    pub fn piecewise(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(ForceOfInterest::PiecewiseConstant(StepFunction::new(breakpoints, values)?))
    }

    pub fn curve(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ForceOfInterest::Curve(Arc::new(f))
    }

    pub fn rate(&self, t: f64, side: Side) -> f64 {
        match self {
            ForceOfInterest::Constant(d) => *d,
            ForceOfInterest::PiecewiseConstant(s) => s.value(t, side),
            ForceOfInterest::Curve(f) => f(t),
        }
    }

    /// `∫_a^b δ_s ds`
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            ForceOfInterest::Constant(d) => d * (b - a),
            ForceOfInterest::PiecewiseConstant(s) => s.integral(a, b),
            ForceOfInterest::Curve(f) => simpson(|x, _| f(x), a, b, &SimpsonOptions {
                rel_tol: 1e-13,
                ..SimpsonOptions::default()
            })
            .value,
        }
    }

    /// `exp(−∫_a^b δ)`
    pub fn discount(&self, a: f64, b: f64) -> f64 {
        (-self.integral(a, b)).exp()
    }

    pub fn breakpoints(&self) -> &[f64] {
        match self {
            ForceOfInterest::PiecewiseConstant(s) => s.breakpoints(),
            _ => &[],
        }
    }
}

/// Benefit amount `b_t` or payment rate `δ_{p,t}` as a function of policy time.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Constant(f64),
    PiecewiseConstant(StepFunction),
    /// `Σ c_k t^k`
    Polynomial(Vec<f64>),
}

impl Schedule {
    pub fn constant(value: f64) -> Result<Self> {
        ensure_finite(&[value], "schedule")?;
        Ok(Schedule::Constant(value))
    }

    pub fn piecewise(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(Schedule::PiecewiseConstant(StepFunction::new(breakpoints, values)?))
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Result<Self> {
        ensure_finite(&coefficients, "coefficient")?;
        Ok(Schedule::Polynomial(coefficients))
    }

    pub fn value(&self, t: f64, side: Side) -> f64 {
        match self {
            Schedule::Constant(v) => *v,
            Schedule::PiecewiseConstant(s) => s.value(t, side),
            Schedule::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &k| acc * t + k),
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        self.value(t, Side::Right)
    }

    pub fn breakpoints(&self) -> &[f64] {
        match self {
            Schedule::PiecewiseConstant(s) => s.breakpoints(),
            _ => &[],
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Schedule::Constant(v) => *v == 0.0,
            Schedule::PiecewiseConstant(s) => s.values().iter().all(|&v| v == 0.0),
            Schedule::Polynomial(c) => c.iter().all(|&v| v == 0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn step_function_sides_and_integral() {
        let s = StepFunction::new(vec![1.0, 3.0], vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(s.value(0.5, Side::Right), 0.1);
        assert_eq!(s.value(1.0, Side::Right), 0.2);
        assert_eq!(s.value(1.0, Side::Left), 0.1);
        assert_eq!(s.value(5.0, Side::Left), 0.3);
        assert_relative_eq!(s.integral(0.0, 4.0), 0.1 + 0.4 + 0.3, max_relative = 1e-15);
        assert_relative_eq!(s.integral(2.0, 0.5), -(0.05 + 0.2), max_relative = 1e-15);
        assert!(StepFunction::new(vec![1.0], vec![0.1]).is_err());
        assert!(StepFunction::new(vec![2.0, 1.0], vec![0.1, 0.2, 0.3]).is_err());
    }

    #[test]
    fn curve_integral_matches_closed_form() {
        let foi = ForceOfInterest::curve(|t| 0.03 + 0.001 * t);
        assert_relative_eq!(foi.integral(0.0, 10.0), 0.3 + 0.05, max_relative = 1e-13);
        assert_relative_eq!(ForceOfInterest::constant(0.05).unwrap().discount(0.0, 10.0), (-0.5f64).exp());
    }

    #[test]
    fn polynomial_schedule() {
        let p = Schedule::polynomial(vec![1.0, 0.5, 0.25]).unwrap();
        assert_relative_eq!(p.at(2.0), 1.0 + 1.0 + 1.0);
        assert!(Schedule::constant(0.0).unwrap().is_zero());
        assert!(!p.is_zero());
    }
}
