//! Composite Simpson quadrature with panel doubling and Richardson
//! extrapolation.
//!
//! Integrands receive a [`Side`] so that piecewise functions can be sampled
//! at the inward one-sided limit on each endpoint: the left endpoint is
//! evaluated with `Side::Right`, the right endpoint with `Side::Left`.

use crate::Side;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpsonOptions {
    /// Stop once successive Simpson estimates differ by less than this
    /// fraction of the latest estimate.
    pub rel_tol: f64,
    /// Stop once the Simpson panel count reaches this.
    pub max_panels: usize,
}

impl Default for SimpsonOptions {
    fn default() -> Self {
        SimpsonOptions {
            rel_tol: 1e-10,
            max_panels: 1 << 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Simpson panels used in the final refinement.
    pub panels: usize,
    pub converged: bool,
}

impl Estimate {
    fn zero() -> Self {
        Estimate {
            value: 0.0,
            panels: 0,
            converged: true,
        }
    }

    fn merge(self, other: Estimate) -> Estimate {
        Estimate {
            value: self.value + other.value,
            panels: self.panels + other.panels,
            converged: self.converged && other.converged,
        }
    }
}

/// `∫_a^b f` for a function smooth on `[a, b]`.
pub fn simpson<F>(mut f: F, a: f64, b: f64, opts: &SimpsonOptions) -> Estimate
where
    F: FnMut(f64, Side) -> f64,
{
    if a == b {
        return Estimate::zero();
    }
    if b < a {
        let e = simpson(f, b, a, opts);
        return Estimate { value: -e.value, ..e };
    }
    // Trapezoid sums T_n; Simpson S_2n = (4 T_2n − T_n) / 3.
    let width = b - a;
    let mut intervals = 1usize;
    let mut trap = 0.5 * width * (f(a, Side::Right) + f(b, Side::Left));
    let mut previous: Option<f64> = None;
    loop {
        let h = width / (2 * intervals) as f64;
        let mids: f64 = (0..intervals).map(|i| f(a + (2 * i + 1) as f64 * h, Side::Right)).sum();
        let refined = 0.5 * trap + h * mids;
        let simpson = (4.0 * refined - trap) / 3.0;
        intervals *= 2;
        trap = refined;
        let panels = intervals;
        if let Some(prev) = previous {
            let diff = simpson - prev;
            let converged = diff.abs() <= opts.rel_tol * simpson.abs() || diff == 0.0;
            if converged || panels >= opts.max_panels {
                return Estimate {
                    value: simpson + diff / 15.0,
                    panels,
                    converged,
                };
            }
        }
        previous = Some(simpson);
    }
}

/// Like [`simpson`] but splits `[a, b]` at every breakpoint strictly inside.
pub fn simpson_piecewise<F>(mut f: F, a: f64, b: f64, breakpoints: &[f64], opts: &SimpsonOptions) -> Estimate
where
    F: FnMut(f64, Side) -> f64,
{
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);
    edges
        .windows(2)
        .map(|w| simpson(&mut f, w[0], w[1], opts))
        .fold(Estimate::zero(), Estimate::merge)
}

/// Convenience wrapper for integrands without jumps.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    simpson(|x, _| f(x), a, b, &SimpsonOptions::default()).value
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|x| 3.0 * x * x + 2.0 * x + 1.0, 0.0, 2.0);
        assert_relative_eq!(v, 14.0, max_relative = 1e-15);
        let v = integrate(|x| x.powi(3), -1.0, 1.0);
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn exponential_converges() {
        let e = simpson(|x, _| (-0.1 * x).exp(), 0.0, 50.0, &SimpsonOptions::default());
        assert!(e.converged);
        assert_relative_eq!(e.value, (1.0 - (-5.0f64).exp()) / 0.1, max_relative = 1e-12);
    }

    #[test]
    fn reversed_and_empty_ranges() {
        assert_eq!(integrate(|x| x, 1.0, 1.0), 0.0);
        assert_relative_eq!(integrate(|x| x, 2.0, 0.0), -2.0, max_relative = 1e-15);
    }

    #[test]
    fn piecewise_uses_inward_limits() {
        // Step function: 1 on [0,1), 3 on [1,2]. Right-continuous at 1.
        let step = |x: f64, side: Side| {
            if x < 1.0 || (x == 1.0 && side == Side::Left) {
                1.0
            } else {
                3.0
            }
        };
        let e = simpson_piecewise(step, 0.0, 2.0, &[1.0], &SimpsonOptions::default());
        assert_relative_eq!(e.value, 4.0, max_relative = 1e-15);
        assert!(e.converged);
    }

    #[test]
    fn panel_cap_reports_non_convergence() {
        let opts = SimpsonOptions {
            rel_tol: 0.0,
            max_panels: 64,
        };
        let e = simpson(|x, _| x.sqrt(), 0.0, 1.0, &opts);
        assert!(!e.converged);
        assert_eq!(e.panels, 64);
        assert_relative_eq!(e.value, 2.0 / 3.0, max_relative = 1e-3);
    }
}
