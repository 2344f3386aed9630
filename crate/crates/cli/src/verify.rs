//! Built-in invariant suites, driven by a seeded generator.

use contingent_pricer::market::{detect_arbitrage, Dichotomy, PayoffMatrix, DEFAULT_TOLERANCE};
use contingent_pricer::mortality::{LifeTable, SurvivalModel};
use contingent_pricer::tree::{
    check_martingale, conditional_expectation, expectation_at_time, price_backward_induction,
    price_reduced_lottery, MartingaleVerdict, NodeId, TreeBuilder, UncertaintyTree,
};
use contingent_pricer::valuation::{
    a_bar, check_recursion, max_deviation, solve_backward_ode, value_quadrature, A_bar, ForceOfInterest,
    Schedule, ValuationRequest, AGREEMENT_TOLERANCE,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const DEFAULT_SEED: u64 = 20_240_917;
pub const DEFAULT_GRID_STEP: f64 = 1.0 / 256.0;

#[derive(Debug, Clone)]
pub struct Options {
    pub seed: u64,
    /// Relative tolerance for the ODE/quadrature suite.
    pub agreement_tolerance: f64,
    pub grid_step: f64,
    /// Dividend placed on the zero-dividend martingale fixture.
    pub inject_dividend: Option<f64>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            seed: DEFAULT_SEED,
            agreement_tolerance: AGREEMENT_TOLERANCE,
            grid_step: DEFAULT_GRID_STEP,
            inject_dividend: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    /// Largest residual seen, in the suite's own units.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

type SuiteFn = fn(&Options, &mut ChaCha8Rng) -> SuiteResult;

pub fn run(options: &Options) -> VerifyReport {
    let suites: [SuiteFn; 6] = [
        farkas_dichotomy,
        tower_property,
        martingale_iff_zero_dividends,
        insurance_annuity_identity,
        ode_quadrature_agreement,
        recursion_residuals,
    ];
    // Each suite gets its own stream so adding cases to one leaves the
    // others unchanged.
    let results: Vec<SuiteResult> = suites
        .iter()
        .enumerate()
        .map(|(i, suite)| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(i as u64);
            suite(options, &mut rng)
        })
        .collect();
    VerifyReport {
        seed: options.seed,
        passed: results.iter().all(|r| r.passed),
        suites: results,
    }
}

fn failure(name: &'static str, tolerance: f64, err: impl std::fmt::Display) -> SuiteResult {
    SuiteResult {
        name,
        passed: false,
        cases: 0,
        worst: f64::NAN,
        tolerance,
        detail: format!("error: {err}"),
    }
}

fn random_market(rng: &mut ChaCha8Rng) -> PayoffMatrix {
    let (m, n) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
    let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-2.0..=2.0)).collect()).collect();
    let costs = if rng.gen_bool(0.5) {
        (0..m).map(|_| rng.gen_range(-1.0..=2.0)).collect()
    } else {
        // Priced by a positive state-price vector, so no arbitrage.
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        rows.iter().map(|r| r.iter().zip(&s).map(|(a, b)| a * b).sum()).collect()
    };
    PayoffMatrix::new(rows, costs).expect("finite entries")
}

fn farkas_dichotomy(_: &Options, rng: &mut ChaCha8Rng) -> SuiteResult {
    const NAME: &str = "farkas_dichotomy";
    let tol = 1e-7;
    let (mut worst, mut arbitrage, mut failures) = (0.0_f64, 0, 0);
    let cases = 500;
    for _ in 0..cases {
        let market = random_market(rng);
        let residual = match detect_arbitrage(&market, DEFAULT_TOLERANCE) {
            Ok(Dichotomy::Sdf(sdf)) => {
                let negative = sdf.values.iter().fold(0.0_f64, |m, v| m.max(-v));
                market.pricing_residual(&sdf.values).max(negative)
            }
            Ok(Dichotomy::Arbitrage(cert)) => {
                arbitrage += 1;
                if cert.verify(&market, tol) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Err(_) => f64::INFINITY,
        };
        if !(residual <= tol) {
            failures += 1;
        }
        worst = worst.max(residual);
    }
    SuiteResult {
        name: NAME,
        passed: failures == 0,
        cases,
        worst,
        tolerance: tol,
        detail: format!("{arbitrage} arbitrage, {} sdf, {failures} bad witnesses", cases - arbitrage),
    }
}

fn random_tree(rng: &mut ChaCha8Rng, dividends: bool) -> UncertaintyTree {
    let mut builder = TreeBuilder::new();
    let mut frontier = vec![builder.root()];
    for _ in 0..rng.gen_range(1..=4) {
        let mut next = Vec::new();
        for parent in frontier {
            let k = rng.gen_range(1..=3);
            for i in 0..k {
                let child = builder.child(parent, 1.0 / k as f64, rng.gen_range(0.8..1.1));
                if dividends && i % 2 == 0 {
                    builder.set_dividend(child, rng.gen_range(0.0..1.0));
                }
                next.push(child);
            }
        }
        frontier = next;
    }
    for leaf in frontier {
        builder.set_price(leaf, rng.gen_range(0.0..2.0));
    }
    builder.build().expect("valid random tree")
}

/// Reduced lottery against backward induction at every node, and iterated
/// conditioning on random leaf variables.
fn tower_property(_: &Options, rng: &mut ChaCha8Rng) -> SuiteResult {
    const NAME: &str = "tower_property";
    let tol = 1e-10;
    let mut worst = 0.0_f64;
    let cases = 100;
    for _ in 0..cases {
        let tree = random_tree(rng, true);
        let check = || -> contingent_pricer::Result<f64> {
            let mut w = 0.0_f64;
            let induced = price_backward_induction(&tree)?;
            let leaf: Vec<f64> = (0..tree.len()).map(|i| (i as f64 * 0.37).sin()).collect();
            let cond = (0..tree.len())
                .map(|i| conditional_expectation(&tree, &leaf, NodeId(i)))
                .collect::<Result<Vec<f64>, _>>()?;
            for (i, node) in tree.nodes().iter().enumerate() {
                let lottery = price_reduced_lottery(&tree, NodeId(i))?;
                w = w.max((lottery - induced[i]).abs() / induced[i].abs().max(1.0));
                for u in node.time..=tree.horizon() {
                    let nested = expectation_at_time(&tree, &cond, NodeId(i), u)?;
                    w = w.max((nested - cond[i]).abs() / cond[i].abs().max(1.0));
                }
            }
            Ok(w)
        };
        match check() {
            Ok(w) => worst = worst.max(w),
            Err(e) => return failure(NAME, tol, e),
        }
    }
    SuiteResult {
        name: NAME,
        passed: worst <= tol,
        cases,
        worst,
        tolerance: tol,
        detail: format!("{cases} trees with dividends, relative gap"),
    }
}

/// A two-step chain with one-step discount `1/1.05` and no dividends.
fn chain_fixture(dividend: f64) -> contingent_pricer::Result<UncertaintyTree> {
    let step = 1.0 / 1.05;
    let mut builder = TreeBuilder::new();
    let first = builder.child(builder.root(), 1.0, step);
    builder.set_dividend(first, dividend);
    let second = builder.child(first, 1.0, step);
    builder.set_price(second, 1.0);
    builder.build()
}

/// Zero-dividend trees must give martingale prices; the control with a
/// unit dividend must not, with root residual `a₁ d₁`.
fn martingale_iff_zero_dividends(options: &Options, rng: &mut ChaCha8Rng) -> SuiteResult {
    const NAME: &str = "martingale_iff_zero_dividends";
    let tol = 1e-12;
    let run = |rng: &mut ChaCha8Rng| -> contingent_pricer::Result<(f64, f64, bool)> {
        let mut worst = 0.0_f64;
        let mut trees = Vec::new();
        for _ in 0..50 {
            trees.push(random_tree(rng, false));
        }
        trees.push(chain_fixture(options.inject_dividend.unwrap_or(0.0))?);
        for tree in &trees {
            let report = check_martingale(tree, &price_backward_induction(tree)?)?;
            worst = worst.max(report.max_abs_residual);
        }
        let control = chain_fixture(1.0)?;
        let report = check_martingale(&control, &price_backward_induction(&control)?)?;
        let root = report.residual_at(control.root()).unwrap_or(f64::NAN);
        let control_ok = report.verdict == MartingaleVerdict::NotMartingale && (root - 1.0 / 1.05).abs() <= 1e-10;
        Ok((worst, root, control_ok))
    };
    match run(rng) {
        Ok((worst, root, control_ok)) => SuiteResult {
            name: NAME,
            passed: worst <= tol && control_ok,
            cases: 52,
            worst,
            tolerance: tol,
            detail: format!(
                "51 zero-dividend trees{}; dividend control root residual {root:.12}",
                match options.inject_dividend {
                    Some(d) => format!(" (dividend {d} injected into the chain fixture)"),
                    None => String::new(),
                }
            ),
        },
        Err(e) => failure(NAME, tol, e),
    }
}

fn sample_table() -> LifeTable {
    let lx = (0..=40)
        .map(|k| if k == 40 { 0.0 } else { 100_000.0 * (1.0 - (k as f64 / 40.0).powf(1.7)) })
        .collect();
    LifeTable::new(60, lx).expect("valid table")
}

fn models() -> Vec<(SurvivalModel, f64)> {
    vec![
        (SurvivalModel::ConstantForce { mu: 0.04 }, 40.0),
        (SurvivalModel::DeMoivre { omega: 100.0 }, 65.3),
        (SurvivalModel::Gompertz { b: 0.0003, c: 1.07 }, 50.0),
        (SurvivalModel::LifeTable(sample_table()), 65.3),
    ]
}

fn insurance_annuity_identity(_: &Options, rng: &mut ChaCha8Rng) -> SuiteResult {
    const NAME: &str = "insurance_annuity_identity";
    let tol = 1e-8;
    let mut worst = 0.0_f64;
    let mut cases = 0;
    for (model, x) in models() {
        for _ in 0..5 {
            let delta = rng.gen_range(0.0..0.12);
            match (A_bar(&model, x, delta), a_bar(&model, x, delta)) {
                (Ok(big), Ok(small)) => worst = worst.max((big + delta * small - 1.0).abs()),
                (Err(e), _) | (_, Err(e)) => return failure(NAME, tol, e),
            }
            cases += 1;
        }
    }
    SuiteResult {
        name: NAME,
        passed: worst <= tol,
        cases,
        worst,
        tolerance: tol,
        detail: format!("|A + δa − 1| over {cases} (model, δ) pairs"),
    }
}

fn contracts() -> Vec<ValuationRequest> {
    let foi = ForceOfInterest::Constant(0.05);
    let benefit = Schedule::Polynomial(vec![1.0, 0.01]);
    models()
        .into_iter()
        .flat_map(|(model, x)| {
            [
                ValuationRequest::whole_life(model.clone(), x, foi.clone(), benefit.clone()),
                ValuationRequest::annuity(model, x, foi.clone(), Schedule::Constant(1.0)),
            ]
        })
        .collect()
}

fn ode_quadrature_agreement(options: &Options, _: &mut ChaCha8Rng) -> SuiteResult {
    const NAME: &str = "ode_quadrature_agreement";
    let mut worst = 0.0_f64;
    let mut lines = Vec::new();
    let mut passed = true;
    let requests = contracts();
    for req in &requests {
        let req = req.clone().with_grid_step(options.grid_step);
        let outcome = value_quadrature(&req)
            .and_then(|q| Ok((solve_backward_ode(&req, options.grid_step)?, q)))
            .and_then(|(o, q)| Ok((max_deviation(&o, &q)?, q)));
        let (dev, quad) = match outcome {
            Ok(v) => v,
            Err(e) => return failure(NAME, options.agreement_tolerance, e),
        };
        let scale = quad.prices().iter().fold(1.0_f64, |m, p| m.max(p.abs()));
        let rel = dev / scale;
        if rel > options.agreement_tolerance {
            passed = false;
            lines.push(format!(
                "{} {}: deviation {rel:.3e}",
                req.life.as_ref().map_or("none", |l| l.model.kind()),
                req.contract.kind()
            ));
        }
        worst = worst.max(rel);
    }
    SuiteResult {
        name: NAME,
        passed,
        cases: requests.len(),
        worst,
        tolerance: options.agreement_tolerance,
        detail: if lines.is_empty() {
            format!("grid step {}", options.grid_step)
        } else {
            format!("grid step {}; over tolerance: {}", options.grid_step, lines.join("; "))
        },
    }
}

fn recursion_residuals(_: &Options, rng: &mut ChaCha8Rng) -> SuiteResult {
    const NAME: &str = "recursion_residuals";
    let tol = 1e-8;
    let mut worst = 0.0_f64;
    let mut cases = 0;
    for req in contracts() {
        let result = match value_quadrature(&req.with_grid_step(1.0 / 64.0)) {
            Ok(r) => r,
            Err(e) => return failure(NAME, tol, e),
        };
        let span = result.horizon().min(40.0);
        for _ in 0..10 {
            let mut t = [rng.gen_range(0.0..span), rng.gen_range(0.0..span), rng.gen_range(0.0..span)];
            t.sort_by(f64::total_cmp);
            match check_recursion(&result, t[0], t[1], t[2]) {
                Ok(r) => worst = worst.max(r.relative()),
                Err(e) => return failure(NAME, tol, e),
            }
            cases += 1;
        }
    }
    SuiteResult {
        name: NAME,
        passed: worst <= tol,
        cases,
        worst,
        tolerance: tol,
        detail: format!("{cases} random (t0, t1, t2) triples"),
    }
}
