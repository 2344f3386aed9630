//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p contingent-pricer --test acceptance`.

mod common;

use std::time::{Duration, Instant};

use contingent_pricer::market::{
    detect_arbitrage, price_one_step, solve_sdf, Dichotomy, PayoffMatrix, DEFAULT_TOLERANCE,
};
use contingent_pricer::mortality::SurvivalModel;
use contingent_pricer::tree::{
    check_martingale, price_backward_induction, price_reduced_lottery, NodeId, TreeBuilder,
};
use contingent_pricer::valuation::{
    a_bar, check_recursion, die_survive_tree, max_deviation, solve_backward_ode, solve_net_premium_rate,
    value_annuity_ode, value_quadrature, value_whole_life_ode, value_whole_life_quadrature, A_bar,
    ForceOfInterest, Schedule, ValuationRequest,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Substitutes a witness back into the market; returns the worst violation.
fn witness_violation(market: &PayoffMatrix, verdict: &Dichotomy) -> f64 {
    let rows = market.entries().to_rows();
    let costs = market.costs();
    match verdict {
        Dichotomy::Sdf(sdf) => {
            let residual = rows
                .iter()
                .zip(costs)
                .map(|(r, c)| (dot(r, &sdf.values) - c).abs())
                .fold(0.0, f64::max);
            let negativity = sdf.values.iter().fold(0.0_f64, |w, &v| w.max(-v));
            residual.max(negativity)
        }
        Dichotomy::Arbitrage(cert) => {
            let cost = dot(&cert.weights, costs);
            let payoffs: Vec<f64> = (0..market.states())
                .map(|k| cert.weights.iter().zip(&rows).map(|(t, r)| t * r[k]).sum())
                .collect();
            let negativity = payoffs.iter().fold(0.0_f64, |w, &p| w.max(-p));
            let strict = cost < -1e-7 || payoffs.iter().any(|&p| p > 1e-7);
            let mut worst = cost.max(0.0).max(negativity);
            if !strict {
                worst = f64::INFINITY;
            }
            worst
        }
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut sdf, mut arb, mut worst) = (0, 0, 0.0_f64);
    for i in 0..1000 {
        let (m, n) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
        let market = common::random_market(&mut rng, m, n);
        let verdict = detect_arbitrage(&market, DEFAULT_TOLERANCE).map_err(|e| format!("market {i}: {e}"))?;
        match verdict {
            Dichotomy::Sdf(_) => sdf += 1,
            Dichotomy::Arbitrage(_) => arb += 1,
        }
        worst = worst.max(witness_violation(&market, &verdict));
    }
    let mut mismatches = 0;
    let mut lattice_conflicts = 0;
    let mut lattice_hits = 0;
    for _ in 0..100 {
        let (m, n) = (rng.gen_range(1..=5), rng.gen_range(1..=3));
        let market = common::random_market(&mut rng, m, n);
        let verdict = detect_arbitrage(&market, DEFAULT_TOLERANCE).map_err(|e| e.to_string())?;
        let is_arb = matches!(verdict, Dichotomy::Arbitrage(_));
        if is_arb == common::brute_force_no_arbitrage(&market, 1e-9) {
            mismatches += 1;
        }
        if common::lattice_arbitrage(&market, 4, 1e-6).is_some() {
            lattice_hits += 1;
            if !is_arb {
                lattice_conflicts += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-7 && mismatches == 0 && lattice_conflicts == 0 && elapsed <= Duration::from_secs(10),
        format!(
            "1000 markets ({sdf} sdf, {arb} arbitrage), worst back-substitution {worst:.1e}; \
             100 markets n<=3: {mismatches} oracle mismatches, lattice found {lattice_hits} arbitrages \
             with {lattice_conflicts} conflicts; {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut fixtures = vec![
        PayoffMatrix::new(vec![vec![2.0, 0.5], vec![1.0, 1.0]], vec![1.0, 1.0]).unwrap(),
        PayoffMatrix::new(vec![vec![1.05]], vec![1.0]).unwrap(),
        PayoffMatrix::new(vec![vec![1.0, 1.0]], vec![1.0]).unwrap(),
        PayoffMatrix::new(vec![vec![2.0, 0.5], vec![4.0, 1.0], vec![6.0, 1.5]], vec![1.0, 2.0, 3.0]).unwrap(),
        PayoffMatrix::with_risk_free(0.05, vec![vec![1.2, 0.9, 0.8]], vec![0.9]).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    while fixtures.len() < 205 {
        let (m, n) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
        let market = common::random_market(&mut rng, m, n);
        if matches!(detect_arbitrage(&market, DEFAULT_TOLERANCE), Ok(Dichotomy::Sdf(_))) {
            fixtures.push(market);
        }
    }
    let mut worst = 0.0_f64;
    for market in &fixtures {
        let sol = solve_sdf(market, DEFAULT_TOLERANCE).map_err(|e| e.to_string())?;
        let zeros = vec![0.0; market.states()];
        for (row, &cost) in market.entries().to_rows().iter().zip(market.costs()) {
            let price = price_one_step(row, &zeros, &sol.sdf).map_err(|e| e.to_string())?;
            worst = worst.max((price - cost).abs() / cost.abs().max(1.0));
        }
    }
    check(
        worst <= 1e-8,
        format!("{} no-arbitrage fixtures, worst relative pricing error {worst:.1e}", fixtures.len()),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst, mut nodes) = (0.0_f64, 0);
    for _ in 0..200 {
        let (depth, dividends) = (rng.gen_range(1..=4), rng.gen_bool(0.7));
        let tree = common::random_tree(&mut rng, depth, 3, dividends);
        let backward = price_backward_induction(&tree).map_err(|e| e.to_string())?;
        for (i, &b) in backward.iter().enumerate() {
            let lottery = price_reduced_lottery(&tree, NodeId(i)).map_err(|e| e.to_string())?;
            let scale = b.abs().max(lottery.abs());
            if scale > 0.0 {
                worst = worst.max((lottery - b).abs() / scale);
            }
            nodes += 1;
        }
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-10 && elapsed <= Duration::from_secs(5),
        format!(
            "200 trees, {nodes} nodes, worst relative gap {worst:.1e}; {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0_f64;
    let mut all_martingale = true;
    for _ in 0..100 {
        let depth = rng.gen_range(0..=4);
        let tree = common::random_tree(&mut rng, depth, 3, false);
        let prices = price_backward_induction(&tree).map_err(|e| e.to_string())?;
        let report = check_martingale(&tree, &prices).map_err(|e| e.to_string())?;
        worst = worst.max(report.max_abs_residual);
        all_martingale &= report.verdict == contingent_pricer::tree::MartingaleVerdict::Martingale;
    }

    let step = 1.0 / 1.05;
    let mut builder = TreeBuilder::new();
    let first = builder.child(builder.root(), 1.0, step);
    builder.set_dividend(first, 1.0);
    let second = builder.child(first, 1.0, step);
    builder.set_price(second, 0.0);
    let tree = builder.build().map_err(|e| e.to_string())?;
    let prices = price_backward_induction(&tree).map_err(|e| e.to_string())?;
    let report = check_martingale(&tree, &prices).map_err(|e| e.to_string())?;
    let root = report.residual_at(tree.root()).unwrap_or(f64::NAN);
    let expected = 1.0 / 1.05;
    let not_martingale = report.verdict == contingent_pricer::tree::MartingaleVerdict::NotMartingale;
    check(
        worst <= 1e-12 && all_martingale && (root - expected).abs() <= 1e-10 && not_martingale,
        format!(
            "100 zero-dividend trees, worst residual {worst:.1e}; dividend chain root residual {root:.12} \
             (expected {expected:.12})"
        ),
    )
}

fn criterion_5() -> Outcome {
    let constant = SurvivalModel::constant_force(0.04).unwrap();
    let de_moivre = SurvivalModel::de_moivre(100.0).unwrap();
    let big_a = A_bar(&constant, 40.0, 0.06).map_err(|e| e.to_string())?;
    let small_a = a_bar(&constant, 40.0, 0.06).map_err(|e| e.to_string())?;
    let dm = A_bar(&de_moivre, 90.0, 0.05).map_err(|e| e.to_string())?;
    // Uniform death density 1/10 on [0, 10]: ∫ e^{−0.05t}/10 dt.
    let dm_oracle = (1.0 - (-0.5f64).exp()) / 0.5;
    let dm_ode = value_whole_life_ode(
        &ValuationRequest::whole_life(de_moivre, 90.0, ForceOfInterest::Constant(0.05), Schedule::Constant(1.0)),
        1.0 / 256.0,
    )
    .map_err(|e| e.to_string())?
    .p0();
    check(
        (big_a - 0.4).abs() <= 1e-8
            && (small_a - 10.0).abs() <= 1e-6
            && (dm - 0.7869387).abs() <= 1e-6
            && (dm - dm_oracle).abs() <= 1e-10
            && (dm_ode - 0.7869387).abs() <= 1e-6,
        format!("constant: A={big_a:.12} a={small_a:.10}; de Moivre n=10: A={dm:.12} (ODE {dm_ode:.12})"),
    )
}

fn criterion_6() -> Outcome {
    let mut worst = 0.0_f64;
    let mut count = 0;
    for (model, x) in common::model_fixtures() {
        for delta in [0.0, 0.01, 0.03, 0.05, 0.1] {
            let big = A_bar(&model, x, delta).map_err(|e| e.to_string())?;
            let small = a_bar(&model, x, delta).map_err(|e| e.to_string())?;
            worst = worst.max((big + delta * small - 1.0).abs());
            count += 1;
        }
    }
    check(worst <= 1e-8, format!("{count} (model, δ) pairs, worst |A + δa − 1| = {worst:.1e}"))
}

fn life_requests() -> Vec<(String, ValuationRequest)> {
    let foi = ForceOfInterest::Constant(0.05);
    common::model_fixtures()
        .into_iter()
        .flat_map(|(model, x)| {
            let name = model.kind();
            [
                (
                    format!("{name} whole life"),
                    ValuationRequest::whole_life(model.clone(), x, foi.clone(), Schedule::Constant(1.0)),
                ),
                (
                    format!("{name} annuity"),
                    ValuationRequest::annuity(model, x, foi.clone(), Schedule::Constant(1.0)),
                ),
            ]
        })
        .collect()
}

fn criterion_7() -> Outcome {
    let mut worst = 0.0_f64;
    let mut worst_ratio = f64::INFINITY;
    for (name, req) in life_requests() {
        let fine = if matches!(req.contract, contingent_pricer::valuation::Contract::WholeLife { .. }) {
            value_whole_life_ode(&req, 1.0 / 256.0)
        } else {
            value_annuity_ode(&req, 1.0 / 256.0)
        }
        .map_err(|e| format!("{name}: {e}"))?;
        worst = worst.max(fine.method_deviation().unwrap_or(f64::INFINITY));
        let deviation = |h: f64| -> Result<f64, String> {
            let ode = solve_backward_ode(&req, h).map_err(|e| e.to_string())?;
            let quad = value_quadrature(&req.clone().with_grid_step(h)).map_err(|e| e.to_string())?;
            max_deviation(&ode, &quad).map_err(|e| e.to_string())
        };
        worst_ratio = worst_ratio.min(deviation(0.25)? / deviation(0.0625)?);
    }
    check(
        worst <= 1e-6 && worst_ratio >= 8.0,
        format!(
            "8 fixtures, worst deviation at 1/256 {worst:.1e}; smallest shrink factor 1/4 -> 1/16 {worst_ratio:.0}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut fixtures = life_requests();
    fixtures.push((
        "annuity-certain".into(),
        ValuationRequest::risk_free(Schedule::Constant(1.0), 0.0, ForceOfInterest::Constant(0.05), 10.0),
    ));
    fixtures.push((
        "zero-coupon".into(),
        ValuationRequest::risk_free(Schedule::Constant(0.0), 1.0, ForceOfInterest::Constant(0.05), 10.0),
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0_f64;
    for (name, req) in &fixtures {
        let result = value_quadrature(req).map_err(|e| format!("{name}: {e}"))?;
        let horizon = result.horizon();
        for _ in 0..50 {
            let mut t: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..=horizon)).collect();
            t.sort_by(f64::total_cmp);
            let res = check_recursion(&result, t[0], t[1], t[2]).map_err(|e| format!("{name}: {e}"))?;
            worst = worst.max(res.relative());
        }
    }
    check(
        worst <= 1e-8,
        format!("{} fixtures x 50 triples, worst relative residual {worst:.1e}", fixtures.len()),
    )
}

fn criterion_9() -> Outcome {
    let fixtures = [
        (
            "constant force, 5-year term",
            ValuationRequest::whole_life(
                SurvivalModel::constant_force(0.04).unwrap(),
                40.0,
                ForceOfInterest::Constant(0.06),
                Schedule::Constant(1.0),
            )
            .with_term(5.0),
        ),
        (
            "de Moivre, omega - x = 5",
            ValuationRequest::whole_life(
                SurvivalModel::de_moivre(100.0).unwrap(),
                95.0,
                ForceOfInterest::Constant(0.05),
                Schedule::Constant(1.0),
            ),
        ),
    ];
    let mut ok = true;
    let mut details = Vec::new();
    for (name, req) in fixtures {
        let target = value_whole_life_ode(&req, 1.0 / 256.0).map_err(|e| e.to_string())?.p0();
        let mut errors = Vec::new();
        for k in 4..=7 {
            let tree = die_survive_tree(&req, 0.5f64.powi(k)).map_err(|e| e.to_string())?;
            let p = price_backward_induction(&tree).map_err(|e| e.to_string())?[0];
            errors.push((p - target).abs());
        }
        let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
        // First order: each halving of Δt halves the error.
        ok &= ratios.iter().all(|r| (r - 2.0).abs() <= 0.1);
        details.push(format!(
            "{name}: errors {} ratios {}",
            errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(" "),
            ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(" ")
        ));
    }
    check(ok, details.join("; "))
}

fn criterion_10() -> Outcome {
    let model = SurvivalModel::constant_force(0.04).unwrap();
    let rho = solve_net_premium_rate(&model, 40.0, 0.06, &Schedule::Constant(1.0)).map_err(|e| e.to_string())?;
    let quad = value_whole_life_quadrature(&ValuationRequest::whole_life(
        model,
        40.0,
        ForceOfInterest::Constant(0.06),
        Schedule::Constant(1.0),
    ))
    .map_err(|e| e.to_string())?;
    check(
        (rho - 0.04).abs() <= 1e-8 && (quad.p0() - 0.4).abs() <= 1e-8,
        format!("rho = {rho:.12}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("farkas dichotomy", criterion_1),
        ("sdf pricing consistency", criterion_2),
        ("reduced lottery = backward induction", criterion_3),
        ("martingale characterization", criterion_4),
        ("analytic valuation oracles", criterion_5),
        ("A + delta a = 1", criterion_6),
        ("ode vs quadrature agreement", criterion_7),
        ("recursion property", criterion_8),
        ("die/survive tree limit", criterion_9),
        ("premium solver", criterion_10),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (status, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("[{status}] criterion {:>2} {name}: {detail}", i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
