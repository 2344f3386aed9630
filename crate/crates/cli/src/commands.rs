use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use contingent_pricer::market::{
    check_completeness, detect_arbitrage, extract_risk_neutral, solve_sdf, Dichotomy, PayoffMatrix,
    DEFAULT_RANK_TOLERANCE, DEFAULT_TOLERANCE,
};
use contingent_pricer::tree::{
    check_martingale, compute_pricing_kernel, price_backward_induction, NodeId, price_reduced_lottery, UncertaintyTree,
};
use contingent_pricer::valuation::{
    max_deviation, present_value, solve_backward_ode, value_quadrature, AGREEMENT_TOLERANCE,
};
use log::{debug, info};
use serde_json::json;

use crate::config::ValuationConfig;
use crate::Format;

/// What a command concluded; mapped to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Failed,
    Arbitrage,
    Disagreement,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::Failed => 1,
            Status::Arbitrage => 2,
            Status::Disagreement => 3,
        }
    }
}

/// Main output plus an optional side report (the valuation summary).
pub struct Report {
    pub status: Status,
    pub body: Vec<u8>,
    pub summary: Option<Vec<u8>>,
}

fn read_nonempty(path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim().is_empty() {
        bail!("{}: empty input", path.display());
    }
    Ok(text)
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

pub fn check_market(input: &Path, tolerance: Option<f64>) -> Result<Report> {
    let text = read_nonempty(input)?;
    let market = PayoffMatrix::from_csv_str(&text).with_context(|| format!("{}", input.display()))?;
    let tol = tolerance.unwrap_or(DEFAULT_TOLERANCE);
    info!("market: {} assets, {} states", market.assets(), market.states());
    let complete = check_completeness(&market, DEFAULT_RANK_TOLERANCE);
    let (status, report) = match detect_arbitrage(&market, tol)? {
        Dichotomy::Arbitrage(cert) => (
            Status::Arbitrage,
            json!({
                "verdict": "arbitrage",
                "assets": market.asset_ids(),
                "witness": cert.weights,
                "residuals": { "cost": cert.cost, "state_payoffs": cert.state_payoffs },
                "complete": complete,
            }),
        ),
        Dichotomy::Sdf(_) => {
            let solution = solve_sdf(&market, tol)?;
            let m = &solution.sdf.values;
            let per_asset: Vec<f64> = (0..market.assets())
                .map(|j| {
                    let row = market.entries().row(j);
                    row.iter().zip(m).map(|(a, v)| a * v).sum::<f64>() - market.costs()[j]
                })
                .collect();
            let mut report = json!({
                "verdict": "sdf",
                "assets": market.asset_ids(),
                "witness": m,
                "residuals": { "pricing": per_asset, "max_abs": solution.residual },
                "complete": complete,
                "unique": solution.unique,
            });
            if let Some(r) = market.risk_free_rate() {
                let rn = extract_risk_neutral(&solution.sdf, r)?;
                report["risk_neutral"] = json!({ "probabilities": rn.probabilities, "discount": rn.discount });
            }
            (Status::Ok, report)
        }
    };
    Ok(Report {
        status,
        body: crate::output::json(&report)?,
        summary: None,
    })
}

pub fn price_tree(input: &Path, format: Format) -> Result<Report> {
    let text = read_nonempty(input)?;
    let tree = UncertaintyTree::from_json_str(&text).with_context(|| format!("{}", input.display()))?;
    info!("tree: {} nodes, horizon {}", tree.len(), tree.horizon());
    let kernel = compute_pricing_kernel(&tree)?;
    let prices = price_backward_induction(&tree)?;
    let lottery = (0..tree.len())
        .map(|i| price_reduced_lottery(&tree, NodeId(i)))
        .collect::<Result<Vec<f64>, _>>()?;
    let martingale = check_martingale(&tree, &prices)?;

    let body = match format {
        Format::Csv => {
            let mut s = String::from("node,time,kernel,price,lottery_price\n");
            for (i, node) in tree.nodes().iter().enumerate() {
                writeln!(s, "{},{},{},{},{}", node.label, node.time, kernel.values[i], prices[i], lottery[i])?;
            }
            s.into_bytes()
        }
        Format::Json => {
            let nodes: Vec<_> = tree
                .nodes()
                .iter()
                .enumerate()
                .map(|(i, n)| {
                    json!({
                        "node": n.label, "time": n.time, "kernel": kernel.values[i],
                        "price": prices[i], "lottery_price": lottery[i],
                    })
                })
                .collect();
            crate::output::json(&json!({
                "nodes": nodes,
                "martingale": {
                    "verdict": martingale.verdict,
                    "max_abs_residual": martingale.max_abs_residual,
                    "scale": martingale.scale,
                },
            }))?
        }
    };
    Ok(Report {
        status: Status::Ok,
        body,
        summary: None,
    })
}

pub fn value(input: &Path, grid_step: Option<f64>, tolerance: Option<f64>, format: Format) -> Result<Report> {
    let config = ValuationConfig::load(input)?;
    let request = config.request(base_dir(input), grid_step)?;
    let quad = value_quadrature(&request)?;
    let ode = solve_backward_ode(&request, quad.grid_step())?;
    let deviation = max_deviation(&ode, &quad)?;
    let scale = quad.prices().iter().fold(1.0_f64, |m, p| m.max(p.abs()));
    let allowed = tolerance.unwrap_or(AGREEMENT_TOLERANCE) * scale;
    let agree = deviation <= allowed;
    debug!("max deviation {deviation:e}, allowed {allowed:e}");

    let summary = json!({
        "contract": request.contract.kind(),
        "horizon": quad.horizon(),
        "grid_step": quad.grid_step(),
        "points": quad.times().len(),
        "p0": { "quadrature": quad.p0(), "ode": ode.p0() },
        "max_deviation": deviation,
        "tolerance": allowed,
        "methods_agree": agree,
        "quadrature_panels": quad.evaluations(),
        "ode_steps": ode.evaluations(),
    });
    let status = if agree { Status::Ok } else { Status::Disagreement };
    Ok(match format {
        Format::Csv => {
            let mut s = String::from("t,price\n");
            for (t, p) in quad.path() {
                writeln!(s, "{t},{p}")?;
            }
            Report {
                status,
                body: s.into_bytes(),
                summary: Some(crate::output::json(&summary)?),
            }
        }
        Format::Json => {
            let path: Vec<[f64; 2]> = quad.path().map(|(t, p)| [t, p]).collect();
            Report {
                status,
                body: crate::output::json(&json!({ "summary": summary, "path": path }))?,
                summary: None,
            }
        }
    })
}

pub fn premium(input: &Path, format: Format) -> Result<Report> {
    let config = ValuationConfig::load(input)?;
    let (insurance, annuity) = config.premium_requests(base_dir(input))?;
    let benefit_epv = present_value(&insurance)?;
    let annuity_epv = present_value(&annuity)?;
    if !(annuity_epv > 0.0) {
        bail!("annuity value {annuity_epv} is not positive; premium rate undefined");
    }
    let rate = benefit_epv / annuity_epv;
    let body = match format {
        Format::Csv => format!("premium_rate,benefit_epv,annuity_epv\n{rate},{benefit_epv},{annuity_epv}\n").into_bytes(),
        Format::Json => crate::output::json(&json!({
            "premium_rate": rate,
            "benefit_epv": benefit_epv,
            "annuity_epv": annuity_epv,
        }))?,
    };
    Ok(Report {
        status: Status::Ok,
        body,
        summary: None,
    })
}
