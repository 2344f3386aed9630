//! One-step market: payoff matrices, arbitrage detection, discount factors.
//!
//! A market with `m` assets and `n` states is described by its payoff matrix
//! `A` (row `j` holds price plus dividend of asset `j` in each state next
//! period) and the cost vector `b` of today's prices. Exactly one of the
//! following holds: a nonnegative `m` with `A m = b` exists, or some
//! portfolio `θ` has `Aᵀθ ≥ 0` and `bᵀθ < 0`. [`detect_arbitrage`] decides
//! which with a phase-one simplex and also rejects zero-cost portfolios whose
//! payoff is nonnegative and nonzero.

use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::error::{ensure_finite, PricingError, Result};
use crate::linalg::{self, dot, norm_inf, Matrix};
use crate::simplex::{phase_one, PhaseOne};

/// Default absolute feasibility tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
/// Relative pivot threshold for numerical rank.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-10;
/// Asset id marking the risk-free row in CSV input.
pub const RISK_FREE_ID: &str = "RF";

/// Payoffs of `m` assets across `n` states plus today's cost of each asset.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix {
    entries: Matrix,
    costs: Vec<f64>,
    risk_free_rate: Option<f64>,
    asset_ids: Vec<String>,
}

impl PayoffMatrix {
    pub fn new(rows: Vec<Vec<f64>>, costs: Vec<f64>) -> Result<Self> {
        let entries = Matrix::from_rows(&rows)
            .ok_or_else(|| PricingError::InvalidMarket("rows have different lengths".into()))?;
        if entries.rows() == 0 || entries.cols() == 0 {
            return Err(PricingError::InvalidMarket(
                "need at least one asset and one state".into(),
            ));
        }
        if costs.len() != entries.rows() {
            return Err(PricingError::DimensionMismatch {
                expected: entries.rows(),
                actual: costs.len(),
            });
        }
        ensure_finite(entries.as_slice(), "payoff")?;
        ensure_finite(&costs, "cost")?;
        let asset_ids = (1..=entries.rows()).map(|j| format!("asset{j}")).collect();
        Ok(PayoffMatrix {
            entries,
            costs,
            risk_free_rate: None,
            asset_ids,
        })
    }

    /// Prepends a risk-free row paying `1 + rate` in every state at cost 1.
    pub fn with_risk_free(rate: f64, risky_rows: Vec<Vec<f64>>, risky_costs: Vec<f64>) -> Result<Self> {
        if !rate.is_finite() || rate <= -1.0 {
            return Err(PricingError::InvalidMarket(format!(
                "risk-free rate must exceed -1, got {rate}"
            )));
        }
        let n = match risky_rows.first() {
            Some(r) => r.len(),
            None => {
                return Err(PricingError::InvalidMarket(
                    "state count unknown without a risky asset; use PayoffMatrix::new".into(),
                ))
            }
        };
        let mut rows = Vec::with_capacity(risky_rows.len() + 1);
        rows.push(vec![1.0 + rate; n]);
        rows.extend(risky_rows);
        let mut costs = Vec::with_capacity(risky_costs.len() + 1);
        costs.push(1.0);
        costs.extend(risky_costs);
        let mut market = PayoffMatrix::new(rows, costs)?;
        market.risk_free_rate = Some(rate);
        market.asset_ids[0] = RISK_FREE_ID.to_string();
        Ok(market)
    }

    pub fn with_asset_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.assets() {
            return Err(PricingError::DimensionMismatch {
                expected: self.assets(),
                actual: ids.len(),
            });
        }
        self.asset_ids = ids;
        Ok(self)
    }

    /// Parses `asset,s1,…,sn,cost` CSV. A row with id `RF` is the risk-free
    /// asset; it must pay the same amount in every state and cost 1.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers().map_err(csv_error)?.clone();
        if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
            return Err(PricingError::Parse {
                line: 1,
                message: "empty input; expected header asset,s1,...,sn,cost".into(),
            });
        }
        if header.len() < 3 || &header[0] != "asset" || &header[header.len() - 1] != "cost" {
            return Err(PricingError::Parse {
                line: 1,
                message: "header must be asset,s1,...,sn,cost".into(),
            });
        }
        let n = header.len() - 2;

        let mut ids = Vec::new();
        let mut rows = Vec::new();
        let mut costs = Vec::new();
        let mut rf: Option<(usize, usize)> = None;
        for record in rdr.records() {
            let record = record.map_err(csv_error)?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.len() != n + 2 {
                return Err(PricingError::Parse {
                    line,
                    message: format!("expected {} fields, found {}", n + 2, record.len()),
                });
            }
            let parse = |field: &str| -> Result<f64> {
                let v: f64 = field.parse().map_err(|_| PricingError::Parse {
                    line,
                    message: format!("not a number: {field:?}"),
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(PricingError::Parse {
                        line,
                        message: format!("non-finite value {field:?}"),
                    })
                }
            };
            let id = record[0].to_string();
            let payoffs = (1..=n).map(|k| parse(&record[k])).collect::<Result<Vec<_>>>()?;
            let cost = parse(&record[n + 1])?;
            if id == RISK_FREE_ID {
                if rf.is_some() {
                    return Err(PricingError::Parse {
                        line,
                        message: "duplicate risk-free row".into(),
                    });
                }
                rf = Some((rows.len(), line));
            }
            ids.push(id);
            rows.push(payoffs);
            costs.push(cost);
        }
        if rows.is_empty() {
            return Err(PricingError::Parse {
                line: 2,
                message: "no asset rows".into(),
            });
        }

        let mut risk_free_rate = None;
        if let Some((idx, line)) = rf {
            let row = &rows[idx];
            let gross = row[0];
            if row.iter().any(|&v| (v - gross).abs() > 1e-12 * gross.abs().max(1.0)) {
                return Err(PricingError::Parse {
                    line,
                    message: "risk-free row must pay the same amount in every state".into(),
                });
            }
            if (costs[idx] - 1.0).abs() > 1e-12 {
                return Err(PricingError::Parse {
                    line,
                    message: "risk-free row must cost 1".into(),
                });
            }
            if gross <= 0.0 {
                return Err(PricingError::Parse {
                    line,
                    message: "risk-free gross return must be positive".into(),
                });
            }
            risk_free_rate = Some(gross - 1.0);
            let r = rows.remove(idx);
            rows.insert(0, r);
            let c = costs.remove(idx);
            costs.insert(0, c);
            let id = ids.remove(idx);
            ids.insert(0, id);
        }

        let mut market = PayoffMatrix::new(rows, costs)?;
        market.risk_free_rate = risk_free_rate;
        market.asset_ids = ids;
        Ok(market)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        Self::from_csv_reader(text.as_bytes())
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn asset_ids(&self) -> &[String] {
        &self.asset_ids
    }

    /// Number of assets `m`.
    pub fn assets(&self) -> usize {
        self.entries.rows()
    }

    /// Number of states `n`.
    pub fn states(&self) -> usize {
        self.entries.cols()
    }

    pub fn has_risk_free(&self) -> bool {
        self.risk_free_rate.is_some()
    }

    pub fn risk_free_rate(&self) -> Option<f64> {
        self.risk_free_rate
    }

    /// `‖A m − b‖∞`
    pub fn pricing_residual(&self, sdf: &[f64]) -> f64 {
        let priced = self.entries.mul_vec(sdf);
        priced
            .iter()
            .zip(&self.costs)
            .fold(0.0, |m, (p, c)| m.max((p - c).abs()))
    }

    /// Scales asset `j`'s payoffs and cost by `factor`.
    pub fn scale_asset(&self, j: usize, factor: f64) -> Self {
        let mut out = self.clone();
        for v in out.entries.row_mut(j) {
            *v *= factor;
        }
        out.costs[j] *= factor;
        out
    }
}

fn csv_error(err: csv::Error) -> PricingError {
    let line = err.position().map_or(0, |p| p.line() as usize);
    PricingError::Parse {
        line,
        message: err.to_string(),
    }
}

/// Risk-neutral split of a discount factor: `m_k = π_k · v_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Factorization {
    pub state_probabilities: Vec<f64>,
    pub discount_factors: Vec<f64>,
}

/// Nonnegative state prices `m` with `A m = b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdfVector {
    pub values: Vec<f64>,
    pub factorization: Option<Factorization>,
}

impl SdfVector {
    pub fn new(values: Vec<f64>) -> Self {
        SdfVector {
            values,
            factorization: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A portfolio with nonpositive cost and nonnegative payoff in every state,
/// strict somewhere.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArbitrageCertificate {
    pub weights: Vec<f64>,
    pub cost: f64,
    pub state_payoffs: Vec<f64>,
}

impl ArbitrageCertificate {
    fn from_weights(market: &PayoffMatrix, mut weights: Vec<f64>) -> Self {
        let scale = norm_inf(&weights);
        if scale > 0.0 {
            weights.iter_mut().for_each(|w| *w /= scale);
        }
        let cost = dot(&weights, market.costs());
        let state_payoffs = market.entries().tr_mul_vec(&weights);
        ArbitrageCertificate {
            weights,
            cost,
            state_payoffs,
        }
    }

    /// Checks the arbitrage inequalities at tolerance `eps`.
    pub fn is_valid(&self, eps: f64) -> bool {
        self.cost <= eps
            && self.state_payoffs.iter().all(|&p| p >= -eps)
            && (self.cost < -eps || self.state_payoffs.iter().any(|&p| p > eps))
    }

    /// Re-evaluates the certificate against `market`.
    pub fn verify(&self, market: &PayoffMatrix, eps: f64) -> bool {
        ArbitrageCertificate::from_weights(market, self.weights.clone()).is_valid(eps)
    }
}

/// Outcome of the Farkas alternative.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Dichotomy {
    Arbitrage(ArbitrageCertificate),
    Sdf(SdfVector),
}

fn tolerance_scale(market: &PayoffMatrix) -> f64 {
    1.0 + market.entries().norm_inf().max(norm_inf(market.costs()))
}

/// Decides between an arbitrage portfolio and a nonnegative discount factor.
pub fn detect_arbitrage(market: &PayoffMatrix, tolerance: f64) -> Result<Dichotomy> {
    if !(tolerance > 0.0) || !tolerance.is_finite() {
        return Err(PricingError::InvalidMarket(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    ensure_finite(market.entries().as_slice(), "payoff")?;
    ensure_finite(market.costs(), "cost")?;

    let a = market.entries();
    let b = market.costs();
    let eps = tolerance * tolerance_scale(market);
    let residual_tol = tolerance * (1.0 + norm_inf(b));

    match phase_one(a, b, residual_tol) {
        PhaseOne::Infeasible { y, .. } => {
            let cert = ArbitrageCertificate::from_weights(market, y);
            if cert.cost < -eps && cert.is_valid(eps) {
                Ok(Dichotomy::Arbitrage(cert))
            } else {
                Err(PricingError::DegenerateDichotomy(format!(
                    "phase one infeasible but certificate has cost {:e}",
                    cert.cost
                )))
            }
        }
        PhaseOne::Feasible { x, .. } => {
            let residual = market.pricing_residual(&x);
            if residual > residual_tol {
                return Err(PricingError::DegenerateDichotomy(format!(
                    "phase one feasible but residual {residual:e} exceeds {residual_tol:e}"
                )));
            }
            // With m ≥ 0 pricing every asset, a costless portfolio with
            // nonnegative payoff can only pay in states where m vanishes.
            if x.iter().any(|&v| v <= eps) {
                if let Some(cert) = zero_cost_arbitrage(market, eps)? {
                    return Ok(Dichotomy::Arbitrage(cert));
                }
            }
            Ok(Dichotomy::Sdf(SdfVector::new(x)))
        }
    }
}

/// Searches for `θ` with `Aᵀθ = s ≥ 0`, `Σ s = 1`, `bᵀθ ≤ 0`.
fn zero_cost_arbitrage(market: &PayoffMatrix, eps: f64) -> Result<Option<ArbitrageCertificate>> {
    let (m, n) = (market.assets(), market.states());
    let a = market.entries();
    let b = market.costs();
    // Columns: θ⁺ (m), θ⁻ (m), s (n), w (1).
    let cols = 2 * m + n + 1;
    let mut lp = Matrix::zeros(n + 2, cols);
    for k in 0..n {
        for j in 0..m {
            lp[(k, j)] = a[(j, k)];
            lp[(k, m + j)] = -a[(j, k)];
        }
        lp[(k, 2 * m + k)] = -1.0;
    }
    for k in 0..n {
        lp[(n, 2 * m + k)] = 1.0;
    }
    for j in 0..m {
        lp[(n + 1, j)] = b[j];
        lp[(n + 1, m + j)] = -b[j];
    }
    lp[(n + 1, cols - 1)] = 1.0;
    let mut rhs = vec![0.0; n + 2];
    rhs[n] = 1.0;

    match phase_one(&lp, &rhs, eps) {
        PhaseOne::Infeasible { .. } => Ok(None),
        PhaseOne::Feasible { x, .. } => {
            let weights: Vec<f64> = (0..m).map(|j| x[j] - x[m + j]).collect();
            let cert = ArbitrageCertificate::from_weights(market, weights);
            if cert.is_valid(eps) {
                Ok(Some(cert))
            } else {
                Err(PricingError::DegenerateDichotomy(format!(
                    "costless-payoff search returned cost {:e}, max payoff {:e}",
                    cert.cost,
                    cert.state_payoffs.iter().fold(f64::MIN, |m, v| m.max(*v))
                )))
            }
        }
    }
}

/// Discount factor together with whether it is the only one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdfSolution {
    pub sdf: SdfVector,
    /// True when `A` has full column rank, so the solution is unique.
    pub unique: bool,
    /// `‖A m − b‖∞`
    pub residual: f64,
}

/// Returns a nonnegative discount factor, or [`PricingError::ArbitrageExists`].
///
/// When the market carries a risk-free row the risk-neutral factorization is
/// attached.
pub fn solve_sdf(market: &PayoffMatrix, tolerance: f64) -> Result<SdfSolution> {
    let mut sdf = match detect_arbitrage(market, tolerance)? {
        Dichotomy::Sdf(sdf) => sdf,
        Dichotomy::Arbitrage(_) => return Err(PricingError::ArbitrageExists),
    };
    let unique = check_completeness(market, DEFAULT_RANK_TOLERANCE);
    if unique && market.assets() >= market.states() {
        polish_unique(market, &mut sdf.values);
    }
    if let Some(r) = market.risk_free_rate() {
        let rn = extract_risk_neutral(&sdf, r)?;
        sdf.factorization = Some(Factorization {
            state_probabilities: rn.probabilities,
            discount_factors: vec![rn.discount; market.states()],
        });
    }
    let residual = market.pricing_residual(&sdf.values);
    Ok(SdfSolution {
        sdf,
        unique,
        residual,
    })
}

/// Re-solves a full-column-rank system on a well-conditioned square subset
/// of rows; keeps the simplex answer if that does not reduce the residual.
fn polish_unique(market: &PayoffMatrix, values: &mut Vec<f64>) {
    let n = market.states();
    let a = market.entries();
    // Greedily pick n independent rows.
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    for j in 0..market.assets() {
        let mut trial: Vec<Vec<f64>> = chosen.iter().map(|&r| a.row(r).to_vec()).collect();
        trial.push(a.row(j).to_vec());
        let m = Matrix::from_rows(&trial).expect("rows share width");
        if linalg::rank(&m, DEFAULT_RANK_TOLERANCE) == trial.len() {
            chosen.push(j);
            if chosen.len() == n {
                break;
            }
        }
    }
    if chosen.len() != n {
        return;
    }
    let sub = Matrix::from_rows(&chosen.iter().map(|&r| a.row(r).to_vec()).collect::<Vec<_>>())
        .expect("rows share width");
    let rhs: Vec<f64> = chosen.iter().map(|&r| market.costs()[r]).collect();
    if let Some(x) = linalg::solve_square(&sub, &rhs, 1e-14) {
        if x.iter().all(|&v| v >= 0.0) && market.pricing_residual(&x) <= market.pricing_residual(values) {
            *values = x;
        }
    }
}

/// True iff the payoff matrix has numerical column rank `n`.
pub fn check_completeness(market: &PayoffMatrix, rank_tolerance: f64) -> bool {
    linalg::rank(market.entries(), rank_tolerance) == market.states()
}

/// State probabilities and the one-period discount factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskNeutral {
    pub probabilities: Vec<f64>,
    pub discount: f64,
}

/// Tolerance on `Σ m_k (1 + r) = 1` in [`extract_risk_neutral`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// `π_k = m_k (1 + r)`; fails unless the factors price the risk-free asset.
pub fn extract_risk_neutral(sdf: &SdfVector, risk_free_rate: f64) -> Result<RiskNeutral> {
    ensure_finite(&sdf.values, "sdf")?;
    if !risk_free_rate.is_finite() || risk_free_rate <= -1.0 {
        return Err(PricingError::InvalidMarket(format!(
            "risk-free rate must exceed -1, got {risk_free_rate}"
        )));
    }
    if let Some(i) = sdf.values.iter().position(|&v| v < -NORMALIZATION_TOLERANCE) {
        return Err(PricingError::InvalidMarket(format!(
            "negative discount factor {} in state {i}",
            sdf.values[i]
        )));
    }
    let gross = 1.0 + risk_free_rate;
    let mut probabilities: Vec<f64> = sdf.values.iter().map(|&v| v.max(0.0) * gross).collect();
    let sum: f64 = probabilities.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(PricingError::NotNormalizable { sum });
    }
    probabilities.iter_mut().for_each(|p| *p /= sum);
    Ok(RiskNeutral {
        probabilities,
        discount: 1.0 / gross,
    })
}

/// `Σ_k m_k (p_k + d_k)`
pub fn price_one_step(payoff_next: &[f64], dividend_next: &[f64], sdf: &SdfVector) -> Result<f64> {
    let n = sdf.len();
    for len in [payoff_next.len(), dividend_next.len()] {
        if len != n {
            return Err(PricingError::DimensionMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    Ok(payoff_next
        .iter()
        .zip(dividend_next)
        .zip(&sdf.values)
        .map(|((p, d), m)| m * (p + d))
        .sum())
}
