//! Fixtures and independent oracles shared by the integration tests.

#![allow(dead_code)]

use contingent_pricer::market::PayoffMatrix;
use contingent_pricer::mortality::{LifeTable, SurvivalModel};
use contingent_pricer::tree::{TreeBuilder, UncertaintyTree};
use rand::Rng;

/// `m × n` market with entries in `[−2, 2]`. Half the time costs are drawn
/// in `[−1, 2]`; otherwise they are `A m` for a random positive `m`, scaled
/// into the same range, so both verdicts are well represented.
pub fn random_market<R: Rng>(rng: &mut R, m: usize, n: usize) -> PayoffMatrix {
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.gen_range(-2.0..=2.0)).collect())
        .collect();
    let costs: Vec<f64> = if rng.gen_bool(0.5) {
        (0..m).map(|_| rng.gen_range(-1.0..=2.0)).collect()
    } else {
        let state_prices: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let b: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().zip(&state_prices).map(|(a, s)| a * s).sum())
            .collect();
        let worst = b.iter().fold(1e-12_f64, |w, &v| w.max(-v).max(v / 2.0));
        let scale = (1.0 / worst).min(1.0);
        b.iter().map(|v| v * scale).collect()
    };
    PayoffMatrix::new(rows, costs).unwrap()
}

/// Dense Gaussian elimination with partial pivoting on the normal
/// equations; `None` if the columns are numerically dependent.
fn least_squares(cols: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let k = cols.len();
    let mut g = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            g[i][j] = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
        }
        g[i][k] = cols[i].iter().zip(rhs).map(|(a, b)| a * b).sum();
    }
    let scale = g.iter().flat_map(|r| r[..k].iter()).fold(0.0_f64, |m, v| m.max(v.abs()));
    for c in 0..k {
        let p = (c..k).max_by(|&a, &b| g[a][c].abs().total_cmp(&g[b][c].abs()))?;
        if g[p][c].abs() <= 1e-12 * scale.max(1e-300) {
            return None;
        }
        g.swap(c, p);
        let pivot = g[c].clone();
        for (r, row) in g.iter_mut().enumerate() {
            if r != c {
                let f = row[c] / pivot[c];
                for (x, p) in row[c..].iter_mut().zip(&pivot[c..]) {
                    *x -= f * p;
                }
            }
        }
    }
    Some((0..k).map(|i| g[i][k] / g[i][i]).collect())
}

/// Basic feasible solutions of `{M x = c, x ≥ 0}`, by trying every column
/// subset (a feasible set that is nonempty has one).
pub fn vertices(matrix: &[Vec<f64>], rhs: &[f64], tol: f64) -> Vec<Vec<f64>> {
    let n = matrix[0].len();
    let mut found = Vec::new();
    for mask in 0u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|k| mask & (1 << k) != 0).collect();
        let cols: Vec<Vec<f64>> = support.iter().map(|&k| matrix.iter().map(|r| r[k]).collect()).collect();
        let x_s = if support.is_empty() { Some(vec![]) } else { least_squares(&cols, rhs) };
        let Some(x_s) = x_s else { continue };
        let mut x = vec![0.0; n];
        for (&k, v) in support.iter().zip(&x_s) {
            x[k] = *v;
        }
        let residual = matrix
            .iter()
            .zip(rhs)
            .map(|(r, c)| (r.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() - c).abs())
            .fold(0.0, f64::max);
        if residual <= tol && x.iter().all(|&v| v >= -tol) {
            found.push(x);
        }
    }
    found
}

/// True iff the market admits no arbitrage, i.e. some strictly positive
/// state-price vector prices every asset. State `k` can carry positive mass
/// iff some vertex or some extreme ray of the feasible set is positive there.
pub fn brute_force_no_arbitrage(market: &PayoffMatrix, tol: f64) -> bool {
    let a = market.entries().to_rows();
    let b = market.costs().to_vec();
    let n = market.states();
    let points = vertices(&a, &b, tol);
    if points.is_empty() {
        return false;
    }
    let mut cone = a.clone();
    cone.push(vec![1.0; n]);
    let mut unit = vec![0.0; a.len()];
    unit.push(1.0);
    let rays = vertices(&cone, &unit, tol);
    (0..n).all(|k| points.iter().chain(&rays).any(|v| v[k] > tol))
}

/// Searches `θ ∈ {−1, −1+h, …, 1}^m` for a portfolio that is an arbitrage by
/// a clear margin. Finding one proves arbitrage; not finding one proves
/// nothing.
pub fn lattice_arbitrage(market: &PayoffMatrix, steps: i32, margin: f64) -> Option<Vec<f64>> {
    let m = market.assets();
    let a = market.entries().to_rows();
    let b = market.costs();
    let mut idx = vec![-steps; m];
    loop {
        let theta: Vec<f64> = idx.iter().map(|&i| i as f64 / steps as f64).collect();
        let cost: f64 = theta.iter().zip(b).map(|(t, c)| t * c).sum();
        let payoffs: Vec<f64> = (0..market.states())
            .map(|k| theta.iter().zip(&a).map(|(t, r)| t * r[k]).sum())
            .collect();
        if cost <= 0.0
            && payoffs.iter().all(|&p| p >= 0.0)
            && (cost < -margin || payoffs.iter().any(|&p| p > margin))
        {
            return Some(theta);
        }
        let mut j = 0;
        loop {
            if j == m {
                return None;
            }
            idx[j] += 1;
            if idx[j] <= steps {
                break;
            }
            idx[j] = -steps;
            j += 1;
        }
    }
}

/// Leveled tree of the given depth, 1 to `max_branching` children per node,
/// sdf steps in `[0.8, 1.1]`, leaf prices in `[0, 2]`. Dividends are drawn
/// in `[0, 1]` when `dividends` is set, else zero.
pub fn random_tree<R: Rng>(rng: &mut R, depth: usize, max_branching: usize, dividends: bool) -> UncertaintyTree {
    let mut builder = TreeBuilder::new();
    let mut frontier = vec![builder.root()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for parent in frontier {
            let k = rng.gen_range(1..=max_branching);
            let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            let mut used = 0.0;
            for (i, w) in weights.iter().enumerate() {
                let prob = if i + 1 == k { 1.0 - used } else { w / total };
                used += prob;
                let child = builder.child(parent, prob, rng.gen_range(0.8..1.1));
                if dividends {
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
    builder.build().unwrap()
}

/// A synthetic table from age 60 with `ω = 100`.
pub fn sample_life_table() -> LifeTable {
    let survivors = (0..=40)
        .map(|k| {
            if k == 40 {
                0.0
            } else {
                100_000.0 * (1.0 - (k as f64 / 40.0).powf(1.7))
            }
        })
        .collect();
    LifeTable::new(60, survivors).unwrap()
}

/// One model of each kind, with an issue age that suits it.
pub fn model_fixtures() -> Vec<(SurvivalModel, f64)> {
    vec![
        (SurvivalModel::constant_force(0.04).unwrap(), 40.0),
        (SurvivalModel::de_moivre(100.0).unwrap(), 65.3),
        (SurvivalModel::gompertz(0.0003, 1.07).unwrap(), 50.0),
        (SurvivalModel::LifeTable(sample_life_table()), 65.3),
    ]
}
