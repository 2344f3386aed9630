mod common;

use contingent_pricer::tree::{
    check_martingale, compute_pricing_kernel, conditional_expectation, expectation_at_time, price_backward_induction,
    price_reduced_lottery, MartingaleVerdict, NodeId, UncertaintyTree,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tree_from_seed(seed: u64, dividends: bool) -> (UncertaintyTree, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.gen_range(1..=4);
    (common::random_tree(&mut rng, depth, 3, dividends), rng)
}

/// Every root-to-node path product, by brute force over parent links.
fn path_probability(tree: &UncertaintyTree, from: NodeId, to: NodeId) -> f64 {
    let mut prob = 1.0;
    let mut cur = to;
    while cur != from {
        let node = tree.node(cur).unwrap();
        prob *= node.branch_probability;
        match node.parent {
            Some(p) => cur = p,
            None => return 0.0,
        }
    }
    prob
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn reduced_lottery_equals_backward_induction(seed in any::<u64>()) {
        let (tree, _) = tree_from_seed(seed, true);
        let prices = price_backward_induction(&tree).unwrap();
        for (i, &p) in prices.iter().enumerate() {
            let lottery = price_reduced_lottery(&tree, NodeId(i)).unwrap();
            prop_assert!((lottery - p).abs() <= 1e-10 * p.abs().max(lottery.abs()).max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn conditional_expectation_matches_path_enumeration(seed in any::<u64>()) {
        let (tree, mut rng) = tree_from_seed(seed, false);
        let values: Vec<f64> = (0..tree.len()).map(|_| rng.gen_range(-5.0..5.0)).collect();
        for i in 0..tree.len() {
            let at = NodeId(i);
            let direct: f64 = tree
                .leaves()
                .map(|leaf| path_probability(&tree, at, leaf) * values[leaf.0])
                .sum();
            let got = conditional_expectation(&tree, &values, at).unwrap();
            prop_assert!((got - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn tower_property(seed in any::<u64>()) {
        let (tree, mut rng) = tree_from_seed(seed, false);
        let values: Vec<f64> = (0..tree.len()).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let level = rng.gen_range(0..=tree.horizon());
        let mut inner = vec![0.0; tree.len()];
        for id in tree.nodes_at(level) {
            inner[id.0] = conditional_expectation(&tree, &values, id).unwrap();
        }
        for i in 0..tree.len() {
            let at = NodeId(i);
            if tree.node(at).unwrap().time > level {
                continue;
            }
            let iterated = expectation_at_time(&tree, &inner, at, level).unwrap();
            let direct = conditional_expectation(&tree, &values, at).unwrap();
            prop_assert!((iterated - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn taking_out_what_is_known(seed in any::<u64>(), z in -3.0f64..3.0) {
        let (tree, mut rng) = tree_from_seed(seed, false);
        let values: Vec<f64> = (0..tree.len()).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let at = NodeId(rng.gen_range(0..tree.len()));
        let scaled: Vec<f64> = values.iter().map(|v| z * v).collect();
        let base = conditional_expectation(&tree, &values, at).unwrap();
        let got = conditional_expectation(&tree, &scaled, at).unwrap();
        prop_assert!((got - z * base).abs() <= 1e-12 * (1.0 + (z * base).abs()));
    }

    #[test]
    fn positive_sdf_steps_give_positive_kernel(seed in any::<u64>()) {
        let (tree, _) = tree_from_seed(seed, false);
        let kernel = compute_pricing_kernel(&tree).unwrap();
        prop_assert_eq!(kernel.at(tree.root()), 1.0);
        prop_assert!(kernel.values.iter().all(|&a| a > 0.0));
    }

    #[test]
    fn zero_dividends_are_martingales(seed in any::<u64>()) {
        let (tree, _) = tree_from_seed(seed, false);
        let prices = price_backward_induction(&tree).unwrap();
        let report = check_martingale(&tree, &prices).unwrap();
        prop_assert_eq!(report.verdict, MartingaleVerdict::Martingale);
        prop_assert!(report.max_abs_residual <= 1e-12);
    }

    #[test]
    fn a_positive_dividend_breaks_the_martingale(seed in any::<u64>(), dividend in 0.1f64..1.0) {
        let (tree, mut rng) = tree_from_seed(seed, false);
        let mut dividends = vec![0.0; tree.len()];
        dividends[rng.gen_range(1..tree.len())] = dividend;
        let tree = tree.with_dividends(&dividends).unwrap();
        let prices = price_backward_induction(&tree).unwrap();
        let report = check_martingale(&tree, &prices).unwrap();
        prop_assert_eq!(report.verdict, MartingaleVerdict::NotMartingale);
    }

    #[test]
    fn json_round_trip_preserves_prices(seed in any::<u64>()) {
        let (tree, _) = tree_from_seed(seed, true);
        let json = serde_json::to_string(&tree.to_records()).unwrap();
        let back = UncertaintyTree::from_json_str(&json).unwrap();
        prop_assert_eq!(price_backward_induction(&tree).unwrap(), price_backward_induction(&back).unwrap());
    }
}
