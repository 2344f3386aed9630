//! Multi-step pricing on a leveled uncertainty tree.
//!
//! Each node carries the risk-neutral probability of being reached from its
//! parent and the one-step discount factor on that edge. The pricing kernel
//! is the running product of those factors, so `a_t p_t` plus accumulated
//! discounted dividends is conditionally constant.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};

/// Tolerance on children's probabilities summing to one.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-12;
/// Scaled residual threshold for the martingale verdict.
pub const MARTINGALE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub label: String,
    pub time: usize,
    pub parent: Option<NodeId>,
    /// Risk-neutral probability of reaching this node from its parent.
    pub branch_probability: f64,
    /// One-step discount factor on the edge from the parent.
    pub sdf_step: f64,
    pub price: Option<f64>,
    pub dividend: f64,
}

/// Incremental construction; node ids are handed out in insertion order.
#[derive(Debug, Clone)]
pub struct TreeBuilder {
    nodes: Vec<TreeNode>,
}

impl Default for TreeBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl TreeBuilder {
    pub fn new() -> Self {
        TreeBuilder {
            nodes: vec![TreeNode {
                label: "0".into(),
                time: 0,
                parent: None,
                branch_probability: 1.0,
                sdf_step: 1.0,
                price: None,
                dividend: 0.0,
            }],
        }
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn child(&mut self, parent: NodeId, probability: f64, sdf: f64) -> NodeId {
        let time = self.nodes[parent.0].time + 1;
        let id = NodeId(self.nodes.len());
        self.nodes.push(TreeNode {
            label: id.0.to_string(),
            time,
            parent: Some(parent),
            branch_probability: probability,
            sdf_step: sdf,
            price: None,
            dividend: 0.0,
        });
        id
    }

    pub fn set_price(&mut self, node: NodeId, price: f64) -> &mut Self {
        self.nodes[node.0].price = Some(price);
        self
    }

    pub fn set_dividend(&mut self, node: NodeId, dividend: f64) -> &mut Self {
        self.nodes[node.0].dividend = dividend;
        self
    }

    pub fn set_label(&mut self, node: NodeId, label: impl Into<String>) -> &mut Self {
        self.nodes[node.0].label = label.into();
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn build(self) -> Result<UncertaintyTree> {
        UncertaintyTree::from_nodes(self.nodes)
    }
}

/// Immutable, validated tree. Parents always precede children.
#[derive(Debug, Clone)]
pub struct UncertaintyTree {
    nodes: Vec<TreeNode>,
    children: Vec<Vec<NodeId>>,
    horizon: usize,
    labels: HashMap<String, NodeId>,
}

impl UncertaintyTree {
    /// Validates nodes whose parents already precede them.
    fn from_nodes(nodes: Vec<TreeNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(PricingError::InvalidTree("no nodes".into()));
        }
        let root = &nodes[0];
        if root.parent.is_some() || root.time != 0 {
            return Err(PricingError::InvalidTree("root must have time 0 and no parent".into()));
        }
        if root.branch_probability != 1.0 || root.sdf_step != 1.0 {
            return Err(PricingError::InvalidTree(
                "root must have probability 1 and sdf 1".into(),
            ));
        }
        let mut children = vec![Vec::new(); nodes.len()];
        let mut labels = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            let finite = node.branch_probability.is_finite()
                && node.sdf_step.is_finite()
                && node.dividend.is_finite()
                && node.price.is_none_or(f64::is_finite);
            if !finite {
                return Err(PricingError::NonFiniteInput(format!("node {}", node.label)));
            }
            if labels.insert(node.label.clone(), NodeId(i)).is_some() {
                return Err(PricingError::InvalidTree(format!("duplicate id {}", node.label)));
            }
            if i == 0 {
                continue;
            }
            let parent = node.parent.ok_or_else(|| {
                PricingError::InvalidTree(format!("node {} has no parent", node.label))
            })?;
            if parent.0 >= i {
                return Err(PricingError::InvalidTree(format!(
                    "parent of {} must precede it",
                    node.label
                )));
            }
            if node.time != nodes[parent.0].time + 1 {
                return Err(PricingError::InvalidTree(format!(
                    "node {} at time {} but parent at time {}",
                    node.label, node.time, nodes[parent.0].time
                )));
            }
            if !(node.branch_probability > 0.0 && node.branch_probability <= 1.0) {
                return Err(PricingError::InvalidTree(format!(
                    "branch probability of {} must lie in (0, 1], got {}",
                    node.label, node.branch_probability
                )));
            }
            children[parent.0].push(NodeId(i));
        }
        let mut horizon = None;
        for (i, kids) in children.iter().enumerate() {
            if kids.is_empty() {
                let t = nodes[i].time;
                match horizon {
                    None => horizon = Some(t),
                    Some(h) if h != t => {
                        return Err(PricingError::InvalidTree(format!(
                            "leaves at times {h} and {t}; tree must be leveled"
                        )))
                    }
                    _ => {}
                }
            } else {
                let total: f64 = kids.iter().map(|c| nodes[c.0].branch_probability).sum();
                if (total - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
                    return Err(PricingError::InvalidTree(format!(
                        "children of {} have probabilities summing to {total}",
                        nodes[i].label
                    )));
                }
            }
        }
        Ok(UncertaintyTree {
            nodes,
            children,
            horizon: horizon.unwrap_or(0),
            labels,
        })
    }

    /// Builds a tree from records in any order.
    pub fn from_records(records: Vec<NodeRecord>) -> Result<Self> {
        let mut by_id: HashMap<String, usize> = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if by_id.insert(r.id.to_string(), i).is_some() {
                return Err(PricingError::InvalidTree(format!("duplicate id {}", r.id)));
            }
        }
        let mut roots = records.iter().enumerate().filter(|(_, r)| r.parent.is_none());
        let root = match (roots.next(), roots.next()) {
            (Some((i, _)), None) => i,
            (None, _) => return Err(PricingError::InvalidTree("no root record".into())),
            (Some(_), Some(_)) => return Err(PricingError::InvalidTree("more than one root".into())),
        };
        let mut kids: Vec<Vec<usize>> = vec![Vec::new(); records.len()];
        for (i, r) in records.iter().enumerate() {
            if let Some(p) = &r.parent {
                let pi = *by_id.get(&p.to_string()).ok_or_else(|| {
                    PricingError::InvalidTree(format!("node {} has unknown parent {p}", r.id))
                })?;
                kids[pi].push(i);
            }
        }
        // Breadth-first so parents precede children; child order follows input.
        let mut order = vec![root];
        let mut new_index = vec![usize::MAX; records.len()];
        new_index[root] = 0;
        let mut head = 0;
        while head < order.len() {
            let cur = order[head];
            head += 1;
            for &c in &kids[cur] {
                new_index[c] = order.len();
                order.push(c);
            }
        }
        if order.len() != records.len() {
            return Err(PricingError::InvalidTree(
                "some nodes are not reachable from the root".into(),
            ));
        }
        let nodes = order
            .iter()
            .map(|&i| {
                let r = &records[i];
                if r.time.is_some_and(|t| t < 0) {
                    return Err(PricingError::InvalidTree(format!("node {} has negative time", r.id)));
                }
                Ok(TreeNode {
                    label: r.id.to_string(),
                    time: r.time.unwrap_or(0) as usize,
                    parent: r
                        .parent
                        .as_ref()
                        .map(|p| NodeId(new_index[by_id[&p.to_string()]])),
                    branch_probability: r.prob,
                    sdf_step: r.sdf,
                    price: r.price,
                    dividend: r.dividend,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        // Times in the file must agree with depth.
        let mut depth = vec![0usize; nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                depth[i] = depth[p.0] + 1;
            }
            if records[order[i]].time.is_some() && n.time != depth[i] {
                return Err(PricingError::InvalidTree(format!(
                    "node {} declares time {} but sits at depth {}",
                    n.label, n.time, depth[i]
                )));
            }
        }
        let nodes = nodes
            .into_iter()
            .zip(depth)
            .map(|(mut n, d)| {
                n.time = d;
                n
            })
            .collect();
        Self::from_nodes(nodes)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let records: Vec<NodeRecord> = serde_json::from_str(text).map_err(|e| PricingError::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        Self::from_records(records)
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_records(&self) -> Vec<NodeRecord> {
        self.nodes
            .iter()
            .map(|n| NodeRecord {
                id: RecordId::Text(n.label.clone()),
                parent: n.parent.map(|p| RecordId::Text(self.nodes[p.0].label.clone())),
                time: Some(n.time as i64),
                prob: n.branch_probability,
                sdf: n.sdf_step,
                price: n.price,
                dividend: n.dividend,
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn node(&self, id: NodeId) -> Result<&TreeNode> {
        self.nodes
            .get(id.0)
            .ok_or_else(|| PricingError::UnknownNode(id.0.to_string()))
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.children[id.0]
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.children[id.0].is_empty()
    }

    pub fn find(&self, label: &str) -> Result<NodeId> {
        self.labels
            .get(label)
            .copied()
            .ok_or_else(|| PricingError::UnknownNode(label.to_string()))
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len())
            .map(NodeId)
            .filter(|&id| self.is_leaf(id))
    }

    pub fn nodes_at(&self, time: usize) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.time == time)
            .map(|(i, _)| NodeId(i))
    }

    /// Copy of the tree with the given per-node dividends.
    pub fn with_dividends(&self, dividends: &[f64]) -> Result<Self> {
        self.check_len(dividends.len())?;
        let mut out = self.clone();
        for (n, d) in out.nodes.iter_mut().zip(dividends) {
            n.dividend = *d;
        }
        Ok(out)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len == self.nodes.len() {
            Ok(())
        } else {
            Err(PricingError::DimensionMismatch {
                expected: self.nodes.len(),
                actual: len,
            })
        }
    }

    /// Visits every path from `from` in depth-first order, calling `visit`
    /// with each descendant (excluding `from`) and the conditional
    /// probability of reaching it.
    fn walk_paths(&self, from: NodeId, mut visit: impl FnMut(NodeId, f64)) {
        let mut stack: Vec<(NodeId, f64)> = self.children[from.0]
            .iter()
            .rev()
            .map(|&c| (c, self.nodes[c.0].branch_probability))
            .collect();
        while let Some((id, prob)) = stack.pop() {
            visit(id, prob);
            for &c in self.children[id.0].iter().rev() {
                stack.push((c, prob * self.nodes[c.0].branch_probability));
            }
        }
    }
}

/// Identifier in a tree file; integers and strings are both accepted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RecordId {
    Int(i64),
    Text(String),
}

impl std::fmt::Display for RecordId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RecordId::Int(i) => write!(f, "{i}"),
            RecordId::Text(s) => f.write_str(s),
        }
    }
}

/// One node of the JSON tree format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: RecordId,
    #[serde(default)]
    pub parent: Option<RecordId>,
    #[serde(default)]
    pub time: Option<i64>,
    pub prob: f64,
    pub sdf: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    #[serde(default)]
    pub dividend: f64,
}

/// Cumulative kernel `a` per node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PricingKernelMap {
    pub values: Vec<f64>,
}

impl PricingKernelMap {
    pub fn at(&self, id: NodeId) -> f64 {
        self.values[id.0]
    }
}

/// `a_root = 1`, `a_node = a_parent · sdf_step(node)`.
pub fn compute_pricing_kernel(tree: &UncertaintyTree) -> Result<PricingKernelMap> {
    let mut values = vec![1.0; tree.len()];
    for (i, node) in tree.nodes.iter().enumerate().skip(1) {
        if node.sdf_step < 0.0 {
            return Err(PricingError::NegativeSdf {
                node: i,
                sdf: node.sdf_step,
            });
        }
        let parent = node.parent.expect("non-root has parent");
        values[i] = values[parent.0] * node.sdf_step;
    }
    Ok(PricingKernelMap { values })
}

/// `E[X | node]` for a variable observed at the leaves.
///
/// `leaf_values` is indexed by node id; only leaves below `at` are read.
pub fn conditional_expectation(tree: &UncertaintyTree, leaf_values: &[f64], at: NodeId) -> Result<f64> {
    expectation_at_time(tree, leaf_values, at, tree.horizon())
}

/// `E[X | node]` for a variable observed at `time ≥ time(at)`; `values` is
/// indexed by node id and only nodes at `time` below `at` are read.
pub fn expectation_at_time(tree: &UncertaintyTree, values: &[f64], at: NodeId, time: usize) -> Result<f64> {
    tree.check_len(values.len())?;
    let start = tree.node(at)?.time;
    if time < start || time > tree.horizon() {
        return Err(PricingError::InvalidTree(format!(
            "cannot condition a time-{time} variable on a time-{start} node"
        )));
    }
    if time == start {
        return Ok(values[at.0]);
    }
    let mut total = 0.0;
    tree.walk_paths(at, |id, prob| {
        if tree.nodes[id.0].time == time {
            total += prob * values[id.0];
        }
    });
    Ok(total)
}

/// Backward induction: `p = Σ_c π_c m_c (p_c + d_c)`; leaves keep their
/// terminal prices.
pub fn price_backward_induction(tree: &UncertaintyTree) -> Result<Vec<f64>> {
    let mut prices = vec![0.0; tree.len()];
    for i in (0..tree.len()).rev() {
        let kids = &tree.children[i];
        prices[i] = if kids.is_empty() {
            tree.nodes[i].price.ok_or(PricingError::MissingTerminalPrices(i))?
        } else {
            kids.iter()
                .map(|c| {
                    let n = &tree.nodes[c.0];
                    n.branch_probability * n.sdf_step * (prices[c.0] + n.dividend)
                })
                .sum()
        };
    }
    Ok(prices)
}

/// Price at `at` from the reduced lottery over all paths below it:
/// `(1/a_t) E[Σ_{i>t} a_i d_i + a_T p_T | at]`.
pub fn price_reduced_lottery(tree: &UncertaintyTree, at: NodeId) -> Result<f64> {
    let kernel = compute_pricing_kernel(tree)?;
    let a_here = kernel.at(at);
    let node = tree.node(at)?;
    if tree.is_leaf(at) {
        return node.price.ok_or(PricingError::MissingTerminalPrices(at.0));
    }
    if a_here == 0.0 {
        return Err(PricingError::ZeroKernel(at.0));
    }
    let mut total = 0.0;
    let mut missing = None;
    tree.walk_paths(at, |id, prob| {
        let n = &tree.nodes[id.0];
        let a = kernel.values[id.0];
        total += prob * a * n.dividend;
        if tree.is_leaf(id) {
            match n.price {
                Some(p) => total += prob * a * p,
                None => missing = missing.or(Some(id.0)),
            }
        }
    });
    if let Some(leaf) = missing {
        return Err(PricingError::MissingTerminalPrices(leaf));
    }
    Ok(total / a_here)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MartingaleVerdict {
    Martingale,
    NotMartingale,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeResidual {
    pub node: NodeId,
    pub label: String,
    /// `a_t p_t − E[a_T p_T | node]`
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleReport {
    pub residuals: Vec<NodeResidual>,
    pub max_abs_residual: f64,
    /// `1 + max |a·p|` over all nodes.
    pub scale: f64,
    pub verdict: MartingaleVerdict,
}

impl MartingaleReport {
    pub fn residual_at(&self, id: NodeId) -> Option<f64> {
        self.residuals.iter().find(|r| r.node == id).map(|r| r.residual)
    }
}

/// Tests whether `a_t p_t` is a martingale under the tree's probabilities.
pub fn check_martingale(tree: &UncertaintyTree, prices: &[f64]) -> Result<MartingaleReport> {
    tree.check_len(prices.len())?;
    let kernel = compute_pricing_kernel(tree)?;
    let discounted: Vec<f64> = kernel.values.iter().zip(prices).map(|(a, p)| a * p).collect();
    // Terminal expectation by backward pass over fixed child order.
    let mut terminal = vec![0.0; tree.len()];
    for i in (0..tree.len()).rev() {
        let kids = &tree.children[i];
        terminal[i] = if kids.is_empty() {
            discounted[i]
        } else {
            kids.iter()
                .map(|c| tree.nodes[c.0].branch_probability * terminal[c.0])
                .sum()
        };
    }
    let residuals: Vec<NodeResidual> = (0..tree.len())
        .filter(|&i| !tree.children[i].is_empty())
        .map(|i| NodeResidual {
            node: NodeId(i),
            label: tree.nodes[i].label.clone(),
            residual: discounted[i] - terminal[i],
        })
        .collect();
    let max_abs_residual = residuals.iter().fold(0.0_f64, |m, r| m.max(r.residual.abs()));
    let scale = 1.0 + discounted.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let verdict = if max_abs_residual <= MARTINGALE_TOLERANCE * scale {
        MartingaleVerdict::Martingale
    } else {
        MartingaleVerdict::NotMartingale
    };
    Ok(MartingaleReport {
        residuals,
        max_abs_residual,
        scale,
        verdict,
    })
}

/// Recombining binomial lattice; node `(t, j)` has `j` up-moves.
///
/// Expanded to the full path tree on [`RecombiningLattice::expand`], so
/// every history becomes its own node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecombiningLattice {
    /// `up_probability[t][j]`, for `t < steps`.
    pub up_probability: Vec<Vec<f64>>,
    /// `sdf[t][j]`: one-step discount factor on both edges leaving `(t, j)`.
    pub sdf: Vec<Vec<f64>>,
    /// `dividend[t][j]` for `t ≤ steps`.
    pub dividend: Vec<Vec<f64>>,
    /// Terminal prices `terminal_price[j]` at `t = steps`.
    pub terminal_price: Vec<f64>,
}

impl RecombiningLattice {
    pub fn steps(&self) -> usize {
        self.up_probability.len()
    }

    pub fn expand(&self) -> Result<UncertaintyTree> {
        let steps = self.steps();
        let shape_ok = self.sdf.len() == steps
            && self.dividend.len() == steps + 1
            && self.terminal_price.len() == steps + 1
            && (0..steps).all(|t| self.up_probability[t].len() == t + 1 && self.sdf[t].len() == t + 1)
            && (0..=steps).all(|t| self.dividend[t].len() == t + 1);
        if !shape_ok {
            return Err(PricingError::InvalidTree("lattice arrays have inconsistent shapes".into()));
        }
        let mut b = TreeBuilder::new();
        b.set_dividend(b.root(), self.dividend[0][0]);
        let mut frontier = vec![(b.root(), 0usize, String::new())];
        for t in 0..steps {
            let mut next = Vec::with_capacity(frontier.len() * 2);
            for (id, j, path) in frontier {
                let q = self.up_probability[t][j];
                let m = self.sdf[t][j];
                for (up, prob) in [(false, 1.0 - q), (true, q)] {
                    if prob == 0.0 {
                        continue;
                    }
                    let jj = j + usize::from(up);
                    let c = b.child(id, prob, m);
                    let label = format!("{path}{}", if up { 'u' } else { 'd' });
                    b.set_label(c, label.clone()).set_dividend(c, self.dividend[t + 1][jj]);
                    if t + 1 == steps {
                        b.set_price(c, self.terminal_price[jj]);
                    }
                    next.push((c, jj, label));
                }
            }
            frontier = next;
        }
        if steps == 0 {
            b.set_price(b.root(), self.terminal_price[0]);
        }
        b.set_label(b.root(), "root");
        b.build()
    }
}
