//! Regression trees relating image characteristics to per-key-point NE,
//! with rule extraction for reporting.

mod rules;
mod tree;

pub use rules::{extract_rules, extract_rules_within, Bound, ModelConstraint, Rule};
pub use tree::{
    build_tree, build_tree_with_unpruned, cv_mae, observations_for, Feature, Node, Observation, RegressionTree,
    TreeParams,
};

/// Leaf size used when traces are much smaller than a full study: `max(10, ⌈n/100⌉)`.
pub fn scaled_min_leaf(observations: usize) -> usize {
    observations.div_ceil(100).max(10)
}

/// Indented text rendering, one node per line.
pub fn render_text(tree: &RegressionTree) -> String {
    fn go(node: &Node, depth: usize, label: &str, out: &mut String) {
        let pad = "|   ".repeat(depth);
        match node {
            Node::Leaf { mean, count } => out.push_str(&format!("{pad}{label}: {mean:.4} (n={count})\n")),
            _ => {
                if !label.is_empty() {
                    out.push_str(&format!("{pad}{label}\n"));
                }
                let depth = if label.is_empty() { depth } else { depth + 1 };
                match node {
                    Node::Numeric { feature, threshold, left, right, .. } => {
                        let s = feature.symbol();
                        go(left, depth, &format!("{s} < {threshold:.2}"), out);
                        go(right, depth, &format!("{s} >= {threshold:.2}"), out);
                    }
                    Node::Categorical { children, default, .. } => {
                        for (i, (m, child)) in children.iter().enumerate() {
                            let tag = if i == *default { " (default)" } else { "" };
                            go(child, depth, &format!("M = {m}{tag}"), out);
                        }
                    }
                    Node::Leaf { .. } => {}
                }
            }
        }
    }
    let mut out = String::new();
    if tree.root.is_leaf() {
        go(&tree.root, 0, "TRUE", &mut out);
    } else {
        go(&tree.root, 0, "", &mut out);
    }
    out
}
