use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::tree::{Feature, Node, RegressionTree};
use crate::types::ImageCharacteristics;

/// Half-open interval `lower <= x < upper`; missing ends are unbounded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Bound {
    pub fn contains(&self, x: f64) -> bool {
        self.lower.is_none_or(|l| x >= l) && self.upper.is_none_or(|u| x < u)
    }

    pub fn is_unbounded(&self) -> bool {
        self.lower.is_none() && self.upper.is_none()
    }

    fn tighten_lower(&mut self, v: f64) {
        self.lower = Some(self.lower.map_or(v, |l| l.max(v)));
    }

    fn tighten_upper(&mut self, v: f64) {
        self.upper = Some(self.upper.map_or(v, |u| u.min(v)));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelConstraint {
    Any,
    OneOf(BTreeSet<u32>),
    NoneOf(BTreeSet<u32>),
}

impl ModelConstraint {
    pub fn contains(&self, m: u32) -> bool {
        match self {
            ModelConstraint::Any => true,
            ModelConstraint::OneOf(s) => s.contains(&m),
            ModelConstraint::NoneOf(s) => !s.contains(&m),
        }
    }

    /// Rewrites the constraint as a positive set drawn from `models`.
    pub fn within(&self, models: &[u32]) -> ModelConstraint {
        match self {
            ModelConstraint::Any => ModelConstraint::Any,
            other => ModelConstraint::OneOf(models.iter().copied().filter(|m| other.contains(*m)).collect()),
        }
    }

    fn restrict(&mut self, allowed: ModelConstraint) {
        *self = match (std::mem::replace(self, ModelConstraint::Any), allowed) {
            (ModelConstraint::Any, c) | (c, ModelConstraint::Any) => c,
            (ModelConstraint::OneOf(a), ModelConstraint::OneOf(b)) => ModelConstraint::OneOf(&a & &b),
            (ModelConstraint::OneOf(a), ModelConstraint::NoneOf(b))
            | (ModelConstraint::NoneOf(b), ModelConstraint::OneOf(a)) => ModelConstraint::OneOf(&a - &b),
            (ModelConstraint::NoneOf(a), ModelConstraint::NoneOf(b)) => ModelConstraint::NoneOf(&a | &b),
        };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Term {
    Model,
    Numeric(Feature),
}

/// Conjunction of conditions on one root-to-leaf path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub roll: Bound,
    pub pitch: Bound,
    pub yaw: Bound,
    pub model: ModelConstraint,
    pub mean: f64,
    pub count: usize,
    /// Order in which each feature first appears on the path, for rendering.
    order: Vec<Term>,
}

impl Rule {
    fn unconditional(mean: f64, count: usize) -> Self {
        Self {
            roll: Bound::default(),
            pitch: Bound::default(),
            yaw: Bound::default(),
            model: ModelConstraint::Any,
            mean,
            count,
            order: Vec::new(),
        }
    }

    pub fn bound(&self, feature: Feature) -> &Bound {
        match feature {
            Feature::Roll => &self.roll,
            Feature::Pitch => &self.pitch,
            Feature::Yaw => &self.yaw,
        }
    }

    fn bound_mut(&mut self, feature: Feature) -> &mut Bound {
        match feature {
            Feature::Roll => &mut self.roll,
            Feature::Pitch => &mut self.pitch,
            Feature::Yaw => &mut self.yaw,
        }
    }

    fn note(&mut self, term: Term) {
        if !self.order.contains(&term) {
            self.order.push(term);
        }
    }

    pub fn matches(&self, ic: &ImageCharacteristics) -> bool {
        Feature::ALL.iter().all(|f| self.bound(*f).contains(f.of(ic))) && self.model.contains(ic.model_id)
    }

    /// The conditions alone, e.g. `M=9 ∧ P ≥ 18.41 ∧ R < -22.31`; `TRUE` when there are none.
    pub fn condition(&self) -> String {
        let mut parts = Vec::new();
        for term in &self.order {
            match term {
                Term::Model => match &self.model {
                    ModelConstraint::Any => {}
                    ModelConstraint::OneOf(s) if s.len() == 1 => {
                        parts.push(format!("M={}", s.iter().next().unwrap_or(&0)))
                    }
                    ModelConstraint::OneOf(s) => parts.push(format!("M∈{{{}}}", join(s))),
                    ModelConstraint::NoneOf(s) => parts.push(format!("M∉{{{}}}", join(s))),
                },
                Term::Numeric(f) => {
                    let b = self.bound(*f);
                    let s = f.symbol();
                    match (b.lower, b.upper) {
                        (Some(l), Some(u)) => parts.push(format!("{l:.2} ≤ {s} < {u:.2}")),
                        (Some(l), None) => parts.push(format!("{s} ≥ {l:.2}")),
                        (None, Some(u)) => parts.push(format!("{s} < {u:.2}")),
                        (None, None) => {}
                    }
                }
            }
        }
        if parts.is_empty() {
            "TRUE".into()
        } else {
            parts.join(" ∧ ")
        }
    }
}

fn join(s: &BTreeSet<u32>) -> String {
    s.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} → {:.2}", self.condition(), self.mean)
    }
}

fn walk(node: &Node, path: Rule, out: &mut Vec<Rule>) {
    match node {
        Node::Leaf { mean, count } => out.push(Rule { mean: *mean, count: *count, ..path }),
        Node::Numeric { feature, threshold, left, right, .. } => {
            let mut l = path.clone();
            l.bound_mut(*feature).tighten_upper(*threshold);
            l.note(Term::Numeric(*feature));
            walk(left, l, out);
            let mut r = path;
            r.bound_mut(*feature).tighten_lower(*threshold);
            r.note(Term::Numeric(*feature));
            walk(right, r, out);
        }
        Node::Categorical { children, default, .. } => {
            let named: BTreeSet<u32> = children.iter().map(|(m, _)| *m).collect();
            for (i, (model, child)) in children.iter().enumerate() {
                let mut p = path.clone();
                if i == *default {
                    // the default child also receives models unseen in training
                    let others: BTreeSet<u32> = named.iter().copied().filter(|m| m != model).collect();
                    p.model.restrict(ModelConstraint::NoneOf(others));
                } else {
                    p.model.restrict(ModelConstraint::OneOf(BTreeSet::from([*model])));
                }
                p.note(Term::Model);
                walk(child, p, out);
            }
        }
    }
}

/// One rule per leaf, ordered by descending mean NE (ties keep tree order).
pub fn extract_rules(tree: &RegressionTree) -> Vec<Rule> {
    let mut out = Vec::new();
    let root = &tree.root;
    walk(root, Rule::unconditional(root.mean(), root.count()), &mut out);
    out.sort_by(|a, b| b.mean.total_cmp(&a.mean));
    out
}

/// Like [`extract_rules`], with model conditions restated over the known `models`,
/// so a default branch reads `M=9` rather than `M∉{0,...,8}`.
pub fn extract_rules_within(tree: &RegressionTree, models: &[u32]) -> Vec<Rule> {
    let mut rules = extract_rules(tree);
    for r in &mut rules {
        r.model = r.model.within(models);
    }
    rules
}
