//! Variance-reduction regression trees with reduced-error pruning.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::EvaluationRecord;
use crate::types::ImageCharacteristics;

/// Minimum SSE reduction for a split to be kept.
const MIN_GAIN: f64 = 1e-12;

/// One training example: image characteristics and the NE of one key-point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub ic: ImageCharacteristics,
    pub target: f64,
}

/// Observations for key-point `index` (0-based), skipping evaluations where it was invisible.
pub fn observations_for(records: &[EvaluationRecord], index: usize) -> Vec<Observation> {
    records
        .iter()
        .filter(|r| r.visible.get(index).copied().unwrap_or(false))
        .map(|r| Observation { ic: r.ic, target: r.fitness[index] })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Roll,
    Pitch,
    Yaw,
}

impl Feature {
    pub const ALL: [Feature; 3] = [Feature::Roll, Feature::Pitch, Feature::Yaw];

    pub fn of(&self, ic: &ImageCharacteristics) -> f64 {
        match self {
            Feature::Roll => ic.roll,
            Feature::Pitch => ic.pitch,
            Feature::Yaw => ic.yaw,
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            Feature::Roll => "R",
            Feature::Pitch => "P",
            Feature::Yaw => "Y",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Node {
    Leaf {
        mean: f64,
        count: usize,
    },
    /// `value < threshold` goes left.
    Numeric {
        feature: Feature,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
        mean: f64,
        count: usize,
    },
    /// One child per model seen in training; other models go to `default`.
    Categorical {
        children: Vec<(u32, Node)>,
        default: usize,
        mean: f64,
        count: usize,
    },
}

impl Node {
    pub fn mean(&self) -> f64 {
        match self {
            Node::Leaf { mean, .. } | Node::Numeric { mean, .. } | Node::Categorical { mean, .. } => *mean,
        }
    }

    pub fn count(&self) -> usize {
        match self {
            Node::Leaf { count, .. } | Node::Numeric { count, .. } | Node::Categorical { count, .. } => *count,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }

    fn collapse(&mut self) {
        *self = Node::Leaf { mean: self.mean(), count: self.count() };
    }

    fn route(&self, ic: &ImageCharacteristics) -> Option<&Node> {
        match self {
            Node::Leaf { .. } => None,
            Node::Numeric { feature, threshold, left, right, .. } => {
                Some(if feature.of(ic) < *threshold { left } else { right })
            }
            Node::Categorical { children, default, .. } => Some(
                children
                    .iter()
                    .find(|(m, _)| *m == ic.model_id)
                    .map_or(&children[*default].1, |(_, c)| c),
            ),
        }
    }

    fn child_index(&self, ic: &ImageCharacteristics) -> usize {
        match self {
            Node::Numeric { feature, threshold, .. } => usize::from(feature.of(ic) >= *threshold),
            Node::Categorical { children, default, .. } => {
                children.iter().position(|(m, _)| *m == ic.model_id).unwrap_or(*default)
            }
            Node::Leaf { .. } => 0,
        }
    }

    fn children_mut(&mut self) -> Vec<&mut Node> {
        match self {
            Node::Leaf { .. } => Vec::new(),
            Node::Numeric { left, right, .. } => vec![left.as_mut(), right.as_mut()],
            Node::Categorical { children, .. } => children.iter_mut().map(|(_, c)| c).collect(),
        }
    }

    pub fn children(&self) -> Vec<&Node> {
        match self {
            Node::Leaf { .. } => Vec::new(),
            Node::Numeric { left, right, .. } => vec![left.as_ref(), right.as_ref()],
            Node::Categorical { children, .. } => children.iter().map(|(_, c)| c).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub min_leaf: usize,
    /// Share of observations held out for reduced-error pruning; 0 disables pruning.
    pub prune_fraction: f64,
    /// Nodes whose target variance is at most this share of the root variance are not split.
    pub min_variance_prop: f64,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { min_leaf: 40, prune_fraction: 1.0 / 3.0, min_variance_prop: 1e-3, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub root: Node,
    pub min_leaf: usize,
}

impl RegressionTree {
    pub fn predict(&self, ic: &ImageCharacteristics) -> f64 {
        let mut node = &self.root;
        while let Some(next) = node.route(ic) {
            node = next;
        }
        node.mean()
    }

    pub fn leaves(&self) -> Vec<&Node> {
        let mut out = Vec::new();
        let mut stack = vec![&self.root];
        while let Some(n) = stack.pop() {
            if n.is_leaf() {
                out.push(n);
            } else {
                stack.extend(n.children());
            }
        }
        out
    }

    /// Total number of nodes.
    pub fn size(&self) -> usize {
        fn walk(n: &Node) -> usize {
            1 + n.children().into_iter().map(walk).sum::<usize>()
        }
        walk(&self.root)
    }

    pub fn depth(&self) -> usize {
        fn walk(n: &Node) -> usize {
            n.children().into_iter().map(walk).max().map_or(0, |d| d + 1)
        }
        walk(&self.root)
    }

    /// Sum of squared errors on `data`.
    pub fn sse(&self, data: &[Observation]) -> f64 {
        data.iter().map(|o| (self.predict(&o.ic) - o.target).powi(2)).sum()
    }
}

/// Running sums of `y - shift`, which keeps constant targets exact.
#[derive(Default, Clone, Copy)]
struct Moments {
    shift: f64,
    n: usize,
    sum: f64,
    sumsq: f64,
}

impl Moments {
    fn shifted(shift: f64) -> Self {
        Self { shift, ..Self::default() }
    }

    fn add(&mut self, y: f64) {
        let d = y - self.shift;
        self.n += 1;
        self.sum += d;
        self.sumsq += d * d;
    }

    fn sse(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.sumsq - self.sum * self.sum / self.n as f64).max(0.0)
        }
    }

    fn mean(&self) -> f64 {
        self.shift + self.sum / self.n as f64
    }
}

enum Split {
    Numeric { feature: Feature, threshold: f64 },
    Categorical,
}

fn best_split(data: &[Observation], idx: &[usize], min_leaf: usize) -> Option<(f64, Split)> {
    let shift = data[idx[0]].target;
    let mut total = Moments::shifted(shift);
    for &i in idx {
        total.add(data[i].target);
    }
    let parent = total.sse();
    let n = idx.len();
    let mut best: Option<(f64, Split)> = None;
    let keep = |gain: f64, split: Split, best: &mut Option<(f64, Split)>| {
        if gain > MIN_GAIN && best.as_ref().is_none_or(|(g, _)| gain > *g) {
            *best = Some((gain, split));
        }
    };

    let mut sorted = idx.to_vec();
    for feature in Feature::ALL {
        sorted.sort_by(|&a, &b| feature.of(&data[a].ic).total_cmp(&feature.of(&data[b].ic)).then(a.cmp(&b)));
        let mut left = Moments::shifted(shift);
        for s in 1..n {
            left.add(data[sorted[s - 1]].target);
            if s < min_leaf || n - s < min_leaf {
                continue;
            }
            let lo = feature.of(&data[sorted[s - 1]].ic);
            let hi = feature.of(&data[sorted[s]].ic);
            if lo >= hi {
                continue;
            }
            let right = Moments {
                shift,
                n: n - s,
                sum: total.sum - left.sum,
                sumsq: total.sumsq - left.sumsq,
            };
            let gain = parent - left.sse() - right.sse();
            keep(gain, Split::Numeric { feature, threshold: 0.5 * (lo + hi) }, &mut best);
        }
    }

    let mut groups: BTreeMap<u32, Moments> = BTreeMap::new();
    for &i in idx {
        groups.entry(data[i].ic.model_id).or_insert_with(|| Moments::shifted(shift)).add(data[i].target);
    }
    if groups.len() > 1 && groups.values().all(|g| g.n >= min_leaf) {
        let gain = parent - groups.values().map(Moments::sse).sum::<f64>();
        keep(gain, Split::Categorical, &mut best);
    }
    best
}

struct Grower<'a> {
    data: &'a [Observation],
    min_leaf: usize,
    /// Per-observation variance at or below which nodes stay leaves.
    min_variance: f64,
}

fn moments(data: &[Observation], idx: &[usize]) -> Moments {
    let mut m = Moments::shifted(idx.first().map_or(0.0, |&i| data[i].target));
    for &i in idx {
        m.add(data[i].target);
    }
    m
}

fn grow(g: &Grower<'_>, idx: Vec<usize>) -> Node {
    let (data, min_leaf) = (g.data, g.min_leaf);
    let m = moments(data, &idx);
    let (mean, count) = (m.mean(), m.n);
    if count < 2 * min_leaf || m.sse() / count as f64 <= g.min_variance {
        return Node::Leaf { mean, count };
    }
    match best_split(data, &idx, min_leaf) {
        None => Node::Leaf { mean, count },
        Some((_, Split::Numeric { feature, threshold })) => {
            let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| feature.of(&data[i].ic) < threshold);
            Node::Numeric {
                feature,
                threshold,
                left: Box::new(grow(g, l)),
                right: Box::new(grow(g, r)),
                mean,
                count,
            }
        }
        Some((_, Split::Categorical)) => {
            let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
            for i in idx {
                groups.entry(data[i].ic.model_id).or_default().push(i);
            }
            let children: Vec<(u32, Node)> = groups
                .into_iter()
                .map(|(model, part)| (model, grow(g, part)))
                .collect();
            // most populated child; the smallest label wins ties
            let default = children
                .iter()
                .enumerate()
                .max_by(|(ia, a), (ib, b)| a.1.count().cmp(&b.1.count()).then(ib.cmp(ia)))
                .map(|(i, _)| i)
                .unwrap_or(0);
            Node::Categorical { children, default, mean, count }
        }
    }
}

/// Bottom-up reduced-error pruning; returns the holdout SSE of the pruned subtree.
fn prune(node: &mut Node, holdout: &[Observation]) -> f64 {
    let as_leaf: f64 = holdout.iter().map(|o| (o.target - node.mean()).powi(2)).sum();
    if node.is_leaf() {
        return as_leaf;
    }
    let arity = node.children().len();
    let mut parts: Vec<Vec<Observation>> = vec![Vec::new(); arity];
    for o in holdout {
        parts[node.child_index(&o.ic)].push(*o);
    }
    let kept: f64 = node
        .children_mut()
        .into_iter()
        .zip(&parts)
        .map(|(child, part)| prune(child, part))
        .sum();
    if as_leaf <= kept {
        node.collapse();
        as_leaf
    } else {
        kept
    }
}

/// Grows a tree on a seeded share of the observations and prunes it on the rest.
pub fn grow_all(observations: &[Observation], idx: Vec<usize>, params: &TreeParams) -> Node {
    let root = moments(observations, &idx);
    let g = Grower {
        data: observations,
        min_leaf: params.min_leaf,
        min_variance: params.min_variance_prop * root.sse() / root.n.max(1) as f64,
    };
    grow(&g, idx)
}

pub fn build_tree(observations: &[Observation], params: &TreeParams) -> Result<RegressionTree> {
    if params.min_leaf == 0 {
        return Err(Error::invalid("min_leaf must be at least 1"));
    }
    if !(0.0..1.0).contains(&params.prune_fraction) {
        return Err(Error::invalid("prune_fraction must lie in [0, 1)"));
    }
    if !(0.0..1.0).contains(&params.min_variance_prop) {
        return Err(Error::invalid("min_variance_prop must lie in [0, 1)"));
    }
    if observations.len() < 2 * params.min_leaf {
        return Err(Error::invalid(format!(
            "{} observations, need at least {}",
            observations.len(),
            2 * params.min_leaf
        )));
    }
    let mut order: Vec<usize> = (0..observations.len()).collect();
    let holdout_len = (observations.len() as f64 * params.prune_fraction).round() as usize;
    if holdout_len > 0 {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
    }
    let (holdout_idx, grow_idx) = order.split_at(holdout_len);
    let mut grow_idx = grow_idx.to_vec();
    grow_idx.sort_unstable();
    let mut root = grow_all(observations, grow_idx, params);
    if holdout_len > 0 {
        let holdout: Vec<Observation> = holdout_idx.iter().map(|&i| observations[i]).collect();
        prune(&mut root, &holdout);
    }
    Ok(RegressionTree { root, min_leaf: params.min_leaf })
}

/// Learns the tree on everything and reports the unpruned variant too, for
/// checking that pruning never hurts on the holdout.
#[doc(hidden)]
pub fn build_tree_with_unpruned(
    observations: &[Observation],
    params: &TreeParams,
) -> Result<(RegressionTree, RegressionTree, Vec<Observation>)> {
    let pruned = build_tree(observations, params)?;
    let mut order: Vec<usize> = (0..observations.len()).collect();
    let holdout_len = (observations.len() as f64 * params.prune_fraction).round() as usize;
    if holdout_len > 0 {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
    }
    let (holdout_idx, grow_idx) = order.split_at(holdout_len);
    let mut grow_idx = grow_idx.to_vec();
    grow_idx.sort_unstable();
    let unpruned = RegressionTree { root: grow_all(observations, grow_idx, params), min_leaf: params.min_leaf };
    let holdout = holdout_idx.iter().map(|&i| observations[i]).collect();
    Ok((pruned, unpruned, holdout))
}

/// Mean over `folds` seeded folds of the held-out mean absolute error.
pub fn cv_mae(observations: &[Observation], folds: usize, params: &TreeParams) -> Result<f64> {
    if folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    let n = observations.len();
    if n < folds || n - n.div_ceil(folds) < 2 * params.min_leaf {
        return Err(Error::invalid(format!("{n} observations are too few for {folds}-fold cross-validation")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
    let mut total = 0.0;
    for f in 0..folds {
        let (lo, hi) = (f * n / folds, (f + 1) * n / folds);
        let test: Vec<Observation> = order[lo..hi].iter().map(|&i| observations[i]).collect();
        let train: Vec<Observation> = order[..lo].iter().chain(&order[hi..]).map(|&i| observations[i]).collect();
        let tree = build_tree(&train, params)?;
        let mae = test.iter().map(|o| (tree.predict(&o.ic) - o.target).abs()).sum::<f64>() / test.len() as f64;
        total += mae;
    }
    Ok(total / folds as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn uniform(n: usize, seed: u64, target: impl Fn(&ImageCharacteristics, &mut ChaCha8Rng) -> f64) -> Vec<Observation> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let ic = ImageCharacteristics::new(
                    r.gen_range(-30.0..30.0),
                    r.gen_range(-30.0..30.0),
                    r.gen_range(-30.0..30.0),
                    r.gen_range(0..10),
                );
                let target = target(&ic, &mut r);
                Observation { ic, target }
            })
            .collect()
    }

    fn params(min_leaf: usize) -> TreeParams {
        TreeParams { min_leaf, seed: 5, ..TreeParams::default() }
    }

    #[test]
    fn constant_target_is_single_leaf() {
        let obs = uniform(500, 1, |_, _| 0.07);
        let tree = build_tree(&obs, &params(40)).unwrap();
        assert!(tree.root.is_leaf());
        assert!((tree.predict(&ImageCharacteristics::new(0.0, 0.0, 0.0, 3)) - 0.07).abs() < 1e-15);
        assert!(cv_mae(&obs, 10, &params(40)).unwrap() < 1e-12);
    }

    #[test]
    fn too_few_observations() {
        let obs = uniform(79, 1, |_, _| 0.0);
        assert!(build_tree(&obs, &params(40)).is_err());
        assert!(cv_mae(&obs, 1, &params(10)).is_err());
    }

    #[test]
    fn recovers_planted_step() {
        let obs = uniform(4000, 2, |ic, _| if ic.pitch >= 18.41 { 0.1 } else { 0.0 });
        let tree = build_tree(&obs, &params(40)).unwrap();
        match &tree.root {
            Node::Numeric { feature, threshold, .. } => {
                assert_eq!(*feature, Feature::Pitch);
                assert!((threshold - 18.41).abs() <= 2.0, "threshold {threshold}");
            }
            other => panic!("unexpected root {other:?}"),
        }
        assert!(tree.leaves().iter().all(|l| l.count() >= 40));
        // interior points predict the plateau exactly
        assert_eq!(tree.predict(&ImageCharacteristics::new(0.0, 25.0, 0.0, 1)), 0.1);
        assert_eq!(tree.predict(&ImageCharacteristics::new(0.0, -10.0, 0.0, 1)), 0.0);
    }

    #[test]
    fn categorical_split_isolates_model() {
        let obs = uniform(4000, 3, |ic, _| if ic.model_id == 9 { 0.2 } else { 0.0 });
        let tree = build_tree(&obs, &params(40)).unwrap();
        assert!(matches!(tree.root, Node::Categorical { .. }));
        assert_eq!(tree.predict(&ImageCharacteristics::new(0.0, 0.0, 0.0, 9)), 0.2);
        // an unseen model routes to the most populated child
        let p = tree.predict(&ImageCharacteristics::new(0.0, 0.0, 0.0, 42));
        assert_eq!(p, 0.0);
    }

    #[test]
    fn noise_floor_bounds_cv_mae() {
        let obs = uniform(3000, 4, |ic, r| {
            let plateau = if ic.roll < -10.0 { 0.3 } else if ic.yaw >= 5.0 { 0.12 } else { 0.05 };
            plateau + r.gen_range(-0.01..0.01)
        });
        let mae = cv_mae(&obs, 10, &params(30)).unwrap();
        assert!(mae <= 0.015, "mae {mae}");
    }

    #[test]
    fn pruning_never_hurts_holdout() {
        for seed in 0..5 {
            let obs = uniform(1500, 10 + seed, |ic, r| 0.01 * (ic.roll / 10.0).sin() + r.gen_range(0.0..0.05));
            let (pruned, unpruned, holdout) = build_tree_with_unpruned(&obs, &params(15)).unwrap();
            assert!(pruned.sse(&holdout) <= unpruned.sse(&holdout) + 1e-12);
            assert!(pruned.size() <= unpruned.size());
        }
    }

    #[test]
    fn json_round_trip() {
        let obs = uniform(800, 6, |ic, _| if ic.yaw < 0.0 { 0.2 } else { 0.01 });
        let tree = build_tree(&obs, &params(40)).unwrap();
        let text = serde_json::to_string(&tree).unwrap();
        let back: RegressionTree = serde_json::from_str(&text).unwrap();
        assert_eq!(back, tree);
    }
}
