//! Preference-based ranking over uncovered objectives (fitness is maximized).

use std::collections::BTreeSet;

/// `a` dominates `b` on `scope`: no worse anywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64], scope: &BTreeSet<usize>) -> bool {
    let mut strictly = false;
    for &i in scope {
        if a[i] < b[i] {
            return false;
        }
        if a[i] > b[i] {
            strictly = true;
        }
    }
    strictly
}

/// Index of the candidate closest to covering objective `u`. Ties go to the
/// larger fitness sum over `scope`, then to the earlier candidate.
fn best_for(population: &[&[f64]], u: usize, scope: &BTreeSet<usize>) -> usize {
    let sum = |f: &[f64]| scope.iter().map(|&j| f[j]).sum::<f64>();
    let mut best = 0;
    for i in 1..population.len() {
        let (cand, cur) = (population[i], population[best]);
        if cand[u] > cur[u] || (cand[u] == cur[u] && sum(cand) > sum(cur)) {
            best = i;
        }
    }
    best
}

/// Non-dominated sorting of `members` (indices into `population`) on `scope`.
fn non_dominated_fronts(population: &[&[f64]], members: &[usize], scope: &BTreeSet<usize>) -> Vec<Vec<usize>> {
    let n = members.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_set = vec![Vec::new(); n];
    for a in 0..n {
        for b in (a + 1)..n {
            let (fa, fb) = (population[members[a]], population[members[b]]);
            if dominates(fa, fb, scope) {
                dominates_set[a].push(b);
                dominated_by[b] += 1;
            } else if dominates(fb, fa, scope) {
                dominates_set[b].push(a);
                dominated_by[a] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&a| dominated_by[a] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &a in &current {
            for &b in &dominates_set[a] {
                dominated_by[b] -= 1;
                if dominated_by[b] == 0 {
                    next.push(b);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current.iter().map(|&a| members[a]).collect());
        current = next;
    }
    fronts
}

/// Ranks a population: front 0 holds, for every uncovered objective, the
/// candidate with the highest fitness on it; the rest are ordered by
/// non-dominated sorting restricted to the uncovered objectives. Fronts
/// list indices into `population` in increasing order.
pub fn preference_sort(population: &[&[f64]], uncovered: &BTreeSet<usize>) -> Vec<Vec<usize>> {
    if population.is_empty() {
        return Vec::new();
    }
    if uncovered.is_empty() {
        return vec![(0..population.len()).collect()];
    }
    let preferred: BTreeSet<usize> = uncovered.iter().map(|&u| best_for(population, u, uncovered)).collect();
    let rest: Vec<usize> = (0..population.len()).filter(|i| !preferred.contains(i)).collect();
    let mut fronts = vec![preferred.into_iter().collect::<Vec<_>>()];
    fronts.extend(non_dominated_fronts(population, &rest, uncovered));
    fronts
}

/// Crowding distance of each member of `front` over the `scope` objectives.
/// Boundary members on any objective get infinity.
pub fn crowding_distance(front: &[&[f64]], scope: &BTreeSet<usize>) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let mut dist = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for &m in scope {
        order.sort_by(|&a, &b| front[a][m].total_cmp(&front[b][m]).then(a.cmp(&b)));
        let lo = front[order[0]][m];
        let hi = front[order[n - 1]][m];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in 1..n - 1 {
            let gap = front[order[w + 1]][m] - front[order[w - 1]][m];
            dist[order[w]] += gap / range;
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(Vec::as_slice).collect()
    }

    fn direct_dominates(a: &[f64], b: &[f64], scope: &BTreeSet<usize>) -> bool {
        scope.iter().all(|&i| a[i] >= b[i]) && scope.iter().any(|&i| a[i] > b[i])
    }

    #[test]
    fn dominance_examples() {
        let s = BTreeSet::from([0, 1]);
        assert!(!dominates(&[0.3, 0.1], &[0.3, 0.1], &s));
        assert!(dominates(&[0.3, 0.1], &[0.2, 0.1], &s));
        assert!(!dominates(&[0.2, 0.1], &[0.3, 0.1], &s));
        assert!(!dominates(&[0.3, 0.0], &[0.2, 0.1], &s));
        // objectives outside the scope are ignored
        assert!(dominates(&[0.3, 0.0], &[0.2, 0.1], &BTreeSet::from([0])));
    }

    #[test]
    fn dominance_matches_direct_definition() {
        let mut r = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let k = r.gen_range(1..6);
            // coarse values so ties occur
            let a: Vec<f64> = (0..k).map(|_| r.gen_range(0..4) as f64 / 4.0).collect();
            let b: Vec<f64> = (0..k).map(|_| r.gen_range(0..4) as f64 / 4.0).collect();
            let mut scope: BTreeSet<usize> = (0..k).filter(|_| r.gen_bool(0.6)).collect();
            if scope.is_empty() {
                scope.insert(0);
            }
            assert_eq!(dominates(&a, &b, &scope), direct_dominates(&a, &b, &scope));
        }
    }

    #[test]
    fn single_objective_gives_total_order() {
        let pop: Vec<Vec<f64>> = [0.3, 0.1, 0.5, 0.2, 0.4].iter().map(|&f| vec![f]).collect();
        let fronts = preference_sort(&refs(&pop), &BTreeSet::from([0]));
        assert_eq!(fronts, vec![vec![2], vec![4], vec![0], vec![3], vec![1]]);
    }

    #[test]
    fn identical_population_has_two_fronts() {
        let pop = vec![vec![0.1, 0.2, 0.3]; 6];
        let fronts = preference_sort(&refs(&pop), &BTreeSet::from([0, 1, 2]));
        assert_eq!(fronts, vec![vec![0], vec![1, 2, 3, 4, 5]]);
    }

    #[test]
    fn preference_ties_break_on_uncovered_sum() {
        let pop = vec![vec![0.5, 0.0, 0.9], vec![0.5, 0.2, 0.0], vec![0.1, 0.1, 0.0]];
        // 0 and 1 tie on objective 0; 1 has the larger sum over {0, 1}
        let fronts = preference_sort(&refs(&pop), &BTreeSet::from([0, 1]));
        assert_eq!(fronts[0], vec![1]);
    }

    #[test]
    fn crowding_examples() {
        let s = BTreeSet::from([0]);
        let two = vec![vec![0.1], vec![0.2]];
        assert!(crowding_distance(&refs(&two), &s).iter().all(|d| d.is_infinite()));
        let three = vec![vec![0.0], vec![0.5], vec![1.0]];
        let d = crowding_distance(&refs(&three), &s);
        assert!(d[0].is_infinite() && d[2].is_infinite());
        assert_eq!(d[1], 1.0);
    }

    #[test]
    fn crowding_matches_hand_definition() {
        // objective 0 order: 3, 0, 2, 1 ; objective 1 order: 1, 2, 0, 3
        let front = vec![vec![0.2, 0.5], vec![0.9, 0.1], vec![0.4, 0.3], vec![0.0, 0.9]];
        let d = crowding_distance(&refs(&front), &BTreeSet::from([0, 1]));
        // member 0: (0.4 - 0.0)/0.9 + (0.9 - 0.3)/0.8 ; member 2: (0.9 - 0.2)/0.9 + (0.5 - 0.1)/0.8
        assert!((d[0] - (0.4 / 0.9 + 0.6 / 0.8)).abs() < 1e-12);
        assert!((d[2] - (0.7 / 0.9 + 0.4 / 0.8)).abs() < 1e-12);
        assert!(d[1].is_infinite() && d[3].is_infinite());
    }
}
