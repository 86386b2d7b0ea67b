//! Genome sampling and variation: simulated binary crossover, its adaptive
//! distribution index, and polynomial mutation.
//!
//! The continuous genes are the three head-pose angles. The model label is
//! categorical: crossover exchanges it and mutation resamples it, it is
//! never interpolated.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::config::OperatorParams;
use crate::error::{Error, Result};
use crate::types::{GeneBounds, ImageCharacteristics, SearchSpace};

fn sample_gene<R: Rng + ?Sized>(b: GeneBounds, rng: &mut R) -> f64 {
    let u: f64 = rng.gen();
    b.clamp(b.lo() + b.width() * u)
}

fn sample_model<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> Result<u32> {
    space
        .models
        .choose(rng)
        .copied()
        .ok_or_else(|| Error::config("model set is empty"))
}

/// Draws one genome uniformly from the search space.
pub fn random_genome<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> Result<ImageCharacteristics> {
    let roll = sample_gene(space.roll, rng);
    let pitch = sample_gene(space.pitch, rng);
    let yaw = sample_gene(space.yaw, rng);
    let model_id = sample_model(space, rng)?;
    Ok(ImageCharacteristics { roll, pitch, yaw, model_id })
}

pub fn initial_population<R: Rng + ?Sized>(
    size: usize,
    space: &SearchSpace,
    rng: &mut R,
) -> Result<Vec<ImageCharacteristics>> {
    if size == 0 {
        return Err(Error::config("population size must be at least 1"));
    }
    (0..size).map(|_| random_genome(space, rng)).collect()
}

/// SBX spread factor for a uniform draw `u` in `[0, 1)`.
fn spread_factor(u: f64, eta: f64) -> f64 {
    let exponent = 1.0 / (eta + 1.0);
    if u <= 0.5 {
        (2.0 * u).powf(exponent)
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(exponent)
    }
}

/// SBX on a single pair of values, before clamping.
pub(crate) fn sbx_pair(x1: f64, x2: f64, u: f64, eta: f64) -> (f64, f64) {
    let beta = spread_factor(u, eta);
    let mean = 0.5 * (x1 + x2);
    let half = 0.5 * beta * (x2 - x1);
    (mean - half, mean + half)
}

/// Simulated binary crossover. Every continuous gene takes one uniform draw,
/// so the RNG advances identically whatever `eta` is. The model label is
/// swapped between the children with probability 1/2.
pub fn sbx_crossover<R: Rng + ?Sized>(
    p1: &ImageCharacteristics,
    p2: &ImageCharacteristics,
    eta: f64,
    space: &SearchSpace,
    rng: &mut R,
) -> (ImageCharacteristics, ImageCharacteristics) {
    let bounds = space.angle_bounds();
    let (a, b) = (p1.angles(), p2.angles());
    let mut c1 = [0.0; 3];
    let mut c2 = [0.0; 3];
    for g in 0..3 {
        let u: f64 = rng.gen();
        let (x, y) = sbx_pair(a[g], b[g], u, eta);
        c1[g] = bounds[g].clamp(x);
        c2[g] = bounds[g].clamp(y);
    }
    let swap = rng.gen_bool(0.5);
    let (m1, m2) = if swap {
        (p2.model_id, p1.model_id)
    } else {
        (p1.model_id, p2.model_id)
    };
    let child1 = ImageCharacteristics { model_id: m1, ..p1.with_angles(c1) };
    let child2 = ImageCharacteristics { model_id: m2, ..p2.with_angles(c2) };
    (child1, child2)
}

/// Distribution index for the adaptive variants: linear in the parents' mean
/// best fitness over the uncovered objectives, so fitter parents produce
/// children closer to themselves.
pub fn adaptive_eta(parent1: &[f64], parent2: &[f64], uncovered: &BTreeSet<usize>, params: &OperatorParams) -> f64 {
    let best = |f: &[f64]| uncovered.iter().map(|&u| f[u]).fold(0.0, f64::max);
    let mean = (0.5 * (best(parent1) + best(parent2))).clamp(0.0, 1.0);
    eta_for(mean, params)
}

pub(crate) fn eta_for(mean_best: f64, params: &OperatorParams) -> f64 {
    params.eta_low + (params.eta_high - params.eta_low) * mean_best.clamp(0.0, 1.0)
}

/// Bounded polynomial mutation of a single value with draw `u`.
fn mutate_value(x: f64, b: GeneBounds, u: f64, eta: f64) -> f64 {
    let width = b.width();
    if width <= 0.0 {
        return b.lo();
    }
    let d1 = (x - b.lo()) / width;
    let d2 = (b.hi() - x) / width;
    let power = 1.0 / (eta + 1.0);
    let deltaq = if u < 0.5 {
        let xy = 1.0 - d1;
        let val = 2.0 * u + (1.0 - 2.0 * u) * xy.powf(eta + 1.0);
        val.powf(power) - 1.0
    } else {
        let xy = 1.0 - d2;
        let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy.powf(eta + 1.0);
        1.0 - val.powf(power)
    };
    b.clamp(x + deltaq * width)
}

/// Polynomial mutation; returns the mutated genome and how many genes
/// (including the model label) were selected for mutation.
pub(crate) fn mutate_counted<R: Rng + ?Sized>(
    genome: &ImageCharacteristics,
    eta_m: f64,
    p_m: f64,
    space: &SearchSpace,
    rng: &mut R,
) -> Result<(ImageCharacteristics, usize)> {
    let bounds = space.angle_bounds();
    let mut angles = genome.angles();
    let mut events = 0;
    for g in 0..3 {
        if rng.gen_bool(p_m) {
            let u: f64 = rng.gen();
            angles[g] = mutate_value(angles[g], bounds[g], u, eta_m);
            events += 1;
        }
    }
    let mut out = genome.with_angles(angles);
    if rng.gen_bool(p_m) {
        out.model_id = sample_model(space, rng)?;
        events += 1;
    }
    Ok((out, events))
}

pub fn polynomial_mutation<R: Rng + ?Sized>(
    genome: &ImageCharacteristics,
    eta_m: f64,
    p_m: f64,
    space: &SearchSpace,
    rng: &mut R,
) -> Result<ImageCharacteristics> {
    mutate_counted(genome, eta_m, p_m, space, rng).map(|(g, _)| g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn initial_population_in_bounds_and_deterministic() {
        let space = SearchSpace::default();
        let a = initial_population(27, &space, &mut rng(3)).unwrap();
        let b = initial_population(27, &space, &mut rng(3)).unwrap();
        assert_eq!(a.len(), 27);
        assert_eq!(a, b);
        assert!(a.iter().all(|g| space.contains(g)));
        assert!(initial_population(0, &space, &mut rng(3)).is_err());
        let empty = SearchSpace { models: vec![], ..SearchSpace::default() };
        assert!(initial_population(3, &empty, &mut rng(3)).is_err());
    }

    #[test]
    fn degenerate_bounds_collapse_genes() {
        let zero = GeneBounds::new(0.0, 0.0).unwrap();
        let space = SearchSpace { roll: zero, pitch: zero, yaw: zero, models: vec![4] };
        let pop = initial_population(1, &space, &mut rng(9)).unwrap();
        assert_eq!(pop, vec![ImageCharacteristics::new(0.0, 0.0, 0.0, 4)]);

        let c = GeneBounds::new(7.0, 7.0).unwrap();
        let space = SearchSpace { roll: c, pitch: c, yaw: c, models: vec![1] };
        let g = ImageCharacteristics::new(7.0, 7.0, 7.0, 1);
        let mut r = rng(1);
        for _ in 0..100 {
            assert_eq!(polynomial_mutation(&g, 20.0, 1.0, &space, &mut r).unwrap(), g);
        }
    }

    #[test]
    fn sbx_fixed_point_for_equal_parents() {
        let space = SearchSpace::default();
        let p = ImageCharacteristics::new(3.5, -12.0, 29.0, 2);
        let mut r = rng(5);
        for _ in 0..200 {
            let (c1, c2) = sbx_crossover(&p, &p, 20.0, &space, &mut r);
            assert_eq!(c1.angles(), p.angles());
            assert_eq!(c2.angles(), p.angles());
        }
    }

    #[test]
    fn sbx_spread_shrinks_with_eta() {
        let space = SearchSpace::default();
        let p1 = ImageCharacteristics::new(-5.0, 0.0, 5.0, 1);
        let p2 = ImageCharacteristics::new(5.0, 4.0, -5.0, 2);
        let spread = |eta: f64| {
            let mut r = rng(11);
            let mut total = 0.0;
            for _ in 0..10_000 {
                let (c1, _) = sbx_crossover(&p1, &p2, eta, &space, &mut r);
                total += (c1.roll - p1.roll).abs();
            }
            total / 10_000.0
        };
        assert!(spread(20.0) < spread(2.0));
    }

    #[test]
    fn sbx_exchanges_model_labels() {
        let space = SearchSpace::default();
        let p1 = ImageCharacteristics::new(0.0, 0.0, 0.0, 1);
        let p2 = ImageCharacteristics::new(1.0, 1.0, 1.0, 8);
        let mut r = rng(2);
        let mut swaps = 0;
        for _ in 0..1000 {
            let (c1, c2) = sbx_crossover(&p1, &p2, 20.0, &space, &mut r);
            let labels = BTreeSet::from([c1.model_id, c2.model_id]);
            assert_eq!(labels, BTreeSet::from([1, 8]));
            swaps += usize::from(c1.model_id == 8);
        }
        assert!((400..600).contains(&swaps));
    }

    #[test]
    fn adaptive_eta_anchors() {
        let params = OperatorParams::default();
        let u = BTreeSet::from([0, 1]);
        assert_eq!(adaptive_eta(&[0.0, 0.0], &[0.0, 0.0], &u, &params), 5.0);
        assert_eq!(adaptive_eta(&[1.0, 0.2], &[0.0, 1.0], &u, &params), 50.0);
        assert_eq!(eta_for(0.5, &params), 27.5);
        // only uncovered objectives count
        let only0 = BTreeSet::from([0]);
        assert_eq!(adaptive_eta(&[0.0, 1.0], &[0.0, 1.0], &only0, &params), 5.0);
    }

    #[test]
    fn no_mutation_when_probability_zero() {
        let space = SearchSpace::default();
        let g = ImageCharacteristics::new(1.0, 2.0, 3.0, 4);
        let mut r = rng(8);
        for _ in 0..1000 {
            assert_eq!(polynomial_mutation(&g, 20.0, 0.0, &space, &mut r).unwrap(), g);
        }
    }

    #[test]
    fn mutation_rate_matches_probability() {
        let space = SearchSpace::default();
        let g = ImageCharacteristics::new(1.0, 2.0, 3.0, 4);
        let mut r = rng(13);
        let trials = 10_000;
        let mut changed = 0usize;
        for _ in 0..trials {
            let m = polynomial_mutation(&g, 20.0, 0.25, &space, &mut r).unwrap();
            changed += (0..3).filter(|&i| m.angles()[i] != g.angles()[i]).count();
        }
        let rate = changed as f64 / (3 * trials) as f64;
        assert!((rate - 0.25).abs() <= 0.02, "rate {rate}");
    }

    proptest! {
        #[test]
        fn sbx_preserves_mean_when_unclamped(
            x1 in -10.0..10.0f64, x2 in -10.0..10.0f64, u in 0.0..1.0f64, eta in 0.5..60.0f64,
        ) {
            let (c1, c2) = sbx_pair(x1, x2, u, eta);
            prop_assert!((0.5 * (c1 + c2) - 0.5 * (x1 + x2)).abs() < 1e-9);
        }

        #[test]
        fn operators_stay_in_bounds(seed in any::<u64>(), eta in 0.5..60.0f64) {
            let space = SearchSpace::default();
            let mut r = rng(seed);
            let a = random_genome(&space, &mut r).unwrap();
            let b = random_genome(&space, &mut r).unwrap();
            let (c1, c2) = sbx_crossover(&a, &b, eta, &space, &mut r);
            prop_assert!(space.contains(&c1) && space.contains(&c2));
            let m = polynomial_mutation(&c1, eta, 1.0, &space, &mut r).unwrap();
            prop_assert!(space.contains(&m));
        }
    }
}
