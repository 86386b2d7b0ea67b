//! Whole-run properties of the search loop on the synthetic SUT.

use std::collections::BTreeSet;

use kpsearch_core::metrics::effectiveness_score;
use kpsearch_core::search::{population_target, replay_archive, run, Algorithm, SearchConfig, SearchOutcome};
use kpsearch_core::{Archive, SyntheticSut, SystemUnderTest};

fn outcome_bytes(o: &SearchOutcome) -> String {
    let archive: Vec<_> = o.archive.entries().collect();
    serde_json::to_string(&(archive, &o.trace, &o.evaluations)).unwrap()
}

fn check_invariants(cfg: &SearchConfig, o: &SearchOutcome, sut: &SyntheticSut) {
    let gens = &o.trace.generations;
    assert!(!gens.is_empty());
    assert!(o.evaluations_used() <= cfg.budget);
    let last = gens.last().unwrap();
    assert_eq!(last.evaluations, o.evaluations_used());
    if last.uncovered > 0 {
        assert_eq!(o.evaluations_used(), cfg.budget, "{} stopped early", cfg.algorithm);
    }
    for pair in gens.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        assert!(b.covered >= a.covered);
        assert_eq!(b.covered + b.uncovered, cfg.key_points);
        assert!(b.evaluations > a.evaluations);
        for (x, y) in a.archive_fitness.iter().zip(&b.archive_fitness) {
            assert!(y >= x);
        }
    }
    for g in gens.iter().skip(1) {
        match cfg.algorithm {
            Algorithm::Fitest | Algorithm::FitestPlus => {
                assert_eq!(g.population, (2 * g.uncovered.div_ceil(2)).max(4));
                assert_eq!(g.population, population_target(cfg.algorithm, cfg.key_points, g.uncovered));
            }
            Algorithm::Mosa | Algorithm::MosaPlus => assert_eq!(g.population, cfg.key_points),
            Algorithm::RandomSearch => {}
        }
    }

    // folding the evaluation log through a fresh archive reproduces the per-objective best
    let mut best = vec![0.0f64; cfg.key_points];
    let mut covered = BTreeSet::new();
    for rec in &o.evaluations {
        for (i, &f) in rec.fitness.iter().enumerate() {
            if f >= cfg.epsilon {
                covered.insert(i);
                best[i] = best[i].max(f);
            }
        }
    }
    assert_eq!(o.archive.objectives(), covered);
    for (i, t) in o.archive.entries() {
        assert_eq!(t.fitness[i], best[i]);
    }
    assert!(replay_archive(&o.archive, sut).unwrap().iter().all(|e| e.passed()));
}

#[test]
fn every_algorithm_keeps_its_invariants() {
    let sut = SyntheticSut::default_plant();
    for alg in Algorithm::ALL {
        for seed in [1, 2] {
            let cfg = SearchConfig::new(alg, 4000, seed);
            let o = run(&cfg, &sut).unwrap();
            check_invariants(&cfg, &o, &sut);
        }
    }
}

#[test]
fn identical_seeds_give_identical_runs() {
    let sut = SyntheticSut::default_plant();
    for alg in Algorithm::ALL {
        let cfg = SearchConfig::new(alg, 3000, 42);
        let a = run(&cfg, &sut).unwrap();
        let b = run(&cfg, &sut.clone()).unwrap();
        assert_eq!(outcome_bytes(&a), outcome_bytes(&b), "{alg}");
        let c = run(&SearchConfig::new(alg, 3000, 43), &sut).unwrap();
        assert_ne!(outcome_bytes(&a), outcome_bytes(&c), "{alg}");
    }
}

#[test]
fn search_makes_progress_over_the_initial_population() {
    let sut = SyntheticSut::default_plant();
    let cfg = SearchConfig::new(Algorithm::Mosa, 20_000, 7);
    let o = run(&cfg, &sut).unwrap();
    let first = &o.trace.generations[0];
    let last = o.trace.last().unwrap();
    assert!(last.uncovered < first.uncovered);
    assert!(effectiveness_score(&o.archive, 27) > first.es);
}

#[test]
fn budget_of_one_population_is_a_single_round() {
    let sut = SyntheticSut::default_plant();
    for alg in [Algorithm::Mosa, Algorithm::Fitest, Algorithm::RandomSearch] {
        let o = run(&SearchConfig::new(alg, 27, 5), &sut).unwrap();
        assert_eq!(o.trace.generations.len(), 1);
        assert_eq!(o.evaluations_used(), 27);
        let mut archive = Archive::new(0.05);
        for t in o.evaluations.iter().map(|r| sut.evaluate(&r.ic).unwrap()) {
            archive.offer(&t);
        }
        assert_eq!(archive, o.archive);
    }
}

#[test]
fn random_search_samples_one_population_per_iteration() {
    let sut = SyntheticSut::default_plant();
    let o = run(&SearchConfig::new(Algorithm::RandomSearch, 27 * 12, 9), &sut).unwrap();
    assert_eq!(o.trace.generations.len(), 12);
    assert!(o.trace.generations.iter().all(|g| g.population == 27));
    // a budget that is not a multiple of k ends on a short iteration
    let o = run(&SearchConfig::new(Algorithm::RandomSearch, 27 * 3 + 5, 9), &sut).unwrap();
    let sizes: Vec<usize> = o.trace.generations.iter().map(|g| g.population).collect();
    assert_eq!(sizes, vec![27, 27, 27, 5]);
}

#[test]
fn adaptive_and_fixed_crossover_only_differ_through_sbx() {
    let sut = SyntheticSut::default_plant();
    let mut fixed = SearchConfig::new(Algorithm::Mosa, 3000, 3);
    let mut adaptive = SearchConfig::new(Algorithm::MosaPlus, 3000, 3);
    assert_ne!(outcome_bytes(&run(&fixed, &sut).unwrap()), outcome_bytes(&run(&adaptive, &sut).unwrap()));
    fixed.operators.crossover_probability = 0.0;
    adaptive.operators.crossover_probability = 0.0;
    assert_eq!(outcome_bytes(&run(&fixed, &sut).unwrap()), outcome_bytes(&run(&adaptive, &sut).unwrap()));
}

#[test]
fn mismatched_key_points_abort_cleanly() {
    let sut = SyntheticSut::default_plant();
    let mut cfg = SearchConfig::new(Algorithm::Mosa, 1000, 1);
    cfg.key_points = 5;
    let err = run(&cfg, &sut).unwrap_err();
    assert_eq!(err.partial.evaluations_used(), 0);
    assert_eq!(sut.evaluations(), 0);
}
