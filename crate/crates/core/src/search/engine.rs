//! The generation loop shared by MOSA, FITEST and their adaptive variants,
//! plus the random-search baseline.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Algorithm, SearchConfig};
use super::operators::{adaptive_eta, initial_population, mutate_counted, random_genome, sbx_crossover};
use super::ranking::{crowding_distance, preference_sort};
use super::trace::{EvaluationRecord, GenerationRecord, SearchTrace};
use crate::error::{Error, Result};
use crate::sut::SystemUnderTest;
use crate::types::{Archive, EvaluatedTestCase, ImageCharacteristics, ObjectiveState};

/// A population member with its selection keys.
#[derive(Debug, Clone)]
pub struct Member {
    pub test: EvaluatedTestCase,
    pub rank: usize,
    pub crowding: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub archive: Archive,
    pub trace: SearchTrace,
    pub evaluations: Vec<EvaluationRecord>,
}

impl SearchOutcome {
    pub fn evaluations_used(&self) -> u64 {
        self.evaluations.len() as u64
    }
}

/// A run that stopped on an error; `partial` holds everything up to the
/// last completed generation.
#[derive(Debug)]
pub struct SearchAborted {
    pub error: Error,
    pub partial: SearchOutcome,
}

impl fmt::Display for SearchAborted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "search aborted after {} evaluations: {}",
            self.partial.evaluations_used(),
            self.error
        )
    }
}

impl std::error::Error for SearchAborted {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Folds tests into the archive in order.
pub fn update_archive<'a>(archive: &mut Archive, tests: impl IntoIterator<Item = &'a EvaluatedTestCase>) {
    for t in tests {
        archive.offer(t);
    }
}

/// Population size kept by `next_generation`.
pub fn population_target(algorithm: Algorithm, key_points: usize, uncovered: usize) -> usize {
    if algorithm.shrinks_population() {
        (2 * uncovered.div_ceil(2)).max(4)
    } else {
        key_points
    }
}

/// Ranks `tests` on the uncovered objectives and keeps the best `target`:
/// whole fronts while they fit, then the least crowded members of the
/// first front that does not.
pub fn select(tests: Vec<EvaluatedTestCase>, uncovered: &BTreeSet<usize>, target: usize) -> Vec<Member> {
    let fits: Vec<&[f64]> = tests.iter().map(|t| t.fitness.as_slice()).collect();
    let fronts = preference_sort(&fits, uncovered);
    let mut keep: Vec<(usize, usize, f64)> = Vec::with_capacity(target);
    for (rank, front) in fronts.iter().enumerate() {
        if keep.len() >= target {
            break;
        }
        let front_fits: Vec<&[f64]> = front.iter().map(|&i| fits[i]).collect();
        let cd = crowding_distance(&front_fits, uncovered);
        let mut order: Vec<usize> = (0..front.len()).collect();
        if keep.len() + front.len() > target {
            order.sort_by(|&a, &b| cd[b].total_cmp(&cd[a]).then(a.cmp(&b)));
            order.truncate(target - keep.len());
        }
        keep.extend(order.into_iter().map(|w| (front[w], rank, cd[w])));
    }
    let mut slots: Vec<Option<EvaluatedTestCase>> = tests.into_iter().map(Some).collect();
    keep.into_iter()
        .map(|(i, rank, crowding)| Member {
            test: slots[i].take().expect("each test selected once"),
            rank,
            crowding,
        })
        .collect()
}

/// Next population from parents and offspring.
pub fn next_generation(
    combined: Vec<EvaluatedTestCase>,
    uncovered: &BTreeSet<usize>,
    algorithm: Algorithm,
    key_points: usize,
) -> Vec<Member> {
    let target = population_target(algorithm, key_points, uncovered.len()).min(combined.len());
    select(combined, uncovered, target)
}

fn tournament<'a, R: Rng + ?Sized>(population: &'a [Member], rng: &mut R) -> &'a Member {
    let a = &population[rng.gen_range(0..population.len())];
    let b = &population[rng.gen_range(0..population.len())];
    if b.rank < a.rank || (b.rank == a.rank && b.crowding > a.crowding) {
        b
    } else {
        a
    }
}

/// Produces `count` children by binary tournament, SBX and polynomial
/// mutation. A single-member population is cloned and mutated.
pub fn generate_offspring_n<R: Rng + ?Sized>(
    population: &[Member],
    uncovered: &BTreeSet<usize>,
    cfg: &SearchConfig,
    count: usize,
    rng: &mut R,
) -> Result<Vec<ImageCharacteristics>> {
    let ops = &cfg.operators;
    let mutate = |g: &ImageCharacteristics, rng: &mut R| {
        mutate_counted(g, ops.eta_m, ops.mutation_probability, &cfg.space, rng).map(|(m, _)| m)
    };
    let mut children = Vec::with_capacity(count);
    if population.is_empty() {
        return Err(Error::invalid("cannot generate offspring from an empty population"));
    }
    if population.len() == 1 {
        for _ in 0..count {
            children.push(mutate(&population[0].test.ic, rng)?);
        }
        return Ok(children);
    }
    while children.len() < count {
        let a = tournament(population, rng);
        let b = tournament(population, rng);
        let (c1, c2) = if rng.gen_bool(ops.crossover_probability) {
            let eta = if cfg.algorithm.adaptive_crossover() && !uncovered.is_empty() {
                adaptive_eta(&a.test.fitness, &b.test.fitness, uncovered, ops)
            } else {
                ops.eta_c
            };
            sbx_crossover(&a.test.ic, &b.test.ic, eta, &cfg.space, rng)
        } else {
            (a.test.ic, b.test.ic)
        };
        children.push(mutate(&c1, rng)?);
        if children.len() < count {
            children.push(mutate(&c2, rng)?);
        }
    }
    Ok(children)
}

/// One child per population member.
pub fn generate_offspring<R: Rng + ?Sized>(
    population: &[Member],
    uncovered: &BTreeSet<usize>,
    cfg: &SearchConfig,
    rng: &mut R,
) -> Result<Vec<ImageCharacteristics>> {
    generate_offspring_n(population, uncovered, cfg, population.len(), rng)
}

struct RunState<'a, S: ?Sized> {
    cfg: &'a SearchConfig,
    sut: &'a S,
    rng: ChaCha8Rng,
    archive: Archive,
    objectives: ObjectiveState,
    trace: SearchTrace,
    records: Vec<EvaluationRecord>,
    generation: usize,
}

impl<'a, S: SystemUnderTest + ?Sized> RunState<'a, S> {
    fn new(cfg: &'a SearchConfig, sut: &'a S) -> Self {
        Self {
            cfg,
            sut,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            archive: Archive::new(cfg.epsilon),
            objectives: ObjectiveState::new(cfg.key_points, cfg.epsilon),
            trace: SearchTrace::default(),
            records: Vec::new(),
            generation: 0,
        }
    }

    fn used(&self) -> u64 {
        self.records.len() as u64
    }

    fn remaining(&self) -> usize {
        (self.cfg.budget - self.used()) as usize
    }

    fn evaluate(&mut self, ics: &[ImageCharacteristics]) -> Result<Vec<EvaluatedTestCase>> {
        let tests = self.sut.evaluate_batch(ics)?;
        if tests.len() != ics.len() {
            return Err(Error::invalid(format!(
                "SUT returned {} results for {} inputs",
                tests.len(),
                ics.len()
            )));
        }
        if let Some(t) = tests.iter().find(|t| t.key_points() != self.cfg.key_points) {
            return Err(Error::invalid(format!(
                "SUT returned {} fitness values, expected {}",
                t.key_points(),
                self.cfg.key_points
            )));
        }
        for t in &tests {
            self.records.push(EvaluationRecord::from_test(self.generation, t));
        }
        update_archive(&mut self.archive, &tests);
        self.objectives.absorb(&self.archive);
        Ok(tests)
    }

    fn snapshot(&mut self, population: usize) {
        let k = self.cfg.key_points;
        let mut archive_fitness = vec![0.0; k];
        for (i, t) in self.archive.entries() {
            archive_fitness[i] = t.fitness[i];
        }
        self.trace.generations.push(GenerationRecord {
            generation: self.generation,
            evaluations: self.used(),
            covered: self.objectives.covered().len(),
            uncovered: self.objectives.uncovered().len(),
            population,
            es: self.archive.len() as f64 / k as f64,
            archive_fitness,
        });
    }

    fn finish(self) -> SearchOutcome {
        SearchOutcome {
            archive: self.archive,
            trace: self.trace,
            evaluations: self.records,
        }
    }

    fn abort(self, error: Error) -> SearchAborted {
        SearchAborted { error, partial: self.finish() }
    }
}

fn preflight<S: SystemUnderTest + ?Sized>(cfg: &SearchConfig, sut: &S) -> Result<()> {
    cfg.validate()?;
    if sut.key_points() != cfg.key_points {
        return Err(Error::config(format!(
            "SUT has {} key-points but the configuration expects {}",
            sut.key_points(),
            cfg.key_points
        )));
    }
    Ok(())
}

/// Runs the configured algorithm.
pub fn run<S: SystemUnderTest + ?Sized>(cfg: &SearchConfig, sut: &S) -> Result<SearchOutcome, SearchAborted> {
    match cfg.algorithm {
        Algorithm::RandomSearch => run_random_search(cfg, sut),
        _ => run_search(cfg, sut),
    }
}

/// Many-objective search loop. Stops when the budget is spent or every
/// objective is covered.
pub fn run_search<S: SystemUnderTest + ?Sized>(cfg: &SearchConfig, sut: &S) -> Result<SearchOutcome, SearchAborted> {
    let mut st = RunState::new(cfg, sut);
    if let Err(error) = preflight(cfg, sut) {
        return Err(st.abort(error));
    }
    let genomes = match initial_population(cfg.population_size(), &cfg.space, &mut st.rng) {
        Ok(g) => g,
        Err(e) => return Err(st.abort(e)),
    };
    let tests = match st.evaluate(&genomes) {
        Ok(t) => t,
        Err(e) => return Err(st.abort(e)),
    };
    let n = tests.len();
    let mut population = select(tests, st.objectives.uncovered(), n);
    st.snapshot(population.len());

    while st.remaining() > 0 && !st.objectives.all_covered() {
        st.generation += 1;
        let count = population.len().min(st.remaining());
        let uncovered = st.objectives.uncovered().clone();
        let children = match generate_offspring_n(&population, &uncovered, cfg, count, &mut st.rng) {
            Ok(c) => c,
            Err(e) => return Err(st.abort(e)),
        };
        let offspring = match st.evaluate(&children) {
            Ok(t) => t,
            Err(e) => {
                st.generation -= 1;
                return Err(st.abort(e));
            }
        };
        let combined: Vec<EvaluatedTestCase> = population
            .into_iter()
            .map(|m| m.test)
            .chain(offspring)
            .collect();
        population = next_generation(combined, st.objectives.uncovered(), cfg.algorithm, cfg.key_points);
        st.snapshot(population.len());
    }
    Ok(st.finish())
}

/// Random-search baseline: every iteration samples `k` fresh genomes and
/// keeps the best per objective in the archive.
pub fn run_random_search<S: SystemUnderTest + ?Sized>(
    cfg: &SearchConfig,
    sut: &S,
) -> Result<SearchOutcome, SearchAborted> {
    let mut st = RunState::new(cfg, sut);
    if let Err(error) = preflight(cfg, sut) {
        return Err(st.abort(error));
    }
    loop {
        let count = cfg.population_size().min(st.remaining());
        let genomes: Result<Vec<_>> = (0..count).map(|_| random_genome(&cfg.space, &mut st.rng)).collect();
        let genomes = match genomes {
            Ok(g) => g,
            Err(e) => return Err(st.abort(e)),
        };
        if let Err(e) = st.evaluate(&genomes) {
            return Err(st.abort(e));
        }
        st.snapshot(count);
        if st.remaining() == 0 || st.objectives.all_covered() {
            break;
        }
        st.generation += 1;
    }
    Ok(st.finish())
}
