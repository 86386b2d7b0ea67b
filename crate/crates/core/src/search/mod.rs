//! Many-objective test generation: MOSA, FITEST, their adaptive-crossover
//! variants and a random-search baseline.

mod config;
mod engine;
mod operators;
mod ranking;
mod replay;
mod trace;

pub use config::{Algorithm, OperatorParams, SearchConfig};
pub use engine::{
    generate_offspring, generate_offspring_n, next_generation, population_target, run, run_random_search,
    run_search, select, update_archive, Member, SearchAborted, SearchOutcome,
};
pub use operators::{adaptive_eta, initial_population, polynomial_mutation, random_genome, sbx_crossover};
pub use ranking::{crowding_distance, dominates, preference_sort};
pub use replay::{replay_archive, ReplayEntry, REPLAY_TOLERANCE};
pub use trace::{EvaluationRecord, GenerationRecord, SearchTrace};
