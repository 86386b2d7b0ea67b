use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kpsearch::commands::{compare, explain, replay, run};
use kpsearch::config::{FileConfig, Overrides, RunSettings, SutSpec};
use kpsearch::{CliError, CliResult};
use kpsearch_core::explainer::TreeParams;
use kpsearch_core::SearchSpace;

#[derive(Parser)]
#[command(name = "kpsearch", version, about = "Search-based test generation for key-point detectors")]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Shared {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output location: run directory, comparison CSV or explanation directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; repetitions derive their own seeds from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Repetitions evaluated in parallel.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// rs, mosa, mosa+, fitest or fitest+.
    #[arg(long, global = true)]
    algorithm: Option<String>,
    /// Fitness evaluations per run.
    #[arg(long, global = true)]
    budget: Option<u64>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// `synthetic` or `external:<command>`.
    #[arg(long, global = true)]
    sut: Option<String>,
    /// JSON plant for the synthetic SUT instead of the built-in one.
    #[arg(long, global = true)]
    plant: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more seeded search repetitions.
    Run,
    /// Compare sets of runs with Mann-Whitney / Wilcoxon tests and Vargha-Delaney effect sizes.
    Compare {
        /// A named set of runs, e.g. `--set mosa=runs/mosa`; repeat for each set.
        #[arg(long = "set", value_name = "NAME=DIR", required = true)]
        sets: Vec<String>,
        /// Pair to compare, e.g. `--pair mosa:rs`; all pairs when omitted.
        #[arg(long = "pair", value_name = "A:B")]
        pairs: Vec<String>,
    },
    /// Learn regression trees explaining NE from the image characteristics.
    Explain {
        /// Trace files or run directories.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Key-points to explain, e.g. `1-5,26`; all when omitted.
        #[arg(long)]
        key_points: Option<String>,
        #[arg(long, default_value_t = 40)]
        min_leaf: usize,
        #[arg(long, default_value_t = 1.0 / 3.0)]
        prune_fraction: f64,
        #[arg(long, default_value_t = 1e-3)]
        min_variance_prop: f64,
        #[arg(long, default_value_t = 10)]
        folds: usize,
    },
    /// Re-evaluate an archive and check the stored fitness vectors.
    Replay {
        /// Archive file or run directory; its summary.json must sit beside it.
        input: PathBuf,
    },
}

fn file_config(shared: &Shared) -> CliResult<FileConfig> {
    shared.config.as_deref().map(FileConfig::load).transpose().map(Option::unwrap_or_default)
}

fn overrides(shared: &Shared) -> Overrides {
    Overrides {
        algorithm: shared.algorithm.clone(),
        budget: shared.budget,
        seed: shared.seed,
        epsilon: shared.epsilon,
        reps: shared.reps,
        jobs: shared.jobs,
        out: shared.out.clone(),
        sut: shared.sut.clone(),
        plant: shared.plant.clone(),
    }
}

fn cmd_run(shared: &Shared) -> CliResult<()> {
    let settings = RunSettings::resolve(file_config(shared)?, overrides(shared))?;
    let summaries = run::execute(&settings)?;
    for s in &summaries {
        println!(
            "{} rep {} seed {}: ES {:.4} ({} of {} covered), {} evaluations",
            s.algorithm,
            s.rep,
            s.seed,
            s.es,
            s.covered.len(),
            s.key_points,
            s.evaluations
        );
    }
    println!("wrote {}", settings.out.display());
    Ok(())
}

fn split_pair<'a>(s: &'a str, sep: char, what: &str) -> CliResult<(&'a str, &'a str)> {
    match s.split_once(sep) {
        Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok((a, b)),
        _ => Err(CliError::usage(format!("bad {what} '{s}'"))),
    }
}

fn cmd_compare(shared: &Shared, sets: &[String], pairs: &[String]) -> CliResult<()> {
    let sets = sets
        .iter()
        .map(|s| {
            let (name, dir) = split_pair(s, '=', "--set (expected NAME=DIR)")?;
            compare::RunSet::load(name, Path::new(dir))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let pairs = pairs
        .iter()
        .map(|p| split_pair(p, ':', "--pair (expected A:B)").map(|(a, b)| (a.to_string(), b.to_string())))
        .collect::<CliResult<Vec<_>>>()?;
    let rows = compare::execute(&sets, &pairs)?;
    compare::write_csv(std::io::stdout().lock(), &rows)?;
    if let Some(path) = &shared.out {
        let file = std::fs::File::create(path)
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", path.display())))?;
        compare::write_csv(file, &rows)?;
    }
    Ok(())
}

fn cmd_explain(shared: &Shared, inputs: &[PathBuf], selector: Option<&str>, params: TreeParams, folds: usize) -> CliResult<()> {
    let file = file_config(shared)?;
    let records = explain::load_traces(inputs)?;
    let k = records[0].fitness.len();
    let opts = explain::ExplainOptions {
        key_points: explain::parse_selector(selector.unwrap_or(""), k)?,
        params,
        folds,
        models: file.space.unwrap_or_else(SearchSpace::default).models,
        out: shared.out.clone().unwrap_or_else(|| PathBuf::from("explain")),
    };
    let outcomes = explain::explain(&records, &opts);
    let warnings = explain::write_outputs(&outcomes, &opts.out)?;
    let mut err = std::io::stderr().lock();
    for w in &warnings {
        let _ = writeln!(err, "{w}");
    }
    for o in &outcomes {
        if let explain::Outcome::Built(e) = o {
            let top = e.rules.first().map(ToString::to_string).unwrap_or_default();
            println!("KP{}: {} leaves, CV MAE {:.5}, top rule {top}", e.index + 1, e.tree.leaves().len(), e.cv_mae);
        }
    }
    println!("wrote {}", opts.out.display());
    Ok(())
}

fn cmd_replay(shared: &Shared, input: &Path) -> CliResult<()> {
    let (archive, summary) = replay::locate(input)?;
    let explicit = shared.sut.is_some() || shared.plant.is_some() || shared.config.is_some();
    let sut = if explicit {
        RunSettings::resolve(file_config(shared)?, overrides(shared))?.sut
    } else {
        // fall back to the SUT recorded by the run
        match summary.sut.split_once(':') {
            Some(("synthetic", plant)) => SutSpec::Synthetic { plant: Some(plant.into()) },
            Some(("external", cmd)) => SutSpec::External { command: cmd.into(), timeout_secs: 30.0 },
            _ => SutSpec::parse(&summary.sut, None, 30.0)?,
        }
    };
    let entries = replay::execute(&archive, &summary, &sut)?;
    print!("{}", replay::check(&entries)?);
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let shared = &cli.shared;
    match &cli.command {
        Command::Run => cmd_run(shared),
        Command::Compare { sets, pairs } => cmd_compare(shared, sets, pairs),
        Command::Explain { inputs, key_points, min_leaf, prune_fraction, min_variance_prop, folds } => {
            let params = TreeParams {
                min_leaf: *min_leaf,
                prune_fraction: *prune_fraction,
                min_variance_prop: *min_variance_prop,
                seed: shared.seed.unwrap_or(0),
            };
            cmd_explain(shared, inputs, key_points.as_deref(), params, *folds)
        }
        Command::Replay { input } => cmd_replay(shared, input),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kpsearch: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
