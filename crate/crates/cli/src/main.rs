use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use zobrist_sr::engine::{EngineConfig, DEFAULT_HASH_SEED};
use zobrist_sr::experiment::{run_arms, write_outputs};
use zobrist_sr::rng::seeded;
use zobrist_sr::{ingest_csv, make_synthetic, tournament_loss, Dataset};

#[derive(Parser)]
#[command(
    name = "zsr",
    version,
    about = "Symbolic regression with Zobrist-hashed fitness caching"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve models, with and/or without the fitness cache.
    Run(RunArgs),
    /// Estimate the fraction of a population never picked by tournaments.
    TournamentLoss(LossArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CacheArms {
    True,
    False,
    Both,
}

#[derive(Args)]
struct RunArgs {
    /// CSV file with a header row.
    #[arg(
        long,
        conflicts_with = "synthetic",
        required_unless_present = "synthetic"
    )]
    dataset: Option<PathBuf>,
    /// Target column of --dataset.
    #[arg(long, requires = "dataset")]
    target: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    train_fraction: f64,
    /// Built-in problem instead of a CSV file: poly2 or trig.
    #[arg(long)]
    synthetic: Option<String>,
    /// Rows of the synthetic problem.
    #[arg(long, default_value_t = 5000)]
    rows: usize,
    /// Seed of the synthetic noise and of the train/test shuffle.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    #[arg(long, default_value_t = 1000)]
    population_size: usize,
    #[arg(long, default_value_t = 300)]
    max_generations: usize,
    #[arg(long, default_value_t = 20)]
    max_length: usize,
    #[arg(long, default_value_t = 10)]
    max_depth: usize,
    #[arg(long, default_value_t = 10)]
    max_initial_length: usize,
    #[arg(long, default_value_t = 1.0)]
    crossover_probability: f64,
    #[arg(long, default_value_t = 0.25)]
    mutation_probability: f64,
    /// Comma-separated sweep, e.g. 0,1,10,50,100.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    local_search_iterations: Vec<usize>,
    #[arg(long, value_enum, default_value_t = CacheArms::Both)]
    use_cache: CacheArms,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed of the hashing table.
    #[arg(long, default_value_t = DEFAULT_HASH_SEED)]
    hash_seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Repetitions per configuration; repetition k uses seed + k.
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct LossArgs {
    #[arg(long, default_value_t = 1000)]
    population_size: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
    tournament_sizes: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn load(args: &RunArgs) -> Result<Dataset> {
    if let Some(name) = &args.synthetic {
        return make_synthetic(name, args.rows, args.data_seed)
            .with_context(|| format!("building synthetic problem `{name}`"));
    }
    let path = args
        .dataset
        .as_ref()
        .context("--dataset or --synthetic is required")?;
    let target = args
        .target
        .as_deref()
        .context("--target is required with --dataset")?;
    ingest_csv(path, target, args.train_fraction, args.data_seed)
        .with_context(|| format!("reading {}", path.display()))
}

fn run(args: RunArgs) -> Result<()> {
    if args.repetitions == 0 {
        bail!("--repetitions must be at least 1");
    }
    let data = load(&args)?;
    let arms: &[bool] = match args.use_cache {
        CacheArms::True => &[true],
        CacheArms::False => &[false],
        CacheArms::Both => &[true, false],
    };
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let summary = args.out_dir.join("summary.jsonl");
    if summary.exists() {
        std::fs::remove_file(&summary)
            .with_context(|| format!("removing {}", summary.display()))?;
    }
    println!(
        "dataset: {} rows ({} train / {} test), {} features, target `{}`",
        data.rows(),
        data.train_range().len(),
        data.test_range().len(),
        data.feature_count(),
        data.target_name()
    );
    for &ls in &args.local_search_iterations {
        let config = EngineConfig {
            population_size: args.population_size,
            max_generations: args.max_generations,
            max_length: args.max_length,
            max_depth: args.max_depth,
            max_initial_length: args.max_initial_length,
            crossover_probability: args.crossover_probability,
            mutation_probability: args.mutation_probability,
            local_search_iterations: ls,
            use_cache: arms[0],
            seed: args.seed,
            hash_seed: args.hash_seed,
            threads: args.threads,
            ..EngineConfig::default()
        };
        let report = run_arms(&config, &data, args.repetitions, arms)?;
        write_outputs(&args.out_dir, &report)?;
        for a in &report.arms {
            println!(
                "ls={ls:<3} cache={:<5} evaluations={:<10} median R2 train={:.6} test={} time={:.0}ms",
                a.use_cache,
                a.total_evaluations,
                a.median_r2_train,
                a.median_r2_test.map_or("n/a".into(), |v| format!("{v:.6}")),
                a.elapsed_ms
            );
        }
        if let Some(p) = &report.paired {
            println!(
                "ls={ls:<3} saved_effort={:.4} speedup={:.3} median R2 train difference={:+.6}",
                p.saved_effort, p.speedup, p.median_r2_train_difference
            );
        }
        for r in report
            .runs
            .iter()
            .filter(|r| r.summary.use_cache == arms[0])
            .take(1)
        {
            let m = &r.summary.final_model;
            println!("ls={ls:<3} model (seed {}): {}", r.summary.seed, m.infix);
        }
    }
    println!("outputs written to {}", args.out_dir.display());
    Ok(())
}

fn loss(args: LossArgs) -> Result<()> {
    if args.population_size < 2 || args.trials == 0 || args.tournament_sizes.contains(&0) {
        bail!("need population-size >= 2, trials >= 1 and tournament sizes >= 1");
    }
    let mut rng = seeded(args.seed);
    println!("tournament_size,loss");
    for &t in &args.tournament_sizes {
        let v = tournament_loss(args.population_size, t, args.trials, &mut rng);
        println!("{t},{v:.6}");
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::TournamentLoss(a) => loss(a),
    }
}
