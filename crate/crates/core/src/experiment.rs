//! Paired cache-on/cache-off experiments and their CSV/JSON outputs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::data::Dataset;
use crate::engine::{repetition_seed, run, EngineConfig, EngineError, GenerationStats};
use crate::expr::r_squared;
use crate::scalar::Scalar;
use crate::selection::{mdl_of_tree, mdl_select, MdlScore, SelectionError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("no arms requested")]
    NoArms,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("writing {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrontMember {
    pub infix: String,
    pub error: f64,
    pub length: usize,
    pub mdl: MdlScore,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FinalModel {
    pub infix: String,
    pub length: usize,
    pub r2_train: f64,
    /// Absent when the dataset has no test rows.
    pub r2_test: Option<f64>,
    pub mdl: MdlScore,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub use_cache: bool,
    pub local_search_iterations: usize,
    pub total_evaluations: u64,
    pub evaluator_invocations: u64,
    pub cache_hits: u64,
    pub offspring: u64,
    pub elapsed_ms: f64,
    pub final_model: FinalModel,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub summary: RunSummary,
    pub generations: Vec<GenerationStats>,
    pub front: Vec<FrontMember>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArmReport {
    pub use_cache: bool,
    pub local_search_iterations: usize,
    pub repetitions: usize,
    pub total_evaluations: u64,
    pub elapsed_ms: f64,
    pub median_evaluations: f64,
    pub median_elapsed_ms: f64,
    pub median_r2_train: f64,
    pub std_r2_train: f64,
    pub median_r2_test: Option<f64>,
    pub std_r2_test: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairedSummary {
    pub local_search_iterations: usize,
    /// `1 - cached / uncached` model evaluations, summed over repetitions.
    pub saved_effort: f64,
    /// `uncached / cached` wall-clock time, summed over repetitions.
    pub speedup: f64,
    /// Median over repetitions of `r2_train(cached) - r2_train(uncached)`.
    pub median_r2_train_difference: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub config: EngineConfig,
    pub runs: Vec<RunRecord>,
    pub arms: Vec<ArmReport>,
    pub paired: Option<PairedSummary>,
}

/// One engine run followed by final-model selection on the training rows.
pub fn run_once<T: Scalar>(
    config: &EngineConfig,
    data: &Dataset<T>,
) -> Result<RunRecord, ExperimentError> {
    let result = run(config, data)?;
    let train = data.train_range();
    let test = data.test_range();
    let front = result.front();
    let (best, mdl) = mdl_select(&front, data, train.clone())?;
    let names = data.feature_names();
    let r2 = |rows: std::ops::Range<usize>| -> f64 {
        let pred = best.tree.evaluate(data, rows.clone());
        r_squared(&pred, &data.target()[rows]).map_or(f64::NEG_INFINITY, |v| v.as_f64())
    };
    let final_model = FinalModel {
        infix: best.tree.to_infix_with(names),
        length: best.length,
        r2_train: r2(train.clone()),
        r2_test: (test.len() >= 2).then(|| r2(test.clone())),
        mdl,
    };
    let members = front
        .iter()
        .map(|i| FrontMember {
            infix: i.tree.to_infix_with(names),
            error: i.error.as_f64(),
            length: i.length,
            mdl: mdl_of_tree(&i.tree, data, train.clone()),
        })
        .collect();
    Ok(RunRecord {
        summary: RunSummary {
            seed: config.seed,
            use_cache: config.use_cache,
            local_search_iterations: config.local_search_iterations,
            total_evaluations: result.total_evaluations,
            evaluator_invocations: result.evaluator_invocations,
            cache_hits: result.cache_hits,
            offspring: result.offspring,
            elapsed_ms: result.elapsed.as_secs_f64() * 1e3,
            final_model,
        },
        generations: result.generations,
        front: members,
    })
}

/// Runs every repetition under each requested cache setting, repetition
/// seeds being shared between arms.
pub fn run_arms<T: Scalar>(
    config: &EngineConfig,
    data: &Dataset<T>,
    repetitions: usize,
    arms: &[bool],
) -> Result<ExperimentReport, ExperimentError> {
    if repetitions == 0 {
        return Err(ExperimentError::NoRepetitions);
    }
    if arms.is_empty() {
        return Err(ExperimentError::NoArms);
    }
    let mut runs = Vec::with_capacity(repetitions * arms.len());
    for k in 0..repetitions {
        for &use_cache in arms {
            let cfg = EngineConfig {
                use_cache,
                seed: repetition_seed(config.seed, k),
                ..config.clone()
            };
            runs.push(run_once(&cfg, data)?);
        }
    }
    let arm_reports: Vec<ArmReport> = arms
        .iter()
        .map(|&c| arm_report(config, &runs, c, repetitions))
        .collect();
    let paired = (arms.contains(&true) && arms.contains(&false)).then(|| paired(config, &runs));
    Ok(ExperimentReport {
        config: config.clone(),
        runs,
        arms: arm_reports,
        paired,
    })
}

/// Both arms, paired by seed.
pub fn run_experiment<T: Scalar>(
    config: &EngineConfig,
    data: &Dataset<T>,
    repetitions: usize,
) -> Result<ExperimentReport, ExperimentError> {
    run_arms(config, data, repetitions, &[true, false])
}

fn arm_report(
    config: &EngineConfig,
    runs: &[RunRecord],
    use_cache: bool,
    repetitions: usize,
) -> ArmReport {
    let mine: Vec<&RunSummary> = runs
        .iter()
        .map(|r| &r.summary)
        .filter(|s| s.use_cache == use_cache)
        .collect();
    let col = |f: &dyn Fn(&RunSummary) -> f64| -> Vec<f64> { mine.iter().map(|s| f(s)).collect() };
    let tests: Vec<f64> = mine.iter().filter_map(|s| s.final_model.r2_test).collect();
    ArmReport {
        use_cache,
        local_search_iterations: config.local_search_iterations,
        repetitions,
        total_evaluations: mine.iter().map(|s| s.total_evaluations).sum(),
        elapsed_ms: mine.iter().map(|s| s.elapsed_ms).sum(),
        median_evaluations: median(&col(&|s| s.total_evaluations as f64)),
        median_elapsed_ms: median(&col(&|s| s.elapsed_ms)),
        median_r2_train: median(&col(&|s| s.final_model.r2_train)),
        std_r2_train: std_dev(&col(&|s| s.final_model.r2_train)),
        median_r2_test: (!tests.is_empty()).then(|| median(&tests)),
        std_r2_test: (!tests.is_empty()).then(|| std_dev(&tests)),
    }
}

fn paired(config: &EngineConfig, runs: &[RunRecord]) -> PairedSummary {
    let arm = |c: bool| {
        runs.iter()
            .map(|r| &r.summary)
            .filter(move |s| s.use_cache == c)
    };
    let evals = |c: bool| arm(c).map(|s| s.total_evaluations as f64).sum::<f64>();
    let time = |c: bool| arm(c).map(|s| s.elapsed_ms).sum::<f64>();
    let diffs: Vec<f64> = arm(true)
        .zip(arm(false))
        .map(|(a, b)| a.final_model.r2_train - b.final_model.r2_train)
        .collect();
    PairedSummary {
        local_search_iterations: config.local_search_iterations,
        saved_effort: saved_effort(evals(true), evals(false)),
        speedup: time(false) / time(true),
        median_r2_train_difference: median(&diffs),
    }
}

pub fn saved_effort(cached: f64, uncached: f64) -> f64 {
    1.0 - cached / uncached
}

/// Median with NaN sorted last; NaN for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[derive(Serialize)]
struct GenerationRow {
    generation: usize,
    evaluations_total: u64,
    evaluations_cached: u64,
    cache_size: u64,
    avg_fitness: f64,
    avg_length: f64,
    best_error: f64,
    front_size: usize,
    elapsed_ms: u128,
}

#[derive(Serialize)]
struct CacheRow {
    generation: usize,
    cache_hits: u64,
    cache_misses: u64,
    cache_size: u64,
}

/// Per-generation table in fixed column order.
pub fn write_generations_csv<W: Write>(
    w: W,
    generations: &[GenerationStats],
) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    for g in generations {
        out.serialize(GenerationRow {
            generation: g.generation,
            evaluations_total: g.evaluations_total,
            evaluations_cached: g.evaluations_cached,
            cache_size: g.cache_size,
            avg_fitness: g.avg_fitness,
            avg_length: g.avg_length,
            best_error: g.best_error,
            front_size: g.front_size,
            elapsed_ms: g.elapsed_ms,
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_cache_csv<W: Write>(w: W, generations: &[GenerationStats]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    for g in generations {
        out.serialize(CacheRow {
            generation: g.generation,
            cache_hits: g.cache_hits,
            cache_misses: g.cache_misses,
            cache_size: g.cache_size,
        })?;
    }
    out.flush()?;
    Ok(())
}

/// File stem shared by the outputs of one run.
pub fn run_tag(s: &RunSummary) -> String {
    format!(
        "ls{}_{}_seed{}",
        s.local_search_iterations,
        if s.use_cache { "cached" } else { "uncached" },
        s.seed
    )
}

#[derive(Serialize)]
struct FrontReport<'a> {
    #[serde(flatten)]
    summary: &'a RunSummary,
    front: &'a [FrontMember],
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum SummaryRecord<'a> {
    Arm(&'a ArmReport),
    Paired(&'a PairedSummary),
}

fn create(path: &Path) -> Result<BufWriter<File>, ExperimentError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Writes, under `dir`, one generations CSV per run, one cache CSV per
/// cached run, one front report per run, and appends one summary line per
/// arm plus the paired summary to `summary.jsonl`.
pub fn write_outputs(
    dir: &Path,
    report: &ExperimentReport,
) -> Result<Vec<PathBuf>, ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for r in &report.runs {
        let tag = run_tag(&r.summary);
        let path = dir.join(format!("generations_{tag}.csv"));
        write_generations_csv(create(&path)?, &r.generations).map_err(|source| {
            ExperimentError::Csv {
                path: path.clone(),
                source,
            }
        })?;
        written.push(path);
        if r.summary.use_cache {
            let path = dir.join(format!("cache_{tag}.csv"));
            write_cache_csv(create(&path)?, &r.generations).map_err(|source| {
                ExperimentError::Csv {
                    path: path.clone(),
                    source,
                }
            })?;
            written.push(path);
        }
        let path = dir.join(format!("front_{tag}.json"));
        let mut w = create(&path)?;
        serde_json::to_writer_pretty(
            &mut w,
            &FrontReport {
                summary: &r.summary,
                front: &r.front,
            },
        )?;
        w.flush().map_err(|source| ExperimentError::Io {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    let path = dir.join("summary.jsonl");
    let mut w = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map(BufWriter::new)
        .map_err(|source| ExperimentError::Io {
            path: path.clone(),
            source,
        })?;
    let mut lines = Vec::new();
    for a in &report.arms {
        lines.push(serde_json::to_string(&SummaryRecord::Arm(a))?);
    }
    if let Some(p) = &report.paired {
        lines.push(serde_json::to_string(&SummaryRecord::Paired(p))?);
    }
    for l in lines {
        writeln!(w, "{l}").map_err(|source| ExperimentError::Io {
            path: path.clone(),
            source,
        })?;
    }
    w.flush().map_err(|source| ExperimentError::Io {
        path: path.clone(),
        source,
    })?;
    written.push(path);
    Ok(written)
}
