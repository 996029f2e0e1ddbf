//! Symbolic regression by genetic programming with Zobrist-hashed duplicate
//! detection and a concurrent fitness cache.
//!
//! The core is generic over the floating-point type through [`Scalar`];
//! the aliases below fix it to `f64` (the default) or `f32`.

pub mod cache;
pub mod creator;
pub mod data;
pub mod engine;
pub mod experiment;
pub mod expr;
pub mod nsga2;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod selection;
pub mod variation;
pub mod zobrist;

pub use cache::{CacheStats, CachedFitness, FitnessCache};
pub use creator::TreeCreator;
pub use data::{ingest_csv, make_synthetic, read_csv, DataError};
pub use engine::{run, run_with_observer, EngineConfig, EngineError, GenerationStats, RunResult};
pub use experiment::{run_arms, run_experiment, ExperimentReport};
pub use expr::{r_squared, ExprError, Node, Symbol};
pub use optim::{levenberg_marquardt, LmConfig};
pub use scalar::Scalar;
pub use selection::{mdl_score, mdl_select, tournament_loss, MdlScore};
pub use variation::{crossover, Limits, MutationKind, Mutator};
pub use zobrist::{SwapDescriptor, ZobristTable};

pub type Tree = expr::Tree<f64>;
pub type Dataset = data::Dataset<f64>;
pub type Individual = engine::Individual<f64>;
pub type Tree32 = expr::Tree<f32>;
pub type Dataset32 = data::Dataset<f32>;
pub type Individual32 = engine::Individual<f32>;
