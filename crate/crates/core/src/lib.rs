//! Pareto-front search over merges of a long-reasoning ("System-2") and a
//! short-answer ("System-1") checkpoint.
//!
//! The crate covers the whole pipeline:
//!
//! - [`checkpoint`]: the PMRG tensor container, loading, saving and
//!   compatibility checks.
//! - [`merge`]: task-arithmetic, TIES and linear merges driven by a
//!   [`merge::Genotype`].
//! - [`evaluation`]: a deterministic simulated benchmark and an evaluator
//!   that replays externally produced per-item records.
//! - [`sampling`]: calibration matrices, entropy-based subset selection and
//!   rank-fidelity measurement.
//! - [`moea`]: NSGA-II with keyed randomness and Pareto utilities.
//! - [`report`]: per-benchmark accuracy and length-reduction tables.
//! - [`run`]: the config-driven search pipeline and run directory.
//! - [`cli`]: the `paretomerge` command line.

pub mod checkpoint;
pub mod cli;
pub mod evaluation;
pub mod io;
pub mod merge;
pub mod moea;
pub mod report;
pub mod rng;
pub mod run;
pub mod sampling;

pub use checkpoint::{check_compatible, load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, Tensor};
pub use evaluation::{Candidate, EvalError, Evaluator, ItemOutcome, ObjectiveVector};
pub use merge::{decode_genotype, Genotype, MergeEndpoints, MergeError, MergeKind};
pub use moea::{run_nsga2, ParetoFront, SearchConfig, SearchError, SearchOutcome};
pub use run::{run_evolve, RunConfig, RunError, RunStatus};
