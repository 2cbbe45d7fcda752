//! Non-stochastic best-arm identification over tabular loss curves, with
//! successive-halving schedulers that can carry winning configurations across
//! a sequence of tuning tasks.
//!
//! The crate is organized around five layers:
//!
//! - [`bandit`] — the simulation environment: arms, per-pull loss/cost
//!   curves, the pull operation, ranking, and exact pull accounting.
//! - [`schedulers`] — Successive Halving (SH), RUSH (SH with an incumbent
//!   set carried across tasks), Hyperband, and HB-RUSH, plus the persistent
//!   FIFO incumbent store.
//! - [`theory`] — limit/gap/envelope quantities of the non-stochastic
//!   setting and the sufficient-budget bound under which RUSH provably
//!   identifies the best arm, with a randomized checker.
//! - [`benchgen`] — deterministic synthetic benchmark families with known
//!   ground truth, adversarial task inversion, cost models, and the
//!   versioned bench file format.
//! - [`harness`] — sequence runs with seeded permutations, paired
//!   comparisons, budget sweeps, and CSV/JSON report emission.

pub mod bandit;
pub mod benchgen;
pub mod harness;
pub mod schedulers;
pub mod theory;

pub(crate) mod seed;

pub use bandit::{
    pull, rank_by_current_loss, true_best_arm, ArmCurves, ArmId, BanditError, CostCurve,
    LossCurve, PullEntry, PullLedger, Ranking, TaskBench,
};
pub use schedulers::{
    hyperband_brackets, keep_set, pulls_per_arm, run_hyperband, run_rush, run_sh, BaiResult,
    Bracket, IncumbentStore, RungRecord, SchedulerConfig, SchedulerError,
};
