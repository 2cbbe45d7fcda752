//! Rung-based best-arm schedulers.
//!
//! [`run_sh`] is plain Successive Halving: rounds k = 0..⌈log_η n⌉−1, each
//! round pulling every active arm ⌊B / (max(1, ⌊n/η^k⌋) · ⌈log_η n⌉)⌋ times
//! and keeping the top ⌊n/η^{k+1}⌋ of the loss ranking.
//!
//! [`run_rush`] (repeated unequal successive halving) is the same loop over
//! the union of the task's new arms and the incumbent set A* of winners from
//! earlier tasks, with one extra cut: arms ranked at or below the best active
//! incumbent are eliminated. With an empty store the two are identical; with
//! a useful incumbent whole rungs collapse to a single arm and their budget
//! share is simply never spent.
//!
//! Hyperband and its incumbent-carrying variant live in [`hyperband`]; the
//! persistent store in [`store`].

mod hyperband;
mod store;

pub use hyperband::{
    bracket_equivalent_budget, hb_max_pulls_per_arm, hyperband_brackets, run_hyperband,
    run_hyperband_merged, ArmStream, Bracket, QueueStream,
};
pub use store::IncumbentStore;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandit::{
    pull, rank_by_current_loss, ArmId, BanditError, PullLedger, Ranking, TaskBench,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchedulerError {
    /// The per-arm pull count came out zero: the budget cannot cover even one
    /// pull per arm per rung.
    #[error("budget {budget} too small for {n} arms at eta {eta} (zero pulls at rung {rung})")]
    BudgetTooSmall {
        budget: u64,
        n: usize,
        eta: u32,
        rung: usize,
    },
    #[error("invalid scheduler configuration: {0}")]
    InvalidConfig(String),
    /// The arm stream could not supply a bracket's fresh arms.
    #[error("arm stream supplied {got} arms but the bracket needs {need}")]
    ArmStreamExhausted { need: usize, got: usize },
    #[error(transparent)]
    Bandit(#[from] BanditError),
}

/// Knobs shared by every scheduler run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    /// Halving rate η ≥ 2.
    pub eta: u32,
    /// Total pull budget B for one best-arm problem (SH/RUSH; the Hyperband
    /// variants are driven by their max resource instead).
    pub budget: u64,
    /// Incumbent store capacity; `None` = unlimited.
    pub incumbent_cap: Option<usize>,
}

impl SchedulerConfig {
    pub fn new(eta: u32, budget: u64) -> Self {
        SchedulerConfig {
            eta,
            budget,
            incumbent_cap: None,
        }
    }

    pub fn with_incumbent_cap(mut self, cap: usize) -> Self {
        self.incumbent_cap = Some(cap);
        self
    }

    pub(crate) fn validate(&self) -> Result<(), SchedulerError> {
        if self.eta < 2 {
            return Err(SchedulerError::InvalidConfig(format!(
                "eta must be at least 2, got {}",
                self.eta
            )));
        }
        if self.budget == 0 {
            return Err(SchedulerError::InvalidConfig("budget must be positive".into()));
        }
        if self.incumbent_cap == Some(0) {
            return Err(SchedulerError::InvalidConfig(
                "incumbent cap must be positive (or unlimited)".into(),
            ));
        }
        Ok(())
    }
}

/// Smallest r with eta^r ≥ n, i.e. ⌈log_eta n⌉ for n ≥ 1.
pub fn ceil_log(eta: u32, n: usize) -> usize {
    debug_assert!(eta >= 2 && n >= 1);
    let mut power: u128 = 1;
    let mut r = 0;
    while power < n as u128 {
        power *= u128::from(eta);
        r += 1;
    }
    r
}

/// ⌊n / eta^k⌋ computed by repeated division (⌊⌊n/η⌋/η⌋ = ⌊n/η²⌋, so this
/// never overflows regardless of k).
pub fn floor_div_pow(n: usize, eta: u32, k: usize) -> usize {
    let mut v = n;
    for _ in 0..k {
        if v == 0 {
            return 0;
        }
        v /= eta as usize;
    }
    v
}

/// Per-arm pulls in round k: ⌊B / (max(1, ⌊n/η^k⌋) · ⌈log_η n⌉)⌋.
///
/// `n` is the initial arm count of the problem, even when the active set has
/// already shrunk below ⌊n/η^k⌋ — the denominator follows the schedule, not
/// the survivors, which is exactly where RUSH's savings come from.
pub fn pulls_per_arm(budget: u64, n: usize, k: usize, eta: u32) -> u64 {
    debug_assert!(n >= 2, "rounds are only defined for n >= 2");
    let rounds = ceil_log(eta, n) as u64;
    let share = floor_div_pow(n, eta, k).max(1) as u64;
    budget / (share * rounds)
}

/// Survivor-count threshold for the cut at the end of round k:
/// max(min(r*, ⌊n/η^{k+1}⌋), 1), with r* = ∞ when no incumbent is active.
///
/// ⌊n/η^{k+1}⌋ is the next rung's size — the standard SH cut; an active
/// incumbent at rank r* tightens it so that only arms strictly beating the
/// best incumbent survive (the incumbent itself included only at rank 0).
/// The clamp to ≥ 1 means the rank-0 arm always survives.
pub fn keep_threshold(r_star: Option<usize>, n: usize, k: usize, eta: u32) -> usize {
    let cap = floor_div_pow(n, eta, k + 1);
    r_star.map_or(cap, |r| r.min(cap)).max(1)
}

/// Applies the round-k cut to a ranking: survivors are exactly the arms with
/// rank below [`keep_threshold`]. Never empty.
pub fn keep_set(
    ranking: &Ranking,
    incumbents_active: &BTreeSet<ArmId>,
    n: usize,
    k: usize,
    eta: u32,
) -> BTreeSet<ArmId> {
    let r_star = min_incumbent_rank(ranking, incumbents_active);
    let threshold = keep_threshold(r_star, n, k, eta);
    ranking
        .iter()
        .filter(|&(_, r)| r < threshold)
        .map(|(a, _)| a.clone())
        .collect()
}

pub(crate) fn min_incumbent_rank(
    ranking: &Ranking,
    incumbents_active: &BTreeSet<ArmId>,
) -> Option<usize> {
    incumbents_active
        .iter()
        .filter_map(|a| ranking.rank_of(a))
        .min()
}

/// One executed round: who was active, how much each arm was pulled, where
/// the best incumbent ranked, the cut threshold, and who survived.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RungRecord {
    /// Hyperband bracket index s, `None` for plain SH/RUSH runs.
    pub bracket: Option<usize>,
    pub round: usize,
    pub active: Vec<ArmId>,
    pub pulls_per_arm: u64,
    pub r_star: Option<usize>,
    pub threshold: usize,
    pub survivors: Vec<ArmId>,
}

/// Outcome of one best-arm problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaiResult {
    /// The arm the scheduler identified (ã).
    pub selected: ArmId,
    pub ledger: PullLedger,
    /// One record per executed round.
    pub rungs: Vec<RungRecord>,
    /// Store entries absent from the task's bench (skipped, not an error).
    pub missing_incumbents: usize,
    /// For Hyperband runs, the bracket that produced the selected arm.
    pub winner_bracket: Option<usize>,
}

/// Runs one best-arm problem over `new_arms` plus the active incumbents.
///
/// Executes rounds k = 0..⌈log_η n⌉−1 with n = |new_arms ∪ incumbents∩task|.
/// The store is not mutated; recording the winner is the caller's decision.
/// A single-arm problem runs zero rounds and selects the arm without pulls.
pub fn run_rush(
    task: &TaskBench,
    new_arms: &BTreeSet<ArmId>,
    store: &IncumbentStore,
    cfg: &SchedulerConfig,
) -> Result<BaiResult, SchedulerError> {
    cfg.validate()?;
    for arm in new_arms {
        if !task.contains(arm) {
            return Err(BanditError::UnknownArm {
                task: task.task_id().to_owned(),
                arm: arm.clone(),
            }
            .into());
        }
    }
    let incumbents: BTreeSet<ArmId> = store
        .entries()
        .iter()
        .filter(|a| task.contains(a))
        .cloned()
        .collect();
    let missing_incumbents = store.len() - incumbents.len();

    let mut active: BTreeSet<ArmId> = new_arms.union(&incumbents).cloned().collect();
    if active.is_empty() {
        return Err(SchedulerError::InvalidConfig(
            "no arms to run: new arm set and active incumbents are both empty".into(),
        ));
    }

    let mut ledger = PullLedger::new();
    let mut rungs = Vec::new();
    let n = active.len();
    if n == 1 {
        // ⌈log_η 1⌉ = 0: the loop body never executes
        let selected = active.iter().next().unwrap().clone();
        return Ok(BaiResult {
            selected,
            ledger,
            rungs,
            missing_incumbents,
            winner_bracket: None,
        });
    }

    let rounds = ceil_log(cfg.eta, n);
    let mut current: BTreeMap<ArmId, f64> = BTreeMap::new();
    for k in 0..rounds {
        let p = pulls_per_arm(cfg.budget, n, k, cfg.eta);
        if p == 0 {
            return Err(SchedulerError::BudgetTooSmall {
                budget: cfg.budget,
                n,
                eta: cfg.eta,
                rung: k,
            });
        }
        for arm in &active {
            let observed = pull(task, &mut ledger, arm, p)?;
            current.insert(arm.clone(), *observed.last().unwrap());
        }
        let incumbents_active: BTreeSet<ArmId> =
            incumbents.intersection(&active).cloned().collect();
        let ranking = rank_by_current_loss(&active, &current, &incumbents_active)?;
        let r_star = min_incumbent_rank(&ranking, &incumbents_active);
        let threshold = keep_threshold(r_star, n, k, cfg.eta);
        let survivors: BTreeSet<ArmId> = ranking
            .iter()
            .filter(|&(_, r)| r < threshold)
            .map(|(a, _)| a.clone())
            .collect();
        rungs.push(RungRecord {
            bracket: None,
            round: k,
            active: active.iter().cloned().collect(),
            pulls_per_arm: p,
            r_star,
            threshold,
            survivors: survivors.iter().cloned().collect(),
        });
        active = survivors;
    }

    let incumbents_active: BTreeSet<ArmId> = incumbents.intersection(&active).cloned().collect();
    let ranking = rank_by_current_loss(&active, &current, &incumbents_active)?;
    let selected = ranking.best().clone();
    Ok(BaiResult {
        selected,
        ledger,
        rungs,
        missing_incumbents,
        winner_bracket: None,
    })
}

/// Plain Successive Halving: [`run_rush`] with an empty incumbent store.
pub fn run_sh(
    task: &TaskBench,
    arms: &BTreeSet<ArmId>,
    cfg: &SchedulerConfig,
) -> Result<BaiResult, SchedulerError> {
    run_rush(task, arms, &IncumbentStore::unbounded(), cfg)
}

/// Cumulative pulls an arm surviving every rung receives: Σ_k pulls_per_arm.
///
/// This is the horizon a task table must cover to serve budget B over n arms.
pub fn sh_max_pulls_per_arm(budget: u64, n: usize, eta: u32) -> u64 {
    if n < 2 {
        return 0;
    }
    (0..ceil_log(eta, n))
        .map(|k| pulls_per_arm(budget, n, k, eta))
        .sum()
}
