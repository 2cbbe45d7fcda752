//! The non-stochastic best-arm-identification environment.
//!
//! A task is a table: for every arm, the loss revealed by its t-th pull and
//! the (simulated) cost of that pull, t = 1..T. Schedulers interact with a
//! task only through [`pull`], which advances an arm's cumulative pull count
//! and reveals the next entry of its curve — there is no lookahead, so a
//! scheduler can never observe the limit before spending T pulls.
//!
//! Every pull is recorded in a [`PullLedger`]; all reported pull counts and
//! simulated times are exact sums over ledger entries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from the simulation environment.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BanditError {
    /// The arm is not part of the task.
    #[error("unknown arm `{arm}` in task `{task}`")]
    UnknownArm { task: String, arm: ArmId },
    /// A pull request would read past the end of the tabulated curve.
    ///
    /// This is an error rather than a clamp: silently replaying the final
    /// entry would distort cost accounting. Callers must size the horizon to
    /// the maximum per-arm pulls their budget implies.
    #[error(
        "pulling `{arm}` {requested} more times exceeds horizon {horizon} (already at {already})"
    )]
    HorizonExceeded {
        arm: ArmId,
        already: u64,
        requested: u64,
        horizon: u64,
    },
    /// An active arm was never pulled in the current rung; ranking it would
    /// compare observations at different fidelities. Scheduler bug.
    #[error("arm `{arm}` has no recorded loss to rank")]
    MissingLoss { arm: ArmId },
    /// A curve or task failed validation.
    #[error("invalid task `{task}`: {reason}")]
    InvalidTask { task: String, reason: String },
    /// A curve failed validation outside a task context.
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
}

/// Identifier of one arm (one hyperparameter/architecture configuration).
///
/// Ids are opaque strings; equality and the lexicographic total order are the
/// only structure schedulers rely on. Ids stay stable across the tasks of a
/// sequence, which is what lets incumbents be re-injected later.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArmId(String);

impl ArmId {
    pub fn new(id: impl Into<String>) -> Self {
        ArmId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for ArmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ArmId {
    fn from(s: &str) -> Self {
        ArmId(s.to_owned())
    }
}

impl From<String> for ArmId {
    fn from(s: String) -> Self {
        ArmId(s)
    }
}

/// Losses revealed by successive pulls of one arm, indexed t = 1..T.
///
/// The limit ν of the underlying learning curve is represented by the final
/// entry: on a finite table the last recorded round is the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LossCurve {
    losses: Vec<f64>,
}

impl LossCurve {
    pub fn new(losses: Vec<f64>) -> Result<Self, BanditError> {
        if losses.is_empty() {
            return Err(BanditError::InvalidCurve("loss curve is empty".into()));
        }
        if let Some(v) = losses.iter().find(|v| !v.is_finite()) {
            return Err(BanditError::InvalidCurve(format!(
                "loss curve contains non-finite value {v}"
            )));
        }
        Ok(LossCurve { losses })
    }

    pub fn horizon(&self) -> usize {
        self.losses.len()
    }

    /// Loss revealed by the t-th pull; `t` is 1-based.
    pub fn loss_at(&self, t: usize) -> f64 {
        self.losses[t - 1]
    }

    /// The limit ν: the final tabulated entry.
    pub fn limit(&self) -> f64 {
        *self.losses.last().unwrap()
    }

    pub fn values(&self) -> &[f64] {
        &self.losses
    }
}

/// Cost (abstract time units) of each successive pull of one arm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CostCurve {
    costs: Vec<f64>,
}

impl CostCurve {
    pub fn new(costs: Vec<f64>) -> Result<Self, BanditError> {
        if costs.is_empty() {
            return Err(BanditError::InvalidCurve("cost curve is empty".into()));
        }
        if let Some(v) = costs.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(BanditError::InvalidCurve(format!(
                "cost curve contains invalid value {v}"
            )));
        }
        Ok(CostCurve { costs })
    }

    /// Constant per-pull cost, `horizon` entries long.
    pub fn constant(value: f64, horizon: usize) -> Result<Self, BanditError> {
        CostCurve::new(vec![value; horizon])
    }

    pub fn horizon(&self) -> usize {
        self.costs.len()
    }

    /// Cost of the t-th pull; `t` is 1-based.
    pub fn cost_at(&self, t: usize) -> f64 {
        self.costs[t - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.costs
    }
}

/// One arm's paired loss and cost curves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmCurves {
    pub losses: LossCurve,
    pub costs: CostCurve,
}

impl ArmCurves {
    pub fn new(losses: LossCurve, costs: CostCurve) -> Result<Self, BanditError> {
        if losses.horizon() != costs.horizon() {
            return Err(BanditError::InvalidCurve(format!(
                "loss curve has {} entries but cost curve has {}",
                losses.horizon(),
                costs.horizon()
            )));
        }
        Ok(ArmCurves { losses, costs })
    }
}

/// One tuning task: a map from arm id to its tabulated curves, all sharing
/// one horizon. Immutable after construction and safe to share across
/// concurrent runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskBench {
    task_id: String,
    horizon: usize,
    arms: BTreeMap<ArmId, ArmCurves>,
}

impl TaskBench {
    pub fn new(
        task_id: impl Into<String>,
        arms: BTreeMap<ArmId, ArmCurves>,
    ) -> Result<Self, BanditError> {
        let task_id = task_id.into();
        let invalid = |reason: String| BanditError::InvalidTask {
            task: task_id.clone(),
            reason,
        };
        let horizon = match arms.values().next() {
            Some(c) => c.losses.horizon(),
            None => return Err(invalid("task has no arms".into())),
        };
        for (id, curves) in &arms {
            if id.is_empty() {
                return Err(invalid("empty arm id".into()));
            }
            if curves.losses.horizon() != horizon || curves.costs.horizon() != horizon {
                return Err(invalid(format!(
                    "arm `{id}` has horizon {} but the task horizon is {horizon}",
                    curves.losses.horizon()
                )));
            }
        }
        Ok(TaskBench {
            task_id,
            horizon,
            arms,
        })
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn arm_count(&self) -> usize {
        self.arms.len()
    }

    pub fn contains(&self, arm: &ArmId) -> bool {
        self.arms.contains_key(arm)
    }

    pub fn curves(&self, arm: &ArmId) -> Option<&ArmCurves> {
        self.arms.get(arm)
    }

    /// Arm ids in lexicographic order.
    pub fn arm_ids(&self) -> impl Iterator<Item = &ArmId> {
        self.arms.keys()
    }

    pub fn arms(&self) -> &BTreeMap<ArmId, ArmCurves> {
        &self.arms
    }

    /// The limit ν of one arm, if present.
    pub fn limit(&self, arm: &ArmId) -> Option<f64> {
        self.arms.get(arm).map(|c| c.losses.limit())
    }
}

/// One recorded pull: which arm, its cumulative pull index after this pull
/// (1-based), and the loss/cost read from the curves at that index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullEntry {
    pub arm: ArmId,
    pub cumulative: u64,
    pub loss: f64,
    pub cost: f64,
}

/// Append-only record of every pull in one scheduler run.
///
/// Invariants: per arm, cumulative indices are exactly 1, 2, 3, ... in entry
/// order; the total simulated time is the sum of entry costs in that same
/// order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PullLedger {
    entries: Vec<PullEntry>,
    per_arm: BTreeMap<ArmId, u64>,
    total_time: f64,
}

impl PullLedger {
    pub fn new() -> Self {
        PullLedger::default()
    }

    /// Cumulative pulls of `arm` so far.
    pub fn pulls(&self, arm: &ArmId) -> u64 {
        self.per_arm.get(arm).copied().unwrap_or(0)
    }

    pub fn total_pulls(&self) -> u64 {
        self.entries.len() as u64
    }

    /// Sum of all pull costs, accumulated in entry order.
    pub fn total_sim_time(&self) -> f64 {
        self.total_time
    }

    pub fn entries(&self) -> &[PullEntry] {
        &self.entries
    }

    /// Per-arm cumulative pull counts.
    pub fn per_arm(&self) -> &BTreeMap<ArmId, u64> {
        &self.per_arm
    }

    /// Number of distinct arms whose cumulative pulls reached `level`.
    pub fn arms_pulled_at_least(&self, level: u64) -> usize {
        self.per_arm.values().filter(|&&c| c >= level).count()
    }

    fn record(&mut self, arm: ArmId, cumulative: u64, loss: f64, cost: f64) {
        self.per_arm.insert(arm.clone(), cumulative);
        self.total_time += cost;
        self.entries.push(PullEntry {
            arm,
            cumulative,
            loss,
            cost,
        });
    }
}

/// Pulls `arm` `count` times, appending one ledger entry per pull and
/// returning the observed losses in pull order.
///
/// `count = 0` is a no-op returning an empty observation. The arm's "current
/// loss" after this call is the last observed value (its loss at the new
/// cumulative index).
pub fn pull(
    task: &TaskBench,
    ledger: &mut PullLedger,
    arm: &ArmId,
    count: u64,
) -> Result<Vec<f64>, BanditError> {
    let curves = task.curves(arm).ok_or_else(|| BanditError::UnknownArm {
        task: task.task_id().to_owned(),
        arm: arm.clone(),
    })?;
    let already = ledger.pulls(arm);
    let horizon = task.horizon() as u64;
    if already + count > horizon {
        return Err(BanditError::HorizonExceeded {
            arm: arm.clone(),
            already,
            requested: count,
            horizon,
        });
    }
    let mut observed = Vec::with_capacity(count as usize);
    for i in 1..=count {
        let t = (already + i) as usize;
        let loss = curves.losses.loss_at(t);
        let cost = curves.costs.cost_at(t);
        ledger.record(arm.clone(), already + i, loss, cost);
        observed.push(loss);
    }
    Ok(observed)
}

/// Arm positions in the loss ranking of one rung: 0 = best (lowest loss).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    ranks: BTreeMap<ArmId, usize>,
}

impl Ranking {
    pub fn rank_of(&self, arm: &ArmId) -> Option<usize> {
        self.ranks.get(arm).copied()
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// The rank-0 arm.
    pub fn best(&self) -> &ArmId {
        self.ranks
            .iter()
            .find(|(_, &r)| r == 0)
            .map(|(a, _)| a)
            .expect("ranking is never empty")
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ArmId, usize)> {
        self.ranks.iter().map(|(a, &r)| (a, r))
    }
}

/// Ranks `active` arms by their current loss, ascending.
///
/// Ties break first in favor of incumbent membership, then by lexicographic
/// arm id, so the result is a deterministic permutation of 0..m-1. Every
/// active arm must have a current loss; a missing one is a scheduler bug
/// surfaced as [`BanditError::MissingLoss`].
pub fn rank_by_current_loss(
    active: &BTreeSet<ArmId>,
    current: &BTreeMap<ArmId, f64>,
    incumbents: &BTreeSet<ArmId>,
) -> Result<Ranking, BanditError> {
    let mut order: Vec<&ArmId> = Vec::with_capacity(active.len());
    for arm in active {
        if !current.contains_key(arm) {
            return Err(BanditError::MissingLoss { arm: arm.clone() });
        }
        order.push(arm);
    }
    order.sort_by(|a, b| {
        current[*a]
            .total_cmp(&current[*b])
            .then_with(|| incumbents.contains(*b).cmp(&incumbents.contains(*a)))
            .then_with(|| a.cmp(b))
    });
    let ranks = order
        .into_iter()
        .enumerate()
        .map(|(r, a)| (a.clone(), r))
        .collect();
    Ok(Ranking { ranks })
}

/// The arm with the lowest final loss, ties broken by lexicographic id.
///
/// Ground truth for oracles and metrics only; schedulers never see it.
pub fn true_best_arm(task: &TaskBench) -> &ArmId {
    task.arms
        .iter()
        .min_by(|(ia, ca), (ib, cb)| {
            ca.losses
                .limit()
                .total_cmp(&cb.losses.limit())
                .then_with(|| ia.cmp(ib))
        })
        .map(|(id, _)| id)
        .expect("task has at least one arm")
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    fn arb_task_and_schedule() -> impl Strategy<
        Value = (TaskBench, Vec<(usize, u64)>),
    > {
        (2usize..6, 4usize..12).prop_flat_map(|(n_arms, horizon)| {
            let curves = proptest::collection::vec(
                proptest::collection::vec(0.0f64..1.0, horizon..=horizon),
                n_arms..=n_arms,
            );
            let schedule = proptest::collection::vec(
                (0usize..n_arms, 0u64..3),
                0..20,
            );
            (curves, schedule).prop_map(move |(curves, schedule)| {
                let arms: BTreeMap<ArmId, ArmCurves> = curves
                    .into_iter()
                    .enumerate()
                    .map(|(i, losses)| {
                        (
                            ArmId::new(format!("a{i}")),
                            ArmCurves::new(
                                LossCurve::new(losses).unwrap(),
                                CostCurve::constant(1.0, horizon).unwrap(),
                            )
                            .unwrap(),
                        )
                    })
                    .collect();
                (TaskBench::new("prop", arms).unwrap(), schedule)
            })
        })
    }

    fn replay(task: &TaskBench, schedule: &[(usize, u64)]) -> PullLedger {
        let ids: Vec<ArmId> = task.arm_ids().cloned().collect();
        let mut ledger = PullLedger::new();
        for &(idx, count) in schedule {
            let arm = &ids[idx % ids.len()];
            let remaining = task.horizon() as u64 - ledger.pulls(arm);
            let _ = pull(task, &mut ledger, arm, count.min(remaining)).unwrap();
        }
        ledger
    }

    proptest! {
        /// Pulling the same schedule twice yields identical ledgers.
        #[test]
        fn replay_determinism((task, schedule) in arb_task_and_schedule()) {
            let a = replay(&task, &schedule);
            let b = replay(&task, &schedule);
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(
                serde_json::to_string(&a).unwrap(),
                serde_json::to_string(&b).unwrap()
            );
        }

        /// Per-arm cumulative indices are gapless and totals are conserved.
        #[test]
        fn ledger_conservation((task, schedule) in arb_task_and_schedule()) {
            let ledger = replay(&task, &schedule);
            let mut counters: BTreeMap<ArmId, u64> = BTreeMap::new();
            let mut time = 0.0f64;
            for e in ledger.entries() {
                let c = counters.entry(e.arm.clone()).or_insert(0);
                *c += 1;
                prop_assert_eq!(e.cumulative, *c, "cumulative indices must be 1,2,3,...");
                time += e.cost;
            }
            prop_assert_eq!(&counters, ledger.per_arm());
            let total: u64 = counters.values().sum();
            prop_assert_eq!(total, ledger.total_pulls());
            prop_assert_eq!(time, ledger.total_sim_time());
            // no lookahead: observed losses equal the curve at the recorded index
            for e in ledger.entries() {
                let curve = &task.curves(&e.arm).unwrap().losses;
                prop_assert_eq!(e.loss, curve.loss_at(e.cumulative as usize));
            }
        }

        /// Ranking is a bijection onto 0..m-1 and invariant under positive
        /// affine transforms of all losses.
        #[test]
        fn ranking_affine_invariance(
            raw in proptest::collection::vec(0u32..100, 1..8),
            scale in 0.5f64..4.0,
            offset in -5.0f64..5.0,
        ) {
            // coarse grid keeps distinct losses distinct after the transform
            let losses: Vec<f64> = raw.iter().map(|v| f64::from(*v) / 100.0).collect();
            let active: BTreeSet<ArmId> =
                (0..losses.len()).map(|i| ArmId::new(format!("a{i}"))).collect();
            let current: BTreeMap<ArmId, f64> = losses
                .iter()
                .enumerate()
                .map(|(i, l)| (ArmId::new(format!("a{i}")), *l))
                .collect();
            let transformed: BTreeMap<ArmId, f64> = current
                .iter()
                .map(|(a, l)| (a.clone(), scale * l + offset))
                .collect();
            let incumbents: BTreeSet<ArmId> = [ArmId::from("a0")].into_iter().collect();

            let r1 = rank_by_current_loss(&active, &current, &incumbents).unwrap();
            let r2 = rank_by_current_loss(&active, &transformed, &incumbents).unwrap();
            prop_assert_eq!(&r1, &r2);

            let mut ranks: Vec<usize> = r1.iter().map(|(_, r)| r).collect();
            ranks.sort_unstable();
            prop_assert_eq!(ranks, (0..losses.len()).collect::<Vec<_>>());
        }
    }
}
