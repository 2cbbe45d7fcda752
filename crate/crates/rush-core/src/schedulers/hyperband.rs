//! Hyperband bracket schedule, plain (HB) and with incumbent carry-over
//! (HB-RUSH).
//!
//! With max resource R and rate η, s_max = ⌊log_η R⌋ and bracket
//! s = s_max..0 starts n_s = ⌈((s_max+1)/(s+1))·η^s⌉ arms at r_s = ⌊R·η^−s⌋
//! pulls. Inside a bracket, rung i tops every active arm up to r_s·η^i
//! cumulative pulls (training resumes from the arm's checkpoint, so only the
//! increment is paid) and then applies the same cut rule as the flat
//! schedulers; an arm surviving all rungs of bracket s ends at r_s·η^s ≈ R
//! total pulls. One ledger spans all brackets, and an incumbent injected
//! into several brackets keeps advancing its own cumulative count.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::bandit::{pull, rank_by_current_loss, ArmId, BanditError, PullLedger, TaskBench};

use super::{
    keep_threshold, min_incumbent_rank, BaiResult, IncumbentStore, RungRecord, SchedulerConfig,
    SchedulerError,
};

/// One Hyperband bracket: run `arms` fresh arms starting at `start_resource`
/// pulls each.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bracket {
    pub s: usize,
    pub arms: usize,
    pub start_resource: u64,
}

/// Largest s with eta^s <= r.
fn floor_log(eta: u32, r: u64) -> usize {
    let mut power: u64 = 1;
    let mut s = 0;
    while power <= r / u64::from(eta) {
        power *= u64::from(eta);
        s += 1;
    }
    s
}

/// The bracket table for max resource R: s = s_max down to 0, with
/// n_s = ⌈((s_max+1)/(s+1))·η^s⌉ and r_s = ⌊R·η^−s⌋.
pub fn hyperband_brackets(max_resource: u64, eta: u32) -> Vec<Bracket> {
    assert!(max_resource >= 1, "max resource must be positive");
    assert!(eta >= 2, "eta must be at least 2");
    let s_max = floor_log(eta, max_resource);
    (0..=s_max)
        .rev()
        .map(|s| {
            let pow = u128::from(eta).pow(s as u32);
            let n = ((s_max as u128 + 1) * pow + s as u128) / (s as u128 + 1);
            let r = max_resource / u64::from(eta).pow(s as u32);
            Bracket {
                s,
                arms: n as usize,
                start_resource: r,
            }
        })
        .collect()
}

/// The pull budget of a single bracket, (s_max + 1) · R: the budget SH and
/// RUSH receive when they stand in for one bracket of a Hyperband run.
pub fn bracket_equivalent_budget(max_resource: u64, eta: u32) -> u64 {
    let s_max = floor_log(eta, max_resource) as u64;
    (s_max + 1) * max_resource
}

/// Cumulative pulls one arm can receive across a whole Hyperband run if it
/// is injected into and survives every bracket: Σ_s r_s·η^s. Bounds the
/// horizon a task table must cover for HB-RUSH incumbents.
pub fn hb_max_pulls_per_arm(max_resource: u64, eta: u32) -> u64 {
    hyperband_brackets(max_resource, eta)
        .iter()
        .map(|b| b.start_resource * u64::from(eta).pow(b.s as u32))
        .sum()
}

/// Supplies fresh arms to the brackets of one Hyperband run.
pub trait ArmStream {
    fn next_arms(&mut self, count: usize) -> Vec<ArmId>;
}

/// An [`ArmStream`] over a pre-sampled queue of arm ids.
#[derive(Clone, Debug)]
pub struct QueueStream {
    queue: VecDeque<ArmId>,
}

impl QueueStream {
    pub fn new(arms: impl IntoIterator<Item = ArmId>) -> Self {
        QueueStream {
            queue: arms.into_iter().collect(),
        }
    }
}

impl ArmStream for QueueStream {
    fn next_arms(&mut self, count: usize) -> Vec<ArmId> {
        let take = count.min(self.queue.len());
        self.queue.drain(..take).collect()
    }
}

struct BracketWinner {
    s: usize,
    arm: ArmId,
    loss: Option<f64>,
    incumbent: bool,
}

/// Runs the bracket schedule with `merged` arms added to every bracket's
/// pool and `incumbents` additionally driving the early-cut rule.
///
/// [`run_hyperband`] passes the store's in-task arms as both. Passing the
/// same arms as `merged` with empty `incumbents` runs plain HB over the
/// identical per-bracket pools — the ablation that isolates the cut rule
/// from the pool enlargement.
pub fn run_hyperband_merged(
    task: &TaskBench,
    stream: &mut dyn ArmStream,
    merged: &BTreeSet<ArmId>,
    incumbents: &BTreeSet<ArmId>,
    cfg: &SchedulerConfig,
    max_resource: u64,
) -> Result<BaiResult, SchedulerError> {
    cfg.validate()?;
    if max_resource == 0 {
        return Err(SchedulerError::InvalidConfig(
            "max resource must be positive".into(),
        ));
    }
    for arm in merged.iter().chain(incumbents) {
        if !task.contains(arm) {
            return Err(BanditError::UnknownArm {
                task: task.task_id().to_owned(),
                arm: arm.clone(),
            }
            .into());
        }
    }
    let eta = cfg.eta;
    let brackets = hyperband_brackets(max_resource, eta);
    let mut ledger = PullLedger::new();
    let mut rungs: Vec<RungRecord> = Vec::new();
    let mut winners: Vec<BracketWinner> = Vec::new();

    for bracket in &brackets {
        let fresh = stream.next_arms(bracket.arms);
        if fresh.len() != bracket.arms {
            return Err(SchedulerError::ArmStreamExhausted {
                need: bracket.arms,
                got: fresh.len(),
            });
        }
        for arm in &fresh {
            if !task.contains(arm) {
                return Err(BanditError::UnknownArm {
                    task: task.task_id().to_owned(),
                    arm: arm.clone(),
                }
                .into());
            }
        }
        let mut active: BTreeSet<ArmId> = fresh.into_iter().collect();
        active.extend(merged.iter().cloned());
        let nb = active.len();

        if nb == 1 {
            // nothing to compare against: same zero-round edge as run_rush
            let arm = active.iter().next().unwrap().clone();
            winners.push(BracketWinner {
                s: bracket.s,
                incumbent: incumbents.contains(&arm),
                arm,
                loss: None,
            });
            continue;
        }

        let mut current: BTreeMap<ArmId, f64> = BTreeMap::new();
        let mut reached: u64 = 0;
        for i in 0..=bracket.s {
            let target = bracket.start_resource * u64::from(eta).pow(i as u32);
            let delta = target - reached;
            reached = target;
            for arm in &active {
                let observed = pull(task, &mut ledger, arm, delta)?;
                current.insert(arm.clone(), *observed.last().unwrap());
            }
            let incumbents_active: BTreeSet<ArmId> =
                incumbents.intersection(&active).cloned().collect();
            let ranking = rank_by_current_loss(&active, &current, &incumbents_active)?;
            let r_star = min_incumbent_rank(&ranking, &incumbents_active);
            let threshold = keep_threshold(r_star, nb, i, eta);
            let survivors: BTreeSet<ArmId> = ranking
                .iter()
                .filter(|&(_, r)| r < threshold)
                .map(|(a, _)| a.clone())
                .collect();
            rungs.push(RungRecord {
                bracket: Some(bracket.s),
                round: i,
                active: active.iter().cloned().collect(),
                pulls_per_arm: delta,
                r_star,
                threshold,
                survivors: survivors.iter().cloned().collect(),
            });
            active = survivors;
        }

        let incumbents_active: BTreeSet<ArmId> =
            incumbents.intersection(&active).cloned().collect();
        let ranking = rank_by_current_loss(&active, &current, &incumbents_active)?;
        let arm = ranking.best().clone();
        winners.push(BracketWinner {
            s: bracket.s,
            incumbent: incumbents.contains(&arm),
            loss: current.get(&arm).copied(),
            arm,
        });
    }

    // best final loss across brackets; ties prefer incumbents, then lower id.
    // A missing loss only occurs in single-bracket degenerate runs.
    let best = winners
        .iter()
        .min_by(|a, b| {
            a.loss
                .unwrap_or(f64::INFINITY)
                .total_cmp(&b.loss.unwrap_or(f64::INFINITY))
                .then_with(|| b.incumbent.cmp(&a.incumbent))
                .then_with(|| a.arm.cmp(&b.arm))
        })
        .expect("at least one bracket");
    Ok(BaiResult {
        selected: best.arm.clone(),
        winner_bracket: Some(best.s),
        ledger,
        rungs,
        missing_incumbents: 0,
    })
}

/// Runs Hyperband over `stream`-supplied fresh arms. With a non-empty store
/// this is HB-RUSH: the store's in-task arms join every bracket and drive
/// the incumbent cut; with an empty store it is plain HB.
pub fn run_hyperband(
    task: &TaskBench,
    stream: &mut dyn ArmStream,
    store: &IncumbentStore,
    cfg: &SchedulerConfig,
    max_resource: u64,
) -> Result<BaiResult, SchedulerError> {
    let incumbents: BTreeSet<ArmId> = store
        .entries()
        .iter()
        .filter(|a| task.contains(a))
        .cloned()
        .collect();
    let missing = store.len() - incumbents.len();
    let mut result =
        run_hyperband_merged(task, stream, &incumbents, &incumbents, cfg, max_resource)?;
    result.missing_incumbents = missing;
    Ok(result)
}
