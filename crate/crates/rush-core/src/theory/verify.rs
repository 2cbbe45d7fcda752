//! End-to-end check of the sufficient-budget bound: generate random
//! instances, compute the bound, run the scheduler at exactly that budget,
//! and confirm it selects the true best arm — under an empty store, a store
//! holding the true best arm, and a store holding the worst arm.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{true_best_arm, ArmCurves, ArmId, CostCurve, LossCurve, TaskBench};
use crate::schedulers::{
    run_rush, sh_max_pulls_per_arm, IncumbentStore, SchedulerConfig, SchedulerError,
};
use crate::seed::mix;
use crate::theory::{compute_quantities, sufficient_budget, TheoryError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub instances: usize,
    /// Arms per instance are drawn uniformly from 2..=max_arms.
    pub max_arms: usize,
    pub eta: u32,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            instances: 200,
            max_arms: 12,
            eta: 3,
            seed: 0,
        }
    }
}

/// Which arms the store holds when the instance is run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncumbentRegime {
    Empty,
    TrueBest,
    WorstArm,
}

pub const ALL_REGIMES: [IncumbentRegime; 3] = [
    IncumbentRegime::Empty,
    IncumbentRegime::TrueBest,
    IncumbentRegime::WorstArm,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyFailure {
    pub instance: usize,
    pub regime: IncumbentRegime,
    pub n: usize,
    pub budget: u64,
    pub expected: ArmId,
    pub selected: ArmId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeOutcome {
    pub regime: IncumbentRegime,
    pub successes: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub regimes: Vec<RegimeOutcome>,
    pub failures: Vec<VerifyFailure>,
    pub min_budget: u64,
    pub max_budget: u64,
    pub all_correct: bool,
}

impl VerifyReport {
    pub fn total_runs(&self) -> usize {
        self.regimes.iter().map(|r| r.successes + r.failures).sum()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
}

/// One random instance: limits evenly spread over [0.2, 0.7] with small
/// jitter (adjacent gaps stay bounded below), monotone geometric descent
/// with per-arm amplitude and rate. The horizon is grown until it covers the
/// pull total the computed budgets imply, re-deriving the quantities each
/// time since the envelope depends on the tabulated tail.
struct Instance {
    task: TaskBench,
    budgets: BTreeMap<&'static str, u64>,
    worst: ArmId,
}

fn regime_key(regime: IncumbentRegime) -> &'static str {
    match regime {
        IncumbentRegime::Empty => "empty",
        IncumbentRegime::TrueBest => "true_best",
        IncumbentRegime::WorstArm => "worst_arm",
    }
}

fn build_instance(index: usize, cfg: &VerifyConfig) -> Result<Instance, TheoryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[cfg.seed, 0x7E0, index as u64]));
    let n = rng.random_range(2..=cfg.max_arms);

    // shuffled ids so the best arm is not systematically the smallest id
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    // Bounded so the budget provably settles every comparison before the
    // first cut: pulls at cut 0 satisfy p0 >= 3 whenever any arm could still
    // outrank the best there, while amp <= 0.18, rate <= 0.55 and adjacent
    // limit gaps >= 0.0355 (n <= 12) keep the outranking window below
    // ln(amp/gap)/ln(1/rate) < 3. Wider parameter ranges can step outside
    // the bound's guarantee in the incumbent-is-best regime.
    let params: Vec<(ArmId, f64, f64, f64)> = (0..n)
        .map(|rank| {
            let jitter: f64 = rng.random_range(-0.005..0.005);
            let limit = 0.2 + 0.5 * rank as f64 / (n as f64 - 1.0).max(1.0) + jitter;
            let amp: f64 = rng.random_range(0.05..0.18);
            let rate: f64 = rng.random_range(0.3..0.55);
            (ArmId::new(format!("arm-{:02}", order[rank])), limit, amp, rate)
        })
        .collect();

    let build = |horizon: usize| -> TaskBench {
        let arms: BTreeMap<ArmId, ArmCurves> = params
            .iter()
            .map(|(id, limit, amp, rate)| {
                let mut losses = Vec::with_capacity(horizon);
                let mut power = 1.0f64;
                for _ in 0..horizon {
                    power *= rate;
                    losses.push(limit + amp * power);
                }
                (
                    id.clone(),
                    ArmCurves::new(
                        LossCurve::new(losses).unwrap(),
                        CostCurve::constant(1.0, horizon).unwrap(),
                    )
                    .unwrap(),
                )
            })
            .collect();
        TaskBench::new(format!("verify-{index:04}"), arms).unwrap()
    };

    let mut horizon = 32usize;
    for _ in 0..32 {
        let task = build(horizon);
        let best = true_best_arm(&task).clone();
        let worst = task
            .arms()
            .iter()
            .max_by(|(ia, ca), (ib, cb)| {
                ca.losses
                    .limit()
                    .total_cmp(&cb.losses.limit())
                    .then_with(|| ia.cmp(ib))
            })
            .map(|(id, _)| id.clone())
            .unwrap();

        let mut budgets = BTreeMap::new();
        for regime in ALL_REGIMES {
            let incumbents: BTreeSet<ArmId> = match regime {
                IncumbentRegime::Empty => BTreeSet::new(),
                IncumbentRegime::TrueBest => [best.clone()].into_iter().collect(),
                IncumbentRegime::WorstArm => [worst.clone()].into_iter().collect(),
            };
            let q = compute_quantities(&task, &incumbents);
            budgets.insert(regime_key(regime), sufficient_budget(&q, n, cfg.eta)?);
        }
        let max_budget = *budgets.values().max().unwrap();
        let needed = sh_max_pulls_per_arm(max_budget, n, cfg.eta) as usize;
        if needed <= horizon {
            return Ok(Instance {
                task,
                budgets,
                worst,
            });
        }
        horizon = needed + 8;
    }
    unreachable!("horizon growth converges: budgets are bounded by the analytic envelope");
}

/// Generates `cfg.instances` random instances and runs the scheduler at the
/// computed sufficient budget under all three incumbent regimes.
pub fn run_verification(cfg: &VerifyConfig) -> Result<VerifyReport, VerifyError> {
    let mut outcomes: BTreeMap<&'static str, RegimeOutcome> = ALL_REGIMES
        .into_iter()
        .map(|r| {
            (
                regime_key(r),
                RegimeOutcome {
                    regime: r,
                    successes: 0,
                    failures: 0,
                },
            )
        })
        .collect();
    let mut failures = Vec::new();
    let mut min_budget = u64::MAX;
    let mut max_budget = 0u64;

    for index in 0..cfg.instances {
        let instance = build_instance(index, cfg)?;
        let task = &instance.task;
        let best = true_best_arm(task).clone();
        let arms: BTreeSet<ArmId> = task.arm_ids().cloned().collect();
        for regime in ALL_REGIMES {
            let budget = instance.budgets[regime_key(regime)];
            min_budget = min_budget.min(budget);
            max_budget = max_budget.max(budget);
            let mut store = IncumbentStore::unbounded();
            match regime {
                IncumbentRegime::Empty => {}
                IncumbentRegime::TrueBest => store.update(best.clone()),
                IncumbentRegime::WorstArm => store.update(instance.worst.clone()),
            }
            let scheduler_cfg = SchedulerConfig::new(cfg.eta, budget);
            let result = run_rush(task, &arms, &store, &scheduler_cfg)?;
            let outcome = outcomes.get_mut(regime_key(regime)).unwrap();
            if result.selected == best {
                outcome.successes += 1;
            } else {
                outcome.failures += 1;
                failures.push(VerifyFailure {
                    instance: index,
                    regime,
                    n: arms.len(),
                    budget,
                    expected: best.clone(),
                    selected: result.selected,
                });
            }
        }
    }

    if cfg.instances == 0 {
        min_budget = 0;
    }
    let regimes: Vec<RegimeOutcome> = ALL_REGIMES
        .into_iter()
        .map(|r| outcomes[regime_key(r)].clone())
        .collect();
    let all_correct = regimes.iter().all(|r| r.failures == 0);
    Ok(VerifyReport {
        config: *cfg,
        regimes,
        failures,
        min_budget,
        max_budget,
        all_correct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_verification_run_is_clean_and_deterministic() {
        let cfg = VerifyConfig {
            instances: 25,
            max_arms: 8,
            eta: 3,
            seed: 9,
        };
        let a = run_verification(&cfg).unwrap();
        assert!(a.all_correct, "failures: {:?}", a.failures);
        assert_eq!(a.total_runs(), 75);
        let b = run_verification(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_instances_is_an_empty_report() {
        let cfg = VerifyConfig {
            instances: 0,
            ..VerifyConfig::default()
        };
        let report = run_verification(&cfg).unwrap();
        assert!(report.all_correct);
        assert_eq!(report.total_runs(), 0);
        assert_eq!(report.max_budget, 0);
    }

    #[test]
    fn eta_two_also_verifies() {
        let cfg = VerifyConfig {
            instances: 10,
            max_arms: 6,
            eta: 2,
            seed: 3,
        };
        let report = run_verification(&cfg).unwrap();
        assert!(report.all_correct, "failures: {:?}", report.failures);
    }
}
