//! Sequence-of-tasks experiment harness.
//!
//! A [`SequenceSpec`] names a bench (list of tasks), a scheduler, and the
//! protocol knobs: sequence length S, repetition count, permutation seed,
//! and arms sampled per task. Each repetition visits tasks in its own seeded
//! permutation, carries the incumbent store across tasks (RUSH/HB-RUSH), and
//! records the selected arm, its simple regret against ground truth, exact
//! pull counts, and simulated time (the sum of per-pull costs).
//!
//! Arm samples and permutations depend only on (permutation_seed,
//! repetition, position), never on the scheduler, so paired runs of two
//! schedulers see identical tasks and candidates. Repetitions are
//! independent and run in parallel under whatever rayon pool is installed;
//! reports merge in repetition order, so output is identical for any level
//! of parallelism.

pub mod report;

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandit::{true_best_arm, ArmId, PullLedger, TaskBench};
use crate::schedulers::{
    bracket_equivalent_budget, hyperband_brackets, run_hyperband, run_rush, run_sh, BaiResult,
    IncumbentStore, QueueStream, SchedulerConfig, SchedulerError,
};
use crate::seed::mix;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid sequence spec: {0}")]
    InvalidSpec(String),
    #[error("repetition {repetition}, position {position}, task `{task}`: {source}")]
    Scheduler {
        repetition: usize,
        position: usize,
        task: String,
        #[source]
        source: SchedulerError,
    },
    #[error("specs must differ only in their scheduler: {0}")]
    SpecMismatch(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulerKind {
    Sh,
    Rush,
    Hb,
    HbRush,
}

impl SchedulerKind {
    /// The no-transfer counterpart used as the baseline in sweeps.
    pub fn baseline(self) -> SchedulerKind {
        match self {
            SchedulerKind::Sh | SchedulerKind::Rush => SchedulerKind::Sh,
            SchedulerKind::Hb | SchedulerKind::HbRush => SchedulerKind::Hb,
        }
    }

    pub fn carries_incumbents(self) -> bool {
        matches!(self, SchedulerKind::Rush | SchedulerKind::HbRush)
    }

    pub fn is_hyperband(self) -> bool {
        matches!(self, SchedulerKind::Hb | SchedulerKind::HbRush)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SchedulerKind::Sh => "sh",
            SchedulerKind::Rush => "rush",
            SchedulerKind::Hb => "hb",
            SchedulerKind::HbRush => "hb-rush",
        }
    }
}

impl std::fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SchedulerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sh" => Ok(SchedulerKind::Sh),
            "rush" => Ok(SchedulerKind::Rush),
            "hb" => Ok(SchedulerKind::Hb),
            "hb-rush" | "hb_rush" => Ok(SchedulerKind::HbRush),
            other => Err(format!("unknown scheduler `{other}` (sh|rush|hb|hb-rush)")),
        }
    }
}

/// One experiment: a bench, a scheduler, and the sequence protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceSpec {
    pub bench: Vec<TaskBench>,
    pub sequence_length: usize,
    pub repetitions: usize,
    pub permutation_seed: u64,
    pub scheduler: SchedulerKind,
    pub cfg: SchedulerConfig,
    /// New arms sampled per task (ignored by the Hyperband variants, whose
    /// bracket table fixes the per-task arm demand).
    pub arms_per_task: usize,
    /// Max per-arm resource R for the Hyperband variants.
    pub max_resource: Option<u64>,
}

impl SequenceSpec {
    fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::InvalidSpec(msg));
        if self.bench.is_empty() {
            return bad("bench has no tasks".into());
        }
        if self.sequence_length == 0 {
            return bad("sequence length must be at least 1".into());
        }
        if self.repetitions == 0 {
            return bad("need at least one repetition".into());
        }
        self.cfg
            .validate()
            .map_err(|e| HarnessError::InvalidSpec(e.to_string()))?;
        let min_arms = self.bench.iter().map(TaskBench::arm_count).min().unwrap();
        if self.scheduler.is_hyperband() {
            let r = match self.max_resource {
                Some(r) if r >= 1 => r,
                _ => return bad("hyperband schedulers need max_resource >= 1".into()),
            };
            let demand: usize = hyperband_brackets(r, self.cfg.eta)
                .iter()
                .map(|b| b.arms)
                .sum();
            if demand > min_arms {
                return bad(format!(
                    "bracket table needs {demand} fresh arms per task but the smallest task has {min_arms}"
                ));
            }
        } else {
            if self.arms_per_task == 0 {
                return bad("arms_per_task must be at least 1".into());
            }
            if self.arms_per_task > min_arms {
                return bad(format!(
                    "arms_per_task {} exceeds the smallest task's {min_arms} arms",
                    self.arms_per_task
                ));
            }
        }
        Ok(())
    }

    /// The SH/RUSH budget equivalent to one bracket of the Hyperband run
    /// with max resource `r`: (s_max + 1) · r.
    pub fn budget_for_bracket(r: u64, eta: u32) -> u64 {
        bracket_equivalent_budget(r, eta)
    }
}

/// One task outcome; rows of the per-task CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub repetition: usize,
    pub position: usize,
    pub task_id: String,
    pub scheduler: SchedulerKind,
    pub selected_arm: ArmId,
    pub regret: f64,
    pub pulls: u64,
    pub sim_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionSummary {
    pub repetition: usize,
    /// Σ over the sequence of per-task simple regrets, in position order.
    pub cumulative_regret: f64,
    pub total_pulls: u64,
    pub total_sim_time: f64,
}

/// Candidate counts per resource level, reported two ways (both labeled):
/// mean per task, and mean per sequence (per-repetition totals).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCounts {
    /// The level grid: distinct per-arm final pull counts observed.
    pub levels: Vec<u64>,
    /// Mean over all (repetition, task) ledgers of the count of arms that
    /// reached each level.
    pub per_task_mean: Vec<f64>,
    /// Mean over repetitions of the per-sequence total count.
    pub per_sequence_mean: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub scheduler: SchedulerKind,
    pub records: Vec<TaskRecord>,
    pub repetitions: Vec<RepetitionSummary>,
    /// Exact sum of all per-task regrets in record order.
    pub cumulative_regret: f64,
    pub mean_cumulative_regret: f64,
    pub std_cumulative_regret: f64,
    pub total_pulls: u64,
    pub mean_pulls: f64,
    pub std_pulls: f64,
    pub total_sim_time: f64,
    pub mean_sim_time: f64,
    pub std_sim_time: f64,
    pub candidates_per_level: LevelCounts,
}

/// Everything one repetition produced, ledgers included. The streaming
/// aggregate [`run_sequence`] drops this after folding; detail consumers
/// call [`run_repetition`] directly.
#[derive(Clone, Debug)]
pub struct RepetitionDetail {
    pub repetition: usize,
    pub records: Vec<TaskRecord>,
    pub results: Vec<BaiResult>,
    /// Store size before each task ran.
    pub store_sizes: Vec<usize>,
}

const TAG_PERMUTATION: u64 = 11;
const TAG_ARMS: u64 = 12;

/// Task visit order for one repetition: a seeded permutation prefix when the
/// bench is large enough, seeded draws with replacement otherwise.
pub fn task_order(spec: &SequenceSpec, repetition: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[
        spec.permutation_seed,
        TAG_PERMUTATION,
        repetition as u64,
    ]));
    let len = spec.bench.len();
    if spec.sequence_length <= len {
        rand::seq::index::sample(&mut rng, len, spec.sequence_length).into_vec()
    } else {
        use rand::Rng;
        (0..spec.sequence_length)
            .map(|_| rng.random_range(0..len))
            .collect()
    }
}

/// The deterministic fresh-arm sample for one (repetition, position) slot.
fn sample_arms(spec: &SequenceSpec, task: &TaskBench, repetition: usize, position: usize, count: usize) -> Vec<ArmId> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[
        spec.permutation_seed,
        TAG_ARMS,
        repetition as u64,
        position as u64,
    ]));
    let ids: Vec<&ArmId> = task.arm_ids().collect();
    rand::seq::index::sample(&mut rng, ids.len(), count)
        .into_iter()
        .map(|i| ids[i].clone())
        .collect()
}

/// Runs one repetition sequentially: tasks in seeded order, incumbent store
/// carried across tasks for the transfer schedulers.
pub fn run_repetition(spec: &SequenceSpec, repetition: usize) -> Result<RepetitionDetail, HarnessError> {
    spec.validate()?;
    let order = task_order(spec, repetition);
    let mut store = IncumbentStore::new(spec.cfg.incumbent_cap);
    let mut records = Vec::with_capacity(order.len());
    let mut results = Vec::with_capacity(order.len());
    let mut store_sizes = Vec::with_capacity(order.len());

    let hb_demand: usize = match spec.max_resource {
        Some(r) if spec.scheduler.is_hyperband() => hyperband_brackets(r, spec.cfg.eta)
            .iter()
            .map(|b| b.arms)
            .sum(),
        _ => 0,
    };

    for (position, &task_index) in order.iter().enumerate() {
        let task = &spec.bench[task_index];
        store_sizes.push(store.len());
        let annotate = |source: SchedulerError| HarnessError::Scheduler {
            repetition,
            position,
            task: task.task_id().to_owned(),
            source,
        };
        let result = match spec.scheduler {
            SchedulerKind::Sh => {
                let arms: BTreeSet<ArmId> =
                    sample_arms(spec, task, repetition, position, spec.arms_per_task)
                        .into_iter()
                        .collect();
                run_sh(task, &arms, &spec.cfg).map_err(annotate)?
            }
            SchedulerKind::Rush => {
                let arms: BTreeSet<ArmId> =
                    sample_arms(spec, task, repetition, position, spec.arms_per_task)
                        .into_iter()
                        .collect();
                run_rush(task, &arms, &store, &spec.cfg).map_err(annotate)?
            }
            SchedulerKind::Hb | SchedulerKind::HbRush => {
                let pool = sample_arms(spec, task, repetition, position, hb_demand);
                let mut stream = QueueStream::new(pool);
                let hb_store = if spec.scheduler.carries_incumbents() {
                    store.clone()
                } else {
                    IncumbentStore::unbounded()
                };
                run_hyperband(
                    task,
                    &mut stream,
                    &hb_store,
                    &spec.cfg,
                    spec.max_resource.unwrap(),
                )
                .map_err(annotate)?
            }
        };
        let best = true_best_arm(task);
        let regret = task.limit(&result.selected).unwrap() - task.limit(best).unwrap();
        records.push(TaskRecord {
            repetition,
            position,
            task_id: task.task_id().to_owned(),
            scheduler: spec.scheduler,
            selected_arm: result.selected.clone(),
            regret,
            pulls: result.ledger.total_pulls(),
            sim_time: result.ledger.total_sim_time(),
        });
        if spec.scheduler.carries_incumbents() {
            store.update(result.selected.clone());
        }
        results.push(result);
    }
    Ok(RepetitionDetail {
        repetition,
        records,
        results,
        store_sizes,
    })
}

/// Per-repetition aggregate kept by the streaming fold: ledgers reduce to
/// the sorted per-arm final pull counts of each task, enough to answer
/// "how many arms reached level t" for any t at merge time.
struct RepetitionFold {
    records: Vec<TaskRecord>,
    summary: RepetitionSummary,
    final_counts: Vec<Vec<u64>>,
}

fn fold_repetition(detail: RepetitionDetail) -> RepetitionFold {
    let mut cumulative_regret = 0.0;
    let mut total_pulls = 0u64;
    let mut total_sim_time = 0.0;
    for r in &detail.records {
        cumulative_regret += r.regret;
        total_pulls += r.pulls;
        total_sim_time += r.sim_time;
    }
    let final_counts = detail
        .results
        .iter()
        .map(|result| {
            let mut counts: Vec<u64> = result.ledger.per_arm().values().copied().collect();
            counts.sort_unstable();
            counts
        })
        .collect();
    RepetitionFold {
        summary: RepetitionSummary {
            repetition: detail.repetition,
            cumulative_regret,
            total_pulls,
            total_sim_time,
        },
        records: detail.records,
        final_counts,
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let sum: f64 = values.clone().sum();
    let mean = sum / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var: f64 = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Runs all repetitions (in parallel under the ambient rayon pool; results
/// merge in repetition order) and aggregates the report.
pub fn run_sequence(spec: &SequenceSpec) -> Result<SequenceReport, HarnessError> {
    spec.validate()?;
    let folds: Vec<RepetitionFold> = (0..spec.repetitions)
        .into_par_iter()
        .map(|rep| run_repetition(spec, rep).map(fold_repetition))
        .collect::<Result<Vec<_>, _>>()?;

    let mut records = Vec::new();
    let mut repetitions = Vec::new();
    let mut cumulative_regret = 0.0;
    let mut total_pulls = 0u64;
    let mut total_sim_time = 0.0;
    let mut task_ledgers = 0usize;
    let mut union_levels: BTreeSet<u64> = BTreeSet::new();
    for fold in &folds {
        cumulative_regret += fold.summary.cumulative_regret;
        total_pulls += fold.summary.total_pulls;
        total_sim_time += fold.summary.total_sim_time;
        task_ledgers += fold.final_counts.len();
        for task_counts in &fold.final_counts {
            union_levels.extend(task_counts.iter().copied());
        }
    }
    // arms reaching level l in one sorted count vector = suffix length
    let mut level_totals: BTreeMap<u64, u64> = BTreeMap::new();
    for &level in &union_levels {
        let mut total = 0u64;
        for fold in &folds {
            for task_counts in &fold.final_counts {
                total += (task_counts.len() - task_counts.partition_point(|&c| c < level)) as u64;
            }
        }
        level_totals.insert(level, total);
    }

    for fold in folds {
        records.extend(fold.records);
        repetitions.push(fold.summary);
    }

    let (mean_cumulative_regret, std_cumulative_regret) =
        mean_std(repetitions.iter().map(|r| r.cumulative_regret));
    let (mean_pulls, std_pulls) = mean_std(repetitions.iter().map(|r| r.total_pulls as f64));
    let (mean_sim_time, std_sim_time) =
        mean_std(repetitions.iter().map(|r| r.total_sim_time));

    let levels: Vec<u64> = level_totals.keys().copied().collect();
    let per_task_mean: Vec<f64> = levels
        .iter()
        .map(|l| level_totals[l] as f64 / task_ledgers as f64)
        .collect();
    let per_sequence_mean: Vec<f64> = levels
        .iter()
        .map(|l| level_totals[l] as f64 / spec.repetitions as f64)
        .collect();

    Ok(SequenceReport {
        scheduler: spec.scheduler,
        records,
        repetitions,
        cumulative_regret,
        mean_cumulative_regret,
        std_cumulative_regret,
        total_pulls,
        mean_pulls,
        std_pulls,
        total_sim_time,
        mean_sim_time,
        std_sim_time,
        candidates_per_level: LevelCounts {
            levels,
            per_task_mean,
            per_sequence_mean,
        },
    })
}

/// Count of distinct arms whose cumulative pulls reached each level.
/// `levels` must be ascending and ≥ 1.
pub fn candidates_per_level(ledger: &PullLedger, levels: &[u64]) -> BTreeMap<u64, usize> {
    debug_assert!(levels.windows(2).all(|w| w[0] < w[1]));
    debug_assert!(levels.first().is_none_or(|&l| l >= 1));
    levels
        .iter()
        .map(|&l| (l, ledger.arms_pulled_at_least(l)))
        .collect()
}

/// Paired per-repetition row of a comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedRepetition {
    pub repetition: usize,
    pub baseline_regret: f64,
    pub candidate_regret: f64,
    pub baseline_pulls: u64,
    pub candidate_pulls: u64,
    pub baseline_sim_time: f64,
    pub candidate_sim_time: f64,
}

/// Aggregates of one side of a comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub scheduler: SchedulerKind,
    pub mean_cumulative_regret: f64,
    pub std_cumulative_regret: f64,
    pub mean_pulls: f64,
    pub std_pulls: f64,
    pub mean_sim_time: f64,
    pub std_sim_time: f64,
    pub total_pulls: u64,
    pub total_sim_time: f64,
}

impl AggregateStats {
    fn from_report(r: &SequenceReport) -> Self {
        AggregateStats {
            scheduler: r.scheduler,
            mean_cumulative_regret: r.mean_cumulative_regret,
            std_cumulative_regret: r.std_cumulative_regret,
            mean_pulls: r.mean_pulls,
            std_pulls: r.std_pulls,
            mean_sim_time: r.mean_sim_time,
            std_sim_time: r.std_sim_time,
            total_pulls: r.total_pulls,
            total_sim_time: r.total_sim_time,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub baseline: AggregateStats,
    pub candidate: AggregateStats,
    /// 100 · (time_base − time_cand) / time_base over the whole run;
    /// positive = the candidate is cheaper. 0 when the baseline time is 0.
    pub time_reduction_pct: f64,
    /// mean cumulative regret, candidate − baseline.
    pub regret_delta: f64,
    pub per_repetition: Vec<PairedRepetition>,
    #[serde(skip)]
    pub baseline_report: Option<SequenceReport>,
    #[serde(skip)]
    pub candidate_report: Option<SequenceReport>,
}

/// Runs both specs (which must differ only in their scheduler — same bench,
/// seeds, protocol) and pairs them per repetition.
pub fn compare(
    baseline: &SequenceSpec,
    candidate: &SequenceSpec,
) -> Result<ComparisonReport, HarnessError> {
    ensure_paired(baseline, candidate)?;
    let base = run_sequence(baseline)?;
    let cand = run_sequence(candidate)?;
    let time_reduction_pct = if base.total_sim_time > 0.0 {
        100.0 * (base.total_sim_time - cand.total_sim_time) / base.total_sim_time
    } else {
        0.0
    };
    let regret_delta = cand.mean_cumulative_regret - base.mean_cumulative_regret;
    let per_repetition = base
        .repetitions
        .iter()
        .zip(cand.repetitions.iter())
        .map(|(b, c)| PairedRepetition {
            repetition: b.repetition,
            baseline_regret: b.cumulative_regret,
            candidate_regret: c.cumulative_regret,
            baseline_pulls: b.total_pulls,
            candidate_pulls: c.total_pulls,
            baseline_sim_time: b.total_sim_time,
            candidate_sim_time: c.total_sim_time,
        })
        .collect();
    Ok(ComparisonReport {
        baseline: AggregateStats::from_report(&base),
        candidate: AggregateStats::from_report(&cand),
        time_reduction_pct,
        regret_delta,
        per_repetition,
        baseline_report: Some(base),
        candidate_report: Some(cand),
    })
}

fn ensure_paired(a: &SequenceSpec, b: &SequenceSpec) -> Result<(), HarnessError> {
    let mismatch = |what: &str| Err(HarnessError::SpecMismatch(what.to_owned()));
    if a.bench != b.bench {
        return mismatch("bench");
    }
    if a.sequence_length != b.sequence_length {
        return mismatch("sequence_length");
    }
    if a.repetitions != b.repetitions {
        return mismatch("repetitions");
    }
    if a.permutation_seed != b.permutation_seed {
        return mismatch("permutation_seed");
    }
    if a.cfg != b.cfg {
        return mismatch("scheduler config");
    }
    if a.arms_per_task != b.arms_per_task {
        return mismatch("arms_per_task");
    }
    if a.max_resource != b.max_resource {
        return mismatch("max_resource");
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub budget: u64,
    pub candidate_mean_regret: Option<f64>,
    pub baseline_mean_regret: Option<f64>,
    pub time_reduction_pct: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub candidate: SchedulerKind,
    pub baseline: SchedulerKind,
    pub rows: Vec<SweepRow>,
}

/// One paired run per budget: the configured scheduler against its
/// no-transfer baseline. A budget too small to run becomes an error row;
/// the sweep continues.
pub fn budget_sweep(spec: &SequenceSpec, budgets: &[u64]) -> Result<SweepReport, HarnessError> {
    if budgets.is_empty() {
        return Err(HarnessError::InvalidSpec("empty budget list".into()));
    }
    if budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HarnessError::InvalidSpec(
            "budgets must be strictly ascending".into(),
        ));
    }
    let baseline_kind = spec.scheduler.baseline();
    let mut rows = Vec::with_capacity(budgets.len());
    for &budget in budgets {
        let mut cand_spec = spec.clone();
        cand_spec.cfg.budget = budget;
        let mut base_spec = cand_spec.clone();
        base_spec.scheduler = baseline_kind;
        match compare(&base_spec, &cand_spec) {
            Ok(cmp) => rows.push(SweepRow {
                budget,
                candidate_mean_regret: Some(cmp.candidate.mean_cumulative_regret),
                baseline_mean_regret: Some(cmp.baseline.mean_cumulative_regret),
                time_reduction_pct: Some(cmp.time_reduction_pct),
                error: None,
            }),
            Err(e) => rows.push(SweepRow {
                budget,
                candidate_mean_regret: None,
                baseline_mean_regret: None,
                time_reduction_pct: None,
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(SweepReport {
        candidate: spec.scheduler,
        baseline: baseline_kind,
        rows,
    })
}
