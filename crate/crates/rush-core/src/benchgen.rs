//! Deterministic synthetic benchmark families with known ground truth, task
//! inversion for negative-transfer experiments, cost models, and the
//! versioned bench file format.
//!
//! # Construction
//!
//! A family draws one base quality score per arm, shared by all tasks, and
//! blends it per task with independent noise:
//!
//! ```text
//! score[task, arm] = rho * base[arm] + (1 - rho) * indep[task, arm]
//! nu[task, arm]    = q(0.5 - spread/2 + spread * score[task, arm])
//! ```
//!
//! so `rho = 1` gives every task the identical limit ranking and `rho = 0`
//! independent ones. Curves descend to the limit exactly:
//!
//! ```text
//! loss(t) = q(nu + amp[arm] * shape(t) * (1 + noise * u[t]))     t < T
//! loss(T) = nu
//! shape(t) = (r^t - r^T) / (r - r^T)            geometric, r per task
//! shape(t) = (t^-p - T^-p) / (1 - T^-p)         power law, p per task
//! ```
//!
//! with u[t] uniform in [-1, 1]. shape(1) = 1 and shape(T) = 0, so the noise
//! term vanishes by t = T and the stored limit is exact. Per-arm amplitudes
//! grow affinely with the limit (worse arms start proportionally higher), so
//! noise-free curves of one task never cross: the loss ranking at every pull
//! count equals the limit ranking. q(·) rounds to the 2⁻⁴⁴ grid, which keeps
//! losses exactly complementable (1 − ℓ is exact) for [`invert_task`].
//!
//! Per-arm base costs are drawn once per family and shared across its tasks:
//! cost is a property of the configuration, not of the task.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandit::{ArmCurves, ArmId, CostCurve, LossCurve, TaskBench};
use crate::seed::mix;

pub const BENCH_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid family spec: {0}")]
    InvalidSpec(String),
    #[error("task `{task}` arm `{arm}`: loss {value} outside [0, 1]")]
    LossOutOfRange {
        task: String,
        arm: ArmId,
        value: f64,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bench format: {0}")]
    Format(String),
}

/// Shape of the per-pull loss descent, with the relative noise amplitude
/// (0 = exact closed form).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveModel {
    Geometric { noise: f64 },
    PowerLaw { noise: f64 },
}

impl CurveModel {
    fn noise(&self) -> f64 {
        match self {
            CurveModel::Geometric { noise } | CurveModel::PowerLaw { noise } => *noise,
        }
    }
}

/// Per-pull cost distribution. Arms draw one base cost each; every pull of
/// an arm costs its base value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostModel {
    /// Every pull costs `value`.
    Constant { value: f64 },
    /// exp(location + scale · N(0,1)).
    Lognormal { location: f64, scale: f64 },
    /// location · U^(-scale): Pareto-tailed, admits rare outliers far above
    /// the median (≥ 50× within ~1% of draws at scale ≈ 1).
    HeavyTailed { location: f64, scale: f64 },
}

impl CostModel {
    fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: String| Err(BenchError::InvalidSpec(msg));
        match *self {
            CostModel::Constant { value } => {
                if !(value.is_finite() && value >= 0.0) {
                    return bad(format!("constant cost must be nonnegative, got {value}"));
                }
            }
            CostModel::Lognormal { location, scale } | CostModel::HeavyTailed { location, scale } => {
                if !location.is_finite() || !scale.is_finite() || scale < 0.0 {
                    return bad(format!(
                        "cost parameters must be finite with nonnegative scale, got location {location}, scale {scale}"
                    ));
                }
                if let CostModel::HeavyTailed { location, .. } = *self {
                    if location <= 0.0 {
                        return bad(format!(
                            "heavy-tailed location must be positive, got {location}"
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            CostModel::Constant { value } => value,
            CostModel::Lognormal { location, scale } => {
                let normal = Normal::new(0.0, 1.0).unwrap();
                (location + scale * normal.sample(rng)).exp()
            }
            CostModel::HeavyTailed { location, scale } => {
                // 1 - U(0,1) lies in (0, 1], keeping the power finite
                let u: f64 = 1.0 - rng.random::<f64>();
                location * u.powf(-scale)
            }
        }
    }
}

/// Parameters of one synthetic family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub n_arms: usize,
    pub horizon: usize,
    pub n_tasks: usize,
    pub curve_model: CurveModel,
    /// Range of limits across arms, within [0, 1].
    pub limit_spread: f64,
    /// Cross-task relatedness ρ in [0, 1]: 1 = identical limit ranking.
    pub relatedness: f64,
    pub seed: u64,
}

impl FamilySpec {
    fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: String| Err(BenchError::InvalidSpec(msg));
        if self.n_arms < 2 {
            return bad(format!("need at least 2 arms, got {}", self.n_arms));
        }
        if self.horizon < 2 {
            return bad(format!("need horizon at least 2, got {}", self.horizon));
        }
        if self.n_tasks < 1 {
            return bad("need at least 1 task".into());
        }
        if !(0.0..=1.0).contains(&self.relatedness) {
            return bad(format!("relatedness must be in [0, 1], got {}", self.relatedness));
        }
        if !(self.limit_spread > 0.0 && self.limit_spread <= 1.0) {
            return bad(format!(
                "limit spread must be in (0, 1], got {}",
                self.limit_spread
            ));
        }
        let noise = self.curve_model.noise();
        if !(0.0..1.0).contains(&noise) {
            return bad(format!("noise must be in [0, 1), got {noise}"));
        }
        Ok(())
    }
}

/// Rounds to the 2⁻⁴⁴ grid. Grid values in [0, 1] have exact complements,
/// and the rounding error (≤ 2⁻⁴⁵ ≈ 2.9e-14) is far below every tolerance
/// the generator is checked against.
fn quantize(x: f64) -> f64 {
    const GRID: f64 = (1u64 << 44) as f64;
    (x * GRID).round() / GRID
}

const TAG_BASE: u64 = 1;
const TAG_COST: u64 = 2;
const TAG_TASK: u64 = 3;

/// Generates `spec.n_tasks` tasks over one shared arm-id set.
pub fn generate_family(spec: &FamilySpec, cost: &CostModel) -> Result<Vec<TaskBench>, BenchError> {
    spec.validate()?;
    cost.validate()?;
    let n = spec.n_arms;
    let horizon = spec.horizon;
    let width = (n.max(2) - 1).to_string().len();
    let ids: Vec<ArmId> = (0..n)
        .map(|i| ArmId::new(format!("arm-{i:0width$}")))
        .collect();

    let mut base_rng = ChaCha8Rng::seed_from_u64(mix(&[spec.seed, TAG_BASE]));
    let base: Vec<f64> = (0..n).map(|_| base_rng.random()).collect();

    let mut cost_rng = ChaCha8Rng::seed_from_u64(mix(&[spec.seed, TAG_COST]));
    let arm_costs: Vec<f64> = (0..n).map(|_| cost.sample(&mut cost_rng)).collect();

    let rho = spec.relatedness;
    let noise = spec.curve_model.noise();
    let mut tasks = Vec::with_capacity(spec.n_tasks);
    for j in 0..spec.n_tasks {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(&[spec.seed, TAG_TASK, j as u64]));
        let indep: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let limits: Vec<f64> = (0..n)
            .map(|a| {
                let score = rho * base[a] + (1.0 - rho) * indep[a];
                quantize(0.5 - spec.limit_spread / 2.0 + spec.limit_spread * score)
            })
            .collect();
        let lim_min = limits.iter().cloned().fold(f64::INFINITY, f64::min);
        let lim_max = limits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = (lim_max - lim_min).max(1e-12);

        let shape: Vec<f64> = match spec.curve_model {
            CurveModel::Geometric { .. } => {
                let rate: f64 = rng.random_range(0.5..0.9);
                let mut powers = Vec::with_capacity(horizon);
                let mut p = 1.0f64;
                for _ in 0..horizon {
                    p *= rate;
                    powers.push(p);
                }
                let last = powers[horizon - 1];
                let denom = powers[0] - last;
                powers.iter().map(|p| (p - last) / denom).collect()
            }
            CurveModel::PowerLaw { .. } => {
                let expo: f64 = rng.random_range(0.5..1.5);
                let tail = (horizon as f64).powf(-expo);
                let denom = 1.0 - tail;
                (1..=horizon)
                    .map(|t| ((t as f64).powf(-expo) - tail) / denom)
                    .collect()
            }
        };

        // ceiling keeps every loss at or below 1 even at shape(1)·(1+noise)
        let amp_task = 0.9 * (1.0 - lim_max) / (1.0 + noise);
        let mut arms: BTreeMap<ArmId, ArmCurves> = BTreeMap::new();
        for (a, id) in ids.iter().enumerate() {
            let amp = amp_task * (0.5 + 0.5 * (limits[a] - lim_min) / range);
            let mut losses = Vec::with_capacity(horizon);
            for (t, s) in shape.iter().enumerate() {
                if t + 1 == horizon {
                    losses.push(limits[a]);
                } else {
                    let wiggle = if noise > 0.0 {
                        1.0 + noise * rng.random_range(-1.0..1.0)
                    } else {
                        1.0
                    };
                    losses.push(quantize(limits[a] + amp * s * wiggle));
                }
            }
            let costs = CostCurve::constant(arm_costs[a], horizon)
                .map_err(|e| BenchError::Format(e.to_string()))?;
            let curves = ArmCurves::new(
                LossCurve::new(losses).map_err(|e| BenchError::Format(e.to_string()))?,
                costs,
            )
            .map_err(|e| BenchError::Format(e.to_string()))?;
            arms.insert(id.clone(), curves);
        }
        let task = TaskBench::new(format!("task-{j:02}"), arms)
            .map_err(|e| BenchError::Format(e.to_string()))?;
        tasks.push(task);
    }
    Ok(tasks)
}

/// Replaces every loss ℓ by 1 − ℓ, leaving costs untouched: best and worst
/// arms swap. The task id gains an `-inv` suffix; inverting an already
/// inverted task strips it, so double inversion is the identity.
pub fn invert_task(task: &TaskBench) -> Result<TaskBench, BenchError> {
    let mut arms = BTreeMap::new();
    for (id, curves) in task.arms() {
        let mut flipped = Vec::with_capacity(curves.losses.horizon());
        for &v in curves.losses.values() {
            if !(0.0..=1.0).contains(&v) {
                return Err(BenchError::LossOutOfRange {
                    task: task.task_id().to_owned(),
                    arm: id.clone(),
                    value: v,
                });
            }
            flipped.push(1.0 - v);
        }
        arms.insert(
            id.clone(),
            ArmCurves::new(
                LossCurve::new(flipped).map_err(|e| BenchError::Format(e.to_string()))?,
                curves.costs.clone(),
            )
            .map_err(|e| BenchError::Format(e.to_string()))?,
        );
    }
    let task_id = match task.task_id().strip_suffix("-inv") {
        Some(stripped) => stripped.to_owned(),
        None => format!("{}-inv", task.task_id()),
    };
    TaskBench::new(task_id, arms).map_err(|e| BenchError::Format(e.to_string()))
}

// ---------------------------------------------------------------------------
// Bench file format (version 1)
//
// {"version": 1, "meta": {...}?, "tasks": [{"task_id", "horizon",
//  "arms": [{"arm_id", "losses": [f64; T], "costs": [f64; T]}]}]}
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct FileArm {
    arm_id: String,
    losses: Vec<f64>,
    costs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FileTask {
    task_id: String,
    horizon: u64,
    arms: Vec<FileArm>,
}

#[derive(Serialize, Deserialize)]
struct BenchFile {
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
    tasks: Vec<FileTask>,
}

fn to_file(tasks: &[TaskBench], meta: Option<serde_json::Value>) -> BenchFile {
    BenchFile {
        version: BENCH_FORMAT_VERSION,
        meta,
        tasks: tasks
            .iter()
            .map(|t| FileTask {
                task_id: t.task_id().to_owned(),
                horizon: t.horizon() as u64,
                arms: t
                    .arms()
                    .iter()
                    .map(|(id, c)| FileArm {
                        arm_id: id.as_str().to_owned(),
                        losses: c.losses.values().to_vec(),
                        costs: c.costs.values().to_vec(),
                    })
                    .collect(),
            })
            .collect(),
    }
}

/// Writes tasks as a version-1 bench file (lossless float round-trip).
pub fn save_bench(tasks: &[TaskBench], path: impl AsRef<Path>) -> Result<(), BenchError> {
    save_bench_with_meta(tasks, None, path)
}

/// [`save_bench`] with an optional self-describing `meta` object (resolved
/// generator configuration); loaders ignore it.
pub fn save_bench_with_meta(
    tasks: &[TaskBench],
    meta: Option<serde_json::Value>,
    path: impl AsRef<Path>,
) -> Result<(), BenchError> {
    let path = path.as_ref();
    let io_err = |source| BenchError::Io {
        path: path.to_owned(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer(&mut writer, &to_file(tasks, meta))
        .map_err(|e| BenchError::Format(e.to_string()))?;
    writer.write_all(b"\n").map_err(io_err)?;
    writer.flush().map_err(io_err)?;
    Ok(())
}

/// Loads and validates a bench file. Unknown versions are rejected; curve
/// length mismatches and non-finite values are reported with the offending
/// task and arm named.
pub fn load_bench(path: impl AsRef<Path>) -> Result<Vec<TaskBench>, BenchError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| BenchError::Io {
        path: path.to_owned(),
        source,
    })?;
    let parsed: BenchFile = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| BenchError::Format(format!("{}: {e}", path.display())))?;
    if parsed.version != BENCH_FORMAT_VERSION {
        return Err(BenchError::Format(format!(
            "unsupported bench format version {} (expected {BENCH_FORMAT_VERSION})",
            parsed.version
        )));
    }
    let mut tasks = Vec::with_capacity(parsed.tasks.len());
    for ft in parsed.tasks {
        let mut arms = BTreeMap::new();
        for fa in ft.arms {
            let context = format!("task `{}` arm `{}`", ft.task_id, fa.arm_id);
            if fa.arm_id.is_empty() {
                return Err(BenchError::Format(format!("{context}: empty arm id")));
            }
            if fa.losses.len() as u64 != ft.horizon || fa.costs.len() as u64 != ft.horizon {
                return Err(BenchError::Format(format!(
                    "{context}: curve lengths {} / {} do not match horizon {}",
                    fa.losses.len(),
                    fa.costs.len(),
                    ft.horizon
                )));
            }
            let losses = LossCurve::new(fa.losses)
                .map_err(|e| BenchError::Format(format!("{context}: {e}")))?;
            let costs = CostCurve::new(fa.costs)
                .map_err(|e| BenchError::Format(format!("{context}: {e}")))?;
            let curves = ArmCurves::new(losses, costs)
                .map_err(|e| BenchError::Format(format!("{context}: {e}")))?;
            if arms.insert(ArmId::new(fa.arm_id.clone()), curves).is_some() {
                return Err(BenchError::Format(format!("{context}: duplicate arm id")));
            }
        }
        tasks.push(
            TaskBench::new(ft.task_id.clone(), arms)
                .map_err(|e| BenchError::Format(format!("task `{}`: {e}", ft.task_id)))?,
        );
    }
    Ok(tasks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::true_best_arm;

    fn spec(n_arms: usize, horizon: usize, n_tasks: usize, rho: f64, seed: u64) -> FamilySpec {
        FamilySpec {
            n_arms,
            horizon,
            n_tasks,
            curve_model: CurveModel::Geometric { noise: 0.2 },
            limit_spread: 0.5,
            relatedness: rho,
            seed,
        }
    }

    #[test]
    fn spec_validation() {
        let cost = CostModel::Constant { value: 1.0 };
        assert!(matches!(
            generate_family(&spec(1, 8, 1, 0.5, 0), &cost),
            Err(BenchError::InvalidSpec(_))
        ));
        assert!(generate_family(&spec(2, 1, 1, 0.5, 0), &cost).is_err());
        assert!(generate_family(&spec(2, 8, 0, 0.5, 0), &cost).is_err());
        assert!(generate_family(&spec(2, 8, 1, 1.5, 0), &cost).is_err());
        let mut s = spec(2, 8, 1, 0.5, 0);
        s.limit_spread = 0.0;
        assert!(generate_family(&s, &cost).is_err());
        s.limit_spread = 0.5;
        s.curve_model = CurveModel::Geometric { noise: 1.0 };
        assert!(generate_family(&s, &cost).is_err());
        assert!(matches!(
            generate_family(&spec(2, 8, 1, 0.5, 0), &CostModel::Constant { value: -1.0 }),
            Err(BenchError::InvalidSpec(_))
        ));
    }

    #[test]
    fn rho_one_shares_the_best_arm_across_tasks() {
        let tasks =
            generate_family(&spec(20, 16, 3, 1.0, 7), &CostModel::Constant { value: 1.0 })
                .unwrap();
        let firsts: Vec<&ArmId> = tasks.iter().map(true_best_arm).collect();
        assert_eq!(firsts[0], firsts[1]);
        assert_eq!(firsts[1], firsts[2]);
    }

    #[test]
    fn rho_zero_decorrelates_limits_across_tasks() {
        // Spearman rank correlation of limits between task pairs, averaged
        // over 50 seeds, should sit near zero
        fn spearman(x: &[f64], y: &[f64]) -> f64 {
            let rank = |v: &[f64]| -> Vec<f64> {
                let mut idx: Vec<usize> = (0..v.len()).collect();
                idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
                let mut r = vec![0.0; v.len()];
                for (pos, &i) in idx.iter().enumerate() {
                    r[i] = pos as f64;
                }
                r
            };
            let rx = rank(x);
            let ry = rank(y);
            let n = x.len() as f64;
            let mean = (n - 1.0) / 2.0;
            let mut num = 0.0;
            let mut dx = 0.0;
            let mut dy = 0.0;
            for i in 0..x.len() {
                num += (rx[i] - mean) * (ry[i] - mean);
                dx += (rx[i] - mean).powi(2);
                dy += (ry[i] - mean).powi(2);
            }
            num / (dx.sqrt() * dy.sqrt())
        }

        let mut total = 0.0;
        let mut pairs = 0usize;
        for seed in 0..50u64 {
            let tasks = generate_family(
                &spec(100, 2, 4, 0.0, seed),
                &CostModel::Constant { value: 1.0 },
            )
            .unwrap();
            let limits: Vec<Vec<f64>> = tasks
                .iter()
                .map(|t| t.arms().values().map(|c| c.losses.limit()).collect())
                .collect();
            for i in 0..limits.len() {
                for j in (i + 1)..limits.len() {
                    total += spearman(&limits[i], &limits[j]);
                    pairs += 1;
                }
            }
        }
        let avg = total / pairs as f64;
        assert!(avg.abs() <= 0.25, "average Spearman {avg}");
    }

    #[test]
    fn noise_free_geometric_matches_the_closed_form() {
        // reconstruct the documented closed form with independent float ops
        let s = FamilySpec {
            n_arms: 5,
            horizon: 24,
            n_tasks: 2,
            curve_model: CurveModel::Geometric { noise: 0.0 },
            limit_spread: 0.4,
            relatedness: 0.7,
            seed: 123,
        };
        let tasks = generate_family(&s, &CostModel::Constant { value: 1.0 }).unwrap();
        for (j, task) in tasks.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(&[s.seed, TAG_TASK, j as u64]));
            let indep: Vec<f64> = (0..s.n_arms).map(|_| rng.random()).collect();
            let mut base_rng = ChaCha8Rng::seed_from_u64(mix(&[s.seed, TAG_BASE]));
            let base: Vec<f64> = (0..s.n_arms).map(|_| base_rng.random()).collect();
            let limits: Vec<f64> = (0..s.n_arms)
                .map(|a| {
                    quantize(0.3 + 0.4 * (0.7 * base[a] + 0.3 * indep[a]))
                })
                .collect();
            let lim_min = limits.iter().cloned().fold(f64::INFINITY, f64::min);
            let lim_max = limits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let rate: f64 = rng.random_range(0.5..0.9);
            let amp_task = 0.9 * (1.0 - lim_max);
            for (a, (_, curves)) in task.arms().iter().enumerate() {
                let amp = amp_task * (0.5 + 0.5 * (limits[a] - lim_min) / (lim_max - lim_min));
                let t_pow = rate.powi(s.horizon as i32);
                for t in 1..s.horizon {
                    let shape = (rate.powi(t as i32) - t_pow) / (rate - t_pow);
                    let expected = limits[a] + amp * shape;
                    let got = curves.losses.loss_at(t);
                    assert!(
                        (got - expected).abs() <= 1e-12,
                        "t={t}: {got} vs {expected}"
                    );
                }
                assert_eq!(curves.losses.limit(), limits[a], "limit must be exact");
            }
        }
    }

    #[test]
    fn noise_free_envelope_matches_the_analytic_one() {
        let s = FamilySpec {
            n_arms: 6,
            horizon: 32,
            n_tasks: 1,
            curve_model: CurveModel::PowerLaw { noise: 0.0 },
            limit_spread: 0.5,
            relatedness: 1.0,
            seed: 5,
        };
        let tasks = generate_family(&s, &CostModel::Constant { value: 1.0 }).unwrap();
        for task in &tasks {
            for curves in task.arms().values() {
                let gamma = crate::theory::envelope(&curves.losses);
                let nu = curves.losses.limit();
                // a noise-free curve descends monotonically, so the envelope
                // is the curve's own distance to the limit
                for t in 1..=s.horizon {
                    let analytic = curves.losses.loss_at(t) - nu;
                    assert!((gamma[t - 1] - analytic).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic_and_noise_stays_in_bounds() {
        let s = spec(30, 40, 4, 0.6, 99);
        let cost = CostModel::Lognormal {
            location: 0.0,
            scale: 0.5,
        };
        let a = generate_family(&s, &cost).unwrap();
        let b = generate_family(&s, &cost).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        for task in &a {
            for curves in task.arms().values() {
                for &v in curves.losses.values() {
                    assert!((0.0..=1.0).contains(&v), "loss {v} out of range");
                }
                for &c in curves.costs.values() {
                    assert!(c >= 0.0);
                }
            }
        }
    }

    #[test]
    fn heavy_tail_admits_large_outliers() {
        let cost = CostModel::HeavyTailed {
            location: 1.0,
            scale: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws: Vec<f64> = (0..4000).map(|_| cost.sample(&mut rng)).collect();
        let mut sorted = draws.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let max = sorted[sorted.len() - 1];
        assert!(max >= 50.0 * median, "max {max} vs median {median}");
        assert!(draws.iter().all(|&c| c > 0.0));
    }

    #[test]
    fn invert_flips_losses_and_best_arm() {
        let tasks =
            generate_family(&spec(10, 8, 1, 1.0, 3), &CostModel::Constant { value: 2.0 })
                .unwrap();
        let task = &tasks[0];
        let inv = invert_task(task).unwrap();
        assert_eq!(inv.task_id(), "task-00-inv");
        for (id, curves) in task.arms() {
            let flipped = &inv.curves(id).unwrap().losses;
            for t in 1..=task.horizon() {
                assert_eq!(flipped.loss_at(t), 1.0 - curves.losses.loss_at(t));
            }
            assert_eq!(inv.curves(id).unwrap().costs, curves.costs);
        }
        // the inverted best arm is the original argmax of final losses
        let worst = task
            .arms()
            .iter()
            .max_by(|(ia, ca), (ib, cb)| {
                ca.losses
                    .limit()
                    .total_cmp(&cb.losses.limit())
                    .then_with(|| ib.cmp(ia))
            })
            .map(|(id, _)| id.clone())
            .unwrap();
        assert_eq!(true_best_arm(&inv), &worst);

        // involution is bit-exact on grid-quantized losses, id included
        let back = invert_task(&inv).unwrap();
        assert_eq!(&back, task);
    }

    #[test]
    fn invert_rejects_out_of_range_losses() {
        use crate::bandit::{ArmCurves, CostCurve, LossCurve};
        let arms: BTreeMap<ArmId, ArmCurves> = [(
            ArmId::from("a"),
            ArmCurves::new(
                LossCurve::new(vec![0.5, 1.5]).unwrap(),
                CostCurve::constant(1.0, 2).unwrap(),
            )
            .unwrap(),
        )]
        .into_iter()
        .collect();
        let task = TaskBench::new("bad", arms).unwrap();
        assert!(matches!(
            invert_task(&task),
            Err(BenchError::LossOutOfRange { .. })
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fam.json");
        let tasks =
            generate_family(&spec(12, 10, 3, 0.4, 21), &CostModel::Constant { value: 1.0 })
                .unwrap();
        save_bench(&tasks, &path).unwrap();
        let loaded = load_bench(&path).unwrap();
        assert_eq!(loaded, tasks);

        // meta is optional and ignored by the loader
        save_bench_with_meta(&tasks, Some(serde_json::json!({"seed": 21})), &path).unwrap();
        assert_eq!(load_bench(&path).unwrap(), tasks);
    }

    #[test]
    fn loader_names_task_and_arm_on_mismatched_curves() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(
            &path,
            r#"{"version":1,"tasks":[{"task_id":"t7","horizon":3,
                "arms":[{"arm_id":"armX","losses":[0.1,0.2],"costs":[1.0,1.0,1.0]}]}]}"#,
        )
        .unwrap();
        let err = load_bench(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("t7") && msg.contains("armX"), "{msg}");
    }

    #[test]
    fn loader_rejects_unknown_versions_and_nan() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v2.json");
        std::fs::write(&path, r#"{"version":2,"tasks":[]}"#).unwrap();
        assert!(load_bench(&path).unwrap_err().to_string().contains("version"));

        let path = dir.path().join("nan.json");
        std::fs::write(
            &path,
            r#"{"version":1,"tasks":[{"task_id":"t","horizon":1,
                "arms":[{"arm_id":"a","losses":[null],"costs":[1.0]}]}]}"#,
        )
        .unwrap();
        assert!(load_bench(&path).is_err());

        assert!(matches!(
            load_bench(dir.path().join("missing.json")),
            Err(BenchError::Io { .. })
        ));
    }

    #[test]
    fn large_bench_loads_quickly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.json");
        let s = FamilySpec {
            n_arms: 1000,
            horizon: 512,
            n_tasks: 1,
            curve_model: CurveModel::Geometric { noise: 0.1 },
            limit_spread: 0.6,
            relatedness: 1.0,
            seed: 1,
        };
        let tasks = generate_family(&s, &CostModel::Constant { value: 1.0 }).unwrap();
        save_bench(&tasks, &path).unwrap();
        let start = std::time::Instant::now();
        let loaded = load_bench(&path).unwrap();
        let elapsed = start.elapsed();
        assert_eq!(loaded[0].arm_count(), 1000);
        assert_eq!(loaded[0].horizon(), 512);
        assert!(
            elapsed.as_secs_f64() < 5.0,
            "load took {:.2}s",
            elapsed.as_secs_f64()
        );
    }
}
