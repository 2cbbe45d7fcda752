//! CSV and JSON emission for sequence runs, comparisons, and sweeps.
//!
//! The per-task CSV header is fixed:
//! `repetition,position,task_id,scheduler,selected_arm,regret,pulls,sim_time`.
//! Floats serialize with shortest round-trip precision, so identical reports
//! produce identical bytes.

use std::io::Write;

use serde::Serialize;

use super::{ComparisonReport, SequenceReport, SweepReport, TaskRecord};

#[derive(Debug, thiserror::Error)]
#[error("report emission failed: {0}")]
pub struct ReportError(#[from] csv::Error);

/// Writes the fixed-header per-task CSV.
pub fn write_records_csv<W: Write>(writer: W, records: &[TaskRecord]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(writer);
    for record in records {
        w.serialize(record)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Serialize)]
struct PairedTaskRow<'a> {
    repetition: usize,
    position: usize,
    task_id: &'a str,
    baseline_selected: &'a str,
    candidate_selected: &'a str,
    baseline_regret: f64,
    candidate_regret: f64,
    baseline_pulls: u64,
    candidate_pulls: u64,
    baseline_sim_time: f64,
    candidate_sim_time: f64,
}

/// Writes a comparison as paired per-task rows (requires the comparison to
/// retain its full reports).
pub fn write_comparison_csv<W: Write>(
    writer: W,
    comparison: &ComparisonReport,
) -> Result<(), ReportError> {
    let (Some(base), Some(cand)) = (
        comparison.baseline_report.as_ref(),
        comparison.candidate_report.as_ref(),
    ) else {
        return Ok(());
    };
    let mut w = csv::Writer::from_writer(writer);
    for (b, c) in base.records.iter().zip(cand.records.iter()) {
        w.serialize(PairedTaskRow {
            repetition: b.repetition,
            position: b.position,
            task_id: &b.task_id,
            baseline_selected: b.selected_arm.as_str(),
            candidate_selected: c.selected_arm.as_str(),
            baseline_regret: b.regret,
            candidate_regret: c.regret,
            baseline_pulls: b.pulls,
            candidate_pulls: c.pulls,
            baseline_sim_time: b.sim_time,
            candidate_sim_time: c.sim_time,
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(writer: W, sweep: &SweepReport) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(writer);
    for row in &sweep.rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// The JSON summary of a sequence run: aggregates and the candidates-per-
/// level vectors, without the per-task rows (those live in the CSV).
pub fn sequence_summary(report: &SequenceReport) -> serde_json::Value {
    serde_json::json!({
        "scheduler": report.scheduler,
        "repetitions": report.repetitions,
        "cumulative_regret": report.cumulative_regret,
        "mean_cumulative_regret": report.mean_cumulative_regret,
        "std_cumulative_regret": report.std_cumulative_regret,
        "total_pulls": report.total_pulls,
        "mean_pulls": report.mean_pulls,
        "std_pulls": report.std_pulls,
        "total_sim_time": report.total_sim_time,
        "mean_sim_time": report.mean_sim_time,
        "std_sim_time": report.std_sim_time,
        "candidates_per_level": report.candidates_per_level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::ArmId;
    use crate::harness::SchedulerKind;

    #[test]
    fn csv_header_is_the_fixed_contract() {
        let records = vec![TaskRecord {
            repetition: 0,
            position: 1,
            task_id: "t".into(),
            scheduler: SchedulerKind::Rush,
            selected_arm: ArmId::from("a"),
            regret: 0.25,
            pulls: 10,
            sim_time: 3.5,
        }];
        let mut out = Vec::new();
        write_records_csv(&mut out, &records).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "repetition,position,task_id,scheduler,selected_arm,regret,pulls,sim_time"
        );
        assert_eq!(lines.next().unwrap(), "0,1,t,rush,a,0.25,10,3.5");
    }
}
