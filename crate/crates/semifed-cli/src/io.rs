//! File formats: schedule and plan CSVs, trace CSVs, run summaries.
//!
//! Every float is printed with 17 significant digits so determinism
//! checks can compare files byte for byte, and all writes go through a
//! temp-file-plus-rename so partially written artifacts never appear.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use semifed_core::bandwidth::{BandwidthPlan, PolicyTag};
use semifed_core::engine::{total_time, RunConfig, SimTrace};
use semifed_core::scheduling::SchedulingMatrix;

/// 17 significant digits: enough for exact f64 round-trips.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes bytes atomically (temp file in the same directory + rename).
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = path.with_extension("tmp");
    {
        let mut file = fs::File::create(&tmp)
            .with_context(|| format!("creating {}", tmp.display()))?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Schedule CSV: header `ue_0..ue_{n-1}`, one 0/1 row per round.
pub fn schedule_to_csv(matrix: &SchedulingMatrix) -> String {
    let mut out = String::new();
    let header: Vec<String> = (0..matrix.population()).map(|i| format!("ue_{i}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for k in 0..matrix.rounds() {
        let row: Vec<String> = matrix.row(k).iter().map(|e| e.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parses a schedule CSV back; participants per round are inferred
/// from the (uniform) row sums.
pub fn schedule_from_csv(text: &str, staleness_bound: usize) -> Result<SchedulingMatrix> {
    let mut lines = text.lines();
    let header = lines.next().context("empty schedule CSV")?;
    let population = header.split(',').count();
    let mut entries = Vec::new();
    let mut rounds = 0;
    for line in lines {
        if line.is_empty() {
            continue;
        }
        for field in line.split(',') {
            let v: u8 = field.trim().parse().context("schedule entries must be 0/1")?;
            entries.push(v);
        }
        rounds += 1;
    }
    if rounds == 0 {
        bail!("schedule CSV has no rows");
    }
    let first_sum: usize = entries[..population].iter().map(|&e| e as usize).sum();
    Ok(SchedulingMatrix::from_entries(
        rounds,
        population,
        entries,
        first_sum,
        staleness_bound,
    )?)
}

/// Plan CSV: `round,ue,share_hz`, round-major then UE-minor.
pub fn plan_to_csv(plan: &BandwidthPlan) -> String {
    let mut out = String::from("round,ue,share_hz\n");
    for k in 0..plan.rounds() {
        for i in 0..plan.population() {
            out.push_str(&format!("{k},{i},{}\n", fmt_f64(plan.share(k, i))));
        }
    }
    out
}

/// Parses a plan CSV back (tagged as custom provenance).
pub fn plan_from_csv(text: &str) -> Result<BandwidthPlan> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut cells: Vec<(usize, usize, f64)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let round: usize = record.get(0).context("missing round")?.parse()?;
        let ue: usize = record.get(1).context("missing ue")?.parse()?;
        let share: f64 = record.get(2).context("missing share_hz")?.parse()?;
        cells.push((round, ue, share));
    }
    let rounds = cells.iter().map(|c| c.0 + 1).max().context("empty plan CSV")?;
    let population = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
    let mut shares = vec![0.0; rounds * population];
    for (round, ue, share) in cells {
        shares[round * population + ue] = share;
    }
    Ok(BandwidthPlan::from_shares(
        rounds,
        population,
        shares,
        PolicyTag::Custom,
    )?)
}

/// Trace CSV: one row per closed round. Participants are joined with
/// `|`; the accuracy column stays empty for tasks without one.
pub fn trace_to_csv(trace: &SimTrace) -> String {
    let mut out = String::from(
        "round,close_time_s,participants,max_staleness,loss,grad_norm_sq,accuracy\n",
    );
    for rec in &trace.records {
        let participants = rec
            .participants
            .iter()
            .map(|u| u.to_string())
            .collect::<Vec<_>>()
            .join("|");
        let accuracy = rec.accuracy.map(fmt_f64).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            rec.round,
            fmt_f64(rec.close_time_s),
            participants,
            rec.max_staleness(),
            fmt_f64(rec.loss),
            fmt_f64(rec.grad_norm_sq),
            accuracy,
        ));
    }
    out
}

/// Parsed trace row (for round-trips and analysis of emitted files).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub round: usize,
    pub close_time_s: f64,
    pub participants: Vec<usize>,
    pub max_staleness: usize,
    pub loss: f64,
    pub grad_norm_sq: f64,
    pub accuracy: Option<f64>,
}

/// Parses a trace CSV.
pub fn trace_from_csv(text: &str) -> Result<Vec<TraceRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let participants: Vec<usize> = record
            .get(2)
            .context("missing participants")?
            .split('|')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse())
            .collect::<std::result::Result<_, _>>()?;
        let accuracy_field = record.get(6).unwrap_or("");
        rows.push(TraceRow {
            round: record.get(0).context("missing round")?.parse()?,
            close_time_s: record.get(1).context("missing close_time_s")?.parse()?,
            participants,
            max_staleness: record.get(3).context("missing max_staleness")?.parse()?,
            loss: record.get(4).context("missing loss")?.parse()?,
            grad_norm_sq: record.get(5).context("missing grad_norm_sq")?.parse()?,
            accuracy: if accuracy_field.is_empty() {
                None
            } else {
                Some(accuracy_field.parse()?)
            },
        });
    }
    Ok(rows)
}

/// Per-run summary written next to each trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: String,
    pub objective: String,
    pub rounds: usize,
    pub total_time_s: f64,
    pub final_loss: f64,
    pub final_accuracy: Option<f64>,
    pub avg_grad_norm_sq: f64,
    pub fosp_epsilon: f64,
    pub fosp_satisfied: bool,
    pub max_staleness: usize,
    pub flags: Vec<String>,
}

/// Builds the summary of a finished run.
pub fn summarize(mode: &str, objective: &str, config: &RunConfig, trace: &SimTrace) -> RunSummary {
    let avg = trace.avg_sq_grad_norm();
    RunSummary {
        mode: mode.to_string(),
        objective: objective.to_string(),
        rounds: trace.records.len(),
        total_time_s: total_time(trace),
        final_loss: trace.records.last().map_or(f64::NAN, |r| r.loss),
        final_accuracy: trace.records.last().and_then(|r| r.accuracy),
        avg_grad_norm_sq: avg,
        fosp_epsilon: config.fosp_epsilon,
        fosp_satisfied: semifed_core::analysis::fosp_satisfied(avg, config.fosp_epsilon),
        max_staleness: trace.max_staleness(),
        flags: trace.flags.iter().map(|f| format!("{f:?}")).collect(),
    }
}

/// Cross-mode comparison written when a simulate run covers several
/// modes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeComparison {
    pub runs: Vec<RunSummary>,
    pub fastest_mode: String,
    pub lowest_final_loss_mode: String,
}

/// Assembles the comparison table.
pub fn compare(runs: Vec<RunSummary>) -> ModeComparison {
    let fastest = runs
        .iter()
        .min_by(|a, b| a.total_time_s.total_cmp(&b.total_time_s))
        .map(|r| r.mode.clone())
        .unwrap_or_default();
    let lowest = runs
        .iter()
        .min_by(|a, b| a.final_loss.total_cmp(&b.final_loss))
        .map(|r| r.mode.clone())
        .unwrap_or_default();
    ModeComparison {
        runs,
        fastest_mode: fastest,
        lowest_final_loss_mode: lowest,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use semifed_core::scheduling::greedy_schedule;

    #[test]
    fn schedule_csv_round_trip() {
        let m = greedy_schedule(&[0.25; 4], 2, 6, 2).unwrap();
        let csv = schedule_to_csv(&m);
        assert!(csv.starts_with("ue_0,ue_1,ue_2,ue_3\n"));
        let back = schedule_from_csv(&csv, 2).unwrap();
        for k in 0..6 {
            assert_eq!(m.row(k), back.row(k));
        }
        assert_eq!(back.participants_per_round(), 2);
    }

    #[test]
    fn plan_csv_round_trip_is_lossless() {
        let shares: Vec<f64> = (0..12).map(|i| (i as f64) * 0.1234567890123456789e5).collect();
        let plan = BandwidthPlan::from_shares(3, 4, shares.clone(), PolicyTag::Custom).unwrap();
        let text = plan_to_csv(&plan);
        let back = plan_from_csv(&text).unwrap();
        for k in 0..3 {
            for i in 0..4 {
                assert_eq!(plan.share(k, i).to_bits(), back.share(k, i).to_bits());
            }
        }
    }

    #[test]
    fn float_formatting_is_17_digits() {
        let x = core::f64::consts::PI;
        let s = fmt_f64(x);
        let back: f64 = s.parse().unwrap();
        assert_eq!(back.to_bits(), x.to_bits());
    }
}
