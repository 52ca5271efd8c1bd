use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::campaign::{CampaignResult, Quantiles};
use super::episode::TimeRow;
use super::metrics::RunMetrics;
use super::HarnessError;
use crate::nav::TuningVector;
use crate::sensors::AllanPoint;
use crate::tune::{BenchmarkRun, OptResult};

/// Format version written at the top of every output file.
pub const OUTPUT_VERSION: u32 = 1;

pub(crate) fn version_line(kind: &str) -> String {
    format!("# auv-gnc {kind} v{OUTPUT_VERSION}\n")
}

fn csv_file(path: &Path, kind: &str) -> Result<csv::Writer<std::fs::File>, HarnessError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(version_line(kind).as_bytes())?;
    Ok(csv::Writer::from_writer(f))
}

pub fn write_timeseries_csv(path: &Path, rows: &[TimeRow]) -> Result<(), HarnessError> {
    let mut w = csv_file(path, "timeseries")?;
    if rows.is_empty() {
        w.write_record(["t"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Versioned<'a, T> {
    version: u32,
    #[serde(flatten)]
    body: &'a T,
}

pub fn write_metrics_json(path: &Path, metrics: &RunMetrics) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(&Versioned { version: OUTPUT_VERSION, body: metrics })?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[derive(Serialize)]
struct CampaignRow<'a> {
    index: usize,
    trajectory: &'a str,
    outage: f64,
    seed_sensor: u64,
    seed_current: u64,
    seed_mismatch: u64,
    rms_pos_err: f64,
    rms_euler_err: f64,
    max_tracking_err: f64,
    goal_reached: bool,
    crash: bool,
    sim_time: f64,
}

pub fn write_campaign_csv(path: &Path, result: &CampaignResult) -> Result<(), HarnessError> {
    let mut w = csv_file(path, "campaign")?;
    for r in &result.runs {
        let m = &r.metrics;
        w.serialize(CampaignRow {
            index: r.index,
            trajectory: r.trajectory.name(),
            outage: r.outage,
            seed_sensor: r.seeds.sensor,
            seed_current: r.seeds.current,
            seed_mismatch: r.seeds.mismatch,
            rms_pos_err: m.rms_pos_err,
            rms_euler_err: m.rms_euler_err,
            max_tracking_err: m.max_tracking_err,
            goal_reached: m.goal_reached,
            crash: m.crash,
            sim_time: m.sim_time,
        })?;
    }
    w.flush()?;
    Ok(())
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// One row per evaluation: `iter, a1..ad, J, g, crashed, best_so_far`.
/// Absent values are empty fields.
pub fn write_history_csv(path: &Path, result: &OptResult) -> Result<(), HarnessError> {
    let mut w = csv_file(path, "history")?;
    let dim = result.best_x.len();
    let mut header = vec!["iter".to_string()];
    header.extend((1..=dim).map(|i| format!("a{i}")));
    header.extend(["J", "g", "crashed", "best_so_far"].map(String::from));
    w.write_record(&header)?;
    for e in &result.history {
        let mut row = vec![e.iter.to_string()];
        row.extend(e.x.iter().map(|v| format!("{v:e}")));
        row.push(opt_field(e.outcome.j));
        row.push(opt_field(e.outcome.g));
        row.push(e.outcome.crashed.to_string());
        row.push(opt_field(e.best_so_far));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Best-so-far curves of a synthetic optimizer comparison, one row per
/// `(optimizer, seed, iter)`.
pub fn write_benchmark_csv(path: &Path, runs: &[BenchmarkRun]) -> Result<(), HarnessError> {
    let mut w = csv_file(path, "benchmark")?;
    w.write_record(["optimizer", "seed", "iter", "best_so_far"])?;
    for r in runs {
        for e in &r.result.history {
            w.write_record([
                r.optimizer.name().to_string(),
                r.seed.to_string(),
                e.iter.to_string(),
                opt_field(e.best_so_far),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_campaign_summary_json(path: &Path, result: &CampaignResult) -> Result<(), HarnessError> {
    #[derive(Serialize)]
    struct Summary<'a> {
        version: u32,
        runs: usize,
        goals_reached: usize,
        tracking: &'a Option<Quantiles>,
        position: &'a Option<Quantiles>,
    }
    let s = Summary {
        version: OUTPUT_VERSION,
        runs: result.runs.len(),
        goals_reached: result.goals_reached,
        tracking: &result.tracking,
        position: &result.position,
    };
    std::fs::write(path, serde_json::to_string_pretty(&s)? + "\n")?;
    Ok(())
}

/// Config fragment `[tuning] a = [...]` that can be pasted into a scenario.
pub fn tuning_fragment(a: &TuningVector) -> Result<String, HarnessError> {
    #[derive(Serialize)]
    struct Fragment<'a> {
        tuning: &'a TuningVector,
    }
    let body = toml::to_string(&Fragment { tuning: a }).map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(format!("# auv-gnc tuning v{OUTPUT_VERSION}\n{body}"))
}

/// Reads the first column of a CSV time series. Lines starting with `#`
/// and a non-numeric header row are skipped.
pub fn read_series_csv(path: &Path) -> Result<Vec<f64>, HarnessError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let Some(field) = rec.get(0) else { continue };
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => {}
            Err(e) => return Err(HarnessError::Config(format!("line {}: {e}", i + 1))),
        }
    }
    Ok(out)
}

pub fn write_allan_csv(path: &Path, curve: &[AllanPoint]) -> Result<(), HarnessError> {
    let mut w = csv_file(path, "allan")?;
    w.write_record(["tau", "adev"])?;
    for p in curve {
        w.write_record([format!("{:e}", p.tau), format!("{:e}", p.adev)])?;
    }
    w.flush()?;
    Ok(())
}
