//! Deterministic result export: one CSV row per trial plus a flat
//! `key = value` summary. Floats are written with 17 significant digits so
//! a reload reproduces the in-memory values exactly, and the files are
//! byte-stable for a fixed config and master seed (wall-clock timings are
//! deliberately not exported). Columns are documented in
//! `docs/csv-schema.md`.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::driver::{ExperimentSummary, TrialRecord};

pub const CSV_HEADER: &str = "trial,seed,rounds,spectral_error,trace_error,rank,lemma_bound,sigma_r_traj,sigma_r_pls,best_rank,best_lemma_bound,threshold,exceeded,proj_iterations,proj_min_eig,proj_marginal_dev,proj_distance,diamond_bound";

fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

fn record_row(r: &TrialRecord) -> String {
    let diamond = r.diamond.map(fmt).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.trial,
        r.seed,
        r.rounds,
        fmt(r.spectral_error),
        fmt(r.trace_error),
        r.rank,
        fmt(r.lemma_bound),
        fmt(r.sigma_r_traj),
        fmt(r.sigma_r_pls),
        r.best_rank,
        fmt(r.best_lemma_bound),
        fmt(r.threshold),
        r.exceeded,
        r.proj_iterations,
        fmt(r.proj_min_eig),
        fmt(r.proj_marginal_dev),
        fmt(r.proj_distance),
        diamond,
    )
}

/// Writes the per-trial CSV.
pub fn write_records_csv(path: &Path, records: &[TrialRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&record_row(r));
        out.push('\n');
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Writes the flat `key = value` summary (embeds the full config echo).
pub fn write_summary(path: &Path, summary: &ExperimentSummary) -> Result<()> {
    let mut out = String::new();
    for line in summary.to_lines() {
        out.push_str(&line);
        out.push('\n');
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Exports records and summary into `dir` as `records.csv` and
/// `summary.txt`; returns the two paths.
pub fn export(
    dir: &Path,
    summary: &ExperimentSummary,
    records: &[TrialRecord],
) -> Result<(PathBuf, PathBuf)> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("records.csv");
    let summary_path = dir.join("summary.txt");
    write_records_csv(&csv_path, records)?;
    write_summary(&summary_path, summary)?;
    Ok((csv_path, summary_path))
}

/// Reads a records CSV back; the inverse of [`write_records_csv`] (wall
/// time, which is not exported, reads back as zero).
pub fn read_records_csv(path: &Path) -> Result<Vec<TrialRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or(Error::EmptyRecords)?;
    if header != CSV_HEADER {
        return Err(Error::Config {
            field: "csv".into(),
            message: format!("unexpected header: {header}"),
        });
    }
    let parse_err = |line: usize, what: &str| Error::Config {
        field: format!("csv line {line}"),
        message: format!("cannot parse {what}"),
    };
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 18 {
            return Err(parse_err(i + 2, "row (wrong column count)"));
        }
        let f = |j: usize, what: &str| -> Result<f64> {
            cols[j].parse::<f64>().map_err(|_| parse_err(i + 2, what))
        };
        records.push(TrialRecord {
            trial: cols[0].parse().map_err(|_| parse_err(i + 2, "trial"))?,
            seed: cols[1].parse().map_err(|_| parse_err(i + 2, "seed"))?,
            rounds: cols[2].parse().map_err(|_| parse_err(i + 2, "rounds"))?,
            spectral_error: f(3, "spectral_error")?,
            trace_error: f(4, "trace_error")?,
            rank: cols[5].parse().map_err(|_| parse_err(i + 2, "rank"))?,
            lemma_bound: f(6, "lemma_bound")?,
            sigma_r_traj: f(7, "sigma_r_traj")?,
            sigma_r_pls: f(8, "sigma_r_pls")?,
            best_rank: cols[9].parse().map_err(|_| parse_err(i + 2, "best_rank"))?,
            best_lemma_bound: f(10, "best_lemma_bound")?,
            threshold: f(11, "threshold")?,
            exceeded: match cols[12] {
                "true" => true,
                "false" => false,
                _ => return Err(parse_err(i + 2, "exceeded")),
            },
            proj_iterations: cols[13].parse().map_err(|_| parse_err(i + 2, "proj_iterations"))?,
            proj_min_eig: f(14, "proj_min_eig")?,
            proj_marginal_dev: f(15, "proj_marginal_dev")?,
            proj_distance: f(16, "proj_distance")?,
            diamond: if cols[17].is_empty() { None } else { Some(f(17, "diamond_bound")?) },
            wall_ms: 0.0,
        });
    }
    Ok(records)
}
