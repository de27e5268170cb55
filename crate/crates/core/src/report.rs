//! Serialization of campaign results: the JSON report and the CSV data files.
//!
//! Every output file carries the resolved config hash and the master seed, so
//! any artifact can be traced back to the exact run that produced it.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::campaign::{CampaignConfig, CampaignResult, CampaignStats};
use crate::cell::Trace;
use crate::error::{Error, Result};
use crate::metrics::MetricReport;

#[derive(Serialize)]
struct ReportMeta<'a> {
    config_hash: &'a str,
    master_seed: u64,
    chips: u32,
    cells_per_chip: u32,
    readout_repetitions: u32,
    reconfig_epochs: u32,
    noise_sigma: f64,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    meta: ReportMeta<'a>,
    metrics: &'a MetricReport,
    stats: &'a CampaignStats,
}

/// Renders the JSON report. Deterministic: two runs of the same config
/// produce byte-identical text.
pub fn report_json(result: &CampaignResult, config: &CampaignConfig) -> String {
    let doc = ReportDoc {
        meta: ReportMeta {
            config_hash: &result.config_hash,
            master_seed: result.master_seed,
            chips: config.chips,
            cells_per_chip: config.cells_per_chip,
            readout_repetitions: config.readout_repetitions,
            reconfig_epochs: config.reconfig_epochs,
            noise_sigma: config.noise_sigma,
        },
        metrics: &result.report,
        stats: &result.stats,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
    text.push('\n');
    text
}

fn metadata_line(config_hash: &str, master_seed: u64) -> String {
    format!("# config_hash={config_hash} master_seed={master_seed}\n")
}

/// Writes `responses.csv`: one row per (chip, cell, epoch, repetition).
pub fn write_responses_csv(result: &CampaignResult, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(metadata_line(&result.config_hash, result.master_seed).as_bytes())?;
    writeln!(w, "chip,cell,epoch,repetition,bit,v_out")?;
    let m = &result.matrix;
    for chip in 0..m.chips() {
        for cell in 0..m.cells() {
            for epoch in 0..m.epochs() {
                for rep in 0..m.repetitions() {
                    writeln!(
                        w,
                        "{chip},{cell},{epoch},{rep},{},{}",
                        m.bit(chip, cell, epoch, rep),
                        m.v_out(chip, cell, epoch, rep)
                    )?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `vout_hist.csv`: bin_low, bin_high, count.
pub fn write_histogram_csv(result: &CampaignResult, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(metadata_line(&result.config_hash, result.master_seed).as_bytes())?;
    writeln!(w, "bin_low,bin_high,count")?;
    let h = &result.report.histogram;
    for ((low, high), count) in h.bin_edges().into_iter().zip(&h.counts) {
        writeln!(w, "{low},{high},{count}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one recorded trace as CSV. A zero-length trace produces a file with
/// the metadata line and header only.
pub fn write_trace_csv(
    trace: &Trace,
    config_hash: &str,
    master_seed: u64,
    path: &Path,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(metadata_line(config_hash, master_seed).as_bytes())?;
    writeln!(w, "t,v_in,v_out,omega1,omega2,r1,r2")?;
    for r in &trace.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.t, r.v_in, r.v_out, r.omega1, r.omega2, r.r1, r.r2
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Exports the recorded trace of one cell to `trace_{chip}_{cell}.csv`.
pub fn export_trace(result: &CampaignResult, chip: u32, cell: u32, dir: &Path) -> Result<PathBuf> {
    let trace = result
        .traces
        .iter()
        .find(|t| t.chip == chip && t.cell == cell)
        .ok_or(Error::MissingTrace { chip, cell })?;
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("trace_{chip}_{cell}.csv"));
    write_trace_csv(&trace.trace, &result.config_hash, result.master_seed, &path)?;
    Ok(path)
}

/// Persists the report, the response matrix, the histogram, and any recorded
/// traces. Returns the written paths.
pub fn write_outputs(
    result: &CampaignResult,
    config: &CampaignConfig,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let report_path = dir.join("report.json");
    fs::write(&report_path, report_json(result, config))?;
    written.push(report_path);

    let responses_path = dir.join("responses.csv");
    write_responses_csv(result, &responses_path)?;
    written.push(responses_path);

    let hist_path = dir.join("vout_hist.csv");
    write_histogram_csv(result, &hist_path)?;
    written.push(hist_path);

    for t in &result.traces {
        written.push(export_trace(result, t.chip, t.cell, dir)?);
    }
    Ok(written)
}
