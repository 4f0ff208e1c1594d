//! Report rendering: one row per mode with preprocessing, pipeline and total
//! times as mean ± std, then FPS, followed by the environment.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{BenchReport, HarnessError, Result, Stat};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Text,
}

impl FromStr for ReportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "text" | "table" => Ok(ReportFormat::Text),
            other => Err(HarnessError::InvalidConfig(format!("unknown report format {other:?}"))),
        }
    }
}

fn pm(s: &Stat) -> String {
    format!("{:.2} ± {:.2}", s.mean_ms, s.std_ms)
}

fn environment_lines(r: &BenchReport) -> Vec<(String, String)> {
    let e = &r.environment;
    let p = &r.protocol;
    vec![
        ("host".into(), e.host.clone()),
        ("cores".into(), e.cores.to_string()),
        ("os".into(), format!("{} {}", e.os, e.arch)),
        ("build".into(), e.build.clone()),
        (
            "timer".into(),
            format!("{} ({} ns resolution)", e.timer, e.clock_resolution_ns),
        ),
        ("pipeline".into(), e.pipeline.clone()),
        (
            "protocol".into(),
            format!(
                "{} runs x {} batches x {} images, {} warmup batches, seed {}{}",
                p.runs,
                p.batches_per_run,
                p.batch_size,
                p.warmup_batches,
                p.seed,
                if p.parallel { ", parallel" } else { "" }
            ),
        ),
        (
            "corpus".into(),
            format!(
                "{} images{}",
                p.corpus_images,
                if p.sampled_with_replacement {
                    ", sampled with replacement"
                } else {
                    ""
                }
            ),
        ),
    ]
}

pub fn emit_report(report: &BenchReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report).expect("report serializes") + "\n",
        ReportFormat::Csv => {
            let mut s = String::from(
                "mode,preprocessing_mean_ms,preprocessing_std_ms,pipeline_mean_ms,pipeline_std_ms,total_mean_ms,total_std_ms,fps\n",
            );
            for r in &report.rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{}",
                    r.mode,
                    r.preprocessing.mean_ms,
                    r.preprocessing.std_ms,
                    r.pipeline.mean_ms,
                    r.pipeline.std_ms,
                    r.total.mean_ms,
                    r.total.std_ms,
                    r.fps
                );
            }
            for (k, v) in environment_lines(report) {
                let _ = writeln!(s, "# {k}: {v}");
            }
            s
        }
        ReportFormat::Text => {
            let header = ["Mode", "Preprocessing (ms)", "Pipeline (ms)", "Total (ms)", "FPS"];
            let cells: Vec<[String; 5]> = report
                .rows
                .iter()
                .map(|r| {
                    [
                        r.mode.to_string(),
                        pm(&r.preprocessing),
                        pm(&r.pipeline),
                        pm(&r.total),
                        format!("{:.1}", r.fps),
                    ]
                })
                .collect();
            let mut widths = header.map(|h| h.chars().count());
            for row in &cells {
                for (w, c) in widths.iter_mut().zip(row) {
                    *w = (*w).max(c.chars().count());
                }
            }
            let line = |row: &[String]| {
                let parts: Vec<String> = row
                    .iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(i, (c, &w))| {
                        let pad = w - c.chars().count();
                        if i == 0 {
                            format!("{c}{}", " ".repeat(pad))
                        } else {
                            format!("{}{c}", " ".repeat(pad))
                        }
                    })
                    .collect();
                parts.join("  ").trim_end().to_string() + "\n"
            };
            let mut s = line(&header.map(String::from));
            s.push_str(&line(&widths.map(|w| "-".repeat(w))));
            for row in &cells {
                s.push_str(&line(row));
            }
            s.push('\n');
            for (k, v) in environment_lines(report) {
                let _ = writeln!(s, "{k}: {v}");
            }
            s
        }
    }
}

pub fn write_report(report: &BenchReport, format: ReportFormat, path: &Path) -> Result<()> {
    std::fs::write(path, emit_report(report, format)).map_err(|source| HarnessError::UnwritableOutput {
        path: path.to_path_buf(),
        source,
    })
}
