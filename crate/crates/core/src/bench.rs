//! Corpus benchmark: check every protocol file in a directory in both modes.
//!
//! A corpus file holds an `Implementation` and a `Specification` definition.
//! Header comments of the form `// @key: value` carry metadata:
//!
//! ```text
//! // @name: Teleportation
//! // @expected-branches: 16
//! // @reference-interleavings: 400
//! // @status: unavailable
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::engine::{check_programs, CheckOptions, EngineError, Verdict};
use crate::lang::{load_definition, validate, FrontendError};
use crate::scheduler::Mode;

pub const IMPLEMENTATION: &str = "Implementation";
pub const SPECIFICATION: &str = "Specification";

/// Metadata from a corpus file's header comments.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Header {
    pub name: Option<String>,
    pub unavailable: bool,
    pub expected_branches: Option<u64>,
    pub reference_interleavings: Option<u64>,
}

/// Read `// @key: value` lines from anywhere in the file.
pub fn read_header(source: &str) -> Header {
    let mut h = Header::default();
    for line in source.lines() {
        let Some(rest) = line.trim().strip_prefix("//") else {
            continue;
        };
        let Some((key, value)) = rest.trim().strip_prefix('@').and_then(|kv| kv.split_once(':')) else {
            continue;
        };
        let value = value.trim();
        match key.trim() {
            "name" => h.name = Some(value.to_string()),
            "status" => h.unavailable = value == "unavailable",
            "expected-branches" => h.expected_branches = value.parse().ok(),
            "reference-interleavings" => h.reference_interleavings = value.parse().ok(),
            _ => {}
        }
    }
    h
}

/// `.qp` files directly inside `dir`, sorted by file name.
pub fn scan(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "qp"))
        .collect();
    files.sort();
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RowOutcome {
    Measured {
        interleavings: u64,
        concurrent_ms: f64,
        concurrent_verdict: Verdict,
        branches: u64,
        sequential_ms: f64,
        sequential_verdict: Verdict,
    },
    Unavailable,
    Error {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub protocol: String,
    pub file: String,
    pub expected_branches: Option<u64>,
    pub reference_interleavings: Option<u64>,
    #[serde(flatten)]
    pub outcome: RowOutcome,
}

impl BenchRow {
    pub fn verdicts(&self) -> Option<(Verdict, Verdict)> {
        match self.outcome {
            RowOutcome::Measured {
                concurrent_verdict,
                sequential_verdict,
                ..
            } => Some((concurrent_verdict, sequential_verdict)),
            _ => None,
        }
    }
}

fn measure(source: &str, budget: u64) -> Result<RowOutcome, String> {
    let load = |name: &str| -> Result<_, FrontendError> { Ok(validate(&load_definition(source, name)?)?) };
    let implementation = load(IMPLEMENTATION).map_err(|e| e.to_string())?;
    let specification = load(SPECIFICATION).map_err(|e| e.to_string())?;
    let run = |mode: Mode| -> Result<(u64, f64, Verdict), EngineError> {
        let options = CheckOptions {
            mode,
            budget,
            ..CheckOptions::default()
        };
        let start = Instant::now();
        let report = check_programs(&implementation, &specification, &options)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        let leaves = report.statistics.map_or(0, |s| s.implementation_leaves);
        Ok((leaves, ms, report.verdict))
    };
    let (interleavings, concurrent_ms, concurrent_verdict) = run(Mode::Concurrent).map_err(|e| e.to_string())?;
    let (branches, sequential_ms, sequential_verdict) = run(Mode::Sequential).map_err(|e| e.to_string())?;
    Ok(RowOutcome::Measured {
        interleavings,
        concurrent_ms,
        concurrent_verdict,
        branches,
        sequential_ms,
        sequential_verdict,
    })
}

/// Check one corpus file in both modes.
pub fn bench_file(path: &Path, budget: u64) -> BenchRow {
    let file = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    let source = match fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => {
            return BenchRow {
                protocol: file.clone(),
                file,
                expected_branches: None,
                reference_interleavings: None,
                outcome: RowOutcome::Error { message: e.to_string() },
            }
        }
    };
    let header = read_header(&source);
    let outcome = if header.unavailable {
        RowOutcome::Unavailable
    } else {
        measure(&source, budget).unwrap_or_else(|message| RowOutcome::Error { message })
    };
    BenchRow {
        protocol: header.name.unwrap_or_else(|| file.trim_end_matches(".qp").to_string()),
        file,
        expected_branches: header.expected_branches,
        reference_interleavings: header.reference_interleavings,
        outcome,
    }
}

/// One row per `.qp` file in `dir`.
pub fn bench_dir(dir: &Path, budget: u64) -> io::Result<Vec<BenchRow>> {
    Ok(scan(dir)?.iter().map(|p| bench_file(p, budget)).collect())
}

/// Fixed-width text table.
pub fn render_table(rows: &[BenchRow]) -> String {
    let header = [
        "Protocol",
        "No. Interleaving",
        "CM(ms)",
        "No. Branch",
        "SM(ms)",
        "Verdict (CM/SM)",
        "Ref. Interleaving",
    ];
    let opt = |v: Option<u64>| v.map_or_else(|| "-".to_string(), |v| v.to_string());
    let mut cells: Vec<[String; 7]> = Vec::with_capacity(rows.len());
    for r in rows {
        let reference = opt(r.reference_interleavings);
        cells.push(match &r.outcome {
            RowOutcome::Measured {
                interleavings,
                concurrent_ms,
                concurrent_verdict,
                branches,
                sequential_ms,
                sequential_verdict,
            } => [
                r.protocol.clone(),
                interleavings.to_string(),
                format!("{concurrent_ms:.1}"),
                branches.to_string(),
                format!("{sequential_ms:.1}"),
                format!("{concurrent_verdict}/{sequential_verdict}"),
                reference,
            ],
            RowOutcome::Unavailable => [
                format!("{} (*)", r.protocol),
                "-".into(),
                "-".into(),
                "-".into(),
                "-".into(),
                "model not available".into(),
                reference,
            ],
            RowOutcome::Error { message } => [
                r.protocol.clone(),
                "-".into(),
                "-".into(),
                "-".into(),
                "-".into(),
                format!("error: {message}"),
                reference,
            ],
        });
    }
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, row: &[&str]| {
        let padded: Vec<String> = row.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "| {} |", padded.join(" | "));
    };
    line(&mut out, &header);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    let _ = writeln!(out, "|-{}-|", rule.join("-|-"));
    for row in &cells {
        line(&mut out, &row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}
