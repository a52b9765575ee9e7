use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::concepts::HalfspaceIntersection;
use crate::error::{Result, TdsError};
use crate::tds::{Diagnostics, Verdict};

/// Version of the JSON Lines record layout.
pub const RECORD_SCHEMA_VERSION: u32 = 1;

/// Outcome of one `(config, seed)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub scenario: String,
    /// `None` when scenario generation or the learner failed.
    pub verdict: Option<Verdict>,
    pub reject_reason: Option<String>,
    pub error: Option<String>,
    pub hypothesis: Option<HalfspaceIntersection>,
    pub truth: Option<HalfspaceIntersection>,
    /// Disagreement with the truth on fresh test-distribution draws.
    pub holdout_error: Option<f64>,
    /// `ε + 3·√(ε(1−ε)/m_holdout)`.
    pub error_bound: f64,
    pub soundness_ok: bool,
    pub contract_ok: bool,
    pub expectation_met: bool,
    pub lambda_hat: Option<f64>,
    pub diagnostics: Option<Diagnostics>,
    /// Timing field, excluded from determinism comparisons.
    pub wall_time_ms: u64,
}

impl RunRecord {
    pub fn accepted(&self) -> bool {
        self.verdict == Some(Verdict::Accept)
    }

    pub fn violation(&self) -> bool {
        !self.soundness_ok || !self.contract_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_records: usize,
    pub accept_rate: f64,
    pub max_holdout_error: Option<f64>,
    pub reject_histogram: BTreeMap<String, usize>,
    pub errors: usize,
    pub expectation_met_rate: f64,
    pub violations: usize,
}

impl Summary {
    pub fn from_records(records: &[RunRecord]) -> Self {
        let n = records.len();
        let frac = |c: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
        let mut reject_histogram = BTreeMap::new();
        for r in records {
            if let Some(reason) = &r.reject_reason {
                *reject_histogram.entry(reason.clone()).or_insert(0) += 1;
            }
        }
        Self {
            n_records: n,
            accept_rate: frac(records.iter().filter(|r| r.accepted()).count()),
            max_holdout_error: records.iter().filter_map(|r| r.holdout_error).reduce(f64::max),
            reject_histogram,
            errors: records.iter().filter(|r| r.error.is_some()).count(),
            expectation_met_rate: frac(records.iter().filter(|r| r.expectation_met).count()),
            violations: records.iter().filter(|r| r.violation()).count(),
        }
    }
}

/// One line of a records file: a header, then one record per seed, then the
/// summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum RecordLine {
    Header { schema_version: u32, config: RunConfig },
    Record(RunRecord),
    Summary(Summary),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub config: RunConfig,
    pub records: Vec<RunRecord>,
    pub summary: Summary,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> TdsError {
    TdsError::Config { path: path.display().to_string(), msg: e.to_string() }
}

/// Path of the flat table written next to a records file.
pub fn table_path(records: &Path) -> PathBuf {
    records.with_extension("csv")
}

#[derive(Serialize)]
struct TableRow<'a> {
    seed: u64,
    scenario: &'a str,
    verdict: &'a str,
    reject_reason: &'a str,
    holdout_error: Option<f64>,
    error_bound: f64,
    soundness_ok: bool,
    contract_ok: bool,
    expectation_met: bool,
    lambda_hat: Option<f64>,
    candidate_count: Option<usize>,
    wall_time_ms: u64,
}

impl RunOutput {
    pub fn lines(&self) -> Vec<RecordLine> {
        let mut lines = vec![RecordLine::Header { schema_version: RECORD_SCHEMA_VERSION, config: self.config.clone() }];
        lines.extend(self.records.iter().cloned().map(RecordLine::Record));
        lines.push(RecordLine::Summary(self.summary.clone()));
        lines
    }

    /// Writes the JSON Lines file at `path` and the table next to it.
    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for line in self.lines() {
            serde_json::to_writer(&mut w, &line).map_err(|e| io_err(path, e))?;
            w.write_all(b"\n").map_err(|e| io_err(path, e))?;
        }
        w.flush().map_err(|e| io_err(path, e))?;

        let tpath = table_path(path);
        let mut t = csv::Writer::from_path(&tpath).map_err(|e| io_err(&tpath, e))?;
        for r in &self.records {
            let verdict = match &r.verdict {
                Some(Verdict::Accept) => "accept",
                Some(Verdict::Reject(_)) => "reject",
                None => "error",
            };
            t.serialize(TableRow {
                seed: r.seed,
                scenario: &r.scenario,
                verdict,
                reject_reason: r.reject_reason.as_deref().unwrap_or(""),
                holdout_error: r.holdout_error,
                error_bound: r.error_bound,
                soundness_ok: r.soundness_ok,
                contract_ok: r.contract_ok,
                expectation_met: r.expectation_met,
                lambda_hat: r.lambda_hat,
                candidate_count: r.diagnostics.as_ref().map(|d| d.candidate_count),
                wall_time_ms: r.wall_time_ms,
            })
            .map_err(|e| io_err(&tpath, e))?;
        }
        t.flush().map_err(|e| io_err(&tpath, e))
    }

    /// Reads a records file back. The summary is recomputed from the records.
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
        let mut config = None;
        let mut records = Vec::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| io_err(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: RecordLine = serde_json::from_str(&line)
                .map_err(|e| TdsError::Config { path: format!("{}:{}", path.display(), i + 1), msg: e.to_string() })?;
            match parsed {
                RecordLine::Header { config: c, .. } => config = Some(c),
                RecordLine::Record(r) => records.push(r),
                RecordLine::Summary(_) => {}
            }
        }
        let config = config.ok_or_else(|| io_err(path, "records file has no header line"))?;
        let summary = Summary::from_records(&records);
        Ok(Self { config, records, summary })
    }
}
