//! Run manifests: the persisted record of one matching run.
//!
//! A run directory holds `manifest.json` (format below) and
//! `predictions.csv` (one line per source attribute and rank).
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "created_at": RFC 3339 timestamp,
//!   "config": PipelineConfig,
//!   "timings": RunTimings,
//!   "candidate_counts": [{"source_table": .., "n": ..}],
//!   "avg_candidate_tables": number,
//!   "diagnostics_summary": {"total": n, "by_kind": {kind: n}},
//!   "predictions": PredictionMatrix
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PredictionMatrix, RunOutcome, RunTimings};
use crate::rank::{DiagnosticKind, RankedRow, Target};
use crate::schema::{AttrRef, SchemaError};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateCount {
    pub source_table: String,
    pub n: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub total: usize,
    pub by_kind: BTreeMap<DiagnosticKind, usize>,
}

impl DiagnosticsSummary {
    pub fn of(matrix: &PredictionMatrix) -> Self {
        let mut s = Self::default();
        for d in matrix.diagnostics() {
            s.total += 1;
            *s.by_kind.entry(d.kind).or_default() += 1;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub created_at: String,
    pub config: super::PipelineConfig,
    pub timings: RunTimings,
    pub candidate_counts: Vec<CandidateCount>,
    pub avg_candidate_tables: f64,
    pub diagnostics_summary: DiagnosticsSummary,
    pub predictions: PredictionMatrix,
}

impl RunManifest {
    pub fn new(outcome: &RunOutcome) -> Self {
        let m = &outcome.matrix;
        Self {
            format_version: MANIFEST_FORMAT_VERSION,
            created_at: chrono::Utc::now().to_rfc3339(),
            config: m.config.clone(),
            timings: outcome.timings.clone(),
            candidate_counts: m
                .tables
                .iter()
                .map(|t| CandidateCount {
                    source_table: t.source_table.clone(),
                    n: t.candidate_tables.len(),
                })
                .collect(),
            avg_candidate_tables: m.avg_candidate_tables(),
            diagnostics_summary: DiagnosticsSummary::of(m),
            predictions: m.clone(),
        }
    }

    /// Writes `manifest.json` and `predictions.csv` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(dir.join(MANIFEST_FILE), json)?;
        std::fs::write(
            dir.join(PREDICTIONS_FILE),
            write_predictions_csv(&self.predictions.rows),
        )
    }

    /// Reads a manifest from a run directory or a manifest file path.
    pub fn load(path: &Path) -> Result<Self, SchemaError> {
        let file = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = std::fs::read_to_string(&file).map_err(|source| SchemaError::Io {
            path: file.clone(),
            source,
        })?;
        let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| SchemaError::Parse {
            origin: file.display().to_string(),
            message: e.to_string(),
        })?;
        if manifest.format_version != MANIFEST_FORMAT_VERSION {
            return Err(SchemaError::Parse {
                origin: file.display().to_string(),
                message: format!("unsupported manifest format version {}", manifest.format_version),
            });
        }
        Ok(manifest)
    }
}

const CSV_HEADER: [&str; 6] = ["SRC_ENT", "SRC_ATT", "RANK", "TGT_ENT", "TGT_ATT", "UNRESOLVED"];

/// Long-format CSV: one line per source attribute and rank. Empty slots
/// have empty target fields.
pub fn write_predictions_csv(rows: &[RankedRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for row in rows {
        for (i, t) in row.targets.iter().enumerate() {
            let (tt, ta) = match t {
                Target::Attribute(a) => (a.table.as_str(), a.attribute.as_str()),
                Target::Na => ("NA", "NA"),
                Target::Empty => ("", ""),
            };
            let rank = (i + 1).to_string();
            let unresolved = if row.unresolved { "1" } else { "0" };
            w.write_record([row.src_table.as_str(), &row.src_attr, &rank, tt, ta, unresolved])
                .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Reads the format written by [`write_predictions_csv`].
pub fn read_predictions_csv(text: &str) -> Result<Vec<RankedRow>, SchemaError> {
    let err = |message: String| SchemaError::Parse {
        origin: PREDICTIONS_FILE.into(),
        message,
    };
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut rows: Vec<RankedRow> = Vec::new();
    for (line, record) in r.records().enumerate() {
        let rec = record.map_err(|e| err(e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or("").to_string();
        let rank: usize = field(2)
            .parse()
            .map_err(|_| err(format!("bad rank on line {}", line + 2)))?;
        let target = match (field(3).as_str(), field(4).as_str()) {
            ("", "") => Target::Empty,
            ("NA", "NA") => Target::Na,
            (t, a) => Target::Attribute(AttrRef::new(t, a)),
        };
        let same = rows
            .last()
            .is_some_and(|r| r.src_table == field(0) && r.src_attr == field(1) && r.targets.len() + 1 == rank);
        if same {
            rows.last_mut().expect("checked").targets.push(target);
        } else if rank == 1 {
            rows.push(RankedRow {
                src_table: field(0),
                src_attr: field(1),
                targets: vec![target],
                unresolved: field(5) == "1",
            });
        } else {
            return Err(err(format!("rank {rank} out of sequence on line {}", line + 2)));
        }
    }
    Ok(rows)
}
