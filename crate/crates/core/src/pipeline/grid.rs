//! Grid search over retrieval depth J and ranking depth K.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{run_rematch, Backends, PipelineConfig, RunOptions};
use crate::scalar::Real;
use crate::schema::{GroundTruth, Schema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    /// `None` means retrieval off.
    pub j: Option<usize>,
    pub k: usize,
    pub accuracy: Option<f64>,
    pub avg_candidate_tables: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub j_values: Vec<Option<usize>>,
    pub k_values: Vec<usize>,
    /// Row-major: every K for the first J, then the next J.
    pub cells: Vec<GridCell>,
}

fn j_label(j: Option<usize>) -> String {
    j.map_or_else(|| "inf".to_string(), |j| j.to_string())
}

impl GridReport {
    pub fn cell(&self, j: Option<usize>, k: usize) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.j == j && c.k == k)
    }

    /// Avg #T for a row: taken from the first cell of that J that ran.
    pub fn avg_candidate_tables(&self, j: Option<usize>) -> Option<f64> {
        self.cells
            .iter()
            .filter(|c| c.j == j)
            .find_map(|c| c.avg_candidate_tables)
    }

    /// Plain-text table: one row per J, one accuracy column per K, then
    /// Avg #T. Failed cells print `ERR`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:>6}", "J");
        for k in &self.k_values {
            let _ = write!(out, "{:>9}", format!("Acc@{k}"));
        }
        let _ = writeln!(out, "{:>9}", "Avg #T");
        for &j in &self.j_values {
            let _ = write!(out, "{:>6}", j_label(j));
            for &k in &self.k_values {
                let cell = self.cell(j, k).and_then(|c| c.accuracy);
                match cell {
                    Some(a) => {
                        let _ = write!(out, "{a:>9.4}");
                    }
                    None => {
                        let _ = write!(out, "{:>9}", "ERR");
                    }
                }
            }
            match self.avg_candidate_tables(j) {
                Some(t) => {
                    let _ = writeln!(out, "{t:>9.2}");
                }
                None => {
                    let _ = writeln!(out, "{:>9}", "ERR");
                }
            }
        }
        let errors: Vec<&GridCell> = self.cells.iter().filter(|c| c.error.is_some()).collect();
        for c in errors {
            let _ = writeln!(
                out,
                "J={} K={}: {}",
                j_label(c.j),
                c.k,
                c.error.as_deref().unwrap_or_default()
            );
        }
        out
    }
}

/// Runs one pipeline per (J, K) and scores it with accuracy@K. Cells are
/// independent: a failing cell records its error and the grid goes on.
/// Embeddings are shared across cells through the backends' embedder.
pub fn grid_search<F: Real>(
    source: &Schema,
    target: &Schema,
    truth: &GroundTruth,
    j_values: &[Option<usize>],
    k_values: &[usize],
    template: &PipelineConfig,
    backends: &Backends<F>,
) -> GridReport {
    let mut cells = Vec::with_capacity(j_values.len() * k_values.len());
    for &j in j_values {
        for &k in k_values {
            let config = PipelineConfig {
                top_j: j,
                top_k: k,
                ..template.clone()
            };
            let result = run_rematch(source, target, &config, backends, &RunOptions::default())
                .map_err(|e| e.to_string())
                .and_then(|out| {
                    let acc = out.matrix.accuracy_at_k::<f64>(truth, k).map_err(|e| e.to_string())?;
                    Ok((acc, out.matrix.avg_candidate_tables::<f64>()))
                });
            cells.push(match result {
                Ok((acc, avg)) => GridCell {
                    j,
                    k,
                    accuracy: Some(acc),
                    avg_candidate_tables: Some(avg),
                    error: None,
                },
                Err(e) => GridCell {
                    j,
                    k,
                    accuracy: None,
                    avg_candidate_tables: None,
                    error: Some(e),
                },
            });
        }
    }
    GridReport {
        j_values: j_values.to_vec(),
        k_values: k_values.to_vec(),
        cells,
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::embed::{Embedder, HashTrigramEmbedder};
    use crate::rank::LocalOracleRanker;
    use crate::schema::MatchPair;

    #[test]
    fn cells_are_independent_and_rendered() {
        let s = Schema::from_json_str(include_str!("../../fixtures/admissions_source.json"), "s").unwrap();
        let t = Schema::from_json_str(include_str!("../../fixtures/admissions_target.json"), "t").unwrap();
        let truth = GroundTruth::new(vec![
            MatchPair::mapped("ADMISSIONS", "SUBJECT_ID", "PERSON", "person_id"),
            MatchPair::mapped("ADMISSIONS", "HADM_ID", "VISIT_OCCURRENCE", "visit_occurrence_id"),
            MatchPair::null("ADMISSIONS", "ADMITTIME"),
        ]);
        let e: Arc<dyn Embedder<f64>> = Arc::new(HashTrigramEmbedder::new(256));
        let backends = Backends::new(e.clone(), Arc::new(LocalOracleRanker::new(e)));
        let report = grid_search(
            &s,
            &t,
            &truth,
            &[Some(1), Some(0), None],
            &[1, 2],
            &PipelineConfig::default(),
            &backends,
        );
        assert_eq!(report.cells.len(), 6);
        assert!(report.cell(Some(0), 1).unwrap().error.is_some());
        assert!(report.cell(Some(1), 2).unwrap().accuracy.is_some());
        assert_eq!(report.avg_candidate_tables(None), Some(3.0));
        let text = report.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].contains("Acc@1") && lines[0].contains("Acc@2") && lines[0].ends_with("Avg #T"));
        assert!(lines[2].contains("ERR"));
        assert!(lines[3].trim_start().starts_with("inf"));
        let back: GridReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
        assert_eq!(back, report);
    }
}
