//! Per-table checkpoints so interrupted runs can resume.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{PipelineConfig, TableResult};
use crate::rank::RankedRow;
use crate::schema::Schema;

/// Everything produced for one source table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCheckpoint {
    pub result: TableResult,
    pub rows: Vec<RankedRow>,
}

/// Identifies a run by its inputs. Parallelism does not affect results and
/// is left out.
pub fn run_fingerprint(config: &PipelineConfig, source: &Schema, target: &Schema) -> String {
    let mut config = config.clone();
    config.parallelism = 0;
    let mut h = Sha256::new();
    for part in [
        serde_json::to_string(&config).expect("config serializes"),
        serde_json::to_string(source).expect("schema serializes"),
        serde_json::to_string(target).expect("schema serializes"),
    ] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    hex::encode(h.finalize())
}

pub struct CheckpointStore {
    dir: PathBuf,
}

impl CheckpointStore {
    pub fn new(root: &Path, fingerprint: &str) -> Self {
        Self {
            dir: root.join(fingerprint),
        }
    }

    fn path(&self, index: usize) -> PathBuf {
        self.dir.join(format!("table-{index:04}.json"))
    }

    /// A stored checkpoint, if present and readable. Torn or stale files are
    /// ignored and recomputed.
    pub fn load(&self, index: usize, table: &str) -> Option<TableCheckpoint> {
        let text = std::fs::read_to_string(self.path(index)).ok()?;
        let cp: TableCheckpoint = serde_json::from_str(&text).ok()?;
        (cp.result.source_table == table).then_some(cp)
    }

    /// Writes atomically via a temporary file and rename.
    pub fn save(&self, index: usize, cp: &TableCheckpoint) -> std::io::Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.path(index);
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_vec(cp).map_err(std::io::Error::other)?)?;
        std::fs::rename(tmp, path)
    }

    pub fn count(&self) -> usize {
        std::fs::read_dir(&self.dir)
            .map(|entries| {
                entries
                    .filter_map(Result::ok)
                    .filter(|e| e.file_name().to_string_lossy().ends_with(".json"))
                    .count()
            })
            .unwrap_or(0)
    }
}
