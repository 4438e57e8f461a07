//! Directory-per-project persistence.
//!
//! ```text
//! <root>/projects/<project>/
//!     project.json      ProjectMeta
//!     source.json       Schema
//!     target.json       Schema
//!     truth.csv         optional, SRC_ENT,SRC_ATT,TGT_ENT,TGT_ATT
//!     guidance.csv      same four-column format
//!     checkpoints/      per-table checkpoints, keyed by run fingerprint
//!     runs/<job>/job.json, manifest.json, predictions.csv
//! ```

use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rematch_core::pipeline::{RunManifest, MANIFEST_FILE};
use rematch_core::schema::{GroundTruth, MatchPair, Schema, SchemaError};

use crate::jobs::JobRecord;

const PROJECT_FILE: &str = "project.json";
const SOURCE_FILE: &str = "source.json";
const TARGET_FILE: &str = "target.json";
const TRUTH_FILE: &str = "truth.csv";
const GUIDANCE_FILE: &str = "guidance.csv";
const JOB_FILE: &str = "job.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("corrupt file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectMeta {
    pub id: String,
    pub name: String,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Project {
    pub meta: ProjectMeta,
    pub source: Schema,
    pub target: Schema,
    pub truth: Option<GroundTruth>,
    pub guidance: Vec<MatchPair>,
}

/// Ids are generated by the service; anything else is rejected before it
/// can reach the filesystem.
pub fn is_valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
}

pub fn new_id() -> String {
    uuid::Uuid::new_v4().to_string()
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let projects = root.join("projects");
        std::fs::create_dir_all(&projects).map_err(io_at(&projects))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn project_dir(&self, id: &str) -> PathBuf {
        self.root.join("projects").join(id)
    }

    pub fn checkpoint_dir(&self, project: &str) -> PathBuf {
        self.project_dir(project).join("checkpoints")
    }

    pub fn run_dir(&self, project: &str, job: &str) -> PathBuf {
        self.project_dir(project).join("runs").join(job)
    }

    pub fn create_project(
        &self,
        name: &str,
        source: &Schema,
        target: &Schema,
        truth: Option<&GroundTruth>,
    ) -> Result<ProjectMeta, StoreError> {
        let meta = ProjectMeta {
            id: new_id(),
            name: name.to_string(),
            created_at: chrono::Utc::now().to_rfc3339(),
        };
        let dir = self.project_dir(&meta.id);
        std::fs::create_dir_all(dir.join("runs")).map_err(io_at(&dir))?;
        write_atomic(&dir.join(SOURCE_FILE), &source.to_json_string())?;
        write_atomic(&dir.join(TARGET_FILE), &target.to_json_string())?;
        if let Some(truth) = truth {
            write_atomic(&dir.join(TRUTH_FILE), &truth.to_csv_string())?;
        }
        self.save_guidance(&meta.id, &[])?;
        // Written last: a directory without it is an aborted create.
        write_atomic(&dir.join(PROJECT_FILE), &to_json(&meta))?;
        Ok(meta)
    }

    pub fn project_ids(&self) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join("projects");
        let mut ids = Vec::new();
        for entry in std::fs::read_dir(&dir).map_err(io_at(&dir))? {
            let entry = entry.map_err(io_at(&dir))?;
            let id = entry.file_name().to_string_lossy().into_owned();
            if is_valid_id(&id) && entry.path().join(PROJECT_FILE).is_file() {
                ids.push(id);
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn load_meta(&self, id: &str) -> Result<Option<ProjectMeta>, StoreError> {
        if !is_valid_id(id) {
            return Ok(None);
        }
        read_json_opt(&self.project_dir(id).join(PROJECT_FILE))
    }

    pub fn load_project(&self, id: &str) -> Result<Option<Project>, StoreError> {
        let Some(meta) = self.load_meta(id)? else {
            return Ok(None);
        };
        let dir = self.project_dir(id);
        let source = rematch_core::schema::load_schema(dir.join(SOURCE_FILE))?;
        let target = rematch_core::schema::load_schema(dir.join(TARGET_FILE))?;
        let truth_path = dir.join(TRUTH_FILE);
        let truth = if truth_path.is_file() {
            Some(rematch_core::schema::load_ground_truth(&truth_path)?)
        } else {
            None
        };
        let guidance = rematch_core::schema::load_ground_truth(dir.join(GUIDANCE_FILE))?.pairs;
        Ok(Some(Project {
            meta,
            source,
            target,
            truth,
            guidance,
        }))
    }

    pub fn save_guidance(&self, project: &str, pairs: &[MatchPair]) -> Result<(), StoreError> {
        let csv = GroundTruth::new(pairs.to_vec()).to_csv_string();
        write_atomic(&self.project_dir(project).join(GUIDANCE_FILE), &csv)
    }

    pub fn save_job(&self, job: &JobRecord) -> Result<(), StoreError> {
        let dir = self.run_dir(&job.project_id, &job.id);
        std::fs::create_dir_all(&dir).map_err(io_at(&dir))?;
        write_atomic(&dir.join(JOB_FILE), &to_json(job))
    }

    /// Every job of every project, in no particular order.
    pub fn load_jobs(&self) -> Result<Vec<JobRecord>, StoreError> {
        let mut jobs = Vec::new();
        for project in self.project_ids()? {
            let runs = self.project_dir(&project).join("runs");
            let Ok(entries) = std::fs::read_dir(&runs) else {
                continue;
            };
            for entry in entries {
                let entry = entry.map_err(io_at(&runs))?;
                if let Some(job) = read_json_opt::<JobRecord>(&entry.path().join(JOB_FILE))? {
                    jobs.push(job);
                }
            }
        }
        Ok(jobs)
    }

    pub fn save_manifest(&self, job: &JobRecord, manifest: &RunManifest) -> Result<(), StoreError> {
        let dir = self.run_dir(&job.project_id, &job.id);
        manifest.write_to_dir(&dir).map_err(io_at(&dir))
    }

    pub fn load_manifest(&self, job: &JobRecord) -> Result<Option<RunManifest>, StoreError> {
        let dir = self.run_dir(&job.project_id, &job.id);
        if !dir.join(MANIFEST_FILE).is_file() {
            return Ok(None);
        }
        Ok(Some(RunManifest::load(&dir)?))
    }
}

/// Pretty JSON with a trailing newline, the format of every JSON file and
/// response body.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

fn write_atomic(path: &Path, text: &str) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text).map_err(io_at(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_at(path))
}

fn read_json_opt<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Option<T>, StoreError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io_at(path)(e)),
    };
    serde_json::from_str(&text).map(Some).map_err(|e| StoreError::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
