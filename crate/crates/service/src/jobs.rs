//! Background matching jobs.
//!
//! A job runs one pipeline over a project's schemas on a blocking worker
//! thread. Every finished source table is checkpointed, so a job that
//! fails or is interrupted by a restart ends up `partial` and can be
//! resumed without recomputing those tables.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rematch_core::pipeline::{run_fingerprint, Backends, CheckpointStore, PipelineConfig, PipelineError, RunManifest};
use rematch_core::{run_rematch, RunOptions};

use crate::store::{new_id, Project, Store, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JobState {
    Queued,
    Running,
    Partial,
    Done,
    Failed,
}

impl JobState {
    /// Legal transitions: queued -> running -> {partial, done, failed},
    /// partial -> running on resume, and queued -> partial when a restart
    /// finds the job never started.
    pub fn can_move_to(self, next: JobState) -> bool {
        use JobState::*;
        matches!(
            (self, next),
            (Queued, Running) | (Queued, Partial) | (Running, Partial | Done | Failed) | (Partial, Running)
        )
    }

    pub fn is_active(self) -> bool {
        matches!(self, JobState::Queued | JobState::Running)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub project_id: String,
    pub state: JobState,
    pub config: PipelineConfig,
    /// Fingerprint of config and schemas; names the checkpoint directory.
    pub resume_token: String,
    pub created_at: String,
    pub updated_at: String,
    pub total_tables: usize,
    pub completed_tables: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Error)]
pub enum JobError {
    #[error("job {0} not found")]
    NotFound(String),
    #[error("project {project} already has {active} active job(s)")]
    Busy { project: String, active: usize },
    #[error("job {id} is {state:?} and cannot be resumed")]
    NotResumable { id: String, state: JobState },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Builds the backends for a job's configuration.
pub type BackendFactory = Arc<dyn Fn(&PipelineConfig) -> Result<Backends<f64>, PipelineError> + Send + Sync>;

pub fn default_backend_factory() -> BackendFactory {
    Arc::new(|config: &PipelineConfig| Backends::from_config(config))
}

pub struct JobManager {
    store: Store,
    records: Mutex<HashMap<String, JobRecord>>,
    factory: BackendFactory,
    max_active_per_project: usize,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

impl JobManager {
    /// Loads persisted jobs. Jobs that were queued or running when the
    /// previous process stopped become `partial`.
    pub fn open(store: Store, factory: BackendFactory, max_active_per_project: usize) -> Result<Self, StoreError> {
        let mut records = HashMap::new();
        for mut job in store.load_jobs()? {
            if job.state.is_active() {
                let checkpoints = CheckpointStore::new(&store.checkpoint_dir(&job.project_id), &job.resume_token);
                job.state = JobState::Partial;
                job.completed_tables = checkpoints.count().min(job.total_tables);
                job.error = Some("interrupted: the service stopped while the job was active".into());
                job.updated_at = now();
                store.save_job(&job)?;
                tracing::info!(job = %job.id, "marked interrupted job as partial");
            }
            records.insert(job.id.clone(), job);
        }
        Ok(Self {
            store,
            records: Mutex::new(records),
            factory,
            max_active_per_project: max_active_per_project.max(1),
        })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    /// A job with its progress refreshed from the checkpoint directory.
    pub fn get(&self, id: &str) -> Option<JobRecord> {
        let mut job = self.records.lock().expect("job lock").get(id).cloned()?;
        if job.state == JobState::Running {
            let store = CheckpointStore::new(&self.store.checkpoint_dir(&job.project_id), &job.resume_token);
            job.completed_tables = store.count().min(job.total_tables);
        }
        Some(job)
    }

    /// Jobs of a project, oldest first.
    pub fn for_project(&self, project: &str) -> Vec<JobRecord> {
        let mut jobs: Vec<JobRecord> = self
            .records
            .lock()
            .expect("job lock")
            .values()
            .filter(|j| j.project_id == project)
            .cloned()
            .collect();
        jobs.sort_by(|a, b| a.created_at.cmp(&b.created_at).then(a.id.cmp(&b.id)));
        jobs
    }

    fn check_capacity(&self, records: &HashMap<String, JobRecord>, project: &str) -> Result<(), JobError> {
        let active = records
            .values()
            .filter(|j| j.project_id == project && j.state.is_active())
            .count();
        if active >= self.max_active_per_project {
            return Err(JobError::Busy {
                project: project.to_string(),
                active,
            });
        }
        Ok(())
    }

    /// Queues a run and starts it on a blocking worker.
    pub fn submit(self: &Arc<Self>, project: &Project, config: PipelineConfig) -> Result<JobRecord, JobError> {
        let job = {
            let mut records = self.records.lock().expect("job lock");
            self.check_capacity(&records, &project.meta.id)?;
            let stamp = now();
            let job = JobRecord {
                id: new_id(),
                project_id: project.meta.id.clone(),
                state: JobState::Queued,
                resume_token: run_fingerprint(&config, &project.source, &project.target),
                config,
                created_at: stamp.clone(),
                updated_at: stamp,
                total_tables: project.source.tables.len(),
                completed_tables: 0,
                error: None,
            };
            self.store.save_job(&job)?;
            records.insert(job.id.clone(), job.clone());
            job
        };
        self.spawn(job.id.clone());
        Ok(job)
    }

    /// Restarts a partial job; finished tables are loaded from checkpoints.
    pub fn resume(self: &Arc<Self>, id: &str) -> Result<JobRecord, JobError> {
        let job = {
            let mut records = self.records.lock().expect("job lock");
            let job = records
                .get(id)
                .cloned()
                .ok_or_else(|| JobError::NotFound(id.to_string()))?;
            if job.state != JobState::Partial {
                return Err(JobError::NotResumable {
                    id: id.to_string(),
                    state: job.state,
                });
            }
            self.check_capacity(&records, &job.project_id)?;
            let job = JobRecord {
                state: JobState::Running,
                error: None,
                updated_at: now(),
                ..job
            };
            self.store.save_job(&job)?;
            records.insert(job.id.clone(), job.clone());
            job
        };
        self.spawn(job.id.clone());
        Ok(job)
    }

    fn spawn(self: &Arc<Self>, id: String) {
        let me = Arc::clone(self);
        tokio::task::spawn_blocking(move || me.execute(&id));
    }

    fn transition(&self, id: &str, update: impl FnOnce(&mut JobRecord)) -> Option<JobRecord> {
        let mut records = self.records.lock().expect("job lock");
        let job = records.get_mut(id)?;
        let before = job.state;
        update(job);
        debug_assert!(
            before == job.state || before.can_move_to(job.state),
            "illegal job transition {before:?} -> {:?}",
            job.state
        );
        job.updated_at = now();
        if let Err(e) = self.store.save_job(job) {
            tracing::error!(job = id, "cannot persist job state: {e}");
        }
        Some(job.clone())
    }

    fn execute(&self, id: &str) {
        let Some(job) = self.transition(id, |j| j.state = JobState::Running) else {
            return;
        };
        let outcome = self.run(&job);
        self.transition(id, |j| match outcome {
            Ok(()) => {
                j.state = JobState::Done;
                j.completed_tables = j.total_tables;
                j.error = None;
            }
            Err(PipelineError::Partial {
                completed,
                total,
                cause,
                ..
            }) => {
                j.state = JobState::Partial;
                j.completed_tables = completed;
                j.total_tables = total;
                j.error = Some(cause);
            }
            Err(e) => {
                j.state = JobState::Failed;
                j.error = Some(e.to_string());
            }
        });
    }

    fn run(&self, job: &JobRecord) -> Result<(), PipelineError> {
        let project = self
            .store
            .load_project(&job.project_id)
            .map_err(|e| PipelineError::Backend(e.to_string()))?
            .ok_or_else(|| PipelineError::Backend(format!("project {} disappeared", job.project_id)))?;
        let backends = (self.factory)(&job.config)?;
        let options = RunOptions {
            checkpoint_dir: Some(self.store.checkpoint_dir(&job.project_id)),
        };
        let outcome = run_rematch(&project.source, &project.target, &job.config, &backends, &options)?;
        self.store
            .save_manifest(job, &RunManifest::new(&outcome))
            .map_err(|e| PipelineError::Backend(e.to_string()))
    }
}
