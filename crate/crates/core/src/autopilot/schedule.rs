//! Fixed-rate job scheduling.
//!
//! A job is due once `now >= next_due`. Running it moves `next_due` to the
//! first slot of its original grid (`first_due + k * period`) strictly after
//! `now`, so late ticks never shift the grid and a long pause produces at most
//! one catch-up run.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{run_job, JobError, JobResult, JobSpec, JobValue};
use crate::clock::Millis;
use crate::rpc::SheetKey;
use crate::sheet::Sheet;
use crate::value::{ComputedValue, ErrorCode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledJob {
    pub spec: JobSpec,
    pub next_due: Millis,
    pub runs: u64,
    pub last_result: Option<JobResult>,
}

/// Where jobs read sheets from and deliver results to.
pub trait JobHost {
    /// A consistent snapshot of the live sheet, or `None` if it no longer exists.
    fn read_sheet(&self, key: &SheetKey) -> Option<Arc<Sheet>>;

    /// Stores a result row for `spec`.
    fn record(&mut self, spec: &JobSpec, result: &JobResult);
}

/// Serialized as a plain list of jobs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<ScheduledJob>", into = "Vec<ScheduledJob>")]
pub struct Scheduler {
    jobs: BTreeMap<(SheetKey, String), ScheduledJob>,
}

impl From<Vec<ScheduledJob>> for Scheduler {
    fn from(jobs: Vec<ScheduledJob>) -> Self {
        let jobs = jobs.into_iter().map(|j| ((j.spec.key.clone(), j.spec.id.clone()), j)).collect();
        Self { jobs }
    }
}

impl From<Scheduler> for Vec<ScheduledJob> {
    fn from(s: Scheduler) -> Self {
        s.jobs.into_values().collect()
    }
}

impl Scheduler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a job that first runs at `now`.
    pub fn schedule(&mut self, spec: JobSpec, now: Millis) -> Result<(), JobError> {
        spec.validate()?;
        let id = (spec.key.clone(), spec.id.clone());
        if self.jobs.contains_key(&id) {
            return Err(JobError::Exists(spec.id));
        }
        self.jobs.insert(id, ScheduledJob { spec, next_due: now, runs: 0, last_result: None });
        Ok(())
    }

    pub fn cancel(&mut self, key: &SheetKey, id: &str) -> Option<ScheduledJob> {
        self.jobs.remove(&(key.clone(), id.to_string()))
    }

    pub fn get(&self, key: &SheetKey, id: &str) -> Option<&ScheduledJob> {
        self.jobs.get(&(key.clone(), id.to_string()))
    }

    pub fn jobs(&self) -> impl Iterator<Item = &ScheduledJob> {
        self.jobs.values()
    }

    /// Points every job on `old` at `new` (used when an author is renamed).
    pub fn rekey(&mut self, old: &SheetKey, new: &SheetKey) {
        let moved: Vec<_> = self.jobs.keys().filter(|(k, _)| k == old).cloned().collect();
        for id in moved {
            let mut job = self.jobs.remove(&id).expect("listed above");
            job.spec.key = new.clone();
            self.jobs.insert((new.clone(), id.1), job);
        }
    }

    /// Removes every job on `key`.
    pub fn drop_sheet(&mut self, key: &SheetKey) {
        self.jobs.retain(|(k, _), _| k != key);
    }

    /// Claims the jobs due at `now` and advances their schedules.
    pub fn take_due(&mut self, now: Millis) -> Vec<JobSpec> {
        let mut due = Vec::new();
        for job in self.jobs.values_mut().filter(|j| now >= j.next_due) {
            let period = job.spec.period_ms;
            let missed = (now - job.next_due) / period;
            job.next_due += period * (missed + 1);
            job.runs += 1;
            due.push(job.spec.clone());
        }
        due
    }

    /// Remembers the latest result of a job, if it still exists.
    pub fn note_result(&mut self, key: &SheetKey, result: &JobResult) {
        if let Some(job) = self.jobs.get_mut(&(key.clone(), result.job_id.clone())) {
            job.last_result = Some(result.clone());
        }
    }

    /// Runs every due job against `host`. A job whose sheet is gone records
    /// a `#REF!` result and stays scheduled.
    pub fn run_due_jobs(&mut self, now: Millis, host: &mut dyn JobHost) -> Vec<JobResult> {
        let mut results = Vec::new();
        for spec in self.take_due(now) {
            let result = execute(&spec, now, host.read_sheet(&spec.key).as_deref());
            host.record(&spec, &result);
            self.note_result(&spec.key, &result);
            results.push(result);
        }
        results
    }
}

/// Computes one result for `spec` from an optional sheet snapshot.
pub fn execute(spec: &JobSpec, now: Millis, sheet: Option<&Sheet>) -> JobResult {
    let value = match sheet {
        Some(sheet) => run_job(sheet, spec.range, &spec.kind),
        None => JobValue::Value { value: ComputedValue::Err(ErrorCode::Ref) },
    };
    JobResult { job_id: spec.id.clone(), computed_at: now, value }
}
