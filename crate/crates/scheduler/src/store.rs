//! Durable job store.
//!
//! Every mutation appends the full new state of the touched job to
//! `jobs.log` as one JSON line and syncs it before the call returns;
//! replaying the log keeps the last state per id. Result payloads live in
//! `results/`, written to a temporary name, synced and renamed before the
//! job is marked done. [`JobStore::compact`] rewrites the log with one line
//! per job.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use thiserror::Error;
use uuid::Uuid;

use crate::job::{Claim, Failure, Job, JobRequest, JobStatus, ResultRef};

const LOG_FILE: &str = "jobs.log";
const RESULTS_DIR: &str = "results";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no job with id {0}")]
    NotFound(String),
    #[error("job {id} is {status:?}")]
    WrongState { id: String, status: JobStatus },
    #[error("claim token does not match the current lease of job {0}")]
    StaleClaim(String),
    #[error("corrupt log line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Milliseconds since the Unix epoch.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        Self(AtomicU64::new(start_ms))
    }

    pub fn advance_ms(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

/// How a worker finished a job.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Done(Vec<u8>),
    Failed(Failure),
}

/// Result of [`JobStore::submit`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Submitted {
    pub id: String,
    /// False when an earlier submission with the same idempotency key won.
    pub created: bool,
}

pub struct JobStore {
    dir: PathBuf,
    log: File,
    clock: Arc<dyn Clock>,
    lease_ms: u64,
    jobs: HashMap<String, Job>,
    by_key: HashMap<String, String>,
    /// Queued jobs by submission order.
    queue: BTreeMap<u64, String>,
    next_seq: u64,
    appended: usize,
}

impl std::fmt::Debug for JobStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JobStore")
            .field("dir", &self.dir)
            .field("jobs", &self.jobs.len())
            .field("queued", &self.queue.len())
            .finish()
    }
}

impl JobStore {
    /// Opens or creates a store in `dir` and replays its log.
    pub fn open(dir: impl AsRef<Path>, lease_ms: u64, clock: Arc<dyn Clock>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(dir.join(RESULTS_DIR))?;
        let path = dir.join(LOG_FILE);
        let mut jobs: HashMap<String, Job> = HashMap::new();
        if path.exists() {
            let text = fs::read(&path)?;
            let mut good = 0;
            let mut offset = 0;
            let mut line_no = 0;
            while offset < text.len() {
                line_no += 1;
                let end = text[offset..].iter().position(|&b| b == b'\n').map(|p| offset + p);
                let line = &text[offset..end.unwrap_or(text.len())];
                let parsed = serde_json::from_slice::<Job>(line);
                match (parsed, end) {
                    (Ok(job), Some(e)) => {
                        jobs.insert(job.id.clone(), job);
                        offset = e + 1;
                        good = offset;
                    }
                    _ if line.iter().all(u8::is_ascii_whitespace) && end.is_some() => {
                        offset = end.unwrap_or(text.len()) + 1;
                        good = offset;
                    }
                    // A final line without its newline is a torn append that
                    // was never acknowledged.
                    (_, None) => break,
                    (Err(e), Some(_)) => {
                        return Err(StoreError::Corrupt {
                            line: line_no,
                            message: e.to_string(),
                        })
                    }
                }
            }
            if good < text.len() {
                OpenOptions::new().write(true).open(&path)?.set_len(good as u64)?;
            }
        }
        let log = OpenOptions::new().create(true).append(true).open(&path)?;
        let mut store = Self {
            dir,
            log,
            clock,
            lease_ms,
            jobs: HashMap::new(),
            by_key: HashMap::new(),
            queue: BTreeMap::new(),
            next_seq: 0,
            appended: 0,
        };
        for job in jobs.into_values() {
            store.index(&job);
            store.jobs.insert(job.id.clone(), job);
        }
        Ok(store)
    }

    fn index(&mut self, job: &Job) {
        if let Some(k) = &job.request.idempotency_key {
            self.by_key.insert(k.clone(), job.id.clone());
        }
        if job.status == JobStatus::Queued {
            self.queue.insert(job.seq, job.id.clone());
        } else {
            self.queue.remove(&job.seq);
        }
        self.next_seq = self.next_seq.max(job.seq + 1);
    }

    fn persist(&mut self, job: Job) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(&job).expect("jobs serialize");
        line.push(b'\n');
        self.log.write_all(&line)?;
        self.log.sync_data()?;
        self.appended += 1;
        self.index(&job);
        self.jobs.insert(job.id.clone(), job);
        Ok(())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn lease_ms(&self) -> u64 {
        self.lease_ms
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    /// Log lines written since the store was opened or last compacted.
    pub fn appended_since_compaction(&self) -> usize {
        self.appended
    }

    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Job> {
        self.jobs.get(id)
    }

    /// Ids of queued jobs in dispatch order.
    pub fn queued(&self) -> Vec<String> {
        self.queue.values().cloned().collect()
    }

    pub fn submit(&mut self, request: JobRequest) -> Result<Submitted, StoreError> {
        if let Some(id) = request.idempotency_key.as_ref().and_then(|k| self.by_key.get(k)) {
            return Ok(Submitted {
                id: id.clone(),
                created: false,
            });
        }
        let id = Uuid::new_v4().simple().to_string();
        let job = Job {
            id: id.clone(),
            seq: self.next_seq,
            request,
            status: JobStatus::Queued,
            submitted_at_ms: self.clock.now_ms(),
            started_at_ms: None,
            finished_at_ms: None,
            attempts: 0,
            claim: None,
            result: None,
            failure: None,
        };
        self.persist(job)?;
        Ok(Submitted { id, created: true })
    }

    /// Returns running jobs whose lease has run out to the queue.
    pub fn requeue_expired(&mut self) -> Result<Vec<String>, StoreError> {
        let now = self.clock.now_ms();
        let mut expired: Vec<&Job> = self
            .jobs
            .values()
            .filter(|j| j.status == JobStatus::Running && j.claim.as_ref().is_some_and(|c| c.expires_at_ms <= now))
            .collect();
        expired.sort_by_key(|j| j.seq);
        let expired: Vec<Job> = expired.into_iter().cloned().collect();
        let mut ids = Vec::with_capacity(expired.len());
        for mut job in expired {
            job.status = JobStatus::Queued;
            job.claim = None;
            job.started_at_ms = None;
            ids.push(job.id.clone());
            self.persist(job)?;
        }
        Ok(ids)
    }

    /// Atomically moves the oldest queued job to running under a fresh lease.
    pub fn claim_next(&mut self) -> Result<Option<Job>, StoreError> {
        self.requeue_expired()?;
        let Some(id) = self.queue.values().next().cloned() else {
            return Ok(None);
        };
        let now = self.clock.now_ms();
        let mut job = self.jobs[&id].clone();
        job.status = JobStatus::Running;
        job.started_at_ms = Some(now);
        job.attempts += 1;
        job.claim = Some(Claim {
            token: Uuid::new_v4().simple().to_string(),
            expires_at_ms: now + self.lease_ms,
        });
        self.persist(job.clone())?;
        Ok(Some(job))
    }

    /// Records the outcome of a claimed job. Only the holder of the current
    /// lease may complete it, and only once.
    pub fn complete(&mut self, id: &str, token: &str, outcome: Outcome) -> Result<&Job, StoreError> {
        self.requeue_expired()?;
        let job = self.jobs.get(id).ok_or_else(|| StoreError::NotFound(id.to_string()))?;
        let current = job.claim.as_ref().map(|c| c.token.as_str());
        if job.status != JobStatus::Running || current != Some(token) {
            return Err(StoreError::StaleClaim(id.to_string()));
        }
        let mut job = job.clone();
        job.claim = None;
        job.finished_at_ms = Some(self.clock.now_ms());
        match outcome {
            Outcome::Done(bytes) => {
                let file = format!("{id}.bin");
                self.write_result(&file, &bytes)?;
                job.status = JobStatus::Done;
                job.result = Some(ResultRef {
                    file,
                    len: bytes.len() as u64,
                    format: job.request.format,
                });
            }
            Outcome::Failed(f) => {
                job.status = JobStatus::Failed;
                job.failure = Some(f);
            }
        }
        self.persist(job)?;
        Ok(&self.jobs[id])
    }

    fn write_result(&self, file: &str, bytes: &[u8]) -> Result<(), StoreError> {
        let dir = self.dir.join(RESULTS_DIR);
        let tmp = dir.join(format!("{file}.tmp"));
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, dir.join(file))?;
        File::open(&dir)?.sync_all()?;
        Ok(())
    }

    /// Result bytes of a done job.
    pub fn result(&self, id: &str) -> Result<Vec<u8>, StoreError> {
        let job = self.jobs.get(id).ok_or_else(|| StoreError::NotFound(id.to_string()))?;
        match (&job.status, &job.result) {
            (JobStatus::Done, Some(r)) => Ok(fs::read(self.dir.join(RESULTS_DIR).join(&r.file))?),
            _ => Err(StoreError::WrongState {
                id: id.to_string(),
                status: job.status,
            }),
        }
    }

    /// Rewrites the log with the current state of every job.
    pub fn compact(&mut self) -> Result<(), StoreError> {
        let tmp = self.dir.join(format!("{LOG_FILE}.tmp"));
        {
            let mut f = File::create(&tmp)?;
            let mut jobs: Vec<&Job> = self.jobs.values().collect();
            jobs.sort_by_key(|j| j.seq);
            for j in jobs {
                let mut line = serde_json::to_vec(j).expect("jobs serialize");
                line.push(b'\n');
                f.write_all(&line)?;
            }
            f.sync_all()?;
        }
        let path = self.dir.join(LOG_FILE);
        fs::rename(&tmp, &path)?;
        File::open(&self.dir)?.sync_all()?;
        self.log = OpenOptions::new().append(true).open(&path)?;
        self.appended = 0;
        Ok(())
    }
}
