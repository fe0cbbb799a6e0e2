use std::future::Future;
use std::time::Duration;

use crate::client::{Client, ClientError};
use crate::exec::execute_job;
use crate::job::{Failure, JobView};

/// Polls the broker and runs claimed jobs one at a time.
#[derive(Debug, Clone)]
pub struct Worker {
    client: Client,
}

impl Worker {
    pub fn new(broker_url: impl Into<String>, token: impl Into<String>) -> Self {
        Self {
            client: Client::new(broker_url).with_token(token),
        }
    }

    pub fn client(&self) -> &Client {
        &self.client
    }

    /// Claims, executes and uploads at most one job. Returns the job's final
    /// status, or `None` when the queue was empty.
    pub async fn run_once(&self) -> Result<Option<JobView>, ClientError> {
        let Some(job) = self.client.poll().await? else {
            return Ok(None);
        };
        let request = job.request;
        let outcome = tokio::task::spawn_blocking(move || execute_job(&request))
            .await
            .unwrap_or_else(|e| {
                Err(Failure {
                    reason: "panic".into(),
                    message: e.to_string(),
                })
            });
        let view = match &outcome {
            Ok(bytes) => self.client.upload(&job.id, &job.claim_token, Ok(bytes)).await?,
            Err(f) => self.client.upload(&job.id, &job.claim_token, Err(f)).await?,
        };
        Ok(Some(view))
    }

    /// Works until `shutdown` resolves, sleeping `idle` whenever the queue
    /// is empty or the broker is unreachable.
    pub async fn run(&self, idle: Duration, shutdown: impl Future<Output = ()>) {
        tokio::pin!(shutdown);
        loop {
            let busy = matches!(self.run_once().await, Ok(Some(_)));
            if busy {
                continue;
            }
            tokio::select! {
                _ = &mut shutdown => return,
                _ = tokio::time::sleep(idle) => {}
            }
        }
    }
}
