use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use reqwest::{header, StatusCode};
use thiserror::Error;

use crate::broker::{Assignment, ErrorBody, SubmitResponse, Upload, UploadRequest};
use crate::job::{Failure, JobRequest, JobView};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Http(#[from] reqwest::Error),
    #[error("broker answered {status}: {}", body.message)]
    Api { status: u16, body: ErrorBody },
    #[error("unexpected response {0}")]
    Unexpected(u16),
}

/// A fetched result, or why there is none yet.
#[derive(Debug, Clone, PartialEq)]
pub enum Fetched {
    Ready(Vec<u8>),
    NotReady(JobView),
}

/// Talks to the broker on behalf of users and workers.
#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
    token: Option<String>,
}

async fn api_error(resp: reqwest::Response) -> ClientError {
    let status = resp.status().as_u16();
    match resp.json::<ErrorBody>().await {
        Ok(body) => ClientError::Api { status, body },
        Err(_) => ClientError::Unexpected(status),
    }
}

impl Client {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base: base_url.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
            token: None,
        }
    }

    pub fn with_token(mut self, token: impl Into<String>) -> Self {
        self.token = Some(token.into());
        self
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    fn authed(&self, rb: reqwest::RequestBuilder) -> reqwest::RequestBuilder {
        match &self.token {
            Some(t) => rb.bearer_auth(t),
            None => rb,
        }
    }

    pub async fn submit(&self, request: &JobRequest) -> Result<SubmitResponse, ClientError> {
        self.submit_raw(serde_json::to_vec(request).expect("requests serialize")).await
    }

    /// Submits an already encoded request document.
    pub async fn submit_raw(&self, body: Vec<u8>) -> Result<SubmitResponse, ClientError> {
        let resp = self
            .http
            .post(self.url("/jobs"))
            .header(header::CONTENT_TYPE, "application/json")
            .body(body)
            .send()
            .await?;
        if resp.status().is_success() {
            Ok(resp.json().await?)
        } else {
            Err(api_error(resp).await)
        }
    }

    pub async fn status(&self, id: &str) -> Result<JobView, ClientError> {
        let resp = self.http.get(self.url(&format!("/jobs/{id}"))).send().await?;
        if resp.status().is_success() {
            Ok(resp.json().await?)
        } else {
            Err(api_error(resp).await)
        }
    }

    /// Raw result bytes of a done job.
    pub async fn fetch(&self, id: &str) -> Result<Fetched, ClientError> {
        let resp = self
            .http
            .get(self.url(&format!("/jobs/{id}/result")))
            .header(header::ACCEPT, "application/octet-stream, text/csv")
            .send()
            .await?;
        match resp.status() {
            StatusCode::OK => Ok(Fetched::Ready(resp.bytes().await?.to_vec())),
            StatusCode::CONFLICT => Ok(Fetched::NotReady(self.status(id).await?)),
            _ => Err(api_error(resp).await),
        }
    }

    /// Claims the next job, if any.
    pub async fn poll(&self) -> Result<Option<Assignment>, ClientError> {
        let resp = self.authed(self.http.post(self.url("/worker/poll"))).send().await?;
        match resp.status() {
            StatusCode::OK => Ok(Some(resp.json().await?)),
            StatusCode::NO_CONTENT => Ok(None),
            _ => Err(api_error(resp).await),
        }
    }

    pub async fn upload(&self, id: &str, claim_token: &str, outcome: Result<&[u8], &Failure>) -> Result<JobView, ClientError> {
        let outcome = match outcome {
            Ok(bytes) => Upload::Done { data: B64.encode(bytes) },
            Err(f) => Upload::Failed {
                reason: f.reason.clone(),
                message: f.message.clone(),
            },
        };
        let body = UploadRequest {
            claim_token: claim_token.to_string(),
            outcome,
        };
        let resp = self
            .authed(self.http.post(self.url(&format!("/worker/result/{id}"))))
            .json(&body)
            .send()
            .await?;
        if resp.status().is_success() {
            Ok(resp.json().await?)
        } else {
            Err(api_error(resp).await)
        }
    }
}
