//! Broker/worker job service for the RFSoC twin.
//!
//! Users submit [`job::JobRequest`]s to the [`broker`], which keeps them in
//! a durable [`store::JobStore`]. A [`worker::Worker`] polls the broker,
//! runs each job against the device models with [`exec::execute_job`] and
//! uploads the captures. Users and workers only ever talk to the broker.

pub mod broker;
pub mod client;
pub mod config;
pub mod exec;
pub mod job;
pub mod store;
pub mod worker;

pub use broker::{router, serve, Broker};
pub use client::{Client, ClientError, Fetched};
pub use config::{BrokerConfig, ServiceConfig, WorkerConfig};
pub use job::{JobRequest, JobStatus, ResultFormat};
pub use store::{Clock, JobStore, ManualClock, SystemClock};
pub use worker::Worker;
