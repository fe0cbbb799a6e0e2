use std::io::{Read, Write};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use clap::Args;
use rfsoc_twin_scheduler::{Broker, Client, Fetched, JobStatus, JobStore, ResultFormat, SystemClock, Worker};
use serde::Serialize;
use serde_json::json;

use super::Ctx;
use crate::manifest::Run;

fn runtime() -> anyhow::Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut term = signal(SignalKind::terminate()).expect("installing SIGTERM handler");
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ServeArgs {
    /// Address to bind, overriding the config.
    #[arg(long)]
    pub listen: Option<String>,
    /// Store directory, overriding the config.
    #[arg(long)]
    pub store: Option<PathBuf>,
}

pub fn serve(ctx: &Ctx, a: ServeArgs) -> anyhow::Result<()> {
    let mut cfg = ctx.config.broker.clone();
    if let Some(l) = a.listen {
        cfg.listen = l;
    }
    if let Some(s) = a.store {
        cfg.store_dir = s;
    }
    let store = JobStore::open(&cfg.store_dir, cfg.lease_s * 1000, Arc::new(SystemClock))
        .with_context(|| format!("opening store {}", cfg.store_dir.display()))?;
    let broker = Broker::new(store, cfg.worker_token.clone(), cfg.compact_every);
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&cfg.listen)
            .await
            .with_context(|| format!("binding {}", cfg.listen))?;
        let addr = listener.local_addr()?;
        println!("listening on http://{addr}");
        std::io::stdout().flush()?;
        rfsoc_twin_scheduler::serve(listener, broker, shutdown_signal()).await?;
        Ok(())
    })
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WorkArgs {
    #[arg(long)]
    pub broker: Option<String>,
    /// Process at most one job, then exit.
    #[arg(long)]
    pub once: bool,
}

pub fn work(ctx: &Ctx, a: WorkArgs) -> anyhow::Result<()> {
    let cfg = &ctx.config.worker;
    let url = a.broker.unwrap_or_else(|| cfg.broker_url.clone());
    let worker = Worker::new(url.clone(), cfg.worker_token.clone());
    let idle = Duration::from_millis(cfg.poll_interval_ms);
    runtime()?.block_on(async move {
        if a.once {
            match worker.run_once().await? {
                Some(v) => println!("{} {:?}", v.id, v.status),
                None => println!("queue empty"),
            }
        } else {
            println!("working for {url}");
            std::io::stdout().flush()?;
            worker.run(idle, shutdown_signal()).await;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SubmitArgs {
    /// Job document (JSON); `-` reads standard input.
    pub job: PathBuf,
    #[arg(long)]
    pub broker: Option<String>,
}

pub fn submit(ctx: &Ctx, a: SubmitArgs) -> anyhow::Result<()> {
    let body = if a.job.as_os_str() == "-" {
        let mut v = Vec::new();
        std::io::stdin().read_to_end(&mut v)?;
        v
    } else {
        std::fs::read(&a.job).with_context(|| format!("reading {}", a.job.display()))?
    };
    let url = a.broker.unwrap_or_else(|| ctx.config.worker.broker_url.clone());
    let resp = runtime()?.block_on(Client::new(url).submit_raw(body))?;
    println!("{}", serde_json::to_string(&resp)?);
    Ok(())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FetchArgs {
    pub id: String,
    #[arg(long)]
    pub broker: Option<String>,
    /// Keep polling until the job finishes.
    #[arg(long)]
    pub wait: bool,
    /// Give up waiting after this many seconds.
    #[arg(long, default_value_t = 600.0)]
    pub timeout: f64,
}

pub fn fetch(ctx: &Ctx, a: FetchArgs) -> anyhow::Result<()> {
    let url = a.broker.clone().unwrap_or_else(|| ctx.config.worker.broker_url.clone());
    let client = Client::new(url);
    let deadline = Instant::now() + Duration::from_secs_f64(a.timeout.max(0.0));
    let (bytes, view) = runtime()?.block_on(async {
        loop {
            match client.fetch(&a.id).await? {
                Fetched::Ready(b) => return Ok::<_, anyhow::Error>((b, client.status(&a.id).await?)),
                Fetched::NotReady(v) if v.status == JobStatus::Failed => {
                    let f = v.failure.unwrap_or_else(|| rfsoc_twin_scheduler::job::Failure {
                        reason: "unknown".into(),
                        message: String::new(),
                    });
                    bail!("job {} failed: {} ({})", a.id, f.reason, f.message);
                }
                Fetched::NotReady(v) => {
                    if !a.wait || Instant::now() >= deadline {
                        bail!("job {} is {:?}; no result yet", a.id, v.status);
                    }
                    tokio::time::sleep(Duration::from_millis(200)).await;
                }
            }
        }
    })?;
    let ext = match view.format {
        ResultFormat::Binary => "bin",
        ResultFormat::Csv => "csv",
    };
    let mut run = Run::start(&ctx.global.out, "fetch", ctx.global.seed, &a)?;
    let path = run.write(&format!("{}.{ext}", a.id), &bytes)?;
    println!("{}", path.display());
    run.finish(json!({"id": a.id, "bytes": bytes.len(), "attempts": view.attempts}))?;
    Ok(())
}
