use std::fs;
use std::sync::Arc;

use anyhow::{Context, Result};
use forgescore_core::labels::LabeledCohort;
use forgescore_core::tensor_io::load_cohort;
use forgescore_review::{Journal, ReviewService, ServiceConfig, Session};
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::ServeArgs;
use crate::config::{flags, read_json, Ctx};

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
struct ServeSettings {
    bind: String,
    port: u16,
}

impl Default for ServeSettings {
    fn default() -> Self {
        Self { bind: "127.0.0.1".into(), port: 8080 }
    }
}

pub fn serve(ctx: &Ctx, a: &ServeArgs) -> Result<Value> {
    let over = flags(&[("bind", a.bind.clone().map(Value::from)), ("port", a.port.map(Value::from))]);
    let settings: ServeSettings = ctx.layers.section("serve", ServeSettings::default(), over)?;
    let cohort: LabeledCohort = read_json(&a.labels)?;
    let videos = match &a.cohort {
        Some(dir) => load_cohort(dir)?,
        None => Vec::new(),
    };
    let session = Session::new(cohort, videos, ctx.seed)?;
    let (journal, events) = Journal::open(&a.journal)?;
    if let Some(out) = &a.out {
        fs::create_dir_all(out)?;
    }
    let config = ServiceConfig { split_out: a.out.as_ref().map(|o| o.join("split.json")), ui_dir: a.ui_dir.clone() };
    let svc = Arc::new(ReviewService::open(session, journal, &events, config)?);

    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let addr = format!("{}:{}", settings.bind, settings.port);
        let listener = tokio::net::TcpListener::bind(&addr).await.with_context(|| format!("binding {addr}"))?;
        let local = listener.local_addr()?;
        info!("review service listening on http://{local}");
        eprintln!("listening on http://{local}");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
            info!("shutting down");
        };
        forgescore_review::serve(listener, svc, shutdown).await.context("serving")
    })?;
    Ok(json!({ "serve": settings, "seed": ctx.seed, "journal": a.journal }))
}
