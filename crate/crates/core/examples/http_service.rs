//! Runs the HTTP service over the case-study store on an ephemeral port
//! and calls every route once.
//!
//! ```text
//! cargo run --example http_service
//! ```

use std::path::Path;
use std::sync::Arc;

use eventmem::config::Config;
use eventmem::llm::ReplayProvider;
use eventmem::memory::{HashEmbedder, MemoryStore};
use eventmem::service::{router, AppState};
use serde_json::{json, Value};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/case_study");
    let store = MemoryStore::load(&dir.join("store.json"))?;
    let provider = Arc::new(ReplayProvider::from_path(&dir.join("replay.jsonl"))?);
    let config = Config::default();
    let embedder = Arc::new(HashEmbedder::new(config.embedding_dim, config.embedding_seed));
    let state = Arc::new(AppState::new(store, provider, embedder));

    let rt = tokio::runtime::Runtime::new()?;
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let base = format!("http://{}", listener.local_addr()?);
    rt.spawn(async move { axum::serve(listener, router(state)).await });

    let client = reqwest::blocking::Client::new();
    let reply: Value = client
        .post(format!("{base}/v1/query"))
        .json(&json!({ "question": "What kinds of artworks did the speaker mention creating after moving to the new city?" }))
        .send()?
        .error_for_status()?
        .json()?;
    println!("answer: {}", reply["answer"]);
    println!("kept {} evidence events", reply["evidence"].as_array().map_or(0, Vec::len));
    println!("actions: {}", reply["stats"]["actions"]);

    let unscripted = client
        .post(format!("{base}/v1/query"))
        .json(&json!({ "question": "Something the fixture never scripted" }))
        .send()?;
    println!("unscripted question -> HTTP {}: {}", unscripted.status(), unscripted.text()?);

    let graph = client.get(format!("{base}/v1/graph")).send()?.bytes()?;
    let reloaded = MemoryStore::from_snapshot_bytes(&graph)?;
    println!("graph route returned {} events", reloaded.graph.len());

    let stats: Value = client.get(format!("{base}/v1/stats")).send()?.json()?;
    println!("queries served: {}, avg kept {}", stats["questions"], stats["avg_kept_nodes"]);
    Ok(())
}
