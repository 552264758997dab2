//! Builds a store from utterance JSON Lines and answers a question, with
//! every model call served from a replay fixture.
//!
//! ```text
//! cargo run --example ingest_and_query
//! ```

use std::path::Path;

use eventmem::config::Config;
use eventmem::construction::{ingest_session, read_sessions_jsonl};
use eventmem::llm::{Gateway, ReplayProvider};
use eventmem::memory::{HashEmbedder, MemoryStore};
use eventmem::search::run_search;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/case_study");
    let provider = ReplayProvider::from_path(&dir.join("replay.jsonl"))?;
    let config = Config::default();
    let embedder = HashEmbedder::new(config.embedding_dim, config.embedding_seed);
    let gateway = Gateway::new(&provider, &config);

    let mut store = MemoryStore::new(config.clone());
    for session in read_sessions_jsonl(&std::fs::read_to_string(dir.join("sessions.jsonl"))?)? {
        let report = ingest_session(&mut store, &session, &gateway, &embedder)?;
        println!(
            "{}: inserted {:?}, {} relations",
            report.session_id, report.inserted, report.relations_added
        );
    }
    for event in store.graph.events() {
        println!("{} [{}] {}", event.id, store.topics.topic_of(&event.id).unwrap_or("-"), event.summary);
    }
    for rel in store.graph.relations() {
        println!("{} -{}-> {}", rel.src, rel.label, rel.dst);
    }

    let question = "What kinds of artworks did the speaker mention creating after moving to the new city?";
    let result = run_search(question, &store, &gateway, &embedder, &config)?;
    println!("\nQ: {question}");
    for (i, goal) in result.plan.subgoals.iter().enumerate() {
        println!("  sub-goal {}: {goal}", i + 1);
    }
    for step in &result.trace {
        println!(
            "  round {} {} {:?} satisfied {:?}",
            step.round, step.node, step.action, step.satisfied_subgoals
        );
    }
    println!("A: {}", result.answer);
    println!("evidence: {:?}", result.evidence.iter().map(|e| &e.id).collect::<Vec<_>>());
    Ok(())
}
