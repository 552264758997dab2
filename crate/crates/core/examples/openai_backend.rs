//! Ingests a short conversation and asks a question against a live
//! OpenAI-compatible endpoint.
//!
//! ```text
//! MEM_LLM_URL=https://api.openai.com/v1 MEM_LLM_KEY=sk-... cargo run --example openai_backend
//! ```
//!
//! `MEM_EMBED_URL` switches from the hashing embedder to a remote one.
//! Without `MEM_LLM_URL` the example prints what it would do and exits.

use eventmem::config::Config;
use eventmem::construction::ingest_session;
use eventmem::llm::{Gateway, OpenAiChatProvider};
use eventmem::memory::{Embedder, HashEmbedder, HttpEmbedder, MemoryStore, Utterance};
use eventmem::search::run_search;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = Config::default();
    let provider = match OpenAiChatProvider::from_env() {
        Ok(p) => p,
        Err(e) => {
            println!("{e}; set MEM_LLM_URL (and MEM_LLM_KEY) to run against a live model");
            return Ok(());
        }
    };
    println!("chat endpoint: {}", provider.url());
    let embedder: Box<dyn Embedder> = match HttpEmbedder::from_env(config.embedding_dim) {
        Some(e) => Box::new(e),
        None => Box::new(HashEmbedder::new(config.embedding_dim, config.embedding_seed)),
    };
    let gateway = Gateway::new(&provider, &config);

    let lines = [
        ("Ana", "I finally adopted a dog last weekend, a beagle named Pepper."),
        ("Ben", "Congrats! Is she settling in?"),
        ("Ana", "She chewed my running shoes, so I had to buy new ones before the half marathon."),
        ("Ben", "When is the race?"),
        ("Ana", "Next Sunday in Lisbon."),
    ];
    let batch: Vec<Utterance> = lines
        .iter()
        .enumerate()
        .map(|(i, (speaker, text))| Utterance {
            id: format!("u{}", i + 1),
            session_id: "s1".into(),
            speaker: speaker.to_string(),
            timestamp: "9 June 2024".into(),
            text: text.to_string(),
        })
        .collect();

    let mut store = MemoryStore::new(config.clone());
    let report = ingest_session(&mut store, &batch, &gateway, embedder.as_ref())?;
    println!("inserted {:?}", report.inserted);
    for e in store.graph.events() {
        println!("  {}: {}", e.id, e.summary);
    }
    let result = run_search("Why did Ana buy new running shoes?", &store, &gateway, embedder.as_ref(), &config)?;
    println!("answer: {}", result.answer);
    Ok(())
}
