//! Scores a small QA dataset against the case-study store.
//!
//! Only the first question is scripted in the replay fixture, so the other
//! two fail at planning and score zero; the report records the errors
//! instead of aborting.
//!
//! ```text
//! cargo run --example benchmark
//! ```

use std::path::Path;

use eventmem::harness::{load_dataset, run_benchmark};
use eventmem::llm::{Gateway, ReplayProvider};
use eventmem::memory::{HashEmbedder, MemoryStore};

const DATASET: &str = r#"{"question": "What kinds of artworks did the speaker mention creating after moving to the new city?", "answer": "paintings and stained glass", "category": "multi-hop", "sample_id": "case"}
{"question": "Where did Dana move?", "answer": "Chicago", "category": "single-hop", "sample_id": "case"}
this line is not JSON
{"question": "When did Dana move?", "answer": "last summer", "sample_id": "case"}
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/case_study");
    let store = MemoryStore::load(&dir.join("store.json"))?;
    let provider = ReplayProvider::from_path(&dir.join("replay.jsonl"))?;
    let config = store.config.clone();
    let embedder = HashEmbedder::new(config.embedding_dim, config.embedding_seed);
    let gateway = Gateway::new(&provider, &config);

    let dataset = load_dataset(DATASET);
    let report = run_benchmark(&dataset, &store, &gateway, &embedder, &config);
    for o in &report.outcomes {
        println!(
            "[{}] f1 {:.3} bleu {:.3} {}",
            o.category,
            o.f1,
            o.bleu1,
            o.error.as_deref().unwrap_or(&o.prediction)
        );
    }
    println!();
    print!("{}", report.render_text());
    Ok(())
}
