//! Saves a store to disk, loads it back and checks the round trip.
//!
//! ```text
//! cargo run --example snapshot
//! ```

use std::path::Path;

use eventmem::memory::MemoryStore;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/case_study/store.json");
    let store = MemoryStore::load(&fixture)?;
    println!(
        "{} events, {} relations, {} topics, step {}",
        store.graph.len(),
        store.graph.relation_count(),
        store.topics.len(),
        store.topics.step_counter()
    );

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("copy.json");
    store.save(&path)?;
    let reloaded = MemoryStore::load(&path)?;
    reloaded.check_integrity()?;
    assert_eq!(reloaded.snapshot_bytes(), store.snapshot_bytes());
    assert_eq!(std::fs::read(&path)?, std::fs::read(&fixture)?);
    println!("round trip is byte-identical ({} bytes)", store.snapshot_bytes().len());

    let snap = reloaded.to_snapshot();
    let first = &snap.events[0];
    println!("{} has a {}-dimensional embedding; config echo top_k = {}", first.id, first.embedding.len(), snap.config_echo.top_k);
    Ok(())
}
