use std::collections::BTreeSet;

use eventmem::config::Config;
use eventmem::memory::{MemoryStore, Relation};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ensure;
use crate::support::{event, sentence};

const STORES: u64 = 100;

fn awkward_float(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..8) {
        0 => 0.0,
        1 => -0.0,
        2 => f64::MIN_POSITIVE * rng.random::<f64>(),
        3 => rng.random::<f64>() * 10f64.powi(rng.random_range(-150..150)),
        4 => 0.1 + 0.2,
        _ => rng.random_range(-1.0..1.0),
    }
}

fn random_store(seed: u64) -> Result<MemoryStore, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(1..12);
    let mut store = MemoryStore::new(Config {
        embedding_dim: dim,
        kmeans_seed: rng.random(),
        ..Config::default()
    });
    let n = rng.random_range(1..60);
    let mut sessions = BTreeSet::new();
    let mut ids = Vec::new();
    for i in 0..n {
        let mut embedding: Vec<f64> = (0..dim).map(|_| awkward_float(&mut rng)).collect();
        // zero vectors are rejected by validation
        embedding[0] = 1.0 + rng.random::<f64>();
        let mut e = event(i, embedding);
        e.summary = format!("{} «{}» \"quoted\" \\ é", sentence(&mut rng), i);
        e.time_info = if rng.random_bool(0.5) { "7 May 2023, 1:56 pm".into() } else { String::new() };
        e.participants = ["Dana", "Sam", "李"][..rng.random_range(0..=3)].iter().map(|s| s.to_string()).collect();
        e.span = (0..rng.random_range(1..4)).map(|k| format!("u{i}-{k}")).collect();
        let session = format!("session_{}", rng.random_range(0..5));
        sessions.insert(session.clone());
        e.session_ids = [session].into();
        ids.push(store.graph.add_event(e).map_err(|e| e.to_string())?);
    }
    for _ in 0..rng.random_range(0..2 * n) {
        let (a, b) = (ids.choose(&mut rng).unwrap(), ids.choose(&mut rng).unwrap());
        if a != b {
            let label = *["causal", "temporal", "part_of"].choose(&mut rng).unwrap();
            let _ = store.graph.add_relation(Relation::new(a, b, label).with_evidence(vec!["u1-0".into()]));
        }
    }
    // k-means on a prefix, online assignment for the rest
    let split = rng.random_range(1..=n);
    let first: Vec<_> = ids[..split].iter().map(|id| store.graph.get(id).unwrap().clone()).collect();
    store.topics.init_topics(&first).map_err(|e| e.to_string())?;
    for id in &ids[split..] {
        let e = store.graph.get(id).unwrap().clone();
        store.topics.assign_event(&e).map_err(|e| e.to_string())?;
    }
    for _ in 0..sessions.len() {
        store.topics.complete_step();
    }
    Ok(store)
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 && x.to_bits() == y.to_bits())
}

fn same(a: &MemoryStore, b: &MemoryStore) -> Result<(), String> {
    let (sa, sb) = (a.to_snapshot(), b.to_snapshot());
    ensure!(sa.events.len() == sb.events.len(), "event count");
    for (x, y) in sa.events.iter().zip(&sb.events) {
        ensure!(close(&x.embedding, &y.embedding), "{} embedding drifted", x.id);
        let strip = |e: &eventmem::memory::Event| (e.id.clone(), e.span.clone(), e.summary.clone(), e.time_info.clone(), e.participants.clone(), e.session_ids.clone());
        ensure!(strip(x) == strip(y), "{} fields differ", x.id);
    }
    ensure!(sa.relations == sb.relations, "relations differ");
    ensure!(sa.topics.len() == sb.topics.len(), "topic count");
    for (x, y) in sa.topics.iter().zip(&sb.topics) {
        ensure!(x.id == y.id && x.members == y.members && x.member_count == y.member_count, "topic {}", x.id);
        ensure!(close(&x.centroid, &y.centroid), "{} centroid drifted", x.id);
    }
    ensure!(sa.config_echo == sb.config_echo, "config differs");
    ensure!(a.topics.step_counter() == b.topics.step_counter(), "step counter differs");
    for e in &sa.events {
        ensure!(a.topics.topic_of(&e.id) == b.topics.topic_of(&e.id), "{} changed topic", e.id);
    }
    Ok(())
}

pub fn check() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut floats = 0;
    for seed in 0..STORES {
        let store = random_store(seed)?;
        store.check_integrity().map_err(|e| e.to_string())?;
        let bytes = store.snapshot_bytes();
        ensure!(bytes == store.snapshot_bytes(), "store {seed}: snapshot not byte-stable");
        let loaded = MemoryStore::from_snapshot_bytes(&bytes).map_err(|e| format!("store {seed}: {e}"))?;
        same(&store, &loaded).map_err(|e| format!("store {seed}: {e}"))?;
        ensure!(loaded.snapshot_bytes() == bytes, "store {seed}: reload changed the bytes");

        let path = dir.path().join(format!("store-{seed}.json"));
        store.save(&path).map_err(|e| e.to_string())?;
        let from_file = MemoryStore::load(&path).map_err(|e| e.to_string())?;
        same(&store, &from_file).map_err(|e| format!("store {seed} via file: {e}"))?;
        floats += store.graph.events().map(|e| e.embedding.len()).sum::<usize>();
    }
    Ok(format!("{STORES} stores, {floats} embedding values restored bit-exactly"))
}
