//! Topic maintenance on synthetic embeddings: initial k-means, online
//! assignment against the similarity threshold, and periodic re-clustering.
//!
//! ```text
//! cargo run --example topic_layer
//! ```

use eventmem::memory::{l2_normalize, Event, EventGraph};
use eventmem::topics::{cluster_count, kmeans, TopicState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noisy(base: &[f64], rng: &mut ChaCha8Rng, noise: f64) -> Vec<f64> {
    let mut v: Vec<f64> = base.iter().map(|x| x + rng.random_range(-noise..noise)).collect();
    l2_normalize(&mut v);
    v
}

fn event(n: usize, embedding: Vec<f64>) -> Event {
    Event {
        id: String::new(),
        span: vec![format!("u{n}")],
        time_info: String::new(),
        summary: format!("synthetic event {n}"),
        participants: Vec::new(),
        embedding,
        session_ids: [format!("s{n}")].into(),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for n in [1, 9, 10, 37, 249, 250, 400] {
        println!("cluster_count({n}) = {}", cluster_count(n)?);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let themes = [vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]];
    let points: Vec<Vec<f64>> = (0..30).map(|i| noisy(&themes[i % 3], &mut rng, 0.2)).collect();
    let fit = kmeans(&points, 3, 42)?;
    println!("\nk-means inertia per iteration: {:?}", fit.inertia_history);

    let mut graph = EventGraph::new();
    let mut topics = TopicState::new(4, 0.9, 42);
    let first: Vec<String> = (0..10)
        .map(|i| graph.add_event(event(i, noisy(&themes[i % 3], &mut rng, 0.1))))
        .collect::<Result<_, _>>()?;
    topics.init_topics(first.iter().map(|id| graph.get(id).expect("inserted")))?;
    topics.complete_step();
    println!("\nafter init: {} topics", topics.len());

    for step in 1..=8 {
        let theme = rng.random_range(0..themes.len());
        let id = graph.add_event(event(100 + step, noisy(&themes[theme], &mut rng, 0.15)))?;
        let (topic, created) = topics.assign_event(graph.get(&id).expect("inserted"))?;
        topics.complete_step();
        let reclustered = topics.recluster_if_due(&graph)?;
        println!(
            "step {:>2}: {id} -> {topic}{}{}",
            topics.step_counter(),
            if created { " (new topic)" } else { "" },
            if reclustered { ", re-clustered" } else { "" }
        );
        topics.check_partition(&graph)?;
    }
    for t in topics.topics() {
        println!("{} holds {} events", t.id, t.members.len());
    }
    Ok(())
}
