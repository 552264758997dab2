use eventmem::memory::{Event, EventGraph};
use eventmem::topics::TopicState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ensure;
use crate::support::event;

const RUNS: u64 = 200;

fn noisy(rng: &mut ChaCha8Rng, themes: &[Vec<f64>]) -> Vec<f64> {
    let base = &themes[rng.random_range(0..themes.len())];
    let noise = rng.random_range(0.0..0.5);
    base.iter().map(|x| x + rng.random_range(-noise..=noise)).collect()
}

/// Partition plus centroid == mean of member embeddings.
fn laws(topics: &TopicState, graph: &EventGraph) -> Result<(), String> {
    topics.check_partition(graph).map_err(|e| e.to_string())?;
    for t in topics.topics() {
        let dim = t.centroid.len();
        let mut mean = vec![0.0; dim];
        for m in &t.members {
            let e = graph.get(m).ok_or_else(|| format!("unknown member {m}"))?;
            ensure!(topics.topic_of(m) == Some(t.id.as_str()), "{m} is not mapped to {}", t.id);
            for (acc, x) in mean.iter_mut().zip(&e.embedding) {
                *acc += x;
            }
        }
        for (c, acc) in t.centroid.iter().zip(&mean) {
            let expected = acc / t.members.len() as f64;
            ensure!((c - expected).abs() <= 1e-9, "{} centroid off by {}", t.id, (c - expected).abs());
        }
    }
    Ok(())
}

fn interleavings() -> Result<usize, String> {
    let mut ops = 0;
    for seed in 0..RUNS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = rng.random_range(2..6);
        let themes: Vec<Vec<f64>> = (0..rng.random_range(1..5))
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut graph = EventGraph::new();
        let mut topics = TopicState::new(4, 0.9, 42);
        let first: Vec<String> = (0..rng.random_range(1..15))
            .map(|i| graph.add_event(event(i, noisy(&mut rng, &themes))))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let initial: Vec<&Event> = first.iter().map(|id| graph.get(id).unwrap()).collect();
        topics.init_topics(initial).map_err(|e| e.to_string())?;
        laws(&topics, &graph)?;

        for n in 0..rng.random_range(1..40) {
            if rng.random_bool(0.7) {
                let id = graph
                    .add_event(event(100 + n, noisy(&mut rng, &themes)))
                    .map_err(|e| e.to_string())?;
                topics.assign_event(graph.get(&id).unwrap()).map_err(|e| e.to_string())?;
                topics.complete_step();
            }
            let step = topics.step_counter();
            let fired = topics.recluster_if_due(&graph).map_err(|e| e.to_string())?;
            ensure!(fired == (step > 0 && step % 4 == 0), "seed {seed}: fired={fired} at step {step}");
            laws(&topics, &graph).map_err(|e| format!("seed {seed} op {n}: {e}"))?;
            ops += 1;
        }
    }
    Ok(ops)
}

fn boundary() -> Result<(), String> {
    let mut graph = EventGraph::new();
    let mut topics = TopicState::new(4, 0.9, 42);
    let anchor = graph.add_event(event(0, vec![1.0, 0.0, 0.0, 0.0])).map_err(|e| e.to_string())?;
    topics.init_topics([graph.get(&anchor).unwrap()]).map_err(|e| e.to_string())?;
    let topic = topics.topic_of(&anchor).unwrap().to_string();

    // |(9, 3, 3, 1)| is exactly 10, so the cosine is exactly 0.9
    let on = graph.add_event(event(1, vec![9.0, 3.0, 3.0, 1.0])).map_err(|e| e.to_string())?;
    let (joined, created) = topics.assign_event(graph.get(&on).unwrap()).map_err(|e| e.to_string())?;
    ensure!(!created && joined == topic, "cosine exactly 0.9 did not join");

    // a fresh single-member topic for the just-below case
    let mut graph = EventGraph::new();
    let mut topics = TopicState::new(4, 0.9, 42);
    let anchor = graph.add_event(event(0, vec![1.0, 0.0, 0.0, 0.0])).map_err(|e| e.to_string())?;
    topics.init_topics([graph.get(&anchor).unwrap()]).map_err(|e| e.to_string())?;
    let below = graph.add_event(event(1, vec![9.0, 3.0, 3.0, 1.0001])).map_err(|e| e.to_string())?;
    let (_, created) = topics.assign_event(graph.get(&below).unwrap()).map_err(|e| e.to_string())?;
    ensure!(created && topics.len() == 2, "cosine just below 0.9 joined");
    Ok(())
}

pub fn check() -> Result<String, String> {
    let ops = interleavings()?;
    boundary()?;
    Ok(format!("{RUNS} runs, {ops} checked operations, boundary inclusive"))
}
