use std::collections::HashSet;

use eventmem::memory::{Embedder, HashEmbedder};
use eventmem::search::{priority, GlobalQueue, SubgoalPlan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ensure;
use crate::support::{cosine, event, sentence};

const CASES: usize = 1000;

fn priority_oracle() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let embedder = HashEmbedder::new(64, 0x5eed);
    for case in 0..CASES {
        let goals: Vec<String> = (0..rng.random_range(2..=5)).map(|_| sentence(&mut rng)).collect();
        let mut plan = SubgoalPlan::new("q", goals.clone(), &embedder).map_err(|e| e.to_string())?;
        let open = rng.random_range(0..goals.len());
        for (j, bit) in plan.satisfaction.iter_mut().enumerate() {
            *bit = j != open && rng.random_bool(0.5);
        }
        let node = event(case, embedder.embed(&sentence(&mut rng)).map_err(|e| e.to_string())?);

        let expected = goals
            .iter()
            .zip(&plan.satisfaction)
            .filter(|(_, done)| !**done)
            .map(|(g, _)| cosine(&node.embedding, &embedder.embed(g).unwrap()))
            .fold(f64::NEG_INFINITY, f64::max);
        let got = priority(&node, &plan).map_err(|e| e.to_string())?;
        ensure!((got - expected).abs() <= 1e-12, "case {case}: priority {got}, brute force {expected}");
    }
    Ok(())
}

/// Every pop is checked against a linear max-scan over live entries, with
/// ties going to the earliest push.
fn pop_order() -> Result<usize, String> {
    let mut pops = 0;
    for seed in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut queue = GlobalQueue::new();
        let mut model: Vec<(String, f64, usize)> = Vec::new();
        let mut pushed: HashSet<String> = HashSet::new();
        let mut visited: HashSet<String> = HashSet::new();
        let mut seq = 0;
        for _ in 0..rng.random_range(1..200) {
            match rng.random_range(0..10) {
                0..=5 => {
                    let id = format!("ev-{:06}", rng.random_range(0..60));
                    // a coarse grid forces ties
                    let p = f64::from(rng.random_range(-4..=4)) / 4.0;
                    let fresh = pushed.insert(id.clone());
                    ensure!(queue.push(&id, p) == fresh, "seed {seed}: push({id}) acceptance differs");
                    if fresh {
                        model.push((id, p, seq));
                        seq += 1;
                    }
                }
                6 => {
                    visited.insert(format!("ev-{:06}", rng.random_range(0..60)));
                }
                _ => {
                    let best = model
                        .iter()
                        .enumerate()
                        .filter(|(_, (id, _, _))| !visited.contains(id))
                        .max_by(|(_, a), (_, b)| a.1.total_cmp(&b.1).then(b.2.cmp(&a.2)))
                        .map(|(i, _)| i);
                    let expected = best.map(|i| model.remove(i));
                    let got = queue.pop(&visited);
                    ensure!(
                        got.as_ref().map(|(id, p)| (id.as_str(), *p)) == expected.as_ref().map(|(id, p, _)| (id.as_str(), *p)),
                        "seed {seed}: popped {got:?}, max-scan gives {expected:?}"
                    );
                    if let Some((id, _)) = got {
                        visited.insert(id);
                    }
                    pops += 1;
                }
            }
        }
    }
    Ok(pops)
}

pub fn check() -> Result<String, String> {
    priority_oracle()?;
    let pops = pop_order()?;
    Ok(format!("{CASES} priority cases, {pops} pops"))
}
