use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::{Arc, OnceLock};

use eventmem::config::Config;
use eventmem::llm::{ActionKind, Gateway, TemplateId};
use eventmem::memory::{Embedder, HashEmbedder, MemoryStore, Relation};
use eventmem::search::run_search;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use crate::ensure;
use crate::support::{cosine, event, sentence, Programmed};

const RUNS: u64 = 500;
const DIM: usize = 16;
const ANSWER: &str = "scripted answer";
const LABELS: [&str; 4] = ["causal", "temporal", "motivation", "part_of"];

fn ids_in(text: &str) -> Vec<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"ev-\d{6}").unwrap());
    let mut seen = BTreeSet::new();
    re.find_iter(text)
        .map(|m| m.as_str().to_string())
        .filter(|id| seen.insert(id.clone()))
        .collect()
}

/// Indices marked `[SATISFIED]` in a sub-goal listing.
fn satisfied_marks(prompt: &str) -> BTreeSet<usize> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?m)^(\d+)\. \[SATISFIED\]").unwrap());
    re.captures_iter(prompt).map(|c| c[1].parse().unwrap()).collect()
}

fn random_store(rng: &mut ChaCha8Rng, embedder: &HashEmbedder) -> Result<MemoryStore, String> {
    let mut store = MemoryStore::new(Config {
        embedding_dim: DIM,
        ..Config::default()
    });
    let n = rng.random_range(1..=200);
    for i in 0..n {
        let mut e = event(i, Vec::new());
        e.summary = sentence(rng);
        e.embedding = embedder.embed(&e.summary).map_err(|e| e.to_string())?;
        store.graph.add_event(e).map_err(|e| e.to_string())?;
    }
    let ids: Vec<String> = store.graph.events().map(|e| e.id.clone()).collect();
    for _ in 0..rng.random_range(0..=3 * n) {
        let (a, b) = (ids.choose(rng).unwrap(), ids.choose(rng).unwrap());
        if a != b {
            // duplicates are rejected; that is fine here
            let _ = store.graph.add_relation(Relation::new(a, b, *LABELS.choose(rng).unwrap()));
        }
    }
    let events: Vec<_> = store.graph.events().cloned().collect();
    store.topics.init_topics(&events).map_err(|e| e.to_string())?;
    Ok(store)
}

/// Scripted policy; every reply is a pure function of the run seed and
/// the request's replay key.
fn policy(run: u64, skip_bias: f64) -> Programmed {
    Programmed::new(move |template, req| {
        let mut h = DefaultHasher::new();
        (run, req.replay_key.as_deref()).hash(&mut h);
        let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
        let prompt = &req.user;
        Ok(match template {
            TemplateId::Planner => (1..=rng.random_range(2..=5))
                .map(|i| format!("Sub-goal {i}: {}\n", sentence(&mut rng)))
                .collect(),
            TemplateId::NodeSelection => match rng.random_range(0..10) {
                0 => "no idea".into(),
                1 => "Selected Nodes: NONE".into(),
                _ => {
                    let mut ids = ids_in(prompt);
                    ids.shuffle(&mut rng);
                    ids.truncate(rng.random_range(0..=7));
                    if rng.random_bool(0.2) {
                        ids.push("ev-999999".into());
                    }
                    format!("Selected Nodes: [{}]\nReasoning: scripted", ids.join(", "))
                }
            },
            TemplateId::ActionDecision => {
                if rng.random_bool(0.05) {
                    return Ok("let me think about this".into());
                }
                let kind = if rng.random_bool(skip_bias) {
                    "SKIP"
                } else if rng.random_bool(0.85) {
                    "EXPAND"
                } else {
                    "ANSWER"
                };
                let mut next = ids_in(prompt);
                next.shuffle(&mut rng);
                next.truncate(rng.random_range(0..=4));
                if rng.random_bool(0.1) {
                    next.push("E1".into());
                }
                let sat: Vec<String> = (0..rng.random_range(0..=3))
                    .map(|_| rng.random_range(0..=6).to_string())
                    .collect();
                format!(
                    "ACTION: {kind}\nNEXT_NODES: [{}]\nSATISFIED_SUBGOALS: [{}]\nREASONING: scripted",
                    next.join(", "),
                    sat.join(", ")
                )
            }
            TemplateId::QueryRefinement => {
                if rng.random_bool(0.3) {
                    "New Query:".into()
                } else {
                    format!("New Query: {}\nTarget Sub-goals: [1]", sentence(&mut rng))
                }
            }
            TemplateId::ResponseGeneration => format!("ANSWER: {ANSWER}"),
            other => panic!("unexpected template {other}"),
        })
    })
}

fn top_k(store: &MemoryStore, embedder: &HashEmbedder, question: &str, k: usize) -> Vec<String> {
    let q = embedder.embed(question).unwrap();
    let mut ranked: Vec<(f64, &str)> = store
        .graph
        .events()
        .map(|e| (cosine(&e.embedding, &q), e.id.as_str()))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    ranked.into_iter().take(k).map(|(_, id)| id.to_string()).collect()
}

fn one_run(run: u64, fallbacks: &mut usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(run);
    let embedder = HashEmbedder::new(DIM, run);
    let store = random_store(&mut rng, &embedder)?;
    let n = store.graph.len();
    let config = Config {
        embedding_dim: DIM,
        num_explorers: rng.random_range(1..=3),
        path_step_cap: rng.random_range(1..=8),
        ..Config::default()
    };
    let skip_bias = *[0.0, 0.3, 0.7, 1.0].choose(&mut rng).unwrap();
    let provider = Arc::new(policy(run, skip_bias));
    let gateway = Gateway::new(provider.as_ref(), &config);
    let question = sentence(&mut rng);
    let r = run_search(&question, &store, &gateway, &embedder, &config).map_err(|e| e.to_string())?;

    r.stats.check()?;
    let mut seen = HashSet::new();
    for t in &r.trace {
        ensure!(seen.insert(t.node.as_str()), "{} stepped twice", t.node);
        ensure!(store.graph.contains(&t.node), "{} is not in the graph", t.node);
    }
    ensure!(r.trace.len() <= n && r.trace.len() == r.stats.total_steps, "{} steps over {n} nodes", r.trace.len());
    let mut per_path: BTreeMap<(u32, usize), usize> = BTreeMap::new();
    for t in &r.trace {
        *per_path.entry((t.round, t.path)).or_default() += 1;
    }
    let mut lengths: Vec<usize> = per_path.values().copied().collect();
    let mut reported = r.stats.path_lengths.clone();
    lengths.sort_unstable();
    reported.sort_unstable();
    ensure!(lengths == reported, "path lengths {reported:?} vs trace {lengths:?}");
    ensure!(
        lengths.iter().all(|l| *l <= config.path_step_cap),
        "a path exceeded the cap {}",
        config.path_step_cap
    );

    let credited: BTreeSet<usize> = r
        .trace
        .iter()
        .filter(|t| t.action != ActionKind::Skip)
        .flat_map(|t| t.satisfied_subgoals.iter().copied())
        .collect();
    let bits: BTreeSet<usize> = (1..=r.plan.satisfaction.len()).filter(|i| r.plan.satisfaction[i - 1]).collect();
    ensure!(bits == credited, "final bits {bits:?} vs credited {credited:?}");
    for prompt in provider.prompts(TemplateId::ActionDecision) {
        ensure!(satisfied_marks(&prompt).is_subset(&bits), "a satisfied bit was later cleared");
    }
    if config.num_explorers == 1 {
        let mut last = BTreeSet::new();
        for prompt in provider.prompts(TemplateId::ActionDecision) {
            let now = satisfied_marks(&prompt);
            ensure!(last.is_subset(&now), "satisfaction went {last:?} -> {now:?}");
            last = now;
        }
    }

    let kept: Vec<&str> = r.trace.iter().filter(|t| t.action != ActionKind::Skip).map(|t| t.node.as_str()).collect();
    ensure!(r.used_fallback == kept.is_empty(), "fallback={} with {} kept", r.used_fallback, kept.len());
    ensure!(r.stats.kept_nodes == kept.len() && r.stats.used_fallback == r.used_fallback, "stats disagree");
    let evidence: Vec<&str> = r.evidence.iter().map(|e| e.id.as_str()).collect();
    if r.used_fallback {
        *fallbacks += 1;
        let expected = top_k(&store, &embedder, &question, config.top_k);
        ensure!(evidence == expected, "fallback evidence {evidence:?}, top-k {expected:?}");
    } else {
        ensure!(evidence == kept, "evidence {evidence:?} vs kept {kept:?}");
    }
    ensure!(r.answer == ANSWER, "answer {:?}", r.answer);
    Ok(())
}

pub fn check() -> Result<String, String> {
    let mut fallbacks = 0;
    for run in 0..RUNS {
        one_run(run, &mut fallbacks).map_err(|e| format!("run {run}: {e}"))?;
    }
    ensure!(fallbacks > 0 && fallbacks < RUNS as usize, "fallback never or always taken ({fallbacks})");
    Ok(format!("{RUNS} runs, {fallbacks} with top-k fallback"))
}
