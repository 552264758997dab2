use eventmem::config::Config;
use eventmem::construction::{integrate_submemory, SubMemory};
use eventmem::llm::{Gateway, TemplateId};
use eventmem::memory::{HashEmbedder, MemoryStore, Relation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::ensure;
use crate::support::{cosine, event, Programmed};

const CASES: usize = 10_000;
const DIM: usize = 8;

fn basis(i: usize) -> Vec<f64> {
    let mut v = vec![0.0; DIM];
    v[i] = 1.0;
    v
}

/// Four stored events on the axes e0..e3, topics initialized.
fn base_store() -> Result<MemoryStore, String> {
    let config = Config {
        embedding_dim: DIM,
        ..Config::default()
    };
    let mut store = MemoryStore::new(config);
    for i in 0..4 {
        store.graph.add_event(event(i, basis(i))).map_err(|e| e.to_string())?;
    }
    let events: Vec<_> = store.graph.events().cloned().collect();
    store.topics.init_topics(&events).map_err(|e| e.to_string())?;
    store.topics.complete_step();
    Ok(store)
}

#[derive(Debug, Clone)]
enum Verdict {
    Json { same: bool, overlap: bool, kind: Option<&'static str> },
    Malformed,
}

#[derive(Debug, PartialEq)]
enum Disposition {
    Merge,
    Link(String),
    Insert,
}

pub fn check() -> Result<String, String> {
    let base = base_store()?;
    let ids: Vec<String> = base.graph.events().map(|e| e.id.clone()).collect();
    let embedder = HashEmbedder::new(DIM, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tally = [0usize; 3];

    for case in 0..CASES {
        let j = rng.random_range(0..4);
        // incoming event: cosine s with e_j and 0 with every other stored axis
        let (incoming, s_above) = if rng.random_bool(0.1) {
            // |(9, 3, 3, 1)| is exactly 10: cosine exactly 0.9
            let mut v = vec![0.0; DIM];
            v[j] = 9.0;
            v[4] = 3.0;
            v[5] = 3.0;
            v[7] = 1.0;
            (v, true)
        } else {
            let mut s: f64 = rng.random_range(0.5..1.0);
            if (s - 0.9).abs() < 1e-9 {
                s = 0.95;
            }
            let mut v = basis(j);
            v[j] = s;
            v[7] = (1.0 - s * s).sqrt();
            (v, s > 0.9)
        };
        ensure!((cosine(&incoming, &basis(j)) >= 0.9) == s_above, "case {case}: fixture misbuilt");

        let verdict = if rng.random_bool(0.15) {
            Verdict::Malformed
        } else {
            let kinds = [None, Some(""), Some("Part Of"), Some("causal"), Some("!!!")];
            Verdict::Json {
                same: rng.random_bool(0.4),
                overlap: rng.random_bool(0.5),
                kind: kinds[rng.random_range(0..kinds.len())],
            }
        };
        let expected = match (&verdict, s_above) {
            (_, false) | (Verdict::Malformed, true) => Disposition::Insert,
            (Verdict::Json { same: true, .. }, true) => Disposition::Merge,
            (Verdict::Json { overlap: true, kind: Some("Part Of"), .. }, true) => Disposition::Link("part_of".into()),
            (Verdict::Json { overlap: true, kind: Some("causal"), .. }, true) => Disposition::Link("causal".into()),
            _ => Disposition::Insert,
        };
        let expected_calls = match (&verdict, s_above) {
            (_, false) => 0,
            // unparseable replies are retried once
            (Verdict::Malformed, true) => 2,
            _ => 1,
        };

        let reply = verdict.clone();
        let provider = Programmed::new(move |template, _| {
            assert_eq!(template, TemplateId::Coreference, "only coreference is consulted");
            Ok(match &reply {
                Verdict::Malformed => "same_event: maybe".to_string(),
                Verdict::Json { same, overlap, kind } => json!({
                    "same_event": same,
                    "has_overlap": overlap,
                    "relation_type": kind,
                    "reasoning": "scripted",
                })
                .to_string(),
            })
        });

        // an orthogonal event first, so the probe only ever meets e_j
        let mut other = event(10, basis(6));
        other.id = "p-other".into();
        let mut probe = event(11, incoming);
        probe.id = "p-probe".into();
        let sub = SubMemory {
            events: vec![other, probe],
            relations: vec![Relation::new("p-other", "p-probe", "causal")],
        };

        let mut store = base.clone();
        let gateway = Gateway::new(&provider, &store.config);
        let report = integrate_submemory(&mut store, sub, &gateway, &embedder).map_err(|e| format!("case {case}: {e}"))?;

        let calls = provider.calls(TemplateId::Coreference);
        ensure!(calls == expected_calls, "case {case}: {calls} coreference calls, expected {expected_calls}");
        let probe_id = report.id_remap.get("p-probe").ok_or("probe unmapped")?.clone();
        let got = if report.merged.iter().any(|(p, e)| p == "p-probe" && *e == ids[j]) {
            ensure!(probe_id == ids[j], "case {case}: merge remap");
            Disposition::Merge
        } else if let Some(rel) = report.linked.first() {
            ensure!(rel.src == probe_id && rel.dst == ids[j], "case {case}: link endpoints {rel:?}");
            Disposition::Link(rel.label.clone())
        } else {
            Disposition::Insert
        };
        ensure!(got == expected, "case {case}: {got:?}, expected {expected:?} for {verdict:?}, above={s_above}");
        ensure!(report.linked.len() <= 1 && report.merged.len() <= 1, "case {case}: extra dispositions");

        let inserted = 1 + usize::from(got != Disposition::Merge);
        ensure!(report.inserted.len() == inserted && store.graph.len() == 4 + inserted, "case {case}: event count");
        let other_id = &report.id_remap["p-other"];
        ensure!(
            store
                .graph
                .relations()
                .any(|r| r.src == *other_id && r.dst == probe_id && r.label == "causal"),
            "case {case}: batch relation not remapped"
        );
        store.check_integrity().map_err(|e| format!("case {case}: {e}"))?;
        store.topics.check_partition(&store.graph).map_err(|e| format!("case {case}: {e}"))?;
        ensure!(store.topics.step_counter() == 2, "case {case}: step counter");
        tally[match got {
            Disposition::Merge => 0,
            Disposition::Link(_) => 1,
            Disposition::Insert => 2,
        }] += 1;
    }
    ensure!(tally.iter().all(|n| *n > 0), "a disposition never occurred: {tally:?}");
    Ok(format!("{CASES} cases: {} merge, {} link, {} insert", tally[0], tally[1], tally[2]))
}
