//! Builds the scripted case-study fixture and replays it.
//!
//! Three sessions are ingested through a replay provider, then every
//! search-time prompt the question triggers is scripted so that:
//!
//! * round 1 starts from the relocation, museum and bus events, expands
//!   the relocation and art chains and leaves the third sub-goal open;
//! * one refinement targets that sub-goal;
//! * round 2 finds the painting and stained glass events.
//!
//! ```text
//! cargo run --example case_study            # build, verify, print the trace
//! cargo run --example case_study -- --write # also rewrite fixtures/case_study
//! ```
//!
//! The written fixture is what `mem query` replays in the acceptance suite.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use eventmem::config::Config;
use eventmem::construction::{ingest_session, render_dialog, render_events, segment_events};
use eventmem::llm::{bindings, replay_key, Action, ActionKind, Gateway, ReplayProvider, ReplayRecord, TemplateId};
use eventmem::memory::{HashEmbedder, MemoryStore, Utterance};
use eventmem::search::{node_info, run_search};

const QUESTION: &str = "What kinds of artworks did the speaker mention creating after moving to the new city?";
const REFINED: &str = "What specific forms of art did the speaker create after moving to the new city?";
const ANSWER: &str = "The speaker created paintings and stained glass artworks after moving.";
const SUBGOALS: [&str; 3] = [
    "Find when and where the speaker relocated.",
    "Find creative pursuits the speaker took up after relocating.",
    "Name the concrete kinds of artwork the speaker produced.",
];

struct Scripted {
    summary: &'static str,
    utterances: &'static [&'static str],
    time: &'static str,
    people: &'static [&'static str],
}

struct Session {
    id: &'static str,
    timestamp: &'static str,
    lines: &'static [(&'static str, &'static str)],
    events: &'static [Scripted],
    /// `(source index, target index, type)` into `events`.
    relations: &'static [(usize, usize, &'static str)],
}

const SESSIONS: [Session; 3] = [
    Session {
        id: "session_1",
        timestamp: "10:00 am on 4 March, 2023",
        lines: &[
            ("Dana", "I moved to a new city, Chicago, for a new job last summer."),
            ("Sam", "How is the job going so far?"),
            ("Dana", "The design studio downtown keeps me busy most weekdays."),
            ("Sam", "The late buses keep creating problems for me."),
            ("Dana", "That sounds frustrating."),
        ],
        events: &[
            Scripted {
                summary: "Dana moved to the new city of Chicago for a job.",
                utterances: &["session_1-u1"],
                time: "last summer",
                people: &["Dana"],
            },
            Scripted {
                summary: "Dana works long weekdays at a design studio downtown.",
                utterances: &["session_1-u2", "session_1-u3"],
                time: "",
                people: &["Dana", "Sam"],
            },
            Scripted {
                summary: "Sam said the late buses keep creating problems for commuters.",
                utterances: &["session_1-u4", "session_1-u5"],
                time: "this morning",
                people: &["Sam"],
            },
        ],
        relations: &[(0, 1, "causal")],
    },
    Session {
        id: "session_2",
        timestamp: "7:30 pm on 2 April, 2023",
        lines: &[
            ("Dana", "I have been seeing all kinds of artworks in museums on weekends."),
            ("Dana", "The museums got me to sign up for an evening drawing class."),
            ("Sam", "Is the class hard?"),
            ("Dana", "It ran late on Tuesday, so I missed the last train home."),
            ("Sam", "Long night then."),
        ],
        events: &[
            Scripted {
                summary: "Dana has been seeing all kinds of artworks in museums on weekends.",
                utterances: &["session_2-u1"],
                time: "weekends",
                people: &["Dana"],
            },
            Scripted {
                summary: "Dana signed up for an evening drawing class.",
                utterances: &["session_2-u2", "session_2-u3"],
                time: "",
                people: &["Dana", "Sam"],
            },
            Scripted {
                summary: "Dana missed her last train home when class ran late.",
                utterances: &["session_2-u4", "session_2-u5"],
                time: "Tuesday",
                people: &["Dana"],
            },
        ],
        relations: &[(0, 1, "motivation"), (1, 2, "causal")],
    },
    Session {
        id: "session_3",
        timestamp: "3:15 pm on 20 May, 2023",
        lines: &[
            ("Dana", "I started painting landscapes, a form of art I always wanted to create."),
            ("Dana", "I also experimented with stained glass designs."),
            ("Dana", "Finally unpacked the last boxes from moving to the new city."),
            ("Sam", "I had to fill out specific forms for a camping permit."),
            ("Dana", "Have fun!"),
        ],
        events: &[
            Scripted {
                summary: "Dana started painting landscapes, art forms she wanted to create.",
                utterances: &["session_3-u1"],
                time: "",
                people: &["Dana"],
            },
            Scripted {
                summary: "Dana also experimented with stained glass designs.",
                utterances: &["session_3-u2"],
                time: "",
                people: &["Dana"],
            },
            Scripted {
                summary: "Dana finished unpacking after moving to the new city.",
                utterances: &["session_3-u3"],
                time: "",
                people: &["Dana"],
            },
            Scripted {
                summary: "Sam filled out specific forms for a camping permit.",
                utterances: &["session_3-u4", "session_3-u5"],
                time: "June",
                people: &["Sam"],
            },
        ],
        relations: &[(0, 1, "temporal")],
    },
];

fn utterances(s: &Session) -> Vec<Utterance> {
    s.lines
        .iter()
        .enumerate()
        .map(|(i, (speaker, text))| Utterance {
            id: format!("{}-u{}", s.id, i + 1),
            session_id: s.id.to_string(),
            speaker: speaker.to_string(),
            timestamp: s.timestamp.to_string(),
            text: text.to_string(),
        })
        .collect()
}

fn extraction_reply(s: &Session) -> String {
    let events: Vec<_> = s
        .events
        .iter()
        .enumerate()
        .map(|(i, e)| {
            serde_json::json!({
                "id": format!("E{}", i + 1),
                "summary": e.summary,
                "utterance_ids": e.utterances,
                "time": e.time,
                "people": e.people,
            })
        })
        .collect();
    serde_json::json!({ "events": events }).to_string()
}

fn relation_reply(s: &Session) -> String {
    let relations: Vec<_> = s
        .relations
        .iter()
        .map(|(a, b, kind)| {
            serde_json::json!({
                "source": format!("E{}", a + 1),
                "target": format!("E{}", b + 1),
                "type": kind,
                "evidence": s.events[*b].utterances,
            })
        })
        .collect();
    serde_json::json!({ "relations": relations }).to_string()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let write = std::env::args().any(|a| a == "--write");
    let config = Config::default();
    let embedder = HashEmbedder::new(config.embedding_dim, config.embedding_seed);
    let mut records: Vec<ReplayRecord> = Vec::new();
    let mut record = |key: String, text: String| {
        records.push(ReplayRecord {
            key,
            response_text: text,
        })
    };

    // Ingestion: the relation prompt shows the segmented events, so segment
    // once with the extraction reply in place to learn its key.
    let mut ingest_replay = ReplayProvider::new();
    let batches: Vec<Vec<Utterance>> = SESSIONS.iter().map(utterances).collect();
    for (s, batch) in SESSIONS.iter().zip(&batches) {
        let key = replay_key(TemplateId::EventExtraction, &bindings([("dialog", render_dialog(batch))]));
        ingest_replay.insert(key.clone(), extraction_reply(s));
        record(key, extraction_reply(s));
        let gw = Gateway::new(&ingest_replay, &config);
        let events = segment_events(batch, &gw, &embedder)?.value;
        let key = replay_key(TemplateId::RelationExtraction, &bindings([("events", render_events(&events))]));
        ingest_replay.insert(key.clone(), relation_reply(s));
        record(key, relation_reply(s));
    }
    let mut store = MemoryStore::new(config.clone());
    {
        let gw = Gateway::new(&ingest_replay, &config);
        for batch in &batches {
            ingest_session(&mut store, batch, &gw, &embedder)?;
        }
    }

    let id_of = |summary: &str| -> String {
        store
            .graph
            .events()
            .find(|e| e.summary == summary)
            .map(|e| e.id.clone())
            .unwrap_or_else(|| panic!("no event `{summary}`"))
    };
    let [a, j, s] = [0, 1, 2].map(|i| id_of(SESSIONS[0].events[i].summary));
    let [m, c, n] = [0, 1, 2].map(|i| id_of(SESSIONS[1].events[i].summary));
    let [p, g, r, x] = [0, 1, 2, 3].map(|i| id_of(SESSIONS[2].events[i].summary));

    record(
        replay_key(TemplateId::Planner, &bindings([("question", QUESTION)])),
        SUBGOALS
            .iter()
            .enumerate()
            .map(|(i, g)| format!("Sub-goal {}: {g}", i + 1))
            .collect::<Vec<_>>()
            .join("\n"),
    );
    let selection = |ids: &[&String], why: &str| format!("Selected Nodes: [{}]\nReasoning: {why}", ids.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "));
    record(
        replay_key(TemplateId::NodeSelection, &bindings([("question", QUESTION)])),
        selection(&[&a, &m, &s], "relocation, art interest and a city event"),
    );

    let decide = |question: &str, id: &String, kind: ActionKind, sat: &[usize], next: &[&String], why: &str| {
        let event = store.graph.get(id).expect("scripted id exists");
        let key = replay_key(
            TemplateId::ActionDecision,
            &bindings([("question", question.to_string()), ("current_info", node_info(event))]),
        );
        let action = Action {
            kind,
            next_nodes: next.iter().map(|s| s.to_string()).collect(),
            satisfied_subgoals: sat.to_vec(),
            reasoning: why.to_string(),
        };
        (key, action.to_response_text())
    };
    use ActionKind::{Answer, Expand, Skip};
    let script = [
        decide(QUESTION, &a, Expand, &[1], &[&j], "the move; the job may say more about the city"),
        decide(QUESTION, &m, Expand, &[2], &[&c], "art interest after the move"),
        decide(QUESTION, &s, Skip, &[], &[], "commute, unrelated to art"),
        decide(QUESTION, &j, Expand, &[1], &[], "confirms the new city"),
        decide(QUESTION, &c, Expand, &[2], &[&n], "an art class; no artwork named yet"),
        decide(QUESTION, &n, Skip, &[], &[], "travel detail"),
        decide(REFINED, &p, Expand, &[2], &[&g], "painting is one art form"),
        decide(REFINED, &r, Expand, &[1], &[], "places the art after the move"),
        decide(REFINED, &x, Skip, &[], &[], "camping, unrelated"),
        decide(REFINED, &g, Answer, &[1, 2, 3], &[], "stained glass completes the list"),
    ];
    for (key, text) in script {
        record(key, text);
    }

    record(
        replay_key(
            TemplateId::QueryRefinement,
            &bindings([
                ("original_question", QUESTION.to_string()),
                ("unsatisfied_text", format!("3. {}", SUBGOALS[2])),
            ]),
        ),
        format!("Analysis: the artworks themselves are still missing.\nNew Query: {REFINED}\nTarget Sub-goals: [3]"),
    );
    record(
        replay_key(TemplateId::NodeSelection, &bindings([("question", REFINED)])),
        selection(&[&p, &r, &x], "creative activity and timing in the latest session"),
    );
    record(
        replay_key(TemplateId::ResponseGeneration, &bindings([("question", QUESTION)])),
        ANSWER.to_string(),
    );
    drop(record);

    let replay = ReplayProvider::from_records(records.clone());
    let gw = Gateway::new(&replay, &config);
    let result = run_search(QUESTION, &store, &gw, &embedder, &config)?;
    for t in &result.trace {
        println!(
            "round {} path {} {} {:.3} {:?} next={:?} sat={:?}",
            t.round, t.path, t.node, t.priority, t.action, t.next_nodes, t.satisfied_subgoals
        );
    }
    for w in &result.warnings {
        println!("warning: {w}");
    }
    println!("start nodes: {:?}", result.start_nodes);
    println!(
        "explored {} kept {} satisfaction {:?}",
        result.trace.len(),
        result.evidence.len(),
        result.plan.bits()
    );
    println!("answer: {}", result.answer);

    assert_eq!(result.plan.subgoals.len(), 3);
    assert_eq!(result.start_nodes.first().map(Vec::len), Some(3));
    assert!(result.stats.refined && result.stats.exploration_rounds == 2);
    assert_eq!(result.plan.bits(), vec![1, 1, 1]);
    assert_eq!((result.trace.len(), result.evidence.len()), (10, 7));
    assert_eq!(result.answer, ANSWER);

    if write {
        let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/case_study");
        fs::create_dir_all(&dir)?;
        let mut sessions = String::new();
        for u in batches.iter().flatten() {
            sessions.push_str(&serde_json::to_string(u)?);
            sessions.push('\n');
        }
        fs::write(dir.join("sessions.jsonl"), sessions)?;
        let mut replay_lines = String::new();
        let unique: BTreeMap<&str, &str> = records.iter().map(|r| (r.key.as_str(), r.response_text.as_str())).collect();
        for (key, text) in unique {
            replay_lines.push_str(&serde_json::to_string(&ReplayRecord {
                key: key.to_string(),
                response_text: text.to_string(),
            })?);
            replay_lines.push('\n');
        }
        fs::write(dir.join("replay.jsonl"), replay_lines)?;
        store.save(&dir.join("store.json"))?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
