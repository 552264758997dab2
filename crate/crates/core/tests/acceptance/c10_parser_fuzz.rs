use std::panic::{catch_unwind, AssertUnwindSafe};

use eventmem::llm::{
    parse_action_decision, parse_coreference, parse_event_extraction, parse_node_selection, parse_refined_query,
    parse_relation_extraction, parse_response, parse_subgoals, ActionKind, ParseError,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ensure;

const INPUTS: usize = 10_000;

const SEEDS: [&str; 14] = [
    "ACTION: EXPAND\nNEXT_NODES: [E3, E7]\nSATISFIED_SUBGOALS: [1, 3]\nREASONING: relevant",
    "ACTION: SKIP\nNEXT_NODES: NONE\nSATISFIED_SUBGOALS: []\nREASONING: off topic",
    "ACTION: ANSWER\nNEXT_NODES: NONE\nSATISFIED_SUBGOALS: [1,2,3]\nREASONING: done",
    "**ACTION:** [Expand]\nNEXT_NODES: [E1, BOGUS, E2, E3, E4]\nSATISFIED_SUBGOALS: [0, 2, 99]",
    "Sub-goal 1: [Where did they move]\nSub-goal 2: When\nSub-goal 3: What art",
    "Sub-goal 1: a\nSub-goal 2: b\nSub-goal 3: c\nSub-goal 4: d\nSub-goal 5: e\nSub-goal 6: f",
    "Selected Nodes: [E1, E4]\nReasoning: best matches",
    "Selected Nodes: [E1, E2, E3, E4, E5, E6, E7]",
    "New Query: What specific forms of art did the speaker create?\nTarget Sub-goals: [3]",
    r#"{"same_event":true,"has_overlap":false,"relation_type":null,"reasoning":"r"}"#,
    r#"{"same_event":false,"has_overlap":true,"relation_type":"follow_up","reasoning":"r"}"#,
    r#"{"events":[{"id":"E1","summary":"s","utterance_ids":["u1"],"time":"May","people":["a","b","c","d"]}]}"#,
    "```json\n{\"relations\":[{\"source\":\"E1\",\"target\":\"E2\",\"type\":\"causal\",\"evidence\":[\"u1\"]}]}\n```",
    "ANSWER: The speaker created paintings.",
];

const ALPHABET: [&str; 32] = [
    "[", "]", "{", "}", ":", ",", "\"", "\n", " ", "*", "#", "-", "`", "\\", "E1", "E9", "NONE", "ACTION", "SKIP",
    "Sub-goal", "New Query", "Selected Nodes", "null", "true", "9999999999999999999999", "-1", "é", "∑", "\u{0}",
    "\r\n", "```", "ANSWER:",
];

fn random_text(rng: &mut ChaCha8Rng) -> String {
    (0..rng.random_range(0..40))
        .map(|_| {
            if rng.random_bool(0.3) {
                char::from_u32(rng.random_range(0..0x3000)).unwrap_or('?').to_string()
            } else {
                ALPHABET.choose(rng).unwrap().to_string()
            }
        })
        .collect()
}

fn mutate(rng: &mut ChaCha8Rng, seed: &str) -> String {
    let mut chars: Vec<char> = seed.chars().collect();
    for _ in 0..rng.random_range(1..6) {
        let at = rng.random_range(0..=chars.len());
        match rng.random_range(0..5) {
            0 if at < chars.len() => {
                chars.remove(at);
            }
            1 => chars.splice(at..at, random_text(rng).chars()).for_each(drop),
            2 => chars.truncate(at),
            3 if at < chars.len() => chars[at] = *['[', ']', ':', '"', '\n', '{', '}', '0'].choose(rng).unwrap(),
            _ => {
                let dup: Vec<char> = chars[..at].to_vec();
                chars.extend(dup);
            }
        }
    }
    chars.into_iter().collect()
}

/// Runs every parser on `text` and checks the contract of each success.
fn exercise(text: &str, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let valid: Vec<String> = ["E1", "E2", "E3", "E4", "E7"].iter().map(|s| s.to_string()).collect();
    let n = rng.random_range(0..6);
    if let Ok(a) = parse_action_decision(text, &valid, n) {
        let a = a.value;
        ensure!(a.next_nodes.len() <= 3, "more than 3 next nodes");
        ensure!(a.next_nodes.iter().all(|id| valid.contains(id)), "unknown next node");
        ensure!(a.satisfied_subgoals.iter().all(|i| (1..=n).contains(i)), "index outside 1..={n}");
        ensure!(a.kind != ActionKind::Skip || a.satisfied_subgoals.is_empty(), "SKIP with satisfied sub-goals");
        ensure!(a.kind != ActionKind::Answer || a.next_nodes.is_empty(), "ANSWER with next nodes");
    }
    if let Ok(g) = parse_subgoals(text) {
        ensure!((2..=5).contains(&g.value.len()), "{} sub-goals", g.value.len());
    }
    let cap = *[3, 5].choose(rng).unwrap();
    if let Ok(s) = parse_node_selection(text, &valid, cap) {
        ensure!(s.value.len() <= cap && s.value.iter().all(|id| valid.contains(id)), "bad selection");
    }
    if let Ok(q) = parse_refined_query(text) {
        ensure!(!q.value.query.is_empty(), "empty refined query");
    }
    if let Ok(v) = parse_coreference(text) {
        ensure!(!v.value.same_event || v.value.has_overlap, "same_event without overlap");
    }
    if let Ok(ev) = parse_event_extraction(text) {
        ensure!(ev.value.iter().all(|e| e.people.len() <= 3), "more than 3 people");
    }
    let _ = parse_relation_extraction(text);
    let _ = parse_response(text);
    Ok(())
}

fn fixtures() -> Result<(), String> {
    let ids = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let valid = ids(&["E3", "E7"]);
    let a = parse_action_decision(SEEDS[0], &valid, 3).map_err(|e| e.to_string())?.value;
    ensure!(
        a.kind == ActionKind::Expand && a.next_nodes == valid && a.satisfied_subgoals == [1, 3],
        "expand fixture: {a:?}"
    );
    let s = parse_action_decision(SEEDS[1], &valid, 3).map_err(|e| e.to_string())?.value;
    ensure!(s.kind == ActionKind::Skip && s.next_nodes.is_empty(), "skip fixture: {s:?}");
    let ans = parse_action_decision(SEEDS[2], &valid, 3).map_err(|e| e.to_string())?.value;
    ensure!(ans.kind == ActionKind::Answer && ans.satisfied_subgoals == [1, 2, 3], "answer fixture: {ans:?}");
    ensure!(
        parse_action_decision("NEXT_NODES: NONE", &valid, 3) == Err(ParseError::MissingLine("ACTION")),
        "missing ACTION line"
    );

    ensure!(parse_subgoals(SEEDS[4]).map_err(|e| e.to_string())?.value.len() == 3, "three sub-goals");
    ensure!(
        parse_subgoals(SEEDS[5]).map_err(|e| e.to_string())?.value == ["a", "b", "c", "d", "e"],
        "six sub-goals keep five"
    );
    ensure!(parse_subgoals("Sub-goal 1: only").is_err(), "one sub-goal accepted");

    let seven = ids(&["E1", "E2", "E3", "E4", "E5", "E6", "E7"]);
    let sel = |t: &str| parse_node_selection(t, &seven, 5).map(|p| p.value).map_err(|e| e.to_string());
    ensure!(sel(SEEDS[6])? == ["E1", "E4"], "selection fixture");
    ensure!(sel("Selected Nodes: [E1, BOGUS, E2]")? == ["E1", "E2"], "bogus id kept");
    ensure!(sel(SEEDS[7])? == ["E1", "E2", "E3", "E4", "E5"], "cap not applied");
    ensure!(parse_node_selection("Reasoning: none", &seven, 5).is_err(), "missing line accepted");

    let r = parse_refined_query(SEEDS[8]).map_err(|e| e.to_string())?.value;
    ensure!(
        r.query == "What specific forms of art did the speaker create?" && r.target_subgoals == [3],
        "refined fixture: {r:?}"
    );
    let no_target = parse_refined_query("New Query: where").map_err(|e| e.to_string())?;
    ensure!(no_target.value.target_subgoals.is_empty() && !no_target.warnings.is_empty(), "missing targets");
    ensure!(parse_refined_query("New Query:") == Err(ParseError::EmptyQuery), "empty query accepted");

    let merge = parse_coreference(r#"{"same_event":true,"has_overlap":true,"relation_type":null,"reasoning":"r"}"#)
        .map_err(|e| e.to_string())?;
    ensure!(merge.value.same_event && merge.value.relation_type.is_none(), "merge verdict");
    let link = parse_coreference(SEEDS[10]).map_err(|e| e.to_string())?.value;
    ensure!(
        !link.same_event && link.has_overlap && link.relation_type.as_deref() == Some("follow_up"),
        "link verdict"
    );
    let repaired = parse_coreference(SEEDS[9]).map_err(|e| e.to_string())?;
    ensure!(repaired.value.has_overlap && !repaired.warnings.is_empty(), "repair");
    Ok(())
}

pub fn check() -> Result<String, String> {
    fixtures()?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for i in 0..INPUTS {
        let text = if i % 3 == 0 {
            random_text(&mut rng)
        } else {
            let seed = *SEEDS.choose(&mut rng).unwrap();
            mutate(&mut rng, seed)
        };
        let mut local = ChaCha8Rng::seed_from_u64(i as u64);
        match catch_unwind(AssertUnwindSafe(|| exercise(&text, &mut local))) {
            Ok(Ok(())) => {}
            Ok(Err(e)) => return Err(format!("input {i} {text:?}: {e}")),
            Err(_) => return Err(format!("input {i} panicked: {text:?}")),
        }
    }
    Ok(format!("fixtures exact, {INPUTS} fuzz inputs without a panic"))
}
