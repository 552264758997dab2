use std::process::Command;
use std::time::Instant;

use serde_json::Value;

use crate::ensure;
use crate::support::{case_dir, CASE_ANSWER, CASE_QUESTION};

pub fn check() -> Result<String, String> {
    let dir = case_dir();
    let started = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_mem"))
        .args(["query", "--trace", "--question", CASE_QUESTION, "--store"])
        .arg(dir.join("store.json"))
        .env("MEM_LLM_REPLAY", dir.join("replay.jsonl"))
        // no live endpoint is reachable from this process
        .env_remove("MEM_LLM_URL")
        .env_remove("MEM_EMBED_URL")
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed().as_secs_f64();
    ensure!(out.status.success(), "mem query failed: {}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;

    let subgoals = r["plan"]["subgoals"].as_array().map_or(0, Vec::len);
    ensure!(subgoals == 3, "{subgoals} sub-goals");
    let starts = r["start_nodes"][0].as_array().map_or(0, Vec::len);
    ensure!(starts == 3, "{starts} start nodes");
    ensure!(r["stats"]["initial_nodes"] == 3, "initial_nodes {}", r["stats"]["initial_nodes"]);
    ensure!(
        r["stats"]["refined"] == true && r["stats"]["exploration_rounds"] == 2 && r["start_nodes"].as_array().map_or(0, Vec::len) == 2,
        "expected exactly one refinement round, stats {}",
        r["stats"]
    );
    ensure!(
        r["plan"]["satisfaction"] == serde_json::json!([true, true, true]),
        "satisfaction {}",
        r["plan"]["satisfaction"]
    );
    let explored = r["trace"].as_array().map_or(0, Vec::len);
    let kept = r["evidence"].as_array().map_or(0, Vec::len);
    ensure!((explored, kept) == (10, 7), "explored {explored}, kept {kept}");
    ensure!(r["stats"]["kept_nodes"] == 7 && r["used_fallback"] == false, "kept_nodes {}", r["stats"]["kept_nodes"]);
    ensure!(r["answer"] == CASE_ANSWER, "answer {}", r["answer"]);
    ensure!(elapsed < 2.0, "took {elapsed:.2}s");
    Ok(format!("10 explored, 7 kept, s=[1,1,1], {elapsed:.2}s wall"))
}
