use eventmem::harness::aggregate_stats;
use eventmem::search::SearchStats;

use crate::ensure;

const QUESTIONS: usize = 1540;
const EXPAND: u64 = 7348;
const SKIP: u64 = 4230;
const ANSWER: u64 = 17;
const REFINED: usize = 1176;
const KEPT: usize = 4851;

/// Splits `total` over `n` slots as evenly as possible.
fn share(total: u64, n: usize, i: usize) -> u64 {
    total / n as u64 + u64::from((i as u64) < total % n as u64)
}

fn synthetic_log() -> Vec<SearchStats> {
    (0..QUESTIONS)
        .map(|i| {
            let mut s = SearchStats::default();
            s.actions.expand = share(EXPAND, QUESTIONS, i);
            // offset so the skip remainder lands on different questions
            s.actions.skip = share(SKIP, QUESTIONS, (i + 700) % QUESTIONS);
            s.actions.answer = share(ANSWER, QUESTIONS, (i * 3) % QUESTIONS);
            s.total_steps = s.actions.total() as usize;
            if s.total_steps > 0 {
                s.paths = 1;
                s.path_lengths = vec![s.total_steps];
            }
            s.refined = i < REFINED;
            s.exploration_rounds = 1 + u32::from(s.refined);
            s.kept_nodes = share(KEPT as u64, QUESTIONS, (i * 13) % QUESTIONS) as usize;
            s.subgoal_count = 3;
            s.satisfied_count = 3;
            s
        })
        .collect()
}

pub fn check() -> Result<String, String> {
    let log = synthetic_log();
    for s in &log {
        s.check()?;
    }
    // the log must carry exactly the raw counts
    let sum = |f: fn(&SearchStats) -> u64| log.iter().map(f).sum::<u64>();
    ensure!(sum(|s| s.actions.expand) == EXPAND, "expand sum");
    ensure!(sum(|s| s.actions.skip) == SKIP, "skip sum");
    ensure!(sum(|s| s.actions.answer) == ANSWER, "answer sum");
    ensure!(sum(|s| s.kept_nodes as u64) == KEPT as u64, "kept sum");
    ensure!(log.iter().filter(|s| s.refined).count() == REFINED, "refined count");

    let a = aggregate_stats(&log);
    ensure!(a.questions == QUESTIONS, "questions {}", a.questions);
    ensure!(a.total_actions == 11595, "total actions {}", a.total_actions);
    ensure!(
        (a.expand_pct, a.skip_pct, a.answer_pct) == (63.4, 36.5, 0.1),
        "action distribution {} / {} / {}",
        a.expand_pct,
        a.skip_pct,
        a.answer_pct
    );
    ensure!(a.refinement_rate_pct == 76.4, "refinement rate {}", a.refinement_rate_pct);
    ensure!(a.avg_kept_nodes == 3.15, "avg kept {}", a.avg_kept_nodes);
    Ok("63.4 / 36.5 / 0.1, refined 76.4%, kept 3.15".into())
}
