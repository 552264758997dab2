//! Evaluation: answer metrics, search statistics and the benchmark runner.

mod aggregate;
mod bench;
mod metrics;

pub use aggregate::{aggregate_stats, render_table, round_to, AggregateStats, GroupRow, HistogramRow};
pub use bench::{
    load_dataset, run_benchmark, BenchmarkReport, Category, Dataset, QaRecord, QuestionOutcome, ScoreRow,
};
pub use metrics::{bleu1, bleu_tokens, normalize_answer, token_f1};
