//! Answer-quality metrics.
//!
//! Token F1 normalizes SQuAD-style: lowercase, delete ASCII punctuation,
//! drop the articles `an` and `the`, split on whitespace. `a` is kept, so
//! `f1("a b", "b c") == 0.5`. BLEU-1 uses the same lowercasing and
//! punctuation removal but keeps every word.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;

fn articles() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b(an|the)\b").expect("valid regex"))
}

fn strip_punctuation(text: &str) -> String {
    text.to_lowercase().chars().filter(|c| !c.is_ascii_punctuation()).collect()
}

/// Tokens compared by [`token_f1`].
pub fn normalize_answer(text: &str) -> Vec<String> {
    let cleaned = strip_punctuation(text);
    articles()
        .replace_all(&cleaned, " ")
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Tokens compared by [`bleu1`].
pub fn bleu_tokens(text: &str) -> Vec<String> {
    strip_punctuation(text).split_whitespace().map(str::to_string).collect()
}

fn counts(tokens: &[String]) -> HashMap<&str, usize> {
    let mut m = HashMap::new();
    for t in tokens {
        *m.entry(t.as_str()).or_insert(0) += 1;
    }
    m
}

fn overlap(pred: &[String], gold: &[String]) -> usize {
    let gold = counts(gold);
    counts(pred)
        .into_iter()
        .map(|(t, n)| n.min(gold.get(t).copied().unwrap_or(0)))
        .sum()
}

/// Bag-of-tokens F1 in `[0, 1]`. Both empty scores 1, one empty scores 0.
pub fn token_f1(prediction: &str, gold: &str) -> f64 {
    let p = normalize_answer(prediction);
    let g = normalize_answer(gold);
    match (p.is_empty(), g.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let same = overlap(&p, &g);
    if same == 0 {
        return 0.0;
    }
    let precision = same as f64 / p.len() as f64;
    let recall = same as f64 / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Clipped unigram precision times the brevity penalty
/// `min(1, exp(1 - |gold| / |pred|))`. An empty prediction scores 0.
pub fn bleu1(prediction: &str, gold: &str) -> f64 {
    let p = bleu_tokens(prediction);
    let g = bleu_tokens(gold);
    if p.is_empty() || g.is_empty() {
        return 0.0;
    }
    let precision = overlap(&p, &g) as f64 / p.len() as f64;
    let bp = if p.len() > g.len() {
        1.0
    } else {
        (1.0 - g.len() as f64 / p.len() as f64).exp()
    };
    precision * bp
}
