use eventmem::harness::{bleu1, token_f1};

use crate::ensure;

/// `(prediction, gold, f1, bleu1)` computed by an independent reference
/// scorer (SQuAD-style F1 with articles `an`/`the`; unsmoothed sentence
/// BLEU restricted to unigrams).
const REFERENCE: [(&str, &str, f64, f64); 20] = [
    ("The speaker created paintings and stained glass artworks after moving.", "paintings and stained glass", 0.6153846153846153, 0.4),
    ("paintings", "Paintings and stained glass artworks", 0.33333333333333337, 0.01831563888873418),
    ("7 May 2023", "7 May, 2023", 1.0, 1.0),
    ("She moved to Chicago.", "Chicago", 0.4, 0.25),
    ("an apple a day", "the apple every day", 0.6666666666666666, 0.5),
    ("Yes", "no", 0.0, 0.0),
    ("", "something", 0.0, 0.0),
    ("something", "", 0.0, 0.0),
    ("", "", 1.0, 0.0),
    ("the the the", "the", 1.0, 0.3333333333333333),
    ("cat cat dog", "cat dog dog", 0.6666666666666666, 0.6666666666666666),
    ("New York City", "new york", 0.8, 0.6666666666666666),
    ("2022", "In 2022", 0.6666666666666666, 0.36787944117144233),
    ("Running, hiking & swimming!", "hiking and swimming", 0.6666666666666666, 0.6666666666666666),
    ("last summer", "summer of 2022", 0.4, 0.3032653298563167),
    ("He adopted a puppy named Max", "a puppy", 0.5, 0.3333333333333333),
    ("pottery painting pottery", "pottery", 0.5, 0.3333333333333333),
    ("Caroline's mother", "caroline s mother", 0.4, 0.3032653298563167),
    ("A B C D E", "e d c b a", 1.0, 1.0),
    ("transgender rights activism", "LGBTQ activism and transgender rights", 0.7499999999999999, 0.513417119032592),
];

pub fn check() -> Result<String, String> {
    let worked: [(&str, &str, f64, f64); 5] = [
        ("Chicago", "Chicago", 1.0, 1.0),
        ("a b", "b c", 0.5, 0.5),
        ("The Painting", "painting", 1.0, 0.5),
        ("a b b", "a b", 0.8, 2.0 / 3.0),
        ("a", "a b c d", 0.4, (-3.0f64).exp()),
    ];
    for (pred, gold, f1, bleu) in worked.iter().chain(REFERENCE.iter()) {
        let got_f1 = token_f1(pred, gold);
        let got_bleu = bleu1(pred, gold);
        ensure!((got_f1 - f1).abs() <= 1e-9, "f1({pred:?}, {gold:?}) = {got_f1}, expected {f1}");
        ensure!((got_bleu - bleu).abs() <= 1e-9, "bleu1({pred:?}, {gold:?}) = {got_bleu}, expected {bleu}");
        ensure!((0.0..=1.0).contains(&got_f1) && (0.0..=1.0).contains(&got_bleu), "out of range");
    }
    ensure!(token_f1("", "") == 1.0, "both-empty F1");
    Ok(format!("{} worked + {} reference cases", worked.len(), REFERENCE.len()))
}
