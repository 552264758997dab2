//! Token F1 and BLEU-1 on a few prediction/gold pairs.
//!
//! ```text
//! cargo run --example answer_metrics
//! ```

use eventmem::harness::{bleu1, normalize_answer, token_f1};

fn main() {
    let pairs = [
        ("Chicago", "Chicago"),
        ("The Painting", "painting"),
        ("a b", "b c"),
        ("a b b", "a b"),
        ("a", "a b c d"),
        ("She painted landscapes and made stained glass.", "paintings and stained glass"),
        ("7 May 2023", "7 May, 2023"),
        ("", "anything"),
    ];
    println!("{:<48} {:<30} {:>7} {:>7}", "prediction", "gold", "F1", "BLEU-1");
    for (pred, gold) in pairs {
        println!("{pred:<48} {gold:<30} {:>7.4} {:>7.4}", token_f1(pred, gold), bleu1(pred, gold));
    }
    println!("\nnormalized: {:?}", normalize_answer("The artist's \"new\" paintings, an exhibit!"));
}
