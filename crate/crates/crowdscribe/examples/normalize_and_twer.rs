//! Text normalization and transcription error rates.
//!
//! Shows how raw worker text is canonicalized, how a single hypothesis is
//! aligned against its reference, and how error counts pool into a
//! micro-averaged TWER.
//!
//! ```bash
//! cargo run --example normalize_and_twer
//! ```

use crowdscribe::corpus::normalize_text;
use crowdscribe::metrics::{breakdown, edit_align, EditOp, ErrorBreakdown};

fn main() -> crowdscribe::Result<()> {
    // Normalization lowercases, strips punctuation, and turns a bare "?"
    // into the reserved unknown token.
    let raw = "The Curfew tolls, the knell of parting day ?";
    let hyp = normalize_text(raw);
    println!("raw:        {raw}");
    println!("normalized: {}", hyp.joined());

    let reference = normalize_text("the curfew tolls the knell of parting day tonight");
    println!("reference:  {}", reference.joined());

    // Word-level alignment with the match > substitute > delete > insert
    // tie-break, so the op sequence is deterministic.
    let alignment = edit_align(&hyp, &reference);
    println!("\ndistance {} with ops:", alignment.distance);
    for op in &alignment.ops {
        let h = op.hyp_index.map(|i| hyp.tokens()[i].as_str()).unwrap_or("-");
        let r = op.ref_index.map(|i| reference.tokens()[i].as_str()).unwrap_or("-");
        let tag = match op.op {
            EditOp::Match => "match",
            EditOp::Substitute => "sub",
            EditOp::Delete => "del",
            EditOp::Insert => "ins",
        };
        println!("  {tag:<6} {h:<12} {r}");
    }

    // Micro-averaging pools raw counts before dividing, so long utterances
    // weigh more than short ones.
    let pairs = [
        ("the cat sat on the mat", "the cat sat on the mat"),
        ("the dog on mat", "the dog sat on the mat"),
        ("a cat sat", "the cat sat"),
    ];
    let mut pooled = ErrorBreakdown::default();
    println!("\nper-utterance and pooled rates:");
    for (h, r) in pairs {
        let b = breakdown(&normalize_text(h), &normalize_text(r))?;
        println!(
            "  twer {:5.1}%  del {} ins {} sub {}  | {h}",
            100.0 * b.twer(),
            b.deletions,
            b.insertions,
            b.substitutions
        );
        pooled.merge(&b);
    }
    println!(
        "  micro-averaged TWER over {} reference words: {:.2}%",
        pooled.ref_words,
        100.0 * pooled.twer()
    );
    Ok(())
}
