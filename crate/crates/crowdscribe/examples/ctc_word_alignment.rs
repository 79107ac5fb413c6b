//! Forced alignment of a transcript against acoustic evidence.
//!
//! Builds a small character-level emission matrix whose peaks spell
//! "the cat", segments the frame axis per word, and scores two candidate
//! transcripts word by word. The wrong word in the second transcript is
//! the one the acoustic score singles out.
//!
//! ```bash
//! cargo run --example ctc_word_alignment
//! ```

use crowdscribe::corpus::normalize_text;
use crowdscribe::ctc::{ctc_loss, ctc_segment, standard_vocab, word_alignment_scores, EmissionMatrix};

/// One emission row that puts most of the mass on `target`.
fn peaked_row(vocab: &[String], target: &str) -> Vec<f64> {
    let hot = vocab.iter().position(|s| s == target).expect("symbol in vocab");
    let weights: Vec<f64> = (0..vocab.len()).map(|i| if i == hot { 40.0 } else { 1.0 }).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| (w / total).ln()).collect()
}

fn main() -> crowdscribe::Result<()> {
    let vocab = standard_vocab();
    // Frame-by-frame symbol peaks for "the cat": characters, the word
    // separator between words, and a few blanks and held frames thrown in
    // the way a real acoustic model would emit them.
    let path = ["t", "t", "h", "e", "<b>", "|", "c", "a", "a", "<b>", "t", "t"];
    let rows: Vec<Vec<f64>> = path.iter().map(|s| peaked_row(&vocab, s)).collect();
    let em = EmissionMatrix::new(vocab, rows)?;
    println!("emissions: {} frames over {} symbols", em.frames(), em.vocab().len());

    let truth = normalize_text("the cat");
    let loss = ctc_loss(&em, &em.encode_words(truth.tokens())?)?;
    println!("ctc loss for {:?}: {loss:.4} nats", truth.joined());

    println!("\nword segments:");
    for seg in ctc_segment(&em, &truth)? {
        println!(
            "  word {} {:>5}  frames {:>2}..{:<2}",
            seg.word_index,
            truth.tokens()[seg.word_index],
            seg.start_frame,
            seg.end_frame
        );
    }

    // Score the true transcript and a one-word corruption of it. Scores are
    // log s_i, so closer to zero means better supported by the audio.
    for text in ["the cat", "the bat"] {
        let words = normalize_text(text);
        println!("\nper-word acoustic scores for {:?}:", words.joined());
        for score in word_alignment_scores(&em, &words)? {
            println!(
                "  {:>5}  log s = {:8.4}",
                words.tokens()[score.word_index],
                score.log_score
            );
        }
    }
    Ok(())
}
