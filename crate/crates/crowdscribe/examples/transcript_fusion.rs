//! Multi-transcript fusion by confidence-weighted voting.
//!
//! Aligns five noisy transcripts of the same utterance into a word lattice,
//! then votes column by column. Plurality voting (alpha = 1) repeats the
//! majority's mistake on one column; mixing in word confidences recovers the
//! correct word. Finishes with a grid search for the best mixing weight.
//!
//! ```bash
//! cargo run --example transcript_fusion
//! ```

use crowdscribe::corpus::{normalize_text, TokenSeq};
use crowdscribe::fusion::{build_lattice, fuse, tune_alpha, FusionConfig, FusionInput};
use crowdscribe::metrics::breakdown;

fn flat(seq: &TokenSeq, value: f64) -> Vec<f64> {
    vec![value; seq.tokens().len()]
}

fn main() -> crowdscribe::Result<()> {
    let reference = normalize_text("the quick brown fox jumps over the lazy dog");

    // Two careful workers and three hasty ones. The hasty majority agrees on
    // "jumped", and two of them picked up a filler word.
    let texts = [
        "the quick brown fox jumps over the lazy dog",
        "the quick brown fox jumps over lazy dog",
        "the quick brown fix jumped over uh the lazy dog",
        "quick brown fix jumped over uh the lazy dog",
        "the quack brown fox jumped over the lazy dog",
    ];
    let worker_confidence = [0.90, 0.80, 0.40, 0.35, 0.50];
    let transcripts: Vec<TokenSeq> = texts.iter().map(|t| normalize_text(t)).collect();
    let confidences: Vec<Vec<f64>> = transcripts
        .iter()
        .zip(worker_confidence)
        .map(|(t, c)| flat(t, c))
        .collect();

    let config = FusionConfig::default();
    let lattice = build_lattice(&transcripts, &config)?;
    println!("aligned lattice ({} sources, {} columns):", lattice.n_sources(), lattice.columns().len());
    let widths: Vec<usize> = lattice
        .columns()
        .iter()
        .map(|col| col.iter().flatten().map(|w| w.len()).max().unwrap_or(1))
        .collect();
    for source in 0..lattice.n_sources() {
        let mut line = String::from(" ");
        for (col, width) in lattice.columns().iter().zip(&widths) {
            let cell = col[source].as_deref().unwrap_or("-");
            line.push_str(&format!(" {cell:<width$}"));
        }
        println!("{line}");
    }

    println!("\nfused output by mixing weight:");
    for alpha in [1.0, 0.8, 0.0] {
        let fused = fuse(&transcripts, &confidences, &FusionConfig { alpha, ..config })?;
        let twer = 100.0 * breakdown(&fused, &reference)?.twer();
        println!("  alpha {alpha:.2}  twer {twer:5.1}%  {}", fused.joined());
    }
    println!("\nplurality repeats the majority's \"jumped\" and only confidence");
    println!("weighting flips that column; the filler is outvoted either way.");

    // Grid search over alpha in 0.05 steps against held references.
    let inputs = vec![FusionInput {
        reference: reference.clone(),
        transcripts,
        confidences,
    }];
    let tuning = tune_alpha(&inputs, &config)?;
    let at = |alpha: f64| {
        tuning
            .grid
            .iter()
            .find(|(a, _)| (a - alpha).abs() < 1e-9)
            .map(|(_, t)| 100.0 * t)
            .unwrap_or(f64::NAN)
    };
    println!(
        "\ntuned alpha {:.2} (pooled twer {:.1}% there, {:.1}% at alpha 1.00)",
        tuning.alpha,
        at(tuning.alpha),
        at(1.0)
    );
    Ok(())
}
