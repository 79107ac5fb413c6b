//! Word-level confidence estimation.
//!
//! Trains the word confidence model on labeled alignments from a small
//! synthetic corpus, inspects what the model learned, and then scores an
//! out-of-corpus transcript word by word against its peers.
//!
//! ```bash
//! cargo run --example word_confidence
//! ```

use crowdscribe::confidence::{extract_word_features, score_words, train_word_cem, Lexicon};
use crowdscribe::corpus::{normalize_text, TokenSeq};
use crowdscribe::fusion::{build_lattice, FusionConfig};
use crowdscribe::pipeline::{word_training_data, EmissionProvider, PipelineConfig};
use crowdscribe::synth::{generate, SynthConfig};

fn main() -> crowdscribe::Result<()> {
    // A small generated corpus stands in for real crowd submissions: the
    // training rows are words labeled correct or not by alignment against
    // adjudicated references.
    let synth = generate(&SynthConfig {
        seed: 29,
        scale: 0.15,
        ..SynthConfig::default()
    })?;
    let cfg = PipelineConfig::default();
    let emissions = EmissionProvider::Memory(synth.emissions.clone());
    let rows = word_training_data(&synth.corpus, &cfg.train_subsets, &cfg, &emissions)?;
    let correct = rows.iter().filter(|r| r.correct).count();
    println!(
        "training rows: {} words, {:.1}% labeled correct",
        rows.len(),
        100.0 * correct as f64 / rows.len() as f64
    );

    let features: Vec<_> = rows.iter().map(|r| r.features).collect();
    let labels: Vec<bool> = rows.iter().map(|r| r.correct).collect();
    let model = train_word_cem(&features, &labels)?;

    // Weights are on standardized inputs, so their magnitudes are comparable.
    let mut ranked: Vec<(&str, f64)> = model
        .feature_names
        .iter()
        .map(String::as_str)
        .zip(model.weights.iter().copied())
        .collect();
    ranked.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    println!("\nstandardized weights:");
    for (name, w) in ranked {
        println!("  {name:<20} {w:+.3}");
    }

    // Score one worker's transcript against four peers. No acoustic scores
    // here, so the model leans on agreement and lexical features.
    let texts = [
        "she sells sea shells by the sea shore ?",
        "she sells sea shells by the sea shore",
        "she sells seashells by the sea shore",
        "she sells sea shells by the shore",
        "she swells sea shells by the sea shore",
    ];
    let transcripts: Vec<TokenSeq> = texts.iter().map(|t| normalize_text(t)).collect();
    let lattice = build_lattice(&transcripts, &FusionConfig::default())?;
    let lexicon = Lexicon::from_words(
        "she sells sea shells by the shore and many other common words"
            .split_whitespace(),
    );
    for source in [0, 4] {
        let word_feats = extract_word_features(&lattice, source, None, 0.62, &lexicon)?;
        let tokens = lattice.readback(source);
        let confidences = score_words(&model, &word_feats, tokens.tokens())?;
        println!("\nscored transcript (source {source} of {}):", lattice.n_sources());
        for ((tok, conf), feats) in tokens.tokens().iter().zip(&confidences).zip(&word_feats) {
            println!(
                "  {tok:<10} confidence {conf:.3}  (agreement {:.2}, oov {})",
                feats.agreement, feats.oov_flag as u8
            );
        }
    }
    println!("\nthe unknown marker is pinned to zero; the misheard word with no");
    println!("peer support lands far below the words all five workers agree on.");
    Ok(())
}
