//! Randomized invariants over the text, alignment, fusion, and loss layers.

use crowdscribe::corpus::{normalize_text, TokenSeq};
use crowdscribe::ctc::EmissionMatrix;
use crowdscribe::fusion::{build_lattice, fuse, FusionConfig};
use crowdscribe::metrics::{edit_align, EditOp};
use proptest::prelude::*;

/// A tiny vocabulary so random transcripts actually collide.
fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "an", "cat", "cart", "dog", "the", "th'e"])
        .prop_map(String::from)
}

fn tokens(max_len: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(word(), 0..=max_len)
}

fn seq(tokens: &[String]) -> TokenSeq {
    TokenSeq::from_tokens(tokens.iter().map(|t| normalize_text(t).joined()))
        .expect("vocabulary words normalize to valid tokens")
}

proptest! {
    #[test]
    fn normalize_is_idempotent(raw in "[ -~]{0,60}") {
        let once = normalize_text(&raw);
        let twice = normalize_text(&once.joined());
        prop_assert_eq!(&once, &twice);
    }

    #[test]
    fn normalized_tokens_are_valid(raw in "[ -~]{0,60}") {
        let toks = normalize_text(&raw);
        // Round-tripping through the validating constructor must succeed.
        prop_assert!(TokenSeq::from_tokens(toks.tokens().iter().map(String::as_str)).is_ok());
    }

    #[test]
    fn edit_distance_is_a_metric(a in tokens(8), b in tokens(8)) {
        let (a, b) = (seq(&a), seq(&b));
        let ab = edit_align(&a, &b).distance;
        let ba = edit_align(&b, &a).distance;
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(edit_align(&a, &a).distance, 0);
        let lo = a.len().abs_diff(b.len());
        let hi = a.len().max(b.len());
        prop_assert!(lo <= ab && ab <= hi);
    }

    #[test]
    fn edit_ops_replay_both_sequences(a in tokens(8), b in tokens(8)) {
        let (a, b) = (seq(&a), seq(&b));
        let alignment = edit_align(&a, &b);
        let errors = alignment.ops.iter().filter(|o| o.op != EditOp::Match).count();
        prop_assert_eq!(errors, alignment.distance);
        let hyp: Vec<&String> = alignment.ops.iter().filter_map(|o| o.hyp_index).map(|i| &a.tokens()[i]).collect();
        let reference: Vec<&String> = alignment.ops.iter().filter_map(|o| o.ref_index).map(|i| &b.tokens()[i]).collect();
        prop_assert_eq!(hyp, a.tokens().iter().collect::<Vec<_>>());
        prop_assert_eq!(reference, b.tokens().iter().collect::<Vec<_>>());
    }

    #[test]
    fn lattice_readback_preserves_sources(ts in prop::collection::vec(tokens(6), 1..=5)) {
        let transcripts: Vec<TokenSeq> = ts.iter().map(|t| seq(t)).collect();
        let lattice = build_lattice(&transcripts, &FusionConfig::default()).unwrap();
        // Alignment may reorder sources, but every transcript must read back
        // out of the lattice exactly, gaps removed.
        let mut got: Vec<String> = (0..lattice.n_sources()).map(|s| lattice.readback(s).joined()).collect();
        let mut want: Vec<String> = transcripts.iter().map(TokenSeq::joined).collect();
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn fused_words_come_from_the_inputs(
        ts in prop::collection::vec(tokens(6), 2..=5),
        alpha in 0.0f64..=1.0,
    ) {
        let transcripts: Vec<TokenSeq> = ts.iter().map(|t| seq(t)).collect();
        let confidences: Vec<Vec<f64>> = transcripts.iter().map(|t| vec![0.5; t.len()]).collect();
        let config = FusionConfig { alpha, ..FusionConfig::default() };
        let fused = fuse(&transcripts, &confidences, &config).unwrap();
        for w in fused.tokens() {
            prop_assert!(
                transcripts.iter().any(|t| t.tokens().contains(w)),
                "fused word {:?} not proposed by any source", w
            );
        }
        // The lattice bounds the output: at most one word per column.
        let lattice = build_lattice(&transcripts, &config).unwrap();
        prop_assert!(fused.len() <= lattice.columns().len());
    }

    #[test]
    fn ctc_loss_is_nonnegative_on_normalized_rows(
        raw in prop::collection::vec(prop::collection::vec(0.05f64..1.0, 3), 1..=6),
        labels in prop::collection::vec(1usize..=2, 1..=3),
    ) {
        let rows: Vec<Vec<f64>> = raw.iter().map(|r| {
            let total: f64 = r.iter().sum();
            r.iter().map(|p| (p / total).ln()).collect()
        }).collect();
        let vocab = vec!["<b>".to_string(), "a".to_string(), "b".to_string()];
        let em = EmissionMatrix::new(vocab, rows).unwrap();
        let loss = crowdscribe::ctc::ctc_loss(&em, &labels).unwrap();
        // Loss is -log of a probability: nonnegative, or infinite when the
        // label sequence needs more frames than the matrix has.
        prop_assert!(loss >= -1e-9);
    }
}
