//! Transcription WER (TWER) and word-level edit alignment.
//!
//! TWER is an ordinary word error rate computed against normalized human
//! transcripts. Corpus-level numbers are micro-averaged: error counts and
//! reference word counts are pooled before dividing, so subsets with more
//! reference words weigh more.

use std::collections::BTreeMap;

use crate::corpus::{Corpus, Subset, TokenSeq};
use crate::error::{Error, Result};

/// One step of an edit alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Match,
    Substitute,
    /// Reference word missing from the hypothesis.
    Delete,
    /// Hypothesis word with no reference counterpart.
    Insert,
}

/// An edit op together with the word positions it touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignedOp {
    pub op: EditOp,
    /// Hypothesis index, absent for deletions.
    pub hyp_index: Option<usize>,
    /// Reference index, absent for insertions.
    pub ref_index: Option<usize>,
}

/// Minimum-cost alignment between a hypothesis and a reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditAlignment {
    pub ops: Vec<AlignedOp>,
    /// Levenshtein distance in words.
    pub distance: usize,
}

/// Aligns `hyp` against `reference` with unit costs.
///
/// Among equal-cost alignments the backtrace prefers, in order: match,
/// substitute, delete, insert. This makes the op sequence deterministic.
pub fn edit_align(hyp: &TokenSeq, reference: &TokenSeq) -> EditAlignment {
    let h = hyp.tokens();
    let r = reference.tokens();
    let n = h.len();
    let m = r.len();
    let mut d = vec![0usize; (n + 1) * (m + 1)];
    let idx = |i: usize, j: usize| i * (m + 1) + j;
    for i in 0..=n {
        d[idx(i, 0)] = i;
    }
    for j in 0..=m {
        d[idx(0, j)] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub_cost = if h[i - 1] == r[j - 1] { 0 } else { 1 };
            let diag = d[idx(i - 1, j - 1)] + sub_cost;
            let del = d[idx(i, j - 1)] + 1;
            let ins = d[idx(i - 1, j)] + 1;
            d[idx(i, j)] = diag.min(del).min(ins);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let mut i = n;
    let mut j = m;
    while i > 0 || j > 0 {
        let cur = d[idx(i, j)];
        if i > 0 && j > 0 && h[i - 1] == r[j - 1] && cur == d[idx(i - 1, j - 1)] {
            ops.push(AlignedOp {
                op: EditOp::Match,
                hyp_index: Some(i - 1),
                ref_index: Some(j - 1),
            });
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && cur == d[idx(i - 1, j - 1)] + 1 {
            ops.push(AlignedOp {
                op: EditOp::Substitute,
                hyp_index: Some(i - 1),
                ref_index: Some(j - 1),
            });
            i -= 1;
            j -= 1;
        } else if j > 0 && cur == d[idx(i, j - 1)] + 1 {
            ops.push(AlignedOp {
                op: EditOp::Delete,
                hyp_index: None,
                ref_index: Some(j - 1),
            });
            j -= 1;
        } else {
            ops.push(AlignedOp {
                op: EditOp::Insert,
                hyp_index: Some(i - 1),
                ref_index: None,
            });
            i -= 1;
        }
    }
    ops.reverse();
    EditAlignment {
        ops,
        distance: d[idx(n, m)],
    }
}

/// Pooled error counts against some body of reference words.
///
/// Rates are computed on demand so that pooling stays exact integer
/// arithmetic until the final division.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ErrorBreakdown {
    pub ref_words: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub substitutions: usize,
}

impl ErrorBreakdown {
    pub fn merge(&mut self, other: &ErrorBreakdown) {
        self.ref_words += other.ref_words;
        self.deletions += other.deletions;
        self.insertions += other.insertions;
        self.substitutions += other.substitutions;
    }

    pub fn errors(&self) -> usize {
        self.deletions + self.insertions + self.substitutions
    }

    fn rate(&self, count: usize) -> f64 {
        if self.ref_words == 0 {
            0.0
        } else {
            count as f64 / self.ref_words as f64
        }
    }

    pub fn del_rate(&self) -> f64 {
        self.rate(self.deletions)
    }

    pub fn ins_rate(&self) -> f64 {
        self.rate(self.insertions)
    }

    pub fn sub_rate(&self) -> f64 {
        self.rate(self.substitutions)
    }

    /// Deletion + insertion + substitution rate.
    pub fn twer(&self) -> f64 {
        self.rate(self.errors())
    }
}

/// Error decomposition of one hypothesis against one reference.
///
/// A non-empty hypothesis against an empty reference is refused: every word
/// would be an insertion and the rate denominator would be zero.
pub fn breakdown(hyp: &TokenSeq, reference: &TokenSeq) -> Result<ErrorBreakdown> {
    if reference.is_empty() && !hyp.is_empty() {
        return Err(Error::InvalidData(
            "non-empty hypothesis against empty reference".to_string(),
        ));
    }
    let alignment = edit_align(hyp, reference);
    let mut b = ErrorBreakdown {
        ref_words: reference.len(),
        ..ErrorBreakdown::default()
    };
    for op in &alignment.ops {
        match op.op {
            EditOp::Match => {}
            EditOp::Substitute => b.substitutions += 1,
            EditOp::Delete => b.deletions += 1,
            EditOp::Insert => b.insertions += 1,
        }
    }
    Ok(b)
}

/// Micro-averaged TWER over a corpus, per subset and overall.
#[derive(Debug, Clone, Default)]
pub struct CorpusTwer {
    pub per_subset: BTreeMap<Subset, ErrorBreakdown>,
    pub total: ErrorBreakdown,
}

/// Scores one hypothesis per utterance against the corpus references.
///
/// Every hypothesis must name a known utterance that carries a reference.
pub fn corpus_twer(corpus: &Corpus, hypotheses: &BTreeMap<String, TokenSeq>) -> Result<CorpusTwer> {
    let mut out = CorpusTwer::default();
    for (utt_id, hyp) in hypotheses {
        let utt = corpus
            .utterance(utt_id)
            .ok_or_else(|| Error::InvalidData(format!("hypothesis for unknown utterance {utt_id}")))?;
        let reference = utt.reference.as_ref().ok_or_else(|| {
            Error::InvalidData(format!("utterance {utt_id} has no reference transcript"))
        })?;
        let b = breakdown(hyp, reference)?;
        out.per_subset.entry(utt.subset).or_default().merge(&b);
        out.total.merge(&b);
    }
    Ok(out)
}

/// Pools every response against its reference (the "raw" quality of the
/// crowd). Utterances without references are skipped.
pub fn raw_corpus_twer(corpus: &Corpus) -> Result<CorpusTwer> {
    let mut out = CorpusTwer::default();
    for r in corpus.responses() {
        let utt = corpus.utterance(&r.utterance_id).ok_or_else(|| {
            Error::Internal(format!("response references unknown utterance {}", r.utterance_id))
        })?;
        let Some(reference) = utt.reference.as_ref() else {
            continue;
        };
        let b = breakdown(&r.text, reference)?;
        out.per_subset.entry(utt.subset).or_default().merge(&b);
        out.total.merge(&b);
    }
    Ok(out)
}

/// Inter-transcript agreement for one response among its peers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeerAgreement {
    /// Mean normalized edit distance to the other responses.
    pub mean_peer_distance: f64,
    /// Distance to the closest peer.
    pub min_peer_distance: f64,
}

/// Normalized distance between two sequences: edit distance over the longer
/// length, 0.0 when both are empty.
pub fn normalized_distance(a: &TokenSeq, b: &TokenSeq) -> f64 {
    let denom = a.len().max(b.len());
    if denom == 0 {
        return 0.0;
    }
    edit_align(a, b).distance as f64 / denom as f64
}

/// Pairwise agreement features for a set of peer transcripts of the same
/// utterance. A lone transcript gets maximal distances (1.0) since nothing
/// corroborates it.
pub fn agreement_features(transcripts: &[TokenSeq]) -> Vec<PeerAgreement> {
    let n = transcripts.len();
    if n == 1 {
        return vec![PeerAgreement {
            mean_peer_distance: 1.0,
            min_peer_distance: 1.0,
        }];
    }
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = normalized_distance(&transcripts[i], &transcripts[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    (0..n)
        .map(|i| {
            let mut sum = 0.0;
            let mut min = f64::INFINITY;
            for j in 0..n {
                if i == j {
                    continue;
                }
                sum += dist[i * n + j];
                min = min.min(dist[i * n + j]);
            }
            PeerAgreement {
                mean_peer_distance: sum / (n - 1) as f64,
                min_peer_distance: min,
            }
        })
        .collect()
}
