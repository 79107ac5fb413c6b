//! ECM: multi-transcript alignment into a word lattice and
//! confidence-weighted voting, plus the selection baselines.
//!
//! The voting score of word `w` at column `i` is
//! `s_i(w) = alpha * N(w,i)/N + (1 - alpha) * c_i(w)`,
//! where `N(w,i)` counts the transcripts proposing `w` there and `c_i(w)` is
//! the mean confidence of those proposers. At `alpha = 1` this is plurality
//! voting (ROVER); at `alpha = 0` confidence alone decides.

use std::collections::BTreeMap;

use rand::Rng;

use crate::corpus::{Response, TokenSeq};
use crate::error::{Error, Result};
use crate::metrics::{edit_align, EditOp, ErrorBreakdown};

/// How transcripts are ordered before progressive alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlignmentOrder {
    /// Descending mean word confidence (ties keep input order).
    #[default]
    ConfidenceDesc,
    /// Exactly the order given by the caller.
    Given,
}

/// Voting and alignment parameters.
#[derive(Debug, Clone, Copy)]
pub struct FusionConfig {
    /// Trade-off between word frequency and confidence, in [0, 1].
    pub alpha: f64,
    /// Confidence assigned to the gap pseudo-candidate.
    pub gap_confidence: f64,
    pub alignment_order: AlignmentOrder,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            alpha: 0.8,
            gap_confidence: 0.5,
            alignment_order: AlignmentOrder::ConfidenceDesc,
        }
    }
}

impl FusionConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.gap_confidence) {
            return Err(Error::Config(format!(
                "gap_confidence {} outside [0, 1]",
                self.gap_confidence
            )));
        }
        Ok(())
    }
}

/// Globally aligns two sequences with unit costs; gaps are `None`.
///
/// Shares the tie-break of [`edit_align`], so the number of gap and mismatch
/// columns equals the edit distance.
pub fn pairwise_align(a: &TokenSeq, b: &TokenSeq) -> (Vec<Option<String>>, Vec<Option<String>>) {
    let alignment = edit_align(a, b);
    let mut out_a = Vec::with_capacity(alignment.ops.len());
    let mut out_b = Vec::with_capacity(alignment.ops.len());
    for op in &alignment.ops {
        match op.op {
            EditOp::Match | EditOp::Substitute => {
                out_a.push(Some(a.tokens()[op.hyp_index.unwrap()].clone()));
                out_b.push(Some(b.tokens()[op.ref_index.unwrap()].clone()));
            }
            EditOp::Delete => {
                out_a.push(None);
                out_b.push(Some(b.tokens()[op.ref_index.unwrap()].clone()));
            }
            EditOp::Insert => {
                out_a.push(Some(a.tokens()[op.hyp_index.unwrap()].clone()));
                out_b.push(None);
            }
        }
    }
    (out_a, out_b)
}

/// A multi-transcript alignment: columns of one slot per source, each slot a
/// word or a gap.
#[derive(Debug, Clone, PartialEq)]
pub struct WordLattice {
    columns: Vec<Vec<Option<String>>>,
    n_sources: usize,
}

impl WordLattice {
    pub fn columns(&self) -> &[Vec<Option<String>>] {
        &self.columns
    }

    pub fn n_sources(&self) -> usize {
        self.n_sources
    }

    /// Reconstructs one source transcript from its non-gap slots.
    pub fn readback(&self, source: usize) -> TokenSeq {
        let tokens: Vec<String> = self
            .columns
            .iter()
            .filter_map(|col| col[source].clone())
            .collect();
        TokenSeq::from_tokens(tokens).expect("lattice slots hold normalized tokens")
    }

    /// The consensus spine word of a column: plurality non-gap word, ties
    /// resolved toward the word of the earliest source proposing a tied word.
    fn spine_word(&self, column: usize) -> Option<String> {
        let col = &self.columns[column];
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for w in col.iter().flatten() {
            *counts.entry(w.as_str()).or_insert(0) += 1;
        }
        let max = counts.values().copied().max()?;
        for w in col.iter().flatten() {
            if counts[w.as_str()] == max {
                return Some(w.clone());
            }
        }
        None
    }
}

/// Progressively aligns transcripts into a lattice.
///
/// The first transcript seeds the lattice; each later one is aligned against
/// the consensus spine with [`pairwise_align`], and columns the newcomer
/// introduces are inserted as all-gap columns for the earlier sources.
/// Transcripts are consumed in the order given; confidence ordering, when
/// configured, is applied by [`fuse`] before this call.
pub fn build_lattice(transcripts: &[TokenSeq], _config: &FusionConfig) -> Result<WordLattice> {
    if transcripts.is_empty() {
        return Err(Error::InvalidData("no transcripts to align".to_string()));
    }
    let n = transcripts.len();
    let mut lattice = WordLattice {
        columns: transcripts[0]
            .tokens()
            .iter()
            .map(|w| {
                let mut col = vec![None; n];
                col[0] = Some(w.clone());
                col
            })
            .collect(),
        n_sources: n,
    };

    for (s, t) in transcripts.iter().enumerate().skip(1) {
        let spine_tokens: Vec<String> = (0..lattice.columns.len())
            .map(|c| {
                lattice
                    .spine_word(c)
                    .expect("pre-insertion columns always hold at least one word")
            })
            .collect();
        let spine = TokenSeq::from_tokens(spine_tokens)
            .map_err(|e| Error::Internal(format!("spine not normalized: {e}")))?;
        let (aligned_spine, aligned_new) = pairwise_align(&spine, t);

        let mut new_columns = Vec::with_capacity(aligned_spine.len());
        let mut old_col = 0usize;
        for (spine_slot, new_slot) in aligned_spine.iter().zip(&aligned_new) {
            match spine_slot {
                Some(_) => {
                    let mut col = lattice.columns[old_col].clone();
                    col[s] = new_slot.clone();
                    new_columns.push(col);
                    old_col += 1;
                }
                None => {
                    let mut col = vec![None; n];
                    col[s] = new_slot.clone();
                    new_columns.push(col);
                }
            }
        }
        lattice.columns = new_columns;
    }
    Ok(lattice)
}

/// One candidate at a voting column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub count: usize,
    pub mean_confidence: f64,
}

/// A column of the lattice ready for Eq.-2 style scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct VotingColumn {
    pub candidates: BTreeMap<String, Candidate>,
    /// Total number of source transcripts (including those with a gap here).
    pub total: usize,
}

impl VotingColumn {
    pub fn gap_count(&self) -> usize {
        self.total - self.candidates.values().map(|c| c.count).sum::<usize>()
    }
}

/// Converts lattice columns plus per-source word confidences into voting
/// columns. `confidences[s]` must hold one value per word of source `s`.
pub fn voting_columns(lattice: &WordLattice, confidences: &[Vec<f64>]) -> Result<Vec<VotingColumn>> {
    let n = lattice.n_sources();
    if confidences.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: confidences.len(),
        });
    }
    for (s, conf) in confidences.iter().enumerate() {
        let words = lattice.readback(s).len();
        if conf.len() != words {
            return Err(Error::DimensionMismatch {
                expected: words,
                got: conf.len(),
            });
        }
    }

    let mut word_at = vec![0usize; n];
    let mut out = Vec::with_capacity(lattice.columns().len());
    for col in lattice.columns() {
        let mut sums: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
        for (s, slot) in col.iter().enumerate() {
            if let Some(w) = slot {
                let c = confidences[s][word_at[s]];
                word_at[s] += 1;
                let e = sums.entry(w.as_str()).or_insert((0, 0.0));
                e.0 += 1;
                e.1 += c;
            }
        }
        out.push(VotingColumn {
            candidates: sums
                .into_iter()
                .map(|(w, (count, sum))| {
                    (
                        w.to_string(),
                        Candidate {
                            count,
                            mean_confidence: sum / count as f64,
                        },
                    )
                })
                .collect(),
            total: n,
        });
    }
    Ok(out)
}

/// Scores one column and returns the winning word, or `None` when the gap
/// pseudo-candidate wins.
///
/// Ties between words go to the higher count, then the lexicographically
/// smaller word; a word beating the gap only ties still wins.
pub fn vote_column(column: &VotingColumn, config: &FusionConfig) -> Option<String> {
    let n = column.total as f64;
    let alpha = config.alpha;
    let mut best: Option<(&str, f64, usize)> = None;
    for (w, cand) in &column.candidates {
        let score = alpha * cand.count as f64 / n + (1.0 - alpha) * cand.mean_confidence;
        let better = match best {
            None => true,
            Some((_, bs, bc)) => score > bs || (score == bs && cand.count > bc),
        };
        if better {
            best = Some((w.as_str(), score, cand.count));
        }
    }
    let (word, word_score, _) = best?;
    let gap_score =
        alpha * column.gap_count() as f64 / n + (1.0 - alpha) * config.gap_confidence;
    if gap_score > word_score {
        None
    } else {
        Some(word.to_string())
    }
}

/// Confidence-weighted voting over a lattice. `confidences[s]` holds one
/// value in [0,1] per word of source `s`, in transcript order.
pub fn vote(lattice: &WordLattice, confidences: &[Vec<f64>], config: &FusionConfig) -> Result<TokenSeq> {
    config.validate()?;
    let columns = voting_columns(lattice, confidences)?;
    let tokens: Vec<String> = columns
        .iter()
        .filter_map(|col| vote_column(col, config))
        .collect();
    TokenSeq::from_tokens(tokens).map_err(|e| Error::Internal(format!("vote output: {e}")))
}

/// Full ECM for one utterance: order transcripts, build the lattice, vote.
pub fn fuse(transcripts: &[TokenSeq], confidences: &[Vec<f64>], config: &FusionConfig) -> Result<TokenSeq> {
    config.validate()?;
    if transcripts.len() != confidences.len() {
        return Err(Error::DimensionMismatch {
            expected: transcripts.len(),
            got: confidences.len(),
        });
    }
    let order: Vec<usize> = match config.alignment_order {
        AlignmentOrder::Given => (0..transcripts.len()).collect(),
        AlignmentOrder::ConfidenceDesc => {
            let mean = |c: &[f64]| {
                if c.is_empty() {
                    0.0
                } else {
                    c.iter().sum::<f64>() / c.len() as f64
                }
            };
            let mut idx: Vec<usize> = (0..transcripts.len()).collect();
            idx.sort_by(|&a, &b| {
                mean(&confidences[b])
                    .partial_cmp(&mean(&confidences[a]))
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            idx
        }
    };
    let ordered_t: Vec<TokenSeq> = order.iter().map(|&i| transcripts[i].clone()).collect();
    let ordered_c: Vec<Vec<f64>> = order.iter().map(|&i| confidences[i].clone()).collect();
    let lattice = build_lattice(&ordered_t, config)?;
    vote(&lattice, &ordered_c, config)
}

/// One utterance of tuning data for [`tune_alpha`].
#[derive(Debug, Clone)]
pub struct FusionInput {
    pub reference: TokenSeq,
    pub transcripts: Vec<TokenSeq>,
    pub confidences: Vec<Vec<f64>>,
}

/// Result of the alpha grid search.
#[derive(Debug, Clone)]
pub struct AlphaTuning {
    pub alpha: f64,
    /// (alpha, pooled TWER) for every grid point, ascending alpha.
    pub grid: Vec<(f64, f64)>,
}

/// Grid-searches alpha in steps of 0.05, minimizing pooled TWER of the fused
/// output against the references. Ties prefer the larger alpha (closer to
/// plurality voting).
pub fn tune_alpha(inputs: &[FusionInput], config: &FusionConfig) -> Result<AlphaTuning> {
    if inputs.is_empty() {
        return Err(Error::InvalidData("no utterances to tune on".to_string()));
    }
    for (i, input) in inputs.iter().enumerate() {
        if input.transcripts.len() < 2 {
            return Err(Error::InvalidData(format!(
                "tuning utterance {i} has fewer than 2 transcripts"
            )));
        }
    }
    let mut grid = Vec::with_capacity(21);
    let mut best: Option<(f64, f64)> = None;
    for step in 0..=20u32 {
        let alpha = step as f64 * 0.05;
        let trial = FusionConfig { alpha, ..*config };
        let mut pooled = ErrorBreakdown::default();
        for input in inputs {
            let fused = fuse(&input.transcripts, &input.confidences, &trial)?;
            let b = crate::metrics::breakdown(&fused, &input.reference)?;
            pooled.merge(&b);
        }
        let twer = pooled.twer();
        grid.push((alpha, twer));
        best = match best {
            Some((_, bt)) if twer > bt => best,
            _ => Some((alpha, twer)),
        };
    }
    let (alpha, _) = best.expect("grid is nonempty");
    Ok(AlphaTuning { alpha, grid })
}

/// Uniformly picks one response.
pub fn select_random<'a, R: Rng>(responses: &[&'a Response], rng: &mut R) -> Result<&'a Response> {
    if responses.is_empty() {
        return Err(Error::InvalidData("no responses to select from".to_string()));
    }
    Ok(responses[rng.gen_range(0..responses.len())])
}

/// Picks the response with the most tokens; ties go to the lowest
/// submit_order.
pub fn select_longest<'a>(responses: &[&'a Response]) -> Result<&'a Response> {
    responses
        .iter()
        .copied()
        .min_by(|a, b| {
            b.text
                .len()
                .cmp(&a.text.len())
                .then(a.submit_order.cmp(&b.submit_order))
        })
        .ok_or_else(|| Error::InvalidData("no responses to select from".to_string()))
}

/// A worker's quality on the training split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkerRank {
    pub mean_twer: f64,
    pub response_count: usize,
}

/// Ranking of workers by training-split TWER, used by the best-worker
/// baseline.
pub type WorkerRanking = BTreeMap<String, WorkerRank>;

/// Pools each worker's responses against references to build a
/// [`WorkerRanking`]. Utterances without references are skipped.
pub fn rank_workers(corpus: &crate::corpus::Corpus) -> Result<WorkerRanking> {
    let mut pooled: BTreeMap<String, (ErrorBreakdown, usize)> = BTreeMap::new();
    for r in corpus.responses() {
        let Some(utt) = corpus.utterance(&r.utterance_id) else {
            continue;
        };
        let Some(reference) = utt.reference.as_ref() else {
            continue;
        };
        let b = crate::metrics::breakdown(&r.text, reference)?;
        let e = pooled.entry(r.worker_id.clone()).or_default();
        e.0.merge(&b);
        e.1 += 1;
    }
    Ok(pooled
        .into_iter()
        .map(|(w, (b, n))| {
            (
                w,
                WorkerRank {
                    mean_twer: b.twer(),
                    response_count: n,
                },
            )
        })
        .collect())
}

/// Picks the response from the best-ranked worker: lowest training TWER,
/// ties to more responses, then lexicographic worker id. Unranked workers
/// sort last; if nobody is ranked, the lowest submit_order wins.
pub fn select_best_worker<'a>(
    responses: &[&'a Response],
    ranking: &WorkerRanking,
) -> Result<&'a Response> {
    if responses.is_empty() {
        return Err(Error::InvalidData("no responses to select from".to_string()));
    }
    let key = |r: &'a Response| -> Option<(f64, usize, &'a str)> {
        ranking
            .get(&r.worker_id)
            .map(|rank| (rank.mean_twer, rank.response_count, r.worker_id.as_str()))
    };
    let mut best = responses[0];
    for &r in &responses[1..] {
        let better = match (key(best), key(r)) {
            (None, Some(_)) => true,
            (Some(_), None) => false,
            (None, None) => r.submit_order < best.submit_order,
            (Some((bt, bc, bw)), Some((rt, rc, rw))) => (rt, std::cmp::Reverse(rc), rw, r.submit_order)
                .partial_cmp(&(bt, std::cmp::Reverse(bc), bw, best.submit_order))
                .map(|o| o == std::cmp::Ordering::Less)
                .unwrap_or(false),
        };
        if better {
            best = r;
        }
    }
    Ok(best)
}

/// Picks the response closest to the reference in edit distance; ties go to
/// the lowest submit_order.
pub fn select_oracle<'a>(responses: &[&'a Response], reference: &TokenSeq) -> Result<&'a Response> {
    responses
        .iter()
        .copied()
        .min_by_key(|r| (edit_align(&r.text, reference).distance, r.submit_order))
        .ok_or_else(|| Error::InvalidData("no responses to select from".to_string()))
}
