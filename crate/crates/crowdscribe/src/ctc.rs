//! CTC forward scoring, Viterbi segmentation, and per-word alignment scores.
//!
//! All probabilities live in natural-log space. The trellis is the usual
//! extended label sequence with blanks interleaved: for labels `y_1..y_L`
//! the states are `[b, y_1, b, y_2, .., y_L, b]`, `2L + 1` of them.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::corpus::TokenSeq;
use crate::error::{Error, Result};

/// Reserved blank symbol, always vocabulary index 0.
pub const BLANK_SYMBOL: &str = "<b>";

/// Word separator used when scoring multi-word label sequences.
pub const SEPARATOR: char = '|';

/// Tolerance for per-frame log-probability normalization.
pub const ROW_NORM_TOLERANCE: f64 = 1e-6;

/// A frames-by-vocabulary matrix of log probabilities.
///
/// Invariants: the blank symbol sits at index 0, at least one frame, and
/// every row log-sum-exps to 0 within [`ROW_NORM_TOLERANCE`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionMatrix {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    logp: Vec<f64>,
    frames: usize,
}

fn log_sum_exp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl EmissionMatrix {
    /// Builds a matrix from a vocabulary and per-frame rows of log
    /// probabilities.
    pub fn new(vocab: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if vocab.is_empty() || vocab[0] != BLANK_SYMBOL {
            return Err(Error::InvalidData(format!(
                "vocabulary must start with the blank symbol {BLANK_SYMBOL:?}"
            )));
        }
        let mut index = HashMap::new();
        for (i, s) in vocab.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(Error::InvalidData(format!("duplicate vocabulary symbol {s:?}")));
            }
        }
        if rows.is_empty() {
            return Err(Error::InvalidData("emission matrix has no frames".to_string()));
        }
        let frames = rows.len();
        let width = vocab.len();
        let mut logp = Vec::with_capacity(frames * width);
        for (t, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    got: row.len(),
                });
            }
            let mut total = f64::NEG_INFINITY;
            for &v in row {
                total = log_sum_exp2(total, v);
            }
            if total.abs() > ROW_NORM_TOLERANCE {
                return Err(Error::InvalidData(format!(
                    "emission row {t} log-sum-exps to {total:.3e}, not 0"
                )));
            }
            logp.extend_from_slice(row);
        }
        Ok(EmissionMatrix {
            vocab,
            index,
            logp,
            frames,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    #[inline]
    pub fn logp(&self, frame: usize, symbol: usize) -> f64 {
        self.logp[frame * self.vocab.len() + symbol]
    }

    /// Index of a vocabulary symbol.
    pub fn symbol_index(&self, symbol: &str) -> Result<usize> {
        self.index
            .get(symbol)
            .copied()
            .ok_or_else(|| Error::UnknownSymbol(symbol.to_string()))
    }

    /// Encodes a single word as character label indices.
    pub fn encode_word(&self, word: &str) -> Result<Vec<usize>> {
        word.chars()
            .map(|c| self.symbol_index(&c.to_string()))
            .collect()
    }

    /// Encodes a word sequence with [`SEPARATOR`] between words. The
    /// separator only needs to be in the vocabulary for multi-word input.
    pub fn encode_words(&self, words: &[String]) -> Result<Vec<usize>> {
        let mut labels = Vec::new();
        for (i, w) in words.iter().enumerate() {
            if i > 0 {
                labels.push(self.symbol_index(&SEPARATOR.to_string())?);
            }
            labels.extend(self.encode_word(w)?);
        }
        Ok(labels)
    }
}

/// The lowercase letters, apostrophe, and word separator behind a blank.
pub fn standard_vocab() -> Vec<String> {
    let mut v = vec![BLANK_SYMBOL.to_string()];
    for c in b'a'..=b'z' {
        v.push((c as char).to_string());
    }
    v.push("'".to_string());
    v.push(SEPARATOR.to_string());
    v
}

#[inline]
fn ext_state_symbol(labels: &[usize], s: usize) -> usize {
    if s.is_multiple_of(2) {
        0
    } else {
        labels[(s - 1) / 2]
    }
}

fn validate_labels(em: &EmissionMatrix, labels: &[usize]) -> Result<()> {
    for &l in labels {
        if l == 0 {
            return Err(Error::InvalidData(
                "label sequence contains the blank symbol".to_string(),
            ));
        }
        if l >= em.vocab.len() {
            return Err(Error::InvalidData(format!(
                "label index {l} outside vocabulary of size {}",
                em.vocab.len()
            )));
        }
    }
    Ok(())
}

/// Forward alphas over frames `start..end`: `alphas[t][s]` is the log
/// probability of all partial paths through frame `start + t` ending in
/// trellis state `s`.
fn forward_alphas(em: &EmissionMatrix, start: usize, end: usize, labels: &[usize]) -> Vec<Vec<f64>> {
    let states = 2 * labels.len() + 1;
    let frames = end - start;
    let mut alphas = vec![vec![f64::NEG_INFINITY; states]; frames];
    if frames == 0 {
        return alphas;
    }
    alphas[0][0] = em.logp(start, 0);
    if states > 1 {
        alphas[0][1] = em.logp(start, ext_state_symbol(labels, 1));
    }
    for t in 1..frames {
        for s in 0..states {
            let sym = ext_state_symbol(labels, s);
            let mut acc = alphas[t - 1][s];
            if s >= 1 {
                acc = log_sum_exp2(acc, alphas[t - 1][s - 1]);
            }
            if s >= 2 && sym != 0 && sym != ext_state_symbol(labels, s - 2) {
                acc = log_sum_exp2(acc, alphas[t - 1][s - 2]);
            }
            alphas[t][s] = acc + em.logp(start + t, sym);
        }
    }
    alphas
}

/// Backward betas over frames `start..end`: `betas[t][s]` is the log
/// probability of completing the label suffix from state `s` onward, having
/// the path occupy state `s` at frame `start + t`.
fn backward_betas(em: &EmissionMatrix, start: usize, end: usize, labels: &[usize]) -> Vec<Vec<f64>> {
    let states = 2 * labels.len() + 1;
    let frames = end - start;
    let mut betas = vec![vec![f64::NEG_INFINITY; states]; frames];
    if frames == 0 {
        return betas;
    }
    let last = frames - 1;
    betas[last][states - 1] = em.logp(start + last, 0);
    if states > 1 {
        betas[last][states - 2] = em.logp(start + last, ext_state_symbol(labels, states - 2));
    }
    for t in (0..last).rev() {
        for s in 0..states {
            let sym = ext_state_symbol(labels, s);
            let mut acc = betas[t + 1][s];
            if s + 1 < states {
                acc = log_sum_exp2(acc, betas[t + 1][s + 1]);
            }
            if s + 2 < states && sym != 0 && sym != ext_state_symbol(labels, s + 2) {
                acc = log_sum_exp2(acc, betas[t + 1][s + 2]);
            }
            betas[t][s] = acc + em.logp(start + t, sym);
        }
    }
    betas
}

fn ctc_loss_range(em: &EmissionMatrix, start: usize, end: usize, labels: &[usize]) -> f64 {
    let frames = end - start;
    if labels.is_empty() {
        let mut total = 0.0;
        for t in start..end {
            total += em.logp(t, 0);
        }
        return -total;
    }
    if frames == 0 {
        return f64::INFINITY;
    }
    let alphas = forward_alphas(em, start, end, labels);
    let states = 2 * labels.len() + 1;
    let total = log_sum_exp2(alphas[frames - 1][states - 1], alphas[frames - 1][states - 2]);
    if total == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        (-total).max(0.0)
    }
}

/// CTC loss of a label sequence under the whole matrix: the negative log
/// probability that a random path collapses to exactly `labels`.
///
/// Empty labels score the all-blank path. Label sequences that cannot fit in
/// the available frames yield `+inf` rather than an error.
pub fn ctc_loss(em: &EmissionMatrix, labels: &[usize]) -> Result<f64> {
    validate_labels(em, labels)?;
    Ok(ctc_loss_range(em, 0, em.frames(), labels))
}

/// Like [`ctc_loss`] but restricted to the frame range `start..end`.
pub fn ctc_loss_slice(em: &EmissionMatrix, start: usize, end: usize, labels: &[usize]) -> Result<f64> {
    validate_labels(em, labels)?;
    if start > end || end > em.frames() {
        return Err(Error::InvalidData(format!(
            "frame range {start}..{end} outside 0..{}",
            em.frames()
        )));
    }
    Ok(ctc_loss_range(em, start, end, labels))
}

/// Frame span assigned to one word by Viterbi segmentation. Frames are
/// inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordSegment {
    pub word_index: usize,
    pub start_frame: usize,
    pub end_frame: usize,
}

/// Segments the frame axis by the most probable CTC path for `words`.
///
/// Ties are broken toward the path that stays in its current state (and, at
/// the end, toward the final blank), which assigns each word the earliest
/// frames consistent with an optimal path. Returns one segment per word, in
/// order, non-overlapping.
pub fn ctc_segment(em: &EmissionMatrix, words: &TokenSeq) -> Result<Vec<WordSegment>> {
    if words.is_empty() {
        return Ok(Vec::new());
    }
    let labels = em.encode_words(words.tokens())?;
    // Which word each label belongs to; separators belong to none.
    let mut label_word: Vec<Option<usize>> = Vec::with_capacity(labels.len());
    {
        let sep = em.symbol_index(&SEPARATOR.to_string()).ok();
        let mut word = 0usize;
        for &l in &labels {
            if Some(l) == sep {
                label_word.push(None);
                word += 1;
            } else {
                label_word.push(Some(word));
            }
        }
    }

    let states = 2 * labels.len() + 1;
    let frames = em.frames();
    let mut score = vec![f64::NEG_INFINITY; frames * states];
    let mut back = vec![0u8; frames * states];
    let at = |t: usize, s: usize| t * states + s;

    score[at(0, 0)] = em.logp(0, 0);
    if states > 1 {
        score[at(0, 1)] = em.logp(0, ext_state_symbol(&labels, 1));
    }
    for t in 1..frames {
        for s in 0..states {
            let sym = ext_state_symbol(&labels, s);
            // Candidate predecessors in preference order: stay, advance one,
            // skip a blank. Stay wins ties.
            let mut best = score[at(t - 1, s)];
            let mut step = 0u8;
            if s >= 1 && score[at(t - 1, s - 1)] > best {
                best = score[at(t - 1, s - 1)];
                step = 1;
            }
            if s >= 2
                && sym != 0
                && sym != ext_state_symbol(&labels, s - 2)
                && score[at(t - 1, s - 2)] > best
            {
                best = score[at(t - 1, s - 2)];
                step = 2;
            }
            if best == f64::NEG_INFINITY {
                continue;
            }
            score[at(t, s)] = best + em.logp(t, sym);
            back[at(t, s)] = step;
        }
    }

    let mut state = states - 1;
    if states > 1 && score[at(frames - 1, states - 2)] > score[at(frames - 1, states - 1)] {
        state = states - 2;
    }
    if score[at(frames - 1, state)] == f64::NEG_INFINITY {
        return Err(Error::Infeasible(format!(
            "{} labels cannot fit in {frames} frames",
            labels.len()
        )));
    }

    let mut segments: Vec<(usize, usize)> = vec![(usize::MAX, 0); words.len()];
    let mut t = frames;
    while t > 0 {
        t -= 1;
        if state % 2 == 1 {
            if let Some(w) = label_word[(state - 1) / 2] {
                let seg = &mut segments[w];
                seg.0 = seg.0.min(t);
                seg.1 = seg.1.max(t);
            }
        }
        if t > 0 {
            state -= back[at(t, state)] as usize;
        }
    }

    let mut out = Vec::with_capacity(words.len());
    for (i, (u, v)) in segments.into_iter().enumerate() {
        if u == usize::MAX {
            return Err(Error::Internal(format!(
                "word {i} received no frames in the Viterbi path"
            )));
        }
        out.push(WordSegment {
            word_index: i,
            start_frame: u,
            end_frame: v,
        });
    }
    Ok(out)
}

/// Eq.-style per-word alignment score: the log probability of the word on
/// its own segment plus the log probabilities of the prefix and suffix words
/// on the surrounding frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordAlignmentScore {
    pub word_index: usize,
    /// `log s_i`, always <= 0; negative infinity when some part is
    /// impossible under the emissions.
    pub log_score: f64,
}

/// Scores every word of a transcript against the emissions.
///
/// For word `i` with segment `[u, v]`, the score is
/// `log s_i = -loss(em[u..=v], chars(w_i)) - loss(em[..u], w_0..w_{i-1})
///            - loss(em[v+1..], w_{i+1}..)`,
/// where the prefix and suffix label sequences keep their internal
/// separators. Prefix and suffix terms are read off one shared forward and
/// one shared backward pass, which coincide with independently evaluated
/// slice losses.
pub fn word_alignment_scores(em: &EmissionMatrix, words: &TokenSeq) -> Result<Vec<WordAlignmentScore>> {
    if words.is_empty() {
        return Ok(Vec::new());
    }
    let segments = ctc_segment(em, words)?;
    let labels = em.encode_words(words.tokens())?;
    let frames = em.frames();
    let alphas = forward_alphas(em, 0, frames, &labels);
    let betas = backward_betas(em, 0, frames, &labels);

    // Label index ranges of each word within the joined sequence.
    let mut word_label_range = Vec::with_capacity(words.len());
    {
        let mut pos = 0usize;
        for (i, w) in words.tokens().iter().enumerate() {
            if i > 0 {
                pos += 1;
            }
            let len = w.chars().count();
            word_label_range.push((pos, pos + len - 1));
            pos += len;
        }
    }

    let n = words.len();
    let mut out = Vec::with_capacity(n);
    for (i, seg) in segments.iter().enumerate() {
        let word_chars = em.encode_word(&words.tokens()[i])?;
        let word_loss = ctc_loss_range(em, seg.start_frame, seg.end_frame + 1, &word_chars);

        let prefix_loss = if seg.start_frame == 0 {
            0.0
        } else if i == 0 {
            -alphas[seg.start_frame - 1][0]
        } else {
            let b = word_label_range[i - 1].1;
            -log_sum_exp2(
                alphas[seg.start_frame - 1][2 * b + 1],
                alphas[seg.start_frame - 1][2 * b + 2],
            )
        };

        let suffix_loss = if seg.end_frame + 1 == frames {
            0.0
        } else if i == n - 1 {
            -betas[seg.end_frame + 1][2 * labels.len()]
        } else {
            let a = word_label_range[i + 1].0;
            -log_sum_exp2(betas[seg.end_frame + 1][2 * a], betas[seg.end_frame + 1][2 * a + 1])
        };

        let total = word_loss + prefix_loss + suffix_loss;
        out.push(WordAlignmentScore {
            word_index: i,
            log_score: if total.is_nan() { f64::NEG_INFINITY } else { -total },
        });
    }
    Ok(out)
}

/// Reads an emission matrix from its text form: first line the vocabulary,
/// then one space-separated row of log probabilities per frame.
pub fn load_emissions_file(path: &Path) -> Result<EmissionMatrix> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let vocab: Vec<String> = match lines.next() {
        Some((_, line)) => line.split_whitespace().map(str::to_string).collect(),
        None => return Err(Error::parse(&name, 1, "empty emissions file")),
    };
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(vocab.len());
        for field in line.split_whitespace() {
            let v: f64 = field.parse().map_err(|_| {
                Error::parse(&name, i + 1, format!("bad log probability {field:?}"))
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    EmissionMatrix::new(vocab, rows).map_err(|e| match e {
        Error::InvalidData(msg) => Error::InvalidData(format!("{name}: {msg}")),
        other => other,
    })
}

/// Writes an emission matrix in the format read by [`load_emissions_file`].
/// Values round-trip exactly.
pub fn save_emissions_file(path: &Path, em: &EmissionMatrix) -> Result<()> {
    let mut out = String::new();
    out.push_str(&em.vocab.join(" "));
    out.push('\n');
    for t in 0..em.frames() {
        for s in 0..em.vocab.len() {
            if s > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{}", em.logp(t, s));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
