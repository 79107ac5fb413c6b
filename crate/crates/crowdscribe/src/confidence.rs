//! CEM: word-level and utterance-level confidence estimation.
//!
//! The word model is a logistic regression over engineered features (the CTC
//! alignment score, peer agreement, lexical frequency, worker history). The
//! utterance model is a gradient-boosted tree ensemble predicting the
//! expected number of word errors; a quantile-calibrated threshold on that
//! prediction drives the reject/relabel decision.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::corpus::UNK_TOKEN;
use crate::ctc::WordAlignmentScore;
use crate::error::{Error, Result};
use crate::fusion::WordLattice;
use crate::gbm::{self, GbmModel, GbmParams, RegressionTree, TreeNode};

/// A word confidence in [0, 1].
pub type WordConfidence = f64;

/// Neutral alignment-score stand-in when no emissions exist for a clip.
pub const ALIGNMENT_SENTINEL: f64 = 0.0;

/// Word-to-log10-frequency table.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    log_freq: BTreeMap<String, f64>,
    floor: f64,
}

impl Lexicon {
    /// Reads `word<TAB>log10_frequency` lines.
    pub fn load(path: &Path) -> Result<Lexicon> {
        let name = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut log_freq = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(word), Some(freq)) = (parts.next(), parts.next()) else {
                return Err(Error::parse(&name, i + 1, "expected word<TAB>log10_frequency"));
            };
            let freq: f64 = freq.trim().parse().map_err(|_| {
                Error::parse(&name, i + 1, format!("bad frequency {freq:?}"))
            })?;
            log_freq.insert(word.trim().to_string(), freq);
        }
        Ok(Lexicon::from_table(log_freq))
    }

    /// Builds a lexicon from raw word occurrences (log10 of the counts).
    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Lexicon {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for w in words {
            *counts.entry(w.to_string()).or_insert(0) += 1;
        }
        Lexicon::from_table(
            counts
                .into_iter()
                .map(|(w, c)| (w, (c as f64).log10()))
                .collect(),
        )
    }

    fn from_table(log_freq: BTreeMap<String, f64>) -> Lexicon {
        let floor = log_freq
            .values()
            .fold(f64::INFINITY, |m, &v| m.min(v))
            .min(0.0)
            - 1.0;
        Lexicon { log_freq, floor }
    }

    pub fn log_freq(&self, word: &str) -> Option<f64> {
        self.log_freq.get(word).copied()
    }

    /// Frequency feature and OOV flag: out-of-vocabulary words get a finite
    /// floor one unit below the rarest known word.
    pub fn feature(&self, word: &str) -> (f64, bool) {
        match self.log_freq(word) {
            Some(f) => (f, false),
            None => (self.floor, true),
        }
    }

    pub fn len(&self) -> usize {
        self.log_freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_freq.is_empty()
    }

    /// Writes the table in the format read by [`Lexicon::load`].
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (w, f) in &self.log_freq {
            let _ = writeln!(out, "{w}\t{f}");
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Per-word model inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordFeatures {
    /// `log s_i` from the CTC alignment, or [`ALIGNMENT_SENTINEL`].
    pub alignment_score: f64,
    /// 1.0 when a real alignment score is present.
    pub has_alignment: f64,
    /// Fraction of peer transcripts proposing this word at its column.
    pub agreement: f64,
    pub unigram_logfreq: f64,
    pub word_length: f64,
    pub oov_flag: f64,
    pub worker_accept_rate: f64,
}

impl WordFeatures {
    pub const NAMES: [&'static str; 7] = [
        "alignment_score",
        "has_alignment",
        "agreement",
        "unigram_logfreq",
        "word_length",
        "oov_flag",
        "worker_accept_rate",
    ];

    pub fn as_vector(&self) -> Vec<f64> {
        vec![
            self.alignment_score,
            self.has_alignment,
            self.agreement,
            self.unigram_logfreq,
            self.word_length,
            self.oov_flag,
            self.worker_accept_rate,
        ]
    }
}

/// Assembles one feature row per word of a lattice source.
///
/// `scores`, when present, must hold one alignment score per word of that
/// source; infinite scores (impossible alignments) fall back to the sentinel.
pub fn extract_word_features(
    lattice: &WordLattice,
    source: usize,
    scores: Option<&[WordAlignmentScore]>,
    worker_accept_rate: f64,
    lexicon: &Lexicon,
) -> Result<Vec<WordFeatures>> {
    let words = lattice.readback(source);
    if let Some(s) = scores {
        if s.len() != words.len() {
            return Err(Error::DimensionMismatch {
                expected: words.len(),
                got: s.len(),
            });
        }
    }
    let n_sources = lattice.n_sources();
    let mut out = Vec::with_capacity(words.len());
    let mut word_at = 0usize;
    for col in lattice.columns() {
        let Some(word) = col[source].as_ref() else {
            continue;
        };
        let peers_with_word = col
            .iter()
            .enumerate()
            .filter(|(s, slot)| *s != source && slot.as_deref() == Some(word.as_str()))
            .count();
        let agreement = if n_sources <= 1 {
            0.0
        } else {
            peers_with_word as f64 / (n_sources - 1) as f64
        };
        let (alignment_score, has_alignment) = match scores {
            Some(s) if s[word_at].log_score.is_finite() => (s[word_at].log_score, 1.0),
            _ => (ALIGNMENT_SENTINEL, 0.0),
        };
        let (unigram_logfreq, oov) = lexicon.feature(word);
        out.push(WordFeatures {
            alignment_score,
            has_alignment,
            agreement,
            unigram_logfreq,
            word_length: word.chars().count() as f64,
            oov_flag: if oov { 1.0 } else { 0.0 },
            worker_accept_rate,
        });
        word_at += 1;
    }
    Ok(out)
}

/// Logistic regression with stored standardization scalers.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub feature_names: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticModel {
    /// All-zero model: scores everything at 0.5.
    pub fn zeroed(feature_names: Vec<String>) -> LogisticModel {
        let d = feature_names.len();
        LogisticModel {
            feature_names,
            means: vec![0.0; d],
            stds: vec![1.0; d],
            weights: vec![0.0; d],
            bias: 0.0,
        }
    }

    /// Probability that the word is correct.
    pub fn score(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: row.len(),
            });
        }
        let mut z = self.bias;
        for (j, &x) in row.iter().enumerate() {
            z += self.weights[j] * (x - self.means[j]) / self.stds[j];
        }
        Ok(sigmoid(z))
    }
}

/// Gradient-descent settings for the logistic trainer.
#[derive(Debug, Clone, Copy)]
pub struct LogisticConfig {
    pub max_epochs: usize,
    /// Relative loss-change stopping tolerance.
    pub tolerance: f64,
    pub learning_rate: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            max_epochs: 10_000,
            tolerance: 1e-6,
            learning_rate: 1.0,
        }
    }
}

/// Fits a logistic regression by full-batch gradient descent on log-loss.
///
/// Features are standardized internally and the scalers stored on the model.
/// Training stops when the relative loss change drops below the tolerance or
/// at the epoch cap. Both classes must be present.
pub fn train_logistic(
    rows: &[Vec<f64>],
    labels: &[bool],
    feature_names: &[&str],
    config: &LogisticConfig,
) -> Result<LogisticModel> {
    if rows.is_empty() {
        return Err(Error::InvalidData("empty logistic training set".to_string()));
    }
    if rows.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            got: labels.len(),
        });
    }
    let d = feature_names.len();
    for r in rows {
        if r.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: r.len(),
            });
        }
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::InvalidData(
            "labels are single-class; nothing to separate".to_string(),
        ));
    }

    let n = rows.len();
    let mut means = vec![0.0f64; d];
    let mut stds = vec![0.0f64; d];
    for r in rows {
        for j in 0..d {
            means[j] += r[j];
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    for r in rows {
        for j in 0..d {
            let dev = r[j] - means[j];
            stds[j] += dev * dev;
        }
    }
    for s in &mut stds {
        *s = (*s / n as f64).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    let x: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| (0..d).map(|j| (r[j] - means[j]) / stds[j]).collect())
        .collect();
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();

    let loss_of = |w: &[f64], b: f64| -> f64 {
        let mut loss = 0.0;
        for i in 0..n {
            let mut z = b;
            for j in 0..d {
                z += w[j] * x[i][j];
            }
            // log(1 + exp(-m)) with m = z for y=1, -z for y=0, stably.
            let m = if y[i] > 0.5 { z } else { -z };
            loss += if m > 0.0 {
                (-m).exp().ln_1p()
            } else {
                -m + m.exp().ln_1p()
            };
        }
        loss / n as f64
    };

    let mut w = vec![0.0f64; d];
    let mut b = 0.0f64;
    let mut lr = config.learning_rate;
    let mut loss = loss_of(&w, b);
    for _ in 0..config.max_epochs {
        let mut gw = vec![0.0f64; d];
        let mut gb = 0.0f64;
        for i in 0..n {
            let mut z = b;
            for j in 0..d {
                z += w[j] * x[i][j];
            }
            let err = sigmoid(z) - y[i];
            for j in 0..d {
                gw[j] += err * x[i][j];
            }
            gb += err;
        }
        for g in &mut gw {
            *g /= n as f64;
        }
        gb /= n as f64;

        // Backtracking: halve the step until the loss stops increasing.
        let mut accepted = false;
        for _ in 0..30 {
            let wt: Vec<f64> = (0..d).map(|j| w[j] - lr * gw[j]).collect();
            let bt = b - lr * gb;
            let lt = loss_of(&wt, bt);
            if lt <= loss {
                let rel = (loss - lt) / loss.max(1e-12);
                w = wt;
                b = bt;
                let done = rel < config.tolerance;
                loss = lt;
                accepted = true;
                if done {
                    return Ok(LogisticModel {
                        feature_names: feature_names.iter().map(|s| s.to_string()).collect(),
                        means,
                        stds,
                        weights: w,
                        bias: b,
                    });
                }
                break;
            }
            lr /= 2.0;
        }
        if !accepted {
            break;
        }
    }
    Ok(LogisticModel {
        feature_names: feature_names.iter().map(|s| s.to_string()).collect(),
        means,
        stds,
        weights: w,
        bias: b,
    })
}

/// Trains the word-level CEM from labeled feature rows (label = word judged
/// correct by edit alignment against the reference).
pub fn train_word_cem(features: &[WordFeatures], labels: &[bool]) -> Result<LogisticModel> {
    if features.len() < 100 {
        return Err(Error::InvalidData(format!(
            "word CEM needs at least 100 labeled words, got {}",
            features.len()
        )));
    }
    let rows: Vec<Vec<f64>> = features.iter().map(WordFeatures::as_vector).collect();
    train_logistic(&rows, labels, &WordFeatures::NAMES, &LogisticConfig::default())
}

/// Scores each word; the reserved unknown token is forced to confidence 0.
pub fn score_words(
    model: &LogisticModel,
    features: &[WordFeatures],
    tokens: &[String],
) -> Result<Vec<WordConfidence>> {
    if features.len() != tokens.len() {
        return Err(Error::DimensionMismatch {
            expected: tokens.len(),
            got: features.len(),
        });
    }
    features
        .iter()
        .zip(tokens)
        .map(|(f, tok)| {
            if tok == UNK_TOKEN {
                Ok(0.0)
            } else {
                model.score(&f.as_vector())
            }
        })
        .collect()
}

/// Per-response inputs to the utterance-level CEM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtteranceFeatures {
    pub audio_duration: f64,
    pub transcript_length: f64,
    pub snr_db: f64,
    /// 1.0 when `snr_db` was measured rather than defaulted.
    pub has_snr: f64,
    pub spend_time: f64,
    pub worker_accept_rate: f64,
    pub mean_peer_distance: f64,
    pub min_peer_distance: f64,
    pub mean_word_confidence: f64,
    pub min_word_confidence: f64,
}

impl UtteranceFeatures {
    pub const NAMES: [&'static str; 10] = [
        "audio_duration",
        "transcript_length",
        "snr_db",
        "has_snr",
        "spend_time",
        "worker_accept_rate",
        "mean_peer_distance",
        "min_peer_distance",
        "mean_word_confidence",
        "min_word_confidence",
    ];

    pub fn as_vector(&self) -> Vec<f64> {
        vec![
            self.audio_duration,
            self.transcript_length,
            self.snr_db,
            self.has_snr,
            self.spend_time,
            self.worker_accept_rate,
            self.mean_peer_distance,
            self.min_peer_distance,
            self.mean_word_confidence,
            self.min_word_confidence,
        ]
    }
}

/// The utterance-level CEM: a boosted ensemble plus its reject threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceModel {
    pub gbm: GbmModel,
    pub feature_names: Vec<String>,
    /// Reject when predicted errors exceed this.
    pub threshold: f64,
}

/// Trains the expected-word-errors regressor.
pub fn train_utterance_gbm(
    rows: &[UtteranceFeatures],
    targets: &[f64],
    params: &GbmParams,
) -> Result<GbmModel> {
    let rows: Vec<Vec<f64>> = rows.iter().map(UtteranceFeatures::as_vector).collect();
    gbm::train(&rows, targets, params)
}

/// Predicted number of word errors, clamped below at zero.
pub fn predict_expected_errors(model: &GbmModel, features: &UtteranceFeatures) -> f64 {
    model.predict(&features.as_vector()).max(0.0)
}

/// Accept/reject outcome of the CEM gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Reject,
}

/// Rejects a response iff its predicted error count exceeds the threshold.
pub fn decide(pred_errors: f64, threshold: f64) -> Decision {
    if pred_errors > threshold {
        Decision::Reject
    } else {
        Decision::Accept
    }
}

/// Threshold = the (1 - rate)-quantile of the predictions: index
/// `ceil((1 - rate) * n) - 1` of the ascending sort. A rate of 1 returns a
/// value below the minimum so everything is rejected.
pub fn threshold_from_predictions(predictions: &[f64], target_reject_rate: f64) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::InvalidData("no predictions to calibrate on".to_string()));
    }
    if !(0.0..=1.0).contains(&target_reject_rate) {
        return Err(Error::Config(format!(
            "target reject rate {target_reject_rate} outside [0, 1]"
        )));
    }
    let mut sorted = predictions.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = sorted.len();
    let idx = ((1.0 - target_reject_rate) * n as f64).ceil() as isize - 1;
    if idx < 0 {
        Ok(sorted[0] - 1.0)
    } else {
        Ok(sorted[idx as usize])
    }
}

/// Calibrates the reject threshold on validation rows.
pub fn calibrate_threshold(
    model: &GbmModel,
    rows: &[UtteranceFeatures],
    target_reject_rate: f64,
) -> Result<f64> {
    let preds: Vec<f64> = rows
        .iter()
        .map(|r| predict_expected_errors(model, r))
        .collect();
    threshold_from_predictions(&preds, target_reject_rate)
}

const MODEL_MAGIC: &str = "crowdscribe-model v1";

/// Saves the word CEM as versioned plain text.
pub fn save_word_cem(path: &Path, model: &LogisticModel) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{MODEL_MAGIC}");
    let _ = writeln!(out, "kind word-cem");
    let _ = writeln!(out, "features {}", model.feature_names.join(" "));
    for (key, vals) in [
        ("means", &model.means),
        ("stds", &model.stds),
        ("weights", &model.weights),
    ] {
        let _ = write!(out, "{key}");
        for v in vals {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "bias {}", model.bias);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn parse_floats(name: &str, line_no: usize, rest: &str) -> Result<Vec<f64>> {
    rest.split_whitespace()
        .map(|f| {
            f.parse::<f64>()
                .map_err(|_| Error::parse(name, line_no, format!("bad number {f:?}")))
        })
        .collect()
}

struct ModelReader<'a> {
    name: String,
    lines: Vec<(usize, &'a str)>,
    at: usize,
}

impl<'a> ModelReader<'a> {
    fn new(name: String, text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty())
            .collect();
        ModelReader { name, lines, at: 0 }
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        let item = self
            .lines
            .get(self.at)
            .copied()
            .ok_or_else(|| Error::parse(&self.name, 0, "unexpected end of model file"))?;
        self.at += 1;
        Ok(item)
    }

    /// Next line, which must start with `key `; returns the remainder.
    fn expect(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (no, line) = self.next()?;
        let rest = line
            .strip_prefix(key)
            .ok_or_else(|| Error::parse(&self.name, no, format!("expected {key:?} line")))?;
        Ok((no, rest.trim_start()))
    }
}

/// Loads a word CEM saved by [`save_word_cem`].
pub fn load_word_cem(path: &Path) -> Result<LogisticModel> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut r = ModelReader::new(name.clone(), &text);
    let (no, magic) = r.next()?;
    if magic.trim() != MODEL_MAGIC {
        return Err(Error::parse(&name, no, "not a crowdscribe model file"));
    }
    let (no, kind) = r.expect("kind")?;
    if kind != "word-cem" {
        return Err(Error::parse(&name, no, format!("expected word-cem model, found {kind:?}")));
    }
    let (_, feats) = r.expect("features")?;
    let feature_names: Vec<String> = feats.split_whitespace().map(str::to_string).collect();
    let d = feature_names.len();
    let (no, means) = r.expect("means")?;
    let means = parse_floats(&name, no, means)?;
    let (no, stds) = r.expect("stds")?;
    let stds = parse_floats(&name, no, stds)?;
    let (no, weights) = r.expect("weights")?;
    let weights = parse_floats(&name, no, weights)?;
    let (no, bias) = r.expect("bias")?;
    let bias = parse_floats(&name, no, bias)?;
    if means.len() != d || stds.len() != d || weights.len() != d || bias.len() != 1 {
        return Err(Error::parse(&name, no, "scaler/weight arity mismatch"));
    }
    Ok(LogisticModel {
        feature_names,
        means,
        stds,
        weights,
        bias: bias[0],
    })
}

fn write_tree_preorder(out: &mut String, tree: &RegressionTree, at: usize) {
    match &tree.nodes[at] {
        TreeNode::Leaf { value } => {
            let _ = writeln!(out, "leaf {value}");
        }
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let _ = writeln!(out, "split {feature} {threshold}");
            write_tree_preorder(out, tree, *left);
            write_tree_preorder(out, tree, *right);
        }
    }
}

fn read_tree_preorder(r: &mut ModelReader<'_>, nodes: &mut Vec<TreeNode>) -> Result<usize> {
    let (no, line) = r.next()?;
    let mut parts = line.split_whitespace();
    match parts.next() {
        Some("leaf") => {
            let value: f64 = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse(&r.name, no, "bad leaf line"))?;
            nodes.push(TreeNode::Leaf { value });
            Ok(nodes.len() - 1)
        }
        Some("split") => {
            let feature: usize = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse(&r.name, no, "bad split feature"))?;
            let threshold: f64 = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse(&r.name, no, "bad split threshold"))?;
            let at = nodes.len();
            nodes.push(TreeNode::Split {
                feature,
                threshold,
                left: 0,
                right: 0,
            });
            let left = read_tree_preorder(r, nodes)?;
            let right = read_tree_preorder(r, nodes)?;
            if let TreeNode::Split { left: l, right: rr, .. } = &mut nodes[at] {
                *l = left;
                *rr = right;
            }
            Ok(at)
        }
        _ => Err(Error::parse(&r.name, no, "expected leaf or split line")),
    }
}

/// Saves the utterance model (trees in pre-order) as versioned plain text.
pub fn save_utterance_model(path: &Path, model: &UtteranceModel) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{MODEL_MAGIC}");
    let _ = writeln!(out, "kind utterance-gbm");
    let _ = writeln!(out, "features {}", model.feature_names.join(" "));
    let _ = writeln!(out, "initial {}", model.gbm.initial_prediction);
    let _ = writeln!(out, "learning_rate {}", model.gbm.learning_rate);
    let _ = writeln!(out, "threshold {}", model.threshold);
    let _ = writeln!(out, "trees {}", model.gbm.trees.len());
    for tree in &model.gbm.trees {
        let _ = writeln!(out, "tree {}", tree.nodes.len());
        write_tree_preorder(&mut out, tree, 0);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads a model saved by [`save_utterance_model`].
pub fn load_utterance_model(path: &Path) -> Result<UtteranceModel> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut r = ModelReader::new(name.clone(), &text);
    let (no, magic) = r.next()?;
    if magic.trim() != MODEL_MAGIC {
        return Err(Error::parse(&name, no, "not a crowdscribe model file"));
    }
    let (no, kind) = r.expect("kind")?;
    if kind != "utterance-gbm" {
        return Err(Error::parse(
            &name,
            no,
            format!("expected utterance-gbm model, found {kind:?}"),
        ));
    }
    let (_, feats) = r.expect("features")?;
    let feature_names: Vec<String> = feats.split_whitespace().map(str::to_string).collect();
    let (no, initial) = r.expect("initial")?;
    let initial: f64 = initial
        .parse()
        .map_err(|_| Error::parse(&name, no, "bad initial prediction"))?;
    let (no, lr) = r.expect("learning_rate")?;
    let lr: f64 = lr
        .parse()
        .map_err(|_| Error::parse(&name, no, "bad learning rate"))?;
    let (no, threshold) = r.expect("threshold")?;
    let threshold: f64 = threshold
        .parse()
        .map_err(|_| Error::parse(&name, no, "bad threshold"))?;
    let (no, count) = r.expect("trees")?;
    let count: usize = count
        .parse()
        .map_err(|_| Error::parse(&name, no, "bad tree count"))?;
    let mut trees = Vec::with_capacity(count);
    for _ in 0..count {
        let (no, n_nodes) = r.expect("tree")?;
        let n_nodes: usize = n_nodes
            .parse()
            .map_err(|_| Error::parse(&name, no, "bad node count"))?;
        let mut nodes = Vec::with_capacity(n_nodes);
        read_tree_preorder(&mut r, &mut nodes)?;
        if nodes.len() != n_nodes {
            return Err(Error::parse(
                &name,
                no,
                format!("tree claims {n_nodes} nodes, found {}", nodes.len()),
            ));
        }
        trees.push(RegressionTree { nodes });
    }
    Ok(UtteranceModel {
        gbm: GbmModel {
            initial_prediction: initial,
            learning_rate: lr,
            trees,
            training_loss: Vec::new(),
        },
        feature_names,
        threshold,
    })
}
