//! End-to-end orchestration: trains the confidence models, runs the
//! reject/relabel gate, applies a final-selection strategy, and evaluates
//! everything against the references.
//!
//! The flow mirrors how the corpus was actually collected: adjudication
//! decisions on the training split seed per-worker accept rates, the word and
//! utterance CEMs train on that split, the reject threshold is calibrated to
//! a target relabel rate, the fusion weight is tuned there too, and only then
//! does the simulation touch the evaluation splits.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::confidence::{
    calibrate_threshold, decide, extract_word_features, predict_expected_errors, score_words,
    train_utterance_gbm, train_word_cem, Decision, Lexicon, LogisticModel, UtteranceFeatures,
    UtteranceModel, WordFeatures,
};
use crate::corpus::{
    compute_worker_stats, load_corpus, ColumnMap, Corpus, DecisionMap, Response, Subset, TokenSeq,
    Utterance, WorkerStats,
};
use crate::ctc::{load_emissions_file, word_alignment_scores, EmissionMatrix};
use crate::error::{Error, Result};
use crate::fusion::{
    build_lattice, fuse, rank_workers, select_best_worker, select_longest, select_oracle,
    select_random, tune_alpha, AlignmentOrder, FusionConfig, FusionInput, WorkerRanking,
};
use crate::gbm::GbmParams;
use crate::metrics::{agreement_features, breakdown, edit_align, EditOp, ErrorBreakdown};
use crate::snr::wav_snr;

/// Fusion weight: a fixed value or grid search on the training split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSetting {
    Tune,
    Fixed(f64),
}

impl FromStr for AlphaSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("tune") {
            return Ok(AlphaSetting::Tune);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::Config(format!("alpha must be a number or \"tune\", got {s:?}")))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Config(format!("alpha {v} outside [0, 1]")));
        }
        Ok(AlphaSetting::Fixed(v))
    }
}

/// How the final transcript is chosen from the post-gate pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Ecm,
    Rover,
    Random,
    Longest,
    BestWorker,
    Oracle,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Ecm => "ecm",
            Strategy::Rover => "rover",
            Strategy::Random => "random",
            Strategy::Longest => "longest",
            Strategy::BestWorker => "best-worker",
            Strategy::Oracle => "oracle",
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ecm" => Ok(Strategy::Ecm),
            "rover" => Ok(Strategy::Rover),
            "random" => Ok(Strategy::Random),
            "longest" => Ok(Strategy::Longest),
            "best-worker" => Ok(Strategy::BestWorker),
            "oracle" => Ok(Strategy::Oracle),
            _ => Err(Error::Config(format!("unknown strategy {s:?}"))),
        }
    }
}

/// Everything the pipeline needs to run, settable from a config file and
/// overridable from the command line.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub response_path: Option<PathBuf>,
    pub reference_path: Option<PathBuf>,
    pub meta_path: Option<PathBuf>,
    pub emissions_dir: Option<PathBuf>,
    pub wav_dir: Option<PathBuf>,
    pub lexicon_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub target_reject_rate: f64,
    pub alpha: AlphaSetting,
    pub strategy: Strategy,
    pub train_subsets: Vec<Subset>,
    pub eval_subsets: Vec<Subset>,
    /// Adjudication rule: a training response is accepted when its TWER
    /// against the reference stays at or below this.
    pub accept_twer: f64,
    /// SNR feature fallback when no audio is available.
    pub snr_default_db: f64,
    pub gap_confidence: f64,
    pub gbm: GbmParams,
    pub column_map: ColumnMap,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            response_path: None,
            reference_path: None,
            meta_path: None,
            emissions_dir: None,
            wav_dir: None,
            lexicon_path: None,
            out_dir: PathBuf::from("out"),
            seed: 17,
            target_reject_rate: 0.054,
            alpha: AlphaSetting::Tune,
            strategy: Strategy::Ecm,
            train_subsets: vec![Subset::TrainOther10h],
            eval_subsets: vec![
                Subset::TrainMixed10h,
                Subset::DevClean,
                Subset::TestClean,
                Subset::DevOther,
                Subset::TestOther,
            ],
            accept_twer: 0.2,
            snr_default_db: 15.0,
            gap_confidence: 0.5,
            gbm: GbmParams::default(),
            column_map: ColumnMap::new(),
        }
    }
}

fn parse_subsets(value: &str) -> Result<Vec<Subset>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(Subset::from_str)
        .collect()
}

impl PipelineConfig {
    /// Applies one `key = value` setting. Column-mapping entries use the
    /// `column.<canonical>` prefix.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad_num = |k: &str, v: &str| Error::Config(format!("bad numeric value for {k}: {v:?}"));
        match key {
            "response_path" => self.response_path = Some(PathBuf::from(value)),
            "reference_path" => self.reference_path = Some(PathBuf::from(value)),
            "meta_path" => self.meta_path = Some(PathBuf::from(value)),
            "emissions_dir" => self.emissions_dir = Some(PathBuf::from(value)),
            "wav_dir" => self.wav_dir = Some(PathBuf::from(value)),
            "lexicon_path" => self.lexicon_path = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = value.parse().map_err(|_| bad_num(key, value))?,
            "target_reject_rate" => {
                let v: f64 = value.parse().map_err(|_| bad_num(key, value))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Config(format!("target_reject_rate {v} outside [0, 1]")));
                }
                self.target_reject_rate = v;
            }
            "alpha" => self.alpha = value.parse()?,
            "strategy" => self.strategy = value.parse()?,
            "train_subsets" => self.train_subsets = parse_subsets(value)?,
            "eval_subsets" => self.eval_subsets = parse_subsets(value)?,
            "accept_twer" => self.accept_twer = value.parse().map_err(|_| bad_num(key, value))?,
            "snr_default_db" => {
                self.snr_default_db = value.parse().map_err(|_| bad_num(key, value))?
            }
            "gap_confidence" => {
                let v: f64 = value.parse().map_err(|_| bad_num(key, value))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Config(format!("gap_confidence {v} outside [0, 1]")));
                }
                self.gap_confidence = v;
            }
            "gbm_rounds" => self.gbm.rounds = value.parse().map_err(|_| bad_num(key, value))?,
            "gbm_learning_rate" => {
                self.gbm.learning_rate = value.parse().map_err(|_| bad_num(key, value))?
            }
            "gbm_max_depth" => {
                self.gbm.max_depth = value.parse().map_err(|_| bad_num(key, value))?
            }
            "gbm_min_samples_leaf" => {
                self.gbm.min_samples_leaf = value.parse().map_err(|_| bad_num(key, value))?
            }
            _ => {
                if let Some(canonical) = key.strip_prefix("column.") {
                    let map = std::mem::take(&mut self.column_map);
                    self.column_map = map.rename(canonical, value);
                } else {
                    return Err(Error::Config(format!("unknown config key {key:?}")));
                }
            }
        }
        Ok(())
    }

    /// Reads a flat `key = value` file with `#` comments.
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        cfg.merge_file(path)?;
        Ok(cfg)
    }

    /// Applies settings from a config file on top of the current values.
    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let name = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(&name, i + 1, "expected key = value"));
            };
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::parse(&name, i + 1, e.to_string()))?;
        }
        Ok(())
    }

    /// Loads the corpus named by the config paths.
    pub fn load_corpus(&self) -> Result<Corpus> {
        let response = self
            .response_path
            .as_ref()
            .ok_or_else(|| Error::Config("response_path is not set".to_string()))?;
        let reference = self
            .reference_path
            .as_ref()
            .ok_or_else(|| Error::Config("reference_path is not set".to_string()))?;
        load_corpus(response, reference, self.meta_path.as_deref(), &self.column_map)
    }
}

/// Where per-utterance emission matrices come from.
#[derive(Debug, Clone, Default)]
pub enum EmissionProvider {
    #[default]
    None,
    Dir(PathBuf),
    Memory(BTreeMap<String, EmissionMatrix>),
}

impl EmissionProvider {
    /// Builds a directory provider, degrading to `None` (with a warning on
    /// stderr) when the directory does not exist.
    pub fn from_dir(dir: Option<&Path>) -> EmissionProvider {
        match dir {
            Some(d) if d.is_dir() => EmissionProvider::Dir(d.to_path_buf()),
            Some(d) => {
                eprintln!(
                    "warning: emissions dir {} not found; alignment features disabled",
                    d.display()
                );
                EmissionProvider::None
            }
            None => EmissionProvider::None,
        }
    }

    /// The emission matrix for an utterance, if one exists.
    pub fn get(&self, utt: &Utterance) -> Result<Option<EmissionMatrix>> {
        match self {
            EmissionProvider::None => Ok(None),
            EmissionProvider::Memory(map) => Ok(map.get(&utt.id).cloned()),
            EmissionProvider::Dir(dir) => match &utt.emission_ref {
                None => Ok(None),
                Some(key) => {
                    let path = dir.join(key);
                    if path.is_file() {
                        load_emissions_file(&path).map(Some)
                    } else {
                        Ok(None)
                    }
                }
            },
        }
    }
}

/// Lazily measured per-utterance SNR with a configured fallback.
struct SnrCache {
    wav_dir: Option<PathBuf>,
    default_db: f64,
    cache: BTreeMap<String, (f64, f64)>,
}

impl SnrCache {
    fn new(wav_dir: Option<&Path>, default_db: f64) -> SnrCache {
        if let Some(d) = wav_dir {
            if !d.is_dir() {
                eprintln!("warning: wav dir {} not found; using default SNR", d.display());
                return SnrCache {
                    wav_dir: None,
                    default_db,
                    cache: BTreeMap::new(),
                };
            }
        }
        SnrCache {
            wav_dir: wav_dir.map(Path::to_path_buf),
            default_db,
            cache: BTreeMap::new(),
        }
    }

    /// `(snr_db, has_snr)` for the utterance.
    fn get(&mut self, utterance_id: &str) -> (f64, f64) {
        if let Some(&hit) = self.cache.get(utterance_id) {
            return hit;
        }
        let measured = self
            .wav_dir
            .as_ref()
            .map(|d| d.join(format!("{utterance_id}.wav")))
            .filter(|p| p.is_file())
            .and_then(|p| wav_snr(&p).ok());
        let value = match measured {
            Some(db) => (db, 1.0),
            None => (self.default_db, 0.0),
        };
        self.cache.insert(utterance_id.to_string(), value);
        value
    }
}

/// Per-response word features plus the shared lattice metadata.
struct UtteranceEvidence {
    word_features: Vec<Vec<WordFeatures>>,
    peer: Vec<crate::metrics::PeerAgreement>,
}

fn gather_evidence(
    utt: &Utterance,
    responses: &[&Response],
    emissions: &EmissionProvider,
    stats: &BTreeMap<String, WorkerStats>,
    lexicon: &Lexicon,
) -> Result<UtteranceEvidence> {
    let transcripts: Vec<TokenSeq> = responses.iter().map(|r| r.text.clone()).collect();
    let lattice_cfg = FusionConfig {
        alignment_order: AlignmentOrder::Given,
        ..FusionConfig::default()
    };
    let lattice = build_lattice(&transcripts, &lattice_cfg)?;
    let em = emissions.get(utt)?;
    let mut word_features = Vec::with_capacity(responses.len());
    for (i, r) in responses.iter().enumerate() {
        // Unencodable tokens (digits, unknown markers) or an infeasible span
        // degrade to the sentinel for the whole response.
        let scores = em
            .as_ref()
            .and_then(|em| word_alignment_scores(em, &r.text).ok());
        let accept_rate = stats.get(&r.worker_id).map_or(1.0, |s| s.accept_rate);
        word_features.push(extract_word_features(
            &lattice,
            i,
            scores.as_deref(),
            accept_rate,
            lexicon,
        )?);
    }
    Ok(UtteranceEvidence {
        word_features,
        peer: agreement_features(&transcripts),
    })
}

fn utterance_row(
    utt: &Utterance,
    response: &Response,
    word_confs: &[f64],
    peer: &crate::metrics::PeerAgreement,
    stats: &BTreeMap<String, WorkerStats>,
    snr: (f64, f64),
) -> UtteranceFeatures {
    let (mean_conf, min_conf) = if word_confs.is_empty() {
        (0.0, 0.0)
    } else {
        let sum: f64 = word_confs.iter().sum();
        let min = word_confs.iter().fold(f64::INFINITY, |m, &c| m.min(c));
        (sum / word_confs.len() as f64, min)
    };
    UtteranceFeatures {
        audio_duration: utt.audio_duration.unwrap_or(0.0),
        transcript_length: response.text.len() as f64,
        snr_db: snr.0,
        has_snr: snr.1,
        spend_time: response.spend_time.unwrap_or(0.0),
        worker_accept_rate: stats.get(&response.worker_id).map_or(1.0, |s| s.accept_rate),
        mean_peer_distance: peer.mean_peer_distance,
        min_peer_distance: peer.min_peer_distance,
        mean_word_confidence: mean_conf,
        min_word_confidence: min_conf,
    }
}

/// Everything trained on the training subsets.
#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub word_model: LogisticModel,
    pub utterance_model: UtteranceModel,
    pub alpha: f64,
    /// `(alpha, pooled TWER)` grid when alpha was tuned.
    pub alpha_grid: Option<Vec<(f64, f64)>>,
    pub lexicon: Lexicon,
    pub worker_stats: BTreeMap<String, WorkerStats>,
    pub decisions: DecisionMap,
}

fn stage(name: &str, e: Error) -> Error {
    match e {
        Error::InvalidData(m) => Error::InvalidData(format!("{name}: {m}")),
        Error::Config(m) => Error::Config(format!("{name}: {m}")),
        Error::Internal(m) => Error::Internal(format!("{name}: {m}")),
        Error::Infeasible(m) => Error::Infeasible(format!("{name}: {m}")),
        other => other,
    }
}

fn build_lexicon(corpus: &Corpus, cfg: &PipelineConfig) -> Result<Lexicon> {
    match &cfg.lexicon_path {
        Some(p) => Lexicon::load(p).map_err(|e| stage("lexicon", e)),
        None => {
            let train = corpus.split(&cfg.train_subsets);
            let words = train
                .utterances()
                .filter_map(|u| u.reference.as_ref())
                .flat_map(|t| t.iter().map(String::as_str));
            Ok(Lexicon::from_words(words))
        }
    }
}

/// One word's features plus its reference-alignment label.
#[derive(Debug, Clone)]
pub struct LabeledWordRow {
    pub utterance_id: String,
    pub worker_id: String,
    pub features: WordFeatures,
    /// Whether the word aligned as an exact match against the reference.
    pub correct: bool,
}

/// Extracts labeled word rows for the given subsets, using the adjudication
/// and lexicon conventions of [`train_models`]. Utterances without a
/// reference are skipped.
pub fn word_training_data(
    corpus: &Corpus,
    subsets: &[Subset],
    cfg: &PipelineConfig,
    emissions: &EmissionProvider,
) -> Result<Vec<LabeledWordRow>> {
    let lexicon = build_lexicon(corpus, cfg)?;
    let decisions = adjudicate(corpus, &cfg.train_subsets, cfg.accept_twer);
    let worker_stats = compute_worker_stats(corpus, Some(&decisions));
    let split = corpus.split(subsets);
    let mut out = Vec::new();
    for utt in split.utterances() {
        let responses: Vec<&Response> = split.responses_for(&utt.id).iter().collect();
        if responses.is_empty() {
            continue;
        }
        let Some(reference) = utt.reference.as_ref() else {
            continue;
        };
        let evidence = gather_evidence(utt, &responses, emissions, &worker_stats, &lexicon)?;
        for (i, r) in responses.iter().enumerate() {
            let alignment = edit_align(&r.text, reference);
            let mut labels = vec![false; r.text.len()];
            for op in &alignment.ops {
                if let Some(h) = op.hyp_index {
                    labels[h] = op.op == EditOp::Match;
                }
            }
            for (f, &correct) in evidence.word_features[i].iter().zip(&labels) {
                out.push(LabeledWordRow {
                    utterance_id: utt.id.clone(),
                    worker_id: r.worker_id.clone(),
                    features: *f,
                    correct,
                });
            }
        }
    }
    Ok(out)
}

/// Adjudicates training responses against their references: accepted when
/// TWER stays at or below the configured bar.
pub fn adjudicate(corpus: &Corpus, subsets: &[Subset], accept_twer: f64) -> DecisionMap {
    let train = corpus.split(subsets);
    let mut decisions = DecisionMap::new();
    for r in train.responses() {
        let Some(reference) = train.utterance(&r.utterance_id).and_then(|u| u.reference.as_ref())
        else {
            continue;
        };
        if reference.is_empty() {
            continue;
        }
        let twer = edit_align(&r.text, reference).distance as f64 / reference.len() as f64;
        decisions.insert((r.utterance_id.clone(), r.submit_order), twer <= accept_twer);
    }
    decisions
}

/// Trains the word CEM, the utterance CEM (with calibrated threshold), and
/// tunes the fusion weight, all on the configured training subsets.
pub fn train_models(
    corpus: &Corpus,
    cfg: &PipelineConfig,
    emissions: &EmissionProvider,
) -> Result<TrainedModels> {
    let train = corpus.split(&cfg.train_subsets);
    if train.response_count() == 0 {
        return Err(Error::InvalidData(
            "training subsets contain no responses".to_string(),
        ));
    }

    let lexicon = build_lexicon(corpus, cfg)?;

    let decisions = adjudicate(corpus, &cfg.train_subsets, cfg.accept_twer);
    let worker_stats = compute_worker_stats(corpus, Some(&decisions));
    let mut snr = SnrCache::new(cfg.wav_dir.as_deref(), cfg.snr_default_db);

    // One pass over the training split gathers word rows and, once the word
    // model exists, a second pass scores confidences for the utterance rows.
    let mut word_rows: Vec<WordFeatures> = Vec::new();
    let mut word_labels: Vec<bool> = Vec::new();
    struct PendingUtterance<'a> {
        utt: &'a Utterance,
        responses: Vec<&'a Response>,
        evidence: UtteranceEvidence,
    }
    let mut pending: Vec<PendingUtterance<'_>> = Vec::new();

    for utt in train.utterances() {
        let responses: Vec<&Response> = train.responses_for(&utt.id).iter().collect();
        if responses.is_empty() {
            continue;
        }
        let Some(reference) = utt.reference.as_ref() else {
            continue;
        };
        let evidence = gather_evidence(utt, &responses, emissions, &worker_stats, &lexicon)
            .map_err(|e| stage("word features", e))?;
        for (i, r) in responses.iter().enumerate() {
            let alignment = edit_align(&r.text, reference);
            let mut labels = vec![false; r.text.len()];
            for op in &alignment.ops {
                if let Some(h) = op.hyp_index {
                    labels[h] = op.op == EditOp::Match;
                }
            }
            word_rows.extend_from_slice(&evidence.word_features[i]);
            word_labels.extend_from_slice(&labels);
        }
        pending.push(PendingUtterance { utt, responses, evidence });
    }

    let word_model = train_word_cem(&word_rows, &word_labels).map_err(|e| stage("word cem", e))?;

    let mut utt_rows: Vec<UtteranceFeatures> = Vec::new();
    let mut utt_targets: Vec<f64> = Vec::new();
    let mut fusion_inputs: Vec<FusionInput> = Vec::new();
    let fusion_cfg = FusionConfig {
        gap_confidence: cfg.gap_confidence,
        ..FusionConfig::default()
    };

    for p in &pending {
        let reference = p.utt.reference.as_ref().expect("pending utterances have references");
        let snr_value = snr.get(&p.utt.id);
        let mut confs: Vec<Vec<f64>> = Vec::with_capacity(p.responses.len());
        for (i, r) in p.responses.iter().enumerate() {
            let c = score_words(&word_model, &p.evidence.word_features[i], r.text.tokens())
                .map_err(|e| stage("word scoring", e))?;
            utt_rows.push(utterance_row(
                p.utt,
                r,
                &c,
                &p.evidence.peer[i],
                &worker_stats,
                snr_value,
            ));
            utt_targets.push(edit_align(&r.text, reference).distance as f64);
            confs.push(c);
        }
        if p.responses.len() >= 2 {
            fusion_inputs.push(FusionInput {
                reference: reference.clone(),
                transcripts: p.responses.iter().map(|r| r.text.clone()).collect(),
                confidences: confs,
            });
        }
    }

    let gbm = train_utterance_gbm(&utt_rows, &utt_targets, &cfg.gbm)
        .map_err(|e| stage("utterance cem", e))?;
    let threshold = calibrate_threshold(&gbm, &utt_rows, cfg.target_reject_rate)
        .map_err(|e| stage("threshold calibration", e))?;
    let utterance_model = UtteranceModel {
        gbm,
        feature_names: UtteranceFeatures::NAMES.iter().map(|s| s.to_string()).collect(),
        threshold,
    };

    let (alpha, alpha_grid) = match cfg.alpha {
        AlphaSetting::Fixed(a) => (a, None),
        AlphaSetting::Tune => {
            let tuning =
                tune_alpha(&fusion_inputs, &fusion_cfg).map_err(|e| stage("alpha tuning", e))?;
            (tuning.alpha, Some(tuning.grid))
        }
    };

    Ok(TrainedModels {
        word_model,
        utterance_model,
        alpha,
        alpha_grid,
        lexicon,
        worker_stats,
        decisions,
    })
}

/// Loads persisted models back and rebuilds the corpus-derived parts
/// (adjudication decisions, worker stats, and the lexicon fallback).
///
/// Reads `word_cem.model`, `utterance_gbm.model`, `lexicon.tsv`, and, when
/// present, the tuned alpha from `fusion.tsv`.
pub fn load_models(
    models_dir: &Path,
    corpus: &Corpus,
    cfg: &PipelineConfig,
) -> Result<TrainedModels> {
    let word_model = crate::confidence::load_word_cem(&models_dir.join("word_cem.model"))?;
    let utterance_model =
        crate::confidence::load_utterance_model(&models_dir.join("utterance_gbm.model"))?;
    let lex_path = models_dir.join("lexicon.tsv");
    let lexicon = if lex_path.is_file() {
        Lexicon::load(&lex_path)?
    } else {
        build_lexicon(corpus, cfg)?
    };
    let mut alpha = match cfg.alpha {
        AlphaSetting::Fixed(a) => a,
        AlphaSetting::Tune => FusionConfig::default().alpha,
    };
    let fusion_path = models_dir.join("fusion.tsv");
    if fusion_path.is_file() {
        let text = fs::read_to_string(&fusion_path).map_err(|e| Error::io(&fusion_path, e))?;
        for line in text.lines() {
            if let Some(value) = line.strip_prefix("alpha\t") {
                alpha = value.trim().parse().map_err(|_| {
                    Error::parse(fusion_path.display().to_string(), 1, "bad alpha value")
                })?;
            }
        }
    }
    let decisions = adjudicate(corpus, &cfg.train_subsets, cfg.accept_twer);
    let worker_stats = compute_worker_stats(corpus, Some(&decisions));
    Ok(TrainedModels {
        word_model,
        utterance_model,
        alpha,
        alpha_grid: None,
        lexicon,
        worker_stats,
        decisions,
    })
}

/// Error pool with enough bookkeeping for the report tables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PoolStats {
    pub breakdown: ErrorBreakdown,
    pub responses: usize,
    /// Total hypothesis words, for mean transcript length.
    pub words: usize,
}

impl PoolStats {
    fn add(&mut self, b: &ErrorBreakdown, words: usize) {
        self.breakdown.merge(b);
        self.responses += 1;
        self.words += words;
    }

    fn absorb(&mut self, other: &PoolStats) {
        self.breakdown.merge(&other.breakdown);
        self.responses += other.responses;
        self.words += other.words;
    }

    pub fn mean_words(&self) -> f64 {
        if self.responses == 0 {
            0.0
        } else {
            self.words as f64 / self.responses as f64
        }
    }
}

/// Everything measured on one subset during simulation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SubsetOutcome {
    pub utterances: usize,
    pub responses: usize,
    pub workers: usize,
    pub hours: f64,
    /// All responses, before any gating.
    pub raw: PoolStats,
    /// The pool left after the gate (rescues included).
    pub post_cem: PoolStats,
    /// Responses the gate accepted.
    pub accepted: PoolStats,
    /// Responses the gate rejected, whether or not one was rescued.
    pub rejected: PoolStats,
    /// The final per-utterance output of the selection strategy.
    pub final_output: ErrorBreakdown,
    pub reject_count: usize,
    pub decided: usize,
}

impl SubsetOutcome {
    pub fn reject_rate(&self) -> f64 {
        if self.decided == 0 {
            0.0
        } else {
            self.reject_count as f64 / self.decided as f64
        }
    }

    fn absorb(&mut self, other: &SubsetOutcome) {
        self.utterances += other.utterances;
        self.responses += other.responses;
        self.workers += other.workers;
        self.hours += other.hours;
        self.raw.absorb(&other.raw);
        self.post_cem.absorb(&other.post_cem);
        self.accepted.absorb(&other.accepted);
        self.rejected.absorb(&other.rejected);
        self.final_output.merge(&other.final_output);
        self.reject_count += other.reject_count;
        self.decided += other.decided;
    }
}

/// Gate-relevant scores for every response of one utterance.
struct UtteranceScores {
    confs: Vec<Vec<f64>>,
    preds: Vec<f64>,
    decisions: Vec<Decision>,
}

fn score_utterance(
    utt: &Utterance,
    responses: &[&Response],
    models: &TrainedModels,
    emissions: &EmissionProvider,
    snr: &mut SnrCache,
) -> Result<UtteranceScores> {
    let evidence = gather_evidence(utt, responses, emissions, &models.worker_stats, &models.lexicon)
        .map_err(|e| stage("evidence", e))?;
    let snr_value = snr.get(&utt.id);
    let mut scores = UtteranceScores {
        confs: Vec::with_capacity(responses.len()),
        preds: Vec::with_capacity(responses.len()),
        decisions: Vec::with_capacity(responses.len()),
    };
    for (i, r) in responses.iter().enumerate() {
        let c = score_words(&models.word_model, &evidence.word_features[i], r.text.tokens())
            .map_err(|e| stage("word scoring", e))?;
        let row = utterance_row(utt, r, &c, &evidence.peer[i], &models.worker_stats, snr_value);
        let pred = predict_expected_errors(&models.utterance_model.gbm, &row);
        scores.decisions.push(decide(pred, models.utterance_model.threshold));
        scores.preds.push(pred);
        scores.confs.push(c);
    }
    Ok(scores)
}

/// One response's gate verdict and word confidences.
#[derive(Debug, Clone)]
pub struct ScoredResponse {
    pub utterance_id: String,
    pub worker_id: String,
    pub submit_order: u32,
    pub predicted_errors: f64,
    pub decision: Decision,
    pub word_confidences: Vec<f64>,
}

/// Scores every response in the given subsets, in utterance-id order.
pub fn score_corpus(
    corpus: &Corpus,
    subsets: &[Subset],
    cfg: &PipelineConfig,
    models: &TrainedModels,
    emissions: &EmissionProvider,
) -> Result<Vec<ScoredResponse>> {
    let split = corpus.split(subsets);
    let mut snr = SnrCache::new(cfg.wav_dir.as_deref(), cfg.snr_default_db);
    let mut out = Vec::new();
    for utt in split.utterances() {
        let responses: Vec<&Response> = split.responses_for(&utt.id).iter().collect();
        if responses.is_empty() {
            continue;
        }
        let scores = score_utterance(utt, &responses, models, emissions, &mut snr)?;
        for (i, r) in responses.iter().enumerate() {
            out.push(ScoredResponse {
                utterance_id: r.utterance_id.clone(),
                worker_id: r.worker_id.clone(),
                submit_order: r.submit_order,
                predicted_errors: scores.preds[i],
                decision: scores.decisions[i],
                word_confidences: scores.confs[i].clone(),
            });
        }
    }
    Ok(out)
}

/// Full simulation result.
#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub strategy: Strategy,
    pub alpha: f64,
    pub seed: u64,
    pub target_reject_rate: f64,
    pub threshold: f64,
    pub per_subset: BTreeMap<Subset, SubsetOutcome>,
    pub overall: SubsetOutcome,
    /// Final transcript per utterance.
    pub hypotheses: BTreeMap<String, String>,
}

/// Runs the reject/relabel gate and the final-selection strategy over the
/// evaluation subsets.
pub fn simulate(
    corpus: &Corpus,
    cfg: &PipelineConfig,
    models: &TrainedModels,
    emissions: &EmissionProvider,
) -> Result<SimulationReport> {
    let eval = corpus.split(&cfg.eval_subsets);
    if cfg.strategy == Strategy::Oracle {
        if let Some(u) = eval.utterances().find(|u| u.reference.is_none()) {
            return Err(Error::InvalidData(format!(
                "strategy oracle needs references, but utterance {} has none",
                u.id
            )));
        }
    }
    let ranking: WorkerRanking = if cfg.strategy == Strategy::BestWorker {
        rank_workers(corpus)?
    } else {
        WorkerRanking::new()
    };
    let mut snr = SnrCache::new(cfg.wav_dir.as_deref(), cfg.snr_default_db);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fusion_cfg = FusionConfig {
        alpha: models.alpha,
        gap_confidence: cfg.gap_confidence,
        alignment_order: AlignmentOrder::ConfidenceDesc,
    };

    let mut per_subset: BTreeMap<Subset, SubsetOutcome> = BTreeMap::new();
    let mut hypotheses: BTreeMap<String, String> = BTreeMap::new();

    for subset in &cfg.eval_subsets {
        let split = eval.split(&[*subset]);
        let outcome = per_subset.entry(*subset).or_default();
        outcome.utterances = split.utterance_count();
        outcome.responses = split.response_count();
        outcome.workers = split.worker_ids().len();
        outcome.hours = split
            .utterances()
            .filter_map(|u| u.audio_duration)
            .sum::<f64>()
            / 3600.0;
    }

    for utt in eval.utterances() {
        let responses: Vec<&Response> = eval.responses_for(&utt.id).iter().collect();
        if responses.is_empty() {
            continue;
        }
        let UtteranceScores { confs, preds, decisions } =
            score_utterance(utt, &responses, models, emissions, &mut snr)?;

        let accepted_idx: Vec<usize> = (0..responses.len())
            .filter(|&i| decisions[i] == Decision::Accept)
            .collect();
        // Pool exhaustion: every response got rejected, so the least-bad one
        // (by predicted errors, then submission order) is kept anyway.
        let pool_idx: Vec<usize> = if accepted_idx.is_empty() {
            let best = (0..responses.len())
                .min_by(|&a, &b| {
                    preds[a]
                        .partial_cmp(&preds[b])
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(responses[a].submit_order.cmp(&responses[b].submit_order))
                })
                .expect("non-empty responses");
            vec![best]
        } else {
            accepted_idx.clone()
        };

        let pool: Vec<&Response> = pool_idx.iter().map(|&i| responses[i]).collect();
        let final_tokens: TokenSeq = match cfg.strategy {
            Strategy::Ecm | Strategy::Rover => {
                let alpha = if cfg.strategy == Strategy::Rover { 1.0 } else { fusion_cfg.alpha };
                let texts: Vec<TokenSeq> = pool.iter().map(|r| r.text.clone()).collect();
                let pool_confs: Vec<Vec<f64>> =
                    pool_idx.iter().map(|&i| confs[i].clone()).collect();
                fuse(&texts, &pool_confs, &FusionConfig { alpha, ..fusion_cfg })
                    .map_err(|e| stage("fusion", e))?
            }
            Strategy::Random => select_random(&pool, &mut rng)?.text.clone(),
            Strategy::Longest => select_longest(&pool)?.text.clone(),
            Strategy::BestWorker => select_best_worker(&pool, &ranking)?.text.clone(),
            Strategy::Oracle => {
                let reference = utt.reference.as_ref().expect("checked above");
                select_oracle(&pool, reference)?.text.clone()
            }
        };
        hypotheses.insert(utt.id.clone(), final_tokens.joined());

        let outcome = per_subset.entry(utt.subset).or_default();
        outcome.decided += responses.len();
        outcome.reject_count += responses.len() - accepted_idx.len();

        if let Some(reference) = utt.reference.as_ref() {
            if !reference.is_empty() {
                for (i, r) in responses.iter().enumerate() {
                    let b = breakdown(&r.text, reference)?;
                    outcome.raw.add(&b, r.text.len());
                    if decisions[i] == Decision::Accept {
                        outcome.accepted.add(&b, r.text.len());
                    } else {
                        outcome.rejected.add(&b, r.text.len());
                    }
                }
                for &i in &pool_idx {
                    let b = breakdown(&responses[i].text, reference)?;
                    outcome.post_cem.add(&b, responses[i].text.len());
                }
                outcome.final_output.merge(&breakdown(&final_tokens, reference)?);
            }
        }
    }

    let mut overall = SubsetOutcome::default();
    for outcome in per_subset.values() {
        overall.absorb(outcome);
    }
    overall.workers = eval.worker_ids().len();

    Ok(SimulationReport {
        strategy: cfg.strategy,
        alpha: models.alpha,
        seed: cfg.seed,
        target_reject_rate: cfg.target_reject_rate,
        threshold: models.utterance_model.threshold,
        per_subset,
        overall,
        hypotheses,
    })
}

/// Reads a hypotheses TSV (`utterance_id<TAB>text`). A header line starting
/// with `utterance_id` and `#` comments are skipped; text is normalized.
pub fn read_hypotheses(path: &Path) -> Result<BTreeMap<String, TokenSeq>> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((id, hyp)) = line.split_once('\t') else {
            return Err(Error::parse(&name, i + 1, "expected utterance_id<TAB>text"));
        };
        if i == 0 && id == "utterance_id" {
            continue;
        }
        out.insert(id.to_string(), crate::corpus::normalize_text(hyp));
    }
    Ok(out)
}

/// Word confidences keyed by `(utterance_id, worker_id)` then word index.
pub type ConfidenceMap = BTreeMap<(String, String), BTreeMap<usize, f64>>;

/// Reads a per-word confidence TSV
/// (`utterance_id<TAB>worker_id<TAB>word_index<TAB>confidence`), header
/// optional.
pub fn read_confidences(path: &Path) -> Result<ConfidenceMap> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = ConfidenceMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(&name, i + 1, format!("expected 4 columns, got {}", fields.len())));
        }
        if i == 0 && fields[0] == "utterance_id" {
            continue;
        }
        let index: usize = fields[2]
            .parse()
            .map_err(|_| Error::parse(&name, i + 1, format!("bad word index {:?}", fields[2])))?;
        let confidence: f64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(&name, i + 1, format!("bad confidence {:?}", fields[3])))?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::parse(&name, i + 1, format!("confidence {confidence} outside [0, 1]")));
        }
        out.entry((fields[0].to_string(), fields[1].to_string()))
            .or_default()
            .insert(index, confidence);
    }
    Ok(out)
}

/// Fuses every utterance's responses into one hypothesis.
///
/// Words without an entry in `confidences` get 0.5; with no map at all every
/// word does, which reduces Eq. 2 scoring to agreement counts plus a flat
/// confidence term.
pub fn aggregate_corpus(
    corpus: &Corpus,
    confidences: Option<&ConfidenceMap>,
    config: &FusionConfig,
) -> Result<BTreeMap<String, TokenSeq>> {
    let mut out = BTreeMap::new();
    for utt in corpus.utterances() {
        let responses = corpus.responses_for(&utt.id);
        if responses.is_empty() {
            continue;
        }
        let texts: Vec<TokenSeq> = responses.iter().map(|r| r.text.clone()).collect();
        let mut confs: Vec<Vec<f64>> = Vec::with_capacity(responses.len());
        for r in responses {
            let mut c = vec![0.5; r.text.len()];
            if let Some(map) = confidences {
                if let Some(entries) = map.get(&(r.utterance_id.clone(), r.worker_id.clone())) {
                    for (&index, &value) in entries {
                        if index >= c.len() {
                            return Err(Error::InvalidData(format!(
                                "confidence index {index} out of range for {} ({} words)",
                                r.utterance_id,
                                c.len()
                            )));
                        }
                        c[index] = value;
                    }
                }
            }
            confs.push(c);
        }
        let fused = fuse(&texts, &confs, config)?;
        out.insert(utt.id.clone(), fused);
    }
    Ok(out)
}

/// Files written by [`end_to_end`].
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: SimulationReport,
    pub files: Vec<PathBuf>,
}

/// Loads data, trains everything, simulates, and writes all artifacts.
///
/// Identical config and seed produce byte-identical files.
pub fn end_to_end(cfg: &PipelineConfig) -> Result<RunArtifacts> {
    let corpus = cfg.load_corpus().map_err(|e| stage("load", e))?;
    let emissions = EmissionProvider::from_dir(cfg.emissions_dir.as_deref());
    end_to_end_with(cfg, &corpus, &emissions)
}

/// [`end_to_end`] over an already-loaded corpus and emission source.
pub fn end_to_end_with(
    cfg: &PipelineConfig,
    corpus: &Corpus,
    emissions: &EmissionProvider,
) -> Result<RunArtifacts> {
    let models = train_models(corpus, cfg, emissions).map_err(|e| stage("train", e))?;
    let report = simulate(corpus, cfg, &models, emissions).map_err(|e| stage("simulate", e))?;

    let out = &cfg.out_dir;
    let models_dir = out.join("models");
    fs::create_dir_all(&models_dir).map_err(|e| Error::io(&models_dir, e))?;
    let mut files = Vec::new();

    let report_tsv = out.join("report.tsv");
    fs::write(&report_tsv, crate::report::tsv_for(&report))
        .map_err(|e| Error::io(&report_tsv, e))?;
    files.push(report_tsv);

    let report_md = out.join("report.md");
    fs::write(&report_md, crate::report::markdown_for(&report))
        .map_err(|e| Error::io(&report_md, e))?;
    files.push(report_md);

    let hyp_path = out.join("hypotheses.tsv");
    let mut hyp = String::from("utterance_id\thypothesis\n");
    for (id, text) in &report.hypotheses {
        hyp.push_str(id);
        hyp.push('\t');
        hyp.push_str(text);
        hyp.push('\n');
    }
    fs::write(&hyp_path, hyp).map_err(|e| Error::io(&hyp_path, e))?;
    files.push(hyp_path);

    let word_path = models_dir.join("word_cem.model");
    crate::confidence::save_word_cem(&word_path, &models.word_model)?;
    files.push(word_path);

    let utt_path = models_dir.join("utterance_gbm.model");
    crate::confidence::save_utterance_model(&utt_path, &models.utterance_model)?;
    files.push(utt_path);

    let lex_path = models_dir.join("lexicon.tsv");
    models.lexicon.save(&lex_path)?;
    files.push(lex_path);

    let fusion_path = models_dir.join("fusion.tsv");
    let mut fusion_text = format!("alpha\t{}\n", models.alpha);
    if let Some(grid) = &models.alpha_grid {
        for (a, t) in grid {
            fusion_text.push_str(&format!("grid\t{a}\t{t}\n"));
        }
    }
    fs::write(&fusion_path, fusion_text).map_err(|e| Error::io(&fusion_path, e))?;
    files.push(fusion_path);

    Ok(RunArtifacts { report, files })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parses_and_rejects() {
        let mut cfg = PipelineConfig::default();
        cfg.set("seed", "99").unwrap();
        cfg.set("alpha", "tune").unwrap();
        cfg.set("alpha", "0.8").unwrap();
        assert_eq!(cfg.alpha, AlphaSetting::Fixed(0.8));
        cfg.set("strategy", "best-worker").unwrap();
        cfg.set("train_subsets", "train-other-10h, train-mixed-10h").unwrap();
        assert_eq!(cfg.train_subsets.len(), 2);
        cfg.set("column.raw_text", "transcription").unwrap();
        assert!(cfg.set("alpha", "1.5").is_err());
        assert!(cfg.set("strategy", "psychic").is_err());
        assert!(cfg.set("no_such_key", "1").is_err());
        assert!(cfg.set("target_reject_rate", "2").is_err());
    }

    #[test]
    fn config_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pipeline.conf");
        std::fs::write(
            &path,
            "# comment\nseed = 123\nalpha = tune\nstrategy = rover\n\ntarget_reject_rate = 0.1\n",
        )
        .unwrap();
        let cfg = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.seed, 123);
        assert_eq!(cfg.alpha, AlphaSetting::Tune);
        assert_eq!(cfg.strategy, Strategy::Rover);
        assert!((cfg.target_reject_rate - 0.1).abs() < 1e-12);

        std::fs::write(&path, "seed 123\n").unwrap();
        assert!(PipelineConfig::load(&path).is_err());
    }

    #[test]
    fn missing_paths_are_config_errors() {
        let cfg = PipelineConfig::default();
        let err = cfg.load_corpus().unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    fn small_synth() -> crate::synth::SynthCorpus {
        let cfg = crate::synth::SynthConfig {
            scale: 0.12,
            ..crate::synth::SynthConfig::default()
        };
        crate::synth::generate(&cfg).unwrap()
    }

    #[test]
    fn train_and_simulate_smoke() {
        let synth = small_synth();
        let emissions = EmissionProvider::Memory(synth.emissions.clone());
        let cfg = PipelineConfig::default();
        let models = train_models(&synth.corpus, &cfg, &emissions).unwrap();

        assert!((0.0..=1.0).contains(&models.alpha));
        assert_eq!(models.alpha_grid.as_ref().map(Vec::len), Some(21));
        assert!(models.utterance_model.threshold.is_finite());
        assert_eq!(models.word_model.feature_names.len(), WordFeatures::NAMES.len());
        assert!(!models.decisions.is_empty());

        let report = simulate(&synth.corpus, &cfg, &models, &emissions).unwrap();
        assert_eq!(report.per_subset.len(), cfg.eval_subsets.len());
        let eval = synth.corpus.split(&cfg.eval_subsets);
        assert_eq!(report.hypotheses.len(), eval.utterance_count());
        assert_eq!(report.overall.decided, eval.response_count());

        let expected_ref_words: usize = eval
            .utterances()
            .filter_map(|u| u.reference.as_ref())
            .map(TokenSeq::len)
            .sum();
        assert_eq!(report.overall.final_output.ref_words, expected_ref_words);
        for outcome in report.per_subset.values() {
            assert_eq!(
                outcome.accepted.responses + outcome.rejected.responses,
                outcome.raw.responses
            );
            assert!(outcome.post_cem.responses <= outcome.raw.responses);
            // Every utterance keeps at least one response, by rescue if needed.
            assert!(outcome.post_cem.responses >= outcome.utterances);
            let rate = outcome.reject_rate();
            assert!((0.0..=1.0).contains(&rate));
        }
        // The gate should drop the pooled error rate, not raise it.
        assert!(
            report.overall.post_cem.breakdown.twer() <= report.overall.raw.breakdown.twer() + 1e-12
        );
    }

    #[test]
    fn rover_strategy_is_alpha_one_fusion() {
        let synth = small_synth();
        let emissions = EmissionProvider::Memory(synth.emissions.clone());
        let mut cfg = PipelineConfig {
            alpha: AlphaSetting::Fixed(1.0),
            ..PipelineConfig::default()
        };
        cfg.eval_subsets = vec![Subset::DevClean, Subset::TestOther];
        let models = train_models(&synth.corpus, &cfg, &emissions).unwrap();

        let ecm = simulate(&synth.corpus, &cfg, &models, &emissions).unwrap();
        let rover_cfg = PipelineConfig { strategy: Strategy::Rover, ..cfg.clone() };
        let rover = simulate(&synth.corpus, &rover_cfg, &models, &emissions).unwrap();
        assert_eq!(ecm.hypotheses, rover.hypotheses);
        assert_eq!(ecm.overall.final_output, rover.overall.final_output);
    }

    #[test]
    fn gate_threshold_extremes_behave() {
        let synth = small_synth();
        let emissions = EmissionProvider::Memory(synth.emissions.clone());
        let mut cfg = PipelineConfig {
            alpha: AlphaSetting::Fixed(0.8),
            ..PipelineConfig::default()
        };
        cfg.eval_subsets = vec![Subset::DevClean];
        let models = train_models(&synth.corpus, &cfg, &emissions).unwrap();

        let mut lenient = models.clone();
        lenient.utterance_model.threshold = f64::INFINITY;
        let open = simulate(&synth.corpus, &cfg, &lenient, &emissions).unwrap();
        assert_eq!(open.overall.reject_count, 0);
        assert_eq!(open.overall.post_cem, open.overall.raw);

        let mut strict = models.clone();
        strict.utterance_model.threshold = -1.0;
        let closed = simulate(&synth.corpus, &cfg, &strict, &emissions).unwrap();
        assert_eq!(closed.overall.reject_count, closed.overall.decided);
        // Pool exhaustion rescues exactly one response per utterance.
        assert_eq!(closed.overall.post_cem.responses, closed.overall.utterances);

        // Monotone gate: raising the threshold never raises the reject rate.
        let trained = simulate(&synth.corpus, &cfg, &models, &emissions).unwrap();
        assert!(closed.overall.reject_count >= trained.overall.reject_count);
        assert!(trained.overall.reject_count >= open.overall.reject_count);
    }

    #[test]
    fn scoring_round_trips_through_saved_models() {
        let synth = small_synth();
        let emissions = EmissionProvider::Memory(synth.emissions.clone());
        let mut cfg = PipelineConfig {
            alpha: AlphaSetting::Fixed(0.6),
            ..PipelineConfig::default()
        };
        cfg.eval_subsets = vec![Subset::TestClean];
        let models = train_models(&synth.corpus, &cfg, &emissions).unwrap();

        let dir = tempfile::tempdir().unwrap();
        crate::confidence::save_word_cem(&dir.path().join("word_cem.model"), &models.word_model)
            .unwrap();
        crate::confidence::save_utterance_model(
            &dir.path().join("utterance_gbm.model"),
            &models.utterance_model,
        )
        .unwrap();
        models.lexicon.save(&dir.path().join("lexicon.tsv")).unwrap();
        std::fs::write(dir.path().join("fusion.tsv"), format!("alpha\t{}\n", models.alpha))
            .unwrap();

        let loaded = load_models(dir.path(), &synth.corpus, &cfg).unwrap();
        assert_eq!(loaded.alpha, models.alpha);
        assert_eq!(loaded.worker_stats.len(), models.worker_stats.len());

        let direct = score_corpus(&synth.corpus, &cfg.eval_subsets, &cfg, &models, &emissions)
            .unwrap();
        let via_disk = score_corpus(&synth.corpus, &cfg.eval_subsets, &cfg, &loaded, &emissions)
            .unwrap();
        assert_eq!(direct.len(), via_disk.len());
        for (d, v) in direct.iter().zip(&via_disk) {
            assert_eq!(d.utterance_id, v.utterance_id);
            assert_eq!(d.submit_order, v.submit_order);
            assert_eq!(d.decision, v.decision);
            assert_eq!(d.predicted_errors, v.predicted_errors);
            assert_eq!(d.word_confidences, v.word_confidences);
        }
    }

    #[test]
    fn random_strategy_is_seed_stable() {
        let synth = small_synth();
        let emissions = EmissionProvider::Memory(synth.emissions.clone());
        let mut cfg = PipelineConfig {
            alpha: AlphaSetting::Fixed(0.8),
            strategy: Strategy::Random,
            ..PipelineConfig::default()
        };
        cfg.eval_subsets = vec![Subset::DevClean];
        let models = train_models(&synth.corpus, &cfg, &emissions).unwrap();
        let a = simulate(&synth.corpus, &cfg, &models, &emissions).unwrap();
        let b = simulate(&synth.corpus, &cfg, &models, &emissions).unwrap();
        assert_eq!(a.hypotheses, b.hypotheses);
    }

    #[test]
    fn end_to_end_writes_byte_identical_artifacts() {
        let synth = small_synth();
        let dir = tempfile::tempdir().unwrap();
        let files = crate::synth::write_corpus(&synth, dir.path()).unwrap();

        let mut cfg = PipelineConfig {
            alpha: AlphaSetting::Fixed(0.8),
            ..PipelineConfig::default()
        };
        cfg.response_path = Some(files.response_path.clone());
        cfg.reference_path = Some(files.reference_path.clone());
        cfg.meta_path = Some(files.meta_path.clone());
        cfg.emissions_dir = Some(files.emissions_dir.clone());
        cfg.eval_subsets = vec![Subset::DevClean, Subset::TestClean];

        cfg.out_dir = dir.path().join("run-a");
        let a = end_to_end(&cfg).unwrap();
        cfg.out_dir = dir.path().join("run-b");
        let b = end_to_end(&cfg).unwrap();

        assert_eq!(a.files.len(), b.files.len());
        assert_eq!(a.files.len(), 7);
        for (fa, fb) in a.files.iter().zip(&b.files) {
            let ba = std::fs::read(fa).unwrap();
            let bb = std::fs::read(fb).unwrap();
            assert_eq!(ba, bb, "{} differs between runs", fa.display());
        }

        let (meta, rows) = crate::report::parse_tsv(
            &std::fs::read_to_string(dir.path().join("run-a/report.tsv")).unwrap(),
        )
        .unwrap();
        assert_eq!(meta.seed, "17");
        assert_eq!(rows.len(), 3);
        assert_eq!(rows.last().unwrap().subset, "all");

        let word = crate::confidence::load_word_cem(&dir.path().join("run-a/models/word_cem.model"))
            .unwrap();
        assert_eq!(word.feature_names.len(), WordFeatures::NAMES.len());
        let utt = crate::confidence::load_utterance_model(
            &dir.path().join("run-a/models/utterance_gbm.model"),
        )
        .unwrap();
        assert!(utt.threshold.is_finite());
    }
}
