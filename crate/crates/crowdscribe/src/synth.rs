//! Deterministic synthetic corpus generator.
//!
//! Produces a corpus with the same shape as a real crowdsourced transcription
//! release at one tenth scale: seven subsets, roughly five responses per
//! utterance (one for the bulk training split), a shared worker pool with
//! quality tiers, and per-subset error rates calibrated so the raw TWER per
//! subset lands near the real release's published numbers.
//!
//! Error processes mirror what workers actually do: scattered typos and
//! mishearings, per-utterance "hard spots" where several workers make the
//! same mistake, uncertainty markers, filler insertions, and truncated or
//! empty submissions from careless workers. Short clips in a few subsets also
//! get synthetic CTC emission matrices derived from the reference text so the
//! alignment-score features have acoustic evidence to work with.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Response, Subset, TokenSeq, Utterance};
use crate::ctc::{standard_vocab, save_emissions_file, EmissionMatrix};
use crate::error::{Error, Result};

/// Number of distinct worker identities across all subsets.
pub const WORKER_POOL: usize = 440;

/// Probability that a submission is unusually careful: the transcriber
/// replayed the clip and proofread before submitting. Independent of the
/// worker's general quality band.
const DILIGENT_P: f64 = 0.30;

/// Error-rate factor applied to a diligent submission.
const DILIGENT_FACTOR: f64 = 0.12;

/// Compensating factor for the remaining submissions, chosen so the
/// expected per-word error rates of a subset stay at the spec values.
const SLOPPY_FACTOR: f64 = (1.0 - DILIGENT_P * DILIGENT_FACTOR) / (1.0 - DILIGENT_P);

/// Worker quality bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Good,
    Mediocre,
    Careless,
}

#[derive(Debug, Clone, Copy)]
struct WorkerProfile {
    tier: Tier,
    /// Scales the per-word error rates of whatever subset the worker is on.
    multiplier: f64,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn worker_profile(seed: u64, index: usize) -> WorkerProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(
        seed.wrapping_add(0x776f726b).wrapping_add((index as u64) << 17),
    ));
    let tier = match index % 20 {
        0..=15 => Tier::Good,
        16..=18 => Tier::Mediocre,
        _ => Tier::Careless,
    };
    let multiplier = match tier {
        Tier::Good => rng.gen_range(0.4..1.1),
        Tier::Mediocre => rng.gen_range(1.3..2.2),
        Tier::Careless => rng.gen_range(2.0..3.5),
    };
    WorkerProfile { tier, multiplier }
}

/// Per-subset generation knobs.
#[derive(Debug, Clone)]
pub struct SubsetSpec {
    pub subset: Subset,
    pub utterances: usize,
    pub responses: usize,
    pub workers: usize,
    pub words_lo: usize,
    pub words_hi: usize,
    /// Fraction of reference positions that get a shared canonical confusion.
    pub hard_fraction: f64,
    /// Baseline per-word rates for an average worker.
    pub sub_rate: f64,
    pub del_rate: f64,
    pub ins_rate: f64,
    pub unk_rate: f64,
}

/// Knob table calibrated against the published per-subset raw TWER.
pub fn default_specs() -> Vec<SubsetSpec> {
    let spec = |subset,
                utterances,
                responses,
                workers,
                words_lo,
                words_hi,
                hard_fraction,
                sub_rate,
                del_rate,
                ins_rate,
                unk_rate| SubsetSpec {
        subset,
        utterances,
        responses,
        workers,
        words_lo,
        words_hi,
        hard_fraction,
        sub_rate,
        del_rate,
        ins_rate,
        unk_rate,
    };
    vec![
        spec(Subset::TrainOther10h, 316, 1867, 126, 12, 48, 0.080, 0.0594, 0.0309, 0.0190, 0.0071),
        spec(Subset::TrainOther60h, 1782, 2019, 114, 14, 42, 0.050, 0.0245, 0.0064, 0.0070, 0.0035),
        spec(Subset::TrainMixed10h, 276, 1423, 62, 18, 42, 0.040, 0.0202, 0.0028, 0.0056, 0.0025),
        spec(Subset::DevClean, 270, 1399, 52, 10, 26, 0.040, 0.0162, 0.0026, 0.0043, 0.0019),
        spec(Subset::TestClean, 262, 1359, 53, 10, 26, 0.050, 0.0333, 0.0102, 0.0097, 0.0042),
        spec(Subset::DevOther, 286, 1524, 62, 11, 29, 0.070, 0.0519, 0.0253, 0.0178, 0.0068),
        spec(Subset::TestOther, 294, 1595, 99, 11, 29, 0.080, 0.0781, 0.0389, 0.0248, 0.0100),
    ]
}

/// Generator settings.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    /// Scales utterance/response/worker counts (1.0 = the default table).
    pub scale: f64,
    /// References at or below this length get synthetic emissions
    /// (only in train-other-10h, dev-clean, and test-clean).
    pub emission_max_words: usize,
    pub specs: Vec<SubsetSpec>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            scale: 1.0,
            emission_max_words: 18,
            specs: default_specs(),
        }
    }
}

/// A generated corpus plus its in-memory acoustic evidence.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub corpus: Corpus,
    /// Emission matrices keyed by utterance id.
    pub emissions: BTreeMap<String, EmissionMatrix>,
}

const FILLERS: [&str; 4] = ["um", "uh", "er", "ah"];

/// Real-word mishearings; both sides appear in the lexicon.
const CONFUSIONS: [(&str, &str); 22] = [
    ("there", "their"),
    ("to", "two"),
    ("for", "four"),
    ("no", "know"),
    ("new", "knew"),
    ("right", "write"),
    ("here", "hear"),
    ("see", "sea"),
    ("one", "won"),
    ("would", "wood"),
    ("plain", "plane"),
    ("whole", "hole"),
    ("great", "grate"),
    ("son", "sun"),
    ("night", "knight"),
    ("through", "threw"),
    ("road", "rode"),
    ("piece", "peace"),
    ("week", "weak"),
    ("our", "hour"),
    ("tale", "tail"),
    ("led", "lead"),
];

/// Vocabulary the synthetic references are drawn from, ordered by rank.
const LEXICON: [&str; 493] = [
    "the", "and", "of", "to", "a", "in", "that", "he", "was", "it", "his", "is", "with", "as",
    "had", "for", "her", "you", "not", "be", "she", "at", "on", "by", "have", "him", "but",
    "which", "this", "from", "all", "they", "were", "my", "are", "me", "one", "their", "so",
    "an", "said", "them", "we", "who", "would", "been", "will", "no", "when", "there", "if",
    "more", "out", "up", "into", "do", "any", "your", "what", "has", "man", "could", "other",
    "than", "our", "some", "very", "time", "upon", "about", "may", "its", "only", "now",
    "little", "like", "then", "can", "made", "should", "did", "us", "such", "great", "before",
    "must", "two", "these", "see", "know", "over", "much", "down", "after", "first", "mister",
    "good", "men", "own", "never", "most", "old", "shall", "day", "where", "those", "came",
    "come", "himself", "way", "work", "life", "without", "go", "make", "well", "through",
    "being", "long", "say", "might", "how", "am", "too", "even", "indeed", "again", "many",
    "back", "here", "think", "every", "people", "went", "same", "last", "thought", "away",
    "under", "take", "found", "hand", "eyes", "still", "place", "while", "just", "also",
    "young", "yet", "though", "against", "things", "get", "ever", "give", "god", "years",
    "off", "face", "nothing", "right", "once", "another", "left", "part", "saw", "house",
    "world", "head", "three", "word", "love", "let", "best", "night", "side", "rather",
    "heart", "far", "look", "father", "mother", "put", "because", "others", "room", "why",
    "new", "told", "knew", "since", "ask", "whom", "water", "light", "done", "heard",
    "looked", "moment", "both", "between", "four", "among", "asked", "case", "sir", "began",
    "country", "almost", "hands", "death", "poor", "having", "woman", "home", "name", "few",
    "toward", "always", "something", "turned", "called", "whole", "nor", "enough", "took",
    "end", "however", "course", "each", "half", "felt", "replied", "morning", "mind", "king",
    "themselves", "anything", "perhaps", "until", "against", "given", "better", "within",
    "point", "seen", "present", "soon", "fact", "voice", "matter", "air", "round", "open",
    "small", "gave", "find", "behind", "seemed", "power", "high", "often", "kind", "large",
    "close", "door", "words", "along", "together", "days", "less", "money", "order", "set",
    "near", "second", "brought", "need", "keep", "lady", "answer", "white", "stood", "war",
    "reason", "feet", "children", "certain", "land", "passed", "hundred", "across", "known",
    "become", "city", "sea", "full", "friend", "true", "several", "nature", "read", "sent",
    "general", "year", "black", "alone", "therefore", "sound", "doubt", "itself", "wish",
    "manner", "human", "question", "strong", "doctor", "five", "fire", "already", "woods",
    "table", "road", "subject", "making", "possible", "short", "help", "french", "family",
    "law", "thus", "hope", "really", "speak", "care", "either", "towards", "wife", "master",
    "live", "else", "form", "quite", "glad", "different", "town", "state", "none", "common",
    "book", "times", "church", "dear", "feel", "story", "earth", "free", "returned", "play",
    "suddenly", "horse", "ground", "act", "idea", "girl", "boy", "spirit", "week", "tree",
    "barn", "trees", "sense", "blood", "strange", "ran", "deep", "rest", "taken", "hard",
    "plain", "plane", "wood", "won", "write", "hear", "son", "sun", "knight", "threw",
    "rode", "piece", "peace", "weak", "hour", "tale", "tail", "led", "lead", "friends",
    "began", "person", "example", "remember", "walked", "evening", "garden", "summer",
    "winter", "spring", "river", "mountain", "field", "window", "chair", "paper", "letter",
    "music", "silence", "sweet", "clear", "bright", "dark", "green", "blue", "golden",
    "silver", "stone", "bread", "dinner", "supper", "sleep", "dream", "waited", "carried",
    "followed", "appeared", "happened", "continued", "expected", "finally", "quickly",
    "slowly", "surely", "nearly", "hardly", "scarcely", "village", "castle", "palace",
    "soldier", "captain", "officer", "company", "business", "journey", "station", "street",
    "corner", "market", "school", "lesson", "picture", "beautiful", "wonderful", "terrible",
    "pleasant", "curious", "serious", "anxious", "ancient", "modern", "foreign", "private",
    "public", "single", "double", "simple", "easy", "heavy", "can't", "don't", "it's",
    "i'm", "didn't", "wouldn't", "that's", "isn't", "he's", "she's", "won't", "we're",
];

/// Word sampler with a Zipf-like rank distribution.
struct ZipfSampler {
    cumulative: Vec<f64>,
}

impl ZipfSampler {
    fn new(n: usize) -> ZipfSampler {
        let mut cumulative = Vec::with_capacity(n);
        let mut total = 0.0;
        for r in 0..n {
            total += 1.0 / ((r + 3) as f64).powf(1.05);
            cumulative.push(total);
        }
        for c in &mut cumulative {
            *c /= total;
        }
        ZipfSampler { cumulative }
    }

    fn draw(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        self.cumulative.partition_point(|&c| c < u).min(self.cumulative.len() - 1)
    }
}

/// Words available to the generator, in rank order.
pub fn lexicon_words() -> &'static [&'static str] {
    &LEXICON
}

/// Corrupts a word into a near-miss that is usually out-of-vocabulary.
fn mangle(word: &str, rng: &mut impl Rng) -> String {
    let chars: Vec<char> = word.chars().collect();
    for _ in 0..8 {
        let mut out = chars.clone();
        match rng.gen_range(0..4u32) {
            0 if out.len() >= 2 => {
                let i = rng.gen_range(0..out.len() - 1);
                out.swap(i, i + 1);
            }
            1 if out.len() >= 3 => {
                let i = rng.gen_range(0..out.len());
                out.remove(i);
            }
            2 => {
                let i = rng.gen_range(0..out.len());
                let c = out[i];
                out.insert(i, c);
            }
            _ => {
                let i = rng.gen_range(0..out.len());
                out[i] = match out[i] {
                    'a' => 'e',
                    'e' => 'i',
                    'i' => 'e',
                    'o' => 'u',
                    'u' => 'o',
                    c => {
                        if c == 'z' {
                            's'
                        } else {
                            (c as u8 + 1) as char
                        }
                    }
                };
            }
        }
        let cand: String = out.iter().collect();
        if cand != word && !cand.is_empty() && cand.chars().all(|c| c.is_ascii_lowercase() || c == '\'') {
            return cand;
        }
    }
    format!("{word}s")
}

fn confusion_for(word: &str) -> Option<&'static str> {
    for (a, b) in CONFUSIONS {
        if word == a {
            return Some(b);
        }
        if word == b {
            return Some(a);
        }
    }
    None
}

struct HardSpot {
    position: usize,
    wrong: String,
}

/// What one worker submits for one utterance.
struct Draft {
    tokens: Vec<String>,
    spend_time: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn draft_response(
    reference: &[String],
    hard: &[HardSpot],
    spec: &SubsetSpec,
    profile: WorkerProfile,
    duration: f64,
    sampler: &ZipfSampler,
    rng: &mut ChaCha8Rng,
) -> Draft {
    // A submission-level diligence draw, independent of the worker band.
    // Careful submissions shrink every error process by an order of
    // magnitude; the rest are rescaled to keep the subset means unchanged.
    let diligent = rng.gen::<f64>() < DILIGENT_P;
    let care = if diligent { DILIGENT_FACTOR } else { SLOPPY_FACTOR };
    let m = profile.multiplier * care;
    let p_confuse = care
        * match profile.tier {
            Tier::Good => 0.45,
            Tier::Mediocre => 0.60,
            Tier::Careless => 0.70,
        };
    // Submission-level accidents: empty or truncated transcripts. Diligent
    // submissions never ship one, so the accident rates below are divided
    // by the non-diligent mass to preserve the totals.
    let (keep, hasty) = match profile.tier {
        Tier::Careless if !diligent => {
            let u: f64 = rng.gen::<f64>() * (1.0 - DILIGENT_P);
            if u < 0.05 {
                (0.0, true)
            } else if u < 0.30 {
                (rng.gen_range(0.15..0.70), true)
            } else {
                (1.0, false)
            }
        }
        Tier::Mediocre if !diligent && rng.gen::<f64>() * (1.0 - DILIGENT_P) < 0.05 => {
            (rng.gen_range(0.50..0.85), true)
        }
        Tier::Good if !diligent && rng.gen::<f64>() * (1.0 - DILIGENT_P) < 0.004 => {
            (rng.gen_range(0.20..0.80), true)
        }
        _ => (1.0, false),
    };
    let keep_n = (reference.len() as f64 * keep).ceil() as usize;

    let mut tokens: Vec<String> = Vec::with_capacity(reference.len() + 4);
    for (i, word) in reference.iter().take(keep_n).enumerate() {
        if rng.gen::<f64>() < spec.del_rate * m {
            continue;
        }
        let hard_spot = hard.iter().find(|h| h.position == i);
        if let Some(h) = hard_spot {
            if rng.gen::<f64>() < p_confuse {
                tokens.push(h.wrong.clone());
            } else {
                tokens.push(word.clone());
            }
        } else if rng.gen::<f64>() < spec.unk_rate * m {
            tokens.push("?".to_string());
        } else if rng.gen::<f64>() < spec.sub_rate * m {
            let u: f64 = rng.gen();
            if u < 0.5 {
                tokens.push(mangle(word, rng));
            } else if u < 0.7 {
                match confusion_for(word) {
                    Some(c) => tokens.push(c.to_string()),
                    None => tokens.push(mangle(word, rng)),
                }
            } else {
                tokens.push(LEXICON[sampler.draw(rng)].to_string());
            }
        } else {
            tokens.push(word.clone());
        }
        if rng.gen::<f64>() < spec.ins_rate * m {
            let u: f64 = rng.gen();
            if u < 0.4 {
                tokens.push(FILLERS[rng.gen_range(0..FILLERS.len())].to_string());
            } else if u < 0.7 {
                let last = tokens.last().cloned().unwrap_or_else(|| "the".to_string());
                tokens.push(last);
            } else {
                tokens.push(LEXICON[sampler.draw(rng)].to_string());
            }
        }
    }

    let time_factor = match profile.tier {
        Tier::Good => rng.gen_range(2.5..5.0),
        Tier::Mediocre => rng.gen_range(1.8..4.0),
        Tier::Careless => rng.gen_range(0.4..1.5),
    };
    let mut spend = duration * time_factor;
    if hasty {
        spend *= 0.4;
    }
    if diligent {
        spend *= 1.25;
    }
    let spend_time = if rng.gen::<f64>() < 0.02 {
        None
    } else {
        Some((spend * 10.0).round() / 10.0)
    };
    Draft { tokens, spend_time }
}

/// Renders tokens as messy human text (case, punctuation) whose
/// normalization recovers the tokens exactly.
fn messy_raw(tokens: &[String], rng: &mut ChaCha8Rng) -> String {
    let mut out = String::new();
    for (i, tok) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        if tok == "?" {
            out.push('?');
            continue;
        }
        let mut word = tok.clone();
        if i == 0 && rng.gen::<f64>() < 0.8 {
            let mut cs = word.chars();
            if let Some(f) = cs.next() {
                word = f.to_uppercase().collect::<String>() + cs.as_str();
            }
        } else if rng.gen::<f64>() < 0.03 {
            word = word.to_uppercase();
        }
        out.push_str(&word);
        if i + 1 < tokens.len() && rng.gen::<f64>() < 0.06 {
            out.push(',');
        }
    }
    if !out.is_empty() && rng.gen::<f64>() < 0.6 {
        out.push('.');
    }
    out
}

/// Builds a peaked emission matrix for the reference transcript.
fn make_emissions(reference: &TokenSeq, rng: &mut ChaCha8Rng) -> Result<EmissionMatrix> {
    let vocab = standard_vocab();
    let index: BTreeMap<&str, usize> = vocab.iter().map(|s| s.as_str()).zip(0..).collect();
    let mut targets: Vec<usize> = Vec::new();
    for (w, word) in reference.iter().enumerate() {
        if w > 0 {
            targets.push(index["|"]);
        }
        for ch in word.chars() {
            let mut buf = [0u8; 4];
            targets.push(index[ch.encode_utf8(&mut buf) as &str]);
        }
    }
    let v = vocab.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let blank_frames = |rows: &mut Vec<Vec<f64>>, n: usize, rng: &mut ChaCha8Rng| {
        for _ in 0..n {
            rows.push(peaked_row(v, 0, rng));
        }
    };
    blank_frames(&mut rows, 2, rng);
    for (i, &t) in targets.iter().enumerate() {
        let frames = rng.gen_range(2..4);
        for _ in 0..frames {
            rows.push(peaked_row(v, t, rng));
        }
        // A blank dwell between some characters, and always between repeats.
        let repeat_next = targets.get(i + 1) == Some(&t);
        if repeat_next || rng.gen::<f64>() < 0.3 {
            blank_frames(&mut rows, 1, rng);
        }
    }
    blank_frames(&mut rows, 2, rng);
    EmissionMatrix::new(vocab, rows)
}

fn peaked_row(v: usize, target: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let peak = 0.82 + 0.12 * rng.gen::<f64>();
    let rest = (1.0 - peak) / (v as f64 - 1.0);
    let mut row = vec![rest; v];
    row[target] = peak;
    // Exact normalization in probability space, then into logs.
    let total: f64 = row.iter().sum();
    row.into_iter().map(|p| (p / total).ln()).collect()
}

/// Draws `k` distinct values from `pool`.
fn sample_distinct<T: Copy>(pool: &[T], k: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let mut items = pool.to_vec();
    let k = k.min(items.len());
    for i in 0..k {
        let j = rng.gen_range(i..items.len());
        items.swap(i, j);
    }
    items.truncate(k);
    items
}

fn scaled(n: usize, scale: f64) -> usize {
    ((n as f64 * scale).round() as usize).max(1)
}

/// Generates the full synthetic corpus.
pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    if config.scale <= 0.0 {
        return Err(Error::Config(format!("scale {} must be positive", config.scale)));
    }
    let sampler = ZipfSampler::new(LEXICON.len());
    let mut utterances: Vec<Utterance> = Vec::new();
    let mut responses: Vec<Response> = Vec::new();
    let mut emissions: BTreeMap<String, EmissionMatrix> = BTreeMap::new();

    // The first subset's worker pool seeds the "returning worker" share of
    // every later subset, so accept-rate history transfers to eval splits.
    let mut pool_rng = ChaCha8Rng::seed_from_u64(splitmix(config.seed ^ 0x706f6f6c));
    let all_workers: Vec<usize> = (0..WORKER_POOL).collect();
    let mut first_pool: Vec<usize> = Vec::new();

    for (s_idx, spec) in config.specs.iter().enumerate() {
        let n_utt = scaled(spec.utterances, config.scale);
        let n_resp = scaled(spec.responses, config.scale).max(n_utt);
        let n_workers = scaled(spec.workers, config.scale).max(10);
        let subset_pool: Vec<usize> = if s_idx == 0 {
            let p = sample_distinct(&all_workers, n_workers, &mut pool_rng);
            first_pool = p.clone();
            p
        } else {
            let returning = (n_workers as f64 * 0.55).round() as usize;
            let mut p = sample_distinct(&first_pool, returning.min(first_pool.len()), &mut pool_rng);
            let fresh: Vec<usize> = all_workers
                .iter()
                .copied()
                .filter(|w| !p.contains(w))
                .collect();
            p.extend(sample_distinct(&fresh, n_workers.saturating_sub(p.len()), &mut pool_rng));
            p
        };

        let base = n_resp / n_utt;
        let extra = n_resp - base * n_utt;

        for u_idx in 0..n_utt {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix(
                config.seed ^ ((s_idx as u64) << 48) ^ ((u_idx as u64) << 8),
            ));
            let utt_id = format!("{}-{:05}", spec.subset.name(), u_idx);
            let n_words = rng.gen_range(spec.words_lo..=spec.words_hi);
            let ref_tokens: Vec<String> = (0..n_words)
                .map(|_| LEXICON[sampler.draw(&mut rng)].to_string())
                .collect();
            let reference = TokenSeq::from_tokens(ref_tokens.iter().map(String::as_str))?;
            let duration = n_words as f64 * rng.gen_range(0.31..0.43);
            let duration = (duration * 100.0).round() / 100.0;

            // Hard spots: positions where wrong answers correlate across
            // workers. Mostly mangled (out-of-vocabulary) forms, sometimes a
            // real-word mishearing.
            let mut hard: Vec<HardSpot> = Vec::new();
            for (i, word) in ref_tokens.iter().enumerate() {
                if rng.gen::<f64>() < spec.hard_fraction {
                    let wrong = if rng.gen::<f64>() < 0.6 {
                        mangle(word, &mut rng)
                    } else {
                        confusion_for(word)
                            .map(str::to_string)
                            .unwrap_or_else(|| mangle(word, &mut rng))
                    };
                    hard.push(HardSpot { position: i, wrong });
                }
            }

            let k = base + usize::from(u_idx < extra);
            let workers = sample_distinct(&subset_pool, k, &mut rng);
            for (order, &w_idx) in workers.iter().enumerate() {
                let profile = worker_profile(config.seed, w_idx);
                let draft = draft_response(
                    &ref_tokens,
                    &hard,
                    spec,
                    profile,
                    duration,
                    &sampler,
                    &mut rng,
                );
                let raw_text = messy_raw(&draft.tokens, &mut rng);
                let text = crate::corpus::normalize_text(&raw_text);
                responses.push(Response {
                    utterance_id: utt_id.clone(),
                    worker_id: format!("w{w_idx:04}"),
                    submit_order: order as u32,
                    spend_time: draft.spend_time,
                    raw_text,
                    text,
                });
            }

            let with_emissions = matches!(
                spec.subset,
                Subset::TrainOther10h | Subset::DevClean | Subset::TestClean
            ) && n_words <= config.emission_max_words;
            let emission_ref = if with_emissions {
                emissions.insert(utt_id.clone(), make_emissions(&reference, &mut rng)?);
                Some(format!("{utt_id}.emis"))
            } else {
                None
            };

            utterances.push(Utterance {
                id: utt_id,
                subset: spec.subset,
                reference: Some(reference),
                audio_duration: Some(duration),
                emission_ref,
            });
        }
    }

    let corpus = Corpus::new(utterances, responses)?;
    Ok(SynthCorpus { corpus, emissions })
}

/// File paths produced by [`write_corpus`].
#[derive(Debug, Clone)]
pub struct CorpusFiles {
    pub response_path: PathBuf,
    pub reference_path: PathBuf,
    pub meta_path: PathBuf,
    pub emissions_dir: PathBuf,
}

/// Writes the corpus in the TSV layout the loaders expect, plus one emission
/// file per clip that has one.
pub fn write_corpus(synth: &SynthCorpus, dir: &Path) -> Result<CorpusFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = CorpusFiles {
        response_path: dir.join("responses.tsv"),
        reference_path: dir.join("references.tsv"),
        meta_path: dir.join("meta.tsv"),
        emissions_dir: dir.join("emissions"),
    };

    let mut refs = String::from("utterance_id\tsubset\tduration_s\treference_text\n");
    let mut meta = String::from("# utterance_id\temission_ref\n");
    for utt in synth.corpus.utterances() {
        let duration = utt.audio_duration.map(|d| d.to_string()).unwrap_or_default();
        let text = utt.reference.as_ref().map(TokenSeq::joined).unwrap_or_default();
        let _ = writeln!(refs, "{}\t{}\t{}\t{}", utt.id, utt.subset.name(), duration, text);
        if let Some(em_ref) = &utt.emission_ref {
            let _ = writeln!(meta, "{}\t{}", utt.id, em_ref);
        }
    }
    fs::write(&files.reference_path, refs).map_err(|e| Error::io(&files.reference_path, e))?;
    fs::write(&files.meta_path, meta).map_err(|e| Error::io(&files.meta_path, e))?;

    let mut resp = String::from("utterance_id\tworker_id\tsubmit_order\tspend_time\traw_text\n");
    for r in synth.corpus.responses() {
        let spend = r.spend_time.map(|s| s.to_string()).unwrap_or_default();
        let _ = writeln!(
            resp,
            "{}\t{}\t{}\t{}\t{}",
            r.utterance_id, r.worker_id, r.submit_order, spend, r.raw_text
        );
    }
    fs::write(&files.response_path, resp).map_err(|e| Error::io(&files.response_path, e))?;

    fs::create_dir_all(&files.emissions_dir).map_err(|e| Error::io(&files.emissions_dir, e))?;
    for utt in synth.corpus.utterances() {
        if let (Some(em_ref), Some(em)) = (&utt.emission_ref, synth.emissions.get(&utt.id)) {
            save_emissions_file(&files.emissions_dir.join(em_ref), em)?;
        }
    }
    Ok(files)
}
