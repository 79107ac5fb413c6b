//! Corpus model and ingestion: utterances, crowd responses, text normalization.
//!
//! Transcripts are compared in a normalized token space (lowercase, punctuation
//! stripped, illegible markers mapped to a reserved token) so that metrics and
//! fusion never see formatting noise.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Reserved token for illegible or uncertain words (a `?` in the raw text).
pub const UNK_TOKEN: &str = "<unk>";

/// The seven LibriCrowd subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Subset {
    TrainOther10h,
    TrainOther60h,
    TrainMixed10h,
    DevClean,
    DevOther,
    TestClean,
    TestOther,
}

impl Subset {
    pub const ALL: [Subset; 7] = [
        Subset::TrainOther10h,
        Subset::TrainOther60h,
        Subset::TrainMixed10h,
        Subset::DevClean,
        Subset::DevOther,
        Subset::TestClean,
        Subset::TestOther,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Subset::TrainOther10h => "train-other-10h",
            Subset::TrainOther60h => "train-other-60h",
            Subset::TrainMixed10h => "train-mixed-10h",
            Subset::DevClean => "dev-clean",
            Subset::DevOther => "dev-other",
            Subset::TestClean => "test-clean",
            Subset::TestOther => "test-other",
        }
    }

    /// True for the dev/test subsets normally used for evaluation.
    pub fn is_eval(&self) -> bool {
        matches!(
            self,
            Subset::DevClean | Subset::DevOther | Subset::TestClean | Subset::TestOther
        )
    }
}

impl FromStr for Subset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train-other-10h" => Ok(Subset::TrainOther10h),
            "train-other-60h" => Ok(Subset::TrainOther60h),
            "train-mixed-10h" => Ok(Subset::TrainMixed10h),
            "dev-clean" => Ok(Subset::DevClean),
            "dev-other" => Ok(Subset::DevOther),
            "test-clean" => Ok(Subset::TestClean),
            "test-other" => Ok(Subset::TestOther),
            other => Err(Error::UnknownSubset(other.to_string())),
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A normalized word sequence.
///
/// Invariants: no empty tokens, no internal whitespace, and every token is
/// either the reserved [`UNK_TOKEN`] or drawn from `[a-z0-9']`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct TokenSeq {
    tokens: Vec<String>,
}

impl TokenSeq {
    /// Empty sequence.
    pub fn empty() -> Self {
        TokenSeq { tokens: Vec::new() }
    }

    /// Builds a sequence from pre-normalized tokens, validating each one.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        for t in &tokens {
            if !valid_token(t) {
                return Err(Error::InvalidData(format!(
                    "invalid normalized token {t:?}"
                )));
            }
        }
        Ok(TokenSeq { tokens })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.tokens.iter()
    }

    /// Space-joined form, e.g. for report output.
    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.joined())
    }
}

impl<'a> IntoIterator for &'a TokenSeq {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.tokens.iter()
    }
}

fn valid_token(t: &str) -> bool {
    if t == UNK_TOKEN {
        return true;
    }
    !t.is_empty()
        && t.chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '\'')
}

/// Normalizes raw transcript text into the token space used everywhere else.
///
/// Rules, applied per whitespace-separated word:
/// - the literal `<unk>` is kept as-is (this makes the function idempotent);
/// - any word containing `?` becomes `<unk>`;
/// - everything is lowercased, and all characters outside `[a-z0-9']` are
///   dropped (digits are kept verbatim, they simply count as errors against a
///   digit-free reference);
/// - apostrophes survive only word-internally, so quoting like `'tis'` loses
///   its outer marks;
/// - words that are empty after stripping disappear.
pub fn normalize_text(raw: &str) -> TokenSeq {
    let mut tokens = Vec::new();
    for word in raw.split_whitespace() {
        if word == UNK_TOKEN {
            tokens.push(UNK_TOKEN.to_string());
            continue;
        }
        if word.contains('?') {
            tokens.push(UNK_TOKEN.to_string());
            continue;
        }
        let mut cleaned = String::with_capacity(word.len());
        for c in word.chars() {
            let c = match c {
                '\u{2019}' | '\u{2018}' => '\'',
                other => other,
            };
            for lc in c.to_lowercase() {
                if lc.is_ascii_lowercase() || lc.is_ascii_digit() || lc == '\'' {
                    cleaned.push(lc);
                }
            }
        }
        let cleaned = cleaned.trim_matches('\'');
        if cleaned.is_empty() || cleaned.chars().all(|c| c == '\'') {
            continue;
        }
        tokens.push(cleaned.to_string());
    }
    TokenSeq { tokens }
}

/// One audio clip to be transcribed.
#[derive(Debug, Clone)]
pub struct Utterance {
    pub id: String,
    pub subset: Subset,
    /// Ground-truth transcript when available.
    pub reference: Option<TokenSeq>,
    /// Clip length in seconds.
    pub audio_duration: Option<f64>,
    /// Key of the acoustic emission matrix for this clip, when one exists.
    pub emission_ref: Option<String>,
}

/// One worker-submitted transcript for an utterance.
#[derive(Debug, Clone)]
pub struct Response {
    pub utterance_id: String,
    pub worker_id: String,
    /// Position in the submission sequence for this utterance (0-based).
    pub submit_order: u32,
    /// Seconds the worker spent on the task, when recorded.
    pub spend_time: Option<f64>,
    /// Transcript exactly as submitted.
    pub raw_text: String,
    /// Normalized transcript.
    pub text: TokenSeq,
}

/// Per-worker aggregates used as model features.
#[derive(Debug, Clone)]
pub struct WorkerStats {
    pub worker_id: String,
    pub response_count: usize,
    /// Fraction of this worker's adjudicated responses that were accepted.
    /// Workers with no decided responses get an optimistic 1.0.
    pub accept_rate: f64,
    /// Mean spend time over responses that recorded one, 0.0 otherwise.
    pub mean_spend_time: f64,
}

/// An in-memory corpus: utterances plus the responses submitted for them.
///
/// Responses are kept sorted by `(utterance_id, submit_order)` so iteration
/// order is deterministic.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    utterances: BTreeMap<String, Utterance>,
    responses: Vec<Response>,
}

impl Corpus {
    /// Builds a corpus from parts, sorting responses and checking referential
    /// integrity: every response must name a known utterance, and submit
    /// orders must be distinct per utterance.
    pub fn new(utterances: Vec<Utterance>, mut responses: Vec<Response>) -> Result<Self> {
        let utterances: BTreeMap<String, Utterance> = utterances
            .into_iter()
            .map(|u| (u.id.clone(), u))
            .collect();
        responses.sort_by(|a, b| {
            (a.utterance_id.as_str(), a.submit_order).cmp(&(b.utterance_id.as_str(), b.submit_order))
        });
        for pair in responses.windows(2) {
            if pair[0].utterance_id == pair[1].utterance_id
                && pair[0].submit_order == pair[1].submit_order
            {
                return Err(Error::InvalidData(format!(
                    "duplicate submit_order {} for utterance {}",
                    pair[0].submit_order, pair[0].utterance_id
                )));
            }
        }
        for r in &responses {
            if !utterances.contains_key(&r.utterance_id) {
                return Err(Error::InvalidData(format!(
                    "response references unknown utterance {}",
                    r.utterance_id
                )));
            }
        }
        Ok(Corpus {
            utterances,
            responses,
        })
    }

    pub fn utterances(&self) -> impl Iterator<Item = &Utterance> {
        self.utterances.values()
    }

    pub fn utterance(&self, id: &str) -> Option<&Utterance> {
        self.utterances.get(id)
    }

    pub fn responses(&self) -> &[Response] {
        &self.responses
    }

    /// All responses for one utterance, in submit order.
    pub fn responses_for(&self, utterance_id: &str) -> &[Response] {
        let lo = self
            .responses
            .partition_point(|r| r.utterance_id.as_str() < utterance_id);
        let hi = self
            .responses
            .partition_point(|r| r.utterance_id.as_str() <= utterance_id);
        &self.responses[lo..hi]
    }

    pub fn utterance_count(&self) -> usize {
        self.utterances.len()
    }

    pub fn response_count(&self) -> usize {
        self.responses.len()
    }

    /// Distinct worker ids, sorted.
    pub fn worker_ids(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.responses.iter().map(|r| r.worker_id.as_str()).collect();
        set.into_iter().collect()
    }

    /// Restricts the corpus to the given subsets.
    pub fn split(&self, subsets: &[Subset]) -> Corpus {
        let keep: BTreeSet<Subset> = subsets.iter().copied().collect();
        let utterances: BTreeMap<String, Utterance> = self
            .utterances
            .iter()
            .filter(|(_, u)| keep.contains(&u.subset))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let responses = self
            .responses
            .iter()
            .filter(|r| utterances.contains_key(&r.utterance_id))
            .cloned()
            .collect();
        Corpus {
            utterances,
            responses,
        }
    }
}

/// Maps canonical column names to the names actually present in a TSV header.
///
/// An empty map means the canonical names are used directly.
#[derive(Debug, Clone, Default)]
pub struct ColumnMap {
    mapping: BTreeMap<String, String>,
}

impl ColumnMap {
    pub fn new() -> Self {
        ColumnMap::default()
    }

    /// Declares that canonical column `canonical` appears as `actual`.
    pub fn rename(mut self, canonical: &str, actual: &str) -> Self {
        self.mapping
            .insert(canonical.to_string(), actual.to_string());
        self
    }

    fn actual<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.mapping
            .get(canonical)
            .map(String::as_str)
            .unwrap_or(canonical)
    }
}

struct TsvHeader {
    file: String,
    index: BTreeMap<String, usize>,
    width: usize,
}

impl TsvHeader {
    fn parse(file: &str, line: &str) -> TsvHeader {
        let mut index = BTreeMap::new();
        let mut width = 0;
        for (i, name) in line.split('\t').enumerate() {
            index.insert(name.trim().to_string(), i);
            width = i + 1;
        }
        TsvHeader {
            file: file.to_string(),
            index,
            width,
        }
    }

    fn column(&self, map: &ColumnMap, canonical: &str) -> Result<usize> {
        let actual = map.actual(canonical);
        self.index.get(actual).copied().ok_or_else(|| {
            Error::parse(
                &self.file,
                1,
                format!("missing column {actual:?} (for {canonical})"),
            )
        })
    }
}

fn split_row<'a>(file: &str, line_no: usize, line: &'a str, width: usize) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != width {
        return Err(Error::parse(
            file,
            line_no,
            format!("expected {} tab-separated fields, found {}", width, fields.len()),
        ));
    }
    Ok(fields)
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Loads a corpus from a response TSV and a reference TSV.
///
/// Response columns: `utterance_id`, `worker_id`, `submit_order`,
/// `spend_time` (may be empty), `text`. Reference columns: `utterance_id`,
/// `subset`, `duration_s` (may be empty), `reference_text` (may be empty,
/// meaning no ground truth). Both files carry a header row; `column_map`
/// adapts differently-named headers. The optional `meta_path` file has rows
/// `utterance_id<TAB>emission_ref` attaching emission keys to utterances.
pub fn load_corpus(
    response_path: &Path,
    reference_path: &Path,
    meta_path: Option<&Path>,
    column_map: &ColumnMap,
) -> Result<Corpus> {
    let ref_name = reference_path.display().to_string();
    let ref_text = read_to_string(reference_path)?;
    let mut ref_lines = ref_text.lines().enumerate();
    let header = match ref_lines.next() {
        Some((_, line)) => TsvHeader::parse(&ref_name, line),
        None => return Err(Error::parse(&ref_name, 1, "empty reference file")),
    };
    let col_id = header.column(column_map, "utterance_id")?;
    let col_subset = header.column(column_map, "subset")?;
    let col_dur = header.column(column_map, "duration_s")?;
    let col_text = header.column(column_map, "reference_text")?;

    let mut utterances = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in ref_lines {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields = split_row(&ref_name, line_no, line, header.width)?;
        let id = fields[col_id].trim();
        if id.is_empty() {
            return Err(Error::parse(&ref_name, line_no, "empty utterance_id"));
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::parse(
                &ref_name,
                line_no,
                format!("duplicate utterance_id {id:?}"),
            ));
        }
        let subset: Subset = fields[col_subset].trim().parse()?;
        let dur_field = fields[col_dur].trim();
        let audio_duration = if dur_field.is_empty() {
            None
        } else {
            Some(dur_field.parse::<f64>().map_err(|_| {
                Error::parse(
                    &ref_name,
                    line_no,
                    format!("bad duration_s value {dur_field:?}"),
                )
            })?)
        };
        let text_field = fields[col_text].trim();
        let reference = if text_field.is_empty() {
            None
        } else {
            Some(normalize_text(text_field))
        };
        utterances.push(Utterance {
            id: id.to_string(),
            subset,
            reference,
            audio_duration,
            emission_ref: None,
        });
    }

    let resp_name = response_path.display().to_string();
    let resp_text = read_to_string(response_path)?;
    let mut resp_lines = resp_text.lines().enumerate();
    let header = match resp_lines.next() {
        Some((_, line)) => TsvHeader::parse(&resp_name, line),
        None => return Err(Error::parse(&resp_name, 1, "empty response file")),
    };
    let col_id = header.column(column_map, "utterance_id")?;
    let col_worker = header.column(column_map, "worker_id")?;
    let col_order = header.column(column_map, "submit_order")?;
    let col_spend = header.column(column_map, "spend_time")?;
    let col_text = header.column(column_map, "raw_text")?;

    let mut responses = Vec::new();
    for (i, line) in resp_lines {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields = split_row(&resp_name, line_no, line, header.width)?;
        let worker = fields[col_worker].trim();
        if worker.is_empty() {
            return Err(Error::parse(&resp_name, line_no, "empty worker_id"));
        }
        let order_field = fields[col_order].trim();
        let submit_order: u32 = order_field.parse().map_err(|_| {
            Error::parse(
                &resp_name,
                line_no,
                format!("bad submit_order value {order_field:?}"),
            )
        })?;
        let spend_field = fields[col_spend].trim();
        let spend_time = if spend_field.is_empty() {
            None
        } else {
            Some(spend_field.parse::<f64>().map_err(|_| {
                Error::parse(
                    &resp_name,
                    line_no,
                    format!("bad spend_time value {spend_field:?}"),
                )
            })?)
        };
        let raw_text = fields[col_text].to_string();
        responses.push(Response {
            utterance_id: fields[col_id].trim().to_string(),
            worker_id: worker.to_string(),
            submit_order,
            spend_time,
            text: normalize_text(&raw_text),
            raw_text,
        });
    }

    if let Some(meta_path) = meta_path {
        let meta_name = meta_path.display().to_string();
        let meta_text = read_to_string(meta_path)?;
        let mut refs = BTreeMap::new();
        for (i, line) in meta_text.lines().enumerate() {
            let line_no = i + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(Error::parse(
                    &meta_name,
                    line_no,
                    "expected utterance_id<TAB>emission_ref",
                ));
            }
            refs.insert(fields[0].trim().to_string(), fields[1].trim().to_string());
        }
        for u in &mut utterances {
            if let Some(r) = refs.get(&u.id) {
                u.emission_ref = Some(r.clone());
            }
        }
    }

    Corpus::new(utterances, responses)
}

/// Accept/reject outcomes keyed by `(utterance_id, submit_order)`.
pub type DecisionMap = BTreeMap<(String, u32), bool>;

/// Computes per-worker aggregates.
///
/// `decisions` carries adjudication outcomes for some responses; a worker's
/// accept rate is computed over their decided responses only, and defaults to
/// an optimistic 1.0 when none were decided.
pub fn compute_worker_stats(
    corpus: &Corpus,
    decisions: Option<&DecisionMap>,
) -> BTreeMap<String, WorkerStats> {
    let mut stats: BTreeMap<String, (usize, usize, usize, f64, usize)> = BTreeMap::new();
    for r in corpus.responses() {
        let e = stats
            .entry(r.worker_id.clone())
            .or_insert((0, 0, 0, 0.0, 0));
        e.0 += 1;
        if let Some(d) = decisions {
            if let Some(&accepted) = d.get(&(r.utterance_id.clone(), r.submit_order)) {
                e.1 += 1;
                if accepted {
                    e.2 += 1;
                }
            }
        }
        if let Some(t) = r.spend_time {
            e.3 += t;
            e.4 += 1;
        }
    }
    stats
        .into_iter()
        .map(|(worker_id, (count, decided, accepted, time_sum, timed))| {
            let accept_rate = if decided == 0 {
                1.0
            } else {
                accepted as f64 / decided as f64
            };
            let mean_spend_time = if timed == 0 { 0.0 } else { time_sum / timed as f64 };
            (
                worker_id.clone(),
                WorkerStats {
                    worker_id,
                    response_count: count,
                    accept_rate,
                    mean_spend_time,
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_strips_punctuation_and_case() {
        let t = normalize_text("Hello, World!");
        assert_eq!(t.tokens(), ["hello", "world"]);
    }

    #[test]
    fn normalize_keeps_inner_apostrophe() {
        let t = normalize_text("I can't GO");
        assert_eq!(t.tokens(), ["i", "can't", "go"]);
        let t = normalize_text("'tis 'quoted'");
        assert_eq!(t.tokens(), ["tis", "quoted"]);
    }

    #[test]
    fn normalize_maps_uncertain_words_to_unk() {
        let t = normalize_text("I can't ? go");
        assert_eq!(t.tokens(), ["i", "can't", UNK_TOKEN, "go"]);
        let t = normalize_text("wha? next");
        assert_eq!(t.tokens(), [UNK_TOKEN, "next"]);
    }

    #[test]
    fn normalize_keeps_digits() {
        let t = normalize_text("chapter 21 begins");
        assert_eq!(t.tokens(), ["chapter", "21", "begins"]);
    }

    #[test]
    fn normalize_drops_empty_words() {
        let t = normalize_text("  --  ... !!! ");
        assert!(t.is_empty());
    }

    #[test]
    fn normalize_handles_curly_quotes() {
        let t = normalize_text("don\u{2019}t");
        assert_eq!(t.tokens(), ["don't"]);
    }

    #[test]
    fn normalize_is_idempotent_on_unk() {
        let once = normalize_text("wha? next");
        let twice = normalize_text(&once.joined());
        assert_eq!(once, twice);
    }

    #[test]
    fn token_seq_rejects_bad_tokens() {
        assert!(TokenSeq::from_tokens(["ok", "fine"]).is_ok());
        assert!(TokenSeq::from_tokens(["Bad"]).is_err());
        assert!(TokenSeq::from_tokens([""]).is_err());
        assert!(TokenSeq::from_tokens(["two words"]).is_err());
        assert!(TokenSeq::from_tokens([UNK_TOKEN]).is_ok());
    }

    #[test]
    fn subset_roundtrip() {
        for s in Subset::ALL {
            assert_eq!(s.name().parse::<Subset>().unwrap(), s);
        }
        assert!("dev_clean".parse::<Subset>().is_err());
    }

    fn utt(id: &str, subset: Subset, reference: Option<&str>) -> Utterance {
        Utterance {
            id: id.to_string(),
            subset,
            reference: reference.map(normalize_text),
            audio_duration: Some(3.0),
            emission_ref: None,
        }
    }

    fn resp(utt_id: &str, worker: &str, order: u32, text: &str) -> Response {
        Response {
            utterance_id: utt_id.to_string(),
            worker_id: worker.to_string(),
            submit_order: order,
            spend_time: Some(30.0),
            raw_text: text.to_string(),
            text: normalize_text(text),
        }
    }

    #[test]
    fn corpus_orders_responses() {
        let c = Corpus::new(
            vec![utt("u1", Subset::DevClean, Some("a b")), utt("u2", Subset::DevClean, None)],
            vec![
                resp("u2", "w1", 1, "x"),
                resp("u1", "w2", 1, "b"),
                resp("u1", "w1", 0, "a"),
                resp("u2", "w3", 0, "y"),
            ],
        )
        .unwrap();
        let orders: Vec<(String, u32)> = c
            .responses()
            .iter()
            .map(|r| (r.utterance_id.clone(), r.submit_order))
            .collect();
        assert_eq!(
            orders,
            vec![
                ("u1".to_string(), 0),
                ("u1".to_string(), 1),
                ("u2".to_string(), 0),
                ("u2".to_string(), 1),
            ]
        );
        assert_eq!(c.responses_for("u1").len(), 2);
        assert_eq!(c.responses_for("u2")[0].worker_id, "w3");
        assert!(c.responses_for("u3").is_empty());
    }

    #[test]
    fn corpus_rejects_duplicate_submit_order() {
        let err = Corpus::new(
            vec![utt("u1", Subset::DevClean, None)],
            vec![resp("u1", "w1", 0, "a"), resp("u1", "w2", 0, "b")],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidData(_)));
    }

    #[test]
    fn corpus_rejects_unknown_utterance() {
        let err = Corpus::new(vec![], vec![resp("u1", "w1", 0, "a")]).unwrap_err();
        assert!(matches!(err, Error::InvalidData(_)));
    }

    #[test]
    fn duplicate_worker_allowed_with_distinct_order() {
        let c = Corpus::new(
            vec![utt("u1", Subset::DevClean, None)],
            vec![resp("u1", "w1", 0, "a"), resp("u1", "w1", 1, "a again")],
        )
        .unwrap();
        assert_eq!(c.response_count(), 2);
    }

    #[test]
    fn worker_stats_accept_rate() {
        let c = Corpus::new(
            vec![utt("u1", Subset::DevClean, None), utt("u2", Subset::DevClean, None)],
            vec![
                resp("u1", "w1", 0, "a"),
                resp("u2", "w1", 0, "b"),
                resp("u1", "w2", 1, "c"),
            ],
        )
        .unwrap();
        let mut decisions = DecisionMap::new();
        decisions.insert(("u1".to_string(), 0), true);
        decisions.insert(("u2".to_string(), 0), false);
        let stats = compute_worker_stats(&c, Some(&decisions));
        assert_eq!(stats["w1"].response_count, 2);
        assert!((stats["w1"].accept_rate - 0.5).abs() < 1e-12);
        assert_eq!(stats["w2"].accept_rate, 1.0);
        assert_eq!(stats["w2"].mean_spend_time, 30.0);
    }

    #[test]
    fn split_filters_subsets() {
        let c = Corpus::new(
            vec![
                utt("u1", Subset::DevClean, None),
                utt("u2", Subset::TestClean, None),
            ],
            vec![resp("u1", "w1", 0, "a"), resp("u2", "w1", 0, "b")],
        )
        .unwrap();
        let s = c.split(&[Subset::DevClean]);
        assert_eq!(s.utterance_count(), 1);
        assert_eq!(s.response_count(), 1);
        assert!(s.utterance("u2").is_none());
    }
}
