//! Dataset ingestion, tokenization, vocabulary, and model-input encoding.
//!
//! Input files are UTF-8 tab-separated with a required header:
//!
//! ```text
//! id<TAB>tokens (space-joined)<TAB>aspect_start<TAB>aspect_end<TAB>polarity
//! ```
//!
//! Lines starting with `#` are ignored. Each row becomes one [`Instance`];
//! rows that fail validation are skipped and reported as line-numbered
//! diagnostics rather than aborting the whole load.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const CLS: usize = 2;
pub const SEP: usize = 3;

const SPECIAL_TOKENS: [&str; 4] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"];

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: bad header, expected `id\\ttokens\\taspect_start\\taspect_end\\tpolarity`")]
    BadHeader { path: String, line: usize },
    #[error("{path}: missing header line")]
    MissingHeader { path: String },
    #[error("{path}:{line}: duplicate instance id `{id}`")]
    DuplicateId { path: String, line: usize, id: String },
    #[error("empty training split: cannot build vocabulary")]
    EmptyTrainSplit,
    #[error("min_freq must be >= 1, got {0}")]
    BadMinFreq(usize),
    #[error("instance `{id}`: aspect of {aspect_len} tokens cannot fit max_length {max_length}")]
    UnencodableAspect { id: String, aspect_len: usize, max_length: usize },
    #[error("invalid instance `{id}`: {reason}")]
    InvalidInstance { id: String, reason: String },
    #[error("class weights need every class present; absent: {0}")]
    MissingClass(String),
}

/// Sentiment polarity of an aspect. The `usize` representation doubles as the
/// classifier's class index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
}

pub const NUM_CLASSES: usize = 3;

impl Polarity {
    pub fn index(self) -> usize {
        match self {
            Polarity::Positive => 0,
            Polarity::Negative => 1,
            Polarity::Neutral => 2,
        }
    }

    pub fn from_index(i: usize) -> Polarity {
        match i {
            0 => Polarity::Positive,
            1 => Polarity::Negative,
            2 => Polarity::Neutral,
            _ => panic!("class index {i} out of range"),
        }
    }

    pub fn parse(s: &str) -> Option<Polarity> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Some(Polarity::Positive),
            "negative" => Some(Polarity::Negative),
            "neutral" => Some(Polarity::Neutral),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::Neutral => "neutral",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One sentence-aspect pair with its gold polarity. The aspect is a half-open
/// token range inside `tokens`.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub id: String,
    pub tokens: Vec<String>,
    pub aspect_span: Range<usize>,
    pub polarity: Polarity,
}

impl Instance {
    pub fn new(
        id: impl Into<String>,
        tokens: Vec<String>,
        aspect_span: Range<usize>,
        polarity: Polarity,
    ) -> Result<Instance, CorpusError> {
        let id = id.into();
        let fail = |reason: String| CorpusError::InvalidInstance { id: id.clone(), reason };
        if tokens.is_empty() {
            return Err(fail("no tokens".into()));
        }
        if tokens.iter().any(|t| t.is_empty()) {
            return Err(fail("empty token".into()));
        }
        if aspect_span.start >= aspect_span.end || aspect_span.end > tokens.len() {
            return Err(fail(format!(
                "aspect span [{}, {}) invalid for {} tokens",
                aspect_span.start,
                aspect_span.end,
                tokens.len()
            )));
        }
        Ok(Instance { id, tokens, aspect_span, polarity })
    }

    pub fn aspect_tokens(&self) -> &[String] {
        &self.tokens[self.aspect_span.clone()]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitName::Train => f.write_str("train"),
            SplitName::Validation => f.write_str("validation"),
            SplitName::Test => f.write_str("test"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub name: SplitName,
    pub instances: Vec<Instance>,
}

/// Line-numbered report for a row that was rejected during loading.
#[derive(Clone, Debug)]
pub struct LoadDiagnostic {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LoadDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug)]
pub struct LoadedSplit {
    pub split: DatasetSplit,
    pub diagnostics: Vec<LoadDiagnostic>,
    /// Instance counts indexed by [`Polarity::index`].
    pub label_counts: [usize; NUM_CLASSES],
}

/// NFC-normalize, split on whitespace, and detach leading/trailing
/// punctuation (ASCII punctuation plus danda and common typographic marks)
/// into separate tokens. Never emits empty tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let normalized: String = text.nfc().collect();
    let mut out = Vec::new();
    for chunk in normalized.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut lo = 0;
        let mut hi = chars.len();
        while lo < hi && is_detachable_punct(chars[lo]) {
            lo += 1;
        }
        while hi > lo && is_detachable_punct(chars[hi - 1]) {
            hi -= 1;
        }
        for &c in &chars[..lo] {
            out.push(c.to_string());
        }
        if lo < hi {
            out.push(chars[lo..hi].iter().collect());
        }
        for &c in &chars[hi..] {
            out.push(c.to_string());
        }
    }
    out
}

fn is_detachable_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c, '।' | '॥' | '“' | '”' | '‘' | '’' | '„' | '…' | '—' | '–' | '¡' | '¿')
}

/// Token-to-index map with reserved ids 0..=3 for `[PAD]`, `[UNK]`, `[CLS]`,
/// `[SEP]`. Built from the training split only; indices are assigned in
/// first-seen order, so construction is deterministic.
#[derive(Clone, Debug)]
pub struct Vocab {
    index: HashMap<String, usize>,
    tokens: Vec<String>,
}

impl Vocab {
    pub fn build(train: &DatasetSplit, min_freq: usize) -> Result<Vocab, CorpusError> {
        if min_freq < 1 {
            return Err(CorpusError::BadMinFreq(min_freq));
        }
        if train.instances.is_empty() {
            return Err(CorpusError::EmptyTrainSplit);
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut first_seen: Vec<&str> = Vec::new();
        for inst in &train.instances {
            for tok in &inst.tokens {
                let c = counts.entry(tok.as_str()).or_insert(0);
                if *c == 0 {
                    first_seen.push(tok.as_str());
                }
                *c += 1;
            }
        }
        let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        let mut index: HashMap<String, usize> =
            tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        for tok in first_seen {
            if counts[tok] >= min_freq {
                index.insert(tok.to_string(), tokens.len());
                tokens.push(tok.to_string());
            }
        }
        Ok(Vocab { index, tokens })
    }

    /// Rebuild from the non-special token list in index order (checkpoints).
    pub fn from_token_list(non_special: &[String]) -> Vocab {
        let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        tokens.extend(non_special.iter().cloned());
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { index, tokens }
    }

    pub fn non_special_tokens(&self) -> &[String] {
        &self.tokens[SPECIAL_TOKENS.len()..]
    }

    pub fn lookup(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // reserved tokens are always present
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.token(i).to_string()).collect()
    }
}

/// Index sequence `[CLS] w1..wn [SEP] a1..am [SEP]` plus bookkeeping ranges.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedInstance {
    pub id: String,
    pub ids: Vec<usize>,
    /// True at real-token positions, false at padding.
    pub pad_mask: Vec<bool>,
    /// Sentence tokens actually kept after truncation, aligned with
    /// `sentence_range` (the syntactic rules need the strings, not the ids).
    pub sentence_tokens: Vec<String>,
    /// Encoded positions holding the sentence tokens.
    pub sentence_range: Range<usize>,
    /// Encoded positions of the aspect inside the sentence region.
    pub aspect_in_sentence: Range<usize>,
    /// Encoded positions of the aspect copy after the first `[SEP]`.
    pub aspect_tail: Range<usize>,
    pub label: Polarity,
}

impl EncodedInstance {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn real_len(&self) -> usize {
        self.pad_mask.iter().filter(|&&m| m).count()
    }

    /// Extend with `[PAD]` up to `len`; the mask marks the padding.
    pub fn pad_to(&self, len: usize) -> EncodedInstance {
        assert!(len >= self.ids.len(), "pad_to({len}) shorter than current length {}", self.ids.len());
        let mut out = self.clone();
        out.ids.resize(len, PAD);
        out.pad_mask.resize(len, false);
        out
    }
}

/// Encode an instance into the `[CLS] sentence [SEP] aspect [SEP]` layout.
///
/// When the full layout exceeds `max_length` the sentence is truncated from
/// the right; if the aspect would fall outside the kept window, the window
/// shifts right just enough to keep the whole aspect. The aspect itself is
/// never truncated.
pub fn encode(
    inst: &Instance,
    vocab: &Vocab,
    max_length: usize,
) -> Result<EncodedInstance, CorpusError> {
    let n = inst.tokens.len();
    let m = inst.aspect_span.len();
    if m + 4 > max_length {
        return Err(CorpusError::UnencodableAspect {
            id: inst.id.clone(),
            aspect_len: m,
            max_length,
        });
    }
    let budget = max_length - m - 3;
    let window = if n <= budget {
        0..n
    } else if inst.aspect_span.end <= budget {
        0..budget
    } else {
        inst.aspect_span.end - budget..inst.aspect_span.end
    };
    let kept = &inst.tokens[window.clone()];
    let aspect_start = inst.aspect_span.start - window.start;
    let aspect_end = inst.aspect_span.end - window.start;

    let mut ids = Vec::with_capacity(kept.len() + m + 3);
    ids.push(CLS);
    for tok in kept {
        ids.push(vocab.lookup(tok));
    }
    ids.push(SEP);
    for tok in inst.aspect_tokens() {
        ids.push(vocab.lookup(tok));
    }
    ids.push(SEP);

    let t = ids.len();
    let sentence_range = 1..1 + kept.len();
    let aspect_in_sentence = 1 + aspect_start..1 + aspect_end;
    let aspect_tail = 1 + kept.len() + 1..1 + kept.len() + 1 + m;
    debug_assert_eq!(aspect_tail.end + 1, t);
    Ok(EncodedInstance {
        id: inst.id.clone(),
        ids,
        pad_mask: vec![true; t],
        sentence_tokens: kept.to_vec(),
        sentence_range,
        aspect_in_sentence,
        aspect_tail,
        label: inst.polarity,
    })
}

/// Load one split from the tab-separated format. Malformed rows are skipped
/// and reported; duplicate ids abort the load.
pub fn load_tabular(path: &Path, name: SplitName) -> Result<LoadedSplit, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let path_str = path.display().to_string();
    let mut instances = Vec::new();
    let mut diagnostics = Vec::new();
    let mut label_counts = [0usize; NUM_CLASSES];
    let mut seen_ids: HashMap<String, usize> = HashMap::new();
    let mut header_seen = false;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if fields != ["id", "tokens", "aspect_start", "aspect_end", "polarity"] {
                return Err(CorpusError::BadHeader { path: path_str, line: lineno });
            }
            header_seen = true;
            continue;
        }
        match parse_row(line) {
            Ok(inst) => {
                if let Some(prev) = seen_ids.insert(inst.id.clone(), lineno) {
                    let _ = prev;
                    return Err(CorpusError::DuplicateId {
                        path: path_str,
                        line: lineno,
                        id: inst.id,
                    });
                }
                label_counts[inst.polarity.index()] += 1;
                instances.push(inst);
            }
            Err(message) => diagnostics.push(LoadDiagnostic { line: lineno, message }),
        }
    }
    if !header_seen {
        return Err(CorpusError::MissingHeader { path: path_str });
    }
    Ok(LoadedSplit { split: DatasetSplit { name, instances }, diagnostics, label_counts })
}

fn parse_row(line: &str) -> Result<Instance, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 {
        return Err(format!("expected 5 tab-separated fields, found {}", fields.len()));
    }
    let id = fields[0].trim();
    if id.is_empty() {
        return Err("empty id".into());
    }
    let tokens: Vec<String> = fields[1].split_whitespace().map(str::to_string).collect();
    let start: usize = fields[2]
        .trim()
        .parse()
        .map_err(|_| format!("aspect_start `{}` is not a number", fields[2].trim()))?;
    let end: usize = fields[3]
        .trim()
        .parse()
        .map_err(|_| format!("aspect_end `{}` is not a number", fields[3].trim()))?;
    let polarity = Polarity::parse(fields[4])
        .ok_or_else(|| format!("unknown polarity `{}`", fields[4].trim()))?;
    Instance::new(id, tokens, start..end, polarity).map_err(|e| e.to_string())
}

/// Instance and label counts of one split file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitCounts {
    pub total: usize,
    pub positive: usize,
    pub neutral: usize,
    pub negative: usize,
}

/// Count the instances and label distribution of a tabular split file.
pub fn load_tabular_counts(path: &Path) -> Result<SplitCounts, CorpusError> {
    let loaded = load_tabular(path, SplitName::Train)?;
    Ok(SplitCounts {
        total: loaded.split.instances.len(),
        positive: loaded.label_counts[Polarity::Positive.index()],
        neutral: loaded.label_counts[Polarity::Neutral.index()],
        negative: loaded.label_counts[Polarity::Negative.index()],
    })
}

/// Inverse-frequency class weights `w_c = N / (C * count_c)`. Balanced labels
/// give all-ones; the instance-weighted average is always 1.
pub fn class_weights(labels: &[Polarity]) -> Result<[f64; NUM_CLASSES], CorpusError> {
    let mut counts = [0usize; NUM_CLASSES];
    for l in labels {
        counts[l.index()] += 1;
    }
    let absent: Vec<&str> = (0..NUM_CLASSES)
        .filter(|&c| counts[c] == 0)
        .map(|c| Polarity::from_index(c).name())
        .collect();
    if !absent.is_empty() {
        return Err(CorpusError::MissingClass(absent.join(", ")));
    }
    let n = labels.len() as f64;
    let mut weights = [0.0; NUM_CLASSES];
    for c in 0..NUM_CLASSES {
        weights[c] = n / (NUM_CLASSES as f64 * counts[c] as f64);
    }
    Ok(weights)
}
