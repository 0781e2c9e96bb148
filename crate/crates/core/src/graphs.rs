//! Construction of the three token graphs the model attends over: a
//! rule-based syntactic adjacency, a cosine-similarity semantic adjacency,
//! and an aspect-proximity adjacency, plus distance statistics over them.
//!
//! No trained parser is assumed. The syntactic graph comes from a
//! deterministic rule engine: window links between nearby sentence tokens
//! plus pattern links over coarse token classes assigned by a small
//! suffix/wordlist lexicon. A precomputed adjacency can be loaded from an
//! edge-list file instead.

use std::collections::VecDeque;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::EncodedInstance;
use crate::numkit::{cosine_similarity, Matrix};

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("graph config: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("instance has no aspect tokens")]
    NoAspectTokens,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Syntactic,
    Semantic,
    Aspect,
}

/// Weighted token-token adjacency over the full encoded sequence. Rows and
/// columns addressing padding are all-zero; every real token has a self-loop
/// of weight 1.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyMatrix {
    pub kind: GraphKind,
    pub weights: Matrix,
}

impl AdjacencyMatrix {
    pub fn size(&self) -> usize {
        self.weights.rows()
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        self.weights.get(i, j) > 0.0
    }

    /// 0/1 matrix of the edge pattern, used as attention mask.
    pub fn neighborhood_mask(&self) -> Matrix {
        self.weights.map(|w| if w > 0.0 { 1.0 } else { 0.0 })
    }
}

/// Coarse token classes for syntactic link rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoarseClass {
    NounLike,
    VerbLike,
    ModifierLike,
    Particle,
    Other,
}

/// Pattern link between two coarse classes. A rule fires on sentence
/// positions `i < j` when `class(i) == from && class(j) == to`; with
/// `bidirectional` it also fires for the reversed class order. The resulting
/// edge is always symmetrized into the adjacency.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinkRule {
    pub from: CoarseClass,
    pub to: CoarseClass,
    pub bidirectional: bool,
}

/// Suffix/wordlist mapping of tokens to coarse classes. Exact word matches
/// win over suffix matches; longer suffixes win over shorter ones.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Lexicon {
    pub words: Vec<(String, CoarseClass)>,
    pub suffixes: Vec<(String, CoarseClass)>,
}

impl Lexicon {
    pub fn classify(&self, token: &str) -> CoarseClass {
        let lower = token.to_lowercase();
        for (w, class) in &self.words {
            if *w == lower {
                return *class;
            }
        }
        let mut best: Option<(usize, CoarseClass)> = None;
        for (suffix, class) in &self.suffixes {
            if lower.ends_with(suffix.as_str()) && lower.chars().count() > suffix.chars().count() {
                let len = suffix.chars().count();
                if best.map_or(true, |(blen, _)| len > blen) {
                    best = Some((len, *class));
                }
            }
        }
        best.map(|(_, c)| c).unwrap_or(CoarseClass::Other)
    }
}

/// Deterministic syntactic rule engine: window links plus class-pattern links.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SyntaxRuleSet {
    pub window_radius: usize,
    pub link_rules: Vec<LinkRule>,
    pub lexicon: Lexicon,
}

impl Default for SyntaxRuleSet {
    fn default() -> Self {
        SyntaxRuleSet {
            window_radius: 2,
            link_rules: vec![
                LinkRule { from: CoarseClass::VerbLike, to: CoarseClass::NounLike, bidirectional: true },
                LinkRule { from: CoarseClass::ModifierLike, to: CoarseClass::NounLike, bidirectional: false },
                LinkRule { from: CoarseClass::VerbLike, to: CoarseClass::ModifierLike, bidirectional: true },
            ],
            lexicon: default_lexicon(),
        }
    }
}

fn default_lexicon() -> Lexicon {
    let words = [
        // Bengali function words and frequent modifiers
        ("না", CoarseClass::Particle),
        ("কি", CoarseClass::Particle),
        ("তো", CoarseClass::Particle),
        ("আর", CoarseClass::Particle),
        ("এবং", CoarseClass::Particle),
        ("কিন্তু", CoarseClass::Particle),
        ("যে", CoarseClass::Particle),
        ("এই", CoarseClass::Particle),
        ("সেই", CoarseClass::Particle),
        ("খুব", CoarseClass::Particle),
        ("ভালো", CoarseClass::ModifierLike),
        ("ভাল", CoarseClass::ModifierLike),
        ("খারাপ", CoarseClass::ModifierLike),
        ("সুন্দর", CoarseClass::ModifierLike),
        ("দারুণ", CoarseClass::ModifierLike),
        ("চমৎকার", CoarseClass::ModifierLike),
        ("বাজে", CoarseClass::ModifierLike),
        // English closed-class words
        ("the", CoarseClass::Particle),
        ("a", CoarseClass::Particle),
        ("an", CoarseClass::Particle),
        ("of", CoarseClass::Particle),
        ("to", CoarseClass::Particle),
        ("and", CoarseClass::Particle),
        ("but", CoarseClass::Particle),
        ("or", CoarseClass::Particle),
        ("not", CoarseClass::Particle),
        ("very", CoarseClass::Particle),
        ("in", CoarseClass::Particle),
        ("on", CoarseClass::Particle),
        ("at", CoarseClass::Particle),
        ("is", CoarseClass::VerbLike),
        ("was", CoarseClass::VerbLike),
        ("were", CoarseClass::VerbLike),
        ("are", CoarseClass::VerbLike),
        ("be", CoarseClass::VerbLike),
        ("good", CoarseClass::ModifierLike),
        ("bad", CoarseClass::ModifierLike),
        ("great", CoarseClass::ModifierLike),
        ("nice", CoarseClass::ModifierLike),
        ("poor", CoarseClass::ModifierLike),
        ("terrible", CoarseClass::ModifierLike),
        ("excellent", CoarseClass::ModifierLike),
        ("tasty", CoarseClass::ModifierLike),
        ("slow", CoarseClass::ModifierLike),
        ("fast", CoarseClass::ModifierLike),
        ("fresh", CoarseClass::ModifierLike),
    ];
    let suffixes = [
        // Bengali verb endings
        ("ছে", CoarseClass::VerbLike),
        ("ছি", CoarseClass::VerbLike),
        ("ছিল", CoarseClass::VerbLike),
        ("লাম", CoarseClass::VerbLike),
        ("লেন", CoarseClass::VerbLike),
        ("বেন", CoarseClass::VerbLike),
        ("বে", CoarseClass::VerbLike),
        ("য়েছে", CoarseClass::VerbLike),
        // Bengali noun classifiers
        ("টা", CoarseClass::NounLike),
        ("টি", CoarseClass::NounLike),
        ("গুলো", CoarseClass::NounLike),
        ("গুলি", CoarseClass::NounLike),
        ("খানা", CoarseClass::NounLike),
        // English derivational endings
        ("ing", CoarseClass::VerbLike),
        ("ed", CoarseClass::VerbLike),
        ("tion", CoarseClass::NounLike),
        ("ness", CoarseClass::NounLike),
        ("ment", CoarseClass::NounLike),
        ("ful", CoarseClass::ModifierLike),
        ("less", CoarseClass::ModifierLike),
        ("ous", CoarseClass::ModifierLike),
        ("ive", CoarseClass::ModifierLike),
        ("able", CoarseClass::ModifierLike),
    ];
    Lexicon {
        words: words.iter().map(|(w, c)| (w.to_string(), *c)).collect(),
        suffixes: suffixes.iter().map(|(s, c)| (s.to_string(), *c)).collect(),
    }
}

/// Graph construction knobs exposed through the run config.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphConfig {
    pub window_radius: usize,
    pub semantic_top_k: usize,
    pub semantic_threshold: f64,
    pub aspect_radius: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig { window_radius: 2, semantic_top_k: 5, semantic_threshold: 0.2, aspect_radius: 3 }
    }
}

/// Mean distances from aspect tokens to the rest of the sentence.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GraphStats {
    /// Mean BFS hop count from aspect tokens to reachable non-aspect sentence
    /// tokens.
    pub mean_syntactic_distance: f64,
    /// Mean of `1 - cosine` over the same token pairs.
    pub mean_semantic_distance: f64,
    /// Fraction of pairs reachable in the syntactic graph.
    pub syntactic_coverage: f64,
}

/// Binary syntactic adjacency over the encoded sequence: window links and
/// class-pattern links inside the sentence region, self-loops on every real
/// token, zero rows/columns at padding. `[CLS]`, `[SEP]`, and the aspect tail
/// connect only via their self-loops. Symmetric by construction.
///
/// `sentence_tokens` must align with the encoded sentence region; a mismatch
/// is a caller bug and panics.
pub fn build_syntactic(
    encoded: &EncodedInstance,
    sentence_tokens: &[String],
    rules: &SyntaxRuleSet,
) -> AdjacencyMatrix {
    let region = encoded.sentence_range.clone();
    assert_eq!(
        sentence_tokens.len(),
        region.len(),
        "sentence tokens ({}) misaligned with encoded sentence region ({})",
        sentence_tokens.len(),
        region.len()
    );
    let t = encoded.len();
    let mut w = Matrix::zeros(t, t);
    for i in 0..t {
        if encoded.pad_mask[i] {
            w.set(i, i, 1.0);
        }
    }
    let classes: Vec<CoarseClass> =
        sentence_tokens.iter().map(|tok| rules.lexicon.classify(tok)).collect();
    let n = region.len();
    for a in 0..n {
        for b in (a + 1)..n {
            let window_hit = b - a <= rules.window_radius;
            let mut rule_hit = false;
            for rule in &rules.link_rules {
                let forward = classes[a] == rule.from && classes[b] == rule.to;
                let backward =
                    rule.bidirectional && classes[a] == rule.to && classes[b] == rule.from;
                if forward || backward {
                    rule_hit = true;
                    break;
                }
            }
            if window_hit || rule_hit {
                let (i, j) = (region.start + a, region.start + b);
                w.set(i, j, 1.0);
                w.set(j, i, 1.0);
            }
        }
    }
    AdjacencyMatrix { kind: GraphKind::Syntactic, weights: w }
}

/// Full cosine-similarity matrix of the rows of `h` over real positions.
/// Padding rows and columns are zero; the diagonal of real rows is exactly 1.
pub fn raw_cosine_matrix(h: &Matrix, encoded: &EncodedInstance) -> Matrix {
    assert_eq!(
        h.rows(),
        encoded.len(),
        "embedding rows {} do not match sequence length {}",
        h.rows(),
        encoded.len()
    );
    let t = h.rows();
    let mut out = Matrix::zeros(t, t);
    for i in 0..t {
        if !encoded.pad_mask[i] {
            continue;
        }
        out.set(i, i, 1.0);
        for j in (i + 1)..t {
            if !encoded.pad_mask[j] {
                continue;
            }
            let sim = cosine_similarity(h.row(i), h.row(j));
            out.set(i, j, sim);
            out.set(j, i, sim);
        }
    }
    out
}

/// Semantic adjacency: cosine similarities clamped to `[0, 1]`, then for each
/// row only the `top_k` largest off-diagonal entries at or above `threshold`
/// are kept (ties broken toward the lower column index). Self-loops of 1 are
/// re-added for real tokens. The pruned matrix is not re-symmetrized, so it
/// is directed by construction.
pub fn build_semantic(
    h: &Matrix,
    encoded: &EncodedInstance,
    top_k: usize,
    threshold: f64,
) -> Result<AdjacencyMatrix, GraphError> {
    let t = encoded.len();
    if top_k == 0 {
        return Err(GraphError::Config("semantic top_k must be >= 1".into()));
    }
    if top_k >= t {
        return Err(GraphError::Config(format!(
            "semantic top_k ({top_k}) must be smaller than the sequence length ({t})"
        )));
    }
    if !(-1.0..=1.0).contains(&threshold) {
        return Err(GraphError::Config(format!(
            "semantic threshold ({threshold}) must lie in [-1, 1]"
        )));
    }
    let raw = raw_cosine_matrix(h, encoded);
    let mut w = Matrix::zeros(t, t);
    for i in 0..t {
        if !encoded.pad_mask[i] {
            continue;
        }
        let mut candidates: Vec<(usize, f64)> = (0..t)
            .filter(|&j| j != i && encoded.pad_mask[j])
            .map(|j| (j, raw.get(i, j).max(0.0)))
            .filter(|&(_, v)| v >= threshold)
            .collect();
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for &(j, v) in candidates.iter().take(top_k) {
            w.set(i, j, v);
        }
        w.set(i, i, 1.0);
    }
    Ok(AdjacencyMatrix { kind: GraphKind::Semantic, weights: w })
}

/// Aspect-proximity adjacency: each aspect token in the sentence region links
/// to sentence tokens within `radius` positions (symmetric closure), all
/// aspect tokens are mutually connected, and every real token keeps a
/// self-loop. The aspect tail copy participates only via self-loops.
pub fn build_aspect(encoded: &EncodedInstance, radius: usize) -> AdjacencyMatrix {
    let t = encoded.len();
    let mut w = Matrix::zeros(t, t);
    for i in 0..t {
        if encoded.pad_mask[i] {
            w.set(i, i, 1.0);
        }
    }
    let aspect: Vec<usize> = encoded.aspect_in_sentence.clone().collect();
    for &a in &aspect {
        for &b in &aspect {
            if a != b {
                w.set(a, b, 1.0);
            }
        }
        for j in encoded.sentence_range.clone() {
            if j != a && a.abs_diff(j) <= radius {
                w.set(a, j, 1.0);
                w.set(j, a, 1.0);
            }
        }
    }
    AdjacencyMatrix { kind: GraphKind::Aspect, weights: w }
}

/// Distance statistics between the aspect and the rest of the sentence:
/// unweighted BFS hops on the syntactic graph (unreachable pairs excluded and
/// reflected in the coverage ratio) and `1 - cosine` on the raw semantic
/// similarities, both averaged over (aspect token, non-aspect sentence token)
/// pairs.
pub fn graph_stats(
    syn: &AdjacencyMatrix,
    raw_cosine: &Matrix,
    encoded: &EncodedInstance,
) -> Result<GraphStats, GraphError> {
    let aspect: Vec<usize> = encoded.aspect_in_sentence.clone().collect();
    if aspect.is_empty() {
        return Err(GraphError::NoAspectTokens);
    }
    let targets: Vec<usize> = encoded
        .sentence_range
        .clone()
        .filter(|p| !encoded.aspect_in_sentence.contains(p) && encoded.pad_mask[*p])
        .collect();
    let mut hop_sum = 0.0;
    let mut hop_count = 0usize;
    let mut sem_sum = 0.0;
    let mut total_pairs = 0usize;
    for &a in &aspect {
        let dist = bfs_hops(&syn.weights, a);
        for &t in &targets {
            total_pairs += 1;
            sem_sum += 1.0 - raw_cosine.get(a, t);
            if let Some(d) = dist[t] {
                hop_sum += d as f64;
                hop_count += 1;
            }
        }
    }
    if total_pairs == 0 {
        return Ok(GraphStats {
            mean_syntactic_distance: 0.0,
            mean_semantic_distance: 0.0,
            syntactic_coverage: 1.0,
        });
    }
    Ok(GraphStats {
        mean_syntactic_distance: if hop_count > 0 { hop_sum / hop_count as f64 } else { 0.0 },
        mean_semantic_distance: sem_sum / total_pairs as f64,
        syntactic_coverage: hop_count as f64 / total_pairs as f64,
    })
}

fn bfs_hops(weights: &Matrix, start: usize) -> Vec<Option<usize>> {
    let n = weights.rows();
    let mut dist = vec![None; n];
    dist[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].unwrap();
        for v in 0..n {
            if v != u && weights.get(u, v) > 0.0 && dist[v].is_none() {
                dist[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Parsed `#edges T=<n>` edge-list file: 0-based sentence-token index pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeList {
    pub sentence_len: usize,
    pub edges: Vec<(usize, usize)>,
}

pub fn load_edge_list(path: &Path) -> Result<EdgeList, GraphError> {
    let text = fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let path_str = path.display().to_string();
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| GraphError::Parse {
        path: path_str.clone(),
        line: 1,
        message: "empty file, expected `#edges T=<n>` header".into(),
    })?;
    let sentence_len: usize = header
        .trim()
        .strip_prefix("#edges T=")
        .and_then(|rest| rest.trim().parse().ok())
        .ok_or_else(|| GraphError::Parse {
            path: path_str.clone(),
            line: 1,
            message: format!("bad header `{header}`, expected `#edges T=<n>`"),
        })?;
    let mut edges = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |s: Option<&str>| -> Option<usize> { s.and_then(|v| v.parse().ok()) };
        match (parse(it.next()), parse(it.next()), it.next()) {
            (Some(i), Some(j), None) if i < sentence_len && j < sentence_len => {
                edges.push((i, j));
            }
            _ => {
                return Err(GraphError::Parse {
                    path: path_str,
                    line: lineno + 1,
                    message: format!("bad edge line `{line}`, expected `i j` below T"),
                })
            }
        }
    }
    Ok(EdgeList { sentence_len, edges })
}

/// Syntactic adjacency from a precomputed edge list. Edge indices address the
/// encoded (post-truncation) sentence region; the list length must match it.
pub fn syntactic_from_edges(
    encoded: &EncodedInstance,
    edges: &EdgeList,
) -> Result<AdjacencyMatrix, GraphError> {
    let region = encoded.sentence_range.clone();
    if edges.sentence_len != region.len() {
        return Err(GraphError::Config(format!(
            "edge list is for a {}-token sentence but the encoded sentence region has {} tokens",
            edges.sentence_len,
            region.len()
        )));
    }
    let t = encoded.len();
    let mut w = Matrix::zeros(t, t);
    for i in 0..t {
        if encoded.pad_mask[i] {
            w.set(i, i, 1.0);
        }
    }
    for &(a, b) in &edges.edges {
        let (i, j) = (region.start + a, region.start + b);
        w.set(i, j, 1.0);
        w.set(j, i, 1.0);
    }
    Ok(AdjacencyMatrix { kind: GraphKind::Syntactic, weights: w })
}

/// Write a matrix as CSV, one row per line, with an optional header row of
/// labels (quoted as needed).
pub fn write_matrix_csv(
    path: &Path,
    matrix: &Matrix,
    headers: Option<&[String]>,
) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    if let Some(headers) = headers {
        let line: Vec<String> = headers.iter().map(|h| csv_field(h)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    for i in 0..matrix.rows() {
        let line: Vec<String> = matrix.row(i).iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()
}

/// Quote a CSV field when it contains a delimiter, quote, or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{encode, tokenize, DatasetSplit, Instance, Polarity, SplitName, Vocab};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn encode_words(words: &[&str], aspect: std::ops::Range<usize>) -> EncodedInstance {
        let tokens: Vec<String> = words.iter().map(|w| w.to_string()).collect();
        let inst = Instance::new("t", tokens, aspect, Polarity::Positive).unwrap();
        let split = DatasetSplit { name: SplitName::Train, instances: vec![inst.clone()] };
        let vocab = Vocab::build(&split, 1).unwrap();
        encode(&inst, &vocab, 64).unwrap()
    }

    fn window_only_rules(radius: usize) -> SyntaxRuleSet {
        SyntaxRuleSet {
            window_radius: radius,
            link_rules: vec![],
            lexicon: Lexicon { words: vec![], suffixes: vec![] },
        }
    }

    #[test]
    fn syntactic_two_tokens_radius_one() {
        let enc = encode_words(&["alpha", "beta"], 0..1);
        let adj = build_syntactic(&enc, &enc.sentence_tokens, &window_only_rules(1));
        // sentence positions are 1 and 2
        assert!(adj.is_edge(1, 2) && adj.is_edge(2, 1));
        for i in 0..enc.len() {
            assert!(adj.is_edge(i, i), "self-loop missing at {i}");
        }
        // CLS and SEPs connect only via self-loops
        for j in 1..enc.len() {
            assert!(!adj.is_edge(0, j));
        }
    }

    #[test]
    fn syntactic_single_token_sentence() {
        let enc = encode_words(&["solo"], 0..1);
        let adj = build_syntactic(&enc, &enc.sentence_tokens, &window_only_rules(2));
        for i in 0..enc.len() {
            for j in 0..enc.len() {
                assert_eq!(adj.is_edge(i, j), i == j, "unexpected edge ({i},{j})");
            }
        }
    }

    /// Brute-force re-application of the documented rule semantics,
    /// independent of the production code path.
    fn brute_force_syntactic(
        enc: &EncodedInstance,
        tokens: &[String],
        rules: &SyntaxRuleSet,
    ) -> Vec<(usize, usize)> {
        let classes: Vec<CoarseClass> =
            tokens.iter().map(|t| rules.lexicon.classify(t)).collect();
        let base = enc.sentence_range.start;
        let mut edges = Vec::new();
        for a in 0..tokens.len() {
            for b in 0..tokens.len() {
                if a >= b {
                    continue;
                }
                let mut hit = b - a <= rules.window_radius;
                for r in &rules.link_rules {
                    if classes[a] == r.from && classes[b] == r.to {
                        hit = true;
                    }
                    if r.bidirectional && classes[a] == r.to && classes[b] == r.from {
                        hit = true;
                    }
                }
                if hit {
                    edges.push((base + a, base + b));
                }
            }
        }
        edges
    }

    #[test]
    fn syntactic_class_rules_match_hand_enumeration() {
        // "cook served fresh hot decoration": served -> VerbLike (ed suffix),
        // fresh -> ModifierLike (wordlist), decoration -> NounLike (tion
        // suffix), cook/hot -> Other with the default lexicon.
        let words = ["cook", "served", "fresh", "hot", "decoration"];
        let enc = encode_words(&words, 4..5);
        let rules = SyntaxRuleSet { window_radius: 1, ..SyntaxRuleSet::default() };
        let adj = build_syntactic(&enc, &enc.sentence_tokens, &rules);
        let expected = brute_force_syntactic(&enc, &enc.sentence_tokens, &rules);
        for i in 0..enc.len() {
            for j in 0..enc.len() {
                if i == j {
                    continue;
                }
                let want = expected.contains(&(i.min(j), i.max(j)));
                assert_eq!(adj.is_edge(i, j), want, "edge ({i},{j})");
            }
        }
        // spot checks from hand enumeration
        let base = enc.sentence_range.start;
        assert!(adj.is_edge(base + 1, base + 4), "verb-noun rule edge expected");
        assert!(adj.is_edge(base + 2, base + 4), "modifier-noun rule edge expected");
    }

    #[test]
    fn syntactic_is_symmetric_and_binary_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pool = ["eat", "played", "fresh", "stuff", "table", "ran", "useful"];
        for _ in 0..20 {
            let n = rng.random_range(1..8);
            let words: Vec<&str> = (0..n).map(|_| pool[rng.random_range(0..pool.len())]).collect();
            let enc = encode_words(&words, 0..1);
            let adj = build_syntactic(&enc, &enc.sentence_tokens, &SyntaxRuleSet::default());
            for i in 0..enc.len() {
                for j in 0..enc.len() {
                    let w = adj.weights.get(i, j);
                    assert!(w == 0.0 || w == 1.0);
                    assert_eq!(w, adj.weights.get(j, i));
                }
            }
        }
    }

    #[test]
    #[should_panic(expected = "misaligned")]
    fn syntactic_rejects_misaligned_tokens() {
        let enc = encode_words(&["a", "b"], 0..1);
        build_syntactic(&enc, &["a".to_string()], &window_only_rules(1));
    }

    fn random_h(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn semantic_identical_rows_keep_weight_one() {
        let enc = encode_words(&["a", "b", "c"], 0..1);
        let h = Matrix::from_rows(&vec![vec![0.3, -0.7, 0.2]; enc.len()]);
        let adj = build_semantic(&h, &enc, 2, 0.1).unwrap();
        for i in 0..enc.len() {
            let nonzero: Vec<f64> =
                (0..enc.len()).filter(|&j| j != i).map(|j| adj.weights.get(i, j)).filter(|&v| v > 0.0).collect();
            assert_eq!(nonzero.len(), 2);
            for v in nonzero {
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn semantic_orthogonal_rows_leave_self_loops_only() {
        let enc = encode_words(&["a", "b", "c"], 0..1);
        let t = enc.len();
        let mut h = Matrix::zeros(t, t);
        for i in 0..t {
            h.set(i, i, 1.0);
        }
        let adj = build_semantic(&h, &enc, 2, 0.5).unwrap();
        for i in 0..t {
            for j in 0..t {
                assert_eq!(adj.is_edge(i, j), i == j);
            }
        }
    }

    #[test]
    fn semantic_matches_brute_force_top_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let enc = encode_words(&["a", "b", "c"], 0..1); // T = 6
        let t = enc.len();
        for _ in 0..10 {
            let h = random_h(&mut rng, t, 4);
            let top_k = 2;
            let threshold = 0.1;
            let adj = build_semantic(&h, &enc, top_k, threshold).unwrap();
            // oracle: full sort of each row of the raw cosine matrix
            for i in 0..t {
                let mut scored: Vec<(usize, f64)> = (0..t)
                    .filter(|&j| j != i)
                    .map(|j| (j, cosine_similarity(h.row(i), h.row(j)).max(0.0)))
                    .filter(|&(_, v)| v >= threshold)
                    .collect();
                scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                scored.truncate(top_k);
                for j in 0..t {
                    if i == j {
                        assert_eq!(adj.weights.get(i, i), 1.0);
                        continue;
                    }
                    let expect = scored.iter().find(|&&(jj, _)| jj == j).map(|&(_, v)| v);
                    match expect {
                        Some(v) => assert!((adj.weights.get(i, j) - v).abs() < 1e-12),
                        None => assert_eq!(adj.weights.get(i, j), 0.0),
                    }
                }
            }
        }
    }

    #[test]
    fn semantic_rows_bounded_by_top_k_plus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let enc = encode_words(&["a", "b", "c", "d"], 1..2);
        let h = random_h(&mut rng, enc.len(), 5);
        let adj = build_semantic(&h, &enc, 3, -1.0).unwrap();
        for i in 0..enc.len() {
            let nz = (0..enc.len()).filter(|&j| adj.weights.get(i, j) > 0.0).count();
            assert!(nz <= 4, "row {i} has {nz} nonzeros");
        }
    }

    #[test]
    fn semantic_raw_matrix_symmetric_unit_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let enc = encode_words(&["a", "b", "c"], 0..1);
        let h = random_h(&mut rng, enc.len(), 4);
        let raw = raw_cosine_matrix(&h, &enc);
        for i in 0..enc.len() {
            assert!((raw.get(i, i) - 1.0).abs() < 1e-12);
            for j in 0..enc.len() {
                assert!((raw.get(i, j) - raw.get(j, i)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn semantic_commutes_with_row_permutation() {
        // swapping two non-aspect embedding rows permutes the graph the same way
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let enc = encode_words(&["a", "b", "c", "d"], 0..1);
        let h = random_h(&mut rng, enc.len(), 4);
        let adj = build_semantic(&h, &enc, 2, 0.0).unwrap();
        // swap sentence positions 2 and 3 (tokens "b" and "c")
        let (p, q) = (2usize, 3usize);
        let mut swapped = h.clone();
        for col in 0..h.cols() {
            let tmp = swapped.get(p, col);
            swapped.set(p, col, swapped.get(q, col));
            swapped.set(q, col, tmp);
        }
        let adj2 = build_semantic(&swapped, &enc, 2, 0.0).unwrap();
        let perm = |x: usize| if x == p { q } else if x == q { p } else { x };
        for i in 0..enc.len() {
            for j in 0..enc.len() {
                assert!(
                    (adj.weights.get(i, j) - adj2.weights.get(perm(i), perm(j))).abs() < 1e-12,
                    "({i},{j})"
                );
            }
        }
    }

    #[test]
    fn semantic_rejects_top_k_at_or_above_t() {
        let enc = encode_words(&["a"], 0..1);
        let h = Matrix::zeros(enc.len(), 3);
        assert!(matches!(
            build_semantic(&h, &enc, enc.len(), 0.0),
            Err(GraphError::Config(_))
        ));
    }

    #[test]
    fn aspect_radius_zero_gives_clique_plus_self_loops() {
        let enc = encode_words(&["a", "b", "c", "d"], 1..3);
        let adj = build_aspect(&enc, 0);
        let aspect: Vec<usize> = enc.aspect_in_sentence.clone().collect();
        for i in 0..enc.len() {
            for j in 0..enc.len() {
                let expected = i == j || (aspect.contains(&i) && aspect.contains(&j));
                assert_eq!(adj.is_edge(i, j), expected, "edge ({i},{j})");
            }
        }
    }

    #[test]
    fn aspect_large_radius_saturates_sentence_region() {
        let enc = encode_words(&["a", "b", "c", "d"], 1..2);
        let adj = build_aspect(&enc, 100);
        let a = enc.aspect_in_sentence.start;
        for j in enc.sentence_range.clone() {
            if j != a {
                assert!(adj.is_edge(a, j) && adj.is_edge(j, a));
            }
        }
        // tail and specials stay self-loop-only
        let tail = enc.aspect_tail.start;
        for j in 0..enc.len() {
            assert_eq!(adj.is_edge(tail, j), j == tail);
        }
    }

    #[test]
    fn aspect_seven_token_fixture_matches_hand_enumeration() {
        // 7 sentence tokens, aspect span [3,4), radius 2.
        let words = ["t0", "t1", "t2", "t3", "t4", "t5", "t6"];
        let enc = encode_words(&words, 3..4);
        let adj = build_aspect(&enc, 2);
        let a = enc.aspect_in_sentence.start; // encoded position 4
        assert_eq!(a, 4);
        let mut expected: Vec<(usize, usize)> = Vec::new();
        for j in [2usize, 3, 5, 6] {
            expected.push((a.min(j), a.max(j)));
        }
        for i in 0..enc.len() {
            for j in 0..enc.len() {
                if i == j {
                    assert_eq!(adj.is_edge(i, j), enc.pad_mask[i]);
                    continue;
                }
                let want = expected.contains(&(i.min(j), i.max(j)));
                assert_eq!(adj.is_edge(i, j), want, "edge ({i},{j})");
            }
        }
    }

    #[test]
    fn stats_path_graph_mean_is_one_point_five() {
        let enc = encode_words(&["a", "b", "c"], 0..1);
        let adj = build_syntactic(&enc, &enc.sentence_tokens, &window_only_rules(1));
        let h = Matrix::filled(enc.len(), 4, 0.5);
        let raw = raw_cosine_matrix(&h, &enc);
        let stats = graph_stats(&adj, &raw, &enc).unwrap();
        assert_eq!(stats.mean_syntactic_distance, 1.5);
        assert_eq!(stats.syntactic_coverage, 1.0);
        assert!(stats.mean_semantic_distance.abs() < 1e-12);
    }

    #[test]
    fn stats_star_graph_mean_is_one() {
        // star centered on the aspect token, built from a precomputed edge list
        let words = ["hub", "s1", "s2", "s3"];
        let enc = encode_words(&words, 0..1);
        let edges = EdgeList { sentence_len: 4, edges: vec![(0, 1), (0, 2), (0, 3)] };
        let adj = syntactic_from_edges(&enc, &edges).unwrap();
        let h = Matrix::filled(enc.len(), 4, 1.0);
        let raw = raw_cosine_matrix(&h, &enc);
        let stats = graph_stats(&adj, &raw, &enc).unwrap();
        assert_eq!(stats.mean_syntactic_distance, 1.0);
        assert_eq!(stats.syntactic_coverage, 1.0);
    }

    #[test]
    fn stats_counts_unreachable_pairs_in_coverage() {
        let enc = encode_words(&["a", "b", "c"], 0..1);
        // no edges beyond self-loops
        let adj = build_syntactic(&enc, &enc.sentence_tokens, &window_only_rules(0));
        let h = Matrix::filled(enc.len(), 2, 1.0);
        let raw = raw_cosine_matrix(&h, &enc);
        let stats = graph_stats(&adj, &raw, &enc).unwrap();
        assert_eq!(stats.syntactic_coverage, 0.0);
        assert_eq!(stats.mean_syntactic_distance, 0.0);
    }

    #[test]
    fn edge_list_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("g.edges");
        std::fs::write(&good, "#edges T=3\n0 1\n1 2\n").unwrap();
        let parsed = load_edge_list(&good).unwrap();
        assert_eq!(parsed, EdgeList { sentence_len: 3, edges: vec![(0, 1), (1, 2)] });

        let bad_header = dir.path().join("h.edges");
        std::fs::write(&bad_header, "edges 3\n0 1\n").unwrap();
        assert!(matches!(load_edge_list(&bad_header), Err(GraphError::Parse { line: 1, .. })));

        let bad_line = dir.path().join("l.edges");
        std::fs::write(&bad_line, "#edges T=3\n0 7\n").unwrap();
        assert!(matches!(load_edge_list(&bad_line), Err(GraphError::Parse { line: 2, .. })));
    }

    #[test]
    fn csv_field_quotes_delimiters() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
