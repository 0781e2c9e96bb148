//! The classifier network: context encoding, two graph-attention branches,
//! cross-attention fusion, transformer refinement, aspect extraction, highway
//! gating, and the final linear classifier.

mod checkpoint;
mod forward;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointData};
pub use forward::{
    aspect_extract, cross_attention, forward, gat_layer, highway_fuse, predict, AdjacencyInputs,
    ContextSource, CrossVars, ForwardRun, ForwardTrace, GatVars, HighwayVars, Mode,
};

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::NUM_CLASSES;
use crate::numkit::Matrix;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("model config: {0}")]
    Config(String),
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("precomputed embeddings: {0}")]
    Embedding(String),
}

/// Where the context encoder gets its token vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum EmbeddingSource {
    /// Learn an embedding table plus a small self-attention encoder.
    Trainable,
    /// Read per-token vectors from a file and learn only the projection.
    PrecomputedFile { path: PathBuf },
}

impl Default for EmbeddingSource {
    fn default() -> Self {
        EmbeddingSource::Trainable
    }
}

/// Architecture toggles mirroring the ablation settings. Each flag removes
/// the corresponding computation and its parameters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationFlags {
    pub no_syntax_graph: bool,
    pub no_semantic_graph: bool,
    pub no_graph_branches: bool,
    pub no_cross_attention: bool,
    pub no_transformer_refine: bool,
    pub no_highway_gate: bool,
    pub no_aspect_embedding: bool,
    pub fixed_adjacency: bool,
}

impl AblationFlags {
    pub const ALL_NAMES: [&'static str; 8] = [
        "no_syntax_graph",
        "no_semantic_graph",
        "no_graph_branches",
        "no_cross_attention",
        "no_transformer_refine",
        "no_highway_gate",
        "no_aspect_embedding",
        "fixed_adjacency",
    ];

    pub fn with_flag(mut self, name: &str) -> Result<Self, ModelError> {
        match name {
            "no_syntax_graph" => self.no_syntax_graph = true,
            "no_semantic_graph" => self.no_semantic_graph = true,
            "no_graph_branches" => self.no_graph_branches = true,
            "no_cross_attention" => self.no_cross_attention = true,
            "no_transformer_refine" => self.no_transformer_refine = true,
            "no_highway_gate" => self.no_highway_gate = true,
            "no_aspect_embedding" => self.no_aspect_embedding = true,
            "fixed_adjacency" => self.fixed_adjacency = true,
            other => return Err(ModelError::Config(format!("unknown ablation flag `{other}`"))),
        }
        Ok(self)
    }

    /// Disabling both graph branches is the same setting as `no_graph_branches`.
    pub fn skip_syntax(&self) -> bool {
        self.no_syntax_graph || self.no_graph_branches
    }

    pub fn skip_semantic(&self) -> bool {
        self.no_semantic_graph || self.no_graph_branches
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Vocabulary size including the four reserved tokens. 0 means "derive
    /// from the training vocabulary".
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub gat_layers: usize,
    pub refine_heads: usize,
    pub refine_layers: usize,
    pub leaky_slope: f64,
    pub dropout_rate: f64,
    pub flags: AblationFlags,
    pub embedding_source: EmbeddingSource,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_size: 0,
            embed_dim: 64,
            hidden_dim: 64,
            num_classes: NUM_CLASSES,
            gat_layers: 1,
            refine_heads: 4,
            refine_layers: 1,
            leaky_slope: 0.2,
            dropout_rate: 0.1,
            flags: AblationFlags::default(),
            embedding_source: EmbeddingSource::Trainable,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: String| Err(ModelError::Config(msg));
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return fail("embed_dim and hidden_dim must be positive".into());
        }
        if self.num_classes != NUM_CLASSES {
            return fail(format!("num_classes must be {NUM_CLASSES}"));
        }
        if self.refine_heads == 0 || self.hidden_dim % self.refine_heads != 0 {
            return fail(format!(
                "hidden_dim ({}) must be divisible by refine_heads ({})",
                self.hidden_dim, self.refine_heads
            ));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return fail(format!("leaky_slope ({}) must lie in (0, 1)", self.leaky_slope));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout_rate ({}) must lie in [0, 1)", self.dropout_rate));
        }
        if self.gat_layers == 0 {
            return fail("gat_layers must be >= 1".into());
        }
        if matches!(self.embedding_source, EmbeddingSource::Trainable) && self.vocab_size < 4 {
            return fail(format!(
                "vocab_size ({}) must cover the 4 reserved tokens",
                self.vocab_size
            ));
        }
        Ok(())
    }

    fn trainable_context(&self) -> bool {
        matches!(self.embedding_source, EmbeddingSource::Trainable)
    }
}

// ---------------------------------------------------------------------------
// Parameter containers
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
    pub ff1_w: Matrix,
    pub ff1_b: Matrix,
    pub ff2_w: Matrix,
    pub ff2_b: Matrix,
    pub ln1_gamma: Matrix,
    pub ln1_beta: Matrix,
    pub ln2_gamma: Matrix,
    pub ln2_beta: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GatParams {
    pub w: Matrix,
    /// Attention vector half applied to the source node (a_1 in a = [a_1; a_2]).
    pub attn_self: Matrix,
    /// Attention vector half applied to the neighbor node.
    pub attn_neigh: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossParams {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockParams {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
    pub ff1_w: Matrix,
    pub ff1_b: Matrix,
    pub ff2_w: Matrix,
    pub ff2_b: Matrix,
    pub ln1_gamma: Matrix,
    pub ln1_beta: Matrix,
    pub ln2_gamma: Matrix,
    pub ln2_beta: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefineParams {
    pub in_proj_w: Matrix,
    pub in_proj_b: Matrix,
    /// Empty when the transformer refinement stage is ablated; the input
    /// projection always remains because it reconciles 2d with d.
    pub blocks: Vec<BlockParams>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HighwayParams {
    pub gate_w: Matrix,
    pub gate_b: Matrix,
    pub transform_w: Matrix,
    pub transform_b: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierParams {
    pub w: Matrix,
    pub b: Matrix,
}

/// Every learnable tensor. Ablated components are absent, not zeroed, so a
/// flagged model is literally a model without those parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub embedding: Option<Matrix>,
    pub encoder: Option<EncoderParams>,
    pub proj_w: Matrix,
    pub proj_b: Matrix,
    pub gat_syntax: Option<Vec<GatParams>>,
    pub gat_semantic: Option<Vec<GatParams>>,
    pub cross_syntax: Option<CrossParams>,
    pub cross_semantic: Option<CrossParams>,
    pub refine: RefineParams,
    pub gat_aspect: Option<GatParams>,
    pub highway: Option<HighwayParams>,
    pub classifier: ClassifierParams,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Each tensor draws from its own stream keyed by (seed, tensor name), so the
/// values of one tensor never depend on which other tensors exist.
fn tensor_seed(seed: u64, name: &str) -> u64 {
    let mut buf = Vec::with_capacity(8 + name.len());
    buf.extend_from_slice(&seed.to_le_bytes());
    buf.extend_from_slice(name.as_bytes());
    fnv1a(&buf)
}

fn xavier(seed: u64, name: &str, rows: usize, cols: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(tensor_seed(seed, name));
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect())
}

fn gat_params(seed: u64, prefix: &str, d: usize) -> GatParams {
    GatParams {
        w: xavier(seed, &format!("{prefix}.w"), d, d),
        attn_self: xavier(seed, &format!("{prefix}.attn_self"), d, 1),
        attn_neigh: xavier(seed, &format!("{prefix}.attn_neigh"), d, 1),
    }
}

fn block_params(seed: u64, prefix: &str, d: usize) -> BlockParams {
    BlockParams {
        wq: xavier(seed, &format!("{prefix}.wq"), d, d),
        wk: xavier(seed, &format!("{prefix}.wk"), d, d),
        wv: xavier(seed, &format!("{prefix}.wv"), d, d),
        wo: xavier(seed, &format!("{prefix}.wo"), d, d),
        ff1_w: xavier(seed, &format!("{prefix}.ff1_w"), d, 2 * d),
        ff1_b: Matrix::zeros(1, 2 * d),
        ff2_w: xavier(seed, &format!("{prefix}.ff2_w"), 2 * d, d),
        ff2_b: Matrix::zeros(1, d),
        ln1_gamma: Matrix::filled(1, d, 1.0),
        ln1_beta: Matrix::zeros(1, d),
        ln2_gamma: Matrix::filled(1, d, 1.0),
        ln2_beta: Matrix::zeros(1, d),
    }
}

impl ModelParams {
    /// Fan-based uniform initialization for weights, zeros for biases, ones
    /// for layer-norm gains. The highway gate bias starts at -1 so the gate
    /// opens near carry-through.
    pub fn init(config: &ModelConfig, seed: u64) -> ModelParams {
        let de = config.embed_dim;
        let d = config.hidden_dim;
        let flags = &config.flags;
        let trainable = config.trainable_context();

        let embedding = trainable.then(|| xavier(seed, "embedding", config.vocab_size, de));
        let encoder = trainable.then(|| EncoderParams {
            wq: xavier(seed, "encoder.wq", de, de),
            wk: xavier(seed, "encoder.wk", de, de),
            wv: xavier(seed, "encoder.wv", de, de),
            wo: xavier(seed, "encoder.wo", de, de),
            ff1_w: xavier(seed, "encoder.ff1_w", de, 2 * de),
            ff1_b: Matrix::zeros(1, 2 * de),
            ff2_w: xavier(seed, "encoder.ff2_w", 2 * de, de),
            ff2_b: Matrix::zeros(1, de),
            ln1_gamma: Matrix::filled(1, de, 1.0),
            ln1_beta: Matrix::zeros(1, de),
            ln2_gamma: Matrix::filled(1, de, 1.0),
            ln2_beta: Matrix::zeros(1, de),
        });

        let gat_stack = |prefix: &str| -> Vec<GatParams> {
            (0..config.gat_layers).map(|i| gat_params(seed, &format!("{prefix}.{i}"), d)).collect()
        };
        let cross = |prefix: &str| CrossParams {
            wq: xavier(seed, &format!("{prefix}.wq"), d, d),
            wk: xavier(seed, &format!("{prefix}.wk"), d, d),
            wv: xavier(seed, &format!("{prefix}.wv"), d, d),
        };

        ModelParams {
            embedding,
            encoder,
            proj_w: xavier(seed, "proj.w", de, d),
            proj_b: Matrix::zeros(1, d),
            gat_syntax: (!flags.skip_syntax()).then(|| gat_stack("gat_syntax")),
            gat_semantic: (!flags.skip_semantic()).then(|| gat_stack("gat_semantic")),
            cross_syntax: (!flags.no_cross_attention).then(|| cross("cross_syntax")),
            cross_semantic: (!flags.no_cross_attention).then(|| cross("cross_semantic")),
            refine: RefineParams {
                in_proj_w: xavier(seed, "refine.in_proj.w", 2 * d, d),
                in_proj_b: Matrix::zeros(1, d),
                blocks: if flags.no_transformer_refine {
                    Vec::new()
                } else {
                    (0..config.refine_layers)
                        .map(|i| block_params(seed, &format!("refine.block{i}"), d))
                        .collect()
                },
            },
            gat_aspect: (!flags.no_aspect_embedding).then(|| gat_params(seed, "gat_aspect", d)),
            highway: (!flags.no_highway_gate).then(|| HighwayParams {
                gate_w: xavier(seed, "highway.gate_w", 2 * d, 2 * d),
                gate_b: Matrix::filled(1, 2 * d, -1.0),
                transform_w: xavier(seed, "highway.transform_w", 2 * d, 2 * d),
                transform_b: Matrix::zeros(1, 2 * d),
            }),
            classifier: ClassifierParams {
                w: xavier(seed, "classifier.w", 2 * d, config.num_classes),
                b: Matrix::zeros(1, config.num_classes),
            },
        }
    }

    /// Visit every tensor with its stable name, in a fixed order.
    pub fn for_each(&self, mut f: impl FnMut(&str, &Matrix)) {
        let mut g = |name: &str, m: &Matrix| f(name, m);
        if let Some(e) = &self.embedding {
            g("embedding", e);
        }
        if let Some(enc) = &self.encoder {
            g("encoder.wq", &enc.wq);
            g("encoder.wk", &enc.wk);
            g("encoder.wv", &enc.wv);
            g("encoder.wo", &enc.wo);
            g("encoder.ff1_w", &enc.ff1_w);
            g("encoder.ff1_b", &enc.ff1_b);
            g("encoder.ff2_w", &enc.ff2_w);
            g("encoder.ff2_b", &enc.ff2_b);
            g("encoder.ln1_gamma", &enc.ln1_gamma);
            g("encoder.ln1_beta", &enc.ln1_beta);
            g("encoder.ln2_gamma", &enc.ln2_gamma);
            g("encoder.ln2_beta", &enc.ln2_beta);
        }
        g("proj.w", &self.proj_w);
        g("proj.b", &self.proj_b);
        for (prefix, stack) in
            [("gat_syntax", &self.gat_syntax), ("gat_semantic", &self.gat_semantic)]
        {
            if let Some(stack) = stack {
                for (i, p) in stack.iter().enumerate() {
                    g(&format!("{prefix}.{i}.w"), &p.w);
                    g(&format!("{prefix}.{i}.attn_self"), &p.attn_self);
                    g(&format!("{prefix}.{i}.attn_neigh"), &p.attn_neigh);
                }
            }
        }
        for (prefix, cross) in
            [("cross_syntax", &self.cross_syntax), ("cross_semantic", &self.cross_semantic)]
        {
            if let Some(c) = cross {
                g(&format!("{prefix}.wq"), &c.wq);
                g(&format!("{prefix}.wk"), &c.wk);
                g(&format!("{prefix}.wv"), &c.wv);
            }
        }
        g("refine.in_proj.w", &self.refine.in_proj_w);
        g("refine.in_proj.b", &self.refine.in_proj_b);
        for (i, b) in self.refine.blocks.iter().enumerate() {
            let p = format!("refine.block{i}");
            g(&format!("{p}.wq"), &b.wq);
            g(&format!("{p}.wk"), &b.wk);
            g(&format!("{p}.wv"), &b.wv);
            g(&format!("{p}.wo"), &b.wo);
            g(&format!("{p}.ff1_w"), &b.ff1_w);
            g(&format!("{p}.ff1_b"), &b.ff1_b);
            g(&format!("{p}.ff2_w"), &b.ff2_w);
            g(&format!("{p}.ff2_b"), &b.ff2_b);
            g(&format!("{p}.ln1_gamma"), &b.ln1_gamma);
            g(&format!("{p}.ln1_beta"), &b.ln1_beta);
            g(&format!("{p}.ln2_gamma"), &b.ln2_gamma);
            g(&format!("{p}.ln2_beta"), &b.ln2_beta);
        }
        if let Some(a) = &self.gat_aspect {
            g("gat_aspect.w", &a.w);
            g("gat_aspect.attn_self", &a.attn_self);
            g("gat_aspect.attn_neigh", &a.attn_neigh);
        }
        if let Some(h) = &self.highway {
            g("highway.gate_w", &h.gate_w);
            g("highway.gate_b", &h.gate_b);
            g("highway.transform_w", &h.transform_w);
            g("highway.transform_b", &h.transform_b);
        }
        g("classifier.w", &self.classifier.w);
        g("classifier.b", &self.classifier.b);
    }

    /// Mutable visit in the same order and with the same names as [`for_each`].
    pub fn for_each_mut(&mut self, mut f: impl FnMut(&str, &mut Matrix)) {
        let mut g = |name: &str, m: &mut Matrix| f(name, m);
        if let Some(e) = &mut self.embedding {
            g("embedding", e);
        }
        if let Some(enc) = &mut self.encoder {
            g("encoder.wq", &mut enc.wq);
            g("encoder.wk", &mut enc.wk);
            g("encoder.wv", &mut enc.wv);
            g("encoder.wo", &mut enc.wo);
            g("encoder.ff1_w", &mut enc.ff1_w);
            g("encoder.ff1_b", &mut enc.ff1_b);
            g("encoder.ff2_w", &mut enc.ff2_w);
            g("encoder.ff2_b", &mut enc.ff2_b);
            g("encoder.ln1_gamma", &mut enc.ln1_gamma);
            g("encoder.ln1_beta", &mut enc.ln1_beta);
            g("encoder.ln2_gamma", &mut enc.ln2_gamma);
            g("encoder.ln2_beta", &mut enc.ln2_beta);
        }
        g("proj.w", &mut self.proj_w);
        g("proj.b", &mut self.proj_b);
        for (prefix, stack) in [
            ("gat_syntax", &mut self.gat_syntax),
            ("gat_semantic", &mut self.gat_semantic),
        ] {
            if let Some(stack) = stack {
                for (i, p) in stack.iter_mut().enumerate() {
                    g(&format!("{prefix}.{i}.w"), &mut p.w);
                    g(&format!("{prefix}.{i}.attn_self"), &mut p.attn_self);
                    g(&format!("{prefix}.{i}.attn_neigh"), &mut p.attn_neigh);
                }
            }
        }
        for (prefix, cross) in [
            ("cross_syntax", &mut self.cross_syntax),
            ("cross_semantic", &mut self.cross_semantic),
        ] {
            if let Some(c) = cross {
                g(&format!("{prefix}.wq"), &mut c.wq);
                g(&format!("{prefix}.wk"), &mut c.wk);
                g(&format!("{prefix}.wv"), &mut c.wv);
            }
        }
        g("refine.in_proj.w", &mut self.refine.in_proj_w);
        g("refine.in_proj.b", &mut self.refine.in_proj_b);
        for (i, b) in self.refine.blocks.iter_mut().enumerate() {
            let p = format!("refine.block{i}");
            g(&format!("{p}.wq"), &mut b.wq);
            g(&format!("{p}.wk"), &mut b.wk);
            g(&format!("{p}.wv"), &mut b.wv);
            g(&format!("{p}.wo"), &mut b.wo);
            g(&format!("{p}.ff1_w"), &mut b.ff1_w);
            g(&format!("{p}.ff1_b"), &mut b.ff1_b);
            g(&format!("{p}.ff2_w"), &mut b.ff2_w);
            g(&format!("{p}.ff2_b"), &mut b.ff2_b);
            g(&format!("{p}.ln1_gamma"), &mut b.ln1_gamma);
            g(&format!("{p}.ln1_beta"), &mut b.ln1_beta);
            g(&format!("{p}.ln2_gamma"), &mut b.ln2_gamma);
            g(&format!("{p}.ln2_beta"), &mut b.ln2_beta);
        }
        if let Some(a) = &mut self.gat_aspect {
            g("gat_aspect.w", &mut a.w);
            g("gat_aspect.attn_self", &mut a.attn_self);
            g("gat_aspect.attn_neigh", &mut a.attn_neigh);
        }
        if let Some(h) = &mut self.highway {
            g("highway.gate_w", &mut h.gate_w);
            g("highway.gate_b", &mut h.gate_b);
            g("highway.transform_w", &mut h.transform_w);
            g("highway.transform_b", &mut h.transform_b);
        }
        g("classifier.w", &mut self.classifier.w);
        g("classifier.b", &mut self.classifier.b);
    }

    pub fn named(&self) -> Vec<(String, Matrix)> {
        let mut out = Vec::new();
        self.for_each(|name, m| out.push((name.to_string(), m.clone())));
        out
    }

    pub fn tensor_count(&self) -> usize {
        let mut n = 0;
        self.for_each(|_, _| n += 1);
        n
    }

    pub fn entry_count(&self) -> usize {
        let mut n = 0;
        self.for_each(|_, m| n += m.data().len());
        n
    }
}

/// Per-instance token vectors loaded from a precomputed-embedding file.
///
/// File format: UTF-8, one line per token position,
/// `instance_id<TAB>position<TAB>d_e space-separated reals`. Positions must
/// cover `0..T` of the encoded sequence for every instance used.
pub struct EmbeddingStore {
    dim: usize,
    rows: std::collections::HashMap<String, Vec<(usize, Vec<f64>)>>,
}

impl EmbeddingStore {
    pub fn load(path: &std::path::Path, dim: usize) -> Result<EmbeddingStore, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut rows: std::collections::HashMap<String, Vec<(usize, Vec<f64>)>> =
            std::collections::HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fail = |msg: String| {
                ModelError::Embedding(format!("{}:{}: {msg}", path.display(), lineno + 1))
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(fail(format!("expected 3 tab-separated fields, found {}", fields.len())));
            }
            let position: usize =
                fields[1].parse().map_err(|_| fail(format!("bad position `{}`", fields[1])))?;
            let values: Result<Vec<f64>, _> =
                fields[2].split_whitespace().map(str::parse).collect();
            let values = values.map_err(|_| fail("non-numeric vector entry".into()))?;
            if values.len() != dim {
                return Err(fail(format!("vector has {} entries, expected {dim}", values.len())));
            }
            rows.entry(fields[0].to_string()).or_default().push((position, values));
        }
        Ok(EmbeddingStore { dim, rows })
    }

    /// The `T x d_e` matrix for one instance; every position in `0..t` must
    /// be present.
    pub fn matrix_for(&self, id: &str, t: usize) -> Result<Matrix, ModelError> {
        let entries = self
            .rows
            .get(id)
            .ok_or_else(|| ModelError::Embedding(format!("no vectors for instance `{id}`")))?;
        let mut m = Matrix::zeros(t, self.dim);
        let mut filled = vec![false; t];
        for (pos, values) in entries {
            if *pos < t {
                m.row_mut(*pos).copy_from_slice(values);
                filled[*pos] = true;
            }
        }
        if let Some(missing) = filled.iter().position(|&f| !f) {
            return Err(ModelError::Embedding(format!(
                "instance `{id}` is missing a vector for position {missing}"
            )));
        }
        Ok(m)
    }
}
