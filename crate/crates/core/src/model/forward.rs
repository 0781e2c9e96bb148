//! Forward pass of the classifier, built as a differentiation graph.
//!
//! Pipeline per instance: contextual embeddings from the lightweight encoder,
//! graph attention over the syntactic and semantic adjacencies, per-branch
//! cross-attention (queries from the context, keys/values from the branch),
//! column concatenation, transformer refinement with a 2d->d input
//! projection, aspect-focused graph attention pooled over the aspect span,
//! and a highway gate over `[mean pooled context || aspect vector]`. Ablation
//! flags route around whole stages; their parameters do not exist in ablated
//! models.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::EncodedInstance;
use crate::graphs::{build_semantic, AdjacencyMatrix, GraphConfig};
use crate::numkit::{Matrix, Tape, Var};

use super::{CrossParams, GatParams, HighwayParams, ModelConfig, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Token vectors feeding the context encoder: either the trainable embedding
/// table or a precomputed `T x d_e` matrix for this instance.
pub enum ContextSource<'a> {
    Trainable,
    Precomputed(&'a Matrix),
}

/// Adjacencies prepared for one instance. The semantic graph is normally
/// rebuilt inside the forward pass from the current contextual embeddings;
/// `semantic_override` short-circuits that (fixed-adjacency ablation, tests).
pub struct AdjacencyInputs<'a> {
    pub syntactic: &'a AdjacencyMatrix,
    pub aspect: &'a AdjacencyMatrix,
    pub semantic_override: Option<&'a AdjacencyMatrix>,
}

/// Values captured along the forward pass, for inspection and export.
pub struct ForwardTrace {
    pub h: Matrix,
    pub encoder_attention: Option<Matrix>,
    /// Semantic adjacency actually attended over (absent when the branch is
    /// ablated).
    pub semantic: Option<AdjacencyMatrix>,
    pub h_syntax: Matrix,
    pub h_semantic: Matrix,
    pub alpha_syntax: Vec<Matrix>,
    pub alpha_semantic: Vec<Matrix>,
    pub cross_syntax: Option<Matrix>,
    pub cross_semantic: Option<Matrix>,
    pub c_syn: Option<Matrix>,
    pub c_sem: Option<Matrix>,
    pub h_cat: Matrix,
    pub refine_attentions: Vec<Matrix>,
    pub h_refined: Matrix,
    pub h_aspect: Option<Matrix>,
    pub alpha_aspect: Option<Matrix>,
    pub z_aspect: Matrix,
    pub h_bar: Matrix,
    pub u: Matrix,
    pub z_h: Matrix,
    pub logits: Matrix,
}

/// A completed forward pass: the tape (ready for `backward`), the logits
/// node, captured intermediates, and the parameter registration needed to
/// read gradients back out by name.
pub struct ForwardRun {
    pub tape: Tape,
    pub logits: Var,
    pub trace: ForwardTrace,
    named_params: Vec<(String, Var)>,
}

impl ForwardRun {
    /// Gradients by tensor name, in the stable parameter order. Call after
    /// `tape.backward`.
    pub fn gradients(&self) -> Vec<(String, Matrix)> {
        self.named_params
            .iter()
            .map(|(name, var)| (name.clone(), self.tape.grad(*var).clone()))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Parameter registration
// ---------------------------------------------------------------------------

/// Graph-attention parameters registered on a tape.
pub struct GatVars {
    pub w: Var,
    pub attn_self: Var,
    pub attn_neigh: Var,
}

impl GatVars {
    pub fn register(tape: &mut Tape, p: &GatParams) -> GatVars {
        GatVars {
            w: tape.param(p.w.clone()),
            attn_self: tape.param(p.attn_self.clone()),
            attn_neigh: tape.param(p.attn_neigh.clone()),
        }
    }
}

/// Cross-attention projections registered on a tape.
pub struct CrossVars {
    pub wq: Var,
    pub wk: Var,
    pub wv: Var,
}

impl CrossVars {
    pub fn register(tape: &mut Tape, p: &CrossParams) -> CrossVars {
        CrossVars {
            wq: tape.param(p.wq.clone()),
            wk: tape.param(p.wk.clone()),
            wv: tape.param(p.wv.clone()),
        }
    }
}

pub(crate) struct EncoderVars {
    pub wq: Var,
    pub wk: Var,
    pub wv: Var,
    pub wo: Var,
    pub ff1_w: Var,
    pub ff1_b: Var,
    pub ff2_w: Var,
    pub ff2_b: Var,
    pub ln1_gamma: Var,
    pub ln1_beta: Var,
    pub ln2_gamma: Var,
    pub ln2_beta: Var,
}

pub(crate) struct BlockVars {
    pub wq: Var,
    pub wk: Var,
    pub wv: Var,
    pub wo: Var,
    pub ff1_w: Var,
    pub ff1_b: Var,
    pub ff2_w: Var,
    pub ff2_b: Var,
    pub ln1_gamma: Var,
    pub ln1_beta: Var,
    pub ln2_gamma: Var,
    pub ln2_beta: Var,
}

pub(crate) struct RefineVars {
    pub in_proj_w: Var,
    pub in_proj_b: Var,
    pub blocks: Vec<BlockVars>,
}

/// Highway gate parameters registered on a tape.
pub struct HighwayVars {
    pub gate_w: Var,
    pub gate_b: Var,
    pub transform_w: Var,
    pub transform_b: Var,
}

impl HighwayVars {
    pub fn register(tape: &mut Tape, p: &HighwayParams) -> HighwayVars {
        HighwayVars {
            gate_w: tape.param(p.gate_w.clone()),
            gate_b: tape.param(p.gate_b.clone()),
            transform_w: tape.param(p.transform_w.clone()),
            transform_b: tape.param(p.transform_b.clone()),
        }
    }
}

pub(crate) struct ParamVars {
    pub embedding: Option<Var>,
    pub encoder: Option<EncoderVars>,
    pub proj_w: Var,
    pub proj_b: Var,
    pub gat_syntax: Option<Vec<GatVars>>,
    pub gat_semantic: Option<Vec<GatVars>>,
    pub cross_syntax: Option<CrossVars>,
    pub cross_semantic: Option<CrossVars>,
    pub refine: RefineVars,
    pub gat_aspect: Option<GatVars>,
    pub highway: Option<HighwayVars>,
    pub classifier_w: Var,
    pub classifier_b: Var,
    pub named: Vec<(String, Var)>,
}

impl ParamVars {
    pub(crate) fn register(tape: &mut Tape, params: &ModelParams) -> ParamVars {
        let mut named = Vec::new();
        let mut reg = |tape: &mut Tape, name: String, m: &Matrix| -> Var {
            let v = tape.param(m.clone());
            named.push((name, v));
            v
        };
        let gat = |tape: &mut Tape,
                   named: &mut Vec<(String, Var)>,
                   prefix: String,
                   p: &GatParams|
         -> GatVars {
            let mut reg = |tape: &mut Tape, name: String, m: &Matrix| -> Var {
                let v = tape.param(m.clone());
                named.push((name, v));
                v
            };
            GatVars {
                w: reg(tape, format!("{prefix}.w"), &p.w),
                attn_self: reg(tape, format!("{prefix}.attn_self"), &p.attn_self),
                attn_neigh: reg(tape, format!("{prefix}.attn_neigh"), &p.attn_neigh),
            }
        };

        let embedding = params.embedding.as_ref().map(|e| reg(tape, "embedding".into(), e));
        let encoder = params.encoder.as_ref().map(|e| EncoderVars {
            wq: reg(tape, "encoder.wq".into(), &e.wq),
            wk: reg(tape, "encoder.wk".into(), &e.wk),
            wv: reg(tape, "encoder.wv".into(), &e.wv),
            wo: reg(tape, "encoder.wo".into(), &e.wo),
            ff1_w: reg(tape, "encoder.ff1_w".into(), &e.ff1_w),
            ff1_b: reg(tape, "encoder.ff1_b".into(), &e.ff1_b),
            ff2_w: reg(tape, "encoder.ff2_w".into(), &e.ff2_w),
            ff2_b: reg(tape, "encoder.ff2_b".into(), &e.ff2_b),
            ln1_gamma: reg(tape, "encoder.ln1_gamma".into(), &e.ln1_gamma),
            ln1_beta: reg(tape, "encoder.ln1_beta".into(), &e.ln1_beta),
            ln2_gamma: reg(tape, "encoder.ln2_gamma".into(), &e.ln2_gamma),
            ln2_beta: reg(tape, "encoder.ln2_beta".into(), &e.ln2_beta),
        });
        let proj_w = reg(tape, "proj.w".into(), &params.proj_w);
        let proj_b = reg(tape, "proj.b".into(), &params.proj_b);
        let gat_syntax = params.gat_syntax.as_ref().map(|stack| {
            stack
                .iter()
                .enumerate()
                .map(|(i, p)| gat(tape, &mut named, format!("gat_syntax.{i}"), p))
                .collect()
        });
        let gat_semantic = params.gat_semantic.as_ref().map(|stack| {
            stack
                .iter()
                .enumerate()
                .map(|(i, p)| gat(tape, &mut named, format!("gat_semantic.{i}"), p))
                .collect()
        });
        let cross = |tape: &mut Tape,
                     named: &mut Vec<(String, Var)>,
                     prefix: &str,
                     p: &CrossParams|
         -> CrossVars {
            let mut reg = |tape: &mut Tape, name: String, m: &Matrix| -> Var {
                let v = tape.param(m.clone());
                named.push((name, v));
                v
            };
            CrossVars {
                wq: reg(tape, format!("{prefix}.wq"), &p.wq),
                wk: reg(tape, format!("{prefix}.wk"), &p.wk),
                wv: reg(tape, format!("{prefix}.wv"), &p.wv),
            }
        };
        let cross_syntax =
            params.cross_syntax.as_ref().map(|p| cross(tape, &mut named, "cross_syntax", p));
        let cross_semantic =
            params.cross_semantic.as_ref().map(|p| cross(tape, &mut named, "cross_semantic", p));
        let mut reg = |tape: &mut Tape, name: String, m: &Matrix| -> Var {
            let v = tape.param(m.clone());
            named.push((name, v));
            v
        };
        let refine = RefineVars {
            in_proj_w: reg(tape, "refine.in_proj.w".into(), &params.refine.in_proj_w),
            in_proj_b: reg(tape, "refine.in_proj.b".into(), &params.refine.in_proj_b),
            blocks: params
                .refine
                .blocks
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let p = format!("refine.block{i}");
                    BlockVars {
                        wq: reg(tape, format!("{p}.wq"), &b.wq),
                        wk: reg(tape, format!("{p}.wk"), &b.wk),
                        wv: reg(tape, format!("{p}.wv"), &b.wv),
                        wo: reg(tape, format!("{p}.wo"), &b.wo),
                        ff1_w: reg(tape, format!("{p}.ff1_w"), &b.ff1_w),
                        ff1_b: reg(tape, format!("{p}.ff1_b"), &b.ff1_b),
                        ff2_w: reg(tape, format!("{p}.ff2_w"), &b.ff2_w),
                        ff2_b: reg(tape, format!("{p}.ff2_b"), &b.ff2_b),
                        ln1_gamma: reg(tape, format!("{p}.ln1_gamma"), &b.ln1_gamma),
                        ln1_beta: reg(tape, format!("{p}.ln1_beta"), &b.ln1_beta),
                        ln2_gamma: reg(tape, format!("{p}.ln2_gamma"), &b.ln2_gamma),
                        ln2_beta: reg(tape, format!("{p}.ln2_beta"), &b.ln2_beta),
                    }
                })
                .collect(),
        };
        let gat_aspect =
            params.gat_aspect.as_ref().map(|p| gat(tape, &mut named, "gat_aspect".into(), p));
        let mut reg = |tape: &mut Tape, name: String, m: &Matrix| -> Var {
            let v = tape.param(m.clone());
            named.push((name, v));
            v
        };
        let highway = params.highway.as_ref().map(|h| HighwayVars {
            gate_w: reg(tape, "highway.gate_w".into(), &h.gate_w),
            gate_b: reg(tape, "highway.gate_b".into(), &h.gate_b),
            transform_w: reg(tape, "highway.transform_w".into(), &h.transform_w),
            transform_b: reg(tape, "highway.transform_b".into(), &h.transform_b),
        });
        let classifier_w = reg(tape, "classifier.w".into(), &params.classifier.w);
        let classifier_b = reg(tape, "classifier.b".into(), &params.classifier.b);
        ParamVars {
            embedding,
            encoder,
            proj_w,
            proj_b,
            gat_syntax,
            gat_semantic,
            cross_syntax,
            cross_semantic,
            refine,
            gat_aspect,
            highway,
            classifier_w,
            classifier_b,
            named,
        }
    }
}

// ---------------------------------------------------------------------------
// Masks and small helpers
// ---------------------------------------------------------------------------

/// `T x cols` matrix with all-ones rows at real tokens and zero rows at padding.
fn row_mask(encoded: &EncodedInstance, cols: usize) -> Matrix {
    let mut m = Matrix::zeros(encoded.len(), cols);
    for (i, &real) in encoded.pad_mask.iter().enumerate() {
        if real {
            m.row_mut(i).fill(1.0);
        }
    }
    m
}

/// `T x T` mask that is 1 exactly where both positions are real tokens.
fn pair_mask(encoded: &EncodedInstance) -> Matrix {
    let t = encoded.len();
    let mut m = Matrix::zeros(t, t);
    for i in 0..t {
        if !encoded.pad_mask[i] {
            continue;
        }
        for j in 0..t {
            if encoded.pad_mask[j] {
                m.set(i, j, 1.0);
            }
        }
    }
    m
}

/// Sinusoidal position signal, `T x dim`.
fn positional_signal(t: usize, dim: usize) -> Matrix {
    let mut m = Matrix::zeros(t, dim);
    for pos in 0..t {
        for j in 0..dim {
            let exponent = 2.0 * (j / 2) as f64 / dim as f64;
            let angle = pos as f64 / 10_000f64.powf(exponent);
            m.set(pos, j, if j % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    m
}

/// Mean over real-token rows as a differentiable 1 x T selector product.
fn masked_mean_rows(tape: &mut Tape, x: Var, encoded: &EncodedInstance) -> Var {
    let n_real = encoded.real_len();
    assert!(n_real > 0, "masked mean over a fully padded sequence");
    let mut sel = Matrix::zeros(1, encoded.len());
    for (i, &real) in encoded.pad_mask.iter().enumerate() {
        if real {
            sel.set(0, i, 1.0 / n_real as f64);
        }
    }
    let sel = tape.constant(sel);
    tape.matmul(sel, x)
}

/// Inverted-scale dropout as multiplication by a 0/(1/keep) mask. Identity in
/// eval mode or at rate 0.
fn dropout(tape: &mut Tape, x: Var, rate: f64, mode: Mode, rng: &mut Option<&mut ChaCha8Rng>) -> Var {
    if mode == Mode::Eval || rate == 0.0 {
        return x;
    }
    let rng = rng.as_mut().expect("training-mode dropout needs an RNG");
    let keep = 1.0 - rate;
    let shape = tape.value(x).shape();
    let mut mask = Matrix::zeros(shape.0, shape.1);
    for v in mask.data_mut() {
        if rng.random_range(0.0..1.0) < keep {
            *v = 1.0 / keep;
        }
    }
    let mask = tape.constant(mask);
    tape.mul_elem(x, mask)
}

fn linear(tape: &mut Tape, x: Var, w: Var, b: Var) -> Var {
    let xw = tape.matmul(x, w);
    tape.add_row_vec(xw, b)
}

// ---------------------------------------------------------------------------
// Model stages
// ---------------------------------------------------------------------------

/// Contextual embeddings `H` (T x d). Trainable mode: embedding lookup +
/// sinusoidal position signal + one masked self-attention block with
/// feed-forward, projected to `d`. Precomputed mode: the provided vectors
/// projected to `d`. Padding rows are zero either way. Returns the encoder
/// attention weights when the attention block ran.
pub(crate) fn context_encode(
    tape: &mut Tape,
    source: &ContextSource,
    params: &ParamVars,
    encoded: &EncodedInstance,
    config: &ModelConfig,
) -> (Var, Option<Var>) {
    let de = config.embed_dim;
    let mask_de = row_mask(encoded, de);
    let (x, attn) = match source {
        ContextSource::Trainable => {
            let table = params.embedding.expect("trainable mode requires an embedding table");
            let enc = params.encoder.as_ref().expect("trainable mode requires encoder params");
            let emb = tape.embed_rows(table, &encoded.ids);
            let pos = tape.constant(positional_signal(encoded.len(), de));
            let x0 = tape.add(emb, pos);
            let mask_var = tape.constant(mask_de.clone());
            let x0 = tape.mul_elem(x0, mask_var);

            let q = tape.matmul(x0, enc.wq);
            let k = tape.matmul(x0, enc.wk);
            let v = tape.matmul(x0, enc.wv);
            let kt = tape.transpose(k);
            let scores = tape.matmul(q, kt);
            let scores = tape.scale(scores, 1.0 / (de as f64).sqrt());
            let attn = tape.masked_softmax_rows(scores, pair_mask(encoded));
            let ctx = tape.matmul(attn, v);
            let ctx = tape.matmul(ctx, enc.wo);
            let sum1 = tape.add(x0, ctx);
            let x1 = tape.layer_norm(sum1, enc.ln1_gamma, enc.ln1_beta, 1e-5);

            let ff = linear(tape, x1, enc.ff1_w, enc.ff1_b);
            let ff = tape.relu(ff);
            let ff = linear(tape, ff, enc.ff2_w, enc.ff2_b);
            let sum2 = tape.add(x1, ff);
            let x2 = tape.layer_norm(sum2, enc.ln2_gamma, enc.ln2_beta, 1e-5);
            let mask_var = tape.constant(mask_de);
            (tape.mul_elem(x2, mask_var), Some(attn))
        }
        ContextSource::Precomputed(vectors) => {
            assert_eq!(
                vectors.shape(),
                (encoded.len(), de),
                "precomputed vectors must be T x embed_dim"
            );
            let x = tape.constant((*vectors).clone());
            let mask_var = tape.constant(mask_de);
            (tape.mul_elem(x, mask_var), None)
        }
    };
    let h = linear(tape, x, params.proj_w, params.proj_b);
    let mask_d = tape.constant(row_mask(encoded, config.hidden_dim));
    (tape.mul_elem(h, mask_d), attn)
}

/// One graph-attention layer: attention scores
/// `leaky_relu(a_self . Wh_i + a_neigh . Wh_j)` softmax-normalized over the
/// neighborhood given by `adj`, then ReLU-activated aggregation of `Wh_j`.
/// Rows with no neighbors (padding) come out zero with zero attention rows.
/// Returns `(updated features, attention weights)`.
pub fn gat_layer(
    tape: &mut Tape,
    h: Var,
    adj: &AdjacencyMatrix,
    p: &GatVars,
    slope: f64,
) -> (Var, Var) {
    assert_eq!(
        adj.size(),
        tape.value(h).rows(),
        "adjacency size {} does not match feature rows {}",
        adj.size(),
        tape.value(h).rows()
    );
    let hw = tape.matmul(h, p.w);
    let f_self = tape.matmul(hw, p.attn_self);
    let f_neigh = tape.matmul(hw, p.attn_neigh);
    let scores = tape.add_outer(f_self, f_neigh);
    let scores = tape.leaky_relu(scores, slope);
    let alpha = tape.masked_softmax_rows(scores, adj.neighborhood_mask());
    let agg = tape.matmul(alpha, hw);
    (tape.relu(agg), alpha)
}

/// Scaled dot-product cross-attention: queries from `h`, keys and values from
/// `h_graph`, masked to real-token pairs. Returns `(output, attention)`.
pub fn cross_attention(
    tape: &mut Tape,
    h: Var,
    h_graph: Var,
    p: &CrossVars,
    mask: &Matrix,
) -> (Var, Var) {
    assert_eq!(
        tape.value(h).rows(),
        tape.value(h_graph).rows(),
        "cross_attention row mismatch: {} vs {}",
        tape.value(h).rows(),
        tape.value(h_graph).rows()
    );
    let d = tape.value(p.wq).cols();
    let q = tape.matmul(h, p.wq);
    let k = tape.matmul(h_graph, p.wk);
    let v = tape.matmul(h_graph, p.wv);
    let kt = tape.transpose(k);
    let scores = tape.matmul(q, kt);
    let scores = tape.scale(scores, 1.0 / (d as f64).sqrt());
    let attn = tape.masked_softmax_rows(scores, mask.clone());
    (tape.matmul(attn, v), attn)
}

/// Transformer refinement over the fused representation: a learned 2d->d
/// input projection, then `blocks` of masked multi-head self-attention and
/// feed-forward with residuals and layer norm. With no blocks this is just
/// the projection. Returns the refined features plus per-layer, per-head
/// attention weights.
pub(crate) fn refine(
    tape: &mut Tape,
    h_cat: Var,
    p: &RefineVars,
    blocks: &[BlockVars],
    heads: usize,
    encoded: &EncodedInstance,
) -> (Var, Vec<Var>) {
    let d = tape.value(p.in_proj_w).cols();
    assert_eq!(d % heads, 0, "hidden dim {d} not divisible by {heads} heads");
    let head_dim = d / heads;
    let mask_d = row_mask(encoded, d);
    let pmask = pair_mask(encoded);

    let mut x = linear(tape, h_cat, p.in_proj_w, p.in_proj_b);
    let mask_var = tape.constant(mask_d.clone());
    x = tape.mul_elem(x, mask_var);
    let mut attentions = Vec::new();

    for block in blocks {
        let q = tape.matmul(x, block.wq);
        let k = tape.matmul(x, block.wk);
        let v = tape.matmul(x, block.wv);
        let mut head_outputs = Vec::with_capacity(heads);
        for hidx in 0..heads {
            let qh = tape.slice_cols(q, hidx * head_dim, head_dim);
            let kh = tape.slice_cols(k, hidx * head_dim, head_dim);
            let vh = tape.slice_cols(v, hidx * head_dim, head_dim);
            let kt = tape.transpose(kh);
            let scores = tape.matmul(qh, kt);
            let scores = tape.scale(scores, 1.0 / (head_dim as f64).sqrt());
            let attn = tape.masked_softmax_rows(scores, pmask.clone());
            attentions.push(attn);
            head_outputs.push(tape.matmul(attn, vh));
        }
        let mut cat = head_outputs[0];
        for &ho in &head_outputs[1..] {
            cat = tape.concat_cols(cat, ho);
        }
        let proj = tape.matmul(cat, block.wo);
        let sum1 = tape.add(x, proj);
        let x1 = tape.layer_norm(sum1, block.ln1_gamma, block.ln1_beta, 1e-5);

        let ff = linear(tape, x1, block.ff1_w, block.ff1_b);
        let ff = tape.relu(ff);
        let ff = linear(tape, ff, block.ff2_w, block.ff2_b);
        let sum2 = tape.add(x1, ff);
        let x2 = tape.layer_norm(sum2, block.ln2_gamma, block.ln2_beta, 1e-5);
        let mask_var = tape.constant(mask_d.clone());
        x = tape.mul_elem(x2, mask_var);
    }
    (x, attentions)
}

/// Aspect-focused graph attention followed by mean pooling over the aspect
/// positions inside the sentence. Returns `(z_aspect, h_aspect, alpha)`.
pub fn aspect_extract(
    tape: &mut Tape,
    h_refined: Var,
    adj_aspect: &AdjacencyMatrix,
    p: &GatVars,
    slope: f64,
    encoded: &EncodedInstance,
) -> (Var, Var, Var) {
    let span = encoded.aspect_in_sentence.clone();
    assert!(!span.is_empty(), "aspect_extract on an empty aspect span");
    let (h_aspect, alpha) = gat_layer(tape, h_refined, adj_aspect, p, slope);
    let mut sel = Matrix::zeros(1, encoded.len());
    let m = span.len() as f64;
    for pos in span {
        sel.set(0, pos, 1.0 / m);
    }
    let sel = tape.constant(sel);
    let z = tape.matmul(sel, h_aspect);
    (z, h_aspect, alpha)
}

/// Highway gate over `u = [h_bar || z_aspect]`:
/// `z = sigmoid(uW_T + b_T) .* relu(uW_H + b_H) + (1 - sigmoid(..)) .* u`.
/// Returns `(u, z_h)`.
pub fn highway_fuse(
    tape: &mut Tape,
    h_bar: Var,
    z_aspect: Var,
    p: &HighwayVars,
) -> (Var, Var) {
    let u = tape.concat_cols(h_bar, z_aspect);
    let gate_pre = linear(tape, u, p.gate_w, p.gate_b);
    let gate = tape.sigmoid(gate_pre);
    let cand = linear(tape, u, p.transform_w, p.transform_b);
    let cand = tape.relu(cand);
    let ones = tape.constant(Matrix::filled(1, tape_cols(tape, u), 1.0));
    let carry = tape.sub(ones, gate);
    let a = tape.mul_elem(gate, cand);
    let b = tape.mul_elem(carry, u);
    (u, tape.add(a, b))
}

fn tape_cols(tape: &Tape, v: Var) -> usize {
    tape.value(v).cols()
}

/// Class index with the highest logit; ties break toward the lowest index.
pub fn predict(logits: &Matrix) -> usize {
    assert_eq!(logits.rows(), 1, "predict expects 1xC logits");
    let row = logits.row(0);
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Run the whole network for one encoded instance.
///
/// Ablation routing: a skipped graph branch contributes `H` itself; without
/// cross-attention the branches concatenate directly; without refinement only
/// the input projection runs; without the aspect stage `z_aspect = h_bar`;
/// without the highway gate `z_H = u`. Dropout is active only in training
/// mode (`rng` required then).
pub fn forward(
    params: &ModelParams,
    config: &ModelConfig,
    graph_cfg: &GraphConfig,
    encoded: &EncodedInstance,
    adj: &AdjacencyInputs,
    source: &ContextSource,
    mode: Mode,
    mut rng: Option<&mut ChaCha8Rng>,
) -> ForwardRun {
    let flags = &config.flags;
    let mut tape = Tape::new();
    let pv = ParamVars::register(&mut tape, params);
    let pmask = pair_mask(encoded);

    let (h_clean, enc_attn) = context_encode(&mut tape, source, &pv, encoded, config);
    // Semantic graph from the pre-dropout embeddings of this very pass.
    let semantic_adj: Option<AdjacencyMatrix> = if flags.skip_semantic() {
        None
    } else if let Some(ov) = adj.semantic_override {
        Some(ov.clone())
    } else {
        let t = encoded.len();
        let top_k = graph_cfg.semantic_top_k.min(t.saturating_sub(1)).max(1);
        Some(
            build_semantic(tape.value(h_clean), encoded, top_k, graph_cfg.semantic_threshold)
                .expect("semantic graph construction with validated config"),
        )
    };

    let h = dropout(&mut tape, h_clean, config.dropout_rate, mode, &mut rng);

    let run_branch = |tape: &mut Tape,
                      stack: &Option<Vec<GatVars>>,
                      adj: Option<&AdjacencyMatrix>|
     -> (Var, Vec<Var>) {
        match (stack, adj) {
            (Some(stack), Some(adj)) => {
                let mut x = h;
                let mut alphas = Vec::new();
                for gat in stack {
                    let (next, alpha) = gat_layer(tape, x, adj, gat, config.leaky_slope);
                    alphas.push(alpha);
                    x = next;
                }
                (x, alphas)
            }
            _ => (h, Vec::new()),
        }
    };
    let syn_adj = (!flags.skip_syntax()).then_some(adj.syntactic);
    let (h_syntax, alpha_syn) = run_branch(&mut tape, &pv.gat_syntax, syn_adj);
    let (h_semantic, alpha_sem) = run_branch(&mut tape, &pv.gat_semantic, semantic_adj.as_ref());

    let (h_cat, c_syn, c_sem, cross_syn_attn, cross_sem_attn) = if flags.no_cross_attention {
        (tape.concat_cols(h_syntax, h_semantic), None, None, None, None)
    } else {
        let cs = pv.cross_syntax.as_ref().expect("cross-attention params present");
        let cm = pv.cross_semantic.as_ref().expect("cross-attention params present");
        let (c_syn, a_syn) = cross_attention(&mut tape, h, h_syntax, cs, &pmask);
        let (c_sem, a_sem) = cross_attention(&mut tape, h, h_semantic, cm, &pmask);
        (tape.concat_cols(c_syn, c_sem), Some(c_syn), Some(c_sem), Some(a_syn), Some(a_sem))
    };

    let refine_blocks: &[BlockVars] =
        if flags.no_transformer_refine { &[] } else { &pv.refine.blocks };
    let (h_refined_clean, refine_attns) =
        refine(&mut tape, h_cat, &pv.refine, refine_blocks, config.refine_heads, encoded);
    let h_refined = dropout(&mut tape, h_refined_clean, config.dropout_rate, mode, &mut rng);

    let h_bar = masked_mean_rows(&mut tape, h_refined, encoded);

    let (z_aspect, h_aspect, alpha_aspect) = if flags.no_aspect_embedding {
        (h_bar, None, None)
    } else {
        let gat = pv.gat_aspect.as_ref().expect("aspect params present");
        let (z, ha, alpha) =
            aspect_extract(&mut tape, h_refined, adj.aspect, gat, config.leaky_slope, encoded);
        (z, Some(ha), Some(alpha))
    };

    let (u, z_h) = if flags.no_highway_gate {
        let u = tape.concat_cols(h_bar, z_aspect);
        (u, u)
    } else {
        let hw = pv.highway.as_ref().expect("highway params present");
        highway_fuse(&mut tape, h_bar, z_aspect, hw)
    };

    let logits = linear(&mut tape, z_h, pv.classifier_w, pv.classifier_b);

    let value = |tape: &Tape, v: Var| tape.value(v).clone();
    let trace = ForwardTrace {
        h: value(&tape, h),
        encoder_attention: enc_attn.map(|v| value(&tape, v)),
        semantic: semantic_adj,
        h_syntax: value(&tape, h_syntax),
        h_semantic: value(&tape, h_semantic),
        alpha_syntax: alpha_syn.iter().map(|&v| value(&tape, v)).collect(),
        alpha_semantic: alpha_sem.iter().map(|&v| value(&tape, v)).collect(),
        cross_syntax: cross_syn_attn.map(|v| value(&tape, v)),
        cross_semantic: cross_sem_attn.map(|v| value(&tape, v)),
        c_syn: c_syn.map(|v| value(&tape, v)),
        c_sem: c_sem.map(|v| value(&tape, v)),
        h_cat: value(&tape, h_cat),
        refine_attentions: refine_attns.iter().map(|&v| value(&tape, v)).collect(),
        h_refined: value(&tape, h_refined),
        h_aspect: h_aspect.map(|v| value(&tape, v)),
        alpha_aspect: alpha_aspect.map(|v| value(&tape, v)),
        z_aspect: value(&tape, z_aspect),
        h_bar: value(&tape, h_bar),
        u: value(&tape, u),
        z_h: value(&tape, z_h),
        logits: value(&tape, logits),
    };
    ForwardRun { tape, logits, trace, named_params: pv.named }
}
