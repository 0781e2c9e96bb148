//! Weighted cross-entropy training with AdamW, per-epoch validation, early
//! stopping on validation micro-F1, and the ablation harness.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    class_weights, encode, load_tabular, CorpusError, DatasetSplit, EncodedInstance,
    LoadDiagnostic, Polarity, SplitName, Vocab, NUM_CLASSES,
};
use crate::graphs::{
    build_aspect, build_syntactic, AdjacencyMatrix, GraphConfig, GraphError, GraphKind, Lexicon,
    SyntaxRuleSet,
};
use crate::model::{
    forward, predict, AdjacencyInputs, ContextSource, EmbeddingSource, EmbeddingStore,
    ModelConfig, ModelError, ModelParams, Mode,
};
use crate::numkit::{Matrix, Tape, Var};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("train config: {0}")]
    Config(String),
    #[error("non-finite loss at epoch {epoch}, instance `{instance}`")]
    NonFiniteLoss { epoch: usize, instance: String },
    #[error("empty {0} split")]
    EmptySplit(SplitName),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    AdamW,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeighting {
    None,
    Weighted,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub weight_decay: f64,
    pub early_stop_patience: usize,
    pub seed: u64,
    pub max_length: usize,
    pub class_weighting: ClassWeighting,
    /// Global-norm gradient clip; `null` disables clipping.
    pub grad_clip_norm: Option<f64>,
    pub vocab_min_freq: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            learning_rate: 2e-5,
            batch_size: 1,
            optimizer: Optimizer::AdamW,
            weight_decay: 1e-2,
            early_stop_patience: 5,
            seed: 0,
            max_length: 128,
            class_weighting: ClassWeighting::Weighted,
            grad_clip_norm: Some(5.0),
            vocab_min_freq: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 || self.batch_size == 0 || self.max_length < 5 {
            return Err(TrainError::Config(
                "epochs, batch_size must be positive and max_length >= 5".into(),
            ));
        }
        if self.batch_size != 1 {
            return Err(TrainError::Config(
                "only batch_size 1 is supported (per-instance updates)".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config("learning_rate must be positive".into()));
        }
        if self.weight_decay < 0.0 || self.vocab_min_freq == 0 {
            return Err(TrainError::Config(
                "weight_decay must be >= 0 and vocab_min_freq >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Full run configuration: the JSON config file mirrors this structure.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub graph: GraphConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig, TrainError> {
        serde_json::from_str(text).map_err(|e| TrainError::Config(format!("bad config JSON: {e}")))
    }
}

// ---------------------------------------------------------------------------
// Loss and optimizer
// ---------------------------------------------------------------------------

/// Weighted cross entropy `-w_label * log softmax(logits)[label]` as a tape
/// node (stable log-sum-exp form).
pub fn cross_entropy_loss(tape: &mut Tape, logits: Var, label: usize, weight: f64) -> Var {
    tape.cross_entropy(logits, label, weight)
}

struct Slot {
    m: Matrix,
    v: Matrix,
}

/// Adam/AdamW with bias correction. AdamW applies decoupled weight decay
/// (`p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)`); plain Adam folds the
/// decay into the gradient as a classical L2 term.
pub struct AdamW {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub decoupled: bool,
    step: u64,
    slots: BTreeMap<String, Slot>,
}

impl AdamW {
    pub fn new(config: &TrainConfig) -> AdamW {
        AdamW {
            learning_rate: config.learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: config.weight_decay,
            decoupled: config.optimizer == Optimizer::AdamW,
            step: 0,
            slots: BTreeMap::new(),
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &[(String, Matrix)]) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let grad_map: BTreeMap<&str, &Matrix> =
            grads.iter().map(|(n, g)| (n.as_str(), g)).collect();
        params.for_each_mut(|name, p| {
            let Some(grad) = grad_map.get(name) else {
                panic!("no gradient recorded for parameter `{name}`");
            };
            let slot = self.slots.entry(name.to_string()).or_insert_with(|| Slot {
                m: Matrix::zeros(p.rows(), p.cols()),
                v: Matrix::zeros(p.rows(), p.cols()),
            });
            for e in 0..p.data().len() {
                let mut g = grad.data()[e];
                if !self.decoupled {
                    g += self.weight_decay * p.data()[e];
                }
                let m = self.beta1 * slot.m.data()[e] + (1.0 - self.beta1) * g;
                let v = self.beta2 * slot.v.data()[e] + (1.0 - self.beta2) * g * g;
                slot.m.data_mut()[e] = m;
                slot.v.data_mut()[e] = v;
                let m_hat = m / bc1;
                let v_hat = v / bc2;
                let mut update = m_hat / (v_hat.sqrt() + self.eps);
                if self.decoupled {
                    update += self.weight_decay * p.data()[e];
                }
                p.data_mut()[e] -= self.learning_rate * update;
            }
        });
    }
}

/// Scale all gradients so their joint L2 norm is at most `max_norm`.
pub fn clip_global_norm(grads: &mut [(String, Matrix)], max_norm: f64) -> f64 {
    let norm: f64 = grads
        .iter()
        .map(|(_, g)| g.data().iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let factor = max_norm / norm;
        for (_, g) in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= factor;
            }
        }
    }
    norm
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub total: usize,
    pub accuracy: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    /// `confusion[true][predicted]`, classes indexed by [`Polarity::index`].
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
}

/// Metrics from a confusion matrix. Micro-F1 is computed from pooled
/// TP/FP/FN over classes (not shortcut through accuracy); macro-F1 is the
/// unweighted mean of per-class F1 with empty classes scoring 0.
pub fn metrics_from_confusion(confusion: [[usize; NUM_CLASSES]; NUM_CLASSES]) -> EvalMetrics {
    let total: usize = confusion.iter().flatten().sum();
    let mut tp_pool = 0usize;
    let mut fp_pool = 0usize;
    let mut fn_pool = 0usize;
    let mut macro_sum = 0.0;
    for c in 0..NUM_CLASSES {
        let tp = confusion[c][c];
        let fp: usize = (0..NUM_CLASSES).filter(|&r| r != c).map(|r| confusion[r][c]).sum();
        let fndef: usize = (0..NUM_CLASSES).filter(|&p| p != c).map(|p| confusion[c][p]).sum();
        tp_pool += tp;
        fp_pool += fp;
        fn_pool += fndef;
        let denom = 2 * tp + fp + fndef;
        macro_sum += if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 };
    }
    let accuracy = if total == 0 { 0.0 } else { tp_pool as f64 / total as f64 };
    let micro_denom = 2 * tp_pool + fp_pool + fn_pool;
    let micro_f1 = if micro_denom == 0 { 0.0 } else { 2.0 * tp_pool as f64 / micro_denom as f64 };
    EvalMetrics { total, accuracy, micro_f1, macro_f1: macro_sum / NUM_CLASSES as f64, confusion }
}

// ---------------------------------------------------------------------------
// Instance preparation
// ---------------------------------------------------------------------------

/// Adjacencies prepared per instance according to the ablation flags.
pub struct InstanceGraphs {
    pub syntactic: AdjacencyMatrix,
    pub aspect: AdjacencyMatrix,
    /// Set under `fixed_adjacency`: one content-independent graph replaces
    /// the per-pass semantic similarity graph.
    pub semantic_fixed: Option<AdjacencyMatrix>,
}

pub struct PreparedInstance {
    pub encoded: EncodedInstance,
    pub graphs: InstanceGraphs,
}

/// Position-window adjacency that ignores token content entirely.
pub fn fixed_window_adjacency(
    encoded: &EncodedInstance,
    radius: usize,
    kind: GraphKind,
) -> AdjacencyMatrix {
    let rules = SyntaxRuleSet {
        window_radius: radius.max(1),
        link_rules: vec![],
        lexicon: Lexicon { words: vec![], suffixes: vec![] },
    };
    let mut adj = build_syntactic(encoded, &encoded.sentence_tokens, &rules);
    adj.kind = kind;
    adj
}

pub fn build_instance_graphs(
    encoded: &EncodedInstance,
    rules: &SyntaxRuleSet,
    graph_cfg: &GraphConfig,
    config: &ModelConfig,
) -> InstanceGraphs {
    let aspect = build_aspect(encoded, graph_cfg.aspect_radius);
    if config.flags.fixed_adjacency {
        InstanceGraphs {
            syntactic: fixed_window_adjacency(encoded, graph_cfg.window_radius, GraphKind::Syntactic),
            aspect,
            semantic_fixed: Some(fixed_window_adjacency(
                encoded,
                graph_cfg.window_radius,
                GraphKind::Semantic,
            )),
        }
    } else {
        InstanceGraphs {
            syntactic: build_syntactic(encoded, &encoded.sentence_tokens, rules),
            aspect,
            semantic_fixed: None,
        }
    }
}

pub fn prepare_split(
    split: &DatasetSplit,
    vocab: &Vocab,
    max_length: usize,
    rules: &SyntaxRuleSet,
    graph_cfg: &GraphConfig,
    config: &ModelConfig,
) -> Result<Vec<PreparedInstance>, TrainError> {
    split
        .instances
        .iter()
        .map(|inst| {
            let encoded = encode(inst, vocab, max_length)?;
            let graphs = build_instance_graphs(&encoded, rules, graph_cfg, config);
            Ok(PreparedInstance { encoded, graphs })
        })
        .collect()
}

/// Source of context vectors for the whole run.
pub enum EmbeddingProvider {
    Trainable,
    Store(EmbeddingStore),
}

impl EmbeddingProvider {
    pub fn from_config(config: &ModelConfig) -> Result<EmbeddingProvider, TrainError> {
        match &config.embedding_source {
            EmbeddingSource::Trainable => Ok(EmbeddingProvider::Trainable),
            EmbeddingSource::PrecomputedFile { path } => Ok(EmbeddingProvider::Store(
                EmbeddingStore::load(path, config.embed_dim)?,
            )),
        }
    }

    fn matrix_for(&self, encoded: &EncodedInstance) -> Result<Option<Matrix>, TrainError> {
        match self {
            EmbeddingProvider::Trainable => Ok(None),
            EmbeddingProvider::Store(store) => {
                Ok(Some(store.matrix_for(&encoded.id, encoded.len())?))
            }
        }
    }
}

fn run_forward(
    params: &ModelParams,
    config: &ModelConfig,
    graph_cfg: &GraphConfig,
    prepared: &PreparedInstance,
    provider: &EmbeddingProvider,
    mode: Mode,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<crate::model::ForwardRun, TrainError> {
    let adj = AdjacencyInputs {
        syntactic: &prepared.graphs.syntactic,
        aspect: &prepared.graphs.aspect,
        semantic_override: prepared.graphs.semantic_fixed.as_ref(),
    };
    let precomputed = provider.matrix_for(&prepared.encoded)?;
    let source = match &precomputed {
        Some(m) => ContextSource::Precomputed(m),
        None => ContextSource::Trainable,
    };
    Ok(forward(params, config, graph_cfg, &prepared.encoded, &adj, &source, mode, rng))
}

/// Evaluate frozen parameters over prepared instances.
pub fn evaluate(
    params: &ModelParams,
    config: &ModelConfig,
    graph_cfg: &GraphConfig,
    prepared: &[PreparedInstance],
    provider: &EmbeddingProvider,
) -> Result<EvalMetrics, TrainError> {
    let mut confusion = [[0usize; NUM_CLASSES]; NUM_CLASSES];
    for p in prepared {
        let run = run_forward(params, config, graph_cfg, p, provider, Mode::Eval, None)?;
        let pred = predict(&run.trace.logits);
        confusion[p.encoded.label.index()][pred] += 1;
    }
    Ok(metrics_from_confusion(confusion))
}

// ---------------------------------------------------------------------------
// Early stopping
// ---------------------------------------------------------------------------

/// Keeps the best validation score; training stops once `patience` epochs
/// pass without a strict improvement. Ties keep the earlier epoch.
pub struct EarlyStopper {
    patience: usize,
    pub best_score: f64,
    pub best_epoch: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> EarlyStopper {
        EarlyStopper { patience, best_score: f64::NEG_INFINITY, best_epoch: 0 }
    }

    /// Observe the score of `epoch` (1-based). Returns `(improved, stop)`.
    pub fn observe(&mut self, epoch: usize, score: f64) -> (bool, bool) {
        let improved = score > self.best_score;
        if improved {
            self.best_score = score;
            self.best_epoch = epoch;
        }
        let stop = epoch - self.best_epoch >= self.patience;
        (improved, stop)
    }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub val_micro_f1: f64,
    pub val_macro_f1: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub epochs: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub test: EvalMetrics,
}

pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub params: ModelParams,
    /// Model config with the vocabulary size resolved.
    pub model_config: ModelConfig,
    pub vocab: Vocab,
    pub metrics: RunMetrics,
}

pub struct DatasetBundle {
    pub train: DatasetSplit,
    pub validation: DatasetSplit,
    pub test: DatasetSplit,
}

/// Load `train.tsv`, `validation.tsv`, and `test.tsv` from a directory.
/// Returns the bundle plus any per-row diagnostics.
pub fn load_dataset_dir(dir: &Path) -> Result<(DatasetBundle, Vec<String>), TrainError> {
    let mut diags = Vec::new();
    let mut load = |name: SplitName, file: &str| -> Result<DatasetSplit, TrainError> {
        let path: PathBuf = dir.join(file);
        let loaded = load_tabular(&path, name)?;
        for LoadDiagnostic { line, message } in &loaded.diagnostics {
            diags.push(format!("{}:{line}: {message}", path.display()));
        }
        Ok(loaded.split)
    };
    let bundle = DatasetBundle {
        train: load(SplitName::Train, "train.tsv")?,
        validation: load(SplitName::Validation, "validation.tsv")?,
        test: load(SplitName::Test, "test.tsv")?,
    };
    Ok((bundle, diags))
}

/// Train with seeded shuffling, per-instance updates, per-epoch validation,
/// and best-checkpoint selection by validation micro-F1.
pub fn train(run_cfg: &RunConfig, data: &DatasetBundle) -> Result<TrainOutcome, TrainError> {
    run_cfg.train.validate()?;
    for (name, split) in [
        (SplitName::Train, &data.train),
        (SplitName::Validation, &data.validation),
        (SplitName::Test, &data.test),
    ] {
        if split.instances.is_empty() {
            return Err(TrainError::EmptySplit(name));
        }
    }
    let tcfg = &run_cfg.train;
    let vocab = Vocab::build(&data.train, tcfg.vocab_min_freq)?;
    let mut model_config = run_cfg.model.clone();
    if model_config.vocab_size == 0 {
        model_config.vocab_size = vocab.len();
    } else if model_config.vocab_size != vocab.len() {
        return Err(TrainError::Config(format!(
            "config vocab_size {} does not match built vocabulary size {}",
            model_config.vocab_size,
            vocab.len()
        )));
    }
    model_config.validate()?;

    let weights = match tcfg.class_weighting {
        ClassWeighting::Weighted => {
            let labels: Vec<Polarity> = data.train.instances.iter().map(|i| i.polarity).collect();
            class_weights(&labels)?
        }
        ClassWeighting::None => [1.0; NUM_CLASSES],
    };

    let rules = SyntaxRuleSet { window_radius: run_cfg.graph.window_radius, ..Default::default() };
    let prep = |split: &DatasetSplit| {
        prepare_split(split, &vocab, tcfg.max_length, &rules, &run_cfg.graph, &model_config)
    };
    let train_set = prep(&data.train)?;
    let val_set = prep(&data.validation)?;
    let test_set = prep(&data.test)?;
    let provider = EmbeddingProvider::from_config(&model_config)?;

    let mut params = ModelParams::init(&model_config, tcfg.seed);
    let mut optimizer = AdamW::new(tcfg);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(tcfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(tcfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(2));

    let mut stopper = EarlyStopper::new(tcfg.early_stop_patience);
    let mut best_params = params.clone();
    let mut epochs = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=tcfg.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for &idx in &order {
            let p = &train_set[idx];
            let mut run = run_forward(
                &params,
                &model_config,
                &run_cfg.graph,
                p,
                &provider,
                Mode::Train,
                Some(&mut dropout_rng),
            )?;
            let label = p.encoded.label.index();
            let loss = cross_entropy_loss(&mut run.tape, run.logits, label, weights[label]);
            let loss_value = run.tape.value(loss).get(0, 0);
            if !loss_value.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, instance: p.encoded.id.clone() });
            }
            loss_sum += loss_value;
            run.tape.backward(loss);
            let mut grads = run.gradients();
            if let Some(max_norm) = tcfg.grad_clip_norm {
                clip_global_norm(&mut grads, max_norm);
            }
            optimizer.step(&mut params, &grads);
        }
        let val = evaluate(&params, &model_config, &run_cfg.graph, &val_set, &provider)?;
        epochs.push(EpochMetrics {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            val_accuracy: val.accuracy,
            val_micro_f1: val.micro_f1,
            val_macro_f1: val.macro_f1,
        });
        let (improved, stop) = stopper.observe(epoch, val.micro_f1);
        if improved {
            best_params = params.clone();
        }
        if stop {
            stopped_early = epoch < tcfg.epochs;
            break;
        }
    }

    let test = evaluate(&best_params, &model_config, &run_cfg.graph, &test_set, &provider)?;
    Ok(TrainOutcome {
        params: best_params,
        model_config,
        vocab,
        metrics: RunMetrics {
            seed: tcfg.seed,
            epochs,
            best_epoch: stopper.best_epoch,
            stopped_early,
            test,
        },
    })
}

/// Serialize run metrics as pretty JSON with a trailing newline. Field order
/// is fixed by the struct definitions, so equal runs give equal bytes.
pub fn metrics_to_json(metrics: &RunMetrics) -> String {
    let mut s = serde_json::to_string_pretty(metrics).expect("metrics serialization");
    s.push('\n');
    s
}

pub fn write_metrics(path: &Path, metrics: &RunMetrics) -> Result<(), TrainError> {
    std::fs::write(path, metrics_to_json(metrics)).map_err(|source| TrainError::Io {
        path: path.display().to_string(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Ablation harness
// ---------------------------------------------------------------------------

/// The eight ablation settings in report order, with their table labels.
pub const ABLATION_SETTINGS: [(&str, &str); 8] = [
    ("no_syntax_graph", "No Syntax Graph"),
    ("no_semantic_graph", "No Semantic Graph"),
    ("no_graph_branches", "No Graph Branches"),
    ("no_cross_attention", "No Cross-Attention"),
    ("no_transformer_refine", "No Transformer"),
    ("no_highway_gate", "No Highway Gate"),
    ("no_aspect_embedding", "No Aspect Embedding"),
    ("fixed_adjacency", "Fixed Adjacency"),
];

pub const BASE_SETTING_LABEL: &str = "Base";

#[derive(Clone, Debug, Serialize)]
pub struct AblationRow {
    pub setting: String,
    pub flag: Option<String>,
    pub best_epoch: usize,
    pub test: EvalMetrics,
}

#[derive(Clone, Debug, Serialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    /// CSV with one row per setting: label, accuracy, micro/macro F1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("setting,accuracy,micro_f1,macro_f1\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                crate::graphs::csv_field(&row.setting),
                row.test.accuracy,
                row.test.micro_f1,
                row.test.macro_f1
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("ablation serialization");
        s.push('\n');
        s
    }
}

/// Train one model per ablation setting plus the unablated base, all with the
/// same seed and data order. `only` restricts to a single named flag (the
/// base row is always included).
pub fn run_ablation(
    run_cfg: &RunConfig,
    data: &DatasetBundle,
    only: Option<&str>,
) -> Result<AblationTable, TrainError> {
    if let Some(name) = only {
        if !ABLATION_SETTINGS.iter().any(|(flag, _)| *flag == name) {
            return Err(TrainError::Config(format!("unknown ablation flag `{name}`")));
        }
    }
    let mut rows = Vec::new();
    for (flag, label) in ABLATION_SETTINGS {
        if only.is_some_and(|o| o != flag) {
            continue;
        }
        let mut cfg = run_cfg.clone();
        cfg.model.flags = cfg
            .model
            .flags
            .with_flag(flag)
            .map_err(|e| TrainError::Config(e.to_string()))?;
        let outcome = train(&cfg, data)?;
        rows.push(AblationRow {
            setting: label.to_string(),
            flag: Some(flag.to_string()),
            best_epoch: outcome.metrics.best_epoch,
            test: outcome.metrics.test,
        });
    }
    let base = train(run_cfg, data)?;
    rows.push(AblationRow {
        setting: BASE_SETTING_LABEL.to_string(),
        flag: None,
        best_epoch: base.metrics.best_epoch,
        test: base.metrics.test,
    });
    Ok(AblationTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Instance;

    #[test]
    fn cross_entropy_uniform_is_ln3() {
        let mut tape = Tape::new();
        let logits = tape.param(Matrix::from_rows(&[vec![0.5, 0.5, 0.5]]));
        let loss = cross_entropy_loss(&mut tape, logits, 0, 1.0);
        assert!((tape.value(loss).get(0, 0) - 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_confident_correct_is_tiny() {
        let mut tape = Tape::new();
        let logits = tape.param(Matrix::from_rows(&[vec![20.0, 0.0, 0.0]]));
        let loss = cross_entropy_loss(&mut tape, logits, 0, 1.0);
        assert!(tape.value(loss).get(0, 0) < 1e-3);
    }

    #[test]
    fn cross_entropy_weight_is_linear() {
        let mut tape = Tape::new();
        let logits = tape.param(Matrix::from_rows(&[vec![0.3, -0.4, 1.1]]));
        let l1 = cross_entropy_loss(&mut tape, logits, 2, 1.0);
        let l2 = cross_entropy_loss(&mut tape, logits, 2, 2.0);
        assert!((tape.value(l2).get(0, 0) - 2.0 * tape.value(l1).get(0, 0)).abs() < 1e-15);
    }

    fn scalar_params(v: f64) -> (ModelConfig, ModelParams) {
        // smallest valid model; we only exercise the optimizer plumbing
        let cfg = ModelConfig {
            vocab_size: 4,
            embed_dim: 2,
            hidden_dim: 2,
            refine_heads: 1,
            ..ModelConfig::default()
        };
        let mut params = ModelParams::init(&cfg, 0);
        params.for_each_mut(|_, m| {
            for x in m.data_mut() {
                *x = v;
            }
        });
        (cfg, params)
    }

    fn uniform_grads(params: &ModelParams, g: f64) -> Vec<(String, Matrix)> {
        let mut grads = Vec::new();
        params.for_each(|n, m| grads.push((n.to_string(), Matrix::filled(m.rows(), m.cols(), g))));
        grads
    }

    #[test]
    fn adamw_zero_grad_zero_decay_is_fixed_point() {
        let (_, mut params) = scalar_params(0.7);
        let snapshot = params.clone();
        let tcfg = TrainConfig { weight_decay: 0.0, ..TrainConfig::default() };
        let mut opt = AdamW::new(&tcfg);
        let grads = uniform_grads(&params, 0.0);
        opt.step(&mut params, &grads);
        assert_eq!(params, snapshot);
    }

    #[test]
    fn adamw_single_step_matches_hand_formula() {
        let (_, mut params) = scalar_params(1.0);
        let tcfg = TrainConfig { learning_rate: 0.1, weight_decay: 0.01, ..TrainConfig::default() };
        let mut opt = AdamW::new(&tcfg);
        let grads = uniform_grads(&params, 1.0);
        opt.step(&mut params, &grads);
        // m = 0.1, v = 0.001; m_hat = 1, v_hat = 1
        // p = 1 - 0.1 * (1 / (1 + 1e-8) + 0.01 * 1)
        let expected = 1.0 - 0.1 * (1.0 / (1.0 + 1e-8) + 0.01);
        params.for_each(|name, m| {
            for &x in m.data() {
                assert!((x - expected).abs() < 1e-12, "{name}: {x} vs {expected}");
            }
        });
    }

    #[test]
    fn adamw_decay_shrinks_with_zero_gradient() {
        let (_, mut params) = scalar_params(2.0);
        let tcfg = TrainConfig { learning_rate: 0.5, weight_decay: 0.1, ..TrainConfig::default() };
        let mut opt = AdamW::new(&tcfg);
        let grads = uniform_grads(&params, 0.0);
        opt.step(&mut params, &grads);
        let expected = 2.0 - 0.5 * 0.1 * 2.0;
        params.for_each(|_, m| {
            for &x in m.data() {
                assert!((x - expected).abs() < 1e-12);
            }
        });
    }

    #[test]
    fn clip_rescales_to_max_norm() {
        let mut grads = vec![
            ("a".to_string(), Matrix::filled(1, 2, 3.0)),
            ("b".to_string(), Matrix::filled(1, 2, 4.0)),
        ];
        // norm = sqrt(9+9+16+16) = sqrt(50)
        let norm = clip_global_norm(&mut grads, 1.0);
        assert!((norm - 50f64.sqrt()).abs() < 1e-12);
        let new_norm: f64 = grads
            .iter()
            .map(|(_, g)| g.data().iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        assert!((new_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_perfect_predictions() {
        let mut confusion = [[0usize; 3]; 3];
        confusion[0][0] = 5;
        confusion[1][1] = 3;
        confusion[2][2] = 2;
        let m = metrics_from_confusion(confusion);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.micro_f1, 1.0);
        assert_eq!(m.macro_f1, 1.0);
    }

    /// Independent brute-force metric computation over raw prediction pairs.
    fn brute_force_metrics(pairs: &[(usize, usize)]) -> (f64, f64, f64) {
        let correct = pairs.iter().filter(|(t, p)| t == p).count();
        let accuracy = correct as f64 / pairs.len() as f64;
        // micro: pooled counts
        let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
        for c in 0..3 {
            tp += pairs.iter().filter(|(t, p)| *t == c && *p == c).count();
            fp += pairs.iter().filter(|(t, p)| *t != c && *p == c).count();
            fnn += pairs.iter().filter(|(t, p)| *t == c && *p != c).count();
        }
        let micro = 2.0 * tp as f64 / (2 * tp + fp + fnn) as f64;
        let mut macro_sum = 0.0;
        for c in 0..3 {
            let tp = pairs.iter().filter(|(t, p)| *t == c && *p == c).count();
            let fp = pairs.iter().filter(|(t, p)| *t != c && *p == c).count();
            let fnn = pairs.iter().filter(|(t, p)| *t == c && *p != c).count();
            let denom = 2 * tp + fp + fnn;
            macro_sum += if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 };
        }
        (accuracy, micro, macro_sum / 3.0)
    }

    #[test]
    fn micro_f1_equals_accuracy_and_matches_brute_force() {
        let pairs: Vec<(usize, usize)> =
            vec![(0, 0), (0, 1), (1, 1), (1, 1), (2, 0), (2, 2), (1, 2), (0, 0)];
        let mut confusion = [[0usize; 3]; 3];
        for &(t, p) in &pairs {
            confusion[t][p] += 1;
        }
        let m = metrics_from_confusion(confusion);
        let (acc, micro, macro_f1) = brute_force_metrics(&pairs);
        assert!((m.accuracy - acc).abs() < 1e-15);
        assert!((m.micro_f1 - micro).abs() < 1e-15);
        assert!((m.macro_f1 - macro_f1).abs() < 1e-15);
        assert!((m.micro_f1 - m.accuracy).abs() < 1e-12);
    }

    #[test]
    fn degenerate_predictor_matches_hand_confusion() {
        // always predicts class 0 on a fixture with labels 3/2/1
        let mut confusion = [[0usize; 3]; 3];
        confusion[0][0] = 3;
        confusion[1][0] = 2;
        confusion[2][0] = 1;
        let m = metrics_from_confusion(confusion);
        assert!((m.accuracy - 0.5).abs() < 1e-15);
        assert!((m.micro_f1 - 0.5).abs() < 1e-15);
        // class 0: tp=3, fp=3, fn=0 -> 2*3/(6+3) = 2/3; classes 1,2: 0
        assert!((m.macro_f1 - (2.0 / 3.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn early_stopper_patience_arithmetic() {
        // validation scores peaking at epoch 2, patience 5 -> halt at epoch 7
        let scores = [0.3, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1];
        let mut stopper = EarlyStopper::new(5);
        let mut halted_at = None;
        for (i, &s) in scores.iter().enumerate() {
            let epoch = i + 1;
            let (_, stop) = stopper.observe(epoch, s);
            if stop {
                halted_at = Some(epoch);
                break;
            }
        }
        assert_eq!(halted_at, Some(7));
        assert_eq!(stopper.best_epoch, 2);
    }

    #[test]
    fn early_stopper_ties_keep_earlier_epoch() {
        let mut stopper = EarlyStopper::new(3);
        stopper.observe(1, 0.5);
        let (improved, _) = stopper.observe(2, 0.5);
        assert!(!improved);
        assert_eq!(stopper.best_epoch, 1);
    }

    fn synthetic_bundle() -> DatasetBundle {
        // tiny separable data: sentiment word decides the class
        let lex = [("good", Polarity::Positive), ("bad", Polarity::Negative), ("meh", Polarity::Neutral)];
        let mk = |name: SplitName, per_class: usize, tag: &str| {
            let mut instances = Vec::new();
            for (w, pol) in lex {
                for k in 0..per_class {
                    let tokens: Vec<String> =
                        ["the", "food", "was", w].iter().map(|s| s.to_string()).collect();
                    instances.push(
                        Instance::new(format!("{tag}-{w}-{k}"), tokens, 1..2, pol).unwrap(),
                    );
                }
            }
            DatasetSplit { name, instances }
        };
        DatasetBundle {
            train: mk(SplitName::Train, 4, "tr"),
            validation: mk(SplitName::Validation, 2, "va"),
            test: mk(SplitName::Test, 2, "te"),
        }
    }

    fn tiny_run_config(seed: u64) -> RunConfig {
        RunConfig {
            model: ModelConfig {
                embed_dim: 8,
                hidden_dim: 8,
                refine_heads: 2,
                dropout_rate: 0.1,
                ..ModelConfig::default()
            },
            train: TrainConfig {
                epochs: 2,
                learning_rate: 1e-3,
                seed,
                max_length: 16,
                early_stop_patience: 5,
                ..TrainConfig::default()
            },
            graph: GraphConfig { semantic_top_k: 3, ..GraphConfig::default() },
        }
    }

    #[test]
    fn train_same_seed_gives_identical_metrics() {
        let data = synthetic_bundle();
        let cfg = tiny_run_config(7);
        let a = train(&cfg, &data).unwrap();
        let b = train(&cfg, &data).unwrap();
        assert_eq!(metrics_to_json(&a.metrics), metrics_to_json(&b.metrics));
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn train_rejects_empty_split() {
        let mut data = synthetic_bundle();
        data.validation.instances.clear();
        let cfg = tiny_run_config(1);
        assert!(matches!(train(&cfg, &data), Err(TrainError::EmptySplit(SplitName::Validation))));
    }

    #[test]
    fn ablation_table_has_nine_labeled_rows() {
        let data = synthetic_bundle();
        let mut cfg = tiny_run_config(3);
        cfg.train.epochs = 1;
        let table = run_ablation(&cfg, &data, None).unwrap();
        assert_eq!(table.rows.len(), 9);
        let labels: Vec<&str> = table.rows.iter().map(|r| r.setting.as_str()).collect();
        assert_eq!(
            labels,
            vec![
                "No Syntax Graph",
                "No Semantic Graph",
                "No Graph Branches",
                "No Cross-Attention",
                "No Transformer",
                "No Highway Gate",
                "No Aspect Embedding",
                "Fixed Adjacency",
                "Base"
            ]
        );
    }

    #[test]
    fn ablation_only_filter_gives_two_rows() {
        let data = synthetic_bundle();
        let mut cfg = tiny_run_config(3);
        cfg.train.epochs = 1;
        let table = run_ablation(&cfg, &data, Some("no_semantic_graph")).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.rows[0].setting, "No Semantic Graph");
        assert_eq!(table.rows[1].setting, "Base");
    }

    #[test]
    fn ablation_base_row_equals_standalone_training() {
        let data = synthetic_bundle();
        let mut cfg = tiny_run_config(5);
        cfg.train.epochs = 1;
        let table = run_ablation(&cfg, &data, Some("no_highway_gate")).unwrap();
        let standalone = train(&cfg, &data).unwrap();
        let base = table.rows.iter().find(|r| r.setting == "Base").unwrap();
        assert_eq!(base.test, standalone.metrics.test);
    }
}
