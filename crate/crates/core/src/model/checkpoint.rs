//! Versioned JSON checkpoint: model/graph config, vocabulary, and every
//! named parameter tensor with shape metadata. Loading validates the tensor
//! set and shapes against the stored config, so a corrupted or mismatched
//! file fails with a named diagnostic instead of a bad forward pass.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocab;
use crate::graphs::GraphConfig;
use crate::numkit::Matrix;

use super::{ModelConfig, ModelError, ModelParams};

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// On-disk checkpoint layout.
#[derive(Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub model: ModelConfig,
    pub graph: GraphConfig,
    pub max_length: usize,
    /// Non-reserved vocabulary tokens in index order.
    pub vocab: Vec<String>,
    tensors: Vec<TensorRecord>,
}

/// A checkpoint loaded back into usable pieces.
#[derive(Debug)]
pub struct CheckpointData {
    pub params: ModelParams,
    pub model: ModelConfig,
    pub graph: GraphConfig,
    pub max_length: usize,
    pub vocab: Vocab,
}

pub fn save_checkpoint(
    path: &Path,
    params: &ModelParams,
    model: &ModelConfig,
    graph: &GraphConfig,
    max_length: usize,
    vocab: &Vocab,
) -> Result<(), ModelError> {
    let mut tensors = Vec::new();
    params.for_each(|name, m| {
        tensors.push(TensorRecord {
            name: name.to_string(),
            rows: m.rows(),
            cols: m.cols(),
            data: m.data().to_vec(),
        });
    });
    let ckpt = Checkpoint {
        version: CHECKPOINT_VERSION,
        model: model.clone(),
        graph: graph.clone(),
        max_length,
        vocab: vocab.non_special_tokens().to_vec(),
        tensors,
    };
    let json = serde_json::to_string(&ckpt).expect("checkpoint serialization");
    fs::write(path, json).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<CheckpointData, ModelError> {
    let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let fail = |message: String| ModelError::Checkpoint {
        path: path.display().to_string(),
        message,
    };
    let ckpt: Checkpoint =
        serde_json::from_str(&text).map_err(|e| fail(format!("not a valid checkpoint: {e}")))?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(fail(format!(
            "unsupported version {} (expected {CHECKPOINT_VERSION})",
            ckpt.version
        )));
    }
    ckpt.model.validate()?;

    let mut records: BTreeMap<String, TensorRecord> = BTreeMap::new();
    for r in ckpt.tensors {
        if records.insert(r.name.clone(), r).is_some() {
            return Err(fail("duplicate tensor record".into()));
        }
    }

    // A skeleton init derived from the config defines the expected tensor
    // names and shapes; the stored records must match it exactly.
    let mut params = ModelParams::init(&ckpt.model, 0);
    let mut error: Option<String> = None;
    params.for_each_mut(|name, m| {
        if error.is_some() {
            return;
        }
        match records.remove(name) {
            None => error = Some(format!("missing tensor `{name}`")),
            Some(r) => {
                if (r.rows, r.cols) != m.shape() {
                    error = Some(format!(
                        "tensor `{name}` has shape {}x{} but the config requires {}x{}",
                        r.rows,
                        r.cols,
                        m.shape().0,
                        m.shape().1
                    ));
                } else if r.data.len() != r.rows * r.cols {
                    error = Some(format!("tensor `{name}` data length mismatch"));
                } else if r.data.iter().any(|v| !v.is_finite()) {
                    error = Some(format!("tensor `{name}` contains non-finite values"));
                } else {
                    *m = Matrix::from_vec(r.rows, r.cols, r.data);
                }
            }
        }
    });
    if let Some(message) = error {
        return Err(fail(message));
    }
    if let Some(extra) = records.keys().next() {
        return Err(fail(format!("unexpected tensor `{extra}` for this config")));
    }
    Ok(CheckpointData {
        params,
        model: ckpt.model,
        graph: ckpt.graph,
        max_length: ckpt.max_length,
        vocab: Vocab::from_token_list(&ckpt.vocab),
    })
}
