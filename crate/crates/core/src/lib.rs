//! Aspect-based sentiment classification over dual token graphs.
//!
//! Given a sentence and an aspect term inside it, the model predicts the
//! sentiment polarity expressed toward that aspect. A lightweight trainable
//! encoder produces contextual token embeddings; two graphs over the tokens
//! — a rule-based syntactic adjacency and a cosine-similarity semantic
//! adjacency — each feed a graph attention layer; cross-attention fuses both
//! branches back into the context, a small transformer encoder refines the
//! fusion, an aspect-focused graph attention pass pools an aspect vector, and
//! a highway gate combines everything for the final classifier.
//!
//! Everything runs on a self-contained `f64` matrix kernel with reverse-mode
//! differentiation ([`numkit`]), so training needs no external framework.

pub mod corpus;
pub mod graphs;
pub mod model;
pub mod numkit;
pub mod train;
