//! Multi-view profiling of news outlets at desk scale.
//!
//! The library covers the full pipeline:
//!
//! - [`graph`]: building the three media graphs (audience-overlap,
//!   hyperlink, LLM-derived) from fixture neighbor sources, with level
//!   expansion, node merging, and component statistics;
//! - [`gnn`]: unsupervised 64-dimensional node embeddings from three GNN
//!   encoders trained with an edge-contrastive objective;
//! - [`fusion`]: five static strategies for combining per-view embeddings,
//!   plus the linear hinge-loss classifier used throughout;
//! - [`bandit`]: dynamic fusion as a contextual bandit trained with PPO,
//!   producing per-outlet view weights;
//! - [`ensemble`]: hard and soft voting from article-level to outlet-level
//!   predictions;
//! - [`eval`]: ordinal-aware metrics (MAE on class indices, Macro-F1,
//!   Accuracy, Macro-Precision, Macro-Recall) and dummy baselines;
//! - [`core`]: shared domain types (outlets, label scales, splits,
//!   embedding tables) and [`numkit`], the deterministic numeric kernel.
//!
//! All training is seeded and bit-deterministic: the same seed, config, and
//! input files produce identical artifacts. The companion guide in `book/`
//! walks through each stage; its code snippets compile and run as this
//! crate's doctests (see [`book`]).

pub mod bandit;
pub mod book;
pub mod core;
pub mod ensemble;
pub mod eval;
pub mod fusion;
pub mod gnn;
pub mod graph;
pub mod numkit;
