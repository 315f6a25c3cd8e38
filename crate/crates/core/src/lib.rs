//! Explaining clusterings of multivariate time series with attention.
//!
//! Given per-individual series and a cluster assignment, one binary
//! classifier per cluster is trained (one-vs-rest). Each classifier runs a
//! temporal self-attention block over time-points and a feature-level block
//! over variables in parallel; the learned attention weights are then
//! aggregated into cluster- and individual-level explanations.
//!
//! Module map:
//! - [`data`]: ingestion, normalisation, padding and masks, temporal splits, labels
//! - [`synth`]: planted-signal generator and a small k-means
//! - [`numkit`]: matrices, masked softmax, attention, loss, Adam, gradient checking
//! - [`model`]: dual-attention classifier, temporal-only ablation, GRU baseline
//! - [`ensemble`]: one-vs-rest training and accuracy reports
//! - [`explain`]: attention averaging, correlation profiles, heatmaps, tables

pub mod data;
pub mod ensemble;
pub mod error;
pub mod explain;
pub mod model;
pub mod numkit;
pub mod synth;

pub use data::{ClusterLabels, IndividualSeries, MtsDataset, Normalization, PaddedDataset};
pub use ensemble::{AccuracyReport, BinaryLabelVector, EnsembleModel};
pub use error::{Error, ErrorKind, Result};
pub use model::{AttentionBundle, Hyperparams, ModelParams, TrainedModel, Variant};
pub use numkit::Matrix;

/// Version of this library, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
