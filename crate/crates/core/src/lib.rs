//! Outlier detection for mixed-type tables by feature-wise conditional
//! reconstruction.
//!
//! Each feature gets a random forest trained on the remaining features. A
//! test cell is scored by how far the observed value lies from the forest's
//! reconstruction (quantile-scaled for numerical features, one minus the
//! predicted probability of the observed class for categorical ones), and
//! cell scores are averaged per row with weights that shrink where the trees
//! disagree. Forests are pruned to their best trees by out-of-bag quality.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! and `*32` aliases below fix the precision.
//!
//! ```
//! use rfod::{Column, ColumnSpec, FeatureKind, Model64, RfodConfig, Schema, Table64};
//!
//! let x: Vec<f64> = (0..60).map(f64::from).collect();
//! let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
//! let schema = Schema::new(
//!     vec![ColumnSpec::new("x", FeatureKind::Numerical), ColumnSpec::new("y", FeatureKind::Numerical)],
//!     None,
//! )?;
//! let train = Table64::from_columns(schema, vec![Column::Numerical(x), Column::Numerical(y)])?;
//! let mut config = RfodConfig::default();
//! config.forest.n_trees = 10;
//! let model = Model64::fit(&train, &config)?;
//! let detection = model.detect(&train)?;
//! assert_eq!(detection.row_scores.len(), 60);
//! # Ok::<(), rfod::Error>(())
//! ```

pub mod data;
pub mod engine;
pub mod error;
pub mod export;
pub mod forest;
pub mod matrix;
pub mod metrics;
pub mod scalar;
pub mod scoring;
pub mod seed;
pub mod tree;

pub use data::{
    infer_schema, load_table, read_table, split_for_eval, Column, ColumnSpec, EvalSplit, FeatureKind, InferOptions,
    LabeledTable, QuantileProfile, RowAccess, Schema, SplitManifest, Table,
};
pub use engine::{Detection, FitTimings, ReconstructionResult, RfodConfig, RfodModel, ScoringOptions};
pub use error::{Error, Result};
pub use forest::{aggregate, fit_forest, Aggregate, Forest, ForestConfig, ForestMode, Point, TreeSettings};
pub use matrix::Matrix;
pub use metrics::{auc_pr, auc_roc, log_loss, threshold_metrics, EvalReport, Timings};
pub use scalar::Scalar;
pub use scoring::{
    aggregate_rows, build_cell_scores, confidence_weights, distance_categorical, distance_numerical, Aggregation,
    DistanceVariant,
};
pub use tree::{fit_tree, Prediction, Target, Tree, TreeConfig};

pub type Table64 = Table<f64>;
pub type Table32 = Table<f32>;
pub type Model64 = RfodModel<f64>;
pub type Model32 = RfodModel<f32>;
pub type Forest64 = Forest<f64>;
pub type Forest32 = Forest<f32>;
pub type Tree64 = Tree<f64>;
pub type Tree32 = Tree<f32>;
pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
