//! Leave-one-feature-out training, reconstruction of test rows and the
//! detection pipeline.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureKind, QuantileProfile, Schema, Table};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, Forest, ForestConfig, ForestMode, Point};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::scoring::{
    aggregate_rows, build_cell_scores, confidence_weights, Aggregation, CellScoreMatrix, DistanceVariant,
    UncertaintyMatrix, WeightMatrix, DEFAULT_SCORE_CAP,
};
use crate::seed::derive_seed;

pub const MODEL_FORMAT: &str = "rfod-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfodConfig {
    /// Tail quantile of the numerical scale, in (0, 0.5).
    pub alpha: f64,
    /// Fraction of trees retained per forest, in (0, 1].
    pub beta: f64,
    pub forest: ForestConfig,
    pub seed: u64,
    #[serde(default)]
    pub distance: DistanceVariant,
    #[serde(default)]
    pub aggregation: Aggregation,
    /// Cap for numerical scores on constant training columns.
    #[serde(default = "default_cap")]
    pub score_cap: f64,
}

fn default_cap() -> f64 {
    DEFAULT_SCORE_CAP
}

impl Default for RfodConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            beta: 1.0,
            forest: ForestConfig::default(),
            seed: 0,
            distance: DistanceVariant::Agd,
            aggregation: Aggregation::Uwa,
            score_cap: DEFAULT_SCORE_CAP,
        }
    }
}

impl RfodConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::Config(format!("alpha must be in (0, 0.5), got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("beta must be in (0, 1], got {}", self.beta)));
        }
        if self.score_cap.is_nan() || self.score_cap <= 0.0 {
            return Err(Error::Config(format!(
                "score cap must be positive, got {}",
                self.score_cap
            )));
        }
        self.forest.validate()
    }

    pub fn scoring(&self) -> ScoringOptions {
        ScoringOptions {
            alpha: self.alpha,
            distance: self.distance,
            aggregation: self.aggregation,
            score_cap: self.score_cap,
        }
    }
}

/// Settings of the scoring stage only; changing them never requires a refit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoringOptions {
    pub alpha: f64,
    pub distance: DistanceVariant,
    pub aggregation: Aggregation,
    pub score_cap: f64,
}

/// Reconstructed cells, class probabilities of categorical cells and the
/// per-cell ensemble spread.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionResult<F> {
    /// Predicted value, or predicted class id for categorical features.
    pub x_hat: Matrix<F>,
    /// For each categorical feature, an `m × K` matrix of averaged class
    /// probabilities; `None` for numerical features.
    pub proba: Vec<Option<Matrix<F>>>,
    pub uncertainty: UncertaintyMatrix<F>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection<F> {
    pub cell_scores: CellScoreMatrix<F>,
    pub weights: WeightMatrix<F>,
    pub row_scores: Vec<F>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitTimings {
    /// Wall time to train each feature's forest.
    pub per_feature: Vec<f64>,
    pub fit_total: f64,
    pub prune: f64,
}

impl FitTimings {
    pub fn mean_per_feature(&self) -> f64 {
        if self.per_feature.is_empty() {
            0.0
        } else {
            self.per_feature.iter().sum::<f64>() / self.per_feature.len() as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RfodModel<F: Scalar> {
    schema: Schema,
    dictionaries: Vec<Option<Vec<String>>>,
    forests: Vec<Forest<F>>,
    profile: QuantileProfile<F>,
    config: RfodConfig,
}

fn predictors_without(d: usize, j: usize) -> Vec<usize> {
    (0..d).filter(|&k| k != j).collect()
}

impl<F: Scalar> RfodModel<F> {
    pub fn fit(train: &Table<F>, config: &RfodConfig) -> Result<Self> {
        Self::fit_timed(train, config).map(|(m, _)| m)
    }

    /// Fits one forest per feature on the remaining features, prunes each to
    /// `config.beta` and freezes training quantiles.
    pub fn fit_timed(train: &Table<F>, config: &RfodConfig) -> Result<(Self, FitTimings)> {
        config.validate()?;
        let d = train.n_features();
        if d < 2 {
            return Err(Error::Input(format!("need at least 2 features, found {d}")));
        }
        if train.n_rows() < 2 {
            return Err(Error::Input(format!(
                "need at least 2 training rows, found {}",
                train.n_rows()
            )));
        }
        let start = Instant::now();
        let fitted = (0..d)
            .into_par_iter()
            .map(|j| {
                let t0 = Instant::now();
                let predictors = predictors_without(d, j);
                let target = crate::tree::Target::from_table(train, j);
                let forest = fit_forest(
                    train,
                    &predictors,
                    target,
                    &config.forest,
                    derive_seed(config.seed, j as u64),
                )?;
                let forest = match train.dictionary(j) {
                    Some(names) => forest.with_class_names(names.to_vec())?,
                    None => forest,
                };
                Ok((forest, t0.elapsed().as_secs_f64()))
            })
            .collect::<Result<Vec<_>>>()?;
        let fit_total = start.elapsed().as_secs_f64();

        let t_prune = Instant::now();
        let mut forests = Vec::with_capacity(d);
        let mut per_feature = Vec::with_capacity(d);
        for (forest, secs) in fitted {
            forests.push(forest.pruned(config.beta)?);
            per_feature.push(secs);
        }
        let prune = t_prune.elapsed().as_secs_f64();

        let model = Self {
            schema: train.schema().clone(),
            dictionaries: train.dictionaries(),
            forests,
            profile: QuantileProfile::from_table(train)?,
            config: config.clone(),
        };
        Ok((
            model,
            FitTimings {
                per_feature,
                fit_total,
                prune,
            },
        ))
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn config(&self) -> &RfodConfig {
        &self.config
    }

    pub fn forests(&self) -> &[Forest<F>] {
        &self.forests
    }

    pub fn profile(&self) -> &QuantileProfile<F> {
        &self.profile
    }

    pub fn n_features(&self) -> usize {
        self.forests.len()
    }

    /// Same model with every forest re-pruned to `beta`.
    pub fn repruned(&self, beta: f64) -> Result<Self> {
        let mut out = self.clone();
        out.forests = out
            .forests
            .into_iter()
            .map(|f| f.pruned(beta))
            .collect::<Result<Vec<_>>>()?;
        out.config.beta = beta;
        Ok(out)
    }

    /// Checks the schema and re-expresses categorical ids in the training
    /// dictionaries; unseen categories get ids past the known classes.
    pub fn align(&self, test: &Table<F>) -> Result<Table<F>> {
        self.schema.ensure_compatible(test.schema())?;
        test.recode(&self.dictionaries)
    }

    /// Reconstruction of an already aligned table.
    pub fn reconstruct_aligned(&self, test: &Table<F>) -> Result<ReconstructionResult<F>> {
        let (m, d) = (test.n_rows(), self.n_features());
        if test.n_features() != d {
            return Err(Error::SchemaMismatch(format!(
                "expected {d} features, found {}",
                test.n_features()
            )));
        }
        let cells: Vec<Vec<_>> = (0..m)
            .into_par_iter()
            .map(|i| {
                let row = test.row(i);
                self.forests.iter().map(|f| f.predict(&row)).collect()
            })
            .collect();

        let mut x_hat = Matrix::zeros(m, d);
        let mut uncertainty = Matrix::zeros(m, d);
        let mut proba: Vec<Option<Matrix<F>>> = self
            .forests
            .iter()
            .map(|f| match f.mode() {
                ForestMode::Regression => None,
                ForestMode::Classification { classes } => Some(Matrix::zeros(m, classes.len())),
            })
            .collect();
        for (i, row) in cells.into_iter().enumerate() {
            for (j, agg) in row.into_iter().enumerate() {
                let point = match agg.point {
                    Point::Value(v) => v,
                    Point::Class(c) => F::from_count(c as usize),
                };
                x_hat.set(i, j, point);
                uncertainty.set(i, j, agg.uncertainty);
                if let (Some(p), Some(target)) = (agg.proba, proba[j].as_mut()) {
                    for (c, v) in p.into_iter().enumerate() {
                        target.set(i, c, v);
                    }
                }
            }
        }
        Ok(ReconstructionResult {
            x_hat,
            proba,
            uncertainty,
        })
    }

    pub fn reconstruct(&self, test: &Table<F>) -> Result<ReconstructionResult<F>> {
        self.reconstruct_aligned(&self.align(test)?)
    }

    /// Scoring stage on an aligned table and its reconstruction.
    pub fn score(
        &self,
        aligned: &Table<F>,
        recon: &ReconstructionResult<F>,
        options: &ScoringOptions,
    ) -> Result<Detection<F>> {
        let cell_scores = build_cell_scores(
            aligned,
            recon,
            &self.profile,
            options.alpha,
            options.distance,
            options.score_cap,
        )?;
        let weights = confidence_weights(&recon.uncertainty)?;
        let row_scores = aggregate_rows(&cell_scores, &weights, options.aggregation)?;
        Ok(Detection {
            cell_scores,
            weights,
            row_scores,
        })
    }

    /// Cell and row anomaly scores with the model's own scoring settings.
    pub fn detect(&self, test: &Table<F>) -> Result<Detection<F>> {
        self.detect_with(test, &self.config.scoring())
    }

    pub fn detect_with(&self, test: &Table<F>, options: &ScoringOptions) -> Result<Detection<F>> {
        let aligned = self.align(test)?;
        let recon = self.reconstruct_aligned(&aligned)?;
        self.score(&aligned, &recon, options)
    }

    pub fn dictionaries(&self) -> &[Option<Vec<String>>] {
        &self.dictionaries
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelManifest {
    format: String,
    version: u32,
    scalar: String,
    config: RfodConfig,
    schema: Schema,
    dictionaries: Vec<Option<Vec<String>>>,
    forest_files: Vec<String>,
    quantile_file: String,
}

const MANIFEST_FILE: &str = "manifest.json";
const QUANTILE_FILE: &str = "quantiles.json";

fn scalar_name<F: 'static>() -> &'static str {
    std::any::type_name::<F>()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

impl<F: Scalar> RfodModel<F> {
    /// Writes `manifest.json`, one `forest_<j>.json` per feature and
    /// `quantiles.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let forest_files: Vec<String> = (0..self.forests.len()).map(|j| format!("forest_{j}.json")).collect();
        for (f, name) in self.forests.iter().zip(&forest_files) {
            write_file(&dir.join(name), f.to_json()?.as_bytes())?;
        }
        write_file(
            &dir.join(QUANTILE_FILE),
            serde_json::to_string(&self.profile)?.as_bytes(),
        )?;
        let manifest = ModelManifest {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            scalar: scalar_name::<F>().into(),
            config: self.config.clone(),
            schema: self.schema.clone(),
            dictionaries: self.dictionaries.clone(),
            forest_files,
            quantile_file: QUANTILE_FILE.into(),
        };
        write_file(
            &dir.join(MANIFEST_FILE),
            serde_json::to_string_pretty(&manifest)?.as_bytes(),
        )
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest_path = dir.join(MANIFEST_FILE);
        if !manifest_path.exists() {
            return Err(Error::io(
                &manifest_path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "model manifest not found"),
            ));
        }
        let manifest: ModelManifest = serde_json::from_str(&read_file(&manifest_path)?)?;
        if manifest.format != MODEL_FORMAT || manifest.version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "expected {MODEL_FORMAT} v{MODEL_VERSION}, found {} v{}",
                manifest.format, manifest.version
            )));
        }
        if manifest.scalar != scalar_name::<F>() {
            return Err(Error::Format(format!(
                "model stores {} values, requested {}",
                manifest.scalar,
                scalar_name::<F>()
            )));
        }
        manifest.config.validate()?;
        let d = manifest.schema.n_features();
        if manifest.forest_files.len() != d || manifest.dictionaries.len() != d {
            return Err(Error::Format("manifest lists the wrong number of forests".into()));
        }
        let forests = manifest
            .forest_files
            .iter()
            .map(|name| Forest::from_json(&read_file(&dir.join(name))?))
            .collect::<Result<Vec<_>>>()?;
        for (j, f) in forests.iter().enumerate() {
            let expect_classes = match manifest.schema.kind(j) {
                FeatureKind::Numerical => 0,
                FeatureKind::Categorical => manifest.dictionaries[j].as_ref().map_or(0, Vec::len),
            };
            if f.mode().n_classes() != expect_classes {
                return Err(Error::Format(format!("forest {j} does not match its feature")));
            }
        }
        let profile: QuantileProfile<F> = serde_json::from_str(&read_file(&dir.join(&manifest.quantile_file))?)?;
        Ok(Self {
            schema: manifest.schema,
            dictionaries: manifest.dictionaries,
            forests,
            profile,
            config: manifest.config,
        })
    }
}
