//! Bootstrap ensembles with out-of-bag bookkeeping and OOB-ranked pruning.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{floor_fraction, FeatureKind, RowAccess, Table};
use crate::error::{Error, Result};
use crate::metrics::auc_roc;
use crate::scalar::Scalar;
use crate::seed::rng_for;
use crate::tree::{counts_to_proba, fit_tree, Leaf, Prediction, Target, Tree, TreeConfig};

pub const FOREST_FORMAT: &str = "rfod-forest";
pub const FOREST_VERSION: u32 = 1;

/// Per-tree settings; unset fields take the defaults for the target kind.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSettings {
    pub mtry: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: Option<usize>,
    pub min_samples_split: Option<usize>,
    pub max_categorical_partitions: usize,
}

impl Default for TreeSettings {
    fn default() -> Self {
        Self {
            mtry: None,
            max_depth: None,
            min_samples_leaf: None,
            min_samples_split: None,
            max_categorical_partitions: 32,
        }
    }
}

impl TreeSettings {
    pub fn resolve(&self, kind: FeatureKind, n_predictors: usize) -> TreeConfig {
        let mut c = TreeConfig::default_for(kind, n_predictors);
        if let Some(m) = self.mtry {
            c.mtry = m;
        }
        c.max_depth = self.max_depth;
        if let Some(l) = self.min_samples_leaf {
            c.min_samples_leaf = l;
            c.min_samples_split = 2 * l;
        }
        if let Some(s) = self.min_samples_split {
            c.min_samples_split = s;
        }
        c.max_categorical_partitions = self.max_categorical_partitions;
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    #[serde(default)]
    pub tree: TreeSettings,
    /// Bootstrap draws as a fraction of the training rows (with replacement).
    pub bootstrap_fraction: f64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            tree: TreeSettings::default(),
            bootstrap_fraction: 1.0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("a forest needs at least one tree".into()));
        }
        if !(self.bootstrap_fraction > 0.0 && self.bootstrap_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "bootstrap fraction must be in (0, 1], got {}",
                self.bootstrap_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ForestMode {
    Regression,
    Classification { classes: Vec<String> },
}

impl ForestMode {
    pub fn n_classes(&self) -> usize {
        match self {
            ForestMode::Regression => 0,
            ForestMode::Classification { classes } => classes.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FittedTree<F> {
    pub tree: Tree<F>,
    /// OOB quality; `-inf` when the tree has no OOB rows.
    pub phi: F,
    /// Rows drawn for the bootstrap, sorted, with repetition.
    pub bootstrap_rows: Vec<usize>,
    pub oob_rows: Vec<usize>,
}

/// Trees ordered by original index, their φ ranking, and the active
/// (retained) subset in index order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "ForestFile<F>", try_from = "ForestFile<F>")]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
pub struct Forest<F: Scalar> {
    mode: ForestMode,
    trees: Vec<FittedTree<F>>,
    ranking: Vec<usize>,
    active: Vec<usize>,
    beta: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
struct TreeEntry<F: Scalar> {
    phi: Option<F>,
    tree: Tree<F>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
struct ForestFile<F: Scalar> {
    format: String,
    version: u32,
    #[serde(flatten)]
    mode: ForestMode,
    t_total: usize,
    beta: f64,
    trees: Vec<TreeEntry<F>>,
}

impl<F: Scalar> From<Forest<F>> for ForestFile<F> {
    fn from(f: Forest<F>) -> Self {
        ForestFile {
            format: FOREST_FORMAT.into(),
            version: FOREST_VERSION,
            mode: f.mode,
            t_total: f.trees.len(),
            beta: f.beta,
            trees: f
                .trees
                .into_iter()
                .map(|t| TreeEntry {
                    phi: t.phi.is_finite().then_some(t.phi),
                    tree: t.tree,
                })
                .collect(),
        }
    }
}

impl<F: Scalar> TryFrom<ForestFile<F>> for Forest<F> {
    type Error = Error;

    fn try_from(f: ForestFile<F>) -> Result<Self> {
        if f.format != FOREST_FORMAT || f.version != FOREST_VERSION {
            return Err(Error::Format(format!(
                "expected {FOREST_FORMAT} v{FOREST_VERSION}, found {} v{}",
                f.format, f.version
            )));
        }
        if f.t_total != f.trees.len() {
            return Err(Error::Format("t_total disagrees with the tree list".into()));
        }
        let trees = f
            .trees
            .into_iter()
            .map(|e| {
                Ok(FittedTree {
                    tree: Tree::from_nodes(e.tree.nodes().to_vec())?,
                    phi: e.phi.unwrap_or(F::neg_infinity()),
                    bootstrap_rows: Vec::new(),
                    oob_rows: Vec::new(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Forest::from_trees(f.mode, trees)?.pruned(f.beta)
    }
}

/// Indices sorted by descending score, ties by ascending index.
pub fn rank_by_score<F: Scalar>(phi: &[F]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..phi.len()).collect();
    idx.sort_by(|&a, &b| {
        phi[b]
            .partial_cmp(&phi[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

/// `max(1, ⌊β·t⌋)`.
pub fn retained_count(beta: f64, t: usize) -> Result<usize> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Config(format!("beta must be in (0, 1], got {beta}")));
    }
    Ok(floor_fraction(beta, t).clamp(1, t.max(1)))
}

/// Aggregated ensemble output for one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate<F> {
    /// Mean for regression, argmax class id for classification.
    pub point: Point<F>,
    pub proba: Option<Vec<F>>,
    pub uncertainty: F,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Point<F> {
    Value(F),
    Class(u32),
}

fn argmax<F: Scalar>(p: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

fn mean_and_pop_std<F: Scalar>(values: &[F]) -> (F, F) {
    let k = F::from_count(values.len());
    let mean = values.iter().copied().sum::<F>() / k;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / k;
    (mean, var.sqrt())
}

/// Combines per-tree predictions: mean and population standard deviation for
/// regression; mean probability vector, argmax and vote-agreement spread
/// `sqrt(p(1-p))` for classification.
pub fn aggregate<F: Scalar>(per_tree: &[Prediction<F>]) -> Result<Aggregate<F>> {
    match per_tree.first() {
        None => Err(Error::Input("no tree predictions to aggregate".into())),
        Some(Prediction::Value(_)) => {
            let values = per_tree
                .iter()
                .map(|p| match p {
                    Prediction::Value(v) => Ok(*v),
                    Prediction::Proba(_) => Err(Error::Input("mixed prediction kinds".into())),
                })
                .collect::<Result<Vec<F>>>()?;
            let (mean, std) = mean_and_pop_std(&values);
            Ok(Aggregate {
                point: Point::Value(mean),
                proba: None,
                uncertainty: std,
            })
        }
        Some(Prediction::Proba(first)) => {
            let k = first.len();
            let mut sum = vec![F::zero(); k];
            let mut votes = Vec::with_capacity(per_tree.len());
            for p in per_tree {
                match p {
                    Prediction::Proba(v) if v.len() == k => {
                        for (s, &x) in sum.iter_mut().zip(v) {
                            *s = *s + x;
                        }
                        votes.push(argmax(v));
                    }
                    _ => return Err(Error::Input("mixed prediction kinds".into())),
                }
            }
            Ok(classification_aggregate(sum, &votes))
        }
    }
}

fn classification_aggregate<F: Scalar>(mut sum: Vec<F>, votes: &[usize]) -> Aggregate<F> {
    let t = F::from_count(votes.len());
    for s in sum.iter_mut() {
        *s = *s / t;
    }
    let winner = argmax(&sum);
    let agree = votes.iter().filter(|&&v| v == winner).count();
    let p = F::from_count(agree) / t;
    Aggregate {
        point: Point::Class(winner as u32),
        proba: Some(sum),
        uncertainty: (p * (F::one() - p)).sqrt(),
    }
}

/// R² of `pred` against `truth`; constant truth gives 1 for an exact fit and
/// 0 otherwise.
fn r_squared<F: Scalar>(truth: &[F], pred: &[F]) -> F {
    let n = F::from_count(truth.len());
    let mean = truth.iter().copied().sum::<F>() / n;
    let sst: F = truth.iter().map(|&y| (y - mean) * (y - mean)).sum();
    let sse: F = truth.iter().zip(pred).map(|(&y, &p)| (y - p) * (y - p)).sum();
    if sst == F::zero() {
        return if sse == F::zero() { F::one() } else { F::zero() };
    }
    F::one() - sse / sst
}

/// Macro one-vs-rest AUC over classes with both positives and negatives;
/// 0.5 when no class qualifies.
fn macro_auc<F: Scalar>(labels: &[u32], proba: &[Vec<F>], n_classes: usize) -> F {
    let mut total = F::zero();
    let mut defined = 0usize;
    for c in 0..n_classes {
        let y: Vec<bool> = labels.iter().map(|&l| l as usize == c).collect();
        let pos = y.iter().filter(|&&b| b).count();
        if pos == 0 || pos == y.len() {
            continue;
        }
        let s: Vec<F> = proba.iter().map(|p| p[c]).collect();
        total = total + auc_roc(&s, &y).expect("both classes present");
        defined += 1;
    }
    if defined == 0 {
        F::lit(0.5)
    } else {
        total / F::from_count(defined)
    }
}

/// OOB quality of one tree: R² for regression, macro one-vs-rest AUC-ROC of
/// leaf probabilities for classification, `-inf` with no OOB rows.
pub fn tree_oob_score<F: Scalar>(tree: &Tree<F>, table: &Table<F>, target: Target<'_, F>, oob_rows: &[usize]) -> F {
    if oob_rows.is_empty() {
        return F::neg_infinity();
    }
    match target {
        Target::Regression(y) => {
            let truth: Vec<F> = oob_rows.iter().map(|&i| y[i]).collect();
            let pred: Vec<F> = oob_rows
                .iter()
                .map(|&i| match tree.leaf(&table.row(i)) {
                    Leaf::Mean { value, .. } => *value,
                    Leaf::Counts { .. } => unreachable!("regression tree with class leaf"),
                })
                .collect();
            r_squared(&truth, &pred)
        }
        Target::Classification { labels, n_classes } => {
            let truth: Vec<u32> = oob_rows.iter().map(|&i| labels[i]).collect();
            let proba: Vec<Vec<F>> = oob_rows
                .iter()
                .map(|&i| match tree.leaf(&table.row(i)) {
                    Leaf::Counts { counts } => counts_to_proba(counts),
                    Leaf::Mean { .. } => unreachable!("classification tree with mean leaf"),
                })
                .collect();
            macro_auc(&truth, &proba, n_classes)
        }
    }
}

fn fit_one<F: Scalar>(
    table: &Table<F>,
    predictors: &[usize],
    target: Target<'_, F>,
    tree_config: &TreeConfig,
    n_draws: usize,
    seed: u64,
    index: usize,
) -> Result<FittedTree<F>> {
    let n = table.n_rows();
    let mut rng = rng_for(seed, index as u64);
    let mut bootstrap_rows: Vec<usize> = (0..n_draws).map(|_| rng.gen_range(0..n)).collect();
    let tree = fit_tree(table, predictors, target, &bootstrap_rows, tree_config, &mut rng)?;
    bootstrap_rows.sort_unstable();
    let mut in_bag = vec![false; n];
    for &r in &bootstrap_rows {
        in_bag[r] = true;
    }
    let oob_rows: Vec<usize> = (0..n).filter(|&r| !in_bag[r]).collect();
    let phi = tree_oob_score(&tree, table, target, &oob_rows);
    Ok(FittedTree {
        tree,
        phi,
        bootstrap_rows,
        oob_rows,
    })
}

/// Fits `config.n_trees` bootstrap trees of `target` on `predictors`. Tree
/// `i` draws from a stream keyed by `(seed, i)`, so the forest does not
/// depend on how the work is scheduled. All trees start active.
pub fn fit_forest<F: Scalar>(
    table: &Table<F>,
    predictors: &[usize],
    target: Target<'_, F>,
    config: &ForestConfig,
    seed: u64,
) -> Result<Forest<F>> {
    config.validate()?;
    let n = table.n_rows();
    if n < 2 {
        return Err(Error::Input(format!("need at least 2 training rows, found {n}")));
    }
    let tree_config = config.tree.resolve(target.kind(), predictors.len());
    tree_config.validate(predictors.len())?;
    let n_draws = floor_fraction(config.bootstrap_fraction, n).max(1);
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|i| fit_one(table, predictors, target, &tree_config, n_draws, seed, i))
        .collect::<Result<Vec<_>>>()?;
    let mode = match target {
        Target::Regression(_) => ForestMode::Regression,
        Target::Classification { n_classes, .. } => ForestMode::Classification {
            classes: (0..n_classes).map(|c| c.to_string()).collect(),
        },
    };
    Forest::from_trees(mode, trees)
}

impl<F: Scalar> Forest<F> {
    /// Assembles a forest from fitted trees; all trees active.
    pub fn from_trees(mode: ForestMode, trees: Vec<FittedTree<F>>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::Config("a forest needs at least one tree".into()));
        }
        let phi: Vec<F> = trees.iter().map(|t| t.phi).collect();
        let ranking = rank_by_score(&phi);
        Ok(Self {
            mode,
            active: (0..trees.len()).collect(),
            ranking,
            trees,
            beta: 1.0,
        })
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        match &mut self.mode {
            ForestMode::Classification { classes } if classes.len() == names.len() => {
                *classes = names;
                Ok(self)
            }
            _ => Err(Error::Input("class names do not match the forest".into())),
        }
    }

    pub fn mode(&self) -> &ForestMode {
        &self.mode
    }

    pub fn t_total(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[FittedTree<F>] {
        &self.trees
    }

    pub fn phi(&self) -> Vec<F> {
        self.trees.iter().map(|t| t.phi).collect()
    }

    /// Retained tree indices in ascending order. Predictions sum over trees
    /// in this order, so `β = 1` reproduces the unpruned forest bit for bit.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// All tree indices, best φ first.
    pub fn ranking(&self) -> &[usize] {
        &self.ranking
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Keeps the top `max(1, ⌊β·t⌋)` trees by φ. Pruned trees are retained
    /// so a different β can be applied later.
    pub fn pruned(mut self, beta: f64) -> Result<Self> {
        let k = retained_count(beta, self.trees.len())?;
        let mut active = self.ranking[..k].to_vec();
        active.sort_unstable();
        self.active = active;
        self.beta = beta;
        Ok(self)
    }

    /// Recomputes φ of tree `index` on its OOB rows.
    pub fn oob_score(&self, index: usize, table: &Table<F>, target: Target<'_, F>) -> F {
        let t = &self.trees[index];
        tree_oob_score(&t.tree, table, target, &t.oob_rows)
    }

    pub fn predict_per_tree<R: RowAccess<F>>(&self, row: &R) -> Vec<Prediction<F>> {
        self.active.iter().map(|&i| self.trees[i].tree.predict(row)).collect()
    }

    /// Same result as `aggregate(&self.predict_per_tree(row))`.
    pub fn predict<R: RowAccess<F>>(&self, row: &R) -> Aggregate<F> {
        match &self.mode {
            ForestMode::Regression => {
                let values: Vec<F> = self
                    .active
                    .iter()
                    .map(|&i| match self.trees[i].tree.leaf(row) {
                        Leaf::Mean { value, .. } => *value,
                        Leaf::Counts { .. } => unreachable!(),
                    })
                    .collect();
                let (mean, std) = mean_and_pop_std(&values);
                Aggregate {
                    point: Point::Value(mean),
                    proba: None,
                    uncertainty: std,
                }
            }
            ForestMode::Classification { classes } => {
                let mut sum = vec![F::zero(); classes.len()];
                let mut votes = Vec::with_capacity(self.active.len());
                for &i in &self.active {
                    match self.trees[i].tree.leaf(row) {
                        Leaf::Counts { counts } => {
                            let p = counts_to_proba::<F>(counts);
                            for (s, &x) in sum.iter_mut().zip(&p) {
                                *s = *s + x;
                            }
                            votes.push(argmax(&p));
                        }
                        Leaf::Mean { .. } => unreachable!(),
                    }
                }
                classification_aggregate(sum, &votes)
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
