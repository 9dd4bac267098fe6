//! CART trees over mixed-type predictors.
//!
//! Numerical targets grow regression trees (squared-error reduction),
//! categorical targets grow classification trees (Gini reduction) whose
//! leaves keep the class histogram.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Column, FeatureKind, RowAccess, Table};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Features tried per split.
    pub mtry: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    /// Budget of binary partitions tried for a categorical predictor when the
    /// node holds three or more target classes.
    pub max_categorical_partitions: usize,
}

impl TreeConfig {
    /// Canonical random-forest defaults for a target of `kind` with
    /// `n_predictors` candidate features.
    pub fn default_for(kind: FeatureKind, n_predictors: usize) -> Self {
        let p = n_predictors.max(1);
        let (mtry, leaf) = match kind {
            FeatureKind::Categorical => (((p as f64).sqrt().ceil() as usize).max(1), 1),
            FeatureKind::Numerical => (p.div_ceil(3).max(1), 5),
        };
        Self {
            mtry: mtry.min(p),
            max_depth: None,
            min_samples_leaf: leaf,
            min_samples_split: 2 * leaf,
            max_categorical_partitions: 32,
        }
    }

    pub fn validate(&self, n_predictors: usize) -> Result<()> {
        if self.mtry == 0 || self.mtry > n_predictors {
            return Err(Error::Config(format!(
                "mtry must be in [1, {n_predictors}], got {}",
                self.mtry
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Config("min_samples_leaf must be at least 1".into()));
        }
        if self.min_samples_split < 2 * self.min_samples_leaf {
            return Err(Error::Config(format!(
                "min_samples_split ({}) must be at least 2 * min_samples_leaf ({})",
                self.min_samples_split, self.min_samples_leaf
            )));
        }
        if self.max_categorical_partitions == 0 {
            return Err(Error::Config("max_categorical_partitions must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SplitRule<F> {
    /// Left iff `value <= threshold`.
    Numerical { feature: usize, threshold: F },
    /// Left iff the id is in `left`. `right` lists the other categories seen
    /// at the node; ids in neither set follow the larger child.
    Categorical {
        feature: usize,
        left: Vec<u32>,
        right: Vec<u32>,
    },
}

impl<F> SplitRule<F> {
    pub fn feature(&self) -> usize {
        match self {
            SplitRule::Numerical { feature, .. } | SplitRule::Categorical { feature, .. } => *feature,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "leaf", rename_all = "lowercase")]
pub enum Leaf<F> {
    Mean { value: F, n_samples: usize },
    Counts { counts: Vec<usize> },
}

impl<F> Leaf<F> {
    pub fn n_samples(&self) -> usize {
        match self {
            Leaf::Mean { n_samples, .. } => *n_samples,
            Leaf::Counts { counts } => counts.iter().sum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node<F> {
    Split {
        rule: SplitRule<F>,
        left: usize,
        right: usize,
        n_samples: usize,
    },
    Leaf(Leaf<F>),
}

impl<F> Node<F> {
    fn n_samples(&self) -> usize {
        match self {
            Node::Split { n_samples, .. } => *n_samples,
            Node::Leaf(l) => l.n_samples(),
        }
    }
}

/// Flat node list; the root is node 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree<F> {
    nodes: Vec<Node<F>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Prediction<F> {
    Value(F),
    Proba(Vec<F>),
}

/// Normalised class histogram.
pub fn counts_to_proba<F: Scalar>(counts: &[usize]) -> Vec<F> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        let k = counts.len().max(1);
        return vec![F::one() / F::from_count(k); counts.len()];
    }
    let total = F::from_count(total);
    counts.iter().map(|&c| F::from_count(c) / total).collect()
}

impl<F: Scalar> Tree<F> {
    pub fn from_nodes(nodes: Vec<Node<F>>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Format("tree without nodes".into()));
        }
        for (i, n) in nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = n {
                if *left <= i || *right <= i || *left >= nodes.len() || *right >= nodes.len() {
                    return Err(Error::Format(format!("node {i} has invalid children")));
                }
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[Node<F>] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    pub fn depth(&self) -> usize {
        fn go<F>(nodes: &[Node<F>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Features tested by any split rule.
    pub fn features_used(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { rule, .. } => Some(rule.feature()),
                Node::Leaf(_) => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    /// Index of the leaf reached by `row`.
    pub fn leaf_index<R: RowAccess<F>>(&self, row: &R) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(_) => return i,
                Node::Split { rule, left, right, .. } => {
                    let go_left = match rule {
                        SplitRule::Numerical { feature, threshold } => row.numeric(*feature) <= *threshold,
                        SplitRule::Categorical {
                            feature,
                            left: lset,
                            right: rset,
                        } => {
                            let id = row.category(*feature);
                            if lset.binary_search(&id).is_ok() {
                                true
                            } else if rset.binary_search(&id).is_ok() {
                                false
                            } else {
                                self.nodes[*left].n_samples() >= self.nodes[*right].n_samples()
                            }
                        }
                    };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn leaf<R: RowAccess<F>>(&self, row: &R) -> &Leaf<F> {
        match &self.nodes[self.leaf_index(row)] {
            Node::Leaf(l) => l,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn predict<R: RowAccess<F>>(&self, row: &R) -> Prediction<F> {
        match self.leaf(row) {
            Leaf::Mean { value, .. } => Prediction::Value(*value),
            Leaf::Counts { counts } => Prediction::Proba(counts_to_proba(counts)),
        }
    }
}

/// Target column of a tree or forest.
#[derive(Clone, Copy, Debug)]
pub enum Target<'a, F> {
    Regression(&'a [F]),
    Classification { labels: &'a [u32], n_classes: usize },
}

impl<'a, F: Scalar> Target<'a, F> {
    /// Column `feature` of `table` as a target.
    pub fn from_table(table: &'a Table<F>, feature: usize) -> Self {
        match table.column(feature) {
            Column::Numerical(v) => Target::Regression(v),
            Column::Categorical { ids, dictionary } => Target::Classification {
                labels: ids,
                n_classes: dictionary.len(),
            },
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Target::Regression(v) => v.len(),
            Target::Classification { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> FeatureKind {
        match self {
            Target::Regression(_) => FeatureKind::Numerical,
            Target::Classification { .. } => FeatureKind::Categorical,
        }
    }
}

#[derive(Clone, Debug)]
enum Cut<F> {
    Threshold(F),
    Left(Vec<u32>),
}

#[derive(Clone, Debug)]
struct Candidate<F> {
    gain: f64,
    feature: usize,
    cut: Cut<F>,
}

impl<F: Scalar> Candidate<F> {
    /// Higher gain wins; ties go to the lower feature index, then the lower
    /// threshold or lexicographically smaller left set.
    fn beats(&self, other: &Candidate<F>) -> bool {
        match self.gain.partial_cmp(&other.gain) {
            Some(Ordering::Greater) => return true,
            Some(Ordering::Less) | None => return false,
            Some(Ordering::Equal) => {}
        }
        match self.feature.cmp(&other.feature) {
            Ordering::Less => return true,
            Ordering::Greater => return false,
            Ordering::Equal => {}
        }
        match (&self.cut, &other.cut) {
            (Cut::Threshold(a), Cut::Threshold(b)) => a < b,
            (Cut::Left(a), Cut::Left(b)) => a < b,
            _ => false,
        }
    }
}

struct Builder<'a, F, R> {
    table: &'a Table<F>,
    predictors: &'a [usize],
    target: Target<'a, F>,
    config: &'a TreeConfig,
    rng: &'a mut R,
    nodes: Vec<Node<F>>,
    pairs: Vec<(F, usize)>,
}

/// Squared-error reduction of splitting `n` samples into groups with the
/// given sizes and means.
#[inline]
fn variance_gain<F: Scalar>(n_left: usize, mean_left: F, n_right: usize, mean_right: F) -> f64 {
    let n = (n_left + n_right) as f64;
    let d = (mean_left - mean_right).as_f64();
    (n_left as f64) * (n_right as f64) / n * d * d
}

/// `Σ c²/n` over a class histogram: the part of weighted Gini impurity that
/// varies between partitions.
#[inline]
fn gini_purity(sum_sq: u64, n: usize) -> f64 {
    sum_sq as f64 / n as f64
}

fn sum_sq(counts: &[usize]) -> u64 {
    counts.iter().map(|&c| (c as u64) * (c as u64)).sum()
}

impl<F: Scalar, R: Rng> Builder<'_, F, R> {
    fn reg_target(&self, s: usize) -> F {
        match self.target {
            Target::Regression(v) => v[s],
            Target::Classification { .. } => unreachable!(),
        }
    }

    fn class_of(&self, s: usize) -> usize {
        match self.target {
            Target::Classification { labels, .. } => labels[s] as usize,
            Target::Regression(_) => unreachable!(),
        }
    }

    fn n_classes(&self) -> usize {
        match self.target {
            Target::Classification { n_classes, .. } => n_classes,
            Target::Regression(_) => 0,
        }
    }

    fn make_leaf(&self, samples: &[usize]) -> Leaf<F> {
        match self.target {
            Target::Regression(v) => {
                let sum: F = samples.iter().map(|&s| v[s]).sum();
                Leaf::Mean {
                    value: sum / F::from_count(samples.len()),
                    n_samples: samples.len(),
                }
            }
            Target::Classification { labels, n_classes } => {
                let mut counts = vec![0usize; n_classes];
                for &s in samples {
                    counts[labels[s] as usize] += 1;
                }
                Leaf::Counts { counts }
            }
        }
    }

    /// Node impurity: sum of squared errors, or `n · Gini`.
    fn impurity(&self, samples: &[usize]) -> f64 {
        match self.target {
            Target::Regression(v) => {
                let mean = samples.iter().map(|&s| v[s]).sum::<F>() / F::from_count(samples.len());
                samples
                    .iter()
                    .map(|&s| {
                        let d = (v[s] - mean).as_f64();
                        d * d
                    })
                    .sum()
            }
            Target::Classification { labels, n_classes } => {
                let mut counts = vec![0usize; n_classes];
                for &s in samples {
                    counts[labels[s] as usize] += 1;
                }
                samples.len() as f64 - gini_purity(sum_sq(&counts), samples.len())
            }
        }
    }

    fn build(mut self, samples: &mut [usize]) -> Tree<F> {
        // (node slot, start, end, depth)
        let mut stack = vec![(0usize, 0usize, samples.len(), 0usize)];
        self.nodes.push(Node::Leaf(Leaf::Counts { counts: vec![] }));
        while let Some((slot, start, end, depth)) = stack.pop() {
            let node_samples = &mut samples[start..end];
            let split = self.find_split(node_samples, depth);
            match split {
                None => {
                    self.nodes[slot] = Node::Leaf(self.make_leaf(node_samples));
                }
                Some(best) => {
                    let (rule, n_left) = self.apply(best, node_samples);
                    let left = self.nodes.len();
                    let right = left + 1;
                    self.nodes.push(Node::Leaf(Leaf::Counts { counts: vec![] }));
                    self.nodes.push(Node::Leaf(Leaf::Counts { counts: vec![] }));
                    self.nodes[slot] = Node::Split {
                        rule,
                        left,
                        right,
                        n_samples: end - start,
                    };
                    stack.push((right, start + n_left, end, depth + 1));
                    stack.push((left, start, start + n_left, depth + 1));
                }
            }
        }
        Tree { nodes: self.nodes }
    }

    /// Reorders `samples` so the left child comes first; returns the rule and
    /// the left count.
    fn apply(&self, best: Candidate<F>, samples: &mut [usize]) -> (SplitRule<F>, usize) {
        let feature = best.feature;
        match best.cut {
            Cut::Threshold(threshold) => {
                let col = self.table.numeric(feature).expect("numerical predictor");
                let n_left = partition(samples, |s| col[s] <= threshold);
                (SplitRule::Numerical { feature, threshold }, n_left)
            }
            Cut::Left(left) => {
                let (ids, _) = self.table.categories(feature).expect("categorical predictor");
                let mut right: Vec<u32> = samples
                    .iter()
                    .map(|&s| ids[s])
                    .filter(|id| left.binary_search(id).is_err())
                    .collect();
                right.sort_unstable();
                right.dedup();
                let n_left = partition(samples, |s| left.binary_search(&ids[s]).is_ok());
                (SplitRule::Categorical { feature, left, right }, n_left)
            }
        }
    }

    fn is_pure(&self, samples: &[usize]) -> bool {
        match self.target {
            Target::Regression(v) => {
                let first = v[samples[0]];
                samples.iter().all(|&s| v[s] == first)
            }
            Target::Classification { labels, .. } => {
                let first = labels[samples[0]];
                samples.iter().all(|&s| labels[s] == first)
            }
        }
    }

    fn find_split(&mut self, samples: &[usize], depth: usize) -> Option<Candidate<F>> {
        let n = samples.len();
        if n < self.config.min_samples_split
            || n < 2 * self.config.min_samples_leaf
            || self.config.max_depth.is_some_and(|d| depth >= d)
            || self.is_pure(samples)
        {
            return None;
        }
        let parent = self.impurity(samples);
        let min_gain = parent * 1e-12;

        let mut order = self.predictors.to_vec();
        order.shuffle(self.rng);
        let mut best: Option<Candidate<F>> = None;
        for (tried, &feature) in order.iter().enumerate() {
            // Past the mtry budget, keep drawing features only until some
            // valid split exists.
            if tried >= self.config.mtry && best.is_some() {
                break;
            }
            let cand = match self.table.schema().kind(feature) {
                FeatureKind::Numerical => self.best_numeric(samples, feature),
                FeatureKind::Categorical => self.best_categorical(samples, feature),
            };
            if let Some(c) = cand {
                if c.gain > min_gain && c.gain > 0.0 && best.as_ref().is_none_or(|b| c.beats(b)) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn best_numeric(&mut self, samples: &[usize], feature: usize) -> Option<Candidate<F>> {
        let col = self.table.numeric(feature).expect("numerical predictor");
        let mut pairs = std::mem::take(&mut self.pairs);
        pairs.clear();
        pairs.extend(samples.iter().map(|&s| (col[s], s)));
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite values"));
        let n = pairs.len();
        let leaf = self.config.min_samples_leaf;
        let mut best: Option<(f64, usize)> = None;

        match self.target {
            Target::Regression(_) => {
                let total: F = pairs.iter().map(|&(_, s)| self.reg_target(s)).sum();
                let mut left_sum = F::zero();
                for i in 0..n - 1 {
                    left_sum = left_sum + self.reg_target(pairs[i].1);
                    let n_left = i + 1;
                    if pairs[i].0 == pairs[i + 1].0 || n_left < leaf || n - n_left < leaf {
                        continue;
                    }
                    let ml = left_sum / F::from_count(n_left);
                    let mr = (total - left_sum) / F::from_count(n - n_left);
                    let g = variance_gain(n_left, ml, n - n_left, mr);
                    if best.is_none_or(|(bg, _)| g > bg) {
                        best = Some((g, i));
                    }
                }
            }
            Target::Classification { .. } => {
                let k = self.n_classes();
                let mut right = vec![0usize; k];
                for &(_, s) in &pairs {
                    right[self.class_of(s)] += 1;
                }
                let parent_purity = gini_purity(sum_sq(&right), n);
                let mut left = vec![0usize; k];
                let mut sq_left = 0u64;
                let mut sq_right = sum_sq(&right);
                for i in 0..n - 1 {
                    let c = self.class_of(pairs[i].1);
                    sq_left += 2 * left[c] as u64 + 1;
                    left[c] += 1;
                    sq_right -= 2 * right[c] as u64 - 1;
                    right[c] -= 1;
                    let n_left = i + 1;
                    if pairs[i].0 == pairs[i + 1].0 || n_left < leaf || n - n_left < leaf {
                        continue;
                    }
                    let g = gini_purity(sq_left, n_left) + gini_purity(sq_right, n - n_left) - parent_purity;
                    if best.is_none_or(|(bg, _)| g > bg) {
                        best = Some((g, i));
                    }
                }
            }
        }
        let result = best.map(|(gain, i)| {
            let lo = pairs[i].0;
            let hi = pairs[i + 1].0;
            let mid = lo + (hi - lo) / F::lit(2.0);
            let threshold = if mid > lo && mid < hi { mid } else { lo };
            Candidate {
                gain,
                feature,
                cut: Cut::Threshold(threshold),
            }
        });
        self.pairs = pairs;
        result
    }

    fn best_categorical(&mut self, samples: &[usize], feature: usize) -> Option<Candidate<F>> {
        let (ids, dictionary) = self.table.categories(feature).expect("categorical predictor");
        let n_cats = dictionary.len();
        let leaf = self.config.min_samples_leaf;
        let n = samples.len();
        match self.target {
            Target::Regression(v) => {
                let mut count = vec![0usize; n_cats];
                let mut sum = vec![F::zero(); n_cats];
                for &s in samples {
                    let c = ids[s] as usize;
                    count[c] += 1;
                    sum[c] = sum[c] + v[s];
                }
                let mut present: Vec<usize> = (0..n_cats).filter(|&c| count[c] > 0).collect();
                if present.len() < 2 {
                    return None;
                }
                let mean = |c: usize| sum[c] / F::from_count(count[c]);
                present.sort_by(|&a, &b| mean(a).partial_cmp(&mean(b)).expect("finite").then(a.cmp(&b)));
                let total: F = present.iter().map(|&c| sum[c]).sum();
                let mut best: Option<(f64, usize)> = None;
                let (mut nl, mut sl) = (0usize, F::zero());
                for k in 0..present.len() - 1 {
                    nl += count[present[k]];
                    sl = sl + sum[present[k]];
                    if nl < leaf || n - nl < leaf {
                        continue;
                    }
                    let g = variance_gain(nl, sl / F::from_count(nl), n - nl, (total - sl) / F::from_count(n - nl));
                    if best.is_none_or(|(bg, _)| g > bg) {
                        best = Some((g, k));
                    }
                }
                best.map(|(gain, k)| {
                    let mut left: Vec<u32> = present[..=k].iter().map(|&c| c as u32).collect();
                    left.sort_unstable();
                    Candidate {
                        gain,
                        feature,
                        cut: Cut::Left(left),
                    }
                })
            }
            Target::Classification { .. } => {
                let k = self.n_classes();
                let mut hist = vec![vec![0usize; k]; n_cats];
                for &s in samples {
                    hist[ids[s] as usize][self.class_of(s)] += 1;
                }
                let present: Vec<usize> = (0..n_cats).filter(|&c| hist[c].iter().any(|&x| x > 0)).collect();
                if present.len() < 2 {
                    return None;
                }
                let mut parent = vec![0usize; k];
                for &c in &present {
                    for (p, h) in parent.iter_mut().zip(&hist[c]) {
                        *p += h;
                    }
                }
                let classes: Vec<usize> = (0..k).filter(|&y| parent[y] > 0).collect();
                let parent_purity = gini_purity(sum_sq(&parent), n);
                let eval = |in_left: &dyn Fn(usize) -> bool| -> Option<f64> {
                    let mut left = vec![0usize; k];
                    for &c in &present {
                        if in_left(c) {
                            for (l, h) in left.iter_mut().zip(&hist[c]) {
                                *l += h;
                            }
                        }
                    }
                    let nl: usize = left.iter().sum();
                    if nl < leaf || n - nl < leaf {
                        return None;
                    }
                    let right: Vec<usize> = parent.iter().zip(&left).map(|(p, l)| p - l).collect();
                    Some(gini_purity(sum_sq(&left), nl) + gini_purity(sum_sq(&right), n - nl) - parent_purity)
                };
                let mut best: Option<(f64, Vec<u32>)> = None;
                let mut consider = |gain: Option<f64>, left: Vec<u32>| {
                    if let Some(g) = gain {
                        let better = match &best {
                            None => true,
                            Some((bg, bl)) => g > *bg || (g == *bg && left < *bl),
                        };
                        if better {
                            best = Some((g, left));
                        }
                    }
                };

                if classes.len() <= 2 {
                    // Order by the rate of the second class; prefix cuts are exact.
                    let pos = *classes.last().expect("non-empty node");
                    let mut order = present.clone();
                    let rate = |c: usize| hist[c][pos] as f64 / hist[c].iter().sum::<usize>() as f64;
                    order.sort_by(|&a, &b| rate(a).partial_cmp(&rate(b)).expect("finite").then(a.cmp(&b)));
                    for cut in 1..order.len() {
                        let mut left: Vec<u32> = order[..cut].iter().map(|&c| c as u32).collect();
                        left.sort_unstable();
                        let set = left.clone();
                        consider(eval(&|c| set.binary_search(&(c as u32)).is_ok()), left);
                    }
                } else {
                    let m = present.len();
                    let budget = self.config.max_categorical_partitions;
                    let exhaustive = m <= 20 && (1usize << (m - 1)) - 1 <= budget;
                    if exhaustive {
                        // The last category always goes right, so each mask is a
                        // distinct unordered partition.
                        for mask in 1usize..(1usize << (m - 1)) {
                            let left: Vec<u32> = (0..m)
                                .filter(|&i| mask >> i & 1 == 1)
                                .map(|i| present[i] as u32)
                                .collect();
                            let set = left.clone();
                            consider(eval(&|c| set.binary_search(&(c as u32)).is_ok()), left);
                        }
                    } else {
                        for _ in 0..budget {
                            let mut side: Vec<bool> = (0..m).map(|_| self.rng.gen::<bool>()).collect();
                            if side.iter().all(|&b| b) || side.iter().all(|&b| !b) {
                                let i = self.rng.gen_range(0..m);
                                side[i] = !side[i];
                            }
                            let left: Vec<u32> = (0..m).filter(|&i| side[i]).map(|i| present[i] as u32).collect();
                            let set = left.clone();
                            consider(eval(&|c| set.binary_search(&(c as u32)).is_ok()), left);
                        }
                    }
                }
                best.map(|(gain, left)| Candidate {
                    gain,
                    feature,
                    cut: Cut::Left(left),
                })
            }
        }
    }
}

/// Stable in-place partition; returns the number of elements satisfying
/// `pred`, which end up first.
fn partition(samples: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut left = Vec::with_capacity(samples.len());
    let mut right = Vec::with_capacity(samples.len());
    for &s in samples.iter() {
        if pred(s) {
            left.push(s);
        } else {
            right.push(s);
        }
    }
    let n_left = left.len();
    samples[..n_left].copy_from_slice(&left);
    samples[n_left..].copy_from_slice(&right);
    n_left
}

/// Grows one tree on the rows `sample_ids` (a multiset) of `table`, splitting
/// only on `predictors`.
pub fn fit_tree<F: Scalar, R: Rng>(
    table: &Table<F>,
    predictors: &[usize],
    target: Target<'_, F>,
    sample_ids: &[usize],
    config: &TreeConfig,
    rng: &mut R,
) -> Result<Tree<F>> {
    if sample_ids.is_empty() {
        return Err(Error::Input("cannot fit a tree on zero samples".into()));
    }
    if target.len() != table.n_rows() {
        return Err(Error::Input("target length differs from table rows".into()));
    }
    if predictors.is_empty() {
        return Err(Error::Input("at least one predictor is required".into()));
    }
    if let Some(&bad) = predictors.iter().find(|&&p| p >= table.n_features()) {
        return Err(Error::Input(format!("predictor {bad} out of range")));
    }
    config.validate(predictors.len())?;
    let mut samples = sample_ids.to_vec();
    let builder = Builder {
        table,
        predictors,
        target,
        config,
        rng,
        nodes: Vec::new(),
        pairs: Vec::new(),
    };
    Ok(builder.build(&mut samples))
}
