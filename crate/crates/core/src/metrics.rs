//! Detection metrics over row scores (higher = more anomalous) and binary
//! labels (`true` = anomaly).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check_lengths<F>(scores: &[F], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(())
}

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l).count();
    (pos, labels.len() - pos)
}

fn sorted_ascending<F: Scalar>(scores: &[F]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    idx
}

/// Mann–Whitney AUC: `P(s_anomaly > s_normal) + ½ P(equal)`, from mid-ranks.
pub fn auc_roc<F: Scalar>(scores: &[F], labels: &[bool]) -> Result<F> {
    check_lengths(scores, labels)?;
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let order = sorted_ascending(scores);
    // Sum of (1-based) mid-ranks of the positives, doubled to stay integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let twice_mid = (i + 1 + j + 1) as u128;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        twice_rank_sum += twice_mid * pos_in_group;
        i = j + 1;
    }
    let p = pos as u128;
    // 2U = 2R - P(P+1)
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(F::lit(twice_u as f64 / (2.0 * pos as f64 * neg as f64)))
}

/// Step-wise average precision. Equal scores are ordered negatives first
/// (the pessimistic ordering).
pub fn auc_pr<F: Scalar>(scores: &[F], labels: &[bool]) -> Result<F> {
    check_lengths(scores, labels)?;
    let (pos, _) = class_counts(labels);
    if pos == 0 {
        return Err(Error::Input("average precision needs at least one anomaly".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("finite scores")
            .then(labels[a].cmp(&labels[b]))
    });
    let mut tp = 0usize;
    let mut ap = 0.0f64;
    for (rank, &k) in idx.iter().enumerate() {
        if labels[k] {
            tp += 1;
            ap += tp as f64 / (rank + 1) as f64;
        }
    }
    Ok(F::lit(ap / pos as f64))
}

/// `⌈c·m⌉` with tolerance for representation error in the product.
fn ceil_count(contamination: f64, m: usize) -> usize {
    let x = contamination * m as f64;
    if (x - x.round()).abs() < 1e-9 {
        x.round() as usize
    } else {
        x.ceil() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics<F> {
    pub f1: F,
    pub accuracy: F,
    pub threshold: F,
    pub n_flagged: usize,
}

/// Flags the `⌈contamination·m⌉` highest-scoring rows (ties at the cut go to
/// the lower row index) and scores the flags against `labels`.
pub fn threshold_metrics<F: Scalar>(scores: &[F], labels: &[bool], contamination: f64) -> Result<ThresholdMetrics<F>> {
    check_lengths(scores, labels)?;
    if !(contamination > 0.0 && contamination < 1.0) {
        return Err(Error::Config(format!(
            "contamination must be in (0, 1), got {contamination}"
        )));
    }
    let m = scores.len();
    let k = ceil_count(contamination, m);
    if contamination * (m as f64) < 1.0 - 1e-9 || k == 0 || k > m {
        return Err(Error::Config(format!(
            "contamination {contamination} flags {k} of {m} rows"
        )));
    }
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("finite scores")
            .then(a.cmp(&b))
    });
    let mut flagged = vec![false; m];
    for &i in &idx[..k] {
        flagged[i] = true;
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&f, &l) in flagged.iter().zip(labels) {
        match (f, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ThresholdMetrics {
        f1: F::lit(f1),
        accuracy: F::lit((tp + tn) as f64 / m as f64),
        threshold: scores[idx[k - 1]],
        n_flagged: k,
    })
}

pub const LOG_LOSS_CLIP: f64 = 1e-7;

/// Binary cross-entropy of min-max normalised scores clipped to
/// `[δ, 1-δ]`. Constant scores map to 0.5.
pub fn log_loss<F: Scalar>(scores: &[F], labels: &[bool]) -> Result<F> {
    check_lengths(scores, labels)?;
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let lo = scores.iter().copied().fold(F::infinity(), F::min).as_f64();
    let hi = scores.iter().copied().fold(F::neg_infinity(), F::max).as_f64();
    let range = hi - lo;
    let mut total = 0.0f64;
    for (&s, &y) in scores.iter().zip(labels) {
        let p = if range > 0.0 { (s.as_f64() - lo) / range } else { 0.5 };
        let p = p.clamp(LOG_LOSS_CLIP, 1.0 - LOG_LOSS_CLIP);
        total += if y { -p.ln() } else { -(1.0 - p).ln() };
    }
    Ok(F::lit(total / scores.len() as f64))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    /// Wall time of forest training (all features).
    pub fit_total: f64,
    /// Mean per-feature forest training time (TPF).
    pub fit_per_feature: f64,
    pub prune: f64,
    pub score_total: f64,
    /// Scoring time per test row (TPS).
    pub score_per_sample: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub alpha: f64,
    pub auc_roc: f64,
    pub auc_pr: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub log_loss: f64,
    pub threshold: f64,
    pub contamination: f64,
    pub n_test: usize,
    pub n_anomalies: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl EvalReport {
    pub fn compute<F: Scalar>(scores: &[F], labels: &[bool], contamination: f64, alpha: f64) -> Result<Self> {
        let th = threshold_metrics(scores, labels, contamination)?;
        Ok(Self {
            alpha,
            auc_roc: auc_roc(scores, labels)?.as_f64(),
            auc_pr: auc_pr(scores, labels)?.as_f64(),
            f1: th.f1.as_f64(),
            accuracy: th.accuracy.as_f64(),
            log_loss: log_loss(scores, labels)?.as_f64(),
            threshold: th.threshold.as_f64(),
            contamination,
            n_test: labels.len(),
            n_anomalies: labels.iter().filter(|&&l| l).count(),
            timings: None,
        })
    }

    pub const CSV_HEADER: &'static str =
        "alpha,auc_roc,auc_pr,f1,accuracy,log_loss,threshold,contamination,n_test,n_anomalies";

    /// One CSV row matching [`EvalReport::CSV_HEADER`].
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.alpha,
            self.auc_roc,
            self.auc_pr,
            self.f1,
            self.accuracy,
            self.log_loss,
            self.threshold,
            self.contamination,
            self.n_test,
            self.n_anomalies
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(v: &[u8]) -> Vec<bool> {
        v.iter().map(|&x| x == 1).collect()
    }

    #[test]
    fn auc_roc_examples() {
        assert_eq!(auc_roc(&[1.0, 2.0, 3.0, 4.0], &l(&[0, 0, 1, 1])).unwrap(), 1.0);
        assert_eq!(auc_roc(&[5.0; 4], &l(&[0, 1, 0, 1])).unwrap(), 0.5);
        assert_eq!(auc_roc(&[3.0, 1.0, 2.0, 4.0], &l(&[0, 1, 0, 1])).unwrap(), 0.5);
        assert!(matches!(auc_roc(&[1.0, 2.0], &l(&[1, 1])), Err(Error::SingleClass)));
    }

    #[test]
    fn auc_roc_pairwise_example() {
        // anomalies score 4 and 3 vs normals 1 and 2 ... plus one loss
        let s = [3.0, 1.0, 2.0, 4.0];
        let y = l(&[1, 0, 0, 1]);
        assert_eq!(auc_roc(&s, &y).unwrap(), 1.0);
        let y = l(&[1, 0, 1, 0]);
        // pairs (3,1) win, (3,4) lose, (2,1) win, (2,4) lose
        assert_eq!(auc_roc(&s, &y).unwrap(), 0.5);
    }

    #[test]
    fn auc_pr_examples() {
        assert_eq!(auc_pr(&[0.1, 0.2, 0.8, 0.9], &l(&[0, 0, 1, 1])).unwrap(), 1.0);
        assert_eq!(auc_pr(&[4.0, 3.0, 2.0, 1.0], &l(&[0, 1, 0, 1])).unwrap(), 0.5);
        // ties: positives ranked after negatives
        let ap: f64 = auc_pr(&[1.0; 4], &l(&[1, 0, 0, 0])).unwrap();
        assert_eq!(ap, 0.25);
        assert!(auc_pr(&[1.0, 2.0], &l(&[0, 0])).is_err());
    }

    #[test]
    fn threshold_examples() {
        let s = [0.9f64, 0.8, 0.1, 0.2];
        let y = l(&[1, 1, 0, 0]);
        let t = threshold_metrics(&s, &y, 0.5).unwrap();
        assert_eq!((t.threshold, t.f1, t.accuracy), (0.8, 1.0, 1.0));
        let t = threshold_metrics(&s, &y, 0.25).unwrap();
        assert!((t.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(t.accuracy, 0.75);
        let t = threshold_metrics(&s, &l(&[0, 0, 0, 0]), 0.25).unwrap();
        assert_eq!((t.f1, t.accuracy), (0.0, 0.75));
        assert!(threshold_metrics(&s, &y, 0.1).is_err());
        assert!(threshold_metrics(&s, &y, 1.0).is_err());
    }

    #[test]
    fn threshold_ties_broken_by_index() {
        let t = threshold_metrics(&[1.0f64, 1.0, 1.0, 0.0], &l(&[0, 1, 1, 0]), 0.5).unwrap();
        assert_eq!(t.n_flagged, 2);
        // rows 0 and 1 flagged: TP=1 FP=1 FN=1
        assert!((t.f1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ceil_count_tolerates_rounding() {
        assert_eq!(ceil_count(0.1, 30), 3);
        assert_eq!(ceil_count(0.25, 4), 1);
        assert_eq!(ceil_count(0.26, 4), 2);
    }

    #[test]
    fn log_loss_examples() {
        let y = l(&[0, 1, 0, 1]);
        let perfect: f64 = log_loss(&[0.0, 1.0, 0.0, 1.0], &y).unwrap();
        assert!(perfect < 1e-6);
        let constant: f64 = log_loss(&[3.0; 4], &y).unwrap();
        assert!((constant - std::f64::consts::LN_2).abs() < 1e-12);
        let worst: f64 = log_loss(&[1.0, 0.0, 1.0, 0.0], &y).unwrap();
        assert!((worst + LOG_LOSS_CLIP.ln()).abs() < 1e-6);
        assert!(log_loss(&[1.0, 2.0], &l(&[0, 0])).is_err());
    }

    #[test]
    fn report_csv_row_has_header_arity() {
        let r = EvalReport::compute(&[0.9, 0.8, 0.1, 0.2], &l(&[1, 1, 0, 0]), 0.5, 0.01).unwrap();
        assert_eq!(
            r.csv_row().split(',').count(),
            EvalReport::CSV_HEADER.split(',').count()
        );
        assert_eq!(r.auc_roc, 1.0);
    }
}
