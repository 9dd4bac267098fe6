//! Cell-level distances between observed and reconstructed values, and
//! row-level aggregation of cell scores.

use serde::{Deserialize, Serialize};

use crate::data::{Column, QuantileProfile, Table};
use crate::engine::ReconstructionResult;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Floor for a vanishing numerical scale (constant training column).
pub const SCALE_EPSILON: f64 = 1e-12;
/// Cap applied to numerical scores when the scale floor kicks in.
pub const DEFAULT_SCORE_CAP: f64 = 1e6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceVariant {
    /// α-quantile range for numerical cells, `1 - p_true` for categorical.
    #[default]
    Agd,
    /// Min-max range, hard categorical match.
    Gd,
    /// Interquartile range, hard categorical match.
    GdIqr,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Uncertainty-weighted average.
    #[default]
    Uwa,
    /// Plain row mean.
    Mean,
}

pub type CellScoreMatrix<F> = Matrix<F>;
pub type WeightMatrix<F> = Matrix<F>;
pub type UncertaintyMatrix<F> = Matrix<F>;

/// Denominator of the numerical distance for `feature`.
pub fn numeric_scale<F: Scalar>(
    profile: &QuantileProfile<F>,
    feature: usize,
    alpha: f64,
    variant: DistanceVariant,
) -> Result<F> {
    let (lo, hi) = match variant {
        DistanceVariant::Agd => {
            if !(alpha > 0.0 && alpha < 0.5) {
                return Err(Error::Config(format!("alpha must be in (0, 0.5), got {alpha}")));
            }
            (F::lit(alpha), F::lit(1.0 - alpha))
        }
        DistanceVariant::Gd => (F::zero(), F::one()),
        DistanceVariant::GdIqr => (F::lit(0.25), F::lit(0.75)),
    };
    Ok(profile.quantile(feature, hi)? - profile.quantile(feature, lo)?)
}

/// `|x - x̂| / scale`, with the scale floored at [`SCALE_EPSILON`] and the
/// floored result capped at `cap`.
pub fn scaled_distance<F: Scalar>(x: F, x_hat: F, scale: F, cap: F) -> Result<F> {
    if !x.is_finite() || !x_hat.is_finite() {
        return Err(Error::Input(format!("non-finite cell value ({x}, {x_hat})")));
    }
    let eps = F::lit(SCALE_EPSILON);
    let diff = (x - x_hat).abs();
    if scale < eps {
        Ok((diff / eps).min(cap))
    } else {
        Ok(diff / scale)
    }
}

pub fn distance_numerical<F: Scalar>(
    x: F,
    x_hat: F,
    profile: &QuantileProfile<F>,
    feature: usize,
    alpha: f64,
    variant: DistanceVariant,
    cap: F,
) -> Result<F> {
    let scale = numeric_scale(profile, feature, alpha, variant)?;
    scaled_distance(x, x_hat, scale, cap)
}

/// Confidence-aware categorical distance `1 - p_true`.
pub fn distance_categorical<F: Scalar>(p_true: F) -> Result<F> {
    if !(p_true >= F::zero() && p_true <= F::one()) {
        return Err(Error::Input(format!("probability {p_true} outside [0, 1]")));
    }
    Ok(F::one() - p_true)
}

/// Binary-match categorical distance.
pub fn distance_categorical_hard<F: Scalar>(observed: u32, predicted: u32) -> F {
    if observed == predicted {
        F::zero()
    } else {
        F::one()
    }
}

/// Per-cell scores of `test` (ids already aligned to the model dictionaries)
/// against its reconstruction.
pub fn build_cell_scores<F: Scalar>(
    test: &Table<F>,
    recon: &ReconstructionResult<F>,
    profile: &QuantileProfile<F>,
    alpha: f64,
    variant: DistanceVariant,
    cap: f64,
) -> Result<CellScoreMatrix<F>> {
    let (m, d) = (test.n_rows(), test.n_features());
    if recon.x_hat.shape() != (m, d) || recon.uncertainty.shape() != (m, d) || recon.proba.len() != d {
        return Err(Error::Input(format!(
            "reconstruction shape {:?} does not match test shape ({m}, {d})",
            recon.x_hat.shape()
        )));
    }
    if profile.n_features() != d {
        return Err(Error::Input("quantile profile width differs from test".into()));
    }
    let cap = F::lit(cap);
    let mut out = Matrix::zeros(m, d);
    for j in 0..d {
        match test.column(j) {
            Column::Numerical(xs) => {
                let scale = numeric_scale(profile, j, alpha, variant)?;
                for (i, &x) in xs.iter().enumerate() {
                    out.set(i, j, scaled_distance(x, recon.x_hat.get(i, j), scale, cap)?);
                }
            }
            Column::Categorical { ids, .. } => {
                let proba = recon.proba[j]
                    .as_ref()
                    .ok_or_else(|| Error::Input(format!("no class probabilities for feature {j}")))?;
                let k = proba.cols();
                for (i, &obs) in ids.iter().enumerate() {
                    let s = match variant {
                        DistanceVariant::Agd => {
                            let p = if (obs as usize) < k {
                                proba.get(i, obs as usize)
                            } else {
                                F::zero()
                            };
                            distance_categorical(p.min(F::one()))?
                        }
                        DistanceVariant::Gd | DistanceVariant::GdIqr => {
                            let predicted = recon.x_hat.get(i, j).to_u32().unwrap_or(u32::MAX);
                            distance_categorical_hard(obs, predicted)
                        }
                    };
                    out.set(i, j, s);
                }
            }
        }
    }
    Ok(out)
}

/// `W = 1 - Ũ` with each uncertainty row normalised to sum 1. All-zero rows
/// use the uniform profile `1/d`.
pub fn confidence_weights<F: Scalar>(u: &UncertaintyMatrix<F>) -> Result<WeightMatrix<F>> {
    let (m, d) = u.shape();
    let mut w = Matrix::zeros(m, d);
    if d == 0 {
        return Ok(w);
    }
    let uniform = F::one() / F::from_count(d);
    for i in 0..m {
        let row = u.row(i);
        if let Some(bad) = row.iter().find(|&&x| !x.is_finite() || x < F::zero()) {
            return Err(Error::Input(format!("invalid uncertainty {bad} in row {i}")));
        }
        let total = row.iter().fold(F::zero(), |acc, &x| acc + x);
        for (j, &x) in row.iter().enumerate() {
            let share = if total > F::zero() { x / total } else { uniform };
            w.set(i, j, F::one() - share);
        }
    }
    Ok(w)
}

/// Row scores: `(1/d) Σ_j w_ij s_ij` (UWA) or `(1/d) Σ_j s_ij` (mean),
/// summed left to right.
pub fn aggregate_rows<F: Scalar>(s: &CellScoreMatrix<F>, w: &WeightMatrix<F>, mode: Aggregation) -> Result<Vec<F>> {
    if s.shape() != w.shape() {
        return Err(Error::Input(format!(
            "score shape {:?} differs from weight shape {:?}",
            s.shape(),
            w.shape()
        )));
    }
    let (m, d) = s.shape();
    let dd = F::from_count(d.max(1));
    Ok((0..m)
        .map(|i| {
            let total = match mode {
                Aggregation::Uwa => s
                    .row(i)
                    .iter()
                    .zip(w.row(i))
                    .fold(F::zero(), |acc, (&sv, &wv)| acc + wv * sv),
                Aggregation::Mean => s.row(i).iter().fold(F::zero(), |acc, &sv| acc + sv),
            };
            total / dd
        })
        .collect())
}
