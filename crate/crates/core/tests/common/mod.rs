#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rfod::seed::rng_for;
use rfod::{Column, ColumnSpec, FeatureKind, Schema, Table64};

pub const CATEGORIES: [&str; 4] = ["low", "mid", "high", "top"];

pub fn schema() -> Schema {
    Schema::new(
        vec![
            ColumnSpec::new("x1", FeatureKind::Numerical),
            ColumnSpec::new("x2", FeatureKind::Numerical),
            ColumnSpec::new("band", FeatureKind::Categorical),
        ],
        None,
    )
    .unwrap()
}

/// Normal rows: `x1 ~ U(0, 1)`, `x2 = sin(2π x1) + N(0, 0.1²)`, and `band`
/// the quartile of `x1`, replaced by a uniform draw 10% of the time.
/// Anomalies take each cell from an independently chosen normal row, so
/// every value is marginally plausible while the combination is not.
pub fn contextual(n_normal: usize, n_anomaly: usize, seed: u64) -> (Table64, Vec<bool>) {
    let mut rng = rng_for(seed, 0);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut x1 = Vec::with_capacity(n_normal + n_anomaly);
    let mut x2 = Vec::with_capacity(n_normal + n_anomaly);
    let mut band = Vec::with_capacity(n_normal + n_anomaly);
    for _ in 0..n_normal {
        let a: f64 = rng.gen();
        x1.push(a);
        x2.push((std::f64::consts::TAU * a).sin() + noise.sample(&mut rng));
        let q = if rng.gen_bool(0.1) {
            rng.gen_range(0..4)
        } else {
            ((a * 4.0) as u32).min(3)
        };
        band.push(q);
    }
    for _ in 0..n_anomaly {
        x1.push(x1[rng.gen_range(0..n_normal)]);
        x2.push(x2[rng.gen_range(0..n_normal)]);
        band.push(band[rng.gen_range(0..n_normal)]);
    }
    let labels = (0..n_normal + n_anomaly).map(|i| i >= n_normal).collect();
    let table = Table64::from_columns(
        schema(),
        vec![
            Column::Numerical(x1),
            Column::Numerical(x2),
            Column::Categorical {
                ids: band,
                dictionary: CATEGORIES.iter().map(|s| s.to_string()).collect(),
            },
        ],
    )
    .unwrap();
    (table, labels)
}

/// Mean absolute z-score over the numerical columns, with mean and standard
/// deviation taken from `train`. Ignores all dependence between features.
pub fn marginal_z_scores(train: &Table64, test: &Table64) -> Vec<f64> {
    let mut out = vec![0.0; test.n_rows()];
    let mut used = 0.0;
    for j in 0..train.n_features() {
        let (Some(tr), Some(te)) = (train.numeric(j), test.numeric(j)) else {
            continue;
        };
        let n = tr.len() as f64;
        let mean = tr.iter().sum::<f64>() / n;
        let sd = (tr.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n)
            .sqrt()
            .max(1e-12);
        for (o, v) in out.iter_mut().zip(te) {
            *o += ((v - mean) / sd).abs();
        }
        used += 1.0;
    }
    out.iter().map(|s| s / used).collect()
}
