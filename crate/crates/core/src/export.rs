//! CSV and JSON writers for scores and reconstructions. Numbers use the
//! shortest round-trip representation, so output bytes depend only on values.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{FeatureKind, Schema};
use crate::engine::ReconstructionResult;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

fn check_width<F: Copy + Default>(schema: &Schema, m: &Matrix<F>) -> Result<()> {
    if m.cols() != schema.n_features() {
        return Err(Error::Input(format!(
            "matrix has {} columns, schema has {} features",
            m.cols(),
            schema.n_features()
        )));
    }
    Ok(())
}

/// Long format `row,feature,<value_name>`, one line per cell, row-major.
pub fn write_matrix_long<F: Scalar, W: Write>(
    writer: W,
    schema: &Schema,
    matrix: &Matrix<F>,
    value_name: &str,
) -> Result<()> {
    check_width(schema, matrix)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["row", "feature", value_name])?;
    for i in 0..matrix.rows() {
        for (j, v) in matrix.row(i).iter().enumerate() {
            w.write_record([i.to_string(), schema.name(j).to_string(), v.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

pub fn write_cell_scores<F: Scalar, W: Write>(writer: W, schema: &Schema, scores: &Matrix<F>) -> Result<()> {
    write_matrix_long(writer, schema, scores, "score")
}

/// `row,score`.
pub fn write_row_scores<F: Scalar, W: Write>(writer: W, scores: &[F]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["row", "score"])?;
    for (i, s) in scores.iter().enumerate() {
        w.write_record([i.to_string(), s.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

pub fn row_scores_csv<F: Scalar>(scores: &[F]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_row_scores(&mut buf, scores)?;
    Ok(buf)
}

/// Cell-score bundle for external heatmap plotting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub features: Vec<String>,
    /// Test row ids, in the order of `scores`.
    pub rows: Vec<usize>,
    pub scores: Vec<Vec<f64>>,
}

impl Heatmap {
    /// Bundle of the given rows (all rows when `rows` is `None`).
    pub fn new<F: Scalar>(schema: &Schema, cells: &Matrix<F>, rows: Option<&[usize]>) -> Result<Self> {
        check_width(schema, cells)?;
        let rows: Vec<usize> = match rows {
            Some(r) => r.to_vec(),
            None => (0..cells.rows()).collect(),
        };
        if let Some(&bad) = rows.iter().find(|&&r| r >= cells.rows()) {
            return Err(Error::Input(format!("row {bad} out of range")));
        }
        Ok(Self {
            features: schema.names(),
            scores: rows
                .iter()
                .map(|&i| cells.row(i).iter().map(|v| v.as_f64()).collect())
                .collect(),
            rows,
        })
    }

    /// The `k` highest-scoring rows, ties by row id.
    pub fn top_rows<F: Scalar>(schema: &Schema, cells: &Matrix<F>, row_scores: &[F], k: usize) -> Result<Self> {
        let mut idx: Vec<usize> = (0..row_scores.len()).collect();
        idx.sort_by(|&a, &b| {
            row_scores[b]
                .partial_cmp(&row_scores[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        idx.truncate(k);
        Self::new(schema, cells, Some(&idx))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Wide CSV of reconstructed values; categorical cells hold class labels.
pub fn write_x_hat<F: Scalar, W: Write>(
    writer: W,
    schema: &Schema,
    dictionaries: &[Option<Vec<String>>],
    recon: &ReconstructionResult<F>,
) -> Result<()> {
    check_width(schema, &recon.x_hat)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(schema.names())?;
    for i in 0..recon.x_hat.rows() {
        let record: Vec<String> = (0..schema.n_features())
            .map(|j| {
                let v = recon.x_hat.get(i, j);
                match (schema.kind(j), dictionaries.get(j).and_then(|d| d.as_ref())) {
                    (FeatureKind::Categorical, Some(dict)) => v
                        .to_usize()
                        .and_then(|c| dict.get(c).cloned())
                        .unwrap_or_else(|| v.to_string()),
                    _ => v.to_string(),
                }
            })
            .collect();
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// Wide CSV of per-cell uncertainty.
pub fn write_uncertainty<F: Scalar, W: Write>(writer: W, schema: &Schema, u: &Matrix<F>) -> Result<()> {
    check_width(schema, u)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(schema.names())?;
    for i in 0..u.rows() {
        w.write_record(u.row(i).iter().map(ToString::to_string))?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// Long CSV `row,feature,category,probability` over categorical features.
pub fn write_cat_probabilities<F: Scalar, W: Write>(
    writer: W,
    schema: &Schema,
    dictionaries: &[Option<Vec<String>>],
    recon: &ReconstructionResult<F>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["row", "feature", "category", "probability"])?;
    let m = recon.x_hat.rows();
    for i in 0..m {
        for (j, p) in recon.proba.iter().enumerate() {
            let Some(p) = p else { continue };
            let dict = dictionaries.get(j).and_then(|d| d.as_ref());
            for (c, v) in p.row(i).iter().enumerate() {
                let label = dict.and_then(|d| d.get(c).cloned()).unwrap_or_else(|| c.to_string());
                w.write_record([i.to_string(), schema.name(j).to_string(), label, v.to_string()])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}
