//! Mixed-type tables: schema, CSV ingestion, schema inference, evaluation
//! splits and training-column quantiles.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::rng_for;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numerical,
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: FeatureKind,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: FeatureKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

/// Ordered feature columns plus an optional label column that is kept out of
/// the feature table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    columns: Vec<ColumnSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label_column: Option<String>,
}

/// One entry of the JSON schema sidecar. `kind` is `numerical`,
/// `categorical` or `label`.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct SidecarEntry {
    name: String,
    kind: String,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>, label_column: Option<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::DuplicateColumn(c.name.clone()));
            }
        }
        if let Some(label) = &label_column {
            if seen.contains(label.as_str()) {
                return Err(Error::DuplicateColumn(label.clone()));
            }
        }
        if columns.len() < 2 {
            return Err(Error::Schema(format!(
                "at least 2 feature columns are required, found {}",
                columns.len()
            )));
        }
        Ok(Self { columns, label_column })
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn kind(&self, feature: usize) -> FeatureKind {
        self.columns[feature].kind
    }

    pub fn name(&self, feature: usize) -> &str {
        &self.columns[feature].name
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn label_column(&self) -> Option<&str> {
        self.label_column.as_deref()
    }

    pub fn with_label(mut self, label: Option<String>) -> Result<Self> {
        self.label_column = label;
        Self::new(self.columns, self.label_column)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Checks that `other` declares the same feature names, order and kinds.
    /// Label columns are ignored.
    pub fn ensure_compatible(&self, other: &Schema) -> Result<()> {
        if self.columns.len() != other.columns.len() {
            return Err(Error::SchemaMismatch(format!(
                "expected {} features, found {}",
                self.columns.len(),
                other.columns.len()
            )));
        }
        for (j, (a, b)) in self.columns.iter().zip(&other.columns).enumerate() {
            if a.name != b.name {
                return Err(Error::SchemaMismatch(format!(
                    "feature {j}: expected name {:?}, found {:?}",
                    a.name, b.name
                )));
            }
            if a.kind != b.kind {
                return Err(Error::SchemaMismatch(format!(
                    "feature {:?}: expected {:?}, found {:?}",
                    a.name, a.kind, b.kind
                )));
            }
        }
        Ok(())
    }

    pub fn from_sidecar_json(text: &str) -> Result<Self> {
        let entries: Vec<SidecarEntry> = serde_json::from_str(text)?;
        let mut columns = Vec::new();
        let mut label = None;
        for e in entries {
            match e.kind.to_ascii_lowercase().as_str() {
                "numerical" | "numeric" => columns.push(ColumnSpec::new(e.name, FeatureKind::Numerical)),
                "categorical" => columns.push(ColumnSpec::new(e.name, FeatureKind::Categorical)),
                "label" => {
                    if label.replace(e.name).is_some() {
                        return Err(Error::Schema("more than one label column".into()));
                    }
                }
                other => return Err(Error::Schema(format!("column {:?}: unknown kind {other:?}", e.name))),
            }
        }
        Self::new(columns, label)
    }

    pub fn to_sidecar_json(&self) -> Result<String> {
        let mut entries: Vec<SidecarEntry> = self
            .columns
            .iter()
            .map(|c| SidecarEntry {
                name: c.name.clone(),
                kind: match c.kind {
                    FeatureKind::Numerical => "numerical".into(),
                    FeatureKind::Categorical => "categorical".into(),
                },
            })
            .collect();
        if let Some(label) = &self.label_column {
            entries.push(SidecarEntry {
                name: label.clone(),
                kind: "label".into(),
            });
        }
        Ok(serde_json::to_string_pretty(&entries)?)
    }

    pub fn load_sidecar(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_sidecar_json(&text)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Column<F> {
    Numerical(Vec<F>),
    Categorical { ids: Vec<u32>, dictionary: Vec<String> },
}

impl<F> Column<F> {
    pub fn len(&self) -> usize {
        match self {
            Column::Numerical(v) => v.len(),
            Column::Categorical { ids, .. } => ids.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> FeatureKind {
        match self {
            Column::Numerical(_) => FeatureKind::Numerical,
            Column::Categorical { .. } => FeatureKind::Categorical,
        }
    }
}

/// Column-oriented, immutable mixed-type table. Labels are never stored here.
#[derive(Clone, Debug, PartialEq)]
pub struct Table<F> {
    schema: Schema,
    columns: Vec<Column<F>>,
    n_rows: usize,
}

/// Random access to the feature values of one row.
pub trait RowAccess<F> {
    fn numeric(&self, feature: usize) -> F;
    fn category(&self, feature: usize) -> u32;
}

#[derive(Clone, Copy)]
pub struct TableRow<'a, F> {
    table: &'a Table<F>,
    row: usize,
}

impl<F: Copy> RowAccess<F> for TableRow<'_, F> {
    #[inline]
    fn numeric(&self, feature: usize) -> F {
        match &self.table.columns[feature] {
            Column::Numerical(v) => v[self.row],
            Column::Categorical { .. } => panic!("feature {feature} is categorical"),
        }
    }

    #[inline]
    fn category(&self, feature: usize) -> u32 {
        match &self.table.columns[feature] {
            Column::Categorical { ids, .. } => ids[self.row],
            Column::Numerical(_) => panic!("feature {feature} is numerical"),
        }
    }
}

impl<F: Scalar> Table<F> {
    pub fn from_columns(schema: Schema, columns: Vec<Column<F>>) -> Result<Self> {
        if columns.len() != schema.n_features() {
            return Err(Error::Schema(format!(
                "schema declares {} features but {} columns were supplied",
                schema.n_features(),
                columns.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Column::len);
        for (j, col) in columns.iter().enumerate() {
            let name = schema.name(j);
            if col.kind() != schema.kind(j) {
                return Err(Error::Schema(format!("column {name:?} has the wrong kind")));
            }
            if col.len() != n_rows {
                return Err(Error::Schema(format!(
                    "column {name:?} has {} rows, expected {n_rows}",
                    col.len()
                )));
            }
            match col {
                Column::Numerical(v) => {
                    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                        return Err(Error::Input(format!(
                            "non-finite value at row {}, column {name}",
                            i + 1
                        )));
                    }
                }
                Column::Categorical { ids, dictionary } => {
                    if ids.iter().any(|&id| id as usize >= dictionary.len()) {
                        return Err(Error::Schema(format!(
                            "column {name:?} has a category id outside its dictionary"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            schema,
            columns,
            n_rows,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, feature: usize) -> &Column<F> {
        &self.columns[feature]
    }

    pub fn columns(&self) -> &[Column<F>] {
        &self.columns
    }

    pub fn numeric(&self, feature: usize) -> Option<&[F]> {
        match &self.columns[feature] {
            Column::Numerical(v) => Some(v),
            Column::Categorical { .. } => None,
        }
    }

    pub fn categories(&self, feature: usize) -> Option<(&[u32], &[String])> {
        match &self.columns[feature] {
            Column::Categorical { ids, dictionary } => Some((ids, dictionary)),
            Column::Numerical(_) => None,
        }
    }

    pub fn dictionary(&self, feature: usize) -> Option<&[String]> {
        self.categories(feature).map(|(_, d)| d)
    }

    pub fn row(&self, row: usize) -> TableRow<'_, F> {
        debug_assert!(row < self.n_rows);
        TableRow { table: self, row }
    }

    /// New table holding `rows` in the given order. Dictionaries are kept
    /// whole so category ids stay comparable with the source.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let columns = self
            .columns
            .iter()
            .map(|c| match c {
                Column::Numerical(v) => Column::Numerical(rows.iter().map(|&i| v[i]).collect()),
                Column::Categorical { ids, dictionary } => Column::Categorical {
                    ids: rows.iter().map(|&i| ids[i]).collect(),
                    dictionary: dictionary.clone(),
                },
            })
            .collect();
        Self {
            schema: self.schema.clone(),
            columns,
            n_rows: rows.len(),
        }
    }

    /// Re-expresses categorical ids against `reference` dictionaries (one
    /// entry per feature, `None` for numerical). Values missing from a
    /// reference dictionary get ids past its end, in first-occurrence order.
    pub fn recode(&self, reference: &[Option<Vec<String>>]) -> Result<Self> {
        if reference.len() != self.n_features() {
            return Err(Error::SchemaMismatch(format!(
                "expected {} dictionaries, found {}",
                self.n_features(),
                reference.len()
            )));
        }
        let mut columns = Vec::with_capacity(self.columns.len());
        for (col, reference) in self.columns.iter().zip(reference) {
            match (col, reference) {
                (Column::Numerical(v), None) => columns.push(Column::Numerical(v.clone())),
                (Column::Categorical { ids, dictionary }, Some(refdict)) => {
                    if dictionary == refdict {
                        columns.push(col.clone());
                        continue;
                    }
                    let mut out_dict = refdict.clone();
                    let mut index: HashMap<&str, u32> = refdict
                        .iter()
                        .enumerate()
                        .map(|(i, s)| (s.as_str(), i as u32))
                        .collect();
                    let mut mapping = Vec::with_capacity(dictionary.len());
                    for s in dictionary {
                        let id = match index.get(s.as_str()) {
                            Some(&id) => id,
                            None => {
                                let id = out_dict.len() as u32;
                                out_dict.push(s.clone());
                                id
                            }
                        };
                        mapping.push(id);
                    }
                    index.clear();
                    columns.push(Column::Categorical {
                        ids: ids.iter().map(|&i| mapping[i as usize]).collect(),
                        dictionary: out_dict,
                    });
                }
                _ => {
                    return Err(Error::SchemaMismatch(
                        "dictionary layout does not match column kinds".into(),
                    ))
                }
            }
        }
        Ok(Self {
            schema: self.schema.clone(),
            columns,
            n_rows: self.n_rows,
        })
    }

    pub fn dictionaries(&self) -> Vec<Option<Vec<String>>> {
        self.columns
            .iter()
            .map(|c| match c {
                Column::Categorical { dictionary, .. } => Some(dictionary.clone()),
                Column::Numerical(_) => None,
            })
            .collect()
    }

    /// Writes the table (and optional 0/1 labels as a trailing column named
    /// after the schema's label column, or `label`) as CSV.
    pub fn write_csv<W: Write>(&self, writer: W, labels: Option<&[bool]>) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = self.schema.names();
        if labels.is_some() {
            header.push(self.schema.label_column().unwrap_or("label").to_string());
        }
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.n_rows {
            record.clear();
            for col in &self.columns {
                record.push(match col {
                    Column::Numerical(v) => v[i].to_string(),
                    Column::Categorical { ids, dictionary } => dictionary[ids[i] as usize].clone(),
                });
            }
            if let Some(labels) = labels {
                record.push(if labels[i] { "1".into() } else { "0".into() });
            }
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }
}

/// A loaded table plus the label vector when the schema names a label column.
#[derive(Clone, Debug)]
pub struct LabeledTable<F> {
    pub table: Table<F>,
    pub labels: Option<Vec<bool>>,
}

fn parse_label(raw: &str, row: usize, column: &str) -> Result<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "anomaly" | "outlier" | "yes" => Ok(true),
        "0" | "false" | "normal" | "inlier" | "no" => Ok(false),
        "" => Err(Error::MissingValue {
            row,
            column: column.to_string(),
        }),
        _ => Err(Error::Input(format!(
            "unrecognised label {raw:?} at row {row}, column {column}"
        ))),
    }
}

fn read_records<R: Read>(reader: R) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let mut seen = HashSet::new();
    for h in &header {
        if !seen.insert(h.as_str()) {
            return Err(Error::DuplicateColumn(h.clone()));
        }
    }
    let records = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((header, records))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Reads CSV text typed by `schema`. Without a schema, one is inferred with
/// default options.
pub fn read_table<F: Scalar, R: Read>(reader: R, schema: Option<&Schema>) -> Result<LabeledTable<F>> {
    let (header, records) = read_records(reader)?;
    let schema = match schema {
        Some(s) => s.clone(),
        None => infer_from_records::<F>(&header, &records, &InferOptions::default())?,
    };
    let mut positions = Vec::with_capacity(schema.n_features());
    for c in schema.columns() {
        let p = header
            .iter()
            .position(|h| *h == c.name)
            .ok_or_else(|| Error::SchemaMismatch(format!("column {:?} not found in CSV header", c.name)))?;
        positions.push(p);
    }
    let label_pos = match schema.label_column() {
        Some(l) => Some(
            header
                .iter()
                .position(|h| h == l)
                .ok_or_else(|| Error::SchemaMismatch(format!("label column {l:?} not found in CSV header")))?,
        ),
        None => None,
    };
    let expected = schema.n_features() + usize::from(label_pos.is_some());
    if header.len() != expected {
        let extra: Vec<&String> = header
            .iter()
            .filter(|h| schema.position(h).is_none() && Some(h.as_str()) != schema.label_column())
            .collect();
        return Err(Error::SchemaMismatch(format!(
            "CSV has columns not declared in the schema: {extra:?}"
        )));
    }
    let feature_order: Vec<usize> = {
        let mut sorted = positions.clone();
        sorted.sort_unstable();
        sorted
    };
    if feature_order != positions {
        return Err(Error::SchemaMismatch("CSV column order differs from the schema".into()));
    }

    let mut columns: Vec<Column<F>> = schema
        .columns()
        .iter()
        .map(|c| match c.kind {
            FeatureKind::Numerical => Column::Numerical(Vec::with_capacity(records.len())),
            FeatureKind::Categorical => Column::Categorical {
                ids: Vec::with_capacity(records.len()),
                dictionary: Vec::new(),
            },
        })
        .collect();
    let mut lookups: Vec<HashMap<String, u32>> = vec![HashMap::new(); columns.len()];
    let mut labels = label_pos.map(|_| Vec::with_capacity(records.len()));

    for (r, rec) in records.iter().enumerate() {
        let row = r + 1;
        for (j, (&p, col)) in positions.iter().zip(columns.iter_mut()).enumerate() {
            let name = schema.name(j);
            let raw = rec.get(p).unwrap_or("").trim();
            if raw.is_empty() {
                return Err(Error::MissingValue {
                    row,
                    column: name.to_string(),
                });
            }
            match col {
                Column::Numerical(v) => {
                    let x = raw
                        .parse::<F>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::ParseNumber {
                            row,
                            column: name.to_string(),
                            value: raw.to_string(),
                        })?;
                    v.push(x);
                }
                Column::Categorical { ids, dictionary } => {
                    let lookup = &mut lookups[j];
                    let id = match lookup.get(raw) {
                        Some(&id) => id,
                        None => {
                            let id = dictionary.len() as u32;
                            dictionary.push(raw.to_string());
                            lookup.insert(raw.to_string(), id);
                            id
                        }
                    };
                    ids.push(id);
                }
            }
        }
        if let (Some(p), Some(labels)) = (label_pos, labels.as_mut()) {
            let label = schema.label_column().unwrap_or_default();
            labels.push(parse_label(rec.get(p).unwrap_or(""), row, label)?);
        }
    }
    Ok(LabeledTable {
        table: Table::from_columns(schema, columns)?,
        labels,
    })
}

pub fn load_table<F: Scalar>(path: impl AsRef<Path>, schema: Option<&Schema>) -> Result<LabeledTable<F>> {
    read_table(open(path.as_ref())?, schema)
}

#[derive(Clone, Debug, Default)]
pub struct InferOptions {
    /// Column excluded from the features and parsed as labels.
    pub label_column: Option<String>,
    /// Explicit override: numeric columns holding only integers with at most
    /// this many distinct values are typed categorical. `None` disables it.
    pub categorical_max_cardinality: Option<usize>,
    /// Columns forced categorical regardless of content.
    pub force_categorical: Vec<String>,
}

fn infer_from_records<F: Scalar>(
    header: &[String],
    records: &[csv::StringRecord],
    options: &InferOptions,
) -> Result<Schema> {
    if header.is_empty() || records.is_empty() {
        return Err(Error::Input("empty CSV file".into()));
    }
    let mut columns = Vec::new();
    for (p, name) in header.iter().enumerate() {
        if Some(name.as_str()) == options.label_column.as_deref() {
            continue;
        }
        let cells = records.iter().map(|r| r.get(p).unwrap_or("").trim());
        let mut numeric = true;
        let mut integral = true;
        let mut distinct = HashSet::new();
        for cell in cells {
            match cell.parse::<F>() {
                Ok(x) if x.is_finite() => {
                    if x.fract() != F::zero() {
                        integral = false;
                    }
                    if distinct.len() <= options.categorical_max_cardinality.unwrap_or(0) {
                        distinct.insert(cell.to_string());
                    }
                }
                _ => {
                    numeric = false;
                    break;
                }
            }
        }
        let forced = options.force_categorical.iter().any(|f| f == name)
            || matches!(options.categorical_max_cardinality,
                Some(k) if numeric && integral && distinct.len() <= k);
        let kind = if numeric && !forced {
            FeatureKind::Numerical
        } else {
            FeatureKind::Categorical
        };
        columns.push(ColumnSpec::new(name.clone(), kind));
    }
    if let Some(label) = &options.label_column {
        if !header.contains(label) {
            return Err(Error::Schema(format!("label column {label:?} not in header")));
        }
    }
    Schema::new(columns, options.label_column.clone())
}

/// Types each column numerical iff every cell parses as a finite real.
pub fn infer_schema<F: Scalar>(path: impl AsRef<Path>, options: &InferOptions) -> Result<Schema> {
    let (header, records) = read_records(open(path.as_ref())?)?;
    infer_from_records::<F>(&header, &records, options)
}

pub fn infer_schema_from_reader<F: Scalar, R: Read>(reader: R, options: &InferOptions) -> Result<Schema> {
    let (header, records) = read_records(reader)?;
    infer_from_records::<F>(&header, &records, options)
}

/// Train/test partition following the label-free protocol: training rows are
/// drawn from normal rows only.
#[derive(Clone, Debug)]
pub struct EvalSplit<F> {
    pub train: Table<F>,
    pub test: Table<F>,
    pub test_labels: Vec<bool>,
    pub train_row_ids: Vec<usize>,
    pub test_row_ids: Vec<usize>,
    pub seed: u64,
    pub train_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub train_fraction: f64,
    pub train_row_ids: Vec<usize>,
    pub test_row_ids: Vec<usize>,
}

impl<F> EvalSplit<F> {
    pub fn manifest(&self) -> SplitManifest {
        SplitManifest {
            seed: self.seed,
            train_fraction: self.train_fraction,
            train_row_ids: self.train_row_ids.clone(),
            test_row_ids: self.test_row_ids.clone(),
        }
    }
}

/// `⌊fraction · n⌋`, tolerant of representation error in the product.
pub(crate) fn floor_fraction(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 1e-9).floor() as usize
}

pub fn split_for_eval<F: Scalar>(
    table: &Table<F>,
    labels: &[bool],
    train_fraction: f64,
    seed: u64,
) -> Result<EvalSplit<F>> {
    if labels.len() != table.n_rows() {
        return Err(Error::Input(format!(
            "{} labels for {} rows",
            labels.len(),
            table.n_rows()
        )));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut normals: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if normals.is_empty() {
        return Err(Error::Input("no normal rows to train on".into()));
    }
    let n_train = floor_fraction(train_fraction, normals.len());
    if n_train == 0 {
        return Err(Error::Input(format!(
            "train fraction {train_fraction} of {} normal rows leaves an empty training set",
            normals.len()
        )));
    }
    let mut rng = rng_for(seed, 0);
    normals.shuffle(&mut rng);
    let mut train_row_ids = normals[..n_train].to_vec();
    train_row_ids.sort_unstable();
    let in_train: HashSet<usize> = train_row_ids.iter().copied().collect();
    let test_row_ids: Vec<usize> = (0..labels.len()).filter(|i| !in_train.contains(i)).collect();
    if test_row_ids.is_empty() {
        return Err(Error::Input("split leaves an empty test set".into()));
    }
    Ok(EvalSplit {
        train: table.select_rows(&train_row_ids),
        test: table.select_rows(&test_row_ids),
        test_labels: test_row_ids.iter().map(|&i| labels[i]).collect(),
        train_row_ids,
        test_row_ids,
        seed,
        train_fraction,
    })
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile_sorted<F: Scalar>(sorted: &[F], q: F) -> F {
    let n = sorted.len();
    debug_assert!(n > 0);
    let h = F::from_count(n - 1) * q;
    let lo = h.floor();
    let k = lo.to_usize().unwrap_or(0);
    if k + 1 >= n {
        return sorted[n - 1];
    }
    sorted[k] + (h - lo) * (sorted[k + 1] - sorted[k])
}

/// Sorted copies of the training numerical columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileProfile<F> {
    columns: Vec<Option<Vec<F>>>,
}

impl<F: Scalar> QuantileProfile<F> {
    pub fn from_table(table: &Table<F>) -> Result<Self> {
        if table.n_rows() == 0 {
            return Err(Error::Input("quantile profile of an empty table".into()));
        }
        let columns = table
            .columns()
            .iter()
            .map(|c| match c {
                Column::Numerical(v) => {
                    let mut s = v.clone();
                    s.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
                    Some(s)
                }
                Column::Categorical { .. } => None,
            })
            .collect();
        Ok(Self { columns })
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn sorted(&self, feature: usize) -> Option<&[F]> {
        self.columns.get(feature).and_then(|c| c.as_deref())
    }

    pub fn quantile(&self, feature: usize, q: F) -> Result<F> {
        if !(q >= F::zero() && q <= F::one()) {
            return Err(Error::Input(format!("quantile level {q} outside [0, 1]")));
        }
        let sorted = self
            .sorted(feature)
            .ok_or_else(|| Error::Input(format!("feature {feature} is not numerical")))?;
        Ok(quantile_sorted(sorted, q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab_schema() -> Schema {
        Schema::new(
            vec![
                ColumnSpec::new("a", FeatureKind::Numerical),
                ColumnSpec::new("b", FeatureKind::Categorical),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn loads_mixed_csv() {
        let t: LabeledTable<f64> = read_table("a,b\n1,x\n2,y\n3,x".as_bytes(), Some(&ab_schema())).unwrap();
        assert_eq!(t.table.n_rows(), 3);
        assert_eq!(t.table.dictionary(1).unwrap(), ["x", "y"]);
        assert_eq!(t.table.categories(1).unwrap().0, [0, 1, 0]);
        assert_eq!(t.table.numeric(0).unwrap(), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn missing_cell_is_named() {
        let err = read_table::<f64, _>("a,b\n1,x\n,y\n3,x".as_bytes(), Some(&ab_schema())).unwrap_err();
        assert_eq!(err.to_string(), "missing value at row 2, column a");
    }

    #[test]
    fn duplicate_header_rejected() {
        let err = read_table::<f64, _>("a,a\n1,2\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::DuplicateColumn(ref n) if n == "a"));
    }

    #[test]
    fn bad_number_rejected() {
        let err = read_table::<f64, _>("a,b\n1,x\nfoo,y\n".as_bytes(), Some(&ab_schema())).unwrap_err();
        assert!(matches!(err, Error::ParseNumber { row: 2, .. }));
        let err = read_table::<f64, _>("a,b\n1,x\ninf,y\n".as_bytes(), Some(&ab_schema())).unwrap_err();
        assert!(matches!(err, Error::ParseNumber { .. }));
    }

    #[test]
    fn infers_kinds() {
        let s =
            infer_schema_from_reader::<f64, _>("n,c\n1.5,red\n2.0,blue\n3,red\n".as_bytes(), &InferOptions::default())
                .unwrap();
        assert_eq!(s.kind(0), FeatureKind::Numerical);
        assert_eq!(s.kind(1), FeatureKind::Categorical);
    }

    #[test]
    fn inference_never_reclassifies_without_override() {
        let csv = "k,v\n1,0.5\n2,0.7\n1,0.1\n";
        let s = infer_schema_from_reader::<f64, _>(csv.as_bytes(), &InferOptions::default()).unwrap();
        assert_eq!(s.kind(0), FeatureKind::Numerical);
        let opts = InferOptions {
            categorical_max_cardinality: Some(2),
            ..Default::default()
        };
        let s = infer_schema_from_reader::<f64, _>(csv.as_bytes(), &opts).unwrap();
        assert_eq!(s.kind(0), FeatureKind::Categorical);
        assert_eq!(s.kind(1), FeatureKind::Numerical);
    }

    #[test]
    fn single_column_rejected() {
        assert!(infer_schema_from_reader::<f64, _>("a\n1\n2\n".as_bytes(), &InferOptions::default()).is_err());
        assert!(infer_schema_from_reader::<f64, _>("".as_bytes(), &InferOptions::default()).is_err());
    }

    #[test]
    fn label_column_split_off() {
        let schema = ab_schema().with_label(Some("y".into())).unwrap();
        let t: LabeledTable<f64> = read_table("a,b,y\n1,x,0\n2,y,1\n".as_bytes(), Some(&schema)).unwrap();
        assert_eq!(t.table.n_features(), 2);
        assert_eq!(t.labels.unwrap(), [false, true]);
    }

    #[test]
    fn sidecar_round_trip() {
        let schema = ab_schema().with_label(Some("y".into())).unwrap();
        let json = schema.to_sidecar_json().unwrap();
        assert_eq!(Schema::from_sidecar_json(&json).unwrap(), schema);
    }

    #[test]
    fn csv_round_trip_preserves_table() {
        let csv = "a,b\n1.25,q\n-3,p\n0.1,q\n7e-5,r\n";
        let t: Table<f64> = read_table(csv.as_bytes(), Some(&ab_schema())).unwrap().table;
        let mut buf = Vec::new();
        t.write_csv(&mut buf, None).unwrap();
        let back: Table<f64> = read_table(buf.as_slice(), Some(&ab_schema())).unwrap().table;
        assert_eq!(t, back);
    }

    #[test]
    fn recode_maps_unseen_past_reference() {
        let t: Table<f64> = read_table("a,b\n1,z\n2,x\n".as_bytes(), Some(&ab_schema()))
            .unwrap()
            .table;
        let reference = vec![None, Some(vec!["x".to_string(), "y".to_string()])];
        let r = t.recode(&reference).unwrap();
        assert_eq!(r.categories(1).unwrap().0, [2, 0]);
        assert_eq!(r.dictionary(1).unwrap(), ["x", "y", "z"]);
    }

    fn split_table(n: usize) -> Table<f64> {
        let schema = Schema::new(
            vec![
                ColumnSpec::new("a", FeatureKind::Numerical),
                ColumnSpec::new("b", FeatureKind::Numerical),
            ],
            None,
        )
        .unwrap();
        let a: Vec<f64> = (0..n).map(|i| i as f64).collect();
        Table::from_columns(schema, vec![Column::Numerical(a.clone()), Column::Numerical(a)]).unwrap()
    }

    #[test]
    fn split_counts() {
        let t = split_table(12);
        let mut labels = vec![false; 12];
        labels[3] = true;
        labels[9] = true;
        let s = split_for_eval(&t, &labels, 0.5, 7).unwrap();
        assert_eq!(s.train.n_rows(), 5);
        assert!(s.train_row_ids.iter().all(|&i| !labels[i]));
        assert_eq!(s.test.n_rows(), 7);
        assert_eq!(s.test_labels.iter().filter(|&&l| l).count(), 2);
        let s2 = split_for_eval(&t, &labels, 0.5, 7).unwrap();
        assert_eq!(s.manifest(), s2.manifest());
    }

    #[test]
    fn split_errors() {
        let t = split_table(4);
        assert!(split_for_eval(&t, &[true; 4], 0.5, 1).is_err());
        assert!(split_for_eval(&t, &[false; 3], 0.5, 1).is_err());
        assert!(split_for_eval(&t, &[false, true, true, true], 0.5, 1).is_err());
        assert!(split_for_eval(&t, &[false; 4], 1.0, 1).is_err());
    }

    #[test]
    fn quantile_examples() {
        let q = |v: &[f64], p: f64| quantile_sorted(v, p);
        assert_eq!(q(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(q(&[1.0, 2.0, 3.0, 4.0], 0.0), 1.0);
        assert_eq!(q(&[1.0, 2.0, 3.0, 4.0], 1.0), 4.0);
        for p in [0.0, 0.3, 0.77, 1.0] {
            assert_eq!(q(&[7.0, 7.0, 7.0], p), 7.0);
        }
        assert_eq!(quantile_sorted(&[1.0f32, 2.0, 3.0, 4.0], 0.5), 2.5);
    }

    #[test]
    fn quantile_profile_errors() {
        let t: Table<f64> = read_table("a,b\n1,x\n2,y\n".as_bytes(), Some(&ab_schema()))
            .unwrap()
            .table;
        let p = QuantileProfile::from_table(&t).unwrap();
        assert!(p.quantile(1, 0.5).is_err());
        assert!(p.quantile(0, 1.5).is_err());
        assert!(p.quantile(0, -0.1).is_err());
        assert_eq!(p.quantile(0, 0.5).unwrap(), 1.5);
    }
}
