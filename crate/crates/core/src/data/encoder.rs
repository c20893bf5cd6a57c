//! Categorical expansion plus feature-wise and record-wise normalization.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::table::{ColumnKind, FeatureSchema, NumericKind, RawColumn, RawTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Real,
    Synthetic,
}

/// Fully numeric design matrix with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    pub feature_names: Vec<String>,
    pub values: Array2<f64>,
    pub labels: Vec<u8>,
    pub provenance: Vec<Provenance>,
    pub warnings: Vec<String>,
}

impl EncodedMatrix {
    pub fn new(feature_names: Vec<String>, values: Array2<f64>, labels: Vec<u8>) -> Result<Self> {
        if values.nrows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} rows but {} labels",
                values.nrows(),
                labels.len()
            )));
        }
        if values.ncols() != feature_names.len() {
            return Err(Error::Shape(format!(
                "{} columns but {} feature names",
                values.ncols(),
                feature_names.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Shape(format!("label {l} is not in {{0,1}}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(
                "encoded matrix contains non-finite values".into(),
            ));
        }
        let n = labels.len();
        Ok(Self {
            feature_names,
            values,
            labels,
            provenance: vec![Provenance::Real; n],
            warnings: Vec::new(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - pos, pos]
    }

    /// Rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            values: self.values.select(ndarray::Axis(0), rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            provenance: rows.iter().map(|&r| self.provenance[r]).collect(),
            warnings: self.warnings.clone(),
        }
    }

    /// Columns in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            feature_names: cols
                .iter()
                .map(|&c| self.feature_names[c].clone())
                .collect(),
            values: self.values.select(ndarray::Axis(1), cols),
            labels: self.labels.clone(),
            provenance: self.provenance.clone(),
            warnings: self.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ColumnEncoder {
    /// z-score with training mean/sd, then min-max over the training z-scores.
    Continuous {
        name: String,
        mean: f64,
        std_dev: f64,
        z_min: f64,
        z_max: f64,
        /// Zero variance on training rows; encodes to 0.5.
        constant: bool,
    },
    /// Already 0/1; clipped into [0,1].
    Binary {
        name: String,
    },
    Categorical {
        name: String,
        /// Every value seen during fitting.
        values: Vec<String>,
        /// value -> output offset within this column's group.
        columns: BTreeMap<String, usize>,
        width: usize,
    },
    Ignored {
        name: String,
    },
}

impl ColumnEncoder {
    fn width(&self) -> usize {
        match self {
            Self::Continuous { .. } | Self::Binary { .. } => 1,
            Self::Categorical { width, .. } => *width,
            Self::Ignored { .. } => 0,
        }
    }
}

/// Everything needed to encode a row without re-reading training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderState {
    pub columns: Vec<ColumnEncoder>,
    pub feature_names: Vec<String>,
    pub record_norm: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl EncoderState {
    pub fn n_encoded(&self) -> usize {
        self.feature_names.len()
    }

    /// SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("encoder state serializes");
        hex::encode(Sha256::digest(&json))
    }
}

pub fn fit_encoder(
    table: &RawTable,
    schema: &FeatureSchema,
    train_indices: &[usize],
    record_norm: bool,
) -> Result<EncoderState> {
    if train_indices.is_empty() {
        return Err(Error::Schema(
            "cannot fit encoder on zero training rows".into(),
        ));
    }
    if table.columns.len() != schema.columns.len() {
        return Err(Error::Shape(format!(
            "table has {} columns, schema {}",
            table.columns.len(),
            schema.columns.len()
        )));
    }
    let mut warnings = Vec::new();
    let mut columns = Vec::with_capacity(schema.columns.len());
    for (spec, raw) in schema.columns.iter().zip(&table.columns) {
        let name = spec.name.clone();
        let enc = match (&spec.kind, raw) {
            (
                ColumnKind::Numeric {
                    numeric: NumericKind::Binary,
                },
                RawColumn::Numeric(_),
            ) => ColumnEncoder::Binary { name },
            (
                ColumnKind::Numeric {
                    numeric: NumericKind::Continuous,
                },
                RawColumn::Numeric(v),
            ) => {
                let n = train_indices.len() as f64;
                let mean = train_indices.iter().map(|&i| v[i]).sum::<f64>() / n;
                let var = train_indices
                    .iter()
                    .map(|&i| (v[i] - mean).powi(2))
                    .sum::<f64>()
                    / n;
                let std_dev = var.sqrt();
                if std_dev == 0.0 || !std_dev.is_finite() {
                    let msg = format!("column '{name}' has zero variance on training rows; encoded as constant 0.5");
                    log::warn!("{msg}");
                    warnings.push(msg);
                    ColumnEncoder::Continuous {
                        name,
                        mean,
                        std_dev: 0.0,
                        z_min: 0.0,
                        z_max: 0.0,
                        constant: true,
                    }
                } else {
                    let (mut z_min, mut z_max) = (f64::INFINITY, f64::NEG_INFINITY);
                    for &i in train_indices {
                        let z = (v[i] - mean) / std_dev;
                        z_min = z_min.min(z);
                        z_max = z_max.max(z);
                    }
                    let constant = z_max <= z_min;
                    ColumnEncoder::Continuous {
                        name,
                        mean,
                        std_dev,
                        z_min,
                        z_max,
                        constant,
                    }
                }
            }
            (ColumnKind::Categorical { values, .. }, RawColumn::Text(_)) => {
                let columns = if values.len() == 2 {
                    BTreeMap::from([(values[1].clone(), 0)])
                } else {
                    values
                        .iter()
                        .enumerate()
                        .map(|(k, v)| (v.clone(), k))
                        .collect()
                };
                ColumnEncoder::Categorical {
                    name,
                    values: values.clone(),
                    columns,
                    width: spec.width(),
                }
            }
            (ColumnKind::Ignored, _) => ColumnEncoder::Ignored { name },
            (kind, _) => {
                return Err(Error::Schema(format!(
                    "column '{name}' of kind {kind:?} does not match its loaded values"
                )))
            }
        };
        columns.push(enc);
    }
    Ok(EncoderState {
        columns,
        feature_names: schema.feature_names(),
        record_norm,
        warnings,
    })
}

pub fn encode(table: &RawTable, state: &EncoderState) -> Result<EncodedMatrix> {
    if table.columns.len() != state.columns.len() {
        return Err(Error::Shape(format!(
            "table has {} columns, encoder {}",
            table.columns.len(),
            state.columns.len()
        )));
    }
    let n = table.n_rows();
    let width: usize = state.columns.iter().map(ColumnEncoder::width).sum();
    let mut values = Array2::<f64>::zeros((n, width));
    let mut warnings = Vec::new();
    let mut offset = 0;
    for (enc, raw) in state.columns.iter().zip(&table.columns) {
        match (enc, raw) {
            (
                ColumnEncoder::Continuous {
                    mean,
                    std_dev,
                    z_min,
                    z_max,
                    constant,
                    ..
                },
                RawColumn::Numeric(v),
            ) => {
                for (i, &x) in v.iter().enumerate() {
                    values[[i, offset]] = if *constant {
                        0.5
                    } else {
                        let z = (x - mean) / std_dev;
                        ((z - z_min) / (z_max - z_min)).clamp(0.0, 1.0)
                    };
                }
            }
            (ColumnEncoder::Binary { .. }, RawColumn::Numeric(v)) => {
                for (i, &x) in v.iter().enumerate() {
                    values[[i, offset]] = x.clamp(0.0, 1.0);
                }
            }
            (
                ColumnEncoder::Categorical {
                    name,
                    values: known,
                    columns,
                    ..
                },
                RawColumn::Text(v),
            ) => {
                for (i, x) in v.iter().enumerate() {
                    if let Some(&k) = columns.get(x) {
                        values[[i, offset + k]] = 1.0;
                    } else if !known.contains(x) {
                        let msg = format!(
                            "row {i}: unseen value '{x}' in column '{name}'; group left all-zero"
                        );
                        log::warn!("{msg}");
                        warnings.push(msg);
                    }
                }
            }
            (ColumnEncoder::Ignored { .. }, _) => {}
            (enc, _) => {
                return Err(Error::Schema(format!(
                    "encoder column {enc:?} does not match the table's values"
                )))
            }
        }
        offset += enc.width();
    }

    if state.record_norm {
        normalize_records(&mut values);
    }

    let mut out = EncodedMatrix::new(state.feature_names.clone(), values, table.labels.clone())?;
    out.warnings = warnings;
    Ok(out)
}

/// Divides each row by its maximum entry; all-zero rows are left alone.
pub fn normalize_records(values: &mut Array2<f64>) {
    for mut row in values.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max > 0.0 {
            row.mapv_inplace(|v| v / max);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::table::{read_table, ColumnSpec, LoadOptions};

    fn numeric_schema(names: &[&str]) -> FeatureSchema {
        FeatureSchema {
            columns: names
                .iter()
                .map(|n| {
                    ColumnSpec::new(
                        *n,
                        ColumnKind::Numeric {
                            numeric: NumericKind::Continuous,
                        },
                    )
                })
                .collect(),
            label_column: "y".into(),
            positive_label: "1".into(),
        }
    }

    #[test]
    fn continuous_column_spans_unit_interval() {
        let schema = numeric_schema(&["x"]);
        let (table, _) = read_table(
            "x,y\n2,0\n4,1\n6,0\n".as_bytes(),
            Some(&schema),
            &LoadOptions::default(),
        )
        .unwrap();
        let state = fit_encoder(&table, &schema, &[0, 1, 2], false).unwrap();
        match &state.columns[0] {
            ColumnEncoder::Continuous { mean, std_dev, .. } => {
                assert_eq!(*mean, 4.0);
                assert!((std_dev - (8.0f64 / 3.0).sqrt()).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
        let enc = encode(&table, &state).unwrap();
        let col: Vec<f64> = enc.values.column(0).to_vec();
        assert!((col[0] - 0.0).abs() < 1e-15);
        assert!((col[1] - 0.5).abs() < 1e-15);
        assert!((col[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_row_fixture_matches_hand_computation() {
        // a: {1, 3, 8}  mean 4, sd sqrt(26/3); b: {10, 10, 40} mean 20, sd sqrt(200)
        let schema = numeric_schema(&["a", "b"]);
        let (table, _) = read_table(
            "a,b,y\n1,10,0\n3,10,1\n8,40,1\n".as_bytes(),
            Some(&schema),
            &LoadOptions::default(),
        )
        .unwrap();
        let state = fit_encoder(&table, &schema, &[0, 1, 2], false).unwrap();
        let enc = encode(&table, &state).unwrap();
        let sd_a = (26.0f64 / 3.0).sqrt();
        let za = [(1.0 - 4.0) / sd_a, (3.0 - 4.0) / sd_a, (8.0 - 4.0) / sd_a];
        let expected_a: Vec<f64> = za.iter().map(|z| (z - za[0]) / (za[2] - za[0])).collect();
        for i in 0..3 {
            assert!((enc.values[[i, 0]] - expected_a[i]).abs() < 1e-12);
        }
        // hand values: 0, 2/7, 1 and 0, 0, 1
        assert!((enc.values[[1, 0]] - 2.0 / 7.0).abs() < 1e-12);
        assert_eq!(enc.values.column(1).to_vec(), vec![0.0, 0.0, 1.0]);

        let state_norm = fit_encoder(&table, &schema, &[0, 1, 2], true).unwrap();
        let normed = encode(&table, &state_norm).unwrap();
        // row 0 is all zero and stays; row 1 = (2/7, 0) -> (1, 0); row 2 = (1, 1)
        assert_eq!(normed.values.row(0).to_vec(), vec![0.0, 0.0]);
        assert!((normed.values[[1, 0]] - 1.0).abs() < 1e-15);
        assert_eq!(normed.values.row(2).to_vec(), vec![1.0, 1.0]);
    }

    #[test]
    fn test_values_are_clipped() {
        let schema = numeric_schema(&["x"]);
        let (table, _) = read_table(
            "x,y\n2,0\n4,1\n6,0\n100,1\n-5,0\n".as_bytes(),
            Some(&schema),
            &LoadOptions::default(),
        )
        .unwrap();
        let state = fit_encoder(&table, &schema, &[0, 1, 2], false).unwrap();
        let enc = encode(&table, &state).unwrap();
        assert_eq!(enc.values[[3, 0]], 1.0);
        assert_eq!(enc.values[[4, 0]], 0.0);
    }

    #[test]
    fn zero_variance_column_is_half_with_warning() {
        let schema = numeric_schema(&["x"]);
        let (table, _) = read_table(
            "x,y\n3,0\n3,1\n3,0\n".as_bytes(),
            Some(&schema),
            &LoadOptions::default(),
        )
        .unwrap();
        let state = fit_encoder(&table, &schema, &[0, 1, 2], false).unwrap();
        assert_eq!(state.warnings.len(), 1);
        let enc = encode(&table, &state).unwrap();
        assert!(enc.values.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn identical_rows_with_record_norm_have_unit_max() {
        let csv = "a,b,c,y\n0.2,0.4,0.1,1\n0.2,0.4,0.1,0\n";
        let (table, schema) = read_table(csv.as_bytes(), None, &LoadOptions::default()).unwrap();
        // constant columns encode to 0.5 each; record-wise pass lifts the max to exactly 1
        let state = fit_encoder(&table, &schema, &[0, 1], true).unwrap();
        let enc = encode(&table, &state).unwrap();
        for row in enc.values.rows() {
            assert_eq!(row.iter().copied().fold(f64::MIN, f64::max), 1.0);
        }
    }

    #[test]
    fn one_hot_groups_and_unseen_values() {
        let csv = "plan,paper,y\nmonthly,Yes,1\nyearly,No,0\nbiyearly,Yes,0\nmonthly,No,1\n";
        let (table, schema) = read_table(csv.as_bytes(), None, &LoadOptions::default()).unwrap();
        assert_eq!(schema.n_encoded(), 4);
        let state = fit_encoder(&table, &schema, &[0, 1, 2, 3], false).unwrap();
        assert_eq!(
            state.feature_names,
            vec!["plan_biyearly", "plan_monthly", "plan_yearly", "paper"]
        );
        let enc = encode(&table, &state).unwrap();
        for row in enc.values.rows() {
            assert_eq!(row[0] + row[1] + row[2], 1.0);
        }
        assert_eq!(enc.values.column(3).to_vec(), vec![1.0, 0.0, 1.0, 0.0]);

        let (test, _) = read_table(
            "plan,paper,y\nweekly,Yes,1\n".as_bytes(),
            Some(&schema),
            &LoadOptions::default(),
        )
        .unwrap();
        let enc = encode(&test, &state).unwrap();
        assert_eq!(enc.values.row(0).to_vec(), vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(enc.warnings.len(), 1);
    }

    #[test]
    fn all_binary_schema_keeps_width() {
        let csv = "a,b,c,y\nYes,0,Male,1\nNo,1,Female,0\nYes,1,Male,0\n";
        let (table, schema) = read_table(csv.as_bytes(), None, &LoadOptions::default()).unwrap();
        let state = fit_encoder(&table, &schema, &[0, 1, 2], true).unwrap();
        assert_eq!(state.n_encoded(), 3);
        let enc = encode(&table, &state).unwrap();
        assert_eq!(enc.values.row(0).to_vec(), vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn training_statistics_ignore_test_rows() {
        let schema = numeric_schema(&["x"]);
        let clean = "x,y\n1,0\n2,1\n3,0\n4,1\n";
        let poisoned = "x,y\n1,0\n2,1\n3,0\n1e300,1\n";
        let train = [0, 1, 2];
        let (a, _) = read_table(clean.as_bytes(), Some(&schema), &LoadOptions::default()).unwrap();
        let (b, _) =
            read_table(poisoned.as_bytes(), Some(&schema), &LoadOptions::default()).unwrap();
        let sa = fit_encoder(&a, &schema, &train, true).unwrap();
        let sb = fit_encoder(&b, &schema, &train, true).unwrap();
        assert_eq!(sa, sb);
        assert_eq!(sa.hash(), sb.hash());
    }
}
