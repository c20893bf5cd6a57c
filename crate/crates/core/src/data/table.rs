//! CSV loading and column-kind inference.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Non-numeric columns with more distinct values than this are not treated as categorical.
pub const MAX_CATEGORICAL_VALUES: usize = 20;

const TRUTHY: [&str; 5] = ["1", "yes", "true", "y", "positive"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ColumnKind {
    /// Declared value set. Two-valued columns encode to one 0/1 column where
    /// `values[1]` is the "on" value; wider sets expand to one column per value.
    Categorical {
        values: Vec<String>,
        /// Optional output column names, one per value (or one for two-valued columns).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        names: Option<Vec<String>>,
    },
    Numeric {
        numeric: NumericKind,
    },
    /// Identifier-like columns that never reach the model.
    Ignored,
    /// Kind could not be determined (e.g. no data rows).
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Output name for one-column encodings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_name: Option<String>,
    /// Raw value rewrites applied before anything else (e.g. "No internet service" -> "No").
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub recode: BTreeMap<String, String>,
    /// Replacement for blank cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blank_as: Option<String>,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
            display_name: None,
            recode: BTreeMap::new(),
            blank_as: None,
        }
    }

    /// Number of encoded columns this column expands to.
    pub fn width(&self) -> usize {
        match &self.kind {
            ColumnKind::Categorical { values, .. } if values.len() == 2 => 1,
            ColumnKind::Categorical { values, .. } => values.len(),
            ColumnKind::Numeric { .. } => 1,
            ColumnKind::Ignored | ColumnKind::Unknown => 0,
        }
    }

    /// Encoded output names, in output order.
    pub fn output_names(&self) -> Vec<String> {
        let single = || {
            self.display_name
                .clone()
                .unwrap_or_else(|| self.name.clone())
        };
        match &self.kind {
            ColumnKind::Categorical { values, names } => {
                if let Some(names) = names {
                    return names.clone();
                }
                if values.len() == 2 {
                    vec![single()]
                } else {
                    values
                        .iter()
                        .map(|v| format!("{}_{}", self.name, v.replace(' ', "_")))
                        .collect()
                }
            }
            ColumnKind::Numeric { .. } => vec![single()],
            ColumnKind::Ignored | ColumnKind::Unknown => Vec::new(),
        }
    }

    fn clean<'a>(&'a self, raw: &'a str) -> &'a str {
        let trimmed = raw.trim();
        let filled = if trimmed.is_empty() {
            self.blank_as.as_deref().unwrap_or(trimmed)
        } else {
            trimmed
        };
        self.recode
            .get(filled)
            .map(String::as_str)
            .unwrap_or(filled)
    }
}

/// Declared column semantics of a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    /// Every non-label column, in file order.
    pub columns: Vec<ColumnSpec>,
    pub label_column: String,
    pub positive_label: String,
}

impl FeatureSchema {
    /// Post-encoding feature count.
    pub fn n_encoded(&self) -> usize {
        self.columns.iter().map(ColumnSpec::width).sum()
    }

    /// Number of columns that feed the model before encoding.
    pub fn n_original(&self) -> usize {
        self.columns
            .iter()
            .filter(|c| !matches!(c.kind, ColumnKind::Ignored))
            .count()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .flat_map(ColumnSpec::output_names)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Schema("schema has no feature columns".into()));
        }
        let mut seen = BTreeSet::new();
        for col in &self.columns {
            if !seen.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column '{}'", col.name)));
            }
            match &col.kind {
                ColumnKind::Unknown => {
                    return Err(Error::Schema(format!(
                        "kind of column '{}' is unknown (no data rows to infer from)",
                        col.name
                    )))
                }
                ColumnKind::Categorical { values, names } => {
                    let distinct: BTreeSet<_> = values.iter().collect();
                    if distinct.len() < 2 || distinct.len() != values.len() {
                        return Err(Error::Schema(format!(
                            "categorical column '{}' needs at least 2 distinct values, got {:?}",
                            col.name, values
                        )));
                    }
                    if let Some(names) = names {
                        if names.len() != col.width() {
                            return Err(Error::Schema(format!(
                                "column '{}' declares {} output names for width {}",
                                col.name,
                                names.len(),
                                col.width()
                            )));
                        }
                    }
                }
                _ => {}
            }
        }
        if self.n_encoded() == 0 {
            return Err(Error::Schema("schema encodes to zero features".into()));
        }
        Ok(())
    }
}

/// Column-major raw values after cleaning, in schema order.
#[derive(Debug, Clone, PartialEq)]
pub enum RawColumn {
    Numeric(Vec<f64>),
    Text(Vec<String>),
    Ignored,
}

/// A loaded table: feature columns in schema order plus 0/1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub names: Vec<String>,
    pub columns: Vec<RawColumn>,
    pub labels: Vec<u8>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }
}

/// Knobs for [`load_table`] when no full schema is supplied.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Label column name; defaults to the last header column.
    pub label_column: Option<String>,
    /// Raw value that marks class 1; inferred from common tokens when absent.
    pub positive_label: Option<String>,
}

pub fn load_table(
    path: &Path,
    schema: Option<&FeatureSchema>,
    opts: &LoadOptions,
) -> Result<(RawTable, FeatureSchema)> {
    let file = std::fs::File::open(path)?;
    read_table(file, schema, opts)
}

/// Same as [`load_table`] over any reader.
pub fn read_table<R: Read>(
    reader: R,
    schema: Option<&FeatureSchema>,
    opts: &LoadOptions,
) -> Result<(RawTable, FeatureSchema)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header: Vec<String> = match records.next() {
        Some(rec) => rec?.iter().map(|h| h.trim().to_string()).collect(),
        None => {
            return Err(Error::Load {
                line: 1,
                column: String::new(),
                message: "missing header row".into(),
            })
        }
    };
    if header.iter().any(String::is_empty) {
        return Err(Error::Load {
            line: 1,
            column: String::new(),
            message: "header contains an empty column name".into(),
        });
    }
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != header.len() {
            return Err(Error::Load {
                line,
                column: header
                    .get(rec.len().min(header.len() - 1))
                    .cloned()
                    .unwrap_or_default(),
                message: format!(
                    "ragged row: {} fields, header has {}",
                    rec.len(),
                    header.len()
                ),
            });
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }

    let schema = match schema {
        Some(s) => s.clone(),
        None => infer_schema(&header, &rows, opts)?,
    };
    schema.validate()?;
    let table = materialize(&header, &rows, &schema)?;
    Ok((table, schema))
}

fn column_index(header: &[String], name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Load {
            line: 1,
            column: name.to_string(),
            message: "column not found in header".into(),
        })
}

fn infer_schema(
    header: &[String],
    rows: &[Vec<String>],
    opts: &LoadOptions,
) -> Result<FeatureSchema> {
    let label_column = opts
        .label_column
        .clone()
        .unwrap_or_else(|| header.last().cloned().unwrap_or_default());
    let label_idx = column_index(header, &label_column)?;

    let mut columns = Vec::new();
    for (j, name) in header.iter().enumerate() {
        if j == label_idx {
            continue;
        }
        let kind = if rows.is_empty() {
            ColumnKind::Unknown
        } else {
            infer_kind(rows.iter().map(|r| r[j].trim()))
        };
        if kind == ColumnKind::Ignored {
            log::warn!("column '{name}' has more than {MAX_CATEGORICAL_VALUES} distinct non-numeric values; ignoring it");
        }
        columns.push(ColumnSpec::new(name.clone(), kind));
    }

    let positive_label = match &opts.positive_label {
        Some(p) => p.clone(),
        None => {
            let distinct: BTreeSet<&str> = rows.iter().map(|r| r[label_idx].trim()).collect();
            distinct
                .iter()
                .find(|v| TRUTHY.contains(&v.to_ascii_lowercase().as_str()))
                .map(|v| v.to_string())
                .unwrap_or_else(|| "1".to_string())
        }
    };

    Ok(FeatureSchema {
        columns,
        label_column,
        positive_label,
    })
}

fn infer_kind<'a>(cells: impl Iterator<Item = &'a str>) -> ColumnKind {
    let mut distinct = BTreeSet::new();
    let mut all_numeric = true;
    let mut any_numeric = false;
    let mut any_blank = false;
    for cell in cells {
        if cell.is_empty() {
            any_blank = true;
            continue;
        }
        match cell.parse::<f64>() {
            Ok(_) => any_numeric = true,
            Err(_) => all_numeric = false,
        }
        distinct.insert(cell.to_string());
    }
    if all_numeric && any_numeric {
        // Blank cells surface later as a parse error naming the row.
        let binary = !any_blank
            && distinct.iter().all(|v| {
                v.parse::<f64>()
                    .map(|x| x == 0.0 || x == 1.0)
                    .unwrap_or(false)
            });
        return ColumnKind::Numeric {
            numeric: if binary {
                NumericKind::Binary
            } else {
                NumericKind::Continuous
            },
        };
    }
    if any_blank {
        distinct.insert(String::new());
    }
    if distinct.len() > MAX_CATEGORICAL_VALUES {
        return ColumnKind::Ignored;
    }
    let mut values: Vec<String> = distinct.into_iter().collect();
    if values.len() == 2 && TRUTHY.contains(&values[0].to_ascii_lowercase().as_str()) {
        values.swap(0, 1);
    }
    ColumnKind::Categorical {
        values,
        names: None,
    }
}

fn materialize(
    header: &[String],
    rows: &[Vec<String>],
    schema: &FeatureSchema,
) -> Result<RawTable> {
    let label_idx = column_index(header, &schema.label_column)?;
    for h in header {
        if h != &schema.label_column && !schema.columns.iter().any(|c| &c.name == h) {
            return Err(Error::Schema(format!(
                "header column '{h}' is not declared in the schema"
            )));
        }
    }

    let positive = schema.positive_label.trim();
    let mut negative: Option<String> = None;
    let mut labels = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let raw = row[label_idx].trim();
        if raw.eq_ignore_ascii_case(positive) {
            labels.push(1);
            continue;
        }
        match &negative {
            None => negative = Some(raw.to_string()),
            Some(n) if n == raw => {}
            Some(n) => {
                return Err(Error::Load {
                    line: i + 2,
                    column: schema.label_column.clone(),
                    message: format!(
                        "label column has more than two values ('{positive}', '{n}', '{raw}')"
                    ),
                })
            }
        }
        labels.push(0);
    }

    let mut names = Vec::with_capacity(schema.columns.len());
    let mut columns = Vec::with_capacity(schema.columns.len());
    for col in &schema.columns {
        let j = column_index(header, &col.name)?;
        names.push(col.name.clone());
        let raw = match &col.kind {
            ColumnKind::Numeric { .. } => {
                let mut out = Vec::with_capacity(rows.len());
                for (i, row) in rows.iter().enumerate() {
                    let cell = col.clean(&row[j]);
                    let v: f64 = cell.parse().map_err(|_| Error::Load {
                        line: i + 2,
                        column: col.name.clone(),
                        message: format!("cannot parse '{cell}' as a number"),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Load {
                            line: i + 2,
                            column: col.name.clone(),
                            message: format!("non-finite value '{cell}'"),
                        });
                    }
                    out.push(v);
                }
                RawColumn::Numeric(out)
            }
            ColumnKind::Categorical { .. } => {
                RawColumn::Text(rows.iter().map(|r| col.clean(&r[j]).to_string()).collect())
            }
            ColumnKind::Ignored | ColumnKind::Unknown => RawColumn::Ignored,
        };
        columns.push(raw);
    }
    Ok(RawTable {
        names,
        columns,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<(RawTable, FeatureSchema)> {
        read_table(text.as_bytes(), None, &LoadOptions::default())
    }

    #[test]
    fn infers_three_valued_categorical() {
        let csv = "color,size,flag,label\n\
                   red,1.5,0,yes\n\
                   green,2.0,1,no\n\
                   blue,3.5,0,no\n\
                   red,0.5,1,yes\n\
                   green,1.0,0,no\n";
        let (table, schema) = read(csv).unwrap();
        assert_eq!(table.n_rows(), 5);
        assert_eq!(
            schema.columns[0].kind,
            ColumnKind::Categorical {
                values: vec!["blue".into(), "green".into(), "red".into()],
                names: None
            }
        );
        assert_eq!(
            schema.columns[1].kind,
            ColumnKind::Numeric {
                numeric: NumericKind::Continuous
            }
        );
        assert_eq!(
            schema.columns[2].kind,
            ColumnKind::Numeric {
                numeric: NumericKind::Binary
            }
        );
        assert_eq!(schema.positive_label, "yes");
        assert_eq!(table.labels, vec![1, 0, 0, 1, 0]);
        assert_eq!(schema.n_encoded(), 5);
    }

    #[test]
    fn empty_table_has_unknown_kinds() {
        let err = read("a,b,label\n").unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
    }

    #[test]
    fn empty_file_is_missing_header() {
        let err = read("").unwrap_err();
        assert!(matches!(err, Error::Load { line: 1, .. }), "{err}");
    }

    #[test]
    fn ragged_row_names_line() {
        let err = read("a,b,label\n1,2,1\n3,0\n").unwrap_err();
        match err {
            Error::Load { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_label_column() {
        let opts = LoadOptions {
            label_column: Some("target".into()),
            positive_label: None,
        };
        let err = read_table("a,b\n1,2\n".as_bytes(), None, &opts).unwrap_err();
        assert!(
            matches!(err, Error::Load { ref column, .. } if column == "target"),
            "{err}"
        );
    }

    #[test]
    fn blank_numeric_cell_is_a_parse_error() {
        let err = read("x,label\n1.0,1\n,0\n2.0,0\n").unwrap_err();
        match err {
            Error::Load { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, "x");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn declared_numeric_column_rejects_text() {
        let schema = FeatureSchema {
            columns: vec![ColumnSpec::new(
                "x",
                ColumnKind::Numeric {
                    numeric: NumericKind::Continuous,
                },
            )],
            label_column: "label".into(),
            positive_label: "1".into(),
        };
        let err = read_table(
            "x,label\n1,1\nabc,0\n".as_bytes(),
            Some(&schema),
            &LoadOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Load { line: 3, .. }), "{err}");
    }

    #[test]
    fn recode_and_blank_fill_apply_before_parsing() {
        let mut num = ColumnSpec::new(
            "charges",
            ColumnKind::Numeric {
                numeric: NumericKind::Continuous,
            },
        );
        num.blank_as = Some("0".into());
        let mut cat = ColumnSpec::new(
            "backup",
            ColumnKind::Categorical {
                values: vec!["No".into(), "Yes".into()],
                names: None,
            },
        );
        cat.recode.insert("No internet service".into(), "No".into());
        let schema = FeatureSchema {
            columns: vec![num, cat],
            label_column: "Churn".into(),
            positive_label: "Yes".into(),
        };
        let csv = "charges,backup,Churn\n 12.5,Yes,No\n ,No internet service,Yes\n";
        let (table, _) =
            read_table(csv.as_bytes(), Some(&schema), &LoadOptions::default()).unwrap();
        assert_eq!(table.columns[0], RawColumn::Numeric(vec![12.5, 0.0]));
        assert_eq!(
            table.columns[1],
            RawColumn::Text(vec!["Yes".into(), "No".into()])
        );
        assert_eq!(table.labels, vec![0, 1]);
    }

    #[test]
    fn high_cardinality_text_is_ignored() {
        let mut csv = String::from("id,x,label\n");
        for i in 0..30 {
            csv.push_str(&format!("id{i},{},{}\n", i as f64 * 0.5, i % 2));
        }
        let (_, schema) = read(&csv).unwrap();
        assert_eq!(schema.columns[0].kind, ColumnKind::Ignored);
        assert_eq!(schema.n_encoded(), 1);
        assert_eq!(schema.n_original(), 1);
    }
}
