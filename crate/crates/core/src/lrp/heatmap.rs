use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranking::Outcome;

/// Min-max scaling to [0,1]; a constant vector maps to all 0.5.
pub fn normalize_heatmap(values: &[f64]) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| (v - min) / (max - min)).collect()
}

/// Normalized relevance rows, one per record, plus an optional mean row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapMatrix {
    pub feature_names: Vec<String>,
    pub record_ids: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
    /// Column means of `rows`, re-normalized to [0,1].
    pub mean: Option<Vec<f64>>,
    pub group: Option<Outcome>,
}

impl HeatmapMatrix {
    /// Header `record,<features>`; the mean row is labelled `mean`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["record".to_string()];
        header.extend(self.feature_names.iter().cloned());
        wr.write_record(&header)?;
        for (id, row) in self.record_ids.iter().zip(&self.rows) {
            let mut out = vec![id.to_string()];
            out.extend(row.iter().map(|v| v.to_string()));
            wr.write_record(&out)?;
        }
        if let Some(mean) = &self.mean {
            let mut out = vec!["mean".to_string()];
            out.extend(mean.iter().map(|v| v.to_string()));
            wr.write_record(&out)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Stacks normalized rows of one outcome group in the given record order and
/// appends their re-normalized column mean.
pub fn aggregate_global(
    feature_names: &[String],
    records: &[(usize, &[f64])],
    group: Outcome,
) -> Result<HeatmapMatrix> {
    if records.is_empty() {
        return Err(Error::Relevance(format!(
            "outcome group {group} has no records"
        )));
    }
    let n = feature_names.len();
    let mut rows = Vec::with_capacity(records.len());
    let mut sum = vec![0.0; n];
    for (id, values) in records {
        if values.len() != n {
            return Err(Error::Shape(format!(
                "record {id} has {} relevances for {n} features",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "record {id} has non-finite relevance"
            )));
        }
        let row = normalize_heatmap(values);
        sum.iter_mut().zip(&row).for_each(|(s, v)| *s += v);
        rows.push(row);
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / rows.len() as f64).collect();
    Ok(HeatmapMatrix {
        feature_names: feature_names.to_vec(),
        record_ids: records.iter().map(|(id, _)| *id).collect(),
        rows,
        mean: Some(normalize_heatmap(&mean)),
        group: Some(group),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn hand_normalization() {
        assert_eq!(normalize_heatmap(&[-1.0, 0.0, 3.0]), vec![0.0, 0.25, 1.0]);
        assert_eq!(normalize_heatmap(&[2.0, 2.0, 2.0]), vec![0.5; 3]);
    }

    #[test]
    fn single_record_group() {
        let v = [0.3, -0.2, 0.9];
        let m = aggregate_global(&names(3), &[(7, &v[..])], Outcome::TruePositive).unwrap();
        assert_eq!(m.rows[0], normalize_heatmap(&v));
        assert_eq!(m.mean.as_ref().unwrap(), &m.rows[0]);
        assert_eq!(m.record_ids, vec![7]);
    }

    #[test]
    fn opposite_records_average_to_constant() {
        let a = [0.0, 1.0];
        let b = [1.0, 0.0];
        let m = aggregate_global(
            &names(2),
            &[(0, &a[..]), (1, &b[..])],
            Outcome::TrueNegative,
        )
        .unwrap();
        assert_eq!(m.mean.unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn empty_group_names_the_group() {
        let err = aggregate_global(&names(2), &[], Outcome::FalseNegative).unwrap_err();
        assert!(err.to_string().contains("FN"), "{err}");
    }

    #[test]
    fn csv_has_feature_header_and_mean_row() {
        let a = [0.0, 2.0];
        let m = aggregate_global(&names(2), &[(4, &a[..])], Outcome::TruePositive).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "record,f0,f1\n4,0,1\nmean,0,1\n");
    }

    proptest! {
        #[test]
        fn normalization_is_monotone(v in proptest::collection::vec(-1e3f64..1e3, 2..30)) {
            let n = normalize_heatmap(&v);
            prop_assert!(n.iter().all(|x| (0.0..=1.0).contains(x)));
            let min = v.iter().copied().fold(f64::INFINITY, f64::min);
            let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max > min {
                let imax = v.iter().position(|&x| x == max).unwrap();
                let imin = v.iter().position(|&x| x == min).unwrap();
                prop_assert_eq!(n[imax], 1.0);
                prop_assert_eq!(n[imin], 0.0);
            }
        }
    }
}
