//! Synthetic minority oversampling.

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{EncodedMatrix, Provenance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleConfig {
    pub k_neighbors: usize,
    pub seed: u64,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SmoteOutput {
    /// Input rows first, synthetic rows appended.
    pub matrix: EncodedMatrix,
    pub k_used: usize,
    pub n_synthetic: usize,
    pub warnings: Vec<String>,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `k` nearest minority neighbours (by row position in `minority`), ties by index.
pub fn nearest_neighbors(values: &Array2<f64>, minority: &[usize], k: usize) -> Vec<Vec<usize>> {
    minority
        .iter()
        .enumerate()
        .map(|(a, &ra)| {
            let mut d: Vec<(f64, usize)> = minority
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(b, &rb)| (sq_dist(values.row(ra), values.row(rb)), b))
                .collect();
            d.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            d.into_iter().take(k).map(|(_, b)| b).collect()
        })
        .collect()
}

/// Oversamples the minority class of `train` until both classes have equal counts.
/// Only ever call this on training rows.
pub fn smote(train: &EncodedMatrix, cfg: &ResampleConfig) -> Result<SmoteOutput> {
    if cfg.k_neighbors == 0 {
        return Err(Error::Resample("k_neighbors must be at least 1".into()));
    }
    let counts = train.class_counts();
    if counts[0] == counts[1] {
        return Ok(SmoteOutput {
            matrix: train.clone(),
            k_used: cfg.k_neighbors,
            n_synthetic: 0,
            warnings: Vec::new(),
        });
    }
    let minority_class: u8 = if counts[1] < counts[0] { 1 } else { 0 };
    let minority: Vec<usize> = (0..train.n_rows())
        .filter(|&i| train.labels[i] == minority_class)
        .collect();
    let m = minority.len();
    if m < 2 {
        return Err(Error::Resample(format!(
            "minority class {minority_class} has {m} row(s); need at least 2 to interpolate"
        )));
    }
    let mut warnings = Vec::new();
    let mut k = cfg.k_neighbors;
    if m <= k {
        k = m - 1;
        let msg = format!(
            "minority class has {m} rows, not more than k_neighbors={}; using k={k}",
            cfg.k_neighbors
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let neighbors = nearest_neighbors(&train.values, &minority, k);
    let n_new = counts[0].abs_diff(counts[1]);
    let d = train.n_features();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut synth = Array2::<f64>::zeros((n_new, d));
    for s in 0..n_new {
        let a = rng.random_range(0..m);
        let b = neighbors[a][rng.random_range(0..k)];
        let lambda: f64 = rng.random();
        let xa = train.values.row(minority[a]);
        let xb = train.values.row(minority[b]);
        for j in 0..d {
            synth[[s, j]] = xa[j] + lambda * (xb[j] - xa[j]);
        }
    }

    let values = ndarray::concatenate(ndarray::Axis(0), &[train.values.view(), synth.view()])
        .expect("same column count");
    let mut labels = train.labels.clone();
    labels.extend(std::iter::repeat_n(minority_class, n_new));
    let mut provenance = train.provenance.clone();
    provenance.extend(std::iter::repeat_n(Provenance::Synthetic, n_new));
    Ok(SmoteOutput {
        matrix: EncodedMatrix {
            feature_names: train.feature_names.clone(),
            values,
            labels,
            provenance,
            warnings: train.warnings.clone(),
        },
        k_used: k,
        n_synthetic: n_new,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn matrix(values: Array2<f64>, labels: Vec<u8>) -> EncodedMatrix {
        let names = (0..values.ncols()).map(|j| format!("f{j}")).collect();
        EncodedMatrix::new(names, values, labels).unwrap()
    }

    #[test]
    fn balanced_input_is_unchanged() {
        let m = matrix(array![[0.0, 1.0], [1.0, 0.0]], vec![0, 1]);
        let out = smote(&m, &ResampleConfig::default()).unwrap();
        assert_eq!(out.matrix, m);
        assert_eq!(out.n_synthetic, 0);
    }

    #[test]
    fn two_minority_points_stay_on_segment() {
        let mut rows = vec![[0.1, 0.2], [0.7, 0.9]];
        let mut labels = vec![1, 1];
        for i in 0..12 {
            rows.push([i as f64 / 12.0, 0.5]);
            labels.push(0);
        }
        let values = Array2::from_shape_vec((rows.len(), 2), rows.concat()).unwrap();
        let m = matrix(values, labels);
        let out = smote(
            &m,
            &ResampleConfig {
                k_neighbors: 1,
                seed: 9,
            },
        )
        .unwrap();
        assert_eq!(out.matrix.class_counts(), [12, 12]);
        let (a, b) = ([0.1, 0.2], [0.7, 0.9]);
        for (row, prov) in out
            .matrix
            .values
            .rows()
            .into_iter()
            .zip(&out.matrix.provenance)
        {
            if *prov != Provenance::Synthetic {
                continue;
            }
            let cross = (b[0] - a[0]) * (row[1] - a[1]) - (b[1] - a[1]) * (row[0] - a[0]);
            assert!(cross.abs() <= 1e-12, "off segment by {cross}");
            assert!(row[0] >= a[0] - 1e-15 && row[0] <= b[0] + 1e-15);
        }
    }

    #[test]
    fn small_minority_falls_back() {
        let m = matrix(
            array![[0.0], [0.5], [1.0], [0.2], [0.3], [0.4]],
            vec![1, 1, 1, 0, 0, 0],
        );
        let m = m.select_rows(&[0, 1, 2, 3, 4, 5, 3, 4]);
        let out = smote(
            &m,
            &ResampleConfig {
                k_neighbors: 5,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(out.k_used, 2);
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(out.matrix.class_counts(), [5, 5]);
    }

    #[test]
    fn single_minority_row_is_an_error() {
        let m = matrix(array![[0.0], [0.5], [1.0]], vec![1, 0, 0]);
        assert!(smote(&m, &ResampleConfig::default()).is_err());
    }

    #[test]
    fn seeded_output_is_reproducible() {
        let m = matrix(
            array![
                [0.0, 0.1],
                [0.5, 0.4],
                [1.0, 0.9],
                [0.2, 0.2],
                [0.3, 0.6],
                [0.4, 0.1],
                [0.9, 0.9]
            ],
            vec![1, 1, 1, 0, 0, 0, 0],
        );
        let cfg = ResampleConfig {
            k_neighbors: 2,
            seed: 5,
        };
        assert_eq!(
            smote(&m, &cfg).unwrap().matrix,
            smote(&m, &cfg).unwrap().matrix
        );
    }
}
