use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{class_prob, AttributionVector, BlackBox, Method};
use crate::error::{Error, Result};

/// Largest feature count for full subset enumeration.
pub const MAX_EXACT_FEATURES: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ShapMode {
    Exact,
    Sampled { n_permutations: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapConfig {
    pub mode: ShapMode,
    /// Replacement value per feature for absent features (training means).
    pub background: Vec<f64>,
    pub seed: u64,
}

impl ShapConfig {
    pub fn sampled(background: Vec<f64>, n_permutations: usize, seed: u64) -> Self {
        Self {
            mode: ShapMode::Sampled { n_permutations },
            background,
            seed,
        }
    }
}

/// Shapley values of the explained class probability with the value
/// function `v(S) = f(x_S, background_rest)`.
pub fn shap_explain(
    model: &dyn BlackBox,
    record: &[f64],
    explained_class: u8,
    cfg: &ShapConfig,
) -> Result<AttributionVector> {
    let start = Instant::now();
    let n = model.n_features();
    if record.len() != n || cfg.background.len() != n {
        return Err(Error::Shape(format!(
            "record has {} and background {} features, model expects {n}",
            record.len(),
            cfg.background.len()
        )));
    }
    let value = |rows: &Array2<f64>| -> Result<Vec<f64>> {
        Ok(model
            .predict_proba(rows.view())?
            .into_iter()
            .map(|p| class_prob(p, explained_class))
            .collect())
    };
    let (values, std_error, full, empty) = match cfg.mode {
        ShapMode::Exact => {
            if n > MAX_EXACT_FEATURES {
                return Err(Error::Explainer(format!(
                    "exact Shapley enumeration supports at most {MAX_EXACT_FEATURES} features, got {n}; use sampled mode"
                )));
            }
            let subsets = 1usize << n;
            let mut rows = Array2::<f64>::zeros((subsets, n));
            for (mask, mut row) in rows.rows_mut().into_iter().enumerate() {
                for j in 0..n {
                    row[j] = if mask >> j & 1 == 1 {
                        record[j]
                    } else {
                        cfg.background[j]
                    };
                }
            }
            let v = value(&rows)?;
            // weight[s] = s! (n - s - 1)! / n!
            let mut weight = vec![0.0; n.max(1)];
            for (s, w) in weight.iter_mut().enumerate() {
                *w = 1.0 / (n as f64 * binomial(n - 1, s));
            }
            let mut phi = vec![0.0; n];
            for mask in 0..subsets {
                let size = (mask as u32).count_ones() as usize;
                for (j, p) in phi.iter_mut().enumerate() {
                    if mask >> j & 1 == 0 {
                        *p += weight[size] * (v[mask | 1 << j] - v[mask]);
                    }
                }
            }
            (phi, None, v[subsets - 1], v[0])
        }
        ShapMode::Sampled { n_permutations } => {
            if n_permutations == 0 {
                return Err(Error::Config(
                    "sampled Shapley values need at least one permutation".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut perms: Vec<Vec<usize>> = Vec::with_capacity(n_permutations);
            let mut rows = Array2::<f64>::zeros((n_permutations * (n + 1), n));
            for p in 0..n_permutations {
                // Odd draws replay the previous order reversed (antithetic pairs).
                let order = if p % 2 == 1 {
                    perms[p - 1].iter().rev().copied().collect()
                } else {
                    let mut o: Vec<usize> = (0..n).collect();
                    o.shuffle(&mut rng);
                    o
                };
                let mut current = cfg.background.clone();
                rows.row_mut(p * (n + 1))
                    .assign(&ndarray::ArrayView1::from(&current));
                for (step, &j) in order.iter().enumerate() {
                    current[j] = record[j];
                    rows.row_mut(p * (n + 1) + step + 1)
                        .assign(&ndarray::ArrayView1::from(&current));
                }
                perms.push(order);
            }
            let v = value(&rows)?;
            // Marginals are averaged within each antithetic pair, then across pairs.
            let mut unit = vec![0.0; n];
            let mut unit_len = 0usize;
            let mut sum = vec![0.0; n];
            let mut sum_sq = vec![0.0; n];
            let mut units = 0usize;
            for (p, order) in perms.iter().enumerate() {
                let base = p * (n + 1);
                for (step, &j) in order.iter().enumerate() {
                    unit[j] += v[base + step + 1] - v[base + step];
                }
                unit_len += 1;
                if unit_len == 2 || p + 1 == n_permutations {
                    for j in 0..n {
                        let m = unit[j] / unit_len as f64;
                        sum[j] += m * unit_len as f64;
                        sum_sq[j] += m * m;
                        unit[j] = 0.0;
                    }
                    units += 1;
                    unit_len = 0;
                }
            }
            let k = n_permutations as f64;
            let phi: Vec<f64> = sum.iter().map(|s| s / k).collect();
            let u = units as f64;
            let se: Vec<f64> = if units > 1 {
                sum_sq
                    .iter()
                    .zip(&phi)
                    .map(|(sq, m)| ((sq / u - m * m).max(0.0) / (u - 1.0)).sqrt())
                    .collect()
            } else {
                vec![f64::NAN; n]
            };
            (phi, Some(se), v[n], v[0])
        }
    };
    Ok(AttributionVector {
        method: Method::Shap,
        values,
        explained_class,
        prediction: full,
        base_value: empty,
        std_error,
        duration_secs: start.elapsed().as_secs_f64(),
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_params, parse_spec, InitScheme};
    use crate::surrogate::{FnModel, NetworkModel};
    use ndarray::ArrayView2;
    use rand::Rng;
    use std::cell::Cell;

    /// Brute-force Shapley values straight from the permutation definition.
    fn oracle_permutations(f: &dyn Fn(&[f64]) -> f64, x: &[f64], bg: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut phi = vec![0.0; n];
        let mut count = 0.0;
        let mut perm: Vec<usize> = (0..n).collect();
        // Heap's algorithm over all n! orders.
        fn heap(k: usize, perm: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
            if k == 1 {
                visit(perm);
                return;
            }
            for i in 0..k {
                heap(k - 1, perm, visit);
                let j = if k.is_multiple_of(2) { i } else { 0 };
                perm.swap(j, k - 1);
            }
        }
        heap(n, &mut perm, &mut |order| {
            let mut cur = bg.to_vec();
            let mut prev = f(&cur);
            for &j in order {
                cur[j] = x[j];
                let now = f(&cur);
                phi[j] += now - prev;
                prev = now;
            }
            count += 1.0;
        });
        phi.iter().map(|p| p / count).collect()
    }

    fn row_model<G: Fn(&[f64]) -> f64>(
        n: usize,
        g: G,
    ) -> FnModel<impl Fn(ArrayView2<f64>) -> Vec<f64>> {
        FnModel {
            n_features: n,
            f: move |rows: ArrayView2<f64>| {
                rows.rows()
                    .into_iter()
                    .map(|r| g(r.as_slice().unwrap()))
                    .collect()
            },
        }
    }

    fn exact(bg: Vec<f64>) -> ShapConfig {
        ShapConfig {
            mode: ShapMode::Exact,
            background: bg,
            seed: 0,
        }
    }

    #[test]
    fn additive_model_closed_form() {
        let parts = |i: usize, v: f64| match i {
            0 => 0.1 * v,
            1 => 0.2 * v * v,
            2 => -0.05 * v,
            3 => 0.1 * (3.0 * v).sin(),
            _ => 0.02 * v.exp(),
        };
        let f = move |x: &[f64]| 0.3 + (0..5).map(|i| parts(i, x[i])).sum::<f64>();
        let model = row_model(5, f);
        let x = [0.9, 0.1, 0.5, 0.7, 0.2];
        let bg = vec![0.4, 0.6, 0.5, 0.1, 0.8];
        let r = shap_explain(&model, &x, 1, &exact(bg.clone())).unwrap();
        for i in 0..5 {
            let e = parts(i, x[i]) - parts(i, bg[i]);
            assert!(
                (r.values[i] - e).abs() < 1e-12,
                "{i}: {} vs {e}",
                r.values[i]
            );
        }
    }

    #[test]
    fn exact_matches_permutation_oracle_on_interacting_model() {
        let f = |x: &[f64]| {
            0.5 + 0.3 * x[0] * x[1] - 0.2 * x[2] * x[3] * x[4] + 0.1 * (x[1] - x[4]).powi(2)
        };
        let model = row_model(5, f);
        let x = [0.9, 0.2, 0.4, 0.8, 0.6];
        let bg = vec![0.3, 0.5, 0.5, 0.1, 0.2];
        let r = shap_explain(&model, &x, 1, &exact(bg.clone())).unwrap();
        let o = oracle_permutations(&f, &x, &bg);
        for (a, b) in r.values.iter().zip(&o) {
            assert!((a - b).abs() < 1e-12);
        }
        let total: f64 = r.values.iter().sum();
        assert!((total - (r.prediction - r.base_value)).abs() < 1e-10);
    }

    #[test]
    fn symmetric_features_share_credit() {
        let f = |x: &[f64]| 1.0 / (1.0 + (-(x[0] + x[1] + 0.5 * x[2] * x[0] * x[1])).exp());
        let model = row_model(3, f);
        let r = shap_explain(&model, &[0.7, 0.7, 0.4], 1, &exact(vec![0.1, 0.1, 0.5])).unwrap();
        assert!((r.values[0] - r.values[1]).abs() < 1e-10);
    }

    #[test]
    fn background_record_has_zero_attribution() {
        let spec = parse_spec("C3-F5-O2", 6).unwrap();
        let p = init_params(&spec, 2, InitScheme::FanInUniform);
        let bg = vec![0.2, 0.4, 0.6, 0.8, 0.1, 0.3];
        let r = shap_explain(&NetworkModel(&p), &bg, 1, &exact(bg.clone())).unwrap();
        assert!(r.values.iter().all(|&v| v == 0.0));
        let s = shap_explain(
            &NetworkModel(&p),
            &bg,
            0,
            &ShapConfig::sampled(bg.clone(), 20, 1),
        )
        .unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sampled_agrees_with_exact_on_random_net() {
        let spec = parse_spec("C4-F12-O2", 10).unwrap();
        let p = init_params(&spec, 17, InitScheme::FanInUniform);
        let model = NetworkModel(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
        let bg: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
        let e = shap_explain(&model, &x, 1, &exact(bg.clone())).unwrap();
        let s = shap_explain(&model, &x, 1, &ShapConfig::sampled(bg, 2000, 9)).unwrap();
        let span = (e.prediction - e.base_value).abs();
        let mae = e
            .values
            .iter()
            .zip(&s.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 10.0;
        assert!(mae <= 0.01 * span, "mae {mae}, span {span}");
        let total: f64 = s.values.iter().sum();
        assert!((total - (s.prediction - s.base_value)).abs() < 1e-10);
        assert!(s.std_error.unwrap().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn exact_refuses_wide_inputs() {
        let model = row_model(16, |x: &[f64]| x[0]);
        let err = shap_explain(&model, &[0.0; 16], 1, &exact(vec![0.0; 16])).unwrap_err();
        assert!(err.to_string().contains("sampled"));
    }

    #[test]
    fn only_predictions_are_used() {
        struct Counting<'a>(&'a Cell<usize>);
        impl BlackBox for Counting<'_> {
            fn n_features(&self) -> usize {
                4
            }
            fn predict_proba(&self, rows: ArrayView2<f64>) -> Result<Vec<f64>> {
                self.0.set(self.0.get() + rows.nrows());
                Ok(rows.rows().into_iter().map(|r| r.sum() / 4.0).collect())
            }
        }
        let calls = Cell::new(0);
        let m = Counting(&calls);
        shap_explain(&m, &[0.1, 0.2, 0.3, 0.4], 1, &exact(vec![0.5; 4])).unwrap();
        assert_eq!(calls.get(), 16);
        shap_explain(
            &m,
            &[0.1, 0.2, 0.3, 0.4],
            1,
            &ShapConfig::sampled(vec![0.5; 4], 7, 0),
        )
        .unwrap();
        assert_eq!(calls.get(), 16 + 7 * 5);
    }
}
