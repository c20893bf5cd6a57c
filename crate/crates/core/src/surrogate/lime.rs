use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{class_prob, AttributionVector, BlackBox, Method};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub n_perturbations: usize,
    /// Standard deviation of the Gaussian perturbation in encoded units.
    pub noise_scale: f64,
    /// Kernel width; `None` means `0.75 * sqrt(n_features)`.
    pub kernel_width: Option<f64>,
    pub ridge: f64,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_perturbations: 10,
            noise_scale: 0.3,
            kernel_width: None,
            ridge: 1e-3,
            seed: 0,
        }
    }
}

impl LimeConfig {
    /// Neighbourhood size large enough for a stable fit.
    pub fn quality() -> Self {
        Self {
            n_perturbations: 5000,
            ..Self::default()
        }
    }

    fn validate(&self, n: usize) -> Result<f64> {
        if self.n_perturbations == 0 {
            return Err(Error::Config("LIME needs at least one perturbation".into()));
        }
        if !(self.noise_scale > 0.0) {
            return Err(Error::Config(format!(
                "LIME noise scale must be positive, got {}",
                self.noise_scale
            )));
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::Config(format!(
                "LIME ridge must be >= 0, got {}",
                self.ridge
            )));
        }
        let w = self.kernel_width.unwrap_or(0.75 * (n as f64).sqrt());
        if !(w > 0.0) {
            return Err(Error::Config(format!(
                "LIME kernel width must be positive, got {w}"
            )));
        }
        if self.ridge == 0.0 && self.n_perturbations < n + 1 {
            return Err(Error::Explainer(format!(
                "{} perturbations cannot determine {} coefficients without regularization; set ridge > 0",
                self.n_perturbations,
                n + 1
            )));
        }
        Ok(w)
    }
}

/// Fits a kernel-weighted ridge regression of the explained class
/// probability on Gaussian perturbations of `record`; the coefficients are
/// the attributions. The intercept is not penalized.
pub fn lime_explain(
    model: &dyn BlackBox,
    record: &[f64],
    explained_class: u8,
    cfg: &LimeConfig,
) -> Result<AttributionVector> {
    let start = Instant::now();
    let n = model.n_features();
    if record.len() != n {
        return Err(Error::Shape(format!(
            "record has {} features, model expects {n}",
            record.len()
        )));
    }
    let width = cfg.validate(n)?;
    let m = cfg.n_perturbations;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_scale).expect("validated scale");
    let mut samples = Array2::<f64>::zeros((m, n));
    let mut weights = Vec::with_capacity(m);
    for mut row in samples.rows_mut() {
        let mut d2 = 0.0;
        for (v, &x) in row.iter_mut().zip(record) {
            *v = (x + noise.sample(&mut rng)).clamp(0.0, 1.0);
            d2 += (*v - x) * (*v - x);
        }
        weights.push((-d2 / (width * width)).exp());
    }
    let targets: Vec<f64> = model
        .predict_proba(samples.view())?
        .into_iter()
        .map(|p| class_prob(p, explained_class))
        .collect();
    let prediction = class_prob(
        model.predict_proba(ndarray::ArrayView2::from_shape((1, n), record).expect("row view"))?[0],
        explained_class,
    );

    // Weighted centring removes the intercept from the penalized system.
    let wsum: f64 = weights.iter().sum();
    let xbar: Vec<f64> = (0..n)
        .map(|j| {
            samples
                .column(j)
                .iter()
                .zip(&weights)
                .map(|(x, w)| x * w)
                .sum::<f64>()
                / wsum
        })
        .collect();
    let ybar = targets
        .iter()
        .zip(&weights)
        .map(|(y, w)| y * w)
        .sum::<f64>()
        / wsum;
    let mut xtx = DMatrix::<f64>::zeros(n, n);
    let mut xty = DVector::<f64>::zeros(n);
    let mut xc = vec![0.0; n];
    for (r, row) in samples.rows().into_iter().enumerate() {
        let w = weights[r];
        for j in 0..n {
            xc[j] = row[j] - xbar[j];
        }
        let yc = targets[r] - ybar;
        for a in 0..n {
            let wa = w * xc[a];
            xty[a] += wa * yc;
            for b in a..n {
                xtx[(a, b)] += wa * xc[b];
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            xtx[(a, b)] = xtx[(b, a)];
        }
        xtx[(a, a)] += cfg.ridge;
    }
    let singular = || {
        Error::Explainer(
            "LIME normal equations are singular; set ridge > 0 or add perturbations".into(),
        )
    };
    let chol = xtx.clone().cholesky().ok_or_else(singular)?;
    let diag = chol.l_dirty().diagonal();
    let (dmin, dmax) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| {
        (lo.min(d), hi.max(d))
    });
    if cfg.ridge == 0.0 && dmin <= dmax * 1e-10 {
        return Err(singular());
    }
    let beta = chol.solve(&xty);
    let values: Vec<f64> = beta.iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(singular());
    }
    let intercept = ybar - values.iter().zip(&xbar).map(|(b, x)| b * x).sum::<f64>();
    Ok(AttributionVector {
        method: Method::Lime,
        values,
        explained_class,
        prediction,
        base_value: intercept,
        std_error: None,
        duration_secs: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::FnModel;
    use ndarray::ArrayView2;

    fn logistic(a: Vec<f64>, b: f64) -> FnModel<impl Fn(ArrayView2<f64>) -> Vec<f64>> {
        FnModel {
            n_features: a.len(),
            f: move |rows: ArrayView2<f64>| {
                rows.rows()
                    .into_iter()
                    .map(|r| {
                        let z: f64 = r.iter().zip(&a).map(|(x, w)| x * w).sum::<f64>() + b;
                        1.0 / (1.0 + (-z).exp())
                    })
                    .collect()
            },
        }
    }

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn recovers_local_gradient_of_logistic_model() {
        let a = vec![1.5, -2.0, 0.5, 0.0, 3.0, -1.0];
        let model = logistic(a.clone(), -1.0);
        let record = [0.5, 0.4, 0.6, 0.5, 0.3, 0.5];
        let z: f64 = record.iter().zip(&a).map(|(x, w)| x * w).sum::<f64>() - 1.0;
        let s = 1.0 / (1.0 + (-z).exp());
        let grad: Vec<f64> = a.iter().map(|w| w * s * (1.0 - s)).collect();
        let cfg = LimeConfig {
            seed: 11,
            ..LimeConfig::quality()
        };
        let r = lime_explain(&model, &record, 1, &cfg).unwrap();
        assert!(
            cosine(&r.values, &grad) >= 0.99,
            "{:?} vs {:?}",
            r.values,
            grad
        );
        let r0 = lime_explain(&model, &record, 0, &cfg).unwrap();
        for (p, q) in r.values.iter().zip(&r0.values) {
            assert!((p + q).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_model_has_zero_coefficients() {
        let model = FnModel {
            n_features: 4,
            f: |rows: ArrayView2<f64>| vec![0.3; rows.nrows()],
        };
        let r = lime_explain(&model, &[0.1, 0.9, 0.5, 0.5], 1, &LimeConfig::quality()).unwrap();
        assert!(r.values.iter().all(|v| v.abs() < 1e-8), "{:?}", r.values);
        assert!((r.base_value - 0.3).abs() < 1e-8);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let model = logistic(vec![1.0, 2.0, -1.0], 0.0);
        let cfg = LimeConfig {
            seed: 5,
            ..LimeConfig::default()
        };
        let a = lime_explain(&model, &[0.2, 0.5, 0.7], 1, &cfg).unwrap();
        let b = lime_explain(&model, &[0.2, 0.5, 0.7], 1, &cfg).unwrap();
        assert_eq!(a.values, b.values);
        let c = lime_explain(&model, &[0.2, 0.5, 0.7], 1, &LimeConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn unregularized_underdetermined_fit_is_rejected() {
        let model = logistic(vec![1.0; 12], 0.0);
        let cfg = LimeConfig {
            ridge: 0.0,
            ..LimeConfig::default()
        };
        let err = lime_explain(&model, &[0.5; 12], 1, &cfg).unwrap_err();
        assert!(err.to_string().contains("ridge"), "{err}");
        // Paper-parity size works once regularized.
        assert!(lime_explain(&model, &[0.5; 12], 1, &LimeConfig::default()).is_ok());
    }

    #[test]
    fn collinear_design_without_ridge_is_singular() {
        // Records pinned at 0 with tiny noise clip to exactly 0 for most draws.
        let model = logistic(vec![1.0, 1.0], 0.0);
        let cfg = LimeConfig {
            n_perturbations: 40,
            noise_scale: 1e-300,
            ridge: 0.0,
            ..LimeConfig::default()
        };
        assert!(matches!(
            lime_explain(&model, &[0.0, 0.0], 1, &cfg),
            Err(Error::Explainer(_))
        ));
    }
}
