//! Synthetic churn-like CSV and a small, fast run configuration.
#![allow(dead_code)]

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tablrp::pipeline::RunConfig;

/// Writes `n` rows with four numeric columns, a three-valued categorical and a
/// yes/no column. The label depends on `tenure`, `charges` and `contract`.
pub fn write_synthetic_csv(path: &Path, n: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = String::from("id,tenure,charges,noise_a,noise_b,contract,paperless,label\n");
    for i in 0..n {
        let tenure: f64 = rng.random_range(0.0..72.0);
        let charges: f64 = rng.random_range(20.0..120.0);
        let a: f64 = rng.random_range(0.0..1.0);
        let b: f64 = rng.random_range(-5.0..5.0);
        let contract = ["monthly", "yearly", "biennial"][rng.random_range(0..3)];
        let paperless = if rng.random::<bool>() { "Yes" } else { "No" };
        let score =
            -tenure / 24.0 + charges / 40.0 + if contract == "monthly" { 1.5 } else { -1.0 };
        let label = u8::from(score + rng.random_range(-0.5..0.5) > 1.2);
        s.push_str(&format!(
            "c{i},{tenure:.2},{charges:.2},{a:.4},{b:.3},{contract},{paperless},{label}\n"
        ));
    }
    std::fs::write(path, s).unwrap();
}

pub fn tiny_config(data: &Path, out: &Path) -> RunConfig {
    let text = format!(
        r#"
data_path = "{}"
label_column = "label"
positive_label = "1"
folds = 3
spec = "C2-F8-O2"
learning_rate = 0.05
batch_size = 32
max_iterations = 300
lime_perturbations = 40
shap_permutations = 30
surrogate_max_records = 8
rank_per_class_top = 3
rank_total = 5
compare_top_k = 4
bench_records = 20
bench_repetitions = 3
output_dir = "{}"
"#,
        data.display(),
        out.display()
    );
    RunConfig::load(Some(&text), &[]).unwrap()
}

/// Writes `n` rows in the column layout of the public telecom churn file,
/// including a blank `TotalCharges` for zero-tenure customers.
pub fn write_churn_like_csv(path: &Path, n: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = String::from(
        "customerID,gender,SeniorCitizen,Partner,Dependents,tenure,PhoneService,MultipleLines,InternetService,\
         OnlineSecurity,OnlineBackup,DeviceProtection,TechSupport,StreamingTV,StreamingMovies,Contract,\
         PaperlessBilling,PaymentMethod,MonthlyCharges,TotalCharges,Churn\n",
    );
    let pick = |rng: &mut ChaCha8Rng, v: &[&'static str]| v[rng.random_range(0..v.len())];
    for i in 0..n {
        let yn = ["Yes", "No"];
        let tenure = if i % 50 == 0 {
            0
        } else {
            rng.random_range(1..72)
        };
        let phone = pick(&mut rng, &yn);
        let lines = if phone == "No" {
            "No phone service"
        } else {
            pick(&mut rng, &yn)
        };
        let internet = pick(&mut rng, &["DSL", "Fiber optic", "No"]);
        let addon = |rng: &mut ChaCha8Rng| {
            if internet == "No" {
                "No internet service"
            } else {
                pick(rng, &yn)
            }
        };
        let addons: Vec<&str> = (0..6).map(|_| addon(&mut rng)).collect();
        let contract = pick(&mut rng, &["Month-to-month", "One year", "Two year"]);
        let monthly: f64 = rng.random_range(18.0..118.0);
        let total = if tenure == 0 {
            " ".to_string()
        } else {
            format!("{:.2}", monthly * tenure as f64)
        };
        let risk = f64::from(u8::from(contract == "Month-to-month")) * 1.5
            + f64::from(u8::from(internet == "Fiber optic"))
            - tenure as f64 / 30.0;
        let churn = if risk + rng.random_range(-0.6..0.6) > 0.6 {
            "Yes"
        } else {
            "No"
        };
        s.push_str(&format!(
            "{i:04}-X,{},{},{},{},{tenure},{phone},{lines},{internet},{},{contract},{},{},{monthly:.2},{total},{churn}\n",
            pick(&mut rng, &["Female", "Male"]),
            rng.random_range(0..2),
            pick(&mut rng, &yn),
            pick(&mut rng, &yn),
            addons.join(","),
            pick(&mut rng, &yn),
            pick(
                &mut rng,
                &["Bank transfer (automatic)", "Credit card (automatic)", "Electronic check", "Mailed check"]
            ),
        ));
    }
    std::fs::write(path, s).unwrap();
}
