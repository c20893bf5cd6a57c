//! Column declarations for the two public datasets the pipeline was built around.

use std::collections::BTreeMap;

use super::table::{ColumnKind, ColumnSpec, FeatureSchema, NumericKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnownDataset {
    /// Telecom customer churn (Kaggle `blastchar/telco-customer-churn`).
    TelecomChurn,
    /// Credit card fraud (Kaggle `mlg-ulb/creditcardfraud`).
    CreditCardFraud,
}

impl KnownDataset {
    pub fn name(self) -> &'static str {
        match self {
            Self::TelecomChurn => "telecom-churn",
            Self::CreditCardFraud => "credit-card-fraud",
        }
    }

    /// Accepted total row counts.
    pub fn expected_rows(self) -> &'static [usize] {
        match self {
            Self::TelecomChurn => &[7043],
            // The public file has 284 807 rows; some write-ups quote 285 299.
            Self::CreditCardFraud => &[284_807, 285_299],
        }
    }

    pub fn expected_original_features(self) -> usize {
        match self {
            Self::TelecomChurn => 19,
            Self::CreditCardFraud => 30,
        }
    }

    pub fn expected_encoded_features(self) -> usize {
        match self {
            Self::TelecomChurn => 28,
            Self::CreditCardFraud => 30,
        }
    }

    pub fn fetch_instructions(self) -> &'static str {
        match self {
            Self::TelecomChurn => {
                "download WA_Fn-UseC_-Telco-Customer-Churn.csv from \
                 https://www.kaggle.com/pavanraj159/telecom-customer-churn-prediction"
            }
            Self::CreditCardFraud => {
                "download creditcard.csv from https://www.kaggle.com/mlg-ulb/creditcardfraud"
            }
        }
    }

    pub fn schema(self) -> Option<FeatureSchema> {
        match self {
            Self::TelecomChurn => Some(telecom_churn_schema()),
            // All-numeric; plain inference with label "Class" does the right thing.
            Self::CreditCardFraud => None,
        }
    }
}

pub fn detect(header: &[String]) -> Option<KnownDataset> {
    let has = |name: &str| header.iter().any(|h| h == name);
    if has("customerID") && has("Churn") && has("Contract") {
        return Some(KnownDataset::TelecomChurn);
    }
    if has("Class") && has("Amount") && (1..=28).all(|i| has(&format!("V{i}"))) {
        return Some(KnownDataset::CreditCardFraud);
    }
    None
}

fn yes_no(name: &str, display: &str, no_service: bool) -> ColumnSpec {
    let mut spec = ColumnSpec::new(
        name,
        ColumnKind::Categorical {
            values: vec!["No".into(), "Yes".into()],
            names: None,
        },
    );
    spec.display_name = Some(display.into());
    if no_service {
        spec.recode = BTreeMap::from([("No internet service".into(), "No".into())]);
    }
    spec
}

fn multi(name: &str, values: &[&str], names: &[&str]) -> ColumnSpec {
    ColumnSpec::new(
        name,
        ColumnKind::Categorical {
            values: values.iter().map(|v| v.to_string()).collect(),
            names: Some(names.iter().map(|v| v.to_string()).collect()),
        },
    )
}

fn numeric(name: &str, display: &str, kind: NumericKind) -> ColumnSpec {
    let mut spec = ColumnSpec::new(name, ColumnKind::Numeric { numeric: kind });
    spec.display_name = Some(display.into());
    spec
}

/// 19 raw features expanding to 28 encoded columns.
///
/// The six internet add-on columns fold "No internet service" into "No", and
/// blank `TotalCharges` cells (customers with zero tenure) read as 0.
pub fn telecom_churn_schema() -> FeatureSchema {
    let mut gender = ColumnSpec::new(
        "gender",
        ColumnKind::Categorical {
            values: vec!["Female".into(), "Male".into()],
            names: None,
        },
    );
    gender.display_name = Some("Gender".into());
    let mut total = numeric("TotalCharges", "TotalCharges", NumericKind::Continuous);
    total.blank_as = Some("0".into());

    let columns = vec![
        ColumnSpec::new("customerID", ColumnKind::Ignored),
        gender,
        numeric("SeniorCitizen", "SeniorCitizen", NumericKind::Binary),
        yes_no("Partner", "Partner", false),
        yes_no("Dependents", "Dependents", false),
        numeric("tenure", "Tenure", NumericKind::Continuous),
        yes_no("PhoneService", "PhoneService", false),
        multi(
            "MultipleLines",
            &["No", "No phone service", "Yes"],
            &["ML_No", "ML_No_PhService", "ML_Yes"],
        ),
        multi(
            "InternetService",
            &["DSL", "Fiber optic", "No"],
            &["IS_DSL", "IS_Fiber_Optic", "IS_No"],
        ),
        yes_no("OnlineSecurity", "OnlineSecurity", true),
        yes_no("OnlineBackup", "OnlineBackup", true),
        yes_no("DeviceProtection", "DeviceProtection", true),
        yes_no("TechSupport", "TechSupport", true),
        yes_no("StreamingTV", "StreamingTV", true),
        yes_no("StreamingMovies", "StreamingMovies", true),
        multi(
            "Contract",
            &["Month-to-month", "One year", "Two year"],
            &["Contract_M_to_M", "Contract_1yr", "Contract_2yr"],
        ),
        yes_no("PaperlessBilling", "PaperlessBilling", false),
        multi(
            "PaymentMethod",
            &[
                "Bank transfer (automatic)",
                "Credit card (automatic)",
                "Electronic check",
                "Mailed check",
            ],
            &[
                "PM_Bank_TX_Auto",
                "PM_CCard_Auto",
                "PM_Elec_Check",
                "PM_Mail_Check",
            ],
        ),
        numeric("MonthlyCharges", "MonthlyCharges", NumericKind::Continuous),
        total,
    ];
    FeatureSchema {
        columns,
        label_column: "Churn".into(),
        positive_label: "Yes".into(),
    }
}
