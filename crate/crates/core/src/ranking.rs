//! Relevance-driven feature ranking and subset selection.
//!
//! Normalized relevance rows of correctly classified records are binarized at
//! a threshold, summed per feature, and ranked. The top features of the
//! true-positive and true-negative rankings form the selected subset.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "TP")]
    TruePositive,
    #[serde(rename = "TN")]
    TrueNegative,
    #[serde(rename = "FP")]
    FalsePositive,
    #[serde(rename = "FN")]
    FalseNegative,
}

impl Outcome {
    pub fn of(prediction: u8, label: u8) -> Self {
        match (prediction, label) {
            (1, 1) => Self::TruePositive,
            (0, 0) => Self::TrueNegative,
            (1, _) => Self::FalsePositive,
            _ => Self::FalseNegative,
        }
    }

    pub fn short(&self) -> &'static str {
        match self {
            Self::TruePositive => "TP",
            Self::TrueNegative => "TN",
            Self::FalsePositive => "FP",
            Self::FalseNegative => "FN",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

/// Record indices per confusion cell, each in ascending order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeSets {
    pub tp: Vec<usize>,
    pub tn: Vec<usize>,
    pub fp: Vec<usize>,
    pub fn_: Vec<usize>,
}

impl OutcomeSets {
    pub fn get(&self, o: Outcome) -> &[usize] {
        match o {
            Outcome::TruePositive => &self.tp,
            Outcome::TrueNegative => &self.tn,
            Outcome::FalsePositive => &self.fp,
            Outcome::FalseNegative => &self.fn_,
        }
    }
}

pub fn partition_outcomes(predictions: &[u8], labels: &[u8]) -> Result<OutcomeSets> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut sets = OutcomeSets::default();
    for (i, (&p, &y)) in predictions.iter().zip(labels).enumerate() {
        match Outcome::of(p, y) {
            Outcome::TruePositive => sets.tp.push(i),
            Outcome::TrueNegative => sets.tn.push(i),
            Outcome::FalsePositive => sets.fp.push(i),
            Outcome::FalseNegative => sets.fn_.push(i),
        }
    }
    Ok(sets)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankingConfig {
    /// Normalized relevance at or above this counts as important.
    pub threshold: f64,
    pub per_class_top: usize,
    pub total: usize,
}

impl Default for RankingConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            per_class_top: 8,
            total: 16,
        }
    }
}

impl RankingConfig {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "threshold {} is outside [0, 1]",
                self.threshold
            )));
        }
        if self.total > n_features {
            return Err(Error::Ranking(format!(
                "cannot select {} of {n_features} features",
                self.total
            )));
        }
        if self.per_class_top * 2 < self.total {
            return Err(Error::Config(format!(
                "per_class_top {} cannot fill a subset of {}",
                self.per_class_top, self.total
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassAggregate {
    pub group: Outcome,
    pub counts: Vec<usize>,
    pub n_records: usize,
}

/// Ranking of features for one method and class group.
///
/// `ranks[i]` follows the published table convention: the most important
/// feature gets `n`, tied counts share the lowest rank of their span, and
/// features that never pass the threshold get 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub method: String,
    pub feature_names: Vec<String>,
    pub counts: Vec<usize>,
    /// Feature indices from most to least important (count desc, index asc).
    pub order: Vec<usize>,
    pub ranks: Vec<usize>,
}

impl RankTable {
    pub fn from_counts(method: &str, feature_names: &[String], counts: &[usize]) -> Self {
        let n = counts.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
        let mut ranks = vec![1; n];
        let mut start = 0;
        while start < n {
            let c = counts[order[start]];
            let mut end = start;
            while end + 1 < n && counts[order[end + 1]] == c {
                end += 1;
            }
            let shared = if c == 0 { 1 } else { n - end };
            for &f in &order[start..=end] {
                ranks[f] = shared;
            }
            start = end + 1;
        }
        Self {
            method: method.to_string(),
            feature_names: feature_names.to_vec(),
            counts: counts.to_vec(),
            order,
            ranks,
        }
    }

    pub fn top(&self, k: usize) -> &[usize] {
        &self.order[..k.min(self.order.len())]
    }
}

/// Binarizes normalized rows at the threshold and ranks the column sums.
pub fn rank_features(
    method: &str,
    feature_names: &[String],
    rows: &[Vec<f64>],
    group: Outcome,
    cfg: &RankingConfig,
) -> Result<(ClassAggregate, RankTable)> {
    if rows.is_empty() {
        return Err(Error::Ranking(format!("no {group} records to rank")));
    }
    let n = feature_names.len();
    let mut counts = vec![0usize; n];
    for (r, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Shape(format!(
                "row {r} has {} values for {n} features",
                row.len()
            )));
        }
        for (c, &v) in counts.iter_mut().zip(row) {
            if v >= cfg.threshold {
                *c += 1;
            }
        }
    }
    let table = RankTable::from_counts(method, feature_names, &counts);
    Ok((
        ClassAggregate {
            group,
            counts,
            n_records: rows.len(),
        },
        table,
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedFeature {
    pub index: usize,
    pub name: String,
    /// Which ranking supplied the feature.
    pub source: Outcome,
    /// 1-based position in that ranking.
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSelection {
    pub features: Vec<SelectedFeature>,
}

impl SubsetSelection {
    pub fn indices(&self) -> Vec<usize> {
        self.features.iter().map(|f| f.index).collect()
    }

    /// Selected indices in ascending column order, as used for retraining.
    pub fn sorted_indices(&self) -> Vec<usize> {
        let mut v = self.indices();
        v.sort_unstable();
        v
    }
}

/// Takes `ceil(total/2)` features from the TP ranking and `floor(total/2)`
/// from the TN ranking (each capped at `per_class_top`), skipping repeats;
/// any shortfall from overlap is filled by alternating the next TP and TN
/// candidates.
pub fn select_subset(
    tp: &RankTable,
    tn: &RankTable,
    cfg: &RankingConfig,
) -> Result<SubsetSelection> {
    let n = tp.order.len();
    if tn.order.len() != n || tp.feature_names != tn.feature_names {
        return Err(Error::Ranking(
            "TP and TN rankings cover different features".into(),
        ));
    }
    cfg.validate(n)?;
    let tp_quota = cfg.per_class_top.min(cfg.total.div_ceil(2));
    let tn_quota = cfg.per_class_top.min(cfg.total - tp_quota);
    let mut chosen = BTreeSet::new();
    let mut features = Vec::with_capacity(cfg.total);
    let mut push =
        |idx: usize, source: Outcome, position: usize, features: &mut Vec<SelectedFeature>| {
            if chosen.insert(idx) {
                features.push(SelectedFeature {
                    index: idx,
                    name: tp.feature_names[idx].clone(),
                    source,
                    position,
                });
            }
        };
    for (p, &f) in tp.order[..tp_quota].iter().enumerate() {
        push(f, Outcome::TruePositive, p + 1, &mut features);
    }
    for (p, &f) in tn.order[..tn_quota].iter().enumerate() {
        push(f, Outcome::TrueNegative, p + 1, &mut features);
    }
    let mut cursors = [tp_quota, tn_quota];
    let lists = [(tp, Outcome::TruePositive), (tn, Outcome::TrueNegative)];
    let mut turn = 0;
    while features.len() < cfg.total {
        let (table, source) = lists[turn];
        let cur = &mut cursors[turn];
        while *cur < n && features.iter().any(|f| f.index == table.order[*cur]) {
            *cur += 1;
        }
        if *cur < n {
            push(table.order[*cur], source, *cur + 1, &mut features);
            *cur += 1;
        }
        turn = 1 - turn;
    }
    Ok(SubsetSelection { features })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairOverlap {
    pub a: String,
    pub b: String,
    pub overlap: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub top_k: usize,
    pub pairwise: Vec<PairOverlap>,
    /// Size of the intersection across all methods.
    pub common: usize,
    pub common_features: Vec<String>,
}

pub fn compare_rankings(tables: &[RankTable], top_k: usize) -> Result<OverlapReport> {
    let Some(first) = tables.first() else {
        return Err(Error::Ranking("no rankings to compare".into()));
    };
    if tables
        .iter()
        .any(|t| t.feature_names != first.feature_names)
    {
        return Err(Error::Ranking("rankings cover different features".into()));
    }
    let sets: Vec<BTreeSet<usize>> = tables
        .iter()
        .map(|t| t.top(top_k).iter().copied().collect())
        .collect();
    let mut pairwise = Vec::new();
    for i in 0..tables.len() {
        for j in i + 1..tables.len() {
            pairwise.push(PairOverlap {
                a: tables[i].method.clone(),
                b: tables[j].method.clone(),
                overlap: sets[i].intersection(&sets[j]).count(),
            });
        }
    }
    let mut common = sets[0].clone();
    for s in &sets[1..] {
        common = common.intersection(s).copied().collect();
    }
    Ok(OverlapReport {
        top_k,
        pairwise,
        common: common.len(),
        common_features: common
            .iter()
            .map(|&i| first.feature_names[i].clone())
            .collect(),
    })
}

/// One row per method, one column per feature; columns follow the first
/// table's order (most important first).
pub fn write_rank_tables<W: std::io::Write>(tables: &[RankTable], w: W) -> Result<()> {
    let Some(first) = tables.first() else {
        return Err(Error::Ranking("no rankings to write".into()));
    };
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["method".to_string()];
    header.extend(first.order.iter().map(|&i| first.feature_names[i].clone()));
    wr.write_record(&header)?;
    for t in tables {
        let mut row = vec![t.method.clone()];
        row.extend(first.order.iter().map(|&i| t.ranks[i].to_string()));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}
