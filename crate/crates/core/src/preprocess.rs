//! Supervised discretization, entropy, Information Gain ranking and top-k
//! feature selection.
//!
//! All logarithms are base 2, so entropy and gain are in bits.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow_model::{
    Column, ColumnRole, Dataset, FeatureKind, FeatureSchema, FeatureValue, FlowRecord,
};

/// Shannon entropy of a class-count vector, in bits. `0 log 0` counts as 0.
pub fn entropy(counts: &[u64]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidInput("entropy of all-zero counts".into()));
    }
    let n = total as f64;
    let mut h = 0.0;
    for &c in counts {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.log2();
        }
    }
    Ok(h)
}

/// Strictly increasing cut thresholds for one numeric feature. Empty means
/// the feature collapses to a single bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutPoints {
    pub feature: String,
    pub thresholds: Vec<f64>,
}

impl CutPoints {
    pub fn new(feature: impl Into<String>, thresholds: Vec<f64>) -> Result<Self> {
        if !thresholds.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput(
                "cut thresholds must be strictly increasing".into(),
            ));
        }
        if thresholds.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("cut thresholds must be finite".into()));
        }
        Ok(CutPoints {
            feature: feature.into(),
            thresholds,
        })
    }

    /// Bin index for a value: the count of thresholds <= value, so a value
    /// equal to a threshold lands in the upper bin.
    pub fn bin(&self, value: f64) -> usize {
        self.thresholds.iter().take_while(|&&t| t <= value).count()
    }
}

/// Per-feature cut points for numeric features; categorical features pass
/// through unchanged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationMap {
    cuts: BTreeMap<String, CutPoints>,
}

impl DiscretizationMap {
    pub fn from_cuts(cuts: Vec<CutPoints>) -> Self {
        DiscretizationMap {
            cuts: cuts.into_iter().map(|c| (c.feature.clone(), c)).collect(),
        }
    }

    pub fn get(&self, feature: &str) -> Option<&CutPoints> {
        self.cuts.get(feature)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum BinningMethod {
    /// Recursive entropy minimization with the Fayyad-Irani MDL stopping rule.
    #[default]
    Mdl,
    /// Equal-frequency quantile cuts (fallback for unlabeled data).
    EqualFrequency(usize),
}


/// MDL-based supervised discretization of one numeric feature.
///
/// Candidate cuts are midpoints between class-boundary-adjacent distinct
/// values; each accepted cut maximizes entropy reduction and passes the MDL
/// criterion. A feature with a single distinct value yields no thresholds.
pub fn discretize_mdl(d: &Dataset, feature: &str) -> Result<CutPoints> {
    let idx = d.schema().feature_index(feature)?;
    let col = d
        .schema()
        .feature_columns()
        .nth(idx)
        .expect("index from feature_index");
    if col.kind != FeatureKind::Numeric {
        return Err(Error::InvalidInput(format!(
            "discretize_mdl: feature {feature} is not numeric"
        )));
    }

    let mut pairs: Vec<(f64, u8)> = Vec::with_capacity(d.len());
    for (i, r) in d.records().iter().enumerate() {
        let label = r.label.ok_or(Error::UnlabeledRecord { index: i })?;
        if let Some(v) = r.features[idx].as_num() {
            pairs.push((v, label));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Collapse to runs of equal value with per-run class counts.
    let mut runs: Vec<(f64, [u64; 2])> = Vec::new();
    for (v, l) in pairs {
        match runs.last_mut() {
            Some((rv, counts)) if *rv == v => counts[l as usize] += 1,
            _ => {
                let mut counts = [0u64; 2];
                counts[l as usize] += 1;
                runs.push((v, counts));
            }
        }
    }

    let mut thresholds = Vec::new();
    mdl_recurse(&runs, &mut thresholds);
    thresholds.sort_by(f64::total_cmp);
    CutPoints::new(feature, thresholds)
}

fn class_counts_of(runs: &[(f64, [u64; 2])]) -> [u64; 2] {
    let mut c = [0u64; 2];
    for (_, rc) in runs {
        c[0] += rc[0];
        c[1] += rc[1];
    }
    c
}

fn n_classes(c: &[u64; 2]) -> u32 {
    c.iter().filter(|&&x| x > 0).count() as u32
}

fn entropy2(c: &[u64; 2]) -> f64 {
    let total = c[0] + c[1];
    if total == 0 {
        return 0.0;
    }
    entropy(&[c[0], c[1]]).unwrap_or(0.0)
}

fn mdl_recurse(runs: &[(f64, [u64; 2])], out: &mut Vec<f64>) {
    if runs.len() < 2 {
        return;
    }
    let total_counts = class_counts_of(runs);
    let n = (total_counts[0] + total_counts[1]) as f64;
    let h_s = entropy2(&total_counts);
    if h_s == 0.0 {
        return;
    }

    // Best boundary cut by information gain.
    let mut best: Option<(usize, f64, [u64; 2], [u64; 2])> = None;
    let mut left = [0u64; 2];
    for i in 0..runs.len() - 1 {
        left[0] += runs[i].1[0];
        left[1] += runs[i].1[1];
        if !is_boundary(&runs[i].1, &runs[i + 1].1) {
            continue;
        }
        let right = [total_counts[0] - left[0], total_counts[1] - left[1]];
        let nl = (left[0] + left[1]) as f64;
        let nr = (right[0] + right[1]) as f64;
        let split_entropy = nl / n * entropy2(&left) + nr / n * entropy2(&right);
        let gain = h_s - split_entropy;
        if best.is_none_or(|(_, g, _, _)| gain > g) {
            best = Some((i, gain, left, right));
        }
    }
    let Some((cut_run, gain, left, right)) = best else {
        return;
    };

    // Fayyad-Irani MDL acceptance test.
    let k = n_classes(&total_counts) as f64;
    let k1 = n_classes(&left) as f64;
    let k2 = n_classes(&right) as f64;
    let delta = (3f64.powf(k) - 2.0).log2()
        - (k * h_s - k1 * entropy2(&left) - k2 * entropy2(&right));
    let threshold_cost = ((n - 1.0).log2() + delta) / n;
    if gain <= threshold_cost {
        return;
    }

    out.push((runs[cut_run].0 + runs[cut_run + 1].0) / 2.0);
    mdl_recurse(&runs[..=cut_run], out);
    mdl_recurse(&runs[cut_run + 1..], out);
}

/// A midpoint is a candidate unless both adjacent runs are pure and of the
/// same class.
fn is_boundary(a: &[u64; 2], b: &[u64; 2]) -> bool {
    let pure_same = (a[1] == 0 && b[1] == 0) || (a[0] == 0 && b[0] == 0);
    !pure_same
}

/// Equal-frequency cuts at the requested number of bins.
pub fn discretize_equal_frequency(d: &Dataset, feature: &str, bins: usize) -> Result<CutPoints> {
    if bins < 1 {
        return Err(Error::InvalidInput("bins must be >= 1".into()));
    }
    let idx = d.schema().feature_index(feature)?;
    let mut vals: Vec<f64> = d
        .records()
        .iter()
        .filter_map(|r| r.features[idx].as_num())
        .collect();
    vals.sort_by(f64::total_cmp);
    let mut thresholds = Vec::new();
    if !vals.is_empty() {
        for b in 1..bins {
            let pos = b * vals.len() / bins;
            if pos == 0 || pos >= vals.len() {
                continue;
            }
            let t = (vals[pos - 1] + vals[pos]) / 2.0;
            if vals[pos - 1] < vals[pos] && thresholds.last().is_none_or(|&last| t > last) {
                thresholds.push(t);
            }
        }
    }
    CutPoints::new(feature, thresholds)
}

/// Fits cut points for every numeric feature column.
pub fn fit_discretization(d: &Dataset, method: BinningMethod) -> Result<DiscretizationMap> {
    let mut cuts = Vec::new();
    for col in d.schema().feature_columns() {
        if col.kind == FeatureKind::Numeric {
            let c = match method {
                BinningMethod::Mdl => discretize_mdl(d, &col.name)?,
                BinningMethod::EqualFrequency(bins) => {
                    discretize_equal_frequency(d, &col.name, bins)?
                }
            };
            cuts.push(c);
        }
    }
    Ok(DiscretizationMap::from_cuts(cuts))
}

/// Replaces numeric values with `bin_i` tokens; categorical values pass
/// through; schema kinds become categorical. Every numeric feature column
/// must be covered by the map.
pub fn apply_discretization(d: &Dataset, m: &DiscretizationMap) -> Result<Dataset> {
    let feature_cols: Vec<Column> = d.schema().feature_columns().cloned().collect();
    let mut cuts_by_index: Vec<Option<&CutPoints>> = Vec::with_capacity(feature_cols.len());
    for col in &feature_cols {
        match col.kind {
            FeatureKind::Numeric => {
                let c = m
                    .get(&col.name)
                    .ok_or_else(|| Error::UncoveredFeature(col.name.clone()))?;
                cuts_by_index.push(Some(c));
            }
            FeatureKind::Categorical => cuts_by_index.push(None),
        }
    }

    let columns = d
        .schema()
        .columns()
        .iter()
        .map(|c| {
            if c.role == ColumnRole::Feature {
                Column::new(c.name.clone(), FeatureKind::Categorical, c.role)
            } else {
                c.clone()
            }
        })
        .collect();
    let schema = FeatureSchema::new(columns, d.schema().class_positive())?;

    let records = d
        .records()
        .iter()
        .map(|r| {
            let features = r
                .features
                .iter()
                .zip(&cuts_by_index)
                .map(|(v, cuts)| match (v, cuts) {
                    (FeatureValue::Num(x), Some(c)) => FeatureValue::cat(format!("bin_{}", c.bin(*x))),
                    (other, _) => other.clone(),
                })
                .collect();
            FlowRecord {
                key: r.key.clone(),
                features,
                label: r.label,
                attack_cat: r.attack_cat.clone(),
            }
        })
        .collect();
    Dataset::new(schema, records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature: String,
    pub ig: f64,
}

/// Scores sorted descending by gain; ties broken by schema column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub scores: Vec<FeatureScore>,
}

impl FeatureRanking {
    /// `rank,feature,ig` lines with gain printed to 3 decimals.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.scores.iter().enumerate() {
            out.push_str(&format!("{},{},{:.3}\n", i + 1, s.feature, s.ig));
        }
        out
    }
}

/// Information gain of one feature over the discretized view:
/// `H(class) - sum_bins |bin|/|d| * H(class | bin)`.
///
/// Missing values form their own bin.
pub fn information_gain(
    d: &Dataset,
    feature: &str,
    m: &DiscretizationMap,
) -> Result<FeatureScore> {
    let idx = d.schema().feature_index(feature)?;
    let col = d
        .schema()
        .feature_columns()
        .nth(idx)
        .expect("index from feature_index");
    let cuts = if col.kind == FeatureKind::Numeric {
        Some(
            m.get(feature)
                .ok_or_else(|| Error::UncoveredFeature(feature.to_string()))?,
        )
    } else {
        None
    };

    let (n0, n1) = d.class_counts()?;
    let h_s = entropy(&[n0, n1])?;
    let total = (n0 + n1) as f64;

    let mut bins: HashMap<String, [u64; 2]> = HashMap::new();
    for (i, r) in d.records().iter().enumerate() {
        let label = r.label.ok_or(Error::UnlabeledRecord { index: i })? as usize;
        let token = match (&r.features[idx], cuts) {
            (FeatureValue::Num(x), Some(c)) => format!("bin_{}", c.bin(*x)),
            (FeatureValue::Cat(t), _) => t.clone(),
            (FeatureValue::Missing, _) => "missing".to_string(),
            (FeatureValue::Num(x), None) => {
                return Err(Error::InvalidInput(format!(
                    "categorical feature {feature} holds numeric value {x}"
                )))
            }
        };
        bins.entry(token).or_default()[label] += 1;
    }

    let mut conditional = 0.0;
    for counts in bins.values() {
        let bin_total = (counts[0] + counts[1]) as f64;
        conditional += bin_total / total * entropy2(counts);
    }
    // Clamp tiny negative rounding residue.
    let ig = (h_s - conditional).max(0.0);
    Ok(FeatureScore {
        feature: feature.to_string(),
        ig,
    })
}

/// Discretizes every numeric feature, scores all features, and sorts
/// descending by gain (ties by schema column order).
pub fn rank_features(d: &Dataset) -> Result<FeatureRanking> {
    rank_features_with(d, BinningMethod::Mdl)
}

pub fn rank_features_with(d: &Dataset, method: BinningMethod) -> Result<FeatureRanking> {
    if d.schema().n_features() == 0 {
        return Err(Error::InvalidInput("no feature columns to rank".into()));
    }
    let map = fit_discretization(d, method)?;
    let mut scores = Vec::with_capacity(d.schema().n_features());
    for col in d.schema().feature_columns() {
        scores.push(information_gain(d, &col.name, &map)?);
    }
    // Stable sort keeps schema order for equal scores.
    scores.sort_by(|a, b| b.ig.total_cmp(&a.ig));
    Ok(FeatureRanking { scores })
}

/// First `k` feature names in ranking order.
pub fn select_top_k(r: &FeatureRanking, k: usize) -> Result<Vec<String>> {
    if k == 0 || k > r.scores.len() {
        return Err(Error::InvalidInput(format!(
            "top-k of {k} out of range for {} ranked features",
            r.scores.len()
        )));
    }
    Ok(r.scores[..k].iter().map(|s| s.feature.clone()).collect())
}

/// Fitted one-hot expansion: categorical features become indicator columns
/// over the training vocabulary; numeric features pass through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotMap {
    /// Per feature column: `None` for pass-through numeric, `Some(vocab)`
    /// (sorted) for categorical expansion.
    vocabs: Vec<Option<Vec<String>>>,
    feature_names: Vec<String>,
}

pub fn fit_one_hot(d: &Dataset) -> OneHotMap {
    let cols: Vec<Column> = d.schema().feature_columns().cloned().collect();
    let mut vocabs = Vec::with_capacity(cols.len());
    for (j, col) in cols.iter().enumerate() {
        match col.kind {
            FeatureKind::Numeric => vocabs.push(None),
            FeatureKind::Categorical => {
                let mut tokens: Vec<String> = d
                    .records()
                    .iter()
                    .filter_map(|r| r.features[j].as_cat().map(str::to_string))
                    .collect();
                tokens.sort();
                tokens.dedup();
                vocabs.push(Some(tokens));
            }
        }
    }
    let feature_names = cols.iter().map(|c| c.name.clone()).collect();
    OneHotMap {
        vocabs,
        feature_names,
    }
}

/// Applies a fitted one-hot map; tokens unseen in training encode as all
/// zeros.
pub fn apply_one_hot(d: &Dataset, m: &OneHotMap) -> Result<Dataset> {
    let names = d.schema().feature_names();
    if names != m.feature_names {
        return Err(Error::SchemaMismatch(
            "one-hot map was fitted on a different feature set".into(),
        ));
    }
    let mut columns: Vec<Column> = d
        .schema()
        .columns()
        .iter()
        .filter(|c| c.role != ColumnRole::Feature)
        .cloned()
        .collect();
    for (name, vocab) in m.feature_names.iter().zip(&m.vocabs) {
        match vocab {
            None => columns.push(Column::new(name.clone(), FeatureKind::Numeric, ColumnRole::Feature)),
            Some(tokens) => {
                for t in tokens {
                    columns.push(Column::new(
                        format!("{name}={t}"),
                        FeatureKind::Numeric,
                        ColumnRole::Feature,
                    ));
                }
            }
        }
    }
    let schema = FeatureSchema::new(columns, d.schema().class_positive())?;

    let records = d
        .records()
        .iter()
        .map(|r| {
            let mut features = Vec::with_capacity(schema.n_features());
            for (v, vocab) in r.features.iter().zip(&m.vocabs) {
                match vocab {
                    None => features.push(v.clone()),
                    Some(tokens) => {
                        let hit = v.as_cat();
                        for t in tokens {
                            let on = hit == Some(t.as_str());
                            features.push(FeatureValue::Num(if on { 1.0 } else { 0.0 }));
                        }
                    }
                }
            }
            FlowRecord {
                key: r.key.clone(),
                features,
                label: r.label,
                attack_cat: r.attack_cat.clone(),
            }
        })
        .collect();
    Dataset::new(schema, records)
}
