//! C4.5 decision tree: gain-ratio splits with the mean-gain guard and
//! pessimistic error pruning.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::classifiers::{Classifier, Prediction};
use crate::error::{Error, Result};
use crate::flow_model::{Dataset, FeatureKind, FeatureValue, FlowRecord, LABEL_NORMAL};
use crate::preprocess::entropy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct C45Params {
    /// Minimum records a split may leave in each of (at least) two branches.
    pub min_leaf: usize,
    /// Confidence factor for pessimistic error pruning (Weka-style, 0.25).
    pub confidence_factor: f64,
    /// Disable to keep the fully grown tree.
    pub prune: bool,
}

impl Default for C45Params {
    fn default() -> Self {
        C45Params {
            min_leaf: 2,
            confidence_factor: 0.25,
            prune: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        label: u8,
        counts: [u64; 2],
    },
    NumericSplit {
        feature: usize,
        threshold: f64,
        below: Box<TreeNode>,
        at_or_above: Box<TreeNode>,
    },
    CategoricalSplit {
        feature: usize,
        branches: BTreeMap<String, TreeNode>,
        /// Taken by tokens unseen at this node during training. Its counts
        /// are zero so it never contributes to subtree statistics.
        fallback: Box<TreeNode>,
    },
}

impl TreeNode {
    /// Training-record class counts reachable below this node (fallback
    /// branches excluded).
    fn counts(&self) -> [u64; 2] {
        match self {
            TreeNode::Leaf { counts, .. } => *counts,
            TreeNode::NumericSplit {
                below, at_or_above, ..
            } => {
                let a = below.counts();
                let b = at_or_above.counts();
                [a[0] + b[0], a[1] + b[1]]
            }
            TreeNode::CategoricalSplit { branches, .. } => {
                let mut c = [0u64; 2];
                for n in branches.values() {
                    let b = n.counts();
                    c[0] += b[0];
                    c[1] += b[1];
                }
                c
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::NumericSplit {
                below, at_or_above, ..
            } => 1 + below.depth().max(at_or_above.depth()),
            TreeNode::CategoricalSplit { branches, .. } => {
                1 + branches.values().map(TreeNode::depth).max().unwrap_or(0)
            }
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::NumericSplit {
                below, at_or_above, ..
            } => below.leaves() + at_or_above.leaves(),
            TreeNode::CategoricalSplit { branches, .. } => {
                branches.values().map(TreeNode::leaves).sum()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub root: TreeNode,
    pub feature_names: Vec<String>,
    feature_kinds: Vec<FeatureKind>,
    pub params: C45Params,
}

impl Classifier for DecisionTreeModel {
    fn tag(&self) -> &'static str {
        "dt"
    }

    fn predict(&self, record: &FlowRecord) -> Result<Prediction> {
        predict_tree(self, record).map(Prediction::plain)
    }
}

struct Builder<'a> {
    features: Vec<Vec<&'a FeatureValue>>,
    kinds: Vec<FeatureKind>,
    labels: Vec<u8>,
    min_leaf: usize,
}

enum Split {
    Numeric { feature: usize, threshold: f64 },
    Categorical { feature: usize },
}

struct Candidate {
    split: Split,
    gain: f64,
    split_info: f64,
}

/// Grows and (optionally) prunes a C4.5 tree.
///
/// At each node the feature whose best test maximizes gain ratio is chosen,
/// among tests with information gain at least the mean gain of all candidate
/// tests. Numeric tests are thresholds at midpoints between
/// class-boundary-adjacent distinct values; categorical tests branch per
/// token and are used at most once per path. Missing values must be imputed
/// before training.
pub fn train_c45(d: &Dataset, params: &C45Params) -> Result<DecisionTreeModel> {
    if d.is_empty() {
        return Err(Error::InvalidInput("cannot train a tree on an empty dataset".into()));
    }
    if params.min_leaf == 0 {
        return Err(Error::InvalidInput("min_leaf must be >= 1".into()));
    }
    let labels = d.labels()?;
    let kinds: Vec<FeatureKind> = d.schema().feature_columns().map(|c| c.kind).collect();
    let n_features = kinds.len();

    let mut features: Vec<Vec<&FeatureValue>> = vec![Vec::with_capacity(d.len()); n_features];
    for (i, r) in d.records().iter().enumerate() {
        for (j, v) in r.features.iter().enumerate() {
            if v.is_missing() {
                return Err(Error::InvalidInput(format!(
                    "record {i} has a missing value in feature {}; impute before training",
                    d.schema().feature_names()[j]
                )));
            }
            features[j].push(v);
        }
    }

    let builder = Builder {
        features,
        kinds: kinds.clone(),
        labels,
        min_leaf: params.min_leaf,
    };
    let indices: Vec<usize> = (0..d.len()).collect();
    let cat_available = vec![true; n_features];
    let mut root = builder.grow(&indices, &cat_available);
    if params.prune {
        root = prune(root, params.confidence_factor).0;
    }

    Ok(DecisionTreeModel {
        root,
        feature_names: d.schema().feature_names(),
        feature_kinds: kinds,
        params: *params,
    })
}

impl<'a> Builder<'a> {
    fn node_counts(&self, indices: &[usize]) -> [u64; 2] {
        let mut c = [0u64; 2];
        for &i in indices {
            c[self.labels[i] as usize] += 1;
        }
        c
    }

    fn leaf(&self, counts: [u64; 2]) -> TreeNode {
        TreeNode::Leaf {
            label: majority(counts),
            counts,
        }
    }

    fn grow(&self, indices: &[usize], cat_available: &[bool]) -> TreeNode {
        let counts = self.node_counts(indices);
        if counts[0] == 0 || counts[1] == 0 {
            return self.leaf(counts);
        }

        let mut candidates = Vec::new();
        for (j, kind) in self.kinds.iter().enumerate() {
            let c = match kind {
                FeatureKind::Numeric => self.best_numeric_split(j, indices, counts),
                FeatureKind::Categorical if cat_available[j] => {
                    self.categorical_split(j, indices, counts)
                }
                FeatureKind::Categorical => None,
            };
            if let Some(c) = c {
                candidates.push(c);
            }
        }
        if candidates.is_empty() {
            return self.leaf(counts);
        }

        let mean_gain: f64 =
            candidates.iter().map(|c| c.gain).sum::<f64>() / candidates.len() as f64;
        let best = candidates
            .into_iter()
            .filter(|c| c.gain + 1e-12 >= mean_gain)
            .max_by(|a, b| {
                let ra = a.gain / a.split_info.max(1e-12);
                let rb = b.gain / b.split_info.max(1e-12);
                // Ties go to the earlier feature / lower threshold.
                ra.partial_cmp(&rb)
                    .unwrap()
                    .then_with(|| split_order(&a.split).cmp(&split_order(&b.split)))
                    .then_with(|| {
                        split_threshold(&b.split).total_cmp(&split_threshold(&a.split))
                    })
            });
        let Some(best) = best else {
            return self.leaf(counts);
        };

        match best.split {
            Split::Numeric { feature, threshold } => {
                let (below, above): (Vec<usize>, Vec<usize>) = indices
                    .iter()
                    .partition(|&&i| self.num(feature, i) < threshold);
                TreeNode::NumericSplit {
                    feature,
                    threshold,
                    below: Box::new(self.grow(&below, cat_available)),
                    at_or_above: Box::new(self.grow(&above, cat_available)),
                }
            }
            Split::Categorical { feature } => {
                let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
                for &i in indices {
                    groups
                        .entry(self.cat(feature, i).to_string())
                        .or_default()
                        .push(i);
                }
                let mut remaining = cat_available.to_vec();
                remaining[feature] = false;
                let branches = groups
                    .into_iter()
                    .map(|(token, idx)| (token, self.grow(&idx, &remaining)))
                    .collect();
                TreeNode::CategoricalSplit {
                    feature,
                    branches,
                    fallback: Box::new(TreeNode::Leaf {
                        label: majority(counts),
                        counts: [0, 0],
                    }),
                }
            }
        }
    }

    fn num(&self, feature: usize, i: usize) -> f64 {
        self.features[feature][i].as_num().expect("numeric feature")
    }

    fn cat(&self, feature: usize, i: usize) -> &str {
        self.features[feature][i].as_cat().expect("categorical feature")
    }

    fn best_numeric_split(
        &self,
        feature: usize,
        indices: &[usize],
        counts: [u64; 2],
    ) -> Option<Candidate> {
        let mut pairs: Vec<(f64, u8)> = indices
            .iter()
            .map(|&i| (self.num(feature, i), self.labels[i]))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut runs: Vec<(f64, [u64; 2], u64)> = Vec::new();
        for (v, l) in pairs {
            match runs.last_mut() {
                Some((rv, c, size)) if *rv == v => {
                    c[l as usize] += 1;
                    *size += 1;
                }
                _ => {
                    let mut c = [0u64; 2];
                    c[l as usize] += 1;
                    runs.push((v, c, 1));
                }
            }
        }
        if runs.len() < 2 {
            return None;
        }

        let n = indices.len() as f64;
        let h_s = entropy(&counts).ok()?;
        let mut best: Option<(f64, f64, f64)> = None; // gain, split_info, threshold
        let mut left = [0u64; 2];
        let mut left_n = 0u64;
        for w in 0..runs.len() - 1 {
            left[0] += runs[w].1[0];
            left[1] += runs[w].1[1];
            left_n += runs[w].2;
            let boundary = !((runs[w].1[1] == 0 && runs[w + 1].1[1] == 0)
                || (runs[w].1[0] == 0 && runs[w + 1].1[0] == 0));
            if !boundary {
                continue;
            }
            let right = [counts[0] - left[0], counts[1] - left[1]];
            let right_n = indices.len() as u64 - left_n;
            if (left_n as usize) < self.min_leaf || (right_n as usize) < self.min_leaf {
                continue;
            }
            let cond = left_n as f64 / n * entropy_or_zero(&left)
                + right_n as f64 / n * entropy_or_zero(&right);
            let gain = h_s - cond;
            if best.is_none_or(|(g, _, _)| gain > g) {
                let split_info = entropy(&[left_n, right_n]).unwrap_or(0.0);
                let threshold = (runs[w].0 + runs[w + 1].0) / 2.0;
                best = Some((gain, split_info, threshold));
            }
        }
        best.map(|(gain, split_info, threshold)| Candidate {
            split: Split::Numeric { feature, threshold },
            gain: gain.max(0.0),
            split_info,
        })
    }

    fn categorical_split(
        &self,
        feature: usize,
        indices: &[usize],
        counts: [u64; 2],
    ) -> Option<Candidate> {
        let mut groups: BTreeMap<&str, ([u64; 2], u64)> = BTreeMap::new();
        for &i in indices {
            let e = groups.entry(self.cat(feature, i)).or_default();
            e.0[self.labels[i] as usize] += 1;
            e.1 += 1;
        }
        if groups.len() < 2 {
            return None;
        }
        let viable = groups
            .values()
            .filter(|(_, size)| *size as usize >= self.min_leaf)
            .count();
        if viable < 2 {
            return None;
        }

        let n = indices.len() as f64;
        let h_s = entropy(&counts).ok()?;
        let mut cond = 0.0;
        let sizes: Vec<u64> = groups.values().map(|(_, s)| *s).collect();
        for (c, size) in groups.values() {
            cond += *size as f64 / n * entropy_or_zero(c);
        }
        Some(Candidate {
            split: Split::Categorical { feature },
            gain: (h_s - cond).max(0.0),
            split_info: entropy(&sizes).unwrap_or(0.0),
        })
    }
}

fn split_order(s: &Split) -> std::cmp::Reverse<usize> {
    std::cmp::Reverse(match s {
        Split::Numeric { feature, .. } | Split::Categorical { feature } => *feature,
    })
}

fn split_threshold(s: &Split) -> f64 {
    match s {
        Split::Numeric { threshold, .. } => *threshold,
        Split::Categorical { .. } => f64::NEG_INFINITY,
    }
}

fn entropy_or_zero(counts: &[u64; 2]) -> f64 {
    entropy(&counts[..]).unwrap_or(0.0)
}

fn majority(counts: [u64; 2]) -> u8 {
    // Exact tie resolves to normal.
    if counts[1] > counts[0] {
        1
    } else {
        LABEL_NORMAL
    }
}

/// Pessimistic upper bound on the number of errors, after Quinlan's C4.5
/// (the continuity-corrected binomial upper limit).
fn add_errs(n: f64, e: f64, cf: f64) -> f64 {
    if cf > 0.5 {
        return 0.0;
    }
    if e < 1.0 {
        let base = n * (1.0 - cf.powf(1.0 / n));
        if e == 0.0 {
            return base;
        }
        return base + e * (add_errs(n, 1.0, cf) - base);
    }
    if e + 0.5 >= n {
        return (n - e).max(0.0);
    }
    let z = Normal::standard().inverse_cdf(1.0 - cf);
    let f = (e + 0.5) / n;
    let r = (f + z * z / (2.0 * n)
        + z * (f / n - f * f / n + z * z / (4.0 * n * n)).sqrt())
        / (1.0 + z * z / n);
    (r * n - e).max(0.0)
}

/// Bottom-up subtree replacement: a subtree collapses to a leaf when the
/// leaf's pessimistic error estimate does not exceed the subtree's.
fn prune(node: TreeNode, cf: f64) -> (TreeNode, f64) {
    match node {
        TreeNode::Leaf { label, counts } => {
            let est = leaf_error_estimate(counts, cf);
            (TreeNode::Leaf { label, counts }, est)
        }
        TreeNode::NumericSplit {
            feature,
            threshold,
            below,
            at_or_above,
        } => {
            let (below, e_below) = prune(*below, cf);
            let (above, e_above) = prune(*at_or_above, cf);
            let node = TreeNode::NumericSplit {
                feature,
                threshold,
                below: Box::new(below),
                at_or_above: Box::new(above),
            };
            collapse_if_cheaper(node, e_below + e_above, cf)
        }
        TreeNode::CategoricalSplit {
            feature,
            branches,
            fallback,
        } => {
            let mut subtree_err = 0.0;
            let branches: BTreeMap<String, TreeNode> = branches
                .into_iter()
                .map(|(t, n)| {
                    let (n, e) = prune(n, cf);
                    subtree_err += e;
                    (t, n)
                })
                .collect();
            let node = TreeNode::CategoricalSplit {
                feature,
                branches,
                fallback,
            };
            collapse_if_cheaper(node, subtree_err, cf)
        }
    }
}

fn collapse_if_cheaper(node: TreeNode, subtree_err: f64, cf: f64) -> (TreeNode, f64) {
    let counts = node.counts();
    let leaf_err = leaf_error_estimate(counts, cf);
    if leaf_err <= subtree_err + 0.1 {
        (
            TreeNode::Leaf {
                label: majority(counts),
                counts,
            },
            leaf_err,
        )
    } else {
        (node, subtree_err)
    }
}

fn leaf_error_estimate(counts: [u64; 2], cf: f64) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let errors = counts[0].min(counts[1]) as f64;
    errors + add_errs(n, errors, cf)
}

/// Deterministic path walk. Numeric comparison is left-closed: a value equal
/// to the threshold goes to `at_or_above`. Unseen categorical tokens (and
/// missing values) take the fallback branch; missing numerics go below.
pub fn predict_tree(m: &DecisionTreeModel, record: &FlowRecord) -> Result<u8> {
    if record.features.len() != m.feature_names.len() {
        return Err(Error::SchemaMismatch(format!(
            "record has {} features, model expects {}",
            record.features.len(),
            m.feature_names.len()
        )));
    }
    let mut node = &m.root;
    loop {
        match node {
            TreeNode::Leaf { label, .. } => return Ok(*label),
            TreeNode::NumericSplit {
                feature,
                threshold,
                below,
                at_or_above,
            } => {
                node = match &record.features[*feature] {
                    FeatureValue::Num(v) if *v >= *threshold => at_or_above,
                    FeatureValue::Num(_) | FeatureValue::Missing => below,
                    FeatureValue::Cat(t) => {
                        return Err(Error::SchemaMismatch(format!(
                            "feature {} expected numeric, got token {t:?}",
                            m.feature_names[*feature]
                        )))
                    }
                };
            }
            TreeNode::CategoricalSplit {
                feature,
                branches,
                fallback,
            } => {
                node = match &record.features[*feature] {
                    FeatureValue::Cat(t) => branches.get(t).unwrap_or(fallback),
                    FeatureValue::Missing => fallback,
                    FeatureValue::Num(v) => {
                        return Err(Error::SchemaMismatch(format!(
                            "feature {} expected categorical, got number {v}",
                            m.feature_names[*feature]
                        )))
                    }
                };
            }
        }
    }
}
