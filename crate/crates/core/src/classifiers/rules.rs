//! Class-association rule mining: level-wise (Apriori-style) enumeration of
//! antecedent itemsets over (feature, token) pairs, with rules sorted by
//! (confidence desc, support desc, antecedent size asc, id asc) and
//! first-match prediction.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::classifiers::{Classifier, Prediction};
use crate::error::{Error, Result};
use crate::flow_model::{Dataset, FeatureKind, FeatureValue, FlowRecord, LABEL_NORMAL};

/// Sorted (feature index, token) items forming a rule antecedent.
type Itemset = Vec<(usize, String)>;
/// Per-class occurrence counts of one itemset.
type ClassCounts = [u64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArmParams {
    /// Minimum antecedent support, fraction of records in (0, 1].
    pub min_support: f64,
    /// Minimum rule confidence in (0, 1].
    pub min_confidence: f64,
    /// Maximum antecedent items.
    pub max_antecedent: usize,
}

impl Default for ArmParams {
    fn default() -> Self {
        ArmParams {
            min_support: 0.01,
            min_confidence: 0.8,
            max_antecedent: 3,
        }
    }
}

/// `{feature=token, ...} => label` with its training support and confidence.
///
/// `support` is the joint frequency of antecedent and class; `confidence`
/// is support divided by the antecedent frequency. Items are stored as
/// (feature index, token), sorted by feature index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRule {
    pub antecedent: Vec<(usize, String)>,
    pub label: u8,
    pub support: f64,
    pub confidence: f64,
    pub id: u64,
}

impl ClassRule {
    pub fn matches(&self, record: &FlowRecord) -> bool {
        self.antecedent
            .iter()
            .all(|(j, token)| record.features[*j].as_cat() == Some(token.as_str()))
    }

    /// Human-readable form using the model's feature names.
    pub fn display(&self, feature_names: &[String]) -> String {
        let items: Vec<String> = self
            .antecedent
            .iter()
            .map(|(j, t)| format!("{}={}", feature_names[*j], t))
            .collect();
        format!(
            "#{}: {{{}}} => {} (support {:.4}, confidence {:.4})",
            self.id,
            items.join(", "),
            self.label,
            self.support,
            self.confidence
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleListModel {
    pub feature_names: Vec<String>,
    pub rules: Vec<ClassRule>,
    pub default_label: u8,
    pub params: ArmParams,
}

impl Classifier for RuleListModel {
    fn tag(&self) -> &'static str {
        "arm"
    }

    fn predict(&self, record: &FlowRecord) -> Result<Prediction> {
        let (label, rule_id) = predict_rules(self, record)?;
        Ok(Prediction { label, rule_id })
    }
}

/// Mines the rule list from a fully categorical dataset.
///
/// Itemsets are grown level-wise up to `max_antecedent` items (at most one
/// per feature) and pruned by antecedent support; a rule `itemset => c` is
/// emitted for each class whose confidence clears `min_confidence`. Rule ids
/// follow enumeration order (by level, then lexicographically), making the
/// whole model deterministic.
pub fn mine_class_rules(d: &Dataset, params: &ArmParams) -> Result<RuleListModel> {
    if !(params.min_support > 0.0 && params.min_support <= 1.0) {
        return Err(Error::InvalidInput("min_support must be in (0, 1]".into()));
    }
    if !(params.min_confidence > 0.0 && params.min_confidence <= 1.0) {
        return Err(Error::InvalidInput("min_confidence must be in (0, 1]".into()));
    }
    for col in d.schema().feature_columns() {
        if col.kind != FeatureKind::Numeric {
            continue;
        }
        return Err(Error::InvalidInput(format!(
            "feature {} is numeric; discretize before rule mining",
            col.name
        )));
    }
    let (n0, n1) = d.class_counts()?;
    let n = d.len();
    if n == 0 {
        return Err(Error::InvalidInput("cannot mine rules from an empty dataset".into()));
    }
    let labels = d.labels()?;
    let default_label = if n1 > n0 { 1 } else { LABEL_NORMAL };

    // Transactions as sorted (feature, token) vectors.
    let transactions: Vec<Vec<(usize, &str)>> = d
        .records()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.features
                .iter()
                .enumerate()
                .map(|(j, v)| match v {
                    FeatureValue::Cat(t) => Ok((j, t.as_str())),
                    other => Err(Error::InvalidInput(format!(
                        "record {i} feature {j} is not categorical: {other:?}"
                    ))),
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let min_count = (params.min_support * n as f64).ceil().max(1.0) as u64;
    let mut rules = Vec::new();
    let mut next_id = 0u64;

    // Frequent 1-itemsets.
    let mut counts: BTreeMap<Itemset, ClassCounts> = BTreeMap::new();
    for (t, &l) in transactions.iter().zip(&labels) {
        for &(j, tok) in t {
            counts.entry(vec![(j, tok.to_string())]).or_default()[l as usize] += 1;
        }
    }
    let mut frequent: Vec<(Itemset, ClassCounts)> = counts
        .into_iter()
        .filter(|(_, c)| c[0] + c[1] >= min_count)
        .collect();
    emit_rules(&frequent, n as u64, params, &mut rules, &mut next_id);

    for _level in 2..=params.max_antecedent {
        if frequent.is_empty() {
            break;
        }
        let candidates = join_candidates(&frequent);
        if candidates.is_empty() {
            break;
        }
        let mut counts: HashMap<&[(usize, String)], [u64; 2]> =
            candidates.iter().map(|c| (c.as_slice(), [0u64; 2])).collect();
        for (t, &l) in transactions.iter().zip(&labels) {
            for c in &candidates {
                if contains_itemset(t, c) {
                    counts.get_mut(c.as_slice()).expect("candidate present")[l as usize] += 1;
                }
            }
        }
        frequent = candidates
            .iter()
            .filter_map(|c| {
                let cc = counts[c.as_slice()];
                (cc[0] + cc[1] >= min_count).then(|| (c.clone(), cc))
            })
            .collect();
        emit_rules(&frequent, n as u64, params, &mut rules, &mut next_id);
    }

    rules.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(b.support.total_cmp(&a.support))
            .then(a.antecedent.len().cmp(&b.antecedent.len()))
            .then(a.id.cmp(&b.id))
    });

    Ok(RuleListModel {
        feature_names: d.schema().feature_names(),
        rules,
        default_label,
        params: *params,
    })
}

fn emit_rules(
    frequent: &[(Itemset, ClassCounts)],
    n: u64,
    params: &ArmParams,
    rules: &mut Vec<ClassRule>,
    next_id: &mut u64,
) {
    for (itemset, class_counts) in frequent {
        let antecedent_count = class_counts[0] + class_counts[1];
        for label in [0u8, 1u8] {
            let joint = class_counts[label as usize];
            let confidence = joint as f64 / antecedent_count as f64;
            if confidence >= params.min_confidence {
                rules.push(ClassRule {
                    antecedent: itemset.clone(),
                    label,
                    support: joint as f64 / n as f64,
                    confidence,
                    id: *next_id,
                });
                *next_id += 1;
            }
        }
    }
}

/// Apriori join: merge sorted k-itemsets sharing their first k-1 items, then
/// keep candidates whose every (k-1)-subset is frequent. Items in one
/// itemset must come from distinct features.
fn join_candidates(
    frequent: &[(Itemset, ClassCounts)],
) -> Vec<Itemset> {
    let freq_set: std::collections::HashSet<&[(usize, String)]> =
        frequent.iter().map(|(i, _)| i.as_slice()).collect();
    let mut out = Vec::new();
    for (a_idx, (a, _)) in frequent.iter().enumerate() {
        for (b, _) in &frequent[a_idx + 1..] {
            if a[..a.len() - 1] != b[..b.len() - 1] {
                continue;
            }
            let (last_a, last_b) = (&a[a.len() - 1], &b[b.len() - 1]);
            if last_a.0 == last_b.0 {
                // Two tokens of the same feature never co-occur.
                continue;
            }
            let mut candidate = a.clone();
            candidate.push(last_b.clone());
            candidate.sort();
            let all_subsets_frequent = (0..candidate.len()).all(|skip| {
                let subset: Vec<(usize, String)> = candidate
                    .iter()
                    .enumerate()
                    .filter(|&(i, _item)| i != skip).map(|(_i, item)| item.clone())
                    .collect();
                freq_set.contains(subset.as_slice())
            });
            if all_subsets_frequent {
                out.push(candidate);
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

fn contains_itemset(transaction: &[(usize, &str)], itemset: &[(usize, String)]) -> bool {
    itemset
        .iter()
        .all(|(j, tok)| transaction[*j].1 == tok.as_str())
}

/// First rule in sort order whose antecedent the record satisfies; when none
/// fires, the default label with no rule id.
pub fn predict_rules(m: &RuleListModel, record: &FlowRecord) -> Result<(u8, Option<u64>)> {
    if record.features.len() != m.feature_names.len() {
        return Err(Error::SchemaMismatch(format!(
            "record has {} features, model expects {}",
            record.features.len(),
            m.feature_names.len()
        )));
    }
    for rule in &m.rules {
        if rule.matches(record) {
            return Ok((rule.label, Some(rule.id)));
        }
    }
    Ok((m.default_label, None))
}
