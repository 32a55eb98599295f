//! Naive Bayes with Gaussian numeric likelihoods and Laplace-smoothed
//! categorical tables. All probability math is in log space.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classifiers::{Classifier, Prediction};
use crate::error::{Error, Result};
use crate::flow_model::{Dataset, FeatureKind, FeatureValue, FlowRecord, LABEL_NORMAL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NbParams {
    /// Per-feature variance floor is `variance_floor_scale * range` (or
    /// `variance_floor_scale` itself when the feature range is zero).
    pub variance_floor_scale: f64,
    pub laplace_alpha: f64,
}

impl Default for NbParams {
    fn default() -> Self {
        NbParams {
            variance_floor_scale: 1e-9,
            laplace_alpha: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "likelihood", rename_all = "snake_case")]
enum FeatureLikelihood {
    Gaussian {
        mean: [f64; 2],
        variance: [f64; 2],
    },
    Table {
        /// Smoothed token counts per class; log-probabilities are derived
        /// from these at predict time.
        counts: [BTreeMap<String, u64>; 2],
        class_totals: [u64; 2],
        vocab_size: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub feature_names: Vec<String>,
    log_priors: [f64; 2],
    likelihoods: Vec<FeatureLikelihood>,
    pub params: NbParams,
}

impl Classifier for NaiveBayesModel {
    fn tag(&self) -> &'static str {
        "nb"
    }

    fn predict(&self, record: &FlowRecord) -> Result<Prediction> {
        predict_nb(self, record).map(|(label, _)| Prediction::plain(label))
    }
}

impl NaiveBayesModel {
    pub fn priors(&self) -> [f64; 2] {
        [self.log_priors[0].exp(), self.log_priors[1].exp()]
    }
}

/// Fits class priors and per-feature likelihoods.
///
/// Numeric features get per-class mean and floored sample variance;
/// categorical features get `(count + alpha) / (class_total + alpha * vocab)`
/// tables over the training vocabulary.
pub fn train_nb(d: &Dataset, params: &NbParams) -> Result<NaiveBayesModel> {
    if params.variance_floor_scale <= 0.0 || params.laplace_alpha <= 0.0 {
        return Err(Error::InvalidInput(
            "variance_floor_scale and laplace_alpha must be > 0".into(),
        ));
    }
    let (n0, n1) = d.class_counts()?;
    if n0 == 0 || n1 == 0 {
        return Err(Error::InvalidInput(format!(
            "both classes must be present to train naive bayes (normal={n0}, attack={n1})"
        )));
    }
    let total = (n0 + n1) as f64;
    let log_priors = [
        (n0 as f64 / total).ln(),
        (n1 as f64 / total).ln(),
    ];

    let labels = d.labels()?;
    let cols: Vec<_> = d.schema().feature_columns().cloned().collect();
    let mut likelihoods = Vec::with_capacity(cols.len());
    for (j, col) in cols.iter().enumerate() {
        let lk = match col.kind {
            FeatureKind::Numeric => {
                let mut sum = [0.0f64; 2];
                let mut count = [0u64; 2];
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for (r, &l) in d.records().iter().zip(&labels) {
                    if let Some(v) = r.features[j].as_num() {
                        sum[l as usize] += v;
                        count[l as usize] += 1;
                        min = min.min(v);
                        max = max.max(v);
                    }
                }
                let range = if max > min { max - min } else { 0.0 };
                let floor = if range > 0.0 {
                    params.variance_floor_scale * range
                } else {
                    params.variance_floor_scale
                };
                let mut mean = [0.0f64; 2];
                let mut variance = [floor; 2];
                for c in 0..2 {
                    if count[c] > 0 {
                        mean[c] = sum[c] / count[c] as f64;
                    }
                }
                let mut ssq = [0.0f64; 2];
                for (r, &l) in d.records().iter().zip(&labels) {
                    if let Some(v) = r.features[j].as_num() {
                        let diff = v - mean[l as usize];
                        ssq[l as usize] += diff * diff;
                    }
                }
                for c in 0..2 {
                    if count[c] > 1 {
                        variance[c] = (ssq[c] / (count[c] - 1) as f64).max(floor);
                    }
                }
                FeatureLikelihood::Gaussian { mean, variance }
            }
            FeatureKind::Categorical => {
                let mut counts: [BTreeMap<String, u64>; 2] = [BTreeMap::new(), BTreeMap::new()];
                let mut class_totals = [0u64; 2];
                let mut vocab: std::collections::BTreeSet<&str> = Default::default();
                for (r, &l) in d.records().iter().zip(&labels) {
                    if let Some(t) = r.features[j].as_cat() {
                        *counts[l as usize].entry(t.to_string()).or_default() += 1;
                        class_totals[l as usize] += 1;
                        vocab.insert(t);
                    }
                }
                FeatureLikelihood::Table {
                    counts,
                    class_totals,
                    vocab_size: vocab.len().max(1) as u64,
                }
            }
        };
        likelihoods.push(lk);
    }
    Ok(NaiveBayesModel {
        feature_names: cols.into_iter().map(|c| c.name).collect(),
        log_priors,
        likelihoods,
        params: *params,
    })
}

const LOG_2PI: f64 = 1.8378770664093453;

/// Log posteriors (up to the shared evidence term) and the argmax label.
/// Missing feature values contribute no term; an exact tie resolves to
/// normal.
pub fn predict_nb(m: &NaiveBayesModel, record: &FlowRecord) -> Result<(u8, [f64; 2])> {
    if record.features.len() != m.feature_names.len() {
        return Err(Error::SchemaMismatch(format!(
            "record has {} features, model expects {}",
            record.features.len(),
            m.feature_names.len()
        )));
    }
    let mut lp = m.log_priors;
    for (j, v) in record.features.iter().enumerate() {
        match (&m.likelihoods[j], v) {
            (_, FeatureValue::Missing) => {}
            (FeatureLikelihood::Gaussian { mean, variance }, FeatureValue::Num(x)) => {
                for c in 0..2 {
                    let diff = x - mean[c];
                    lp[c] += -0.5 * (LOG_2PI + variance[c].ln()) - diff * diff / (2.0 * variance[c]);
                }
            }
            (
                FeatureLikelihood::Table {
                    counts,
                    class_totals,
                    vocab_size,
                },
                FeatureValue::Cat(t),
            ) => {
                let alpha = m.params.laplace_alpha;
                for c in 0..2 {
                    let count = counts[c].get(t).copied().unwrap_or(0) as f64;
                    let p = (count + alpha) / (class_totals[c] as f64 + alpha * *vocab_size as f64);
                    lp[c] += p.ln();
                }
            }
            (FeatureLikelihood::Gaussian { .. }, FeatureValue::Cat(t)) => {
                return Err(Error::SchemaMismatch(format!(
                    "feature {} expected numeric, got token {t:?}",
                    m.feature_names[j]
                )))
            }
            (FeatureLikelihood::Table { .. }, FeatureValue::Num(x)) => {
                return Err(Error::SchemaMismatch(format!(
                    "feature {} expected categorical, got number {x}",
                    m.feature_names[j]
                )))
            }
        }
    }
    let label = if lp[1] > lp[0] { 1 } else { LABEL_NORMAL };
    Ok((label, lp))
}
