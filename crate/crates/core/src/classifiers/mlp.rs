//! Single-hidden-layer perceptron trained by stochastic gradient descent
//! with momentum on the mean squared error of a 2-unit sigmoid output layer.
//!
//! Inputs are standardized with training statistics stored in the model.
//! Training is deterministic given the seed: weight initialization and the
//! per-epoch record shuffle both come from the same seeded generator.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{Classifier, Prediction};
use crate::error::{Error, Result};
use crate::flow_model::{Dataset, FeatureKind, FeatureValue, FlowRecord, LABEL_NORMAL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    /// Hidden units; defaults to `ceil((n_features + 2) / 2)`.
    pub n_hidden: Option<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            n_hidden: None,
            learning_rate: 0.3,
            momentum: 0.2,
            epochs: 500,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub feature_names: Vec<String>,
    /// `[n_in, n_hidden, 2]`.
    pub layer_sizes: [usize; 3],
    /// Hidden weights, row-major `n_hidden x n_in`.
    w1: Vec<f64>,
    b1: Vec<f64>,
    /// Output weights, row-major `2 x n_hidden`.
    w2: Vec<f64>,
    b2: Vec<f64>,
    /// Standardization statistics from the training set.
    mean: Vec<f64>,
    std: Vec<f64>,
    pub params: MlpParams,
}

impl Classifier for MlpModel {
    fn tag(&self) -> &'static str {
        "ann"
    }

    fn predict(&self, record: &FlowRecord) -> Result<Prediction> {
        predict_mlp(self, record).map(|(label, _)| Prediction::plain(label))
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl MlpModel {
    fn n_weights(&self) -> usize {
        let [n_in, n_hid, n_out] = self.layer_sizes;
        n_hid * n_in + n_hid + n_out * n_hid + n_out
    }

    /// All weights and biases flattened as `[w1, b1, w2, b2]`, the same
    /// order [`mlp_loss_gradient`] uses.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_weights());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.extend_from_slice(&self.b2);
        v
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_weights() {
            return Err(Error::InvalidInput(format!(
                "expected {} parameters, got {}",
                self.n_weights(),
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        for w in self
            .w1
            .iter_mut()
            .chain(&mut self.b1)
            .chain(&mut self.w2)
            .chain(&mut self.b2)
        {
            *w = it.next().expect("length checked");
        }
        Ok(())
    }

    fn standardize(&self, record: &FlowRecord) -> Result<Vec<f64>> {
        if record.features.len() != self.feature_names.len() {
            return Err(Error::SchemaMismatch(format!(
                "record has {} features, model expects {}",
                record.features.len(),
                self.feature_names.len()
            )));
        }
        record
            .features
            .iter()
            .enumerate()
            .map(|(j, v)| match v {
                FeatureValue::Num(x) => Ok((x - self.mean[j]) / self.std[j]),
                other => Err(Error::SchemaMismatch(format!(
                    "feature {} must be numeric for the perceptron, got {other:?}; \
                     one-hot encode categorical features first",
                    self.feature_names[j]
                ))),
            })
            .collect()
    }

    fn forward(&self, x: &[f64]) -> (Vec<f64>, [f64; 2]) {
        let [n_in, n_hid, _] = self.layer_sizes;
        let mut hidden = Vec::with_capacity(n_hid);
        for j in 0..n_hid {
            let mut a = self.b1[j];
            for (i, &xi) in x.iter().enumerate() {
                a += self.w1[j * n_in + i] * xi;
            }
            hidden.push(sigmoid(a));
        }
        let mut out = [0.0f64; 2];
        for (k, o) in out.iter_mut().enumerate() {
            let mut a = self.b2[k];
            for (j, &h) in hidden.iter().enumerate() {
                a += self.w2[k * n_hid + j] * h;
            }
            *o = sigmoid(a);
        }
        (hidden, out)
    }
}

/// Trains the perceptron. Every feature must be numeric; labels must be
/// present. Deterministic given the seed.
pub fn train_mlp(d: &Dataset, params: &MlpParams) -> Result<MlpModel> {
    if d.is_empty() {
        return Err(Error::InvalidInput("cannot train on an empty dataset".into()));
    }
    for col in d.schema().feature_columns() {
        if col.kind != FeatureKind::Numeric {
            return Err(Error::InvalidInput(format!(
                "feature {} is categorical; one-hot encode it before training the perceptron",
                col.name
            )));
        }
    }
    let labels = d.labels()?;
    let n_in = d.schema().n_features();
    let n_hid = params.n_hidden.unwrap_or((n_in + 2).div_ceil(2)).max(1);

    // Standardization statistics over the training set.
    let n = d.len() as f64;
    let mut mean = vec![0.0f64; n_in];
    let mut std = vec![0.0f64; n_in];
    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(d.len());
    for (i, r) in d.records().iter().enumerate() {
        let row: Vec<f64> = r
            .features
            .iter()
            .map(|v| {
                v.as_num().ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "record {i} has a non-numeric value; impute and encode before training"
                    ))
                })
            })
            .collect::<Result<_>>()?;
        for (j, &x) in row.iter().enumerate() {
            mean[j] += x;
        }
        inputs.push(row);
    }
    for m in &mut mean {
        *m /= n;
    }
    for row in &inputs {
        for (j, &x) in row.iter().enumerate() {
            std[j] += (x - mean[j]) * (x - mean[j]);
        }
    }
    for s in &mut std {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    for row in &mut inputs {
        for (j, x) in row.iter_mut().enumerate() {
            *x = (*x - mean[j]) / std[j];
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut model = MlpModel {
        feature_names: d.schema().feature_names(),
        layer_sizes: [n_in, n_hid, 2],
        w1: (0..n_hid * n_in).map(|_| rng.random_range(-0.5..0.5)).collect(),
        b1: (0..n_hid).map(|_| rng.random_range(-0.5..0.5)).collect(),
        w2: (0..2 * n_hid).map(|_| rng.random_range(-0.5..0.5)).collect(),
        b2: (0..2).map(|_| rng.random_range(-0.5..0.5)).collect(),
        mean,
        std,
        params: *params,
    };

    let mut velocity = vec![0.0f64; model.n_weights()];
    let mut grad = vec![0.0f64; model.n_weights()];
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            grad.fill(0.0);
            accumulate_gradient(&model, &inputs[i], labels[i], &mut grad);
            let mut flat = model.flat_params();
            for ((w, v), g) in flat.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = params.momentum * *v - params.learning_rate * g;
                *w += *v;
            }
            model.set_flat_params(&flat)?;
        }
    }
    Ok(model)
}

/// Adds the gradient of `0.5 * sum_k (o_k - t_k)^2` for one standardized
/// input into `grad` (flattened `[w1, b1, w2, b2]`).
fn accumulate_gradient(m: &MlpModel, x: &[f64], label: u8, grad: &mut [f64]) {
    let [n_in, n_hid, _] = m.layer_sizes;
    let (hidden, out) = m.forward(x);
    let target = if label == 1 { [0.0, 1.0] } else { [1.0, 0.0] };

    let mut delta_out = [0.0f64; 2];
    for k in 0..2 {
        delta_out[k] = (out[k] - target[k]) * out[k] * (1.0 - out[k]);
    }
    let mut delta_hidden = vec![0.0f64; n_hid];
    for j in 0..n_hid {
        let mut back = 0.0;
        for (k, d) in delta_out.iter().enumerate() {
            back += d * m.w2[k * n_hid + j];
        }
        delta_hidden[j] = back * hidden[j] * (1.0 - hidden[j]);
    }

    let (g_w1, rest) = grad.split_at_mut(n_hid * n_in);
    let (g_b1, rest) = rest.split_at_mut(n_hid);
    let (g_w2, g_b2) = rest.split_at_mut(2 * n_hid);
    for j in 0..n_hid {
        for (i, &xi) in x.iter().enumerate() {
            g_w1[j * n_in + i] += delta_hidden[j] * xi;
        }
        g_b1[j] += delta_hidden[j];
    }
    for (k, d) in delta_out.iter().enumerate() {
        for (j, &h) in hidden.iter().enumerate() {
            g_w2[k * n_hid + j] += d * h;
        }
        g_b2[k] += d;
    }
}

/// Gradient of the mean per-record loss `0.5 * sum_k (o_k - t_k)^2` over a
/// batch, flattened as `[w1, b1, w2, b2]`. Records must be labeled.
pub fn mlp_loss_gradient(m: &MlpModel, batch: &[FlowRecord]) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("gradient of an empty batch".into()));
    }
    let mut grad = vec![0.0f64; m.n_weights()];
    for (i, r) in batch.iter().enumerate() {
        let x = m.standardize(r)?;
        let label = r.label.ok_or(Error::UnlabeledRecord { index: i })?;
        accumulate_gradient(m, &x, label, &mut grad);
    }
    let scale = 1.0 / batch.len() as f64;
    for g in &mut grad {
        *g *= scale;
    }
    Ok(grad)
}

/// Mean per-record loss over a batch; the quantity [`mlp_loss_gradient`]
/// differentiates.
pub fn mlp_batch_loss(m: &MlpModel, batch: &[FlowRecord]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("loss of an empty batch".into()));
    }
    let mut total = 0.0;
    for (i, r) in batch.iter().enumerate() {
        let x = m.standardize(r)?;
        let label = r.label.ok_or(Error::UnlabeledRecord { index: i })?;
        let (_, out) = m.forward(&x);
        let target = if label == 1 { [0.0, 1.0] } else { [1.0, 0.0] };
        for k in 0..2 {
            total += 0.5 * (out[k] - target[k]) * (out[k] - target[k]);
        }
    }
    Ok(total / batch.len() as f64)
}

/// Forward pass; label is the argmax output unit, tie resolves to normal.
pub fn predict_mlp(m: &MlpModel, record: &FlowRecord) -> Result<(u8, [f64; 2])> {
    let x = m.standardize(record)?;
    let (_, out) = m.forward(&x);
    let label = if out[1] > out[0] { 1 } else { LABEL_NORMAL };
    Ok((label, out))
}
