//! Confusion matrices, accuracy / false-alarm-rate, and stratified k-fold
//! cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{
    mine_class_rules, train_c45, train_mlp, train_nb, ArmParams, C45Params, Classifier, MlpParams,
    NbParams, Prediction, TrainedModel,
};
use crate::error::{Error, Result};
use crate::flow_model::{Dataset, FeatureKind, LABEL_ATTACK, LABEL_NORMAL};
use crate::preprocess::{
    apply_discretization, apply_one_hot, fit_discretization, fit_one_hot, rank_features,
    select_top_k, BinningMethod, DiscretizationMap, OneHotMap,
};

/// Binary outcome counters. Positive means attack.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_pos: u64,
    pub true_neg: u64,
    pub false_pos: u64,
    pub false_neg: u64,
}

impl ConfusionMatrix {
    pub fn new(true_neg: u64, false_pos: u64, false_neg: u64, true_pos: u64) -> Self {
        ConfusionMatrix {
            true_pos,
            true_neg,
            false_pos,
            false_neg,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_pos + self.true_neg + self.false_pos + self.false_neg
    }

    pub fn record(&mut self, predicted: u8, actual: u8) {
        match (predicted, actual) {
            (LABEL_ATTACK, LABEL_ATTACK) => self.true_pos += 1,
            (LABEL_NORMAL, LABEL_NORMAL) => self.true_neg += 1,
            (LABEL_ATTACK, _) => self.false_pos += 1,
            _ => self.false_neg += 1,
        }
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        self.true_pos += other.true_pos;
        self.true_neg += other.true_neg;
        self.false_pos += other.false_pos;
        self.false_neg += other.false_neg;
    }
}

/// Builds the matrix from aligned prediction / ground-truth vectors.
pub fn confusion_matrix(predicted: &[u8], actual: &[u8]) -> Result<ConfusionMatrix> {
    if predicted.len() != actual.len() {
        return Err(Error::InvalidInput(format!(
            "prediction/actual length mismatch: {} vs {}",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::InvalidInput("empty prediction vector".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &a) in predicted.iter().zip(actual) {
        cm.record(p, a);
    }
    Ok(cm)
}

/// Overall success rate and false alarm rate. The two are exact complements
/// over the same total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub far: f64,
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidInput("metrics of an empty confusion matrix".into()));
    }
    let total = total as f64;
    Ok(Metrics {
        accuracy: (cm.true_neg + cm.true_pos) as f64 / total,
        far: (cm.false_pos + cm.false_neg) as f64 / total,
    })
}

/// Partitions record indices into `k` folds.
///
/// Within each class, indices are shuffled by the seeded generator and dealt
/// round-robin, so per-fold class counts differ by at most one from exact
/// proportionality.
pub fn stratified_folds(d: &Dataset, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidInput("k-fold requires k >= 2".into()));
    }
    let labels = d.labels()?;
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    for (c, idx) in by_class.iter().enumerate() {
        if idx.len() < k {
            return Err(Error::InvalidInput(format!(
                "class {c} has {} records, fewer than k = {k}",
                idx.len()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    for idx in &mut by_class {
        idx.shuffle(&mut rng);
        for (pos, &i) in idx.iter().enumerate() {
            folds[pos % k].push(i);
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Which classifier to run, with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "classifier", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Arm(ArmParams),
    Dt(C45Params),
    Nb(NbParams),
    Ann(MlpParams),
    /// Baseline that always predicts the given label.
    Constant { label: u8 },
}

impl ClassifierSpec {
    pub fn tag(&self) -> &'static str {
        match self {
            ClassifierSpec::Arm(_) => "arm",
            ClassifierSpec::Dt(_) => "dt",
            ClassifierSpec::Nb(_) => "nb",
            ClassifierSpec::Ann(_) => "ann",
            ClassifierSpec::Constant { .. } => "constant",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "arm" => Ok(ClassifierSpec::Arm(ArmParams::default())),
            "dt" => Ok(ClassifierSpec::Dt(C45Params::default())),
            "nb" => Ok(ClassifierSpec::Nb(NbParams::default())),
            "ann" => Ok(ClassifierSpec::Ann(MlpParams::default())),
            other => Err(Error::Config(format!(
                "unknown classifier tag {other:?}; valid tags: arm, dt, nb, ann"
            ))),
        }
    }
}

/// Feature-selection protocol for a cross-validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSelection {
    /// Use every feature.
    All,
    /// Project to a fixed list before folding (reproduction mode: the
    /// ranking was computed once on the full set).
    Fixed(Vec<String>),
    /// Re-rank within each training fold and keep the top k (rigorous mode,
    /// no leakage).
    FoldLocal(usize),
}

impl FeatureSelection {
    fn mode_name(&self) -> &'static str {
        match self {
            FeatureSelection::All => "all-features",
            FeatureSelection::Fixed(_) => "reproduction",
            FeatureSelection::FoldLocal(_) => "rigorous",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    pub selection: FeatureSelection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub classifier: String,
    pub k: usize,
    pub seed: u64,
    pub mode: String,
    pub per_fold: Vec<ConfusionMatrix>,
    pub pooled: ConfusionMatrix,
    pub pooled_metrics: Metrics,
}

impl CvReport {
    /// Structured text export; accuracy/FAR as percentages to 2 decimals.
    pub fn export(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "classifier={} k={} seed={} mode={}\n",
            self.classifier, self.k, self.seed, self.mode
        ));
        for (i, f) in self.per_fold.iter().enumerate() {
            out.push_str(&format!(
                "fold={} tp={} tn={} fp={} fn={}\n",
                i, f.true_pos, f.true_neg, f.false_pos, f.false_neg
            ));
        }
        out.push_str(&format!(
            "pooled tp={} tn={} fp={} fn={}\n",
            self.pooled.true_pos, self.pooled.true_neg, self.pooled.false_pos, self.pooled.false_neg
        ));
        out.push_str(&format!(
            "accuracy={:.2}% far={:.2}%\n",
            self.pooled_metrics.accuracy * 100.0,
            self.pooled_metrics.far * 100.0
        ));
        out
    }
}

/// Trains a classifier on a full dataset, applying the preprocessing that
/// classifier needs (discretization for ARM, one-hot encoding for the
/// perceptron). Returns the model plus the fitted transforms so the same
/// view can be applied to held-out data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub model: TrainedModel,
    discretization: Option<DiscretizationMap>,
    one_hot: Option<OneHotMap>,
    constant: Option<u8>,
}

impl FittedPipeline {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<FittedPipeline> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn fit(train: &Dataset, spec: &ClassifierSpec) -> Result<FittedPipeline> {
        match spec {
            ClassifierSpec::Constant { label } => {
                // Backed by a trivial rule list so it still serializes.
                let model = TrainedModel::RuleList(crate::classifiers::RuleListModel {
                    feature_names: train.schema().feature_names(),
                    rules: vec![],
                    default_label: *label,
                    params: ArmParams::default(),
                });
                Ok(FittedPipeline {
                    model,
                    discretization: None,
                    one_hot: None,
                    constant: Some(*label),
                })
            }
            ClassifierSpec::Dt(p) => Ok(FittedPipeline {
                model: TrainedModel::DecisionTree(train_c45(train, p)?),
                discretization: None,
                one_hot: None,
                constant: None,
            }),
            ClassifierSpec::Nb(p) => Ok(FittedPipeline {
                model: TrainedModel::NaiveBayes(train_nb(train, p)?),
                discretization: None,
                one_hot: None,
                constant: None,
            }),
            ClassifierSpec::Ann(p) => {
                let needs_encoding = train
                    .schema()
                    .feature_columns()
                    .any(|c| c.kind == FeatureKind::Categorical);
                let (encoded, one_hot) = if needs_encoding {
                    let map = fit_one_hot(train);
                    (apply_one_hot(train, &map)?, Some(map))
                } else {
                    (train.clone(), None)
                };
                Ok(FittedPipeline {
                    model: TrainedModel::Mlp(train_mlp(&encoded, p)?),
                    discretization: None,
                    one_hot,
                    constant: None,
                })
            }
            ClassifierSpec::Arm(p) => {
                let map = fit_discretization(train, BinningMethod::Mdl)?;
                let discrete = apply_discretization(train, &map)?;
                Ok(FittedPipeline {
                    model: TrainedModel::RuleList(mine_class_rules(&discrete, p)?),
                    discretization: Some(map),
                    one_hot: None,
                    constant: None,
                })
            }
        }
    }

    /// Applies the fitted transforms to a conforming dataset and predicts
    /// every record.
    pub fn predict_all(&self, data: &Dataset) -> Result<Vec<Prediction>> {
        if let Some(label) = self.constant {
            return Ok(vec![Prediction::plain(label); data.len()]);
        }
        let view = self.transform(data)?;
        view.records().iter().map(|r| self.model.predict(r)).collect()
    }

    /// Applies the fitted transforms without predicting; keys and labels are
    /// preserved, so the result can feed attribution.
    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        let mut view = data.clone();
        if let Some(map) = &self.discretization {
            view = apply_discretization(&view, map)?;
        }
        if let Some(map) = &self.one_hot {
            view = apply_one_hot(&view, map)?;
        }
        Ok(view)
    }
}

/// Runs stratified k-fold cross-validation.
///
/// Per fold, all preprocessing (feature re-ranking in rigorous mode,
/// discretization maps, one-hot vocabularies, input standardization) is
/// fitted on the training portion only. The pooled matrix is the elementwise
/// sum over folds, so its total equals the dataset size.
pub fn cross_validate(d: &Dataset, spec: &ClassifierSpec, opts: &CvOptions) -> Result<CvReport> {
    let data = match &opts.selection {
        FeatureSelection::Fixed(names) => d.project_features(names)?,
        _ => d.clone(),
    };
    let folds = stratified_folds(&data, opts.folds, opts.seed)?;
    let all_labels = data.labels()?;

    let mut per_fold = Vec::with_capacity(folds.len());
    let mut pooled = ConfusionMatrix::default();
    for (fold_idx, test_idx) in folds.iter().enumerate() {
        let train_idx: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != fold_idx)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        let mut train = data.subset(&train_idx)?;
        let mut test = data.subset(test_idx)?;

        if let FeatureSelection::FoldLocal(k) = opts.selection {
            let ranking = rank_features(&train)?;
            let keep = select_top_k(&ranking, k.min(ranking.scores.len()))?;
            train = train.project_features(&keep)?;
            test = test.project_features(&keep)?;
        }

        // Derive a distinct deterministic seed per fold for the perceptron.
        let spec = match spec {
            ClassifierSpec::Ann(p) => ClassifierSpec::Ann(MlpParams {
                seed: p.seed.wrapping_add(fold_idx as u64),
                ..*p
            }),
            other => other.clone(),
        };
        let pipeline = FittedPipeline::fit(&train, &spec)?;
        let predictions = pipeline.predict_all(&test)?;

        let mut cm = ConfusionMatrix::default();
        for (p, &i) in predictions.iter().zip(test_idx) {
            cm.record(p.label, all_labels[i]);
        }
        pooled.add(&cm);
        per_fold.push(cm);
    }

    let pooled_metrics = metrics(&pooled)?;
    Ok(CvReport {
        classifier: spec.tag().to_string(),
        k: opts.folds,
        seed: opts.seed,
        mode: opts.selection.mode_name().to_string(),
        per_fold,
        pooled,
        pooled_metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::synth_flows;

    #[test]
    fn confusion_matrix_identity_prediction() {
        let cm = confusion_matrix(&[1, 1, 0], &[1, 1, 0]).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(1, 0, 0, 2));
        assert_eq!(cm.false_pos + cm.false_neg, 0);
    }

    #[test]
    fn confusion_matrix_single_false_positive() {
        let cm = confusion_matrix(&[1], &[0]).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(0, 1, 0, 0));
    }

    #[test]
    fn confusion_matrix_length_mismatch() {
        assert!(confusion_matrix(&[1], &[0, 1]).is_err());
        assert!(confusion_matrix(&[], &[]).is_err());
    }

    #[test]
    fn published_matrices_reproduce_published_metrics() {
        // (tn, fp, fn, tp) rows-are-actual readings of the four matrices.
        let cases = [
            (ConfusionMatrix::new(31785, 10894, 12675, 108654), 85.63, 14.37),
            (ConfusionMatrix::new(84607, 8393, 9058, 155615), 93.23, 6.77),
            (ConfusionMatrix::new(84101, 8899, 61380, 103293), 72.73, 27.27),
            (ConfusionMatrix::new(2719, 90281, 2562, 162111), 63.97, 36.03),
        ];
        for (cm, acc_pct, far_pct) in cases {
            let m = metrics(&cm).unwrap();
            assert_eq!(format!("{:.2}", m.accuracy * 100.0), format!("{acc_pct:.2}"));
            assert_eq!(format!("{:.2}", m.far * 100.0), format!("{far_pct:.2}"));
        }
    }

    #[test]
    fn accuracy_far_complement() {
        let cm = ConfusionMatrix::new(10, 3, 2, 35);
        let m = metrics(&cm).unwrap();
        assert_eq!(m.accuracy + m.far, 1.0);
    }

    #[test]
    fn folds_balanced_small() {
        let d = synth_flows(10, 0.5, 0.0, 1).unwrap();
        let folds = stratified_folds(&d, 5, 7).unwrap();
        let labels = d.labels().unwrap();
        for f in &folds {
            assert_eq!(f.len(), 2);
            let attacks = f.iter().filter(|&&i| labels[i] == 1).count();
            assert_eq!(attacks, 1);
        }
    }

    #[test]
    fn folds_partition_and_determinism() {
        let d = synth_flows(103, 0.3, 0.0, 2).unwrap();
        let folds = stratified_folds(&d, 10, 42).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
        assert_eq!(folds, stratified_folds(&d, 10, 42).unwrap());
        assert_ne!(folds, stratified_folds(&d, 10, 43).unwrap());
    }

    #[test]
    fn fold_sizes_at_paper_scale() {
        // 257,673 records over 10 folds must land in {25767, 25768}.
        let n0 = 93000usize;
        let n1 = 164673usize;
        let k = 10;
        // Round-robin sizes per class.
        let sizes: Vec<usize> = (0..k)
            .map(|f| n0 / k + usize::from(f < n0 % k) + n1 / k + usize::from(f < n1 % k))
            .collect();
        assert!(sizes.iter().all(|&s| s == 25767 || s == 25768));
        assert_eq!(sizes.iter().sum::<usize>(), 257_673);
    }

    #[test]
    fn class_smaller_than_k_errors() {
        let d = synth_flows(12, 0.25, 0.0, 3).unwrap(); // 3 attacks
        assert!(stratified_folds(&d, 5, 1).is_err());
    }

    #[test]
    fn cross_validate_separable_dt() {
        let d = synth_flows(400, 0.5, 6.0, 5).unwrap();
        let report = cross_validate(
            &d,
            &ClassifierSpec::Dt(C45Params::default()),
            &CvOptions {
                folds: 10,
                seed: 5,
                selection: FeatureSelection::All,
            },
        )
        .unwrap();
        assert_eq!(report.pooled.total(), 400);
        assert!(report.pooled_metrics.accuracy > 0.95, "{:?}", report.pooled_metrics);
    }

    #[test]
    fn cross_validate_constant_baseline_matches_prior() {
        let d = synth_flows(300, 0.4, 3.0, 8).unwrap();
        let report = cross_validate(
            &d,
            &ClassifierSpec::Constant { label: 0 },
            &CvOptions {
                folds: 5,
                seed: 8,
                selection: FeatureSelection::All,
            },
        )
        .unwrap();
        assert!((report.pooled_metrics.accuracy - 0.6).abs() < 1e-12);
    }

    #[test]
    fn export_contains_percentages() {
        let d = synth_flows(100, 0.5, 6.0, 5).unwrap();
        let report = cross_validate(
            &d,
            &ClassifierSpec::Dt(C45Params::default()),
            &CvOptions {
                folds: 5,
                seed: 5,
                selection: FeatureSelection::All,
            },
        )
        .unwrap();
        let text = report.export();
        assert!(text.contains("classifier=dt"));
        assert!(text.contains("accuracy="));
        assert!(text.contains('%'));
    }
}
