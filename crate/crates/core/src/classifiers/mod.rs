//! The four learners: C4.5 decision tree, Gaussian/categorical Naive Bayes,
//! a single-hidden-layer perceptron, and a class-association rule list.
//!
//! Models are immutable after training; prediction is pure and safe to call
//! concurrently.

pub mod bayes;
pub mod mlp;
pub mod rules;
pub mod tree;

pub use bayes::{predict_nb, train_nb, NaiveBayesModel, NbParams};
pub use mlp::{mlp_batch_loss, mlp_loss_gradient, predict_mlp, train_mlp, MlpModel, MlpParams};
pub use rules::{mine_class_rules, predict_rules, ArmParams, ClassRule, RuleListModel};
pub use tree::{predict_tree, train_c45, C45Params, DecisionTreeModel, TreeNode};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::flow_model::FlowRecord;

/// A single prediction; `rule_id` is set only by rule-list models when a
/// rule fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prediction {
    pub label: u8,
    pub rule_id: Option<u64>,
}

impl Prediction {
    pub fn plain(label: u8) -> Self {
        Prediction {
            label,
            rule_id: None,
        }
    }
}

/// Anything that can label a flow record.
pub trait Classifier {
    fn tag(&self) -> &'static str;
    fn predict(&self, record: &FlowRecord) -> Result<Prediction>;
}

/// Tagged union of the four fitted classifiers. Serializes to a
/// self-describing JSON document; a round-tripped model reproduces
/// bit-identical predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_type", rename_all = "snake_case")]
pub enum TrainedModel {
    DecisionTree(DecisionTreeModel),
    NaiveBayes(NaiveBayesModel),
    Mlp(MlpModel),
    RuleList(RuleListModel),
}

impl TrainedModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl Classifier for TrainedModel {
    fn tag(&self) -> &'static str {
        match self {
            TrainedModel::DecisionTree(m) => m.tag(),
            TrainedModel::NaiveBayes(m) => m.tag(),
            TrainedModel::Mlp(m) => m.tag(),
            TrainedModel::RuleList(m) => m.tag(),
        }
    }

    fn predict(&self, record: &FlowRecord) -> Result<Prediction> {
        match self {
            TrainedModel::DecisionTree(m) => m.predict(record),
            TrainedModel::NaiveBayes(m) => m.predict(record),
            TrainedModel::Mlp(m) => m.predict(record),
            TrainedModel::RuleList(m) => m.predict(record),
        }
    }
}
