//! Domain types shared by the whole pipeline: column schemas, flow records
//! and labelled datasets.
//!
//! Everything here is immutable after construction and safe to share across
//! threads.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normal traffic.
pub const LABEL_NORMAL: u8 = 0;
/// Attack traffic.
pub const LABEL_ATTACK: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    /// One of the five flow-identifier columns (srcip, sport, dstip, dsport, proto).
    Identifier,
    /// A model input.
    Feature,
    /// Pass-through attack-category metadata.
    AttackCategory,
    /// The binary class column.
    Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: FeatureKind,
    pub role: ColumnRole,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: FeatureKind, role: ColumnRole) -> Self {
        Column {
            name: name.into(),
            kind,
            role,
        }
    }
}

/// The five column names that together form a flow identifier.
pub const IDENTIFIER_COLUMNS: [&str; 5] = ["srcip", "sport", "dstip", "dsport", "proto"];

/// Ordered column descriptors plus the token that means "attack" in the
/// label column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    columns: Vec<Column>,
    class_positive: String,
}

impl FeatureSchema {
    /// Validates and builds a schema.
    ///
    /// Column names must be unique, there must be exactly one `Label` column,
    /// at most one `AttackCategory` column, and identifier columns (when
    /// present) must be exactly the five-tuple names.
    pub fn new(columns: Vec<Column>, class_positive: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name: {}", c.name)));
            }
        }
        let labels = columns
            .iter()
            .filter(|c| c.role == ColumnRole::Label)
            .count();
        if labels != 1 {
            return Err(Error::Schema(format!(
                "expected exactly one label column, found {labels}"
            )));
        }
        let cats = columns
            .iter()
            .filter(|c| c.role == ColumnRole::AttackCategory)
            .count();
        if cats > 1 {
            return Err(Error::Schema(format!(
                "expected at most one attack-category column, found {cats}"
            )));
        }
        let idents: HashSet<&str> = columns
            .iter()
            .filter(|c| c.role == ColumnRole::Identifier)
            .map(|c| c.name.as_str())
            .collect();
        if !idents.is_empty() {
            let expected: HashSet<&str> = IDENTIFIER_COLUMNS.iter().copied().collect();
            if idents != expected {
                return Err(Error::Schema(format!(
                    "identifier columns must be exactly {IDENTIFIER_COLUMNS:?}, found {idents:?}"
                )));
            }
        }
        Ok(FeatureSchema {
            columns,
            class_positive: class_positive.into(),
        })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn class_positive(&self) -> &str {
        &self.class_positive
    }

    /// Feature-role columns in schema order.
    pub fn feature_columns(&self) -> impl Iterator<Item = &Column> {
        self.columns.iter().filter(|c| c.role == ColumnRole::Feature)
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.feature_columns().map(|c| c.name.clone()).collect()
    }

    pub fn n_features(&self) -> usize {
        self.feature_columns().count()
    }

    /// Index into a record's feature vector for a named feature.
    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.feature_columns()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn has_identifiers(&self) -> bool {
        self.columns.iter().any(|c| c.role == ColumnRole::Identifier)
    }

    pub fn has_attack_category(&self) -> bool {
        self.columns
            .iter()
            .any(|c| c.role == ColumnRole::AttackCategory)
    }
}

/// The five-tuple identifying a network flow.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlowKey {
    pub srcip: String,
    pub sport: u16,
    pub dstip: String,
    pub dsport: u16,
    pub proto: String,
}

impl FlowKey {
    pub fn new(
        srcip: impl Into<String>,
        sport: u16,
        dstip: impl Into<String>,
        dsport: u16,
        proto: impl Into<String>,
    ) -> Result<Self> {
        let proto = proto.into();
        if proto.is_empty() {
            return Err(Error::InvalidInput("flow protocol must be non-empty".into()));
        }
        Ok(FlowKey {
            srcip: srcip.into(),
            sport,
            dstip: dstip.into(),
            dsport,
            proto,
        })
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{}",
            self.srcip, self.sport, self.dstip, self.dsport, self.proto
        )
    }
}

/// A single feature cell: a finite number, a category token, or missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureValue {
    Num(f64),
    Cat(String),
    Missing,
}

impl FeatureValue {
    /// Numeric constructor; rejects NaN and infinities.
    pub fn num(v: f64) -> Result<Self> {
        if v.is_finite() {
            Ok(FeatureValue::Num(v))
        } else {
            Err(Error::InvalidInput(format!("non-finite feature value: {v}")))
        }
    }

    pub fn cat(token: impl Into<String>) -> Self {
        FeatureValue::Cat(token.into())
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, FeatureValue::Missing)
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            FeatureValue::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            FeatureValue::Cat(t) => Some(t),
            _ => None,
        }
    }
}

/// One network flow: optional identifiers, a feature vector aligned to the
/// schema's Feature columns, and optional ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub key: Option<FlowKey>,
    pub features: Vec<FeatureValue>,
    pub label: Option<u8>,
    pub attack_cat: Option<String>,
}

impl FlowRecord {
    pub fn new(features: Vec<FeatureValue>, label: Option<u8>) -> Self {
        FlowRecord {
            key: None,
            features,
            label,
            attack_cat: None,
        }
    }

    pub fn with_key(mut self, key: FlowKey) -> Self {
        self.key = Some(key);
        self
    }
}

/// A schema plus the records conforming to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: FeatureSchema,
    records: Vec<FlowRecord>,
}

impl Dataset {
    /// Builds a dataset, checking every record's feature vector length
    /// against the schema.
    pub fn new(schema: FeatureSchema, records: Vec<FlowRecord>) -> Result<Self> {
        let n = schema.n_features();
        for (i, r) in records.iter().enumerate() {
            if r.features.len() != n {
                return Err(Error::SchemaMismatch(format!(
                    "record {i} has {} features, schema declares {n}",
                    r.features.len()
                )));
            }
            if let Some(l) = r.label {
                if l > 1 {
                    return Err(Error::SchemaMismatch(format!(
                        "record {i} has non-binary label {l}"
                    )));
                }
            }
        }
        Ok(Dataset { schema, records })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn records(&self) -> &[FlowRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Counts (normal, attack) records. Errors on the first unlabeled record.
    pub fn class_counts(&self) -> Result<(u64, u64)> {
        let mut normal = 0u64;
        let mut attack = 0u64;
        for (i, r) in self.records.iter().enumerate() {
            match r.label {
                Some(LABEL_NORMAL) => normal += 1,
                Some(LABEL_ATTACK) => attack += 1,
                _ => return Err(Error::UnlabeledRecord { index: i }),
            }
        }
        Ok((normal, attack))
    }

    /// Labels of all records, erroring on the first unlabeled one.
    pub fn labels(&self) -> Result<Vec<u8>> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| r.label.ok_or(Error::UnlabeledRecord { index: i }))
            .collect()
    }

    /// New dataset keeping only the named Feature columns (in `keep` order)
    /// plus all Identifier/Label/AttackCategory columns.
    pub fn project_features(&self, keep: &[String]) -> Result<Dataset> {
        let indices: Vec<usize> = keep
            .iter()
            .map(|name| self.schema.feature_index(name))
            .collect::<Result<_>>()?;

        let mut columns: Vec<Column> = self
            .schema
            .columns
            .iter()
            .filter(|c| c.role != ColumnRole::Feature)
            .cloned()
            .collect();
        let feature_cols: Vec<&Column> = self.schema.feature_columns().collect();
        for &i in &indices {
            columns.push(feature_cols[i].clone());
        }
        let schema = FeatureSchema::new(columns, self.schema.class_positive.clone())?;

        let records = self
            .records
            .iter()
            .map(|r| FlowRecord {
                key: r.key.clone(),
                features: indices.iter().map(|&i| r.features[i].clone()).collect(),
                label: r.label,
                attack_cat: r.attack_cat.clone(),
            })
            .collect();
        Dataset::new(schema, records)
    }

    /// New dataset containing the records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let records = indices
            .iter()
            .map(|&i| {
                self.records
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::InvalidInput(format!("record index {i} out of range")))
            })
            .collect::<Result<_>>()?;
        Dataset::new(self.schema.clone(), records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_feature_schema() -> FeatureSchema {
        FeatureSchema::new(
            vec![
                Column::new("sbytes", FeatureKind::Numeric, ColumnRole::Feature),
                Column::new("proto", FeatureKind::Categorical, ColumnRole::Feature),
                Column::new("label", FeatureKind::Categorical, ColumnRole::Label),
            ],
            "1",
        )
        .unwrap()
    }

    fn record(sbytes: f64, proto: &str, label: u8) -> FlowRecord {
        FlowRecord::new(
            vec![FeatureValue::Num(sbytes), FeatureValue::cat(proto)],
            Some(label),
        )
    }

    #[test]
    fn schema_rejects_duplicate_names() {
        let err = FeatureSchema::new(
            vec![
                Column::new("a", FeatureKind::Numeric, ColumnRole::Feature),
                Column::new("a", FeatureKind::Numeric, ColumnRole::Feature),
                Column::new("label", FeatureKind::Categorical, ColumnRole::Label),
            ],
            "1",
        )
        .unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn schema_requires_exactly_one_label() {
        let err = FeatureSchema::new(
            vec![Column::new("a", FeatureKind::Numeric, ColumnRole::Feature)],
            "1",
        )
        .unwrap_err();
        assert!(err.to_string().contains("label"));
    }

    #[test]
    fn schema_rejects_partial_identifier_tuple() {
        let err = FeatureSchema::new(
            vec![
                Column::new("srcip", FeatureKind::Categorical, ColumnRole::Identifier),
                Column::new("label", FeatureKind::Categorical, ColumnRole::Label),
            ],
            "1",
        )
        .unwrap_err();
        assert!(err.to_string().contains("identifier"));
    }

    #[test]
    fn feature_value_rejects_non_finite() {
        assert!(FeatureValue::num(f64::NAN).is_err());
        assert!(FeatureValue::num(f64::INFINITY).is_err());
        assert!(FeatureValue::num(1.5).is_ok());
    }

    #[test]
    fn class_counts_empty() {
        let d = Dataset::new(two_feature_schema(), vec![]).unwrap();
        assert_eq!(d.class_counts().unwrap(), (0, 0));
    }

    #[test]
    fn class_counts_direct() {
        let d = Dataset::new(
            two_feature_schema(),
            vec![
                record(1.0, "tcp", 0),
                record(2.0, "tcp", 0),
                record(3.0, "udp", 0),
                record(4.0, "tcp", 1),
                record(5.0, "udp", 1),
            ],
        )
        .unwrap();
        assert_eq!(d.class_counts().unwrap(), (3, 2));
    }

    #[test]
    fn class_counts_unlabeled_names_index() {
        let mut records = vec![record(1.0, "tcp", 0)];
        records.push(FlowRecord::new(
            vec![FeatureValue::Num(2.0), FeatureValue::cat("tcp")],
            None,
        ));
        let d = Dataset::new(two_feature_schema(), records).unwrap();
        match d.class_counts().unwrap_err() {
            Error::UnlabeledRecord { index } => assert_eq!(index, 1),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn class_counts_permutation_invariant() {
        let fwd = vec![record(1.0, "tcp", 0), record(2.0, "udp", 1), record(3.0, "tcp", 1)];
        let mut rev = fwd.clone();
        rev.reverse();
        let a = Dataset::new(two_feature_schema(), fwd).unwrap();
        let b = Dataset::new(two_feature_schema(), rev).unwrap();
        assert_eq!(a.class_counts().unwrap(), b.class_counts().unwrap());
    }

    #[test]
    fn project_single_feature() {
        let d = Dataset::new(
            two_feature_schema(),
            vec![record(100.0, "tcp", 0), record(900.0, "udp", 1)],
        )
        .unwrap();
        let p = d.project_features(&["sbytes".to_string()]).unwrap();
        assert_eq!(p.schema().n_features(), 1);
        assert_eq!(p.len(), 2);
        assert_eq!(p.records()[0].features[0], FeatureValue::Num(100.0));
        assert_eq!(p.records()[1].label, Some(1));
    }

    #[test]
    fn project_full_feature_list_round_trips_values() {
        let d = Dataset::new(
            two_feature_schema(),
            vec![record(100.0, "tcp", 0), record(900.0, "udp", 1)],
        )
        .unwrap();
        let p = d.project_features(&d.schema().feature_names()).unwrap();
        for (a, b) in d.records().iter().zip(p.records()) {
            assert_eq!(a.features, b.features);
            assert_eq!(a.label, b.label);
        }
    }

    #[test]
    fn project_unknown_feature_errors_by_name() {
        let d = Dataset::new(two_feature_schema(), vec![]).unwrap();
        let err = d.project_features(&["nope".to_string()]).unwrap_err();
        assert!(err.to_string().contains("nope"));
    }

    #[test]
    fn dataset_rejects_wrong_arity() {
        let r = FlowRecord::new(vec![FeatureValue::Num(1.0)], Some(0));
        assert!(Dataset::new(two_feature_schema(), vec![r]).is_err());
    }
}
