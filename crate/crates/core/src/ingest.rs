//! Loading flow-feature files into [`Dataset`]s.
//!
//! Input files are RFC-4180-style CSV. The column layout is never inferred:
//! a line-oriented sidecar descriptor names every column, its kind and its
//! role. The descriptor grammar is
//!
//! ```text
//! # comment
//! header=true            (optional, default false)
//! class_positive=1
//! srcip,categorical,identifier
//! dur,numeric,feature
//! attack_cat,categorical,attack_cat
//! label,categorical,label
//! id,numeric,ignore      (column dropped at parse time)
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow_model::{
    Column, ColumnRole, Dataset, FeatureKind, FeatureSchema, FeatureValue, FlowKey, FlowRecord,
    IDENTIFIER_COLUMNS, LABEL_ATTACK, LABEL_NORMAL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DescRole {
    Keep(ColumnRole),
    Ignore,
}

#[derive(Debug, Clone)]
struct DescColumn {
    name: String,
    kind: FeatureKind,
    role: DescRole,
}

/// Parsed sidecar describing the physical layout of a flow CSV.
#[derive(Debug, Clone)]
pub struct SchemaDescriptor {
    columns: Vec<DescColumn>,
    class_positive: String,
    has_header: bool,
}

impl SchemaDescriptor {
    pub fn parse(text: &str) -> Result<Self> {
        let mut columns = Vec::new();
        let mut class_positive = None;
        let mut has_header = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(v) = line.strip_prefix("class_positive=") {
                class_positive = Some(v.trim().to_string());
                continue;
            }
            if let Some(v) = line.strip_prefix("header=") {
                has_header = match v.trim() {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(Error::Schema(format!(
                            "descriptor line {}: header must be true or false, got {other}",
                            lineno + 1
                        )))
                    }
                };
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(Error::Schema(format!(
                    "descriptor line {}: expected `name,kind,role`, got {line:?}",
                    lineno + 1
                )));
            }
            let kind = match parts[1] {
                "numeric" => FeatureKind::Numeric,
                "categorical" => FeatureKind::Categorical,
                other => {
                    return Err(Error::Schema(format!(
                        "descriptor line {}: unknown kind {other:?}",
                        lineno + 1
                    )))
                }
            };
            let role = match parts[2] {
                "identifier" => DescRole::Keep(ColumnRole::Identifier),
                "feature" => DescRole::Keep(ColumnRole::Feature),
                "attack_cat" | "attack_category" => DescRole::Keep(ColumnRole::AttackCategory),
                "label" => DescRole::Keep(ColumnRole::Label),
                "ignore" => DescRole::Ignore,
                other => {
                    return Err(Error::Schema(format!(
                        "descriptor line {}: unknown role {other:?}",
                        lineno + 1
                    )))
                }
            };
            columns.push(DescColumn {
                name: parts[0].to_string(),
                kind,
                role,
            });
        }
        let class_positive = class_positive
            .ok_or_else(|| Error::Schema("descriptor missing class_positive= line".into()))?;
        let desc = SchemaDescriptor {
            columns,
            class_positive,
            has_header,
        };
        // Must produce a valid schema up front so parse errors surface early.
        desc.to_schema()?;
        Ok(desc)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    /// The logical schema after dropping `ignore` columns.
    pub fn to_schema(&self) -> Result<FeatureSchema> {
        let columns = self
            .columns
            .iter()
            .filter_map(|c| match c.role {
                DescRole::Keep(role) => Some(Column::new(c.name.clone(), c.kind, role)),
                DescRole::Ignore => None,
            })
            .collect();
        FeatureSchema::new(columns, self.class_positive.clone())
    }

    pub fn has_header(&self) -> bool {
        self.has_header
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    /// Descriptor that matches [`write_flow_csv`] output for this schema.
    pub fn for_schema(schema: &FeatureSchema, has_header: bool) -> Self {
        let columns = schema
            .columns()
            .iter()
            .map(|c| DescColumn {
                name: c.name.clone(),
                kind: c.kind,
                role: DescRole::Keep(c.role),
            })
            .collect();
        SchemaDescriptor {
            columns,
            class_positive: schema.class_positive().to_string(),
            has_header,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("header={}\n", self.has_header));
        out.push_str(&format!("class_positive={}\n", self.class_positive));
        for c in &self.columns {
            let kind = match c.kind {
                FeatureKind::Numeric => "numeric",
                FeatureKind::Categorical => "categorical",
            };
            let role = match c.role {
                DescRole::Keep(ColumnRole::Identifier) => "identifier",
                DescRole::Keep(ColumnRole::Feature) => "feature",
                DescRole::Keep(ColumnRole::AttackCategory) => "attack_cat",
                DescRole::Keep(ColumnRole::Label) => "label",
                DescRole::Ignore => "ignore",
            };
            out.push_str(&format!("{},{},{}\n", c.name, kind, role));
        }
        out
    }
}

/// Parses a flow CSV against its descriptor.
///
/// Empty fields become missing markers; numeric fields must parse to finite
/// reals; the label field is compared against the descriptor's
/// `class_positive` token (empty label leaves the record unlabeled).
pub fn parse_flow_csv(source: impl Read, descriptor: &SchemaDescriptor) -> Result<Dataset> {
    let schema = descriptor.to_schema()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(i as u64 + 1);
        if i == 0 && descriptor.has_header {
            continue;
        }
        if row.len() != descriptor.columns.len() {
            return Err(Error::Parse {
                line,
                message: format!(
                    "expected {} fields, found {}",
                    descriptor.columns.len(),
                    row.len()
                ),
            });
        }
        records.push(parse_row(&row, line, descriptor, &schema)?);
    }
    Dataset::new(schema, records)
}

fn parse_row(
    row: &csv::StringRecord,
    line: u64,
    descriptor: &SchemaDescriptor,
    schema: &FeatureSchema,
) -> Result<FlowRecord> {
    let mut features = Vec::with_capacity(schema.n_features());
    let mut label = None;
    let mut attack_cat = None;
    let mut ident: BTreeMap<&str, &str> = BTreeMap::new();

    for (col, field) in descriptor.columns.iter().zip(row.iter()) {
        match col.role {
            DescRole::Ignore => {}
            DescRole::Keep(ColumnRole::Identifier) => {
                ident.insert(col.name.as_str(), field);
            }
            DescRole::Keep(ColumnRole::Feature) => {
                features.push(parse_feature(field, col, line)?);
            }
            DescRole::Keep(ColumnRole::AttackCategory) => {
                let t = field.trim();
                if !t.is_empty() {
                    attack_cat = Some(t.to_string());
                }
            }
            DescRole::Keep(ColumnRole::Label) => {
                let t = field.trim();
                if !t.is_empty() {
                    label = Some(if t == descriptor.class_positive {
                        LABEL_ATTACK
                    } else {
                        LABEL_NORMAL
                    });
                }
            }
        }
    }

    let key = if schema.has_identifiers() {
        Some(parse_flow_key(&ident, line)?)
    } else {
        None
    };

    Ok(FlowRecord {
        key,
        features,
        label,
        attack_cat,
    })
}

fn parse_feature(field: &str, col: &DescColumn, line: u64) -> Result<FeatureValue> {
    let t = field.trim();
    if t.is_empty() {
        return Ok(FeatureValue::Missing);
    }
    match col.kind {
        FeatureKind::Numeric => {
            let v: f64 = t.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column {}: cannot parse {t:?} as a number", col.name),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column {}: non-finite value {t:?}", col.name),
                });
            }
            Ok(FeatureValue::Num(v))
        }
        FeatureKind::Categorical => Ok(FeatureValue::Cat(t.to_string())),
    }
}

fn parse_flow_key(ident: &BTreeMap<&str, &str>, line: u64) -> Result<FlowKey> {
    let get = |name: &str| -> Result<&str> {
        ident.get(name).copied().ok_or_else(|| Error::Parse {
            line,
            message: format!("missing identifier field {name}"),
        })
    };
    let port = |name: &str| -> Result<u16> {
        let raw = get(name)?.trim();
        // Some UNSW rows carry hex ports (e.g. 0x20205321).
        let parsed = if let Some(hex) = raw.strip_prefix("0x") {
            u32::from_str_radix(hex, 16).ok().map(|v| v as u16)
        } else {
            raw.parse::<u16>().ok()
        };
        parsed.ok_or_else(|| Error::Parse {
            line,
            message: format!("column {name}: invalid port {raw:?}"),
        })
    };
    FlowKey::new(
        get("srcip")?.trim(),
        port("sport")?,
        get("dstip")?.trim(),
        port("dsport")?,
        get("proto")?.trim(),
    )
    .map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })
}

/// Serializes a dataset back to CSV in schema column order, so that
/// `parse(write(d))` reproduces `d` exactly.
pub fn write_flow_csv(d: &Dataset, out: impl Write, write_header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(out);
    let columns = d.schema().columns();
    if write_header {
        w.write_record(columns.iter().map(|c| c.name.as_str()))?;
    }
    for r in d.records() {
        let mut fi = 0usize;
        let mut row: Vec<String> = Vec::with_capacity(columns.len());
        for c in columns {
            let field = match c.role {
                ColumnRole::Identifier => {
                    let key = r.key.as_ref().ok_or_else(|| {
                        Error::InvalidInput("record without flow key in identifier schema".into())
                    })?;
                    match c.name.as_str() {
                        "srcip" => key.srcip.clone(),
                        "sport" => key.sport.to_string(),
                        "dstip" => key.dstip.clone(),
                        "dsport" => key.dsport.to_string(),
                        "proto" => key.proto.clone(),
                        other => return Err(Error::Schema(format!("bad identifier {other}"))),
                    }
                }
                ColumnRole::Feature => {
                    let v = &r.features[fi];
                    fi += 1;
                    match v {
                        FeatureValue::Num(n) => format!("{n}"),
                        FeatureValue::Cat(t) => t.clone(),
                        FeatureValue::Missing => String::new(),
                    }
                }
                ColumnRole::AttackCategory => r.attack_cat.clone().unwrap_or_default(),
                ColumnRole::Label => match r.label {
                    Some(LABEL_ATTACK) => d.schema().class_positive().to_string(),
                    Some(_) => {
                        if d.schema().class_positive() == "0" {
                            "normal".to_string()
                        } else {
                            "0".to_string()
                        }
                    }
                    None => String::new(),
                },
            };
            row.push(field);
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Concatenates two datasets with identical schemas, `a` first.
pub fn merge_datasets(a: &Dataset, b: &Dataset) -> Result<Dataset> {
    if a.schema() != b.schema() {
        let a_names: Vec<&str> = a.schema().columns().iter().map(|c| c.name.as_str()).collect();
        let b_names: Vec<&str> = b.schema().columns().iter().map(|c| c.name.as_str()).collect();
        let only_a: Vec<&&str> = a_names.iter().filter(|n| !b_names.contains(n)).collect();
        let only_b: Vec<&&str> = b_names.iter().filter(|n| !a_names.contains(n)).collect();
        return Err(Error::SchemaMismatch(format!(
            "cannot merge: columns only in first: {only_a:?}; only in second: {only_b:?}"
        )));
    }
    let mut records = a.records().to_vec();
    records.extend_from_slice(b.records());
    Dataset::new(a.schema().clone(), records)
}

/// How to fill numeric missing values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericFill {
    #[default]
    Median,
    Zero,
}

/// Missing-value policy: numeric fill strategy; categorical holes always
/// become the fixed token `"missing"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ImputePolicy {
    pub numeric_fill: NumericFill,
}

pub const MISSING_TOKEN: &str = "missing";

/// Replaces every missing marker. Deterministic and idempotent.
pub fn impute_missing(d: &Dataset, policy: ImputePolicy) -> Result<Dataset> {
    let n_features = d.schema().n_features();
    let feature_cols: Vec<_> = d.schema().feature_columns().cloned().collect();

    let mut fills: Vec<Option<FeatureValue>> = vec![None; n_features];
    for (j, col) in feature_cols.iter().enumerate() {
        let any_missing = d.records().iter().any(|r| r.features[j].is_missing());
        if !any_missing {
            continue;
        }
        let fill = match col.kind {
            FeatureKind::Categorical => FeatureValue::cat(MISSING_TOKEN),
            FeatureKind::Numeric => match policy.numeric_fill {
                NumericFill::Zero => FeatureValue::Num(0.0),
                NumericFill::Median => {
                    let mut vals: Vec<f64> = d
                        .records()
                        .iter()
                        .filter_map(|r| r.features[j].as_num())
                        .collect();
                    if vals.is_empty() {
                        return Err(Error::InvalidInput(format!(
                            "column {} is entirely missing; median fill impossible",
                            col.name
                        )));
                    }
                    vals.sort_by(f64::total_cmp);
                    let mid = vals.len() / 2;
                    let median = if vals.len() % 2 == 1 {
                        vals[mid]
                    } else {
                        (vals[mid - 1] + vals[mid]) / 2.0
                    };
                    FeatureValue::Num(median)
                }
            },
        };
        fills[j] = Some(fill);
    }

    if fills.iter().all(Option::is_none) {
        return Ok(d.clone());
    }

    let records = d
        .records()
        .iter()
        .map(|r| {
            let mut r = r.clone();
            for (j, f) in fills.iter().enumerate() {
                if let (true, Some(fill)) = (r.features[j].is_missing(), f) {
                    r.features[j] = fill.clone();
                }
            }
            r
        })
        .collect();
    Dataset::new(d.schema().clone(), records)
}

const SYNTH_FEATURES: [&str; 6] = ["dur", "sbytes", "dbytes", "sload", "dload", "spkts"];

/// Deterministic desk-scale synthetic flow generator.
///
/// Normal records draw every feature from a standard normal; attack records
/// are shifted by `separation` standard deviations, so separability is
/// tunable from indistinguishable (0) to trivially separable.
pub fn synth_flows(n: usize, attack_fraction: f64, separation: f64, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidInput("synth_flows requires n >= 1".into()));
    }
    if !(0.0..=1.0).contains(&attack_fraction) {
        return Err(Error::InvalidInput("attack_fraction must be in [0,1]".into()));
    }
    if separation.is_nan() || separation < 0.0 {
        return Err(Error::InvalidInput("separation must be >= 0".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_attack = (n as f64 * attack_fraction).round() as usize;
    let mut labels = vec![LABEL_ATTACK; n_attack];
    labels.resize(n, LABEL_NORMAL);
    labels.shuffle(&mut rng);

    let mut columns: Vec<Column> = IDENTIFIER_COLUMNS
        .iter()
        .map(|&name| Column::new(name, FeatureKind::Categorical, ColumnRole::Identifier))
        .collect();
    for name in SYNTH_FEATURES {
        columns.push(Column::new(name, FeatureKind::Numeric, ColumnRole::Feature));
    }
    columns.push(Column::new(
        "attack_cat",
        FeatureKind::Categorical,
        ColumnRole::AttackCategory,
    ));
    columns.push(Column::new("label", FeatureKind::Categorical, ColumnRole::Label));
    let schema = FeatureSchema::new(columns, "1")?;

    const SERVICES: [u16; 5] = [21, 25, 53, 80, 443];
    const PROTOS: [&str; 2] = ["tcp", "udp"];
    let records = labels
        .iter()
        .map(|&label| {
            let srcip = format!("10.0.{}.{}", rng.random_range(0..4u8), rng.random_range(1..250u8));
            let dstip = format!(
                "192.168.{}.{}",
                rng.random_range(0..4u8),
                rng.random_range(1..250u8)
            );
            let sport: u16 = rng.random_range(1024..=65535);
            let dsport = SERVICES[rng.random_range(0..SERVICES.len())];
            let proto = PROTOS[rng.random_range(0..PROTOS.len())];
            let shift = if label == LABEL_ATTACK { separation } else { 0.0 };
            let features = (0..SYNTH_FEATURES.len())
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    FeatureValue::Num(z + shift)
                })
                .collect();
            let attack_cat = (label == LABEL_ATTACK).then(|| "synthetic".to_string());
            FlowRecord {
                key: Some(FlowKey::new(srcip, sport, dstip, dsport, proto).expect("valid key")),
                features,
                label: Some(label),
                attack_cat,
            }
        })
        .collect();
    Dataset::new(schema, records)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_COL_DESC: &str = "class_positive=1\nsbytes,numeric,feature\nlabel,categorical,label\n";

    #[test]
    fn parse_two_row_fixture() {
        let desc = SchemaDescriptor::parse(TWO_COL_DESC).unwrap();
        let d = parse_flow_csv("100,0\n900,1\n".as_bytes(), &desc).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.class_counts().unwrap(), (1, 1));
        assert_eq!(d.records()[0].features[0], FeatureValue::Num(100.0));
    }

    #[test]
    fn empty_numeric_field_becomes_missing() {
        let desc = SchemaDescriptor::parse(
            "class_positive=1\na,numeric,feature\nb,numeric,feature\nlabel,categorical,label\n",
        )
        .unwrap();
        let d = parse_flow_csv(",,0\n".as_bytes(), &desc).unwrap();
        assert!(d.records()[0].features[0].is_missing());
        assert!(d.records()[0].features[1].is_missing());
    }

    #[test]
    fn wrong_arity_reports_line() {
        let desc = SchemaDescriptor::parse(TWO_COL_DESC).unwrap();
        let err = parse_flow_csv("100,0\n900\n".as_bytes(), &desc).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn bad_number_reports_line_and_column() {
        let desc = SchemaDescriptor::parse(TWO_COL_DESC).unwrap();
        let err = parse_flow_csv("abc,0\n".as_bytes(), &desc).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 1"), "{msg}");
        assert!(msg.contains("sbytes"), "{msg}");
    }

    #[test]
    fn header_row_skipped_when_declared() {
        let desc =
            SchemaDescriptor::parse(&format!("header=true\n{TWO_COL_DESC}")).unwrap();
        let d = parse_flow_csv("sbytes,label\n100,0\n".as_bytes(), &desc).unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn ignored_column_dropped() {
        let desc = SchemaDescriptor::parse(
            "class_positive=1\nid,numeric,ignore\nsbytes,numeric,feature\nlabel,categorical,label\n",
        )
        .unwrap();
        let d = parse_flow_csv("7,100,1\n".as_bytes(), &desc).unwrap();
        assert_eq!(d.schema().n_features(), 1);
        assert_eq!(d.records()[0].features[0], FeatureValue::Num(100.0));
    }

    #[test]
    fn identifier_columns_build_flow_keys() {
        let desc = SchemaDescriptor::parse(
            "class_positive=1\n\
             srcip,categorical,identifier\nsport,numeric,identifier\n\
             dstip,categorical,identifier\ndsport,numeric,identifier\n\
             proto,categorical,identifier\nsbytes,numeric,feature\nlabel,categorical,label\n",
        )
        .unwrap();
        let d = parse_flow_csv("10.0.0.1,1234,10.0.0.2,80,tcp,55,0\n".as_bytes(), &desc).unwrap();
        let key = d.records()[0].key.as_ref().unwrap();
        assert_eq!(key.srcip, "10.0.0.1");
        assert_eq!(key.dsport, 80);
        assert_eq!(key.proto, "tcp");
    }

    #[test]
    fn csv_round_trip() {
        let d = synth_flows(25, 0.4, 1.0, 9).unwrap();
        let mut buf = Vec::new();
        write_flow_csv(&d, &mut buf, true).unwrap();
        let desc = SchemaDescriptor::for_schema(d.schema(), true);
        let d2 = parse_flow_csv(buf.as_slice(), &desc).unwrap();
        assert_eq!(d, d2);
    }

    #[test]
    fn merge_identity_and_counts() {
        let d = synth_flows(3, 0.0, 0.0, 1).unwrap();
        let empty = Dataset::new(d.schema().clone(), vec![]).unwrap();
        assert_eq!(merge_datasets(&d, &empty).unwrap(), d);

        let e = synth_flows(2, 1.0, 0.0, 2).unwrap();
        assert_eq!(merge_datasets(&d, &e).unwrap().len(), 5);
    }

    #[test]
    fn merge_schema_mismatch_lists_columns() {
        let a = synth_flows(2, 0.0, 0.0, 1).unwrap();
        let b = a.project_features(&["sbytes".to_string()]).unwrap();
        let err = merge_datasets(&a, &b).unwrap_err();
        assert!(err.to_string().contains("dur"), "{err}");
    }

    #[test]
    fn merge_associative_over_records() {
        let a = synth_flows(3, 0.5, 0.0, 1).unwrap();
        let b = synth_flows(2, 0.5, 0.0, 2).unwrap();
        let c = synth_flows(4, 0.5, 0.0, 3).unwrap();
        let left = merge_datasets(&merge_datasets(&a, &b).unwrap(), &c).unwrap();
        let right = merge_datasets(&a, &merge_datasets(&b, &c).unwrap()).unwrap();
        assert_eq!(left, right);
    }

    fn missing_fixture() -> Dataset {
        let desc = SchemaDescriptor::parse(
            "class_positive=1\nx,numeric,feature\nproto,categorical,feature\nlabel,categorical,label\n",
        )
        .unwrap();
        parse_flow_csv("1,tcp,0\n,,1\n3,tcp,0\n".as_bytes(), &desc).unwrap()
    }

    #[test]
    fn impute_median_and_token() {
        let d = impute_missing(&missing_fixture(), ImputePolicy::default()).unwrap();
        assert_eq!(d.records()[1].features[0], FeatureValue::Num(2.0));
        assert_eq!(d.records()[1].features[1], FeatureValue::cat(MISSING_TOKEN));
    }

    #[test]
    fn impute_zero_policy() {
        let d = impute_missing(
            &missing_fixture(),
            ImputePolicy {
                numeric_fill: NumericFill::Zero,
            },
        )
        .unwrap();
        assert_eq!(d.records()[1].features[0], FeatureValue::Num(0.0));
    }

    #[test]
    fn impute_idempotent_and_identity() {
        let d = missing_fixture();
        let once = impute_missing(&d, ImputePolicy::default()).unwrap();
        let twice = impute_missing(&once, ImputePolicy::default()).unwrap();
        assert_eq!(once, twice);

        let clean = synth_flows(5, 0.5, 0.0, 7).unwrap();
        assert_eq!(impute_missing(&clean, ImputePolicy::default()).unwrap(), clean);
    }

    #[test]
    fn impute_all_missing_median_errors() {
        let desc = SchemaDescriptor::parse(
            "class_positive=1\nempty_col,numeric,feature\nlabel,categorical,label\n",
        )
        .unwrap();
        let d = parse_flow_csv(",0\n,1\n".as_bytes(), &desc).unwrap();
        let err = impute_missing(&d, ImputePolicy::default()).unwrap_err();
        assert!(err.to_string().contains("empty_col"), "{err}");
    }

    #[test]
    fn synth_deterministic() {
        let a = synth_flows(100, 0.5, 2.0, 42).unwrap();
        let b = synth_flows(100, 0.5, 2.0, 42).unwrap();
        assert_eq!(a, b);
        let c = synth_flows(100, 0.5, 2.0, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synth_counts_and_shape() {
        let d = synth_flows(100, 0.3, 1.0, 1).unwrap();
        assert_eq!(d.len(), 100);
        assert_eq!(d.class_counts().unwrap(), (70, 30));
        assert!(d.schema().n_features() >= 6);
        assert!(d.records().iter().all(|r| r.key.is_some()));
    }
}
