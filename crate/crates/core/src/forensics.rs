//! Attribution of predictions back to flow identifiers and per-host
//! summaries for investigation.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classifiers::Classifier;
use crate::error::{Error, Result};
use crate::flow_model::{Dataset, FlowKey, LABEL_ATTACK};

/// One prediction joined to its flow identifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributedFlow {
    pub key: FlowKey,
    pub predicted_label: u8,
    pub actual_label: Option<u8>,
    /// Present only when a rule-list model fired a rule.
    pub matched_rule_id: Option<u64>,
    pub attack_cat: Option<String>,
    /// Flow start/end timestamps, echoed when the schema carries them.
    pub stime: Option<f64>,
    pub ltime: Option<f64>,
}

/// Which endpoint of the five-tuple to group summaries by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Source,
    Destination,
}

/// Aggregate view of one host's flows. `distinct_peers` counts the IPs on
/// the other end of the grouped flows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostSummary {
    pub host: String,
    pub flows_total: u64,
    pub flows_attack: u64,
    pub distinct_dst: u64,
    pub distinct_dsport: u64,
    pub protocols: BTreeSet<String>,
    pub rule_ids: BTreeSet<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub dataset_id: String,
    pub seed: u64,
    pub params: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForensicReport {
    pub attributed: Vec<AttributedFlow>,
    pub hosts: Vec<HostSummary>,
    pub model_tag: String,
    pub meta: ReportMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Delimited,
}

/// Predicts every record and joins the result to its flow key, in input
/// order. Errors on the first record lacking identifiers, since attribution
/// is meaningless without them.
pub fn attribute_flows(d: &Dataset, model: &dyn Classifier) -> Result<Vec<AttributedFlow>> {
    let stime_idx = d.schema().feature_index("stime").ok();
    let ltime_idx = d.schema().feature_index("ltime").ok();
    let mut out = Vec::with_capacity(d.len());
    for (index, r) in d.records().iter().enumerate() {
        let key = r.key.clone().ok_or(Error::MissingFlowKey { index })?;
        let p = model.predict(r)?;
        out.push(AttributedFlow {
            key,
            predicted_label: p.label,
            actual_label: r.label,
            matched_rule_id: p.rule_id,
            attack_cat: r.attack_cat.clone(),
            stime: stime_idx.and_then(|i| r.features[i].as_num()),
            ltime: ltime_idx.and_then(|i| r.features[i].as_num()),
        });
    }
    Ok(out)
}

/// Groups attributed flows by source IP.
pub fn summarize_hosts(flows: &[AttributedFlow]) -> Vec<HostSummary> {
    summarize_hosts_by(flows, GroupBy::Source)
}

/// Groups by the chosen endpoint, sorted by attack count descending, ties
/// broken by host string ascending.
pub fn summarize_hosts_by(flows: &[AttributedFlow], group_by: GroupBy) -> Vec<HostSummary> {
    struct Acc {
        total: u64,
        attack: u64,
        peers: BTreeSet<String>,
        dsports: BTreeSet<u16>,
        protocols: BTreeSet<String>,
        rule_ids: BTreeSet<u64>,
    }
    let mut groups: BTreeMap<String, Acc> = BTreeMap::new();
    for f in flows {
        let (host, peer) = match group_by {
            GroupBy::Source => (&f.key.srcip, &f.key.dstip),
            GroupBy::Destination => (&f.key.dstip, &f.key.srcip),
        };
        let acc = groups.entry(host.clone()).or_insert_with(|| Acc {
            total: 0,
            attack: 0,
            peers: BTreeSet::new(),
            dsports: BTreeSet::new(),
            protocols: BTreeSet::new(),
            rule_ids: BTreeSet::new(),
        });
        acc.total += 1;
        if f.predicted_label == LABEL_ATTACK {
            acc.attack += 1;
        }
        acc.peers.insert(peer.clone());
        acc.dsports.insert(f.key.dsport);
        acc.protocols.insert(f.key.proto.clone());
        if let Some(id) = f.matched_rule_id {
            acc.rule_ids.insert(id);
        }
    }
    let mut out: Vec<HostSummary> = groups
        .into_iter()
        .map(|(host, acc)| HostSummary {
            host,
            flows_total: acc.total,
            flows_attack: acc.attack,
            distinct_dst: acc.peers.len() as u64,
            distinct_dsport: acc.dsports.len() as u64,
            protocols: acc.protocols,
            rule_ids: acc.rule_ids,
        })
        .collect();
    out.sort_by(|a, b| b.flows_attack.cmp(&a.flows_attack).then_with(|| a.host.cmp(&b.host)));
    out
}

impl ForensicReport {
    pub fn build(
        attributed: Vec<AttributedFlow>,
        model_tag: impl Into<String>,
        meta: ReportMeta,
        group_by: GroupBy,
    ) -> ForensicReport {
        let hosts = summarize_hosts_by(&attributed, group_by);
        ForensicReport {
            attributed,
            hosts,
            model_tag: model_tag.into(),
            meta,
        }
    }
}

const DELIMITED_HEADER: &str = "srcip,sport,dstip,dsport,proto,label,rule_id";

fn fmt_opt_num(v: Option<f64>) -> String {
    v.map(|n| format!("{n}")).unwrap_or_default()
}

/// Renders the report. `Delimited` is the stable machine format: a fixed
/// header then one line per flow, empty rule_id field when no rule fired,
/// with two trailing timestamp columns when any flow carries them.
/// Byte-deterministic given the report.
pub fn emit_report(r: &ForensicReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Delimited => emit_delimited(r),
        ReportFormat::Table => emit_table(r),
    }
}

fn has_timestamps(r: &ForensicReport) -> bool {
    r.attributed.iter().any(|f| f.stime.is_some() || f.ltime.is_some())
}

fn emit_delimited(r: &ForensicReport) -> String {
    let timestamps = has_timestamps(r);
    let mut out = String::from(DELIMITED_HEADER);
    if timestamps {
        out.push_str(",stime,ltime");
    }
    out.push('\n');
    for f in &r.attributed {
        let rule = f.matched_rule_id.map(|id| id.to_string()).unwrap_or_default();
        let _ = write!(out, "{},{},{rule}", f.key, f.predicted_label);
        if timestamps {
            let _ = write!(out, ",{},{}", fmt_opt_num(f.stime), fmt_opt_num(f.ltime));
        }
        out.push('\n');
    }
    out
}

fn emit_table(r: &ForensicReport) -> String {
    let mut rows: Vec<[String; 7]> = vec![[
        "srcip".into(),
        "sport".into(),
        "dstip".into(),
        "dsport".into(),
        "proto".into(),
        "label".into(),
        "rule_id".into(),
    ]];
    for f in &r.attributed {
        rows.push([
            f.key.srcip.clone(),
            f.key.sport.to_string(),
            f.key.dstip.clone(),
            f.key.dsport.to_string(),
            f.key.proto.clone(),
            f.predicted_label.to_string(),
            f.matched_rule_id.map(|id| id.to_string()).unwrap_or_default(),
        ]);
    }
    let mut widths = [0usize; 7];
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = format!(
        "forensic report: model={} dataset={} seed={} params={}\n\n",
        r.model_tag, r.meta.dataset_id, r.meta.seed, r.meta.params
    );
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out.push_str("\nhost summaries:\n");
    out.push_str("host  flows_total  flows_attack  distinct_dst  distinct_dsport  protocols  rule_ids\n");
    for h in &r.hosts {
        let protos: Vec<&str> = h.protocols.iter().map(String::as_str).collect();
        let rules: Vec<String> = h.rule_ids.iter().map(u64::to_string).collect();
        let _ = writeln!(
            out,
            "{}  {}  {}  {}  {}  {}  {}",
            h.host,
            h.flows_total,
            h.flows_attack,
            h.distinct_dst,
            h.distinct_dsport,
            protos.join("|"),
            rules.join("|"),
        );
    }
    out
}
