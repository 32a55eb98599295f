//! Acceptance gate: one test per criterion, each printing a single
//! PASS/FAIL/SKIP line (run with `cargo test --test acceptance -- --nocapture`
//! to see the lines; a FAIL also fails the test).
//!
//! Criteria 3 and 4 need the published UNSW-NB15 train/test partition CSVs.
//! They are looked up under `$UNSW_NB15_DIR`, then `./data/`; when absent the
//! tests print a visible SKIP notice and pass vacuously.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use flowforensics::classifiers::{
    mine_class_rules, train_c45, train_mlp, train_nb, ArmParams, C45Params, Classifier, MlpParams,
    NbParams, Prediction, TrainedModel,
};
use flowforensics::cli::{cmd_evaluate, RunConfig};
use flowforensics::evaluate::{
    cross_validate, metrics, stratified_folds, ClassifierSpec, ConfusionMatrix, CvOptions,
    FeatureSelection,
};
use flowforensics::flow_model::{Dataset, FlowRecord};
use flowforensics::forensics::{
    attribute_flows, emit_report, summarize_hosts, ForensicReport, GroupBy, ReportFormat,
    ReportMeta,
};
use flowforensics::ingest::{
    merge_datasets, parse_flow_csv, synth_flows, write_flow_csv, SchemaDescriptor,
};
use flowforensics::preprocess::{
    apply_discretization, entropy, fit_discretization, rank_features, BinningMethod,
};

fn pass(n: u32, what: &str) {
    println!("ACCEPTANCE {n} ({what}): PASS");
}

fn skip(n: u32, what: &str, why: &str) {
    println!("ACCEPTANCE {n} ({what}): SKIP — {why}");
}

/// Criterion 1: the published confusion matrices reproduce the published
/// percentage metrics exactly at two decimals. The first matrix computes to
/// 85.63/14.37, documented as diverging from its separately printed
/// 86.45/13.55 summary.
#[test]
fn criterion_1_metric_engine_golden() {
    let cases = [
        ("arm", ConfusionMatrix::new(31785, 10894, 12675, 108654), "85.63", "14.37"),
        ("dt", ConfusionMatrix::new(84607, 8393, 9058, 155615), "93.23", "6.77"),
        ("nb", ConfusionMatrix::new(84101, 8899, 61380, 103293), "72.73", "27.27"),
        ("ann", ConfusionMatrix::new(2719, 90281, 2562, 162111), "63.97", "36.03"),
    ];
    for (tag, cm, acc, far) in cases {
        let m = metrics(&cm).unwrap();
        assert_eq!(format!("{:.2}", m.accuracy * 100.0), acc, "{tag} accuracy");
        assert_eq!(format!("{:.2}", m.far * 100.0), far, "{tag} far");
    }
    // The first matrix's computed 85.63 deliberately differs from the 86.45
    // its source table prints alongside it.
    let m = metrics(&cases[0].1).unwrap();
    assert_ne!(format!("{:.2}", m.accuracy * 100.0), "86.45");
    pass(1, "metric engine golden values");
}

/// Criterion 2: accuracy + FAR = 1 exactly on 1,000 randomized matrices.
#[test]
fn criterion_2_accuracy_far_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let cm = ConfusionMatrix::new(
            rng.random_range(0..1_000_000),
            rng.random_range(0..1_000_000),
            rng.random_range(0..1_000_000),
            rng.random_range(1..1_000_000),
        );
        let m = metrics(&cm).unwrap();
        assert_eq!(m.accuracy + m.far, 1.0, "{cm:?}");
    }
    pass(2, "accuracy + far identity, 1000 random matrices");
}

fn partition_schema() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas/unsw_nb15_partition.schema")
}

fn dataset_files() -> Option<(PathBuf, PathBuf)> {
    let mut roots: Vec<PathBuf> = Vec::new();
    if let Ok(dir) = std::env::var("UNSW_NB15_DIR") {
        roots.push(PathBuf::from(dir));
    }
    roots.push(PathBuf::from("data"));
    for root in roots {
        let train = root.join("UNSW_NB15_training-set.csv");
        let test = root.join("UNSW_NB15_testing-set.csv");
        if train.is_file() && test.is_file() {
            return Some((train, test));
        }
    }
    None
}

fn load_merged() -> Dataset {
    let (train, test) = dataset_files().expect("caller checked presence");
    let descriptor = SchemaDescriptor::load(&partition_schema()).unwrap();
    let a = parse_flow_csv(fs::File::open(&train).unwrap(), &descriptor).unwrap();
    let b = parse_flow_csv(fs::File::open(&test).unwrap(), &descriptor).unwrap();
    merge_datasets(&a, &b).unwrap()
}

const PUBLISHED_TOP10: [&str; 10] = [
    "sbytes", "dbytes", "smean", "sload", "ct_state_ttl", "sttl", "dttl", "rate", "dur", "dmean",
];

/// Criterion 3: the merged public partitions have 257,673 records; the gain
/// ranking puts sbytes first with a score near the published 0.654 and
/// shares at least 8 of the published top ten.
#[test]
fn criterion_3_dataset_reproduction() {
    let what = "dataset ranking reproduction";
    if dataset_files().is_none() {
        skip(
            3,
            what,
            "UNSW-NB15 partition CSVs not found under $UNSW_NB15_DIR or ./data/",
        );
        return;
    }
    let d = load_merged();
    assert_eq!(d.len(), 257_673, "merged record count");
    let ranking = rank_features(&d).unwrap();
    assert_eq!(ranking.scores[0].feature, "sbytes", "top-ranked feature");
    let sbytes_ig = ranking.scores[0].ig;
    assert!(
        (sbytes_ig - 0.654).abs() <= 0.10,
        "sbytes score {sbytes_ig} outside 0.654 +/- 0.10"
    );
    let top10: Vec<&str> = ranking.scores[..10].iter().map(|s| s.feature.as_str()).collect();
    let shared = PUBLISHED_TOP10.iter().filter(|f| top10.contains(f)).count();
    assert!(shared >= 8, "only {shared} of the published top ten in {top10:?}");
    pass(3, what);
}

fn stratified_subsample(d: &Dataset, n_target: usize, seed: u64) -> Dataset {
    let labels = d.labels().unwrap();
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::new();
    for idx in &mut by_class {
        idx.shuffle(&mut rng);
        let take = (idx.len() * n_target + d.len() / 2) / d.len();
        keep.extend_from_slice(&idx[..take.min(idx.len())]);
    }
    keep.sort_unstable();
    d.subset(&keep).unwrap()
}

/// Criterion 4: directional reproduction — with the published protocol
/// (top-10 features ranked once, 10 folds, default hyperparameters) the
/// decision tree reaches pooled accuracy >= 90% and beats the other three.
/// Subsampling to 50,000 stratified records is permitted; the seed is
/// printed so the subsample is reproducible.
#[test]
fn criterion_4_directional_reproduction() {
    let what = "directional cross-validation reproduction";
    if dataset_files().is_none() {
        skip(
            4,
            what,
            "UNSW-NB15 partition CSVs not found under $UNSW_NB15_DIR or ./data/",
        );
        return;
    }
    const SUBSAMPLE_SEED: u64 = 20_260_824;
    let full = load_merged();
    let d = stratified_subsample(&full, 50_000, SUBSAMPLE_SEED);
    println!("criterion 4: subsampled {} of {} records, seed {SUBSAMPLE_SEED}", d.len(), full.len());

    let ranking = rank_features(&d).unwrap();
    let keep: Vec<String> = ranking.scores[..10].iter().map(|s| s.feature.clone()).collect();
    let opts = CvOptions {
        folds: 10,
        seed: 4,
        selection: FeatureSelection::Fixed(keep),
    };
    let mut accuracies = Vec::new();
    for spec in [
        ClassifierSpec::Arm(ArmParams::default()),
        ClassifierSpec::Dt(C45Params::default()),
        ClassifierSpec::Nb(NbParams::default()),
        ClassifierSpec::Ann(MlpParams::default()),
    ] {
        let report = cross_validate(&d, &spec, &opts).unwrap();
        println!(
            "criterion 4: {} accuracy {:.2}% far {:.2}%",
            report.classifier,
            report.pooled_metrics.accuracy * 100.0,
            report.pooled_metrics.far * 100.0
        );
        accuracies.push((report.classifier, report.pooled_metrics.accuracy));
    }
    let dt = accuracies.iter().find(|(t, _)| t == "dt").unwrap().1;
    assert!(dt >= 0.90, "dt pooled accuracy {dt} below 0.90");
    for (tag, acc) in &accuracies {
        if tag != "dt" {
            assert!(dt >= *acc, "dt ({dt}) not >= {tag} ({acc})");
        }
    }
    pass(4, what);
}

/// Criterion 5: compact desk-scale property checks. The full randomized
/// suites live in tests/properties.rs; this run re-asserts each family so
/// the gate is self-contained.
#[test]
fn criterion_5_property_suites() {
    // Entropy bounds and symmetry.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let a = rng.random_range(0..10_000u64);
        let b = rng.random_range(1..10_000u64);
        let h = entropy(&[a, b]).unwrap();
        assert!((0.0..=1.0 + 1e-12).contains(&h));
        assert_eq!(h, entropy(&[b, a]).unwrap());
    }

    // 0 <= IG <= H(S) across random datasets.
    for seed in 0..100u64 {
        let d = synth_flows(40, 0.3, rng.random_range(0.0..3.0), seed).unwrap();
        let (n0, n1) = d.class_counts().unwrap();
        let h = entropy(&[n0, n1]).unwrap();
        for s in &rank_features(&d).unwrap().scores {
            assert!(s.ig >= 0.0 && s.ig <= h + 1e-9);
        }
    }

    // Unpruned tree memorizes contradiction-free data.
    for seed in 0..10u64 {
        let d = synth_flows(50, 0.5, 0.5, seed).unwrap();
        let m = train_c45(&d, &C45Params { min_leaf: 1, prune: false, ..Default::default() }).unwrap();
        let labels = d.labels().unwrap();
        for (r, &l) in d.records().iter().zip(&labels) {
            assert_eq!(m.predict(r).unwrap().label, l);
        }
    }

    // Gradient vs central finite differences.
    for seed in 0..3u64 {
        let d = synth_flows(8, 0.5, 1.0, seed).unwrap();
        let mut m = train_mlp(&d, &MlpParams { epochs: 0, seed, ..Default::default() }).unwrap();
        let theta: Vec<f64> = (0..m.flat_params().len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        m.set_flat_params(&theta).unwrap();
        let grad = flowforensics::classifiers::mlp_loss_gradient(&m, d.records()).unwrap();
        let h = 1e-5;
        for i in 0..theta.len() {
            let mut t = theta.clone();
            t[i] += h;
            m.set_flat_params(&t).unwrap();
            let lp = flowforensics::classifiers::mlp_batch_loss(&m, d.records()).unwrap();
            t[i] -= 2.0 * h;
            m.set_flat_params(&t).unwrap();
            let lm = flowforensics::classifiers::mlp_batch_loss(&m, d.records()).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-8);
            assert!(rel < 1e-4);
        }
    }

    // Rule mining matches the thresholds on a discretized set.
    let d = synth_flows(120, 0.4, 5.0, 7).unwrap();
    let discrete = apply_discretization(&d, &fit_discretization(&d, BinningMethod::Mdl).unwrap()).unwrap();
    let model = mine_class_rules(&discrete, &ArmParams::default()).unwrap();
    let n = discrete.len() as f64;
    for r in &model.rules {
        assert!(r.confidence >= model.params.min_confidence);
        assert!(r.support * n >= 0.0);
    }

    // Stratified folds partition the index range.
    for seed in 0..10u64 {
        let d = synth_flows(60, 0.4, 0.0, seed).unwrap();
        let folds = stratified_folds(&d, 5, seed).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..60).collect::<Vec<_>>());
    }

    // NB argmax matches its log posteriors and is shift-invariant.
    let d = synth_flows(60, 0.5, 2.0, 9).unwrap();
    let nb = train_nb(&d, &NbParams::default()).unwrap();
    for r in d.records() {
        let (label, lp) = flowforensics::classifiers::predict_nb(&nb, r).unwrap();
        assert_eq!(label == 1, lp[1] > lp[0]);
        assert_eq!((lp[1] + 10.0) > (lp[0] + 10.0), lp[1] > lp[0]);
    }

    pass(5, "desk-scale property suites");
}

/// Stub classifier scripting the published per-flow labels by key.
struct Scripted(std::collections::HashMap<String, u8>);

impl Classifier for Scripted {
    fn tag(&self) -> &'static str {
        "scripted"
    }
    fn predict(&self, r: &FlowRecord) -> flowforensics::Result<Prediction> {
        Ok(Prediction::plain(self.0[&r.key.as_ref().unwrap().to_string()]))
    }
}

/// Criterion 6: the published five-row investigation table round-trips
/// byte-exactly through attribution and delimited emission, and the source
/// summary of 175.45.176.3 is consistent.
///
/// Note on the summary count: the five published rows show 175.45.176.3 as
/// the *source* of exactly one flow (the label-1 smtp flow); it appears as
/// destination in three more. This test asserts the direct counts (1 source
/// flow, 1 attack; 3 inbound flows) rather than a miscounted total.
#[test]
fn criterion_6_forensic_round_trip() {
    use flowforensics::flow_model::{
        Column, ColumnRole, FeatureKind, FeatureSchema, FeatureValue, FlowKey,
    };
    let rows = [
        ("149.171.126.14", 179u16, "175.45.176.3", 33159u16, "tcp", 0u8),
        ("149.171.126.18", 1043, "175.45.176.3", 53, "udp", 0),
        ("175.45.176.3", 46577, "149.171.126.18", 25, "tcp", 1),
        ("149.171.126.15", 1043, "175.45.176.3", 53, "udp", 0),
        ("175.45.176.2", 16415, "149.171.126.16", 445, "tcp", 1),
    ];
    let mut cols: Vec<Column> = ["srcip", "sport", "dstip", "dsport", "proto"]
        .iter()
        .map(|n| Column::new(n.to_string(), FeatureKind::Categorical, ColumnRole::Identifier))
        .collect();
    cols.push(Column::new("dur", FeatureKind::Numeric, ColumnRole::Feature));
    cols.push(Column::new("label", FeatureKind::Numeric, ColumnRole::Label));
    let schema = FeatureSchema::new(cols, "1").unwrap();

    let mut records = Vec::new();
    let mut script = std::collections::HashMap::new();
    for (srcip, sport, dstip, dsport, proto, label) in rows {
        let key = FlowKey::new(srcip, sport, dstip, dsport, proto).unwrap();
        script.insert(key.to_string(), label);
        records.push(
            FlowRecord::new(vec![FeatureValue::num(1.0).unwrap()], Some(label)).with_key(key),
        );
    }
    let d = Dataset::new(schema, records).unwrap();
    let attributed = attribute_flows(&d, &Scripted(script)).unwrap();
    let report = ForensicReport::build(
        attributed,
        "scripted",
        ReportMeta { dataset_id: "published-rows".into(), seed: 6, params: "stub".into() },
        GroupBy::Source,
    );
    let text = emit_report(&report, ReportFormat::Delimited);
    let expected = "srcip,sport,dstip,dsport,proto,label,rule_id\n\
                    149.171.126.14,179,175.45.176.3,33159,tcp,0,\n\
                    149.171.126.18,1043,175.45.176.3,53,udp,0,\n\
                    175.45.176.3,46577,149.171.126.18,25,tcp,1,\n\
                    149.171.126.15,1043,175.45.176.3,53,udp,0,\n\
                    175.45.176.2,16415,149.171.126.16,445,tcp,1,\n";
    assert_eq!(text, expected, "delimited output not byte-exact");

    let hosts = summarize_hosts(&report.attributed);
    let h = hosts.iter().find(|h| h.host == "175.45.176.3").unwrap();
    println!(
        "criterion 6 notice: 175.45.176.3 sources {} flow(s) ({} attack) in the published rows; \
         it is the destination of 3 more",
        h.flows_total, h.flows_attack
    );
    assert_eq!(h.flows_attack, 1);
    assert_eq!(h.flows_total, 1);
    let inbound = flowforensics::forensics::summarize_hosts_by(
        &report.attributed,
        flowforensics::forensics::GroupBy::Destination,
    );
    assert_eq!(inbound.iter().find(|h| h.host == "175.45.176.3").unwrap().flows_total, 3);
    pass(6, "forensic attribution round trip");
}

/// Criterion 7: running the evaluate command twice with the same config and
/// seed yields byte-identical reports.
#[test]
fn criterion_7_end_to_end_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = synth_flows(150, 0.4, 4.0, 7).unwrap();
    let csv = dir.path().join("train.csv");
    let mut buf = Vec::new();
    write_flow_csv(&d, &mut buf, false).unwrap();
    fs::write(&csv, buf).unwrap();
    let schema = dir.path().join("synth.schema");
    fs::write(&schema, SchemaDescriptor::for_schema(d.schema(), false).to_text()).unwrap();
    let cfg_path = dir.path().join("run.toml");
    fs::write(
        &cfg_path,
        format!(
            "[data]\npaths = [{:?}]\nschema = {:?}\n\n[pipeline]\nseed = 7\nfolds = 5\ntop_k = 4\n\n[params.ann]\nepochs = 15\n",
            csv.display().to_string(),
            schema.display().to_string(),
        ),
    )
    .unwrap();
    let cfg = RunConfig::load(&cfg_path).unwrap();
    let out1 = dir.path().join("e1.txt");
    let out2 = dir.path().join("e2.txt");
    cmd_evaluate(&cfg, &out1).unwrap();
    cmd_evaluate(&cfg, &out2).unwrap();
    assert_eq!(fs::read(&out1).unwrap(), fs::read(&out2).unwrap());
    pass(7, "end-to-end determinism");
}

/// Round-trip sanity shared by several criteria: a trained model written to
/// JSON predicts identically after reload.
#[test]
fn supporting_model_round_trip() {
    let d = synth_flows(100, 0.4, 3.0, 8).unwrap();
    let m = TrainedModel::DecisionTree(train_c45(&d, &C45Params::default()).unwrap());
    let r = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
    for rec in d.records() {
        assert_eq!(m.predict(rec).unwrap().label, r.predict(rec).unwrap().label);
    }
}
