use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use compsense_core::corpus::read_corpus;
use compsense_core::evalx::{
    eval_set_from, evaluate, human_estimate, load_predictions, read_report, restrict, write_report, EvalReport, EvalRow,
    HumanMode, Prediction, PredictionSet, ReportFormat, ReportMeta,
};
use compsense_core::Label;
use proptest::prelude::*;

fn cli_fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../cli/tests/fixtures").join(name)
}

fn label() -> impl Strategy<Value = Label> {
    (0usize..3).prop_map(|i| Label::ALL[i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn evaluation_ignores_set_order(rows in prop::collection::vec((label(), prop::option::weighted(0.8, label())), 1..80), seed in any::<u64>()) {
        prop_assume!(rows.iter().any(|(_, p)| p.is_some()));
        let set: Vec<(String, Label)> = rows.iter().enumerate().map(|(i, (g, _))| (format!("id{i}"), *g)).collect();
        let preds = PredictionSet {
            model_name: "m".into(),
            predictions: rows
                .iter()
                .enumerate()
                .filter_map(|(i, (_, p))| p.map(|l| (format!("id{i}"), Prediction { label: l, probs: None })))
                .collect(),
        };
        let mut perm = set.clone();
        let mut r = seed | 1;
        for i in (1..perm.len()).rev() {
            r ^= r << 13;
            r ^= r >> 7;
            r ^= r << 17;
            perm.swap(i, (r % (i as u64 + 1)) as usize);
        }
        let a = evaluate(&preds, &set, false).unwrap();
        prop_assert_eq!(&a, &evaluate(&preds, &perm, false).unwrap());
        let covered = rows.iter().filter(|(_, p)| p.is_some()).count();
        let correct = rows.iter().filter(|(g, p)| *p == Some(*g)).count();
        prop_assert_eq!((a.covered, a.correct), (covered, correct));
        prop_assert_eq!(a.accuracy, correct as f64 / covered as f64);
        prop_assert_eq!(evaluate(&preds, &set, true).is_ok(), covered == rows.len());
    }
}

fn sample_report() -> EvalReport {
    let rows = vec![
        EvalRow { model: "bow".into(), set: "dev".into(), n: 185, coverage: 1.0, accuracy: 0.881, pct: [33.5, 30.0, 36.5] },
        EvalRow { model: "a|b, \"c\"".into(), set: "cs_0.7".into(), n: 8, coverage: 0.875, accuracy: 1.0 / 7.0, pct: [100.0 / 7.0, 0.0, 600.0 / 7.0] },
        EvalRow { model: "majority".into(), set: "adv_soswap".into(), n: 98, coverage: 1.0, accuracy: 1.0, pct: [0.0, 100.0, 0.0] },
    ];
    EvalReport {
        rows,
        meta: ReportMeta { lambdas: vec![0.5, 0.7], fingerprints: BTreeMap::from([("model".into(), "abc".into())]), timestamp: None },
    }
}

#[test]
fn reports_parse_back_in_every_format() {
    let report = sample_report();
    for fmt in [ReportFormat::Csv, ReportFormat::Markdown, ReportFormat::Json] {
        let mut buf = Vec::new();
        write_report(&mut buf, &report, fmt).unwrap();
        let back = read_report(buf.as_slice(), fmt).unwrap();
        assert_eq!(back.rows, report.rows, "{fmt:?}");
    }
    let mut md = Vec::new();
    write_report(&mut md, &report, ReportFormat::Markdown).unwrap();
    let md = String::from_utf8(md).unwrap();
    let table: Vec<&str> = md.lines().filter(|l| l.starts_with('|')).collect();
    assert_eq!(table.len(), 2 + report.rows.len());
}

#[test]
fn fixture_predictions_match_a_recount() {
    let dev = read_corpus(cli_fixture("dev.jsonl")).unwrap();
    let set = eval_set_from(&dev);
    assert_eq!(set.len(), dev.iter().filter(|e| e.gold.is_some()).count());
    let preds = load_predictions(cli_fixture("noisy_oracle.tsv"), None).unwrap();
    assert_eq!(preds.model_name, "noisy_oracle");

    let text = std::fs::read_to_string(cli_fixture("noisy_oracle.tsv")).unwrap();
    let raw: HashMap<&str, &str> = text.lines().skip(1).map(|l| {
        let mut c = l.split('\t');
        (c.next().unwrap(), c.next().unwrap())
    }).collect();
    let gold: HashMap<&str, &str> = dev.iter().filter_map(|e| e.gold.map(|g| (e.pair_id.as_str(), g.as_str()))).collect();
    let covered = gold.keys().filter(|id| raw.contains_key(*id)).count();
    let correct = gold.iter().filter(|(id, g)| raw.get(*id) == Some(*g)).count();

    let r = evaluate(&preds, &set, false).unwrap();
    assert_eq!((r.n, r.covered, r.correct), (gold.len(), covered, correct));
    assert!(covered < gold.len());
    assert!(evaluate(&preds, &set, true).is_err());

    let ids: Vec<String> = set.iter().step_by(3).map(|(id, _)| id.clone()).collect();
    let sub = restrict(&set, &ids);
    assert_eq!(sub.len(), ids.len());
    assert!(evaluate(&preds, &sub, false).unwrap().n == ids.len());
}

#[test]
fn human_average_on_fixture_matches_a_slot_recount() {
    let dev = read_corpus(cli_fixture("dev.jsonl")).unwrap();
    let set = eval_set_from(&dev);
    let est = human_estimate(&dev, &set, HumanMode::Average).unwrap();
    let slots = dev.iter().map(|e| e.annotator_labels.len()).max().unwrap();
    let mut accs = Vec::new();
    for k in 0..slots {
        let votes: Vec<bool> = dev
            .iter()
            .filter_map(|e| e.gold.and_then(|g| e.annotator_labels.get(k).map(|v| *v == Some(g))))
            .collect();
        accs.push(votes.iter().filter(|v| **v).count() as f64 / votes.len() as f64);
        let slot = human_estimate(&dev, &set, HumanMode::Slot(k)).unwrap();
        assert!((slot.accuracy - accs[k]).abs() < 1e-12);
    }
    let mean = accs.iter().sum::<f64>() / slots as f64;
    assert!((est.accuracy - mean).abs() < 1e-12, "{} vs {mean}", est.accuracy);
    let a = human_estimate(&dev, &set, HumanMode::Seeded(9)).unwrap();
    assert_eq!(a, human_estimate(&dev, &set, HumanMode::Seeded(9)).unwrap());
}
