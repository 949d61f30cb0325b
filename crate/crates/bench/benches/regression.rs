use std::hint::black_box;
use std::path::PathBuf;

use compsense_core::bowreg::{train_on, TrainConfig};
use compsense_core::corpus::read_corpus;
use compsense_core::lexfeat::{build_vocab, FeatureOptions, FeatureVector};
use compsense_core::{Label, SoftmaxModel};
use criterion::{criterion_group, criterion_main, Criterion};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../cli/tests/fixtures").join(name)
}

fn regression(c: &mut Criterion) {
    let train = read_corpus(fixture("train.jsonl")).unwrap();
    let vocab = build_vocab(train.iter().cloned().map(Ok), 1, FeatureOptions::default()).unwrap();
    let data: Vec<(FeatureVector, Label)> = train.iter().filter_map(|e| e.gold.map(|g| (vocab.featurize(e), g))).collect();
    let model = SoftmaxModel::zeros(vocab.dim(), true, vocab.fingerprint());

    c.bench_function("featurize_200", |b| b.iter(|| train.iter().map(|e| vocab.featurize(black_box(e)).len()).sum::<usize>()));
    c.bench_function("loss_and_grad_batch_200", |b| b.iter(|| model.loss_and_grad(black_box(&data), 1e-6)));
    c.bench_function("predict_proba_200", |b| b.iter(|| data.iter().map(|(v, _)| model.predict_proba(black_box(v)).0[0]).sum::<f64>()));
    let config = TrainConfig { epochs: 1, batch_size: 16, ..TrainConfig::default() };
    c.bench_function("train_one_epoch_200", |b| b.iter(|| train_on(black_box(&data), &vocab, &config).unwrap()));
}

criterion_group!(benches, regression);
criterion_main!(benches);
