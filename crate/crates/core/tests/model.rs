use compsense_core::bowreg::{load_model, save_model, train_on, ModelFormat, SoftmaxModel, TrainConfig};
use compsense_core::lexfeat::{FeatureOptions, FeatureVector, Vocabulary};
use compsense_core::Label;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_model(r: &mut ChaCha8Rng, dim: usize, bias: bool) -> SoftmaxModel {
    let weights: Vec<[f64; 3]> = (0..dim)
        .map(|_| {
            let mut w = [0.0; 3];
            for x in &mut w {
                // mix magnitudes so the text encoding has to round-trip awkward values
                *x = r.random_range(-1.0..1.0) * 10f64.powi(r.random_range(-12..3));
            }
            w
        })
        .collect();
    let b = bias.then(|| [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)]);
    SoftmaxModel::from_parts(weights, b, "fp-test").unwrap()
}

fn random_vector(r: &mut ChaCha8Rng, dim: usize) -> FeatureVector {
    let n = r.random_range(0..=dim.min(12));
    FeatureVector::from_indices((0..n).map(|_| r.random_range(0..dim as u32)).collect())
}

#[test]
fn save_load_gives_bit_identical_probabilities() {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    let dir = tempfile::tempdir().unwrap();
    for (i, format) in [ModelFormat::Binary, ModelFormat::Text].into_iter().enumerate() {
        let model = random_model(&mut r, 300, i == 0);
        let path = dir.path().join(format!("m{i}"));
        save_model(&model, &path, format).unwrap();
        let back = load_model(&path, None).unwrap();
        assert_eq!(back, model);
        for _ in 0..100 {
            let v = random_vector(&mut r, 300);
            let (a, b) = (model.predict_proba(&v), back.predict_proba(&v));
            for c in 0..3 {
                assert_eq!(a.0[c].to_bits(), b.0[c].to_bits());
            }
        }
    }
}

#[test]
fn corrupted_model_files_are_rejected() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let model = random_model(&mut r, 20, true);
    let bin = model.to_binary();
    assert!(SoftmaxModel::from_bytes(&bin[..bin.len() - 1]).is_err());
    let mut flipped = bin.clone();
    flipped[0] ^= 1;
    assert!(SoftmaxModel::from_bytes(&flipped).is_err());
    let text = model.to_text();
    assert!(SoftmaxModel::from_bytes(&text.as_bytes()[..text.len() - 3]).is_err());
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-5;
    for _ in 0..20 {
        let dim = r.random_range(1..=50);
        let l2 = [0.0, 1e-3, 0.1][r.random_range(0..3)];
        let bias = r.random_bool(0.5);
        let mut model = random_model(&mut r, dim, bias);
        for w in model.weights_mut() {
            *w = r.random_range(-1.0..1.0);
        }
        let batch: Vec<(FeatureVector, Label)> = (0..r.random_range(1..=8))
            .map(|_| (random_vector(&mut r, dim), Label::ALL[r.random_range(0..3)]))
            .collect();
        let (_, grad) = model.loss_and_grad(&batch, l2);
        let mut num = vec![0.0; dim * 3];
        for (k, g) in num.iter_mut().enumerate() {
            let w0 = model.weights()[k];
            model.weights_mut()[k] = w0 + h;
            let up = model.loss_and_grad(&batch, l2).0;
            model.weights_mut()[k] = w0 - h;
            let down = model.loss_and_grad(&batch, l2).0;
            model.weights_mut()[k] = w0;
            *g = (up - down) / (2.0 * h);
        }
        let diff: f64 = grad.weights.iter().zip(&num).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = grad.weights.iter().map(|a| a * a).sum::<f64>().sqrt() + num.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(diff <= 1e-5 * norm.max(1e-8), "relative error {}", diff / norm);
    }
}

#[test]
fn training_is_seed_deterministic_and_learns_a_separable_task() {
    let vocab = Vocabulary::hashed(4, FeatureOptions::default()).unwrap();
    let data: Vec<(FeatureVector, Label)> =
        (0..90).map(|i| (FeatureVector::from_indices(vec![(i % 3) as u32, 5 + (i % 7) as u32]), Label::ALL[i % 3])).collect();
    let config = TrainConfig { epochs: 30, batch_size: 8, ..TrainConfig::default() };
    let (a, rep) = train_on(&data, &vocab, &config).unwrap();
    let (b, _) = train_on(&data, &vocab, &config).unwrap();
    assert_eq!(a.to_binary(), b.to_binary());
    assert!(rep.epoch_losses.last().unwrap() < &rep.epoch_losses[0]);
    assert!(data.iter().all(|(v, l)| a.predict(v) == *l));
    let (c, _) = train_on(&data, &vocab, &TrainConfig { seed: 43, ..config }).unwrap();
    assert_ne!(a.to_binary(), c.to_binary());
}
