//! Softmax regression over lexical indicator features.
//!
//! `p(c | x) = exp(w_c · v + b_c) / Σ_c' exp(w_c' · v + b_c')`, trained by
//! seeded mini-batch SGD on mean negative log-likelihood plus an L2 penalty
//! on the weights (biases are not penalized).

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::NliExample;
use crate::error::{Error, Result};
use crate::label::{Label, Probs};
use crate::lexfeat::{fingerprint_bytes, FeatureVector, Vocabulary};
use crate::rng;

pub const MODEL_MAGIC: &[u8; 8] = b"CSBOW\0\0\x01";
pub const MODEL_TEXT_MAGIC: &str = "#compsense-bow";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub l2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Initial step size.
    pub learning_rate: f64,
    /// Inverse-time decay: step `t` uses `learning_rate / (1 + lr_decay * t)`.
    pub lr_decay: f64,
    pub seed: u64,
    pub bias: bool,
    /// Examples held by the streaming shuffle buffer. Corpora no larger than
    /// this are shuffled uniformly.
    pub shuffle_buffer: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            l2: 1e-6,
            epochs: 3,
            batch_size: 256,
            learning_rate: 0.5,
            lr_decay: 1e-4,
            seed: 42,
            bias: true,
            shuffle_buffer: 1 << 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut errs = Vec::new();
        if self.epochs < 1 {
            errs.push("epochs must be >= 1".to_string());
        }
        if self.batch_size < 1 {
            errs.push("batch_size must be >= 1".to_string());
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            errs.push("l2 must be finite and >= 0".to_string());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            errs.push("learning_rate must be > 0".to_string());
        }
        if !(self.lr_decay >= 0.0 && self.lr_decay.is_finite()) {
            errs.push("lr_decay must be >= 0".to_string());
        }
        if self.shuffle_buffer < 1 {
            errs.push("shuffle_buffer must be >= 1".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel {
    dim: usize,
    /// Row-major `[dim][3]`, label order (E, C, N).
    weights: Vec<f64>,
    bias: [f64; 3],
    bias_enabled: bool,
    vocab_fingerprint: String,
    /// Free-form provenance (JSON of the training config).
    provenance: String,
}

/// Gradient with the same shape as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: [f64; 3],
}

pub(crate) fn softmax(logits: [f64; 3]) -> Probs {
    let m = logits[0].max(logits[1]).max(logits[2]);
    let e = [
        (logits[0] - m).exp(),
        (logits[1] - m).exp(),
        (logits[2] - m).exp(),
    ];
    let s = e[0] + e[1] + e[2];
    Probs([e[0] / s, e[1] / s, e[2] / s])
}

/// `-log softmax(logits)[gold]`, computed without overflow.
fn nll(logits: [f64; 3], gold: Label) -> f64 {
    let m = logits[0].max(logits[1]).max(logits[2]);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    lse - logits[gold.index()]
}

impl SoftmaxModel {
    pub fn zeros(dim: usize, bias_enabled: bool, vocab_fingerprint: impl Into<String>) -> Self {
        SoftmaxModel {
            dim,
            weights: vec![0.0; dim * 3],
            bias: [0.0; 3],
            bias_enabled,
            vocab_fingerprint: vocab_fingerprint.into(),
            provenance: String::new(),
        }
    }

    pub fn from_parts(
        weights: Vec<[f64; 3]>,
        bias: Option<[f64; 3]>,
        vocab_fingerprint: impl Into<String>,
    ) -> Result<Self> {
        let m = SoftmaxModel {
            dim: weights.len(),
            weights: weights.iter().flatten().copied().collect(),
            bias: bias.unwrap_or([0.0; 3]),
            bias_enabled: bias.is_some(),
            vocab_fingerprint: vocab_fingerprint.into(),
            provenance: String::new(),
        };
        if !m.is_finite() {
            return Err(Error::Invalid("model parameters must be finite".into()));
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weight(&self, index: usize, label: Label) -> f64 {
        self.weights[index * 3 + label.index()]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> [f64; 3] {
        self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64; 3] {
        &mut self.bias
    }

    pub fn bias_enabled(&self) -> bool {
        self.bias_enabled
    }

    pub fn vocab_fingerprint(&self) -> &str {
        &self.vocab_fingerprint
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn set_provenance(&mut self, p: impl Into<String>) {
        self.provenance = p.into();
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|w| w.is_finite())
    }

    /// Fingerprint of the model's canonical binary serialization.
    pub fn fingerprint(&self) -> String {
        fingerprint_bytes(&self.to_binary())
    }

    /// Errors unless the model was trained on `vocab`.
    pub fn check_vocab(&self, vocab: &Vocabulary) -> Result<()> {
        if self.vocab_fingerprint != vocab.fingerprint() || self.dim != vocab.dim() {
            return Err(Error::Fingerprint {
                expected: self.vocab_fingerprint.clone(),
                found: vocab.fingerprint().to_string(),
            });
        }
        Ok(())
    }

    pub fn logits(&self, v: &FeatureVector) -> [f64; 3] {
        let mut z = if self.bias_enabled { self.bias } else { [0.0; 3] };
        for &i in v.indices() {
            let i = i as usize;
            assert!(i < self.dim, "feature index {i} outside model dimension {}", self.dim);
            let w = &self.weights[i * 3..i * 3 + 3];
            z[0] += w[0];
            z[1] += w[1];
            z[2] += w[2];
        }
        z
    }

    pub fn predict_proba(&self, v: &FeatureVector) -> Probs {
        softmax(self.logits(v))
    }

    /// Argmax label, ties broken by (E, C, N) order.
    pub fn predict(&self, v: &FeatureVector) -> Label {
        self.predict_proba(v).argmax()
    }

    /// Mean NLL over `batch` plus `(l2/2)·‖w‖²`, and its exact gradient.
    pub fn loss_and_grad(&self, batch: &[(FeatureVector, Label)], l2: f64) -> (f64, Gradient) {
        assert!(!batch.is_empty(), "loss_and_grad needs a nonempty batch");
        let n = batch.len() as f64;
        let mut grad = Gradient {
            weights: self.weights.iter().map(|w| l2 * w).collect(),
            bias: [0.0; 3],
        };
        let mut loss = 0.0;
        for (v, gold) in batch {
            let z = self.logits(v);
            loss += nll(z, *gold);
            let p = softmax(z);
            for c in 0..3 {
                let d = (p.0[c] - if c == gold.index() { 1.0 } else { 0.0 }) / n;
                for &i in v.indices() {
                    grad.weights[i as usize * 3 + c] += d;
                }
                if self.bias_enabled {
                    grad.bias[c] += d;
                }
            }
        }
        let sq: f64 = self.weights.iter().map(|w| w * w).sum();
        (loss / n + 0.5 * l2 * sq, grad)
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.weights.len() * 8);
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u64).to_le_bytes());
        out.push(self.bias_enabled as u8);
        for s in [&self.vocab_fingerprint, &self.provenance] {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        for b in self.bias {
            out.extend_from_slice(&b.to_le_bytes());
        }
        for w in &self.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(32 * self.dim + 256);
        s.push_str(&format!("{MODEL_TEXT_MAGIC}\t{MODEL_VERSION}\n"));
        s.push_str(&format!("d\t{}\n", self.dim));
        s.push_str(&format!("bias_enabled\t{}\n", self.bias_enabled));
        s.push_str(&format!("vocab_fingerprint\t{}\n", self.vocab_fingerprint));
        s.push_str(&format!("provenance\t{}\n", self.provenance.replace('\n', " ")));
        s.push_str(&format!("bias\t{}\t{}\t{}\n", self.bias[0], self.bias[1], self.bias[2]));
        for w in self.weights.chunks_exact(3) {
            s.push_str(&format!("{}\t{}\t{}\n", w[0], w[1], w[2]));
        }
        s
    }

    /// Parses either serialization, detected from the leading magic.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let m = if bytes.starts_with(&MODEL_MAGIC[..5]) {
            Self::from_binary(bytes)?
        } else if bytes.starts_with(MODEL_TEXT_MAGIC.as_bytes()) {
            Self::from_text(bytes)?
        } else {
            return Err(Error::Invalid("not a model file".into()));
        };
        if !m.is_finite() {
            return Err(Error::Invalid("model contains non-finite parameters".into()));
        }
        Ok(m)
    }

    fn from_binary(bytes: &[u8]) -> Result<Self> {
        let truncated = || Error::Invalid("truncated model file".into());
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + n).ok_or_else(truncated)?;
            pos += n;
            Ok(s)
        };
        if take(8)? != MODEL_MAGIC {
            return Err(Error::Invalid("bad model magic".into()));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != MODEL_VERSION {
            return Err(Error::Version {
                expected: MODEL_VERSION,
                found: version,
            });
        }
        let dim = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let bias_enabled = take(1)?[0] != 0;
        let mut strings = Vec::with_capacity(2);
        for _ in 0..2 {
            let len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            let s = std::str::from_utf8(take(len)?)
                .map_err(|_| Error::Invalid("model header is not UTF-8".into()))?;
            strings.push(s.to_string());
        }
        let mut f = || -> Result<f64> { Ok(f64::from_le_bytes(take(8)?.try_into().unwrap())) };
        let bias = [f()?, f()?, f()?];
        let expected = dim.checked_mul(24).ok_or_else(truncated)?;
        if bytes.len() - pos != expected {
            return Err(truncated());
        }
        let weights = bytes[pos..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let provenance = strings.pop().unwrap();
        let vocab_fingerprint = strings.pop().unwrap();
        Ok(SoftmaxModel {
            dim,
            weights,
            bias,
            bias_enabled,
            vocab_fingerprint,
            provenance,
        })
    }

    fn from_text(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|_| Error::Invalid("model is not UTF-8".into()))?;
        if !text.ends_with('\n') {
            return Err(Error::Invalid("truncated model file".into()));
        }
        let mut lines = text.split_terminator('\n');
        let mut field = |name: &str| -> Result<String> {
            match lines.next().and_then(|l| l.split_once('\t')) {
                Some((k, v)) if k == name => Ok(v.to_string()),
                _ => Err(Error::Invalid(format!("missing model header field {name}"))),
            }
        };
        let version: u32 = field(MODEL_TEXT_MAGIC)?
            .parse()
            .map_err(|_| Error::Invalid("bad model version".into()))?;
        if version != MODEL_VERSION {
            return Err(Error::Version {
                expected: MODEL_VERSION,
                found: version,
            });
        }
        let bad = |f: &str| Error::Invalid(format!("bad model field {f}"));
        let dim: usize = field("d")?.parse().map_err(|_| bad("d"))?;
        let bias_enabled: bool = field("bias_enabled")?.parse().map_err(|_| bad("bias_enabled"))?;
        let vocab_fingerprint = field("vocab_fingerprint")?;
        let provenance = field("provenance")?;
        let triple = |s: &str| -> Result<[f64; 3]> {
            let v: Vec<f64> = s
                .split('\t')
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("weights"))?;
            v.try_into().map_err(|_| bad("weights"))
        };
        let bias = triple(&field("bias")?)?;
        let mut weights = Vec::with_capacity(dim * 3);
        for line in lines {
            weights.extend_from_slice(&triple(line)?);
        }
        if weights.len() != dim * 3 {
            return Err(Error::Invalid("truncated model file".into()));
        }
        Ok(SoftmaxModel {
            dim,
            weights,
            bias,
            bias_enabled,
            vocab_fingerprint,
            provenance,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelFormat {
    #[default]
    Binary,
    Text,
}

pub fn save_model(model: &SoftmaxModel, path: impl AsRef<Path>, format: ModelFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        ModelFormat::Binary => model.to_binary(),
        ModelFormat::Text => model.to_text().into_bytes(),
    };
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Loads a model; when `vocab` is given the fingerprints must agree.
pub fn load_model(path: impl AsRef<Path>, vocab: Option<&Vocabulary>) -> Result<SoftmaxModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let m = SoftmaxModel::from_bytes(&bytes)?;
    if let Some(v) = vocab {
        m.check_vocab(v)?;
    }
    Ok(m)
}

/// A model bound to the vocabulary it was trained on.
#[derive(Debug, Clone, Copy)]
pub struct Scorer<'a> {
    pub model: &'a SoftmaxModel,
    pub vocab: &'a Vocabulary,
}

impl<'a> Scorer<'a> {
    pub fn new(model: &'a SoftmaxModel, vocab: &'a Vocabulary) -> Result<Self> {
        model.check_vocab(vocab)?;
        Ok(Scorer { model, vocab })
    }

    pub fn predict_proba(&self, example: &NliExample) -> Probs {
        self.model.predict_proba(&self.vocab.featurize(example))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainReport {
    /// Mean batch NLL over each epoch plus the L2 penalty at epoch end.
    pub epoch_losses: Vec<f64>,
    pub examples_per_epoch: usize,
    pub steps: u64,
}

/// Streaming shuffle: a bounded buffer that emits a uniformly chosen
/// resident item for every new arrival, then drains in shuffled order.
struct ShuffleBuffer<I, R> {
    inner: I,
    buf: Vec<(FeatureVector, Label)>,
    cap: usize,
    rng: R,
    draining: bool,
}

impl<I, R> Iterator for ShuffleBuffer<I, R>
where
    I: Iterator<Item = Result<(FeatureVector, Label)>>,
    R: rand_core::RngCore,
{
    type Item = Result<(FeatureVector, Label)>;

    fn next(&mut self) -> Option<Self::Item> {
        if !self.draining {
            loop {
                match self.inner.next() {
                    Some(Ok(item)) => {
                        if self.buf.len() < self.cap {
                            self.buf.push(item);
                            continue;
                        }
                        let j = rng::below(&mut self.rng, self.cap as u64) as usize;
                        return Some(Ok(std::mem::replace(&mut self.buf[j], item)));
                    }
                    Some(Err(e)) => return Some(Err(e)),
                    None => {
                        self.draining = true;
                        rng::shuffle(&mut self.rng, &mut self.buf);
                        break;
                    }
                }
            }
        }
        self.buf.pop().map(Ok)
    }
}

/// Parameters stored as `scale · u` so the L2 shrinkage is O(1) per step.
struct ScaledWeights {
    u: Vec<f64>,
    scale: f64,
}

impl ScaledWeights {
    fn renormalize(&mut self) {
        for w in &mut self.u {
            *w *= self.scale;
        }
        self.scale = 1.0;
    }
}

/// Trains a model. `data` is called once per epoch and must yield the same
/// sequence each time; the visiting order is shuffled per epoch from
/// `config.seed`. Undetermined-gold examples must already be filtered out.
///
/// Each step applies `w ← (w − η·∇NLL) / (1 + η·l2)`, the proximal form of the
/// L2 step, which stays stable for any `l2`.
pub fn train<F, I>(mut data: F, vocab: &Vocabulary, config: &TrainConfig) -> Result<(SoftmaxModel, TrainReport)>
where
    F: FnMut() -> Result<I>,
    I: IntoIterator<Item = Result<(FeatureVector, Label)>>,
{
    config.validate().map_err(Error::Config)?;
    let dim = vocab.dim();
    let mut w = ScaledWeights {
        u: vec![0.0; dim * 3],
        scale: 1.0,
    };
    let mut bias = [0.0f64; 3];
    let mut report = TrainReport::default();
    let mut step: u64 = 0;
    let mut batch: Vec<(FeatureVector, Label)> = Vec::with_capacity(config.batch_size);
    let mut acc: HashMap<u32, [f64; 3]> = HashMap::new();

    for epoch in 0..config.epochs {
        let stream = ShuffleBuffer {
            inner: data()?.into_iter(),
            buf: Vec::new(),
            cap: config.shuffle_buffer,
            rng: rng::stream(config.seed, &[b"train-epoch", &(epoch as u64).to_le_bytes()]),
            draining: false,
        };
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        let mut seen = 0usize;
        let mut stream = stream.peekable();
        while stream.peek().is_some() {
            batch.clear();
            while batch.len() < config.batch_size {
                match stream.next() {
                    Some(item) => batch.push(item?),
                    None => break,
                }
            }
            if batch.is_empty() {
                break;
            }
            seen += batch.len();
            let n = batch.len() as f64;
            let mut batch_loss = 0.0;
            acc.clear();
            let mut gbias = [0.0f64; 3];
            for (v, gold) in &batch {
                let mut z = if config.bias { bias } else { [0.0; 3] };
                for &i in v.indices() {
                    let r = &w.u[i as usize * 3..i as usize * 3 + 3];
                    for c in 0..3 {
                        z[c] += w.scale * r[c];
                    }
                }
                batch_loss += nll(z, *gold);
                let p = softmax(z);
                let mut d = [0.0; 3];
                for c in 0..3 {
                    d[c] = (p.0[c] - if c == gold.index() { 1.0 } else { 0.0 }) / n;
                    gbias[c] += d[c];
                }
                for &i in v.indices() {
                    let e = acc.entry(i).or_insert([0.0; 3]);
                    for c in 0..3 {
                        e[c] += d[c];
                    }
                }
            }
            batch_loss /= n;
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    epoch: epoch + 1,
                    batch: batches + 1,
                });
            }
            loss_sum += batch_loss;
            batches += 1;

            let lr = config.learning_rate / (1.0 + config.lr_decay * step as f64);
            let old_scale = w.scale;
            for (&i, g) in &acc {
                let r = &mut w.u[i as usize * 3..i as usize * 3 + 3];
                for c in 0..3 {
                    r[c] -= lr * g[c] / old_scale;
                }
            }
            w.scale = old_scale / (1.0 + lr * config.l2);
            if w.scale < 1e-30 {
                w.renormalize();
            }
            if config.bias {
                for c in 0..3 {
                    bias[c] -= lr * gbias[c];
                }
            }
            step += 1;
        }
        let sq: f64 = w.u.iter().map(|x| (w.scale * x) * (w.scale * x)).sum();
        let epoch_loss = if batches > 0 { loss_sum / batches as f64 } else { 0.0 } + 0.5 * config.l2 * sq;
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged {
                epoch: epoch + 1,
                batch: batches,
            });
        }
        log::info!("epoch {}: loss {epoch_loss:.6} over {seen} examples", epoch + 1);
        report.epoch_losses.push(epoch_loss);
        report.examples_per_epoch = seen;
    }
    report.steps = step;
    w.renormalize();
    let model = SoftmaxModel {
        dim,
        weights: w.u,
        bias: if config.bias { bias } else { [0.0; 3] },
        bias_enabled: config.bias,
        vocab_fingerprint: vocab.fingerprint().to_string(),
        provenance: serde_json::to_string(config)?,
    };
    if !model.is_finite() {
        return Err(Error::Diverged {
            epoch: config.epochs,
            batch: 0,
        });
    }
    Ok((model, report))
}

/// Convenience wrapper over an in-memory training set.
pub fn train_on(
    data: &[(FeatureVector, Label)],
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<(SoftmaxModel, TrainReport)> {
    train(|| Ok(data.iter().cloned().map(Ok)), vocab, config)
}
