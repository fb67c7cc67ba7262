//! Word-based CNN: width-2 convolution over the embedding matrix, ReLU,
//! max pooling over the whole text, and a fully connected output layer.
//!
//! Shapes: the input is `D x N` (one column per word), the convolution has
//! `F` filters each spanning `D x 2`, pooling yields `F` values and the
//! output layer scores `C` classes. Scores are pre-softmax logits.

use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddedDoc;
use crate::error::{Error, Result};

/// Number of consecutive words covered by one convolution window.
pub const WINDOW: usize = 2;
pub const DEFAULT_FILTERS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// Embedding dimension.
    pub embedding: usize,
    pub filters: usize,
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    /// `(F, D, 2)`: filter, embedding row, window offset.
    pub conv_weights: Array3<f64>,
    pub conv_bias: Array1<f64>,
    /// `(C, F)`.
    pub fc_weights: Array2<f64>,
    pub fc_bias: Array1<f64>,
}

/// Everything the forward pass computed, kept for the relevance backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub input: Array2<f64>,
    /// Convolution pre-activations, `F x (N-1)`.
    pub conv_pre: Array2<f64>,
    /// ReLU outputs, same shape as `conv_pre`.
    pub activations: Array2<f64>,
    pub pooled: Array1<f64>,
    /// Winning position per filter (lowest index on ties).
    pub argmax: Vec<usize>,
    pub scores: Array1<f64>,
}

impl ForwardTrace {
    pub fn positions(&self) -> usize {
        self.conv_pre.ncols()
    }
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> impl FnMut() -> f64 + '_ {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    move || rng.gen_range(-limit..=limit)
}

/// Index of the first maximum.
pub(crate) fn first_argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut idx = 0;
    for (i, v) in values.into_iter().enumerate() {
        if v > best {
            best = v;
            idx = i;
        }
    }
    idx
}

impl Model {
    pub fn new(
        conv_weights: Array3<f64>,
        conv_bias: Array1<f64>,
        fc_weights: Array2<f64>,
        fc_bias: Array1<f64>,
    ) -> Result<Self> {
        let (filters, embedding, window) = conv_weights.dim();
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidModel(what.to_owned()))
            }
        };
        check(window == WINDOW, "convolution window must be 2 words")?;
        check(filters >= 1, "at least one filter is required")?;
        check(embedding >= 1, "embedding dimension must be positive")?;
        check(conv_bias.len() == filters, "conv bias length differs from filter count")?;
        check(fc_weights.ncols() == filters, "fc weights columns differ from filter count")?;
        check(fc_weights.nrows() >= 2, "at least two classes are required")?;
        check(fc_bias.len() == fc_weights.nrows(), "fc bias length differs from class count")?;
        Ok(Model { conv_weights, conv_bias, fc_weights, fc_bias })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(dims: Dims, seed: u64) -> Result<Self> {
        let Dims { embedding, filters, classes } = dims;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let conv_weights = {
            let mut draw = glorot(&mut rng, WINDOW * embedding, filters);
            Array3::from_shape_simple_fn((filters, embedding, WINDOW), &mut draw)
        };
        let fc_weights = {
            let mut draw = glorot(&mut rng, filters, classes);
            Array2::from_shape_simple_fn((classes, filters), &mut draw)
        };
        Model::new(conv_weights, Array1::zeros(filters), fc_weights, Array1::zeros(classes))
    }

    pub fn dims(&self) -> Dims {
        Dims {
            embedding: self.conv_weights.dim().1,
            filters: self.conv_weights.dim().0,
            classes: self.fc_weights.nrows(),
        }
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        let d = self.dims().embedding;
        if x.nrows() != d {
            return Err(Error::DimMismatch { expected: d, found: x.nrows() });
        }
        if x.ncols() < WINDOW {
            return Err(Error::TooShort { id: String::new(), found: x.ncols() });
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<ForwardTrace> {
        self.check_input(&x)?;
        let n = x.ncols();
        let left: ArrayView2<f64> = self.conv_weights.slice(s![.., .., 0]);
        let right: ArrayView2<f64> = self.conv_weights.slice(s![.., .., 1]);
        let head: ArrayView2<f64> = x.slice(s![.., ..n - 1]);
        let tail: ArrayView2<f64> = x.slice(s![.., 1..]);
        let mut conv_pre = left.dot(&head) + right.dot(&tail);
        conv_pre += &self.conv_bias.view().insert_axis(Axis(1));
        let activations = conv_pre.mapv(|z| z.max(0.0));

        let argmax: Vec<usize> = activations.outer_iter().map(|row| first_argmax(row.iter().copied())).collect();
        let pooled = Array1::from_iter(argmax.iter().enumerate().map(|(f, &t)| activations[[f, t]]));
        let scores = self.fc_weights.dot(&pooled) + &self.fc_bias;
        Ok(ForwardTrace { input: x.to_owned(), conv_pre, activations, pooled, argmax, scores })
    }

    /// Predicted class (lowest index on ties) and the raw scores.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<(usize, Array1<f64>)> {
        let trace = self.forward(x)?;
        Ok((first_argmax(trace.scores.iter().copied()), trace.scores))
    }

    /// Exact gradient of the class-`target` score with respect to the input.
    /// ReLU kinks get subgradient 0; pooling routes only to the recorded winner.
    pub fn input_gradient(&self, x: ArrayView2<f64>, target: usize) -> Result<Array2<f64>> {
        let trace = self.forward(x)?;
        self.input_gradient_from_trace(&trace, target)
    }

    pub fn input_gradient_from_trace(&self, trace: &ForwardTrace, target: usize) -> Result<Array2<f64>> {
        let classes = self.dims().classes;
        if target >= classes {
            return Err(Error::UnknownClass(target.to_string()));
        }
        let mut grad = Array2::zeros(trace.input.raw_dim());
        for (f, &t) in trace.argmax.iter().enumerate() {
            if trace.conv_pre[[f, t]] <= 0.0 {
                continue;
            }
            let upstream = self.fc_weights[[target, f]];
            for k in 0..WINDOW {
                let mut column = grad.column_mut(t + k);
                column.scaled_add(upstream, &self.conv_weights.slice(s![f, .., k]));
            }
        }
        Ok(grad)
    }

    pub fn accuracy(&self, docs: &[EmbeddedDoc]) -> Result<f64> {
        if docs.is_empty() {
            return Ok(0.0);
        }
        let correct = docs
            .par_iter()
            .map(|d| self.predict(d.matrix.view()).map(|(c, _)| (c == d.label_index) as usize))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .sum::<usize>();
        Ok(correct as f64 / docs.len() as f64)
    }

    fn squared_weight_norm(&self) -> f64 {
        self.conv_weights.iter().chain(self.fc_weights.iter()).map(|w| w * w).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub momentum: f64,
    /// Coefficient of the squared-weight penalty (biases excluded).
    pub l2: f64,
    /// Drop probability on the pooled vector, training only.
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams { learning_rate: 0.01, momentum: 0.9, l2: 1e-4, dropout: 0.5, batch_size: 32, epochs: 20, seed: 0 }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidHyperparams(m.to_owned()));
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return fail("learning_rate must be a finite non-negative number");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail("dropout must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail("momentum must lie in [0, 1)");
        }
        if self.l2.is_nan() || self.l2 < 0.0 {
            return fail("l2 must be non-negative");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch plus the l2 penalty at epoch end.
    pub loss: f64,
    /// Training accuracy measured with dropout active.
    pub accuracy: f64,
}

/// Parameter-shaped buffer for gradients and momentum.
#[derive(Debug, Clone)]
struct ParamBuffer {
    conv_weights: Array3<f64>,
    conv_bias: Array1<f64>,
    fc_weights: Array2<f64>,
    fc_bias: Array1<f64>,
}

impl ParamBuffer {
    fn zeros(dims: Dims) -> Self {
        ParamBuffer {
            conv_weights: Array3::zeros((dims.filters, dims.embedding, WINDOW)),
            conv_bias: Array1::zeros(dims.filters),
            fc_weights: Array2::zeros((dims.classes, dims.filters)),
            fc_bias: Array1::zeros(dims.classes),
        }
    }
}

/// Per-document backprop result. Convolution gradients are sparse: only the
/// pooling winner of each filter receives signal.
struct DocGradient {
    loss: f64,
    correct: bool,
    d_scores: Array1<f64>,
    dropped_pooled: Array1<f64>,
    conv: Vec<(usize, usize, f64)>,
}

fn log_softmax_at(scores: &Array1<f64>, index: usize) -> (f64, Array1<f64>) {
    let max = scores.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exp = scores.mapv(|v| (v - max).exp());
    let total = exp.sum();
    let probs = exp / total;
    (scores[index] - max - total.ln(), probs)
}

/// Mini-batch SGD with momentum, l2 penalty and inverted dropout.
#[derive(Debug)]
pub struct Trainer {
    model: Model,
    velocity: ParamBuffer,
    hp: Hyperparams,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(model: Model, hp: Hyperparams) -> Result<Self> {
        hp.validate()?;
        let velocity = ParamBuffer::zeros(model.dims());
        Ok(Trainer { model, velocity, hp, rng: ChaCha8Rng::seed_from_u64(hp.seed) })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    fn doc_gradient(&self, doc: &EmbeddedDoc, mask: &Array1<f64>) -> Result<DocGradient> {
        let model = &self.model;
        if doc.label_index >= model.dims().classes {
            return Err(Error::UnknownLabel(doc.label_index.to_string()));
        }
        let trace = model.forward(doc.matrix.view())?;
        let dropped_pooled = &trace.pooled * mask;
        let scores = model.fc_weights.dot(&dropped_pooled) + &model.fc_bias;
        let (log_p, mut d_scores) = log_softmax_at(&scores, doc.label_index);
        let correct = first_argmax(scores.iter().copied()) == doc.label_index;
        d_scores[doc.label_index] -= 1.0;

        let d_pooled = model.fc_weights.t().dot(&d_scores) * mask;
        let conv = trace
            .argmax
            .iter()
            .enumerate()
            .filter(|&(f, &t)| trace.conv_pre[[f, t]] > 0.0 && d_pooled[f] != 0.0)
            .map(|(f, &t)| (f, t, d_pooled[f]))
            .collect();
        Ok(DocGradient { loss: -log_p, correct, d_scores, dropped_pooled, conv })
    }

    /// One parameter update on `batch`. An empty batch applies only the l2
    /// penalty. Returns (summed loss, correct count) over the batch.
    pub fn step(&mut self, batch: &[&EmbeddedDoc]) -> Result<(f64, usize)> {
        let dims = self.model.dims();
        let keep = 1.0 - self.hp.dropout;
        let masks: Vec<Array1<f64>> = batch
            .iter()
            .map(|_| {
                Array1::from_shape_fn(dims.filters, |_| {
                    if self.hp.dropout == 0.0 || self.rng.gen::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                })
            })
            .collect();

        let per_doc: Vec<DocGradient> = batch
            .par_iter()
            .zip(masks.par_iter())
            .map(|(doc, mask)| self.doc_gradient(doc, mask))
            .collect::<Result<_>>()?;

        // fixed-order reduction keeps training bit-reproducible
        let mut grad = ParamBuffer::zeros(dims);
        let mut loss = 0.0;
        let mut correct = 0;
        for (doc, g) in batch.iter().zip(&per_doc) {
            loss += g.loss;
            correct += g.correct as usize;
            for c in 0..dims.classes {
                grad.fc_weights.row_mut(c).scaled_add(g.d_scores[c], &g.dropped_pooled);
            }
            grad.fc_bias += &g.d_scores;
            for &(f, t, upstream) in &g.conv {
                grad.conv_bias[f] += upstream;
                for k in 0..WINDOW {
                    grad.conv_weights.slice_mut(s![f, .., k]).scaled_add(upstream, &doc.matrix.column(t + k));
                }
            }
        }
        if !batch.is_empty() {
            let scale = 1.0 / batch.len() as f64;
            grad.conv_weights *= scale;
            grad.conv_bias *= scale;
            grad.fc_weights *= scale;
            grad.fc_bias *= scale;
        }
        grad.conv_weights.scaled_add(2.0 * self.hp.l2, &self.model.conv_weights);
        grad.fc_weights.scaled_add(2.0 * self.hp.l2, &self.model.fc_weights);

        let (lr, mu) = (self.hp.learning_rate, self.hp.momentum);
        let v = &mut self.velocity;
        let m = &mut self.model;
        v.conv_weights.zip_mut_with(&grad.conv_weights, |v, g| *v = mu * *v - lr * g);
        v.conv_bias.zip_mut_with(&grad.conv_bias, |v, g| *v = mu * *v - lr * g);
        v.fc_weights.zip_mut_with(&grad.fc_weights, |v, g| *v = mu * *v - lr * g);
        v.fc_bias.zip_mut_with(&grad.fc_bias, |v, g| *v = mu * *v - lr * g);
        m.conv_weights += &v.conv_weights;
        m.conv_bias += &v.conv_bias;
        m.fc_weights += &v.fc_weights;
        m.fc_bias += &v.fc_bias;
        Ok((loss, correct))
    }

    /// One shuffled pass over `docs`.
    pub fn epoch(&mut self, docs: &[EmbeddedDoc], epoch: usize) -> Result<EpochStats> {
        let mut order: Vec<usize> = (0..docs.len()).collect();
        order.shuffle(&mut self.rng);
        let mut loss = 0.0;
        let mut correct = 0;
        for chunk in order.chunks(self.hp.batch_size) {
            let batch: Vec<&EmbeddedDoc> = chunk.iter().map(|&i| &docs[i]).collect();
            let (l, c) = self.step(&batch)?;
            loss += l;
            correct += c;
        }
        let n = docs.len().max(1) as f64;
        Ok(EpochStats {
            epoch,
            loss: loss / n + self.hp.l2 * self.model.squared_weight_norm(),
            accuracy: correct as f64 / n,
        })
    }
}

/// Trains from `init` on the encoded documents; embeddings are never touched.
pub fn train(init: Model, docs: &[EmbeddedDoc], hp: &Hyperparams) -> Result<(Model, Vec<EpochStats>)> {
    if docs.is_empty() {
        return Err(Error::NoEncodableDocuments);
    }
    let mut trainer = Trainer::new(init, *hp)?;
    let mut history = Vec::with_capacity(hp.epochs);
    for epoch in 0..hp.epochs {
        let stats = trainer.epoch(docs, epoch)?;
        log::info!("epoch {:>3}  loss {:.5}  train acc {:.4}", epoch + 1, stats.loss, stats.accuracy);
        history.push(stats);
    }
    Ok((trainer.into_model(), history))
}
