//! Small differentiable models and the loss/gradient entry points shared by
//! every experiment.

mod mlp;
mod quadratic;
mod rnn;

use std::sync::Arc;

pub use mlp::{build_mlp, Activation, MlpModel};
pub use quadratic::QuadraticModel;
pub use rnn::RnnLmModel;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Array, Tape, Var};
use crate::data::{Batch, Dataset};
use crate::error::{Error, Result};
use crate::params::{Layout, ParamVector};
use crate::scalar::Scalar;

/// How a model's evaluation metric is reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    /// Fraction of correct argmax predictions; higher is better.
    Accuracy,
    /// `exp(mean cross-entropy)`; lower is better.
    Perplexity,
    /// The loss itself; lower is better.
    Loss,
}

impl MetricKind {
    pub fn higher_is_better(self) -> bool {
        matches!(self, MetricKind::Accuracy)
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Accuracy => "accuracy",
            MetricKind::Perplexity => "perplexity",
            MetricKind::Loss => "loss",
        }
    }
}

/// Nodes produced by [`Model::record`].
pub struct Recorded {
    /// Scalar mean loss over the batch.
    pub loss: Var,
    /// `[b, classes]` logits when the metric is accuracy.
    pub logits: Option<Var>,
}

pub trait Model<S: Scalar>: Send + Sync {
    fn layout(&self) -> &Arc<Layout>;

    /// Identifies architecture and sizes; checkpoints must match it exactly.
    fn descriptor(&self) -> String;

    fn metric(&self) -> MetricKind;

    /// Records the mean-loss graph for `batch` given one param node per layout segment.
    fn record(&self, tape: &mut Tape<S>, params: &[Var], batch: &Batch<S>) -> Result<Recorded>;

    /// Uniform `±1/sqrt(fan_in)` initialization, where fan-in is a segment's leading dimension
    /// (biases use their layer's fan-in).
    fn init_params(&self, seed: u64) -> ParamVector<S> {
        let layout = self.layout().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::with_capacity(layout.total());
        for seg in layout.segments() {
            let bound = 1.0 / (self.fan_in(&seg.name, &seg.shape) as f64).sqrt();
            for _ in 0..seg.len() {
                data.push(S::c(rng.gen_range(-bound..=bound)));
            }
        }
        ParamVector::from_vec(layout, data).expect("layout total")
    }

    fn fan_in(&self, _segment: &str, shape: &[usize]) -> usize {
        shape[0]
    }
}

/// A recorded, evaluated loss ready for a reverse pass.
pub struct LossEval<S: Scalar> {
    pub value: S,
    pub tape: Tape<S>,
    params: Vec<Var>,
    logits: Option<Var>,
    layout: Arc<Layout>,
}

impl<S: Scalar> LossEval<S> {
    /// `∇_w` of the loss, laid out like the parameters.
    pub fn gradient(&self) -> Result<ParamVector<S>> {
        let grads = self.tape.backward()?;
        let mut flat = Vec::with_capacity(self.layout.total());
        for (seg, &v) in self.layout.segments().iter().zip(&self.params) {
            flat.extend_from_slice(grads.get_or_zeros(v, &seg.shape).data());
        }
        ParamVector::from_vec(self.layout.clone(), flat)
    }

    pub fn logits(&self) -> Option<&Array<S>> {
        self.logits.and_then(|v| self.tape.value(v))
    }
}

/// Mean loss of `batch` at `params`.
pub fn loss<S: Scalar, M: Model<S> + ?Sized>(model: &M, params: &ParamVector<S>, batch: &Batch<S>) -> Result<LossEval<S>> {
    let layout = model.layout();
    if params.layout().as_ref() != layout.as_ref() {
        return Err(Error::arg("parameters do not match the model layout"));
    }
    let mut tape = Tape::new();
    let vars: Vec<Var> = layout
        .segments()
        .iter()
        .map(|seg| tape.param(params.segment_array(seg)))
        .collect();
    let rec = model.record(&mut tape, &vars, batch)?;
    tape.forward(&[])?;
    let value = tape
        .value(rec.loss)
        .and_then(|a| a.item())
        .ok_or_else(|| Error::State("model loss node is not a scalar".into()))?;
    Ok(LossEval {
        value,
        tape,
        params: vars,
        logits: rec.logits,
        layout: layout.clone(),
    })
}

/// Loss at `params + corruption`; the corruption is a constant, so the
/// gradient is `∇_w L(w + a)`. `params` is never modified.
pub fn perturbed_loss<S: Scalar, M: Model<S> + ?Sized>(
    model: &M,
    params: &ParamVector<S>,
    corruption: &ParamVector<S>,
    batch: &Batch<S>,
) -> Result<LossEval<S>> {
    let shifted = params.add(corruption)?;
    loss(model, &shifted, batch)
}

pub fn loss_and_grad<S: Scalar, M: Model<S> + ?Sized>(
    model: &M,
    params: &ParamVector<S>,
    batch: &Batch<S>,
) -> Result<(S, ParamVector<S>)> {
    let ev = loss(model, params, batch)?;
    Ok((ev.value, ev.gradient()?))
}

/// `∇ℓ(θ; z)` for every instance `z` of the batch.
pub fn per_sample_gradients<S: Scalar, M: Model<S> + ?Sized>(
    model: &M,
    params: &ParamVector<S>,
    batch: &Batch<S>,
) -> Result<Vec<ParamVector<S>>> {
    if batch.is_empty() {
        return Err(Error::arg("per-sample gradients of an empty batch"));
    }
    (0..batch.len())
        .map(|i| loss_and_grad(model, params, &batch.instance(i)).map(|(_, g)| g))
        .collect()
}

/// Loss and gradient over a whole dataset, evaluated in chunks and weighted by chunk size.
pub fn dataset_loss_and_grad<S: Scalar, M: Model<S> + ?Sized>(
    model: &M,
    params: &ParamVector<S>,
    dataset: &Dataset,
    chunk: usize,
) -> Result<(S, ParamVector<S>)> {
    if dataset.is_empty() {
        return Err(Error::arg("empty dataset"));
    }
    let n = S::from_usize_lossy(dataset.len());
    let mut total = S::zero();
    let mut grad = vec![S::zero(); params.len()];
    for idx in dataset.chunks(chunk) {
        let w = S::from_usize_lossy(idx.len()) / n;
        let (l, g) = loss_and_grad(model, params, &dataset.batch(&idx))?;
        total += l * w;
        for (a, &b) in grad.iter_mut().zip(g.as_slice()) {
            *a += b * w;
        }
    }
    Ok((total, ParamVector::from_vec(params.layout().clone(), grad)?))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub metric: f64,
}

/// Mean loss and task metric over `dataset`.
pub fn evaluate<S: Scalar, M: Model<S> + ?Sized>(
    model: &M,
    params: &ParamVector<S>,
    dataset: &Dataset,
    chunk: usize,
) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(Error::arg("empty dataset"));
    }
    let mut total = 0.0;
    let mut correct = 0usize;
    for idx in dataset.chunks(chunk) {
        let batch = dataset.batch::<S>(&idx);
        let ev = loss(model, params, &batch)?;
        total += ev.value.as_f64() * idx.len() as f64;
        if let (Some(logits), Batch::Dense { labels, .. }) = (ev.logits(), &batch) {
            let c = logits.shape()[1];
            for (row, &y) in logits.data().chunks(c).zip(labels) {
                if argmax(row) == y {
                    correct += 1;
                }
            }
        }
    }
    let loss = total / dataset.len() as f64;
    let metric = match model.metric() {
        MetricKind::Accuracy => correct as f64 / dataset.len() as f64,
        MetricKind::Perplexity => loss.exp(),
        MetricKind::Loss => loss,
    };
    Ok(Evaluation { loss, metric })
}

fn argmax<S: Scalar>(row: &[S]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Wraps a model and counts forward passes (each loss evaluation records once
/// and is followed by at most one reverse pass).
pub struct Counted<M> {
    inner: M,
    passes: std::sync::atomic::AtomicUsize,
}

impl<M> Counted<M> {
    pub fn new(inner: M) -> Self {
        Counted {
            inner,
            passes: std::sync::atomic::AtomicUsize::new(0),
        }
    }

    pub fn passes(&self) -> usize {
        self.passes.load(std::sync::atomic::Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.passes.store(0, std::sync::atomic::Ordering::SeqCst);
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<S: Scalar, M: Model<S>> Model<S> for Counted<M> {
    fn layout(&self) -> &Arc<Layout> {
        self.inner.layout()
    }

    fn descriptor(&self) -> String {
        self.inner.descriptor()
    }

    fn metric(&self) -> MetricKind {
        self.inner.metric()
    }

    fn record(&self, tape: &mut Tape<S>, params: &[Var], batch: &Batch<S>) -> Result<Recorded> {
        self.passes.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        self.inner.record(tape, params, batch)
    }

    fn init_params(&self, seed: u64) -> ParamVector<S> {
        self.inner.init_params(seed)
    }

    fn fan_in(&self, segment: &str, shape: &[usize]) -> usize {
        self.inner.fan_in(segment, shape)
    }
}
