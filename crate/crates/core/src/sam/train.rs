use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::grouping::{Granularity, GroupPartition};
use crate::model::{evaluate, loss_and_grad, Evaluation, Model};
use crate::params::ParamVector;
use crate::sam::objective::sam_objective;
use crate::sam::optim::OptimizerConfig;
use crate::sam::SamConfig;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
    /// Chunk size for evaluation passes.
    pub eval_chunk: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 1,
            batch_size: 32,
            seed: 0,
            eval_chunk: 512,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Warmup,
    Sam,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Warmup => "warmup",
            Phase::Sam => "sam",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub phase: Phase,
    pub batches: usize,
    /// Mean training objective over the epoch's batches.
    pub train_loss: f64,
    pub eval: Option<Evaluation>,
    /// Mean over batches of `‖g_0‖₂` at the uncorrupted weights.
    pub grad_norm: f64,
    /// Mean over batches of the per-segment norms of `g_0`, in layout order.
    pub segment_grad_norms: Vec<f64>,
    /// Forward/backward passes spent this epoch.
    pub passes: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainMetrics {
    pub epochs: Vec<EpochMetrics>,
    pub total_passes: usize,
}

/// Minibatch training with an optional SAM objective (warmup epochs run plain).
///
/// `on_epoch` sees each epoch's metrics as soon as they are complete.
#[allow(clippy::too_many_arguments)]
pub fn train<S, M>(
    model: &M,
    init: ParamVector<S>,
    train_set: &Dataset,
    eval_set: Option<&Dataset>,
    optimizer: &OptimizerConfig<S>,
    cfg: &SamConfig<S>,
    opts: &TrainOptions,
    mut on_epoch: impl FnMut(&EpochMetrics) -> Result<()>,
) -> Result<(ParamVector<S>, TrainMetrics)>
where
    S: Scalar,
    M: Model<S> + ?Sized,
{
    if opts.epochs == 0 {
        return Err(Error::arg("train needs at least one epoch"));
    }
    if opts.batch_size == 0 {
        return Err(Error::arg("batch size must be positive"));
    }
    if train_set.is_empty() {
        return Err(Error::arg("empty training set"));
    }
    optimizer.validate()?;
    cfg.validate()?;
    let layout = model.layout().clone();
    if init.layout().as_ref() != layout.as_ref() {
        return Err(Error::arg("initial parameters do not match the model"));
    }
    let partition = GroupPartition::new(cfg.granularity, &layout);
    let segments = GroupPartition::new(Granularity::Layer, &layout);
    let mut params = init;
    let mut opt = optimizer.build(params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut metrics = TrainMetrics::default();

    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        let active = cfg.active_at(epoch);
        let mut loss_sum = 0.0;
        let mut gnorm_sum = 0.0;
        let mut seg_sum = vec![0.0; segments.len()];
        let mut passes = 0;
        let batches: Vec<&[usize]> = order.chunks(opts.batch_size).collect();
        for (bi, idx) in batches.iter().enumerate() {
            let batch = train_set.batch::<S>(idx);
            let (loss, grad, clean_grad) = if active {
                let r = sam_objective(model, &params, &batch, cfg, &partition)?;
                passes += r.passes;
                (r.loss, r.grad, r.clean_grad)
            } else {
                let (l, g) = loss_and_grad(model, &params, &batch)?;
                passes += 1;
                (l, g.clone(), g)
            };
            if !loss.is_finite() || !grad.all_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: bi,
                    value: loss.as_f64(),
                });
            }
            loss_sum += loss.as_f64();
            gnorm_sum += clean_grad.l2_norm().as_f64();
            for (acc, n) in seg_sum.iter_mut().zip(segments.group_norms(clean_grad.as_slice())) {
                *acc += n.as_f64();
            }
            opt.step(&mut params, &grad)?;
        }
        let nb = batches.len() as f64;
        let eval = eval_set.map(|d| evaluate(model, &params, d, opts.eval_chunk)).transpose()?;
        let row = EpochMetrics {
            epoch,
            phase: if active { Phase::Sam } else { Phase::Warmup },
            batches: batches.len(),
            train_loss: loss_sum / nb,
            eval,
            grad_norm: gnorm_sum / nb,
            segment_grad_norms: seg_sum.into_iter().map(|v| v / nb).collect(),
            passes,
        };
        metrics.total_passes += passes;
        on_epoch(&row)?;
        metrics.epochs.push(row);
    }
    Ok((params, metrics))
}
